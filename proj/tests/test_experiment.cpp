#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "mtflock/csv.hpp"
#include "mtflock/errors.hpp"
#include "mtflock/experiment.hpp"

using namespace mtflock;
namespace fs = std::filesystem;

namespace {

const char* kBaseConfig = R"(# smoke experiment
kernel.c1 = 0.1
kernel.c2 = 0.5
kernel.beta = 0.05
kappa = 1
h = 0.01
steps = 60
n_particles = 6
dim = 2
init.mode = uniform
init.pos_low = 0
init.pos_high = 1
init.vel_low = -0.005
init.vel_high = 0.005
init.seed = 42
target_dx0 = 0.5
)";

ExperimentConfig base_config() { return parse_config_text(kBaseConfig); }

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::path("test_experiment_out") / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string read_file(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  REQUIRE(in.good());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::vector<std::string> read_lines(const fs::path& file) {
  std::vector<std::string> lines;
  std::stringstream buffer(read_file(file));
  std::string line;
  while (std::getline(buffer, line)) lines.push_back(line);
  return lines;
}

std::map<std::string, std::string> read_manifest(const fs::path& file) {
  std::map<std::string, std::string> out;
  for (const std::string& line : read_lines(file)) {
    const auto eq = line.find(" = ");
    REQUIRE(eq != std::string::npos);
    out[line.substr(0, eq)] = line.substr(eq + 3);
  }
  return out;
}

}  // namespace

TEST_CASE("config parsing") {
  SUBCASE("valid config round-trips the values") {
    const ExperimentConfig cfg = base_config();
    CHECK(cfg.c1 == 0.1);
    CHECK(cfg.beta == 0.05);
    CHECK(cfg.steps == 60);
    CHECK(cfg.n_particles == 6);
    CHECK(cfg.init.seed == 42);
    REQUIRE(cfg.target_dx0.has_value());
    CHECK(*cfg.target_dx0 == 0.5);
    CHECK(cfg.epsilon == 0.5);  // default
    CHECK_FALSE(cfg.strict);
  }

  SUBCASE("missing required key") {
    std::string text = kBaseConfig;
    const auto pos = text.find("kernel.c1 = 0.1\n");
    text.erase(pos, std::string("kernel.c1 = 0.1\n").size());
    CHECK_THROWS_AS(parse_config_text(text), ConfigError);
  }

  SUBCASE("unknown key") {
    CHECK_THROWS_AS(parse_config_text(std::string(kBaseConfig) + "typo = 1\n"),
                    ConfigError);
  }

  SUBCASE("duplicate key") {
    CHECK_THROWS_AS(
        parse_config_text(std::string(kBaseConfig) + "kappa = 2\n"),
        ConfigError);
  }

  SUBCASE("malformed number") {
    std::string text = kBaseConfig;
    const auto pos = text.find("kappa = 1");
    text.replace(pos, 9, "kappa = x");
    CHECK_THROWS_AS(parse_config_text(text), ConfigError);
  }

  SUBCASE("step size must respect the coupling") {
    std::string text = kBaseConfig;
    const auto pos = text.find("h = 0.01");
    text.replace(pos, 8, "h = 1.50");
    CHECK_THROWS_AS(parse_config_text(text), ConfigError);
  }

  SUBCASE("bad init mode") {
    std::string text = kBaseConfig;
    const auto pos = text.find("init.mode = uniform");
    text.replace(pos, 19, "init.mode = gaussia");
    CHECK_THROWS_AS(parse_config_text(text), ConfigError);
  }

  SUBCASE("invalid truncation interval") {
    const char* text = R"(
kernel.c1 = 0.1
kernel.c2 = 0.5
kernel.beta = 0.05
kappa = 1
h = 0.01
steps = 10
n_particles = 4
dim = 2
init.mode = truncated-normal
init.pos_mean = 0
init.pos_sd = 1
init.pos_lo = 1
init.pos_hi = -1
init.vel_mean = 0
init.vel_sd = 1
init.vel_lo = -1
init.vel_hi = 1
)";
    CHECK_THROWS_AS(parse_config_text(text), ConfigError);
  }

  SUBCASE("epsilon bounds") {
    CHECK_THROWS_AS(
        parse_config_text(std::string(kBaseConfig) + "epsilon = 1.5\n"),
        ConfigError);
  }
}

TEST_CASE("init_ensemble") {
  SUBCASE("deterministic for a fixed seed") {
    const ExperimentConfig cfg = base_config();
    const Ensemble a = init_ensemble(cfg);
    const Ensemble b = init_ensemble(cfg);
    CHECK(a == b);
  }

  SUBCASE("different seeds differ") {
    ExperimentConfig cfg = base_config();
    const Ensemble a = init_ensemble(cfg);
    cfg.init.seed = 43;
    const Ensemble b = init_ensemble(cfg);
    CHECK_FALSE(a == b);
  }

  SUBCASE("target_dx0 rescales the position discrepancy") {
    ExperimentConfig cfg = base_config();
    cfg.target_dx0 = 0.95;
    const Ensemble e = init_ensemble(cfg);
    const double m = cfg.kernel().flocking_radius();
    CHECK(delta_frobenius(e.positions) ==
          doctest::Approx(0.95 * m).epsilon(1e-12));
  }

  SUBCASE("uniform samples respect the bounds") {
    ExperimentConfig cfg = base_config();
    cfg.target_dx0.reset();
    const Ensemble e = init_ensemble(cfg);
    for (int i = 0; i < e.n(); ++i) {
      for (int k = 0; k < e.dim(); ++k) {
        CHECK(e.positions(i, k) >= 0.0);
        CHECK(e.positions(i, k) < 1.0);
        CHECK(e.velocities(i, k) >= -0.005);
        CHECK(e.velocities(i, k) < 0.005);
      }
    }
  }

  SUBCASE("truncated-normal samples stay inside the interval") {
    const char* text = R"(
kernel.c1 = 0.1
kernel.c2 = 0.5
kernel.beta = 0.05
kappa = 1
h = 0.01
steps = 10
n_particles = 12
dim = 3
init.mode = truncated-normal
init.pos_mean = 0.5
init.pos_sd = 2
init.pos_lo = 0
init.pos_hi = 1
init.vel_mean = 0
init.vel_sd = 0.5
init.vel_lo = -0.1
init.vel_hi = 0.1
init.seed = 5
)";
    const Ensemble e = init_ensemble(parse_config_text(text));
    for (int i = 0; i < e.n(); ++i) {
      for (int k = 0; k < e.dim(); ++k) {
        CHECK(e.positions(i, k) >= 0.0);
        CHECK(e.positions(i, k) <= 1.0);
        CHECK(std::abs(e.velocities(i, k)) <= 0.1);
      }
    }
  }

  SUBCASE("target_dx0 with a constant kernel is a config error") {
    ExperimentConfig cfg = base_config();
    cfg.beta = 0.0;
    CHECK_THROWS_AS(init_ensemble(cfg), ConfigError);
  }
}

TEST_CASE("simulate subcommand writes observables and manifest") {
  const ExperimentConfig cfg = base_config();
  const fs::path dir = fresh_dir("simulate");
  CHECK(run_experiment("simulate", cfg, dir) == 0);

  const std::vector<std::string> lines = read_lines(dir / "observables.csv");
  REQUIRE(lines.size() == 62);  // header + steps + 1
  CHECK(lines.front() ==
        "step,t,dx_frob,dv_frob,diam_x,diam_v,lambda,alpha,envelope_v,"
        "x_bound_M");

  const auto manifest = read_manifest(dir / "manifest.txt");
  CHECK(manifest.at("subcommand") == "simulate");
  CHECK(manifest.count("derived.la") == 1);
  CHECK(manifest.count("derived.m") == 1);
  CHECK(manifest.at("derived.admissible") == "true");

  // derived columns recompute from the manifest constants
  const double dv0 = std::stod(manifest.at("derived.dv0"));
  const double psi_m = std::stod(manifest.at("derived.psi_m"));
  const double h = std::stod(manifest.at("h"));
  const double kappa = std::stod(manifest.at("kappa"));
  const double q = 1.0 - h * kappa * psi_m;
  for (std::size_t row = 1; row < lines.size(); ++row) {
    const auto fields = split_csv_line(lines[row]);
    REQUIRE(fields.size() == 10);
    const long step = std::stol(fields[0]);
    const double envelope = std::stod(fields[8]);
    const double expected = dv0 * std::pow(q, static_cast<double>(step));
    CHECK(envelope ==
          doctest::Approx(expected).epsilon(1e-9).scale(1.0 + expected));
    CHECK(std::stod(fields[1]) ==
          doctest::Approx(step * h).epsilon(1e-12));
  }
}

TEST_CASE("identical config and seed give byte-identical CSV output") {
  const ExperimentConfig cfg = base_config();
  const fs::path dir1 = fresh_dir("repeat1");
  const fs::path dir2 = fresh_dir("repeat2");
  CHECK(run_experiment("simulate", cfg, dir1) == 0);
  CHECK(run_experiment("simulate", cfg, dir2) == 0);
  CHECK(read_file(dir1 / "observables.csv") ==
        read_file(dir2 / "observables.csv"));
  CHECK(read_file(dir1 / "manifest.txt") == read_file(dir2 / "manifest.txt"));
}

TEST_CASE("certify subcommand") {
  SUBCASE("admissible run passes every check") {
    const ExperimentConfig cfg = base_config();
    const fs::path dir = fresh_dir("certify_ok");
    CHECK(run_experiment("certify", cfg, dir) == 0);
    const auto manifest = read_manifest(dir / "manifest.txt");
    CHECK(manifest.at("check.recursions") == "pass");
    CHECK(manifest.at("check.envelope") == "pass");
  }

  SUBCASE("strict mode rejects data scaled beyond the radius") {
    ExperimentConfig cfg = base_config();
    cfg.target_dx0 = 1.05;
    cfg.strict = true;
    const fs::path dir = fresh_dir("certify_strict");
    CHECK(run_experiment("certify", cfg, dir) == 3);
    const auto manifest = read_manifest(dir / "manifest.txt");
    CHECK(manifest.at("derived.admissible") == "false");
    CHECK_FALSE(fs::exists(dir / "observables.csv"));
  }
}

TEST_CASE("transition subcommand") {
  ExperimentConfig cfg = base_config();
  cfg.transition_h_values = {0.02, 0.01};
  cfg.transition_horizon = 2.0;
  cfg.transition_h_ref = 2e-3;
  const fs::path dir = fresh_dir("transition");
  CHECK(run_experiment("transition", cfg, dir) == 0);
  const std::vector<std::string> lines = read_lines(dir / "transition.csv");
  REQUIRE(lines.size() == 3);
  CHECK(lines.front() == "h,sup_v_error,sup_dx_gap,n_horizon");
  const auto first = split_csv_line(lines[1]);
  CHECK(first[0] == "0.02");
  CHECK(std::stol(first[3]) == 100);
}

TEST_CASE("stability subcommand") {
  ExperimentConfig cfg = base_config();
  cfg.steps = 150;
  const fs::path dir = fresh_dir("stability");
  CHECK(run_experiment("stability", cfg, dir) == 0);
  const std::vector<std::string> lines = read_lines(dir / "stability.csv");
  REQUIRE(lines.size() == 152);
  CHECK(lines.front() ==
        "step,X_n,Y_n,C1,C2,C3,b1,b2,C_nh,prop42_pass,lem46_pass,thm41_pass");
  const auto manifest = read_manifest(dir / "manifest.txt");
  const double b1 = std::stod(manifest.at("derived.b1"));
  const double b2 = std::stod(manifest.at("derived.b2"));
  const double epsilon = std::stod(manifest.at("epsilon"));
  const double h = std::stod(manifest.at("h"));
  // the accumulated bound recomputes from the manifest constants
  const double q = std::exp(-b2);
  const double big_d = b1 / (q - (1.0 - epsilon));
  for (std::size_t row = 1; row < lines.size(); ++row) {
    const auto fields = split_csv_line(lines[row]);
    REQUIRE(fields.size() == 12);
    const double n = std::stod(fields[0]);
    CHECK(std::stod(fields[6]) == doctest::Approx(b1).epsilon(1e-12));
    CHECK(std::stod(fields[7]) == doctest::Approx(b2).epsilon(1e-12));
    const double qn = std::pow(q, n);
    const double c_nh = h * big_d * (1.0 - qn) / (1.0 - q) + big_d * qn;
    CHECK(std::stod(fields[8]) == doctest::Approx(c_nh).epsilon(1e-9));
    CHECK(fields[9] == "1");
    CHECK(fields[10] == "1");
    CHECK(fields[11] == "1");
  }

  SUBCASE("inadmissible data without strict is skipped, not failed") {
    ExperimentConfig bad = cfg;
    bad.target_dx0 = 1.2;
    const fs::path dir2 = fresh_dir("stability_skip");
    CHECK(run_experiment("stability", bad, dir2) == 0);
    CHECK_FALSE(fs::exists(dir2 / "stability.csv"));
    const auto manifest = read_manifest(dir2 / "manifest.txt");
    CHECK(manifest.at("check.stability") == "skipped-inadmissible");
  }
}

TEST_CASE("reindex-check subcommand") {
  ExperimentConfig cfg = base_config();
  cfg.reindex_cases = 64;
  cfg.steps = 300;
  const fs::path dir = fresh_dir("reindex");
  CHECK(run_experiment("reindex-check", cfg, dir) == 0);
  const std::vector<std::string> lines = read_lines(dir / "reindex.csv");
  REQUIRE(lines.size() >= 65);
  CHECK(lines.front() == "case_id,direct_sum,monotone_sum,slack,pass");
  for (std::size_t row = 1; row < lines.size(); ++row) {
    const auto fields = split_csv_line(lines[row]);
    REQUIRE(fields.size() == 5);
    const double direct = std::stod(fields[1]);
    const double monotone = std::stod(fields[2]);
    CHECK(std::stod(fields[3]) ==
          doctest::Approx(direct - monotone).epsilon(1e-12));
    CHECK(monotone <= direct + 1e-12);
    CHECK(fields[4] == "1");
  }
}

TEST_CASE("sweep subcommand") {
  ExperimentConfig cfg = base_config();
  cfg.steps = 40;
  cfg.sweep_betas = {0.01, 0.05};
  cfg.sweep_seeds = {1, 2};
  cfg.sweep_n_values = {4};
  const fs::path dir = fresh_dir("sweep");
  CHECK(run_experiment("sweep", cfg, dir) == 0);
  CHECK(fs::exists(dir / "beta0.01_seed1_n4" / "observables.csv"));
  CHECK(fs::exists(dir / "beta0.05_seed2_n4" / "manifest.txt"));
  const auto manifest = read_manifest(dir / "manifest.txt");
  CHECK(manifest.at("derived.runs") == "4");
}

TEST_CASE("unknown subcommand raises a config error") {
  const ExperimentConfig cfg = base_config();
  CHECK_THROWS_AS(run_experiment("demolish", cfg, fresh_dir("unknown")),
                  ConfigError);
}
