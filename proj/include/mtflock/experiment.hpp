#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mtflock/certify.hpp"
#include "mtflock/dynamics.hpp"
#include "mtflock/state.hpp"

namespace mtflock {

enum class InitMode { Uniform, TruncatedNormal };

/// Initial-sampling parameters. Uniform mode draws every coordinate from
/// [low, high); truncated-normal mode draws Normal(mean, sd) restricted to
/// [lo, hi]. Positions and velocities carry separate parameter sets.
struct InitSpec {
  InitMode mode = InitMode::Uniform;
  std::uint64_t seed = 0;

  double pos_low = 0.0, pos_high = 1.0;
  double vel_low = -1.0, vel_high = 1.0;

  double pos_mean = 0.0, pos_sd = 1.0, pos_lo = -1.0, pos_hi = 1.0;
  double vel_mean = 0.0, vel_sd = 1.0, vel_lo = -1.0, vel_hi = 1.0;
};

/// One experiment, as read from a flat key=value config file (dotted keys,
/// '#' comments). See README for the full key list.
struct ExperimentConfig {
  double c1 = 0.0, c2 = 0.0, beta = 0.0;
  double kappa = 0.0;
  double h = 0.0;
  long steps = 0;
  int n_particles = 0;
  int dim = 0;
  InitSpec init;
  std::optional<double> target_dx0;  // multiple of the flocking radius
  double epsilon = 0.5;
  bool strict = false;

  // per-subcommand knobs, all optional in the file
  std::vector<double> transition_h_values{0.02, 0.01, 0.005};
  double transition_horizon = 10.0;
  double transition_h_ref = 1e-3;
  double stability_perturbation = 1e-3;
  long reindex_cases = 10000;
  int reindex_max_len = 50;
  std::vector<double> sweep_betas;
  std::vector<std::uint64_t> sweep_seeds;
  std::vector<int> sweep_n_values{10, 20, 50};

  Kernel kernel() const { return Kernel(c1, c2, beta); }
  SimParams sim_params() const {
    return SimParams{kappa, h, steps, init.seed};
  }
};

/// Parses and validates config text; throws ConfigError on malformed input,
/// unknown keys, missing required keys, or violated constraints.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Deterministic initial ensemble for the config. With target_dx0 set, the
/// positions are recentered about the origin and scaled so that the initial
/// position shape discrepancy equals target_dx0 * M to within 1e-12 relative.
Ensemble init_ensemble(const ExperimentConfig& config);

/// Executes one subcommand ("simulate", "certify", "transition", "stability",
/// "reindex-check", "sweep"), writing CSV files and a run manifest under
/// out_dir. Returns the process exit code: 0 ok, 1 a requested inequality
/// check failed, 3 strict mode with inadmissible initial data. Config errors
/// (exit 2) are raised as ConfigError before anything is written.
int run_experiment(const std::string& subcommand, const ExperimentConfig& config,
                   const std::filesystem::path& out_dir);

}  // namespace mtflock
