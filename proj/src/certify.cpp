#include "mtflock/certify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "mtflock/errors.hpp"

namespace mtflock {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool within(double lhs, double rhs, double rel_tol) {
  return lhs <= rhs + rel_tol * (1.0 + std::abs(rhs));
}

// L_a * M collapses to c1 / (4 (1 + c2/c1)) for every non-constant kernel;
// for constant kernels the bounds this product enters are identically zero,
// so the sentinel maps it to zero instead of taking the (finite) limit.
double la_times_m(const Kernel& kernel) {
  if (kernel.is_constant()) return 0.0;
  return kernel.lipschitz_constant() * kernel.flocking_radius();
}

}  // namespace

FlockingCertificate admissible(const Ensemble& initial, const Kernel& kernel,
                               double kappa) {
  validate_ensemble(initial);
  if (!(kappa > 0.0)) {
    throw std::domain_error("coupling strength must be positive");
  }

  FlockingCertificate cert;
  cert.dx0 = delta_frobenius(initial.positions);
  cert.dv0 = delta_frobenius(initial.velocities);
  cert.m_bound = kernel.flocking_radius();

  if (std::isinf(cert.m_bound)) {
    cert.psi_at_m = 1.0;
    cert.budget = kInf;
    cert.admissible = true;
  } else {
    cert.psi_at_m = kernel.psi(initial.n(), cert.m_bound);
    const double npl = kernel.n_phi_lip();
    cert.budget = kappa * ((cert.m_bound - cert.dx0) -
                           0.5 * npl * (cert.m_bound * cert.m_bound -
                                        cert.dx0 * cert.dx0));
    cert.admissible = cert.dx0 < cert.m_bound && cert.dv0 < cert.budget;
  }
  cert.margin_x = cert.m_bound - cert.dx0;
  cert.margin_v = cert.budget - cert.dv0;
  return cert;
}

RecursionReport check_recursions(const Trajectory& trajectory,
                                 const Kernel& kernel) {
  const double h = trajectory.params.h;
  const double kappa = trajectory.params.kappa;
  const double npl = kernel.n_phi_lip();

  RecursionReport report;
  const long steps = trajectory.steps();
  report.position_ok.reserve(static_cast<std::size_t>(steps));
  report.velocity_ok.reserve(static_cast<std::size_t>(steps));
  for (long n = 0; n < steps; ++n) {
    const ObservableRecord& cur =
        trajectory.observables[static_cast<std::size_t>(n)];
    const ObservableRecord& next =
        trajectory.observables[static_cast<std::size_t>(n + 1)];

    const double x_rhs = cur.dx_frob + h * cur.dv_frob;
    const bool x_ok = within(next.dx_frob, x_rhs, 1e-10);

    const double factor = 1.0 - h * kappa * (1.0 - npl * cur.dx_frob);
    const double v_rhs = factor * cur.dv_frob;
    const bool v_ok = within(next.dv_frob, v_rhs, 1e-10);

    report.position_ok.push_back(x_ok ? 1 : 0);
    report.velocity_ok.push_back(v_ok ? 1 : 0);
    if (!(x_ok && v_ok)) {
      report.all_ok = false;
      if (!report.first_violation) report.first_violation = n + 1;
    }
  }
  return report;
}

EnvelopeReport check_flocking_envelope(const Trajectory& trajectory,
                                       const FlockingCertificate& certificate) {
  if (!certificate.admissible) {
    throw std::domain_error(
        "flocking envelope requires an admissible certificate");
  }
  const double q =
      1.0 - trajectory.params.h * trajectory.params.kappa * certificate.psi_at_m;

  EnvelopeReport report;
  report.worst_velocity_margin = kInf;
  report.worst_position_margin = kInf;

  double envelope = certificate.dv0;
  for (long n = 0; n <= trajectory.steps(); ++n) {
    const ObservableRecord& obs =
        trajectory.observables[static_cast<std::size_t>(n)];

    bool ok = true;
    if (std::isfinite(certificate.m_bound)) {
      report.worst_position_margin = std::min(
          report.worst_position_margin, certificate.m_bound - obs.dx_frob);
      if (!(obs.dx_frob <= certificate.m_bound * (1.0 + 1e-9))) ok = false;
    }
    report.worst_velocity_margin =
        std::min(report.worst_velocity_margin, envelope - obs.dv_frob);
    if (!(obs.dv_frob <= envelope * (1.0 + 1e-9))) ok = false;

    if (!ok) {
      report.pass = false;
      if (!report.first_violation) report.first_violation = n;
    }
    envelope *= q;
  }
  return report;
}

TailReport check_velocity_tail(const Trajectory& trajectory,
                               const FlockingCertificate& certificate) {
  const Mat v_inf = asymptotic_velocity(trajectory);  // precondition gate
  const double q =
      1.0 - trajectory.params.h * trajectory.params.kappa * certificate.psi_at_m;
  const int n_particles = trajectory.ensembles.front().n();
  const double base = std::sqrt(static_cast<double>(n_particles)) *
                      certificate.dv0 / certificate.psi_at_m;

  TailReport report;
  report.worst_margin = kInf;
  double decay = 1.0;
  for (long n = 0; n <= trajectory.steps(); ++n) {
    const Mat& v = trajectory.at(n).velocities;
    const double bound = base * decay;
    for (int i = 0; i < n_particles; ++i) {
      const double dist = row_distance(v.row(i), v_inf.row(i));
      report.worst_margin = std::min(report.worst_margin, bound - dist);
      if (!(dist <= bound * (1.0 + 1e-9))) {
        report.pass = false;
        if (!report.first_violation) report.first_violation = n;
      }
    }
    decay *= q;
  }
  return report;
}

KernelLemmaMargins check_kernel_lemmas(const Ensemble& ensemble,
                                       const Kernel& kernel) {
  validate_ensemble(ensemble);
  const int n = ensemble.n();
  const WeightMatrix w = weights(kernel, ensemble.positions);
  const double lip = kernel.phi_lip(n);

  KernelLemmaMargins margins;
  margins.pointwise_slack = kInf;

  // Pairwise norm tables; the triple sums then factor into row sums.
  Mat x_norm(n, n);
  Mat v_norm(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      x_norm(i, j) =
          row_distance(ensemble.positions.row(i), ensemble.positions.row(j));
      v_norm(i, j) =
          row_distance(ensemble.velocities.row(i), ensemble.velocities.row(j));
    }
  }

  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double allowance = lip * x_norm(i, j);
      for (int l = 0; l < n; ++l) {
        const double slack = allowance - std::abs(w(i, l) - w(j, l));
        if (slack < margins.pointwise_slack) margins.pointwise_slack = slack;
      }
    }
  }

  double triple = 0.0;
  for (int i = 0; i < n; ++i) {
    double incoming = 0.0;  // sum_l |dv_li|
    for (int l = 0; l < n; ++l) incoming += v_norm(l, i);
    double mixed = 0.0;  // sum_j |dv_ij| |dx_ij|
    for (int j = 0; j < n; ++j) mixed += v_norm(i, j) * x_norm(i, j);
    triple += incoming * mixed;
  }
  const double dx = delta_frobenius(ensemble.positions);
  const double dv = delta_frobenius(ensemble.velocities);
  margins.triple_sum_slack = static_cast<double>(n) * dx * dv * dv - triple;
  return margins;
}

namespace {

// Plain Frobenius norm over all coordinates of (a - b).
double coordinate_gap(const Mat& a, const Mat& b) {
  double sum = 0.0;
  for (int i = 0; i < a.rows(); ++i) {
    for (int k = 0; k < a.cols(); ++k) {
      const double d = a(i, k) - b(i, k);
      sum += d * d;
    }
  }
  return std::sqrt(sum);
}

// |f(prev) - (cur - prev)/h| over the stacked (positions, velocities) state.
double truncation_error(const Kernel& kernel, double kappa,
                        const Ensemble& prev, const Ensemble& cur, double h) {
  const WeightMatrix w = weights(kernel, prev.positions);
  const int n = prev.n();
  const int d = prev.dim();
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < d; ++k) {
      const double quotient_x = (cur.positions(i, k) - prev.positions(i, k)) / h;
      const double gap_x = prev.velocities(i, k) - quotient_x;
      sum += gap_x * gap_x;

      double acc = 0.0;
      for (int j = 0; j < n; ++j) {
        acc += w(i, j) * (prev.velocities(j, k) - prev.velocities(i, k));
      }
      const double quotient_v =
          (cur.velocities(i, k) - prev.velocities(i, k)) / h;
      const double gap_v = kappa * acc - quotient_v;
      sum += gap_v * gap_v;
    }
  }
  return std::sqrt(sum);
}

double fit_loglog_slope(const std::vector<double>& h_values,
                        const std::vector<double>& errors) {
  if (h_values.size() < 2) return 0.0;  // nothing to regress against
  for (double e : errors) {
    if (!(e > 0.0)) return 0.0;  // nothing decays, no order to fit
  }
  const std::size_t m = h_values.size();
  double sx = 0.0, sy = 0.0;
  std::vector<double> xs(m), ys(m);
  for (std::size_t i = 0; i < m; ++i) {
    xs[i] = std::log(h_values[i]);
    ys[i] = std::log(errors[i]);
    sx += xs[i];
    sy += ys[i];
  }
  const double mx = sx / static_cast<double>(m);
  const double my = sy / static_cast<double>(m);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    num += (xs[i] - mx) * (ys[i] - my);
    den += (xs[i] - mx) * (xs[i] - mx);
  }
  if (!(den > 0.0)) return 0.0;  // all h equal
  return num / den;
}

}  // namespace

TransitionReport transition_experiment(const Ensemble& initial,
                                       const Kernel& kernel, double kappa,
                                       double horizon,
                                       std::span<const double> h_values,
                                       double h_ref) {
  validate_ensemble(initial);
  if (h_values.empty()) throw std::domain_error("need at least one step size");
  if (!(horizon > 0.0)) throw std::domain_error("horizon must be positive");
  if (!(h_ref > 0.0)) throw std::domain_error("h_ref must be positive");

  TransitionReport report;
  std::vector<long> ratios;
  std::vector<Trajectory> discrete;
  for (double h : h_values) {
    SimParams params{kappa, h, 0, 0};
    params.steps = static_cast<long>(std::floor(horizon / h + 1e-9));
    params.validate();
    const long ratio = std::llround(h / h_ref);
    if (ratio < 1 ||
        std::abs(h - static_cast<double>(ratio) * h_ref) > 1e-9 * h) {
      throw std::domain_error(
          "every h must be an integer multiple of h_ref; offending h = " +
          std::to_string(h));
    }
    try {
      discrete.push_back(simulate(initial, kernel, params));
    } catch (const DivergedError& err) {
      throw DivergedError(err.step, "divergent run at h = " +
                                        std::to_string(h) + ": " + err.what());
    }
    report.h_values.push_back(h);
    report.horizons.push_back(params.steps);
    ratios.push_back(ratio);
  }

  const std::size_t runs = report.h_values.size();
  report.sup_velocity_errors.assign(runs, 0.0);
  report.sup_dx_gaps.assign(runs, 0.0);
  report.max_truncation_errors.assign(runs, 0.0);

  // One fine integration shared by all step sizes; each run samples it on its
  // own sub-grid of the h_ref lattice.
  long fine_steps = 0;
  for (std::size_t i = 0; i < runs; ++i) {
    fine_steps = std::max(fine_steps, report.horizons[i] * ratios[i]);
  }
  std::vector<Ensemble> last_sample(runs, initial);

  Ensemble fine = initial;
  for (long k = 0;; ++k) {
    if (!fine.all_finite()) {
      throw DivergedError(k, "non-finite reference state");
    }
    for (std::size_t i = 0; i < runs; ++i) {
      if (k % ratios[i] != 0) continue;
      const long n = k / ratios[i];
      if (n > report.horizons[i]) continue;

      const Ensemble& approx = discrete[i].at(n);
      report.sup_velocity_errors[i] =
          std::max(report.sup_velocity_errors[i],
                   coordinate_gap(approx.velocities, fine.velocities));
      report.sup_dx_gaps[i] = std::max(
          report.sup_dx_gaps[i],
          delta_frobenius(difference(approx.positions, fine.positions)));
      if (n > 0) {
        report.max_truncation_errors[i] = std::max(
            report.max_truncation_errors[i],
            truncation_error(kernel, kappa, last_sample[i], fine,
                             report.h_values[i]));
      }
      last_sample[i] = fine;
    }
    if (k == fine_steps) break;
    fine = rk4_step(fine, kernel, kappa, h_ref);
  }

  report.slope = fit_loglog_slope(report.h_values, report.sup_velocity_errors);
  report.lf = std::sqrt(1.0 + kappa * kappa +
                        (kernel.c2() / kernel.c1()) * (kernel.c2() / kernel.c1()));
  if (kernel.is_constant()) {
    report.r_star = kInf;
  } else {
    const double y0_norm =
        std::sqrt(std::pow(coordinate_gap(initial.positions,
                                          Mat(initial.n(), initial.dim())),
                           2) +
                  std::pow(coordinate_gap(initial.velocities,
                                          Mat(initial.n(), initial.dim())),
                           2));
    report.r_star = report.lf * kernel.c1() /
                        (2.0 * kappa * (1.0 + kernel.c2() / kernel.c1()) *
                         kernel.lipschitz_constant()) -
                    y0_norm;
  }
  return report;
}

StabilityCoefficients stability_coefficients(double lambda, double alpha,
                                             const Kernel& kernel, int n_count,
                                             double kappa, double h) {
  if (n_count < 1) throw std::domain_error("need at least one particle");
  const double lam = la_times_m(kernel);
  const double ratio = 1.0 + kernel.c2() / kernel.c1();
  const double c1sq = kernel.c1() * kernel.c1();
  const double contraction = 1.0 - h * kappa * lambda;
  const double hk = h * kappa;

  StabilityCoefficients out;
  out.c1 = contraction * contraction +
           4.0 * hk * hk *
               (alpha + lam * lam * ratio * ratio /
                            (static_cast<double>(n_count) * c1sq)) +
           2.0 * std::sqrt(2.0) * hk * contraction *
               std::sqrt(alpha + lam * lam * ratio * ratio / c1sq);
  out.c2 = 8.0 * hk * lam / kernel.c1() * contraction * ratio;
  out.c3 = 32.0 * hk * hk * lam * lam / c1sq * ratio * ratio;
  return out;
}

StabilityReport check_stability(const Trajectory& a, const Trajectory& b,
                                double epsilon) {
  if (a.kernel.c1() != b.kernel.c1() || a.kernel.c2() != b.kernel.c2() ||
      a.kernel.beta() != b.kernel.beta() ||
      a.params.kappa != b.params.kappa || a.params.h != b.params.h ||
      a.params.steps != b.params.steps) {
    throw std::domain_error("stability check requires matching kernel/params");
  }
  const Ensemble& a0 = a.ensembles.front();
  const Ensemble& b0 = b.ensembles.front();
  if (a0.n() != b0.n() || a0.dim() != b0.dim()) {
    throw std::domain_error("stability check requires matching ensemble shape");
  }

  const double h = a.params.h;
  const double kappa = a.params.kappa;
  if (!(h < epsilon && epsilon < 1.0)) {
    throw std::domain_error("stability check requires 0 < h < epsilon < 1");
  }

  const FlockingCertificate cert_a = admissible(a0, a.kernel, kappa);
  const FlockingCertificate cert_b = admissible(b0, b.kernel, kappa);
  if (!cert_a.admissible || !cert_b.admissible) {
    throw std::domain_error("stability check requires admissible trajectories");
  }

  const double psi_m = cert_a.psi_at_m;
  const double q = 1.0 - h * kappa * psi_m;
  if (!(q > 1.0 - epsilon)) {
    throw std::domain_error(
        "stability check requires h*kappa*psi(M) < epsilon");
  }

  const double lam = la_times_m(a.kernel);
  const double ratio = 1.0 + a.kernel.c2() / a.kernel.c1();
  const double c1k = a.kernel.c1();
  const double dv0a = cert_a.dv0;
  const double dv0b = cert_b.dv0;
  const double init_sq = dv0a * dv0a + dv0b * dv0b;

  const double cbar0 = 4.0 * init_sq;
  const double cbar1 =
      16.0 * kappa * (1.0 + lam / c1k * ratio) * init_sq +
      4.0 * kappa * lam / c1k * ratio * dv0a * dv0a;
  const double cbar2 =
      32.0 * kappa * kappa * lam * lam / (c1k * c1k) * ratio * ratio * dv0a *
      dv0a;

  StabilityReport report;
  report.epsilon = epsilon;
  report.b1 = std::sqrt(cbar0 * epsilon + cbar1 * h + cbar2 * h * h);
  report.b2 = -std::log(q);  // makes exp(-b2 n) the exact geometric factor

  const double big_d = report.b1 / (q - (1.0 - epsilon));
  const long steps = a.params.steps;
  const int n_count = a0.n();

  double x_prev = 0.0;
  double dv_prev = 0.0;
  StabilityCoefficients coeff_prev;
  double q_pow = 1.0;       // q^n at the loop index
  double q_pow_prev = 1.0;  // q^(n-1)
  double x0 = 0.0, y0 = 0.0;

  report.steps.reserve(static_cast<std::size_t>(steps) + 1);
  for (long n = 0; n <= steps; ++n) {
    const Ensemble& ea = a.at(n);
    const Ensemble& eb = b.at(n);
    StabilityStep row;
    row.step = n;
    row.x_n = delta_frobenius(difference(ea.velocities, eb.velocities));
    row.y_n = delta_frobenius(difference(ea.positions, eb.positions));
    // lambda/alpha of the comparison trajectory drive the coefficients
    row.lambda = b.observables[static_cast<std::size_t>(n)].lambda_min;
    row.alpha = b.observables[static_cast<std::size_t>(n)].alpha_max;
    const StabilityCoefficients coeff = stability_coefficients(
        row.lambda, row.alpha, a.kernel, n_count, kappa, h);
    row.c1 = coeff.c1;
    row.c2 = coeff.c2;
    row.c3 = coeff.c3;
    row.b1 = report.b1;
    row.b2 = report.b2;

    if (n == 0) {
      x0 = row.x_n;
      y0 = row.y_n;
      row.c_nh = big_d;  // h*D*(1-q^0)/(1-q) + D*q^0
      row.quadratic_slack = 0.0;
    } else {
      const double dva = dv_prev;
      const double quad_rhs = coeff_prev.c1 * x_prev * x_prev +
                              coeff_prev.c2 * x_prev * dva +
                              coeff_prev.c3 * dva * dva;
      const double quad_lhs = row.x_n * row.x_n;
      row.quadratic_slack = quad_rhs - quad_lhs;
      row.quadratic_ok = within(quad_lhs, quad_rhs, 1e-9);

      const double decay_rhs = (1.0 - epsilon) * x_prev + report.b1 * q_pow_prev;
      row.decay_ok = within(row.x_n, decay_rhs, 1e-9);

      row.c_nh =
          h * big_d * (1.0 - q_pow) / (1.0 - q) + big_d * q_pow;
    }
    const double agg_rhs = x0 + y0 + row.c_nh;
    row.aggregate_ok = within(row.x_n + row.y_n, agg_rhs, 1e-9);

    if (!(row.quadratic_ok && row.decay_ok && row.aggregate_ok)) {
      report.all_ok = false;
      if (!report.first_violation) report.first_violation = n;
    }

    x_prev = row.x_n;
    dv_prev = a.observables[static_cast<std::size_t>(n)].dv_frob;
    coeff_prev = coeff;
    q_pow_prev = q_pow;
    q_pow *= q;
    report.steps.push_back(row);
  }
  return report;
}

}  // namespace mtflock
