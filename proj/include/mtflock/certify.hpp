#pragma once

#include <optional>
#include <span>
#include <vector>

#include "mtflock/dynamics.hpp"
#include "mtflock/kernel.hpp"
#include "mtflock/state.hpp"

namespace mtflock {

/// Admissibility certificate for an initial ensemble: flocking is guaranteed
/// when both strict conditions hold,
///
///   dx0 < M           (position shape discrepancy below the radius)
///   dv0 < budget      (velocity shape discrepancy below the psi integral)
///
/// where budget = kappa * [(M - dx0) - (n*phi_lip/2)(M^2 - dx0^2)] is the
/// closed form of kappa * int_{dx0}^{M} psi(s) ds. A constant kernel has
/// M = +inf and a divergent budget, so any finite data is admissible.
struct FlockingCertificate {
  double m_bound = 0.0;   // M; +inf for constant kernels
  double psi_at_m = 0.0;  // 3/4 when M is finite, 1 with the sentinel
  double dx0 = 0.0;
  double dv0 = 0.0;
  double budget = 0.0;
  bool admissible = false;
  double margin_x = 0.0;  // m_bound - dx0
  double margin_v = 0.0;  // budget - dv0
};

FlockingCertificate admissible(const Ensemble& initial, const Kernel& kernel,
                               double kappa);

/// Step-by-step verdicts for the shape-discrepancy recursions
///   dx(n+1) <= dx(n) + h dv(n)
///   dv(n+1) <= [1 - h kappa (1 - n*phi_lip * dx(n))] dv(n)
/// with slack tolerance 1e-10 * (1 + rhs). Violations are data, not errors.
struct RecursionReport {
  std::vector<char> position_ok;  // one entry per step transition
  std::vector<char> velocity_ok;
  std::optional<long> first_violation;
  bool all_ok = true;
};

RecursionReport check_recursions(const Trajectory& trajectory,
                                 const Kernel& kernel);

/// Asserts, for every step of an admissible run,
///   dx(n) <= M    and    dv(n) <= dv0 * (1 - h kappa psi(M))^n
/// at 1e-9 relative tolerance. The geometric factor is used directly (it is
/// what the recursion actually yields), not an e^{-Cnh} relaxation of it.
/// Throws std::domain_error when the certificate is not admissible.
struct EnvelopeReport {
  bool pass = true;
  double worst_velocity_margin = 0.0;  // min over steps of envelope - dv
  double worst_position_margin = 0.0;  // min over steps of M - dx (inf if M is)
  std::optional<long> first_violation;
};

EnvelopeReport check_flocking_envelope(const Trajectory& trajectory,
                                       const FlockingCertificate& certificate);

/// Asserts the asymptotic-velocity tail bound
///   |v_i^inf - v_i(n)| <= sqrt(N) dv0 (1 - h kappa psi(M))^n / psi(M)
/// for all particles and steps, with v^inf taken from asymptotic_velocity
/// (which must succeed; its error propagates as the precondition failure).
struct TailReport {
  bool pass = true;
  double worst_margin = 0.0;
  std::optional<long> first_violation;
};

TailReport check_velocity_tail(const Trajectory& trajectory,
                               const FlockingCertificate& certificate);

/// Margins of the two pointwise weight estimates on one ensemble:
///   pointwise:  min over (i,j,l) of phi_lip*|x_i-x_j| - |phi_il - phi_jl|
///   triple_sum: N*dx*dv^2 - sum over (i,j,l) of |dv_li| |dv_ij| |dx_ij|
/// Both are >= 0 up to roundoff.
struct KernelLemmaMargins {
  double pointwise_slack = 0.0;
  double triple_sum_slack = 0.0;
};

KernelLemmaMargins check_kernel_lemmas(const Ensemble& ensemble,
                                       const Kernel& kernel);

/// Discrete-vs-continuous comparison over a family of step sizes: for each h
/// the forward-Euler run is compared against the Runge-Kutta reference on
/// n <= floor(T/h), recording
///   sup_n |V^h(n) - V(nh)|_F          (velocity error)
///   sup_n |Dx^h(n) - Dx(nh)|_F        (position shape-discrepancy gap)
/// plus the fitted log-log order of the velocity error in h. The truncation
/// error maxima and the Lipschitz data (lf, r_star) of the stacked vector
/// field are reported as diagnostics only.
struct TransitionReport {
  std::vector<double> h_values;
  std::vector<double> sup_velocity_errors;
  std::vector<double> sup_dx_gaps;
  std::vector<long> horizons;                 // floor(T/h) per h
  std::vector<double> max_truncation_errors;  // diagnostic
  double slope = 0.0;  // 0 when the errors vanish identically
  double lf = 0.0;     // diagnostic
  double r_star = 0.0;  // diagnostic; +inf for constant kernels
};

TransitionReport transition_experiment(const Ensemble& initial,
                                       const Kernel& kernel, double kappa,
                                       double horizon,
                                       std::span<const double> h_values,
                                       double h_ref);

/// Closed-form coefficients of the one-step stability bound
///   X(n+1)^2 <= C1 X(n)^2 + C2 X(n) |dv(n)|_F + C3 |dv(n)|_F^2
/// evaluated from the per-step lambda/alpha and the kernel constants. For
/// constant kernels every L_a * M product is defined as zero: the bounds
/// those terms come from are identically zero when the weights do not depend
/// on positions.
struct StabilityCoefficients {
  double c1 = 0.0;
  double c2 = 0.0;
  double c3 = 0.0;
};

StabilityCoefficients stability_coefficients(double lambda, double alpha,
                                             const Kernel& kernel, int n_count,
                                             double kappa, double h);

/// Per-step record of the stability verification. Row n stores the state at
/// step n and the coefficients computed from step-n weights; quadratic_ok and
/// decay_ok certify the arrival at step n (the inequality instance driven by
/// step n-1 data, trivially true at n = 0), aggregate_ok the accumulated
/// bound at n.
struct StabilityStep {
  long step = 0;
  double x_n = 0.0;  // |dv - dv_bar|_F
  double y_n = 0.0;  // |dx - dx_bar|_F
  double lambda = 0.0;
  double alpha = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;
  double c3 = 0.0;
  double b1 = 0.0;
  double b2 = 0.0;
  double c_nh = 0.0;
  double quadratic_slack = 0.0;  // rhs - lhs of the arrival inequality
  bool quadratic_ok = true;
  bool decay_ok = true;
  bool aggregate_ok = true;
};

struct StabilityReport {
  double epsilon = 0.0;
  double b1 = 0.0;
  double b2 = 0.0;
  std::vector<StabilityStep> steps;  // rows 0..steps
  bool all_ok = true;
  std::optional<long> first_violation;
};

/// Verifies, step by step along two admissible trajectories with matching
/// kernel and parameters, the three stability inequality families:
///   (a) the quadratic one-step bound with C1, C2, C3;
///   (b) X(n+1) <= (1-eps) X(n) + b1 * q^n with q = 1 - h kappa psi(M),
///       b1 = sqrt(c0*eps + c1*h + c2*h^2) and b2 = -log(q), which makes the
///       decay envelope exactly the geometric one the flocking bound proves;
///   (c) X(n) + Y(n) <= X(0) + Y(0) + C(n,h) with
///       C(n,h) = h*D*(1-q^n)/(1-q) + D*q^n, D = b1 e^{b2}/(1-(1-eps)e^{b2}).
/// Tolerance 1e-9 relative per inequality. Requires 0 < h < eps < 1 and
/// h kappa psi(M) < eps; mismatched trajectories raise std::domain_error.
StabilityReport check_stability(const Trajectory& a, const Trajectory& b,
                                double epsilon);

}  // namespace mtflock
