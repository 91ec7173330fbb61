#pragma once

#include <cstdint>
#include <vector>

#include "mtflock/kernel.hpp"
#include "mtflock/state.hpp"

namespace mtflock {

/// Time-stepping parameters. The step size must satisfy
/// 0 < h < min(1, 1/kappa).
struct SimParams {
  double kappa = 1.0;
  double h = 0.01;
  long steps = 0;
  std::uint64_t seed = 0;

  /// Throws std::domain_error on violated constraints.
  void validate() const;
};

/// A realized run: the full state and the scalar observables at every step
/// 0..steps. The kernel travels with the trajectory so downstream checks can
/// recover every derived constant.
struct Trajectory {
  Kernel kernel;
  SimParams params;
  std::vector<Ensemble> ensembles;            // steps + 1 entries
  std::vector<ObservableRecord> observables;  // aligned with ensembles

  long steps() const { return params.steps; }
  const Ensemble& at(long n) const {
    return ensembles[static_cast<std::size_t>(n)];
  }
};

/// One forward-Euler update of the discrete model:
///   x_i' = x_i + h v_i
///   v_i' = v_i + h kappa sum_j phi_ij (v_j - v_i)
/// with the weights evaluated at the current positions. For h*kappa <= 1 the
/// velocity update is a convex combination, so each new velocity stays in the
/// convex hull of the old ones.
Ensemble euler_step(const Ensemble& ensemble, const Kernel& kernel,
                    double kappa, double h);

/// Same update with a precomputed weight matrix for the current positions.
Ensemble euler_step_with_weights(const Ensemble& ensemble,
                                 const WeightMatrix& w, double kappa,
                                 double h);

/// Runs the discrete model for params.steps steps, recording observables at
/// every index. Deterministic and bitwise reproducible for identical inputs.
/// Throws DivergedError with the offending step index if the state stops
/// being finite.
Trajectory simulate(const Ensemble& initial, const Kernel& kernel,
                    const SimParams& params);

/// Default reference substep: min(h_sample/10, 1e-3), adjusted down so it
/// divides h_sample exactly.
double default_reference_substep(double h_sample);

/// High-accuracy trajectory of the continuous model
///   dx_i/dt = v_i,   dv_i/dt = kappa sum_j phi_ij (v_j - v_i)
/// integrated with the classical 4th-order Runge-Kutta method at step h_ref
/// and sampled exactly at t = n * h_sample. h_sample must be an integer
/// multiple of h_ref (within rounding); otherwise std::domain_error.
Trajectory reference_trajectory(const Ensemble& initial, const Kernel& kernel,
                                double kappa, double h_sample, long steps,
                                double h_ref);

/// Same with the default substep.
Trajectory reference_trajectory(const Ensemble& initial, const Kernel& kernel,
                                double kappa, double h_sample, long steps);

/// One classical 4th-order Runge-Kutta step of the continuous model.
Ensemble rk4_step(const Ensemble& state, const Kernel& kernel, double kappa,
                  double dt);

/// Final-step velocities as the asymptotic-velocity estimate. Requires the
/// run to have contracted to dv_frob(final) <= 1e-10 * dv_frob(0); throws
/// NotConvergedError carrying the final dv_frob otherwise.
Mat asymptotic_velocity(const Trajectory& trajectory);

}  // namespace mtflock
