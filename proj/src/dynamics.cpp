#include "mtflock/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

#include "mtflock/errors.hpp"

namespace mtflock {

void SimParams::validate() const {
  if (!(kappa > 0.0) || !std::isfinite(kappa)) {
    throw std::domain_error("coupling strength must be positive");
  }
  const double h_max = std::min(1.0, 1.0 / kappa);
  if (!(h > 0.0) || !(h < h_max)) {
    throw std::domain_error("time step must satisfy 0 < h < min(1, 1/kappa)");
  }
  if (steps < 0) throw std::domain_error("step count must be non-negative");
}

Ensemble euler_step_with_weights(const Ensemble& ensemble,
                                 const WeightMatrix& w, double kappa,
                                 double h) {
  const int n = ensemble.n();
  const int d = ensemble.dim();
  Ensemble next{Mat(n, d), Mat(n, d)};
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < d; ++k) {
      next.positions(i, k) =
          ensemble.positions(i, k) + h * ensemble.velocities(i, k);
    }
  }
  const double gain = h * kappa;
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < d; ++k) {
      double acc = 0.0;
      for (int j = 0; j < n; ++j) {
        acc += w(i, j) * (ensemble.velocities(j, k) - ensemble.velocities(i, k));
      }
      next.velocities(i, k) = ensemble.velocities(i, k) + gain * acc;
    }
  }
  return next;
}

Ensemble euler_step(const Ensemble& ensemble, const Kernel& kernel,
                    double kappa, double h) {
  validate_ensemble(ensemble);
  const WeightMatrix w = weights(kernel, ensemble.positions);
  return euler_step_with_weights(ensemble, w, kappa, h);
}

Trajectory simulate(const Ensemble& initial, const Kernel& kernel,
                    const SimParams& params) {
  params.validate();
  validate_ensemble(initial);

  Trajectory traj{kernel, params, {}, {}};
  traj.ensembles.reserve(static_cast<std::size_t>(params.steps) + 1);
  traj.observables.reserve(static_cast<std::size_t>(params.steps) + 1);
  traj.ensembles.push_back(initial);

  for (long n = 0;; ++n) {
    const Ensemble& current = traj.ensembles.back();
    const WeightMatrix w = weights(kernel, current.positions);
    traj.observables.push_back(observe(n, current, w));
    if (n == params.steps) break;
    Ensemble next = euler_step_with_weights(current, w, params.kappa, params.h);
    if (!next.all_finite()) {
      throw DivergedError(n + 1, "non-finite state at step " +
                                     std::to_string(n + 1));
    }
    traj.ensembles.push_back(std::move(next));
  }
  return traj;
}

namespace {

// Right-hand side of the continuous model; dx = V is implicit at the call
// sites, only the acceleration needs the weights.
Mat acceleration(const Kernel& kernel, double kappa, const Ensemble& state) {
  const WeightMatrix w = weights(kernel, state.positions);
  const int n = state.n();
  const int d = state.dim();
  Mat acc(n, d);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < d; ++k) {
      double s = 0.0;
      for (int j = 0; j < n; ++j) {
        s += w(i, j) * (state.velocities(j, k) - state.velocities(i, k));
      }
      acc(i, k) = kappa * s;
    }
  }
  return acc;
}

struct Slope {
  Mat dx;  // = velocities of the evaluation state
  Mat dv;
};

Slope rhs(const Kernel& kernel, double kappa, const Ensemble& state) {
  return {state.velocities, acceleration(kernel, kappa, state)};
}

Ensemble advance(const Ensemble& base, double factor, const Slope& k) {
  const int n = base.n();
  const int d = base.dim();
  Ensemble out{Mat(n, d), Mat(n, d)};
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < d; ++c) {
      out.positions(i, c) = base.positions(i, c) + factor * k.dx(i, c);
      out.velocities(i, c) = base.velocities(i, c) + factor * k.dv(i, c);
    }
  }
  return out;
}

}  // namespace

Ensemble rk4_step(const Ensemble& state, const Kernel& kernel, double kappa,
                  double dt) {
  const Slope k1 = rhs(kernel, kappa, state);
  const Slope k2 = rhs(kernel, kappa, advance(state, 0.5 * dt, k1));
  const Slope k3 = rhs(kernel, kappa, advance(state, 0.5 * dt, k2));
  const Slope k4 = rhs(kernel, kappa, advance(state, dt, k3));

  const int n = state.n();
  const int d = state.dim();
  Ensemble out{Mat(n, d), Mat(n, d)};
  const double w = dt / 6.0;
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < d; ++c) {
      out.positions(i, c) =
          state.positions(i, c) +
          w * (k1.dx(i, c) + 2.0 * (k2.dx(i, c) + k3.dx(i, c)) + k4.dx(i, c));
      out.velocities(i, c) =
          state.velocities(i, c) +
          w * (k1.dv(i, c) + 2.0 * (k2.dv(i, c) + k3.dv(i, c)) + k4.dv(i, c));
    }
  }
  return out;
}

Trajectory reference_trajectory(const Ensemble& initial, const Kernel& kernel,
                                double kappa, double h_sample, long steps,
                                double h_ref) {
  validate_ensemble(initial);
  if (!(kappa > 0.0)) throw std::domain_error("coupling strength must be positive");
  if (!(h_sample > 0.0) || !(h_ref > 0.0) || h_ref > h_sample) {
    throw std::domain_error("need 0 < h_ref <= h_sample");
  }
  const long ratio = std::llround(h_sample / h_ref);
  if (ratio < 1 ||
      std::abs(h_sample - static_cast<double>(ratio) * h_ref) >
          1e-9 * h_sample) {
    throw std::domain_error("h_sample must be an integer multiple of h_ref");
  }
  const double dt = h_sample / static_cast<double>(ratio);

  // params.h records the sampling grid, not an Euler step, so the forward
  // Euler step-size restriction does not apply here.
  Trajectory traj{kernel, SimParams{kappa, h_sample, steps, 0}, {}, {}};
  traj.ensembles.reserve(static_cast<std::size_t>(steps) + 1);
  traj.observables.reserve(static_cast<std::size_t>(steps) + 1);

  Ensemble state = initial;
  for (long n = 0;; ++n) {
    if (!state.all_finite()) {
      throw DivergedError(n, "non-finite reference state at sample " +
                                 std::to_string(n));
    }
    traj.ensembles.push_back(state);
    traj.observables.push_back(
        observe(n, state, weights(kernel, state.positions)));
    if (n == steps) break;
    for (long sub = 0; sub < ratio; ++sub) {
      state = rk4_step(state, kernel, kappa, dt);
    }
  }
  return traj;
}

double default_reference_substep(double h_sample) {
  if (!(h_sample > 0.0)) {
    throw std::domain_error("sampling step must be positive");
  }
  // at least 10 substeps per sample, at most 1e-3 each, exact divisor
  const double cap = std::min(h_sample / 10.0, 1e-3);
  const long substeps =
      static_cast<long>(std::ceil(h_sample / cap - 1e-9));
  return h_sample / static_cast<double>(substeps);
}

Trajectory reference_trajectory(const Ensemble& initial, const Kernel& kernel,
                                double kappa, double h_sample, long steps) {
  return reference_trajectory(initial, kernel, kappa, h_sample, steps,
                              default_reference_substep(h_sample));
}

Mat asymptotic_velocity(const Trajectory& trajectory) {
  const double dv0 = trajectory.observables.front().dv_frob;
  const double dv_final = trajectory.observables.back().dv_frob;
  if (!(dv_final <= 1e-10 * dv0)) {
    throw NotConvergedError(
        dv_final, "trajectory not converged: final dv_frob " +
                      std::to_string(dv_final) + " vs initial " +
                      std::to_string(dv0));
  }
  return trajectory.ensembles.back().velocities;
}

}  // namespace mtflock
