#pragma once

#include <vector>

#include "mtflock/matrix.hpp"

namespace mtflock {

/// Bounded, Lipschitz communication weight
///
///     a(r) = c1 + (c2 - c1) * (1 + r^2)^(-beta),   r >= 0,
///
/// together with the closed-form constants the verification layer is built
/// on. The family satisfies c1 <= a(r) <= c2 and is non-increasing; |a'| has
/// an exact maximum at r* = 1/sqrt(2*beta + 1), which is what makes the
/// Lipschitz constant (and everything derived from it) exact rather than
/// estimated. Only this family is supported.
class Kernel {
 public:
  /// Requires 0 < c1 <= c2 and beta >= 0; throws std::domain_error otherwise.
  Kernel(double c1, double c2, double beta);

  double c1() const { return c1_; }
  double c2() const { return c2_; }
  double beta() const { return beta_; }

  /// a(r) for r >= 0; throws std::domain_error on negative (or NaN) r.
  double eval(double r) const;

  /// Exact sup_r |a'(r)|; zero iff the kernel is constant (beta = 0 or
  /// c1 = c2).
  double lipschitz_constant() const { return lipschitz_; }

  bool is_constant() const { return lipschitz_ == 0.0; }

  /// Row-Lipschitz constant of the normalized weights for an n-particle
  /// ensemble: |phi_il - phi_jl| <= phi_lip(n) * |x_i - x_j| for all i, j, l.
  /// Throws std::domain_error when n < 1.
  double phi_lip(int n) const;

  /// n * phi_lip(n); independent of the particle count.
  double n_phi_lip() const;

  /// Admissible initial position shape discrepancy M = 1 / (4 n phi_lip(n)),
  /// independent of n. Constant kernels return +infinity; downstream
  /// admissibility then treats the position condition as vacuously true.
  double flocking_radius() const;

  /// Decay-rate factor psi(s) = 1 - n*phi_lip(n)*s. psi(0) = 1 and
  /// psi(flocking_radius()) = 3/4 whenever the radius is finite. The particle
  /// count cancels; the parameter is kept for signature symmetry.
  double psi(int n, double s) const;

 private:
  double c1_;
  double c2_;
  double beta_;
  double lipschitz_;
};

/// Row-stochastic normalized weight matrix
///
///     phi_ij = a(|x_i - x_j|) / sum_k a(|x_i - x_k|).
///
/// Every row sums to one and every entry lies in [c1/(n c2), c2/(n c1)].
/// The self weight phi_ii participates in the normalizing sum.
struct WeightMatrix {
  int n = 0;
  std::vector<double> entries;  // row-major n x n

  double operator()(int i, int j) const {
    return entries[static_cast<std::size_t>(i) * static_cast<std::size_t>(n) +
                   static_cast<std::size_t>(j)];
  }
};

/// Normalized weights for an n x d position matrix. Throws std::domain_error
/// on an empty matrix or non-finite coordinates.
WeightMatrix weights(const Kernel& kernel, const Mat& positions);

}  // namespace mtflock
