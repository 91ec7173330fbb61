#pragma once

#include "mtflock/kernel.hpp"
#include "mtflock/matrix.hpp"

namespace mtflock {

/// Positions and velocities of n particles in d dimensions at one time index.
struct Ensemble {
  Mat positions;   // n x d
  Mat velocities;  // n x d

  int n() const { return positions.rows(); }
  int dim() const { return positions.cols(); }
  bool all_finite() const {
    return positions.all_finite() && velocities.all_finite();
  }

  friend bool operator==(const Ensemble&, const Ensemble&) = default;
};

/// Throws std::domain_error unless n >= 1, d >= 1, shapes match and all
/// coordinates are finite.
void validate_ensemble(const Ensemble& ensemble);

/// Shape discrepancy: sqrt of the sum over all ordered pairs (i, j) of
/// |z_i - z_j|^2. Ordered pairs are double-counted on purpose; the constants
/// in the recursion and stability bounds assume this convention, so do not
/// halve it when post-processing.
double delta_frobenius(const Mat& vectors);

/// Largest pairwise Euclidean distance.
double diameter(const Mat& vectors);

struct LambdaAlpha {
  double lambda;  // min over ordered pairs (i, j), i = j included, of
                  // phi_ij + phi_ji; in (0, 2]
  double alpha;   // max over pairs i != j of (1 - phi_ij - phi_ii)^2; zero
                  // for a single particle
};

/// Per-step stability quantities of a weight matrix. alpha runs over i != j
/// only: the diagonal pairs multiply a vanishing difference in the bound they
/// feed, and including them would inflate the coefficient.
LambdaAlpha lambda_alpha(const WeightMatrix& w);

/// Per-step scalar observables.
struct ObservableRecord {
  long step = 0;
  double dx_frob = 0.0;
  double dv_frob = 0.0;
  double diam_x = 0.0;
  double diam_v = 0.0;
  double lambda_min = 0.0;
  double alpha_max = 0.0;
};

ObservableRecord observe(long step, const Ensemble& ensemble,
                         const WeightMatrix& w);

/// Recenters the rows of m about their mean (the mean moves to the origin
/// when recenter_to_origin, otherwise stays put) and scales the spread so
/// that delta_frobenius(m) equals target. Throws std::domain_error when the
/// rows coincide (nothing to scale) or target < 0.
void rescale_shape(Mat& m, double target, bool recenter_to_origin);

}  // namespace mtflock
