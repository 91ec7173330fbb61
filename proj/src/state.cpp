#include "mtflock/state.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace mtflock {

Mat difference(const Mat& a, const Mat& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::domain_error("difference requires matching shapes");
  }
  Mat out(a.rows(), a.cols());
  for (int i = 0; i < a.rows(); ++i) {
    for (int j = 0; j < a.cols(); ++j) out(i, j) = a(i, j) - b(i, j);
  }
  return out;
}

void validate_ensemble(const Ensemble& ensemble) {
  if (ensemble.positions.rows() < 1 || ensemble.positions.cols() < 1) {
    throw std::domain_error("ensemble needs n >= 1 particles and d >= 1");
  }
  if (ensemble.velocities.rows() != ensemble.positions.rows() ||
      ensemble.velocities.cols() != ensemble.positions.cols()) {
    throw std::domain_error("ensemble position/velocity shapes differ");
  }
  if (!ensemble.all_finite()) {
    throw std::domain_error("ensemble has non-finite coordinates");
  }
}

double delta_frobenius(const Mat& vectors) {
  const int n = vectors.rows();
  const int d = vectors.cols();
  double sum = 0.0;
  // Ordered pairs; (i,j) and (j,i) both counted, the diagonal contributes 0.
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      for (int k = 0; k < d; ++k) {
        const double diff = vectors(i, k) - vectors(j, k);
        sum += diff * diff;
      }
    }
  }
  return std::sqrt(sum);
}

double diameter(const Mat& vectors) {
  const int n = vectors.rows();
  double best = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double dist = row_distance(vectors.row(i), vectors.row(j));
      if (dist > best) best = dist;
    }
  }
  return best;
}

LambdaAlpha lambda_alpha(const WeightMatrix& w) {
  const int n = w.n;
  double lambda = 2.0 * w(0, 0);
  double alpha = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double pair_sum = w(i, j) + w(j, i);
      if (pair_sum < lambda) lambda = pair_sum;
      if (i != j) {
        const double rest = 1.0 - w(i, j) - w(i, i);
        if (rest * rest > alpha) alpha = rest * rest;
      }
    }
  }
  return {lambda, alpha};
}

ObservableRecord observe(long step, const Ensemble& ensemble,
                         const WeightMatrix& w) {
  ObservableRecord rec;
  rec.step = step;
  rec.dx_frob = delta_frobenius(ensemble.positions);
  rec.dv_frob = delta_frobenius(ensemble.velocities);
  rec.diam_x = diameter(ensemble.positions);
  rec.diam_v = diameter(ensemble.velocities);
  const LambdaAlpha la = lambda_alpha(w);
  rec.lambda_min = la.lambda;
  rec.alpha_max = la.alpha;
  return rec;
}

void rescale_shape(Mat& m, double target, bool recenter_to_origin) {
  if (!(target >= 0.0)) {
    throw std::domain_error("rescale_shape target must be non-negative");
  }
  const int n = m.rows();
  const int d = m.cols();
  std::vector<double> mean(static_cast<std::size_t>(d), 0.0);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < d; ++k) mean[static_cast<std::size_t>(k)] += m(i, k);
  }
  for (int k = 0; k < d; ++k) mean[static_cast<std::size_t>(k)] /= n;

  const double current = delta_frobenius(m);
  if (current == 0.0) {
    throw std::domain_error("rescale_shape: rows coincide, nothing to scale");
  }
  const double scale = target / current;
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < d; ++k) {
      const double centered = m(i, k) - mean[static_cast<std::size_t>(k)];
      m(i, k) = scale * centered +
                (recenter_to_origin ? 0.0 : mean[static_cast<std::size_t>(k)]);
    }
  }
}

}  // namespace mtflock
