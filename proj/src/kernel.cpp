#include "mtflock/kernel.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace mtflock {

namespace {

double closed_form_lipschitz(double c1, double c2, double beta) {
  if (beta == 0.0 || c1 == c2) return 0.0;
  // |a'| peaks at r* = 1/sqrt(2b+1); plugging r* into a' gives the closed
  // form below.
  const double t = 2.0 * beta + 1.0;
  return 2.0 * beta * (c2 - c1) / std::sqrt(t) *
         std::pow(1.0 + 1.0 / t, -beta - 1.0);
}

}  // namespace

Kernel::Kernel(double c1, double c2, double beta)
    : c1_(c1), c2_(c2), beta_(beta), lipschitz_(0.0) {
  if (!(c1 > 0.0) || !(c2 >= c1) || !std::isfinite(c2)) {
    throw std::domain_error("kernel bounds must satisfy 0 < c1 <= c2");
  }
  if (!(beta >= 0.0) || !std::isfinite(beta)) {
    throw std::domain_error("kernel exponent must satisfy beta >= 0");
  }
  lipschitz_ = closed_form_lipschitz(c1_, c2_, beta_);
}

double Kernel::eval(double r) const {
  if (!(r >= 0.0)) {
    throw std::domain_error("kernel argument must be non-negative, got " +
                            std::to_string(r));
  }
  return c1_ + (c2_ - c1_) * std::pow(1.0 + r * r, -beta_);
}

double Kernel::phi_lip(int n) const {
  if (n < 1) throw std::domain_error("phi_lip requires at least one particle");
  return n_phi_lip() / static_cast<double>(n);
}

double Kernel::n_phi_lip() const {
  return lipschitz_ * (1.0 + c2_ / c1_) / c1_;
}

double Kernel::flocking_radius() const {
  if (lipschitz_ == 0.0) return std::numeric_limits<double>::infinity();
  return 1.0 / (4.0 * n_phi_lip());
}

double Kernel::psi(int /*n*/, double s) const {
  return 1.0 - n_phi_lip() * s;
}

WeightMatrix weights(const Kernel& kernel, const Mat& positions) {
  const int n = positions.rows();
  if (n < 1) throw std::domain_error("weights requires at least one particle");
  if (!positions.all_finite()) {
    throw std::domain_error("weights requires finite coordinates");
  }

  WeightMatrix w;
  w.n = n;
  w.entries.assign(static_cast<std::size_t>(n) * static_cast<std::size_t>(n),
                   0.0);
  for (int i = 0; i < n; ++i) {
    double* row = w.entries.data() + static_cast<std::size_t>(i) * n;
    double row_sum = 0.0;
    for (int k = 0; k < n; ++k) {
      const double a =
          kernel.eval(row_distance(positions.row(i), positions.row(k)));
      row[k] = a;
      row_sum += a;
    }
    for (int k = 0; k < n; ++k) row[k] /= row_sum;
  }
  return w;
}

}  // namespace mtflock
