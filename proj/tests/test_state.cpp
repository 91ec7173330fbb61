#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "mtflock/kernel.hpp"
#include "mtflock/rng.hpp"
#include "mtflock/state.hpp"

using namespace mtflock;

namespace {

Mat random_mat(Rng& rng, int n, int d, double span) {
  Mat m(n, d);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < d; ++k) m(i, k) = rng.uniform(-span, span);
  }
  return m;
}

}  // namespace

TEST_CASE("delta_frobenius examples") {
  Mat single(1, 3);
  single(0, 1) = 5.0;
  CHECK(delta_frobenius(single) == 0.0);

  Mat two(2, 1);
  two(1, 0) = 1.0;
  CHECK(delta_frobenius(two) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-14));

  Mat three(3, 1);
  three(1, 0) = 1.0;
  three(2, 0) = 2.0;
  CHECK(delta_frobenius(three) ==
        doctest::Approx(std::sqrt(12.0)).epsilon(1e-14));

  Mat equal(4, 2);
  for (int i = 0; i < 4; ++i) {
    equal(i, 0) = 3.25;
    equal(i, 1) = -1.0;
  }
  CHECK(delta_frobenius(equal) == 0.0);
}

TEST_CASE("diameter examples") {
  Mat single(1, 2);
  CHECK(diameter(single) == 0.0);

  Mat three(3, 1);
  three(1, 0) = 1.0;
  three(2, 0) = 2.0;
  CHECK(diameter(three) == 2.0);

  Mat triangle(2, 2);
  triangle(1, 0) = 3.0;
  triangle(1, 1) = 4.0;
  CHECK(diameter(triangle) == doctest::Approx(5.0).epsilon(1e-15));
}

TEST_CASE("lambda and alpha examples") {
  SUBCASE("constant kernel, four particles") {
    const Kernel k(1.0, 1.0, 0.0);
    Mat pos(4, 1);
    for (int i = 0; i < 4; ++i) pos(i, 0) = i;
    const LambdaAlpha la = lambda_alpha(weights(k, pos));
    CHECK(la.lambda == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(la.alpha == doctest::Approx(0.25).epsilon(1e-14));
  }

  SUBCASE("constant kernel, two particles") {
    const Kernel k(1.0, 1.0, 0.0);
    Mat pos(2, 1);
    pos(1, 0) = 1.0;
    const LambdaAlpha la = lambda_alpha(weights(k, pos));
    CHECK(la.lambda == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(la.alpha <= 1e-28);
  }

  SUBCASE("two particles at unit distance, decaying kernel") {
    const Kernel k(0.1, 0.5, 0.5);
    Mat pos(2, 1);
    pos(1, 0) = 1.0;
    const WeightMatrix w = weights(k, pos);
    const LambdaAlpha la = lambda_alpha(w);
    // the off-diagonal pair attains the minimum; the row is stochastic so
    // the off-diagonal alpha term vanishes
    CHECK(la.lambda == doctest::Approx(w(0, 1) + w(1, 0)).epsilon(1e-14));
    CHECK(std::abs(la.lambda - 0.8672954) < 1e-6);
    CHECK(la.alpha <= 1e-28);
  }

  SUBCASE("single particle") {
    const Kernel k(0.1, 0.5, 0.5);
    const LambdaAlpha la = lambda_alpha(weights(k, Mat(1, 2)));
    CHECK(la.lambda == doctest::Approx(2.0));
    CHECK(la.alpha == 0.0);
  }
}

TEST_CASE("delta_frobenius invariances") {
  Rng rng(99);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 2 + static_cast<int>(rng.uniform01() * 7.0);
    const int d = 1 + static_cast<int>(rng.uniform01() * 3.0);
    const Mat m = random_mat(rng, n, d, 5.0);
    const double base = delta_frobenius(m);

    Mat shifted = m;
    std::vector<double> offset(static_cast<std::size_t>(d));
    for (int k = 0; k < d; ++k) offset[static_cast<std::size_t>(k)] = rng.uniform(-10.0, 10.0);
    for (int i = 0; i < n; ++i) {
      for (int k = 0; k < d; ++k) shifted(i, k) += offset[static_cast<std::size_t>(k)];
    }
    CHECK(delta_frobenius(shifted) == doctest::Approx(base).epsilon(1e-12));

    // permute rows
    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    for (int i = n - 1; i > 0; --i) {
      const int j = static_cast<int>(rng.uniform01() * (i + 1));
      std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
    }
    Mat permuted(n, d);
    for (int i = 0; i < n; ++i) {
      for (int k = 0; k < d; ++k) permuted(i, k) = m(perm[static_cast<std::size_t>(i)], k);
    }
    CHECK(delta_frobenius(permuted) == doctest::Approx(base).epsilon(1e-12));
    CHECK(diameter(permuted) == doctest::Approx(diameter(m)).epsilon(1e-12));
  }
}

TEST_CASE("lambda lower bound and diameter sandwich on kernel weights") {
  Rng rng(7);
  for (int trial = 0; trial < 1000; ++trial) {
    const double c1 = rng.uniform(0.05, 0.5);
    const double c2 = c1 * rng.uniform(1.0, 6.0);
    const Kernel k(c1, c2, rng.uniform(0.0, 1.5));
    const int n = 2 + static_cast<int>(rng.uniform01() * 7.0);
    const int d = 1 + static_cast<int>(rng.uniform01() * 3.0);
    const Mat pos = random_mat(rng, n, d, 3.0);
    const LambdaAlpha la = lambda_alpha(weights(k, pos));
    CHECK(la.lambda >= 2.0 * c1 / (n * c2) - 1e-12);
    CHECK(la.lambda <= 2.0 + 1e-12);
    CHECK(la.alpha <= 1.0 + 1e-12);
    CHECK(la.alpha >= 0.0);

    const Mat vel = random_mat(rng, n, d, 2.0);
    const double dv = delta_frobenius(vel);
    const double dia = diameter(vel);
    CHECK(std::sqrt(2.0) * dia <= dv + 1e-12);
    CHECK(dv <= n * dia + 1e-12);
  }
}

TEST_CASE("rescale_shape hits the target") {
  Rng rng(5);
  Mat m = random_mat(rng, 6, 3, 2.0);
  rescale_shape(m, 0.375, true);
  CHECK(delta_frobenius(m) == doctest::Approx(0.375).epsilon(1e-12));

  // keeping the mean preserves it
  Mat v = random_mat(rng, 5, 2, 1.0);
  double mean0 = 0.0;
  for (int i = 0; i < 5; ++i) mean0 += v(i, 0);
  rescale_shape(v, 2.5, false);
  double mean1 = 0.0;
  for (int i = 0; i < 5; ++i) mean1 += v(i, 0);
  CHECK(mean1 == doctest::Approx(mean0).epsilon(1e-10));
  CHECK(delta_frobenius(v) == doctest::Approx(2.5).epsilon(1e-12));

  Mat degenerate(3, 2);
  CHECK_THROWS_AS(rescale_shape(degenerate, 1.0, true), std::domain_error);
}

TEST_CASE("observe fills every field") {
  const Kernel k(0.1, 0.5, 0.5);
  Rng rng(3);
  Ensemble e{random_mat(rng, 5, 2, 1.0), random_mat(rng, 5, 2, 1.0)};
  const ObservableRecord rec = observe(42, e, weights(k, e.positions));
  CHECK(rec.step == 42);
  CHECK(rec.dx_frob == doctest::Approx(delta_frobenius(e.positions)));
  CHECK(rec.dv_frob == doctest::Approx(delta_frobenius(e.velocities)));
  CHECK(rec.diam_x == doctest::Approx(diameter(e.positions)));
  CHECK(rec.diam_v == doctest::Approx(diameter(e.velocities)));
  CHECK(rec.lambda_min > 0.0);
  CHECK(rec.alpha_max >= 0.0);
}
