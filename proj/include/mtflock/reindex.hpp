#pragma once

#include <functional>
#include <vector>

namespace mtflock {

/// Finite sequence s_0..s_K of non-negative reals whose final value strictly
/// exceeds every earlier one: the shape of a discrepancy series truncated at
/// the first crossing of its admissible radius.
class ScalarPath {
 public:
  /// Requires length >= 2, finite non-negative values, and a final value
  /// strictly above all earlier ones; throws std::domain_error otherwise.
  explicit ScalarPath(std::vector<double> values);

  const std::vector<double>& values() const { return values_; }

 private:
  std::vector<double> values_;
};

/// Any decreasing scalar weight on the path's range.
using DecreasingFn = std::function<double(double)>;

/// Inserts existing path values between consecutive entries so that no step
/// jumps over a third value of the path: [1,3,2,4] becomes [1,2,3,2,3,4].
/// The value set is unchanged, endpoints are preserved, and the psi-weighted
/// direct sum never increases under refinement.
ScalarPath refine(const ScalarPath& path);

/// sum_n (s_{n+1} - s_n) * psi(s_n), the Riemann-type sum along the path.
double direct_sum(const ScalarPath& path, const DecreasingFn& psi);

/// psi-weighted increments over the sorted distinct values >= s_0 (duplicates
/// merged, s_0 first, s_K last). Equals direct_sum on monotone paths.
double monotone_sum(const ScalarPath& path, const DecreasingFn& psi);

struct LemmaCheck {
  bool pass = false;
  double slack = 0.0;  // direct - monotone
  double direct = 0.0;
  double monotone = 0.0;
  double below_start = 0.0;  // refined-path contribution of values <= s_0
};

/// Asserts monotone_sum <= direct_sum + 1e-12, and reports the contribution
/// of the sub-s_0 excursions of the refined path (non-negative up to
/// roundoff) as a separate diagnostic.
LemmaCheck check_lemma(const ScalarPath& path, const DecreasingFn& psi);

}  // namespace mtflock
