#include "mtflock/reindex.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace mtflock {

ScalarPath::ScalarPath(std::vector<double> values)
    : values_(std::move(values)) {
  if (values_.size() < 2) {
    throw std::domain_error("scalar path needs at least two values");
  }
  for (double v : values_) {
    if (!std::isfinite(v) || v < 0.0) {
      throw std::domain_error("scalar path values must be finite and >= 0");
    }
  }
  // First-crossing regime: the final value strictly dominates the whole
  // history, not just the start. The inequality is false without this.
  for (std::size_t n = 0; n + 1 < values_.size(); ++n) {
    if (!(values_.back() > values_[n])) {
      throw std::domain_error(
          "scalar path must end strictly above every earlier value");
    }
  }
}

ScalarPath refine(const ScalarPath& path) {
  const std::vector<double>& s = path.values();
  // Inserting every existing value strictly between a consecutive pair makes
  // the refined neighbors adjacent in the value set, so one pass suffices.
  std::set<double> values(s.begin(), s.end());
  std::vector<double> out;
  out.reserve(s.size());
  out.push_back(s.front());
  for (std::size_t n = 0; n + 1 < s.size(); ++n) {
    const double a = s[n];
    const double b = s[n + 1];
    if (a < b) {
      for (auto it = values.upper_bound(a); it != values.end() && *it < b; ++it) {
        out.push_back(*it);
      }
    } else if (a > b) {
      auto lo = values.upper_bound(b);
      auto hi = values.lower_bound(a);
      for (auto it = std::make_reverse_iterator(hi);
           it != std::make_reverse_iterator(lo); ++it) {
        out.push_back(*it);
      }
    }
    out.push_back(b);
  }
  return ScalarPath(std::move(out));
}

double direct_sum(const ScalarPath& path, const DecreasingFn& psi) {
  const std::vector<double>& s = path.values();
  double sum = 0.0;
  for (std::size_t n = 0; n + 1 < s.size(); ++n) {
    sum += (s[n + 1] - s[n]) * psi(s[n]);
  }
  return sum;
}

double monotone_sum(const ScalarPath& path, const DecreasingFn& psi) {
  const std::vector<double>& s = path.values();
  const double start = s.front();
  std::set<double> distinct;
  for (double v : s) {
    if (v >= start) distinct.insert(v);
  }
  double sum = 0.0;
  auto it = distinct.begin();
  double prev = *it;
  for (++it; it != distinct.end(); ++it) {
    sum += (*it - prev) * psi(prev);
    prev = *it;
  }
  return sum;
}

LemmaCheck check_lemma(const ScalarPath& path, const DecreasingFn& psi) {
  LemmaCheck result;
  result.direct = direct_sum(path, psi);
  result.monotone = monotone_sum(path, psi);
  result.slack = result.direct - result.monotone;
  result.pass = result.monotone <= result.direct + 1e-12;

  // Excursions below the start value on the refined path; each consecutive
  // refined pair sits entirely on one side of s_0, so the split is clean.
  const ScalarPath refined = refine(path);
  const std::vector<double>& r = refined.values();
  const double start = r.front();
  double below = 0.0;
  for (std::size_t n = 0; n + 1 < r.size(); ++n) {
    if (r[n] <= start && r[n + 1] <= start) {
      below += (r[n + 1] - r[n]) * psi(r[n]);
    }
  }
  result.below_start = below;
  return result;
}

}  // namespace mtflock
