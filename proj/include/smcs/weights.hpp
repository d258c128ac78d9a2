#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "smcs/errors.hpp"

namespace smcs {

inline double log_sum_exp(const std::vector<double>& logs) {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : logs) m = std::max(m, v);
  if (!std::isfinite(m)) return m;  // all -inf (or contains +inf/NaN, caught by callers)
  double s = 0.0;
  for (double v : logs) s += std::exp(v - m);
  return m + std::log(s);
}

/// Normalizes weights kept in log domain. Returns linear weights summing to
/// one; raw integrands are never exponentiated before the max is subtracted.
/// Throws DegenerateWeights when every entry underflowed to -inf.
inline std::vector<double> normalize_log_weights(const std::vector<double>& log_weights) {
  if (log_weights.empty()) throw DegenerateWeights("normalize_log_weights: empty weight set");
  double m = -std::numeric_limits<double>::infinity();
  for (double v : log_weights) {
    if (std::isnan(v)) throw Error("normalize_log_weights: NaN log weight");
    m = std::max(m, v);
  }
  if (m == -std::numeric_limits<double>::infinity())
    throw DegenerateWeights("normalize_log_weights: all weights are zero");
  if (m == std::numeric_limits<double>::infinity())
    throw Error("normalize_log_weights: +inf log weight");

  std::vector<double> w(log_weights.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] = std::exp(log_weights[i] - m);
    sum += w[i];
  }
  for (double& v : w) v /= sum;
  return w;
}

/// Effective sample size 1 / sum(w_i^2) of normalized weights.
inline double ess(const std::vector<double>& norm_weights) {
  double s = 0.0;
  for (double w : norm_weights) s += w * w;
  return 1.0 / s;
}

}  // namespace smcs
