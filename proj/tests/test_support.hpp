#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "smcs/random.hpp"
#include "smcs/sde.hpp"

namespace test_support {

inline double sample_mean(const std::vector<double>& xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s / xs.size();
}

inline double sample_var(const std::vector<double>& xs) {
  const double m = sample_mean(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return s / (xs.size() - 1);
}

inline double mean_se(const std::vector<double>& xs) {
  return std::sqrt(sample_var(xs) / xs.size());
}

// delta-method standard error of the sample variance under rough normality
inline double var_se(const std::vector<double>& xs) {
  return sample_var(xs) * std::sqrt(2.0 / (xs.size() - 1));
}

struct WeightedStats {
  double mean = 0.0;
  double var = 0.0;
  double se_mean = 0.0;  // sqrt(sum w_i^2 (x_i - mean)^2), normalized weights
  double ess = 0.0;
};

inline WeightedStats weighted_stats(const std::vector<double>& xs,
                                    const std::vector<double>& ws) {
  WeightedStats s;
  double w2 = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    s.mean += ws[i] * xs[i];
    w2 += ws[i] * ws[i];
  }
  double se2 = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double d = xs[i] - s.mean;
    s.var += ws[i] * d * d;
    se2 += ws[i] * ws[i] * d * d;
  }
  s.se_mean = std::sqrt(se2);
  s.ess = 1.0 / w2;
  return s;
}

/// Kolmogorov-Smirnov statistic against a continuous CDF.
inline double ks_statistic(std::vector<double> xs, const std::function<double(double)>& cdf) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = cdf(xs[i]);
    d = std::max(d, std::max(f - i / n, (i + 1) / n - f));
  }
  return d;
}

inline double normal_cdf(double x, double mu, double sd) {
  return 0.5 * std::erfc(-(x - mu) / (sd * std::sqrt(2.0)));
}

/// Rejection-sampling oracle for conditioned scalar diffusions: simulates
/// unconditioned Euler paths on the same grid and keeps those ending within
/// eps of the target endpoint. Returns the accepted path values at the
/// requested step indices, one vector per index.
struct RejectionOracle {
  std::vector<std::vector<double>> values;  // [query][accepted path]
  long attempts = 0;
  long accepted = 0;
};

inline RejectionOracle ou_rejection_oracle(const smcs::DiffusionSpec<double>& spec, double x0,
                                           const smcs::TimeGrid& grid, double v, double eps,
                                           const std::vector<int>& query_steps,
                                           long target_accepts, long max_attempts,
                                           smcs::RngStream& rng) {
  RejectionOracle out;
  out.values.resize(query_steps.size());
  const double sqrt_dt = std::sqrt(grid.dt);
  std::vector<double> path(grid.n_points());
  while (out.accepted < target_accepts && out.attempts < max_attempts) {
    ++out.attempts;
    path[0] = x0;
    for (int k = 0; k < grid.n_steps; ++k) {
      const double dw = sqrt_dt * rng.normal();
      path[k + 1] = smcs::euler_step(spec, path[k], grid.dt, dw);
    }
    if (std::abs(path[grid.n_steps] - v) <= eps) {
      ++out.accepted;
      for (std::size_t q = 0; q < query_steps.size(); ++q)
        out.values[q].push_back(path[query_steps[q]]);
    }
  }
  return out;
}

}  // namespace test_support
