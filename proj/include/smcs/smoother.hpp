#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "smcs/bridge.hpp"
#include "smcs/errors.hpp"
#include "smcs/filter.hpp"

namespace smcs {

struct SmootherConfig {
  int bridges_per_pair = 50;   // M
  double weight_floor = 1e-6;  // pairs below this filter weight are not bridged
  int max_active_pairs = 0;    // cap on bridged pairs, 0 = unlimited
  bool store_support = false;  // keep the full weighted point cloud per time

  void validate() const {
    if (bridges_per_pair < 1) throw ConfigError("SmootherConfig: bridges_per_pair must be >= 1");
    if (!(weight_floor >= 0.0 && weight_floor < 1.0))
      throw ConfigError("SmootherConfig: weight_floor must be in [0, 1)");
    if (max_active_pairs < 0) throw ConfigError("SmootherConfig: max_active_pairs must be >= 0");
  }
};

/// Weighted estimate of the smoothing distribution over one lag window
/// (t_k, t_{k+1}]. Moments and the per-coordinate support envelope are always
/// materialized; the full weighted point cloud only on request.
template <class State>
struct SmoothingEstimate {
  int window_index = 0;
  long start_step = 0;
  TimeGrid grid;    // absolute-time window grid
  int stride = 1;   // dt steps between slices

  std::vector<long> steps;  // global step of each slice, start+stride .. end
  std::vector<State> mean;
  std::vector<State> sd;
  std::vector<State> support_min;
  std::vector<State> support_max;
  std::vector<double> weight_sums;  // combined-weight mass per slice, pre-renormalization

  bool has_support = false;
  std::vector<std::vector<std::pair<State, double>>> support;

  std::string method;
  bool enkf_history_caveat = false;  // window trajectories are not model paths
  int n_pairs_used = 0;
  int n_pairs_dropped = 0;

  int n_slices() const { return static_cast<int>(steps.size()); }

  int slice_of_time(double t) const {
    const double rel = (t - grid.t_start) / grid.dt;
    const long j = std::lround(rel);
    if (std::abs(rel - static_cast<double>(j)) > 0.25 || j < 1 || j > grid.n_steps ||
        j % stride != 0)
      throw std::invalid_argument("SmoothingEstimate: time not on the estimate grid");
    return static_cast<int>(j / stride) - 1;
  }
};

namespace detail {

template <class State>
void weighted_slice_moments(const std::vector<State>& xs, const std::vector<double>& ws,
                            State& mean, State& sd, State& mn, State& mx) {
  const int dim = StateOps<State>::dim(xs[0]);
  State m1 = StateOps<State>::zero(dim);
  State m2 = StateOps<State>::zero(dim);
  bool any = false;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    StateOps<State>::add_weighted(m1, ws[i], xs[i]);
    StateOps<State>::add_weighted_sq(m2, ws[i], xs[i]);
    if (ws[i] > 0.0) {
      if (!any) {
        mn = xs[i];
        mx = xs[i];
        any = true;
      } else {
        StateOps<State>::cwise_min_update(mn, xs[i]);
        StateOps<State>::cwise_max_update(mx, xs[i]);
      }
    }
  }
  sd = StateOps<State>::moments_to_sd(m2, m1);
  mean = std::move(m1);
}

}  // namespace detail

/// Reweighting smoother: the window's predictive cloud under the
/// post-correction weights w_{t_{k+1}}. The support is exactly the filter's.
template <class State>
SmoothingEstimate<State> smooth_standard_window(const WindowRecord<State>& rec,
                                                bool want_support = false) {
  if (rec.cloud.empty())
    throw MissingHistory("smooth_standard: window has no stored predictive cloud");

  SmoothingEstimate<State> est;
  est.window_index = rec.window_index;
  est.start_step = rec.start_step;
  est.grid = rec.grid;
  est.stride = rec.cloud_stride;
  est.method = "standard";
  est.enkf_history_caveat = rec.enkf_corrected;
  est.n_pairs_used = static_cast<int>(rec.end_weights.size());
  est.has_support = want_support;

  const int n_slices = static_cast<int>(rec.cloud.size()) - 1;
  for (int j = 1; j <= n_slices; ++j) {
    est.steps.push_back(rec.start_step + static_cast<long>(j) * rec.cloud_stride);
    State mean, sd, mn, mx;
    detail::weighted_slice_moments(rec.cloud[j], rec.end_weights, mean, sd, mn, mx);
    est.mean.push_back(std::move(mean));
    est.sd.push_back(std::move(sd));
    est.support_min.push_back(std::move(mn));
    est.support_max.push_back(std::move(mx));
    est.weight_sums.push_back(std::accumulate(rec.end_weights.begin(), rec.end_weights.end(), 0.0));
    if (want_support) {
      std::vector<std::pair<State, double>> cloud;
      cloud.reserve(rec.cloud[j].size());
      for (std::size_t i = 0; i < rec.cloud[j].size(); ++i)
        cloud.emplace_back(rec.cloud[j][i], rec.end_weights[i]);
      est.support.push_back(std::move(cloud));
    }
  }
  return est;
}

/// Conditional-simulation smoother for one window: for every retained pair
/// (x_{t_k}^(i), x_{t_{k+1}}^(i)) a batch of M conditioned trajectories is
/// sampled between the endpoints and combined with weights w^(i) * alpha~(i,j).
/// Pairs whose batch degenerates are dropped and the remaining mass is
/// renormalized; if nothing survives the window fails.
template <class State>
SmoothingEstimate<State> smooth_conditional_window(const WindowRecord<State>& rec,
                                                   const DiffusionSpec<State>& dyn,
                                                   const SmootherConfig& config, RngStream& rng,
                                                   std::vector<std::string>* warnings = nullptr) {
  config.validate();
  if (rec.start_states.empty() || rec.end_states.empty())
    throw MissingHistory("smooth_conditional: window has no endpoint snapshots");

  const int n_particles = static_cast<int>(rec.end_weights.size());
  std::vector<int> kept;
  kept.reserve(n_particles);
  for (int i = 0; i < n_particles; ++i)
    if (rec.end_weights[i] >= config.weight_floor) kept.push_back(i);
  if (config.max_active_pairs > 0 &&
      static_cast<int>(kept.size()) > config.max_active_pairs) {
    std::stable_sort(kept.begin(), kept.end(), [&rec](int a, int b) {
      return rec.end_weights[a] > rec.end_weights[b];
    });
    kept.resize(config.max_active_pairs);
    std::sort(kept.begin(), kept.end());
  }
  if (kept.empty())
    throw SmootherFailed("smooth_conditional: no pair above the weight floor");

  double kept_mass = 0.0;
  for (int i : kept) kept_mass += rec.end_weights[i];

  const int n_steps = rec.grid.n_steps;
  const TimeGrid local_grid{0.0, rec.grid.dt, n_steps};
  const int dim = StateOps<State>::dim(rec.end_states[0]);

  SmoothingEstimate<State> est;
  est.window_index = rec.window_index;
  est.start_step = rec.start_step;
  est.grid = rec.grid;
  est.stride = 1;
  est.method = "conditional";
  est.has_support = config.store_support;

  std::vector<State> m1(n_steps, StateOps<State>::zero(dim));
  std::vector<State> m2(n_steps, StateOps<State>::zero(dim));
  std::vector<State> mn(n_steps);
  std::vector<State> mx(n_steps);
  std::vector<double> mass(n_steps, 0.0);
  if (config.store_support) est.support.resize(n_steps);
  bool envelope_started = false;

  double used_mass = 0.0;
  for (int i : kept) {
    const double pair_weight = rec.end_weights[i] / kept_mass;
    RngStream pair_rng = rng.fork(0x4000 + static_cast<std::uint64_t>(i));
    BridgeBatch<State> batch;
    try {
      batch = sample_bridge_batch(dyn, BridgeConstraint<State>{rec.start_states[i],
                                                               rec.end_states[i], local_grid},
                                  config.bridges_per_pair, pair_rng);
    } catch (const DegenerateBatch&) {
      ++est.n_pairs_dropped;
      if (warnings)
        warnings->push_back("smooth_conditional: degenerate bridge batch for pair " +
                            std::to_string(i) + " in window " + std::to_string(rec.window_index));
      continue;
    }
    ++est.n_pairs_used;
    used_mass += pair_weight;
    for (int m = 0; m < batch.size(); ++m) {
      const double w = pair_weight * batch.norm_weights[m];
      const auto& states = batch.trajectories[m].states;
      const bool in_support = w > 0.0;
      const bool start_envelope = in_support && !envelope_started;
      for (int j = 1; j <= n_steps; ++j) {
        const State& x = states[j];
        StateOps<State>::add_weighted(m1[j - 1], w, x);
        StateOps<State>::add_weighted_sq(m2[j - 1], w, x);
        mass[j - 1] += w;
        if (start_envelope) {
          mn[j - 1] = x;
          mx[j - 1] = x;
        } else if (in_support) {
          StateOps<State>::cwise_min_update(mn[j - 1], x);
          StateOps<State>::cwise_max_update(mx[j - 1], x);
        }
        if (config.store_support) est.support[j - 1].emplace_back(x, w);
      }
      if (start_envelope) envelope_started = true;
    }
  }

  if (est.n_pairs_used == 0 || used_mass <= 0.0)
    throw SmootherFailed("smooth_conditional: every pair degenerated");

  est.steps.reserve(n_steps);
  est.weight_sums = mass;
  for (int j = 1; j <= n_steps; ++j) {
    est.steps.push_back(rec.start_step + j);
    State mean = m1[j - 1];
    StateOps<State>::scale(mean, 1.0 / used_mass);
    State msq = m2[j - 1];
    StateOps<State>::scale(msq, 1.0 / used_mass);
    est.sd.push_back(StateOps<State>::moments_to_sd(msq, mean));
    est.mean.push_back(std::move(mean));
    est.support_min.push_back(mn[j - 1]);
    est.support_max.push_back(mx[j - 1]);
  }
  if (config.store_support && used_mass != 1.0) {
    for (auto& slice : est.support)
      for (auto& point : slice) point.second /= used_mass;
  }
  return est;
}

/// Weighted mean and per-coordinate standard deviation at a grid time inside
/// the window.
template <class State>
std::pair<State, State> smoothed_moments(const SmoothingEstimate<State>& est, double t) {
  const int slice = est.slice_of_time(t);
  return {est.mean[slice], est.sd[slice]};
}

template <class State>
SmoothingEstimate<State> smooth_standard(const FilterHistory<State>& history, int k,
                                         bool want_support = false) {
  if (k < 0 || k >= static_cast<int>(history.windows.size()))
    throw MissingHistory("smooth_standard: window " + std::to_string(k) + " not stored");
  return smooth_standard_window(history.windows[k], want_support);
}

template <class State>
SmoothingEstimate<State> smooth_conditional(const FilterHistory<State>& history, int k,
                                            const DiffusionSpec<State>& dyn,
                                            const SmootherConfig& config, RngStream& rng,
                                            std::vector<std::string>* warnings = nullptr) {
  if (k < 0 || k >= static_cast<int>(history.windows.size()))
    throw MissingHistory("smooth_conditional: window " + std::to_string(k) + " not stored");
  RngStream window_rng = rng.fork(0x5000 + static_cast<std::uint64_t>(k));
  return smooth_conditional_window(history.windows[k], dyn, config, window_rng, warnings);
}

enum class SmoothingMethod { standard, conditional };

template <class State>
struct FixedLagResult {
  std::vector<SmoothingEstimate<State>> estimates;
  std::vector<std::pair<int, std::string>> window_errors;
};

/// Runs the chosen smoother over every lag window (t_k, t_{k+1}] for
/// k = 1..K-1, continuing past per-window failures.
template <class State>
FixedLagResult<State> run_fixed_lag(const FilterHistory<State>& history,
                                    const DiffusionSpec<State>& dyn, const SmootherConfig& config,
                                    RngStream rng, SmoothingMethod method,
                                    bool want_support = false) {
  if (static_cast<int>(history.windows.size()) < history.n_observations)
    throw MissingHistory("run_fixed_lag: filter history did not retain all windows");
  FixedLagResult<State> result;
  for (int k = 1; k < history.n_observations; ++k) {
    try {
      if (method == SmoothingMethod::standard) {
        result.estimates.push_back(smooth_standard(history, k, want_support));
      } else {
        SmootherConfig cfg = config;
        cfg.store_support = want_support || config.store_support;
        result.estimates.push_back(smooth_conditional(history, k, dyn, cfg, rng));
      }
    } catch (const Error& e) {
      result.window_errors.emplace_back(k, e.what());
    }
  }
  return result;
}

}  // namespace smcs
