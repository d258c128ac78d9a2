#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "smcs/filter.hpp"
#include "smcs/harness/config.hpp"
#include "smcs/models/grf.hpp"
#include "smcs/models/navier_stokes.hpp"
#include "smcs/models/precision.hpp"
#include "smcs/models/sine.hpp"
#include "smcs/smoother.hpp"

namespace smcs::harness {

inline double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Per-observation jump sizes of an estimate trace: at each observation step
/// the norm (scaled by sqrt(dim)) of the difference between the trace value
/// at the step and the value one trace sample earlier.
struct JumpMetric {
  std::vector<double> jumps;
  double median_jump = std::numeric_limits<double>::quiet_NaN();
};

template <class State>
JumpMetric discontinuity_metric(const std::vector<long>& steps, const std::vector<State>& values,
                                const std::vector<long>& obs_steps) {
  JumpMetric m;
  const double scale =
      values.empty() ? 1.0 : std::sqrt(static_cast<double>(StateOps<State>::dim(values[0])));
  for (long g : obs_steps) {
    auto it = std::lower_bound(steps.begin(), steps.end(), g);
    if (it == steps.end() || *it != g || it == steps.begin()) continue;
    const std::size_t i = static_cast<std::size_t>(it - steps.begin());
    State d = values[i];
    StateOps<State>::axpy(d, -1.0, values[i - 1]);
    m.jumps.push_back(StateOps<State>::norm(d) / scale);
  }
  m.median_jump = median(m.jumps);
  return m;
}

struct MethodMetrics {
  std::vector<long> mse_steps;
  std::vector<double> mse;  // squared error averaged over the state dimension
  double rmse_hidden = std::numeric_limits<double>::quiet_NaN();
  double rmse_obs = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> jumps;
  double median_jump = std::numeric_limits<double>::quiet_NaN();
  double coverage_fraction = std::numeric_limits<double>::quiet_NaN();
  int windows_failed = 0;
};

struct TwinMetrics {
  MethodMetrics filter;
  MethodMetrics standard;
  MethodMetrics conditional;
  bool ran_standard = false;
  bool ran_conditional = false;

  std::vector<double> ess_after;     // per observation
  std::vector<double> mse_pre_obs;   // filter MSE just before each correction
  std::vector<double> mse_post_obs;  // and just after
  std::vector<std::string> warnings;
  bool enkf_used = false;
  long n_steps = 0;
  int n_observations = 0;
  double max_cfl = std::numeric_limits<double>::quiet_NaN();
};

template <class State>
struct TwinSpec {
  const StateSpaceModel<State>* model = nullptr;
  const DiffusionSpec<State>* bridge_dynamics = nullptr;  // defaults to model->dynamics
  const std::vector<State>* truth = nullptr;              // n_steps + 1 states
  const std::vector<State>* observations = nullptr;
  std::function<State(RngStream&, int)> init_sampler;
  std::uint64_t filter_seed = 0;
  std::uint64_t smoother_seed = 0;
  FilterConfig filter_cfg;
  SmootherConfig smoother_cfg;
  bool run_standard = false;
  bool run_conditional = false;
};

template <class State>
struct TwinHooks {
  std::function<void(const WindowRecord<State>&)> on_window;
  std::function<bool(int)> standard_support_wanted;
  std::function<bool(int)> conditional_support_wanted;
  std::function<void(const SmoothingEstimate<State>&)> on_standard;
  std::function<void(const SmoothingEstimate<State>&)> on_conditional;
};

namespace detail {

template <class State>
double mse_against(const State& est, const State& truth) {
  State d = est;
  StateOps<State>::axpy(d, -1.0, truth);
  const double n2 = StateOps<State>::dot(d, d);
  return n2 / StateOps<State>::dim(est);
}

template <class State>
struct SmootherAccumulator {
  double hidden_sq_sum = 0.0;
  long hidden_count = 0;
  int covered = 0;
  int coverage_windows = 0;
  MethodMetrics metrics;

  void add(const SmoothingEstimate<State>& est, const std::vector<State>& truth,
           int obs_interval) {
    const int dim = StateOps<State>::dim(est.mean[0]);
    for (int idx = 0; idx < est.n_slices(); ++idx) {
      const long step = est.steps[idx];
      const double m = mse_against(est.mean[idx], truth[step]);
      metrics.mse_steps.push_back(step);
      metrics.mse.push_back(m);
      if (step % obs_interval != 0) {
        hidden_sq_sum += m;
        ++hidden_count;
      }
    }
    if (est.n_slices() >= 2) {
      State d = est.mean[est.n_slices() - 1];
      StateOps<State>::axpy(d, -1.0, est.mean[est.n_slices() - 2]);
      metrics.jumps.push_back(StateOps<State>::norm(d) / std::sqrt(static_cast<double>(dim)));
    }
    // support coverage at the mid-window time
    const long mid_step = est.start_step + est.grid.n_steps / 2;
    for (int idx = 0; idx < est.n_slices(); ++idx) {
      if (est.steps[idx] != mid_step) continue;
      ++coverage_windows;
      const Eigen::VectorXd lo = StateOps<State>::to_vector(est.support_min[idx]);
      const Eigen::VectorXd hi = StateOps<State>::to_vector(est.support_max[idx]);
      const Eigen::VectorXd tr = StateOps<State>::to_vector(truth[mid_step]);
      if ((tr.array() >= lo.array()).all() && (tr.array() <= hi.array()).all()) ++covered;
      break;
    }
  }

  MethodMetrics finish() {
    if (hidden_count > 0) metrics.rmse_hidden = std::sqrt(hidden_sq_sum / hidden_count);
    metrics.median_jump = median(metrics.jumps);
    if (coverage_windows > 0)
      metrics.coverage_fraction = static_cast<double>(covered) / coverage_windows;
    return metrics;
  }
};

}  // namespace detail

/// One full twin-experiment pass: streaming filter run plus (optionally) the
/// two smoothers applied window by window as records complete, so memory
/// stays bounded by a single window regardless of run length.
template <class State>
TwinMetrics run_twin(const TwinSpec<State>& spec, const TwinHooks<State>* hooks = nullptr) {
  const StateSpaceModel<State>& model = *spec.model;
  const std::vector<State>& truth = *spec.truth;
  const DiffusionSpec<State>& bridge_dyn =
      spec.bridge_dynamics ? *spec.bridge_dynamics : model.dynamics;
  const int s = model.obs_interval;
  const int n_obs = static_cast<int>(spec.observations->size());

  TwinMetrics out;
  out.n_observations = n_obs;

  detail::SmootherAccumulator<State> std_acc, cond_acc;
  RngStream smoother_base(spec.smoother_seed);

  auto sink = [&](WindowRecord<State>&& rec) {
    if (hooks && hooks->on_window) hooks->on_window(rec);
    const bool smoothable = rec.corrected && rec.window_index >= 1;
    if (smoothable && spec.run_standard) {
      const bool want_support =
          hooks && hooks->standard_support_wanted && hooks->standard_support_wanted(rec.window_index);
      try {
        SmoothingEstimate<State> est = smooth_standard_window(rec, want_support);
        std_acc.add(est, truth, s);
        if (hooks && hooks->on_standard) hooks->on_standard(est);
      } catch (const Error& e) {
        ++std_acc.metrics.windows_failed;
        out.warnings.push_back("standard window " + std::to_string(rec.window_index) + ": " +
                               e.what());
      }
    }
    if (smoothable && spec.run_conditional) {
      SmootherConfig cfg = spec.smoother_cfg;
      cfg.store_support = hooks && hooks->conditional_support_wanted &&
                          hooks->conditional_support_wanted(rec.window_index);
      RngStream window_rng = smoother_base.fork(0x5000 + static_cast<std::uint64_t>(rec.window_index));
      try {
        SmoothingEstimate<State> est =
            smooth_conditional_window(rec, bridge_dyn, cfg, window_rng, &out.warnings);
        cond_acc.add(est, truth, s);
        if (hooks && hooks->on_conditional) hooks->on_conditional(est);
      } catch (const Error& e) {
        ++cond_acc.metrics.windows_failed;
        out.warnings.push_back("conditional window " + std::to_string(rec.window_index) + ": " +
                               e.what());
      }
    }
  };

  FilterConfig fcfg = spec.filter_cfg;
  fcfg.store_clouds = spec.run_standard || fcfg.store_clouds;
  FilterHistory<State> history = run_filter_stream<State, State>(
      model, fcfg, *spec.observations, spec.init_sampler, RngStream(spec.filter_seed), sink);

  out.enkf_used = history.enkf_used;
  out.n_steps = history.n_steps_total();
  out.ess_after = history.ess_after_correction;
  for (auto& w : history.warnings) out.warnings.push_back(w);

  // filter trace metrics on the dt grid
  double hidden_sq = 0.0, obs_sq = 0.0;
  long hidden_n = 0, obs_n = 0;
  for (long g = 0; g < static_cast<long>(history.mean_trace.size()); ++g) {
    const double m = detail::mse_against(history.mean_trace[g], truth[g]);
    out.filter.mse_steps.push_back(g);
    out.filter.mse.push_back(m);
    if (g > s) {
      if (g % s == 0) {
        obs_sq += m;
        ++obs_n;
      } else {
        hidden_sq += m;
        ++hidden_n;
      }
    } else if (g == s) {
      obs_sq += m;
      ++obs_n;
    }
  }
  if (hidden_n > 0) out.filter.rmse_hidden = std::sqrt(hidden_sq / hidden_n);
  if (obs_n > 0) out.filter.rmse_obs = std::sqrt(obs_sq / obs_n);
  for (int k = 0; k < n_obs; ++k) {
    const long g = static_cast<long>(k + 1) * s;
    out.mse_pre_obs.push_back(detail::mse_against(history.pre_obs_means[k], truth[g]));
    out.mse_post_obs.push_back(out.filter.mse[g]);
    State d = history.mean_trace[g];
    StateOps<State>::axpy(d, -1.0, history.mean_trace[g - 1]);
    out.filter.jumps.push_back(StateOps<State>::norm(d) /
                               std::sqrt(static_cast<double>(model.dynamics.dim)));
  }
  out.filter.median_jump = median(out.filter.jumps);

  if (spec.run_standard) {
    out.standard = std_acc.finish();
    out.ran_standard = true;
  }
  if (spec.run_conditional) {
    out.conditional = cond_acc.finish();
    out.ran_conditional = true;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Model/data assembly from a resolved configuration
// ---------------------------------------------------------------------------

struct SineData {
  StateSpaceModel<double> model;
  std::vector<double> truth;         // states on the full dt grid
  std::vector<double> observations;  // one per observation time
};

inline SineData make_sine_data(const ExperimentConfig& c) {
  SineData d;
  d.model = models::make_sine_model(c.sine);
  const long n_steps = c.n_steps();
  RngStream truth_rng(c.truth_seed);
  RngStream sim = truth_rng.fork(1);
  RngStream obs = truth_rng.fork(2);
  const TimeGrid grid{0.0, c.sine.dt, static_cast<int>(n_steps)};
  Trajectory<double> traj = simulate(d.model.dynamics, c.sine_x0, grid, sim);
  d.truth = std::move(traj.states);
  for (int k = 1; k <= c.n_observations(); ++k)
    d.observations.push_back(observe(d.model, d.truth[static_cast<long>(k) * c.sine.obs_stride], obs));
  return d;
}

inline std::function<double(RngStream&, int)> sine_init_sampler(const ExperimentConfig& c,
                                                                const SineData& data) {
  const double y1 = data.observations.front();
  const double spread = c.init_spread;
  return [y1, spread](RngStream& rng, int) { return y1 + spread * rng.normal(); };
}

struct NsData {
  models::NsModel ns;
  std::vector<Eigen::VectorXd> truth;
  std::vector<Eigen::VectorXd> observations;
};

inline NsData make_ns_data(const ExperimentConfig& c) {
  NsData d;
  d.ns = models::make_ns_model(c.ns);
  RngStream truth_rng(c.truth_seed);
  RngStream init = truth_rng.fork(3);
  RngStream sim = truth_rng.fork(1);
  RngStream obs = truth_rng.fork(2);

  // developed-looking initial vorticity: one correlated field draw scaled to
  // per-point standard deviation init_amplitude
  Eigen::VectorXd x0 =
      (c.ns_init_amplitude / std::sqrt(c.ns.noise.eta)) * d.ns.noise->sample(init);

  const long n_steps = c.n_steps();
  const TimeGrid grid{0.0, c.ns.dt, static_cast<int>(n_steps)};
  Trajectory<Eigen::VectorXd> traj = simulate(d.ns.model.dynamics, x0, grid, sim);
  d.truth = std::move(traj.states);
  for (int k = 1; k <= c.n_observations(); ++k)
    d.observations.push_back(
        observe(d.ns.model, d.truth[static_cast<long>(k) * c.ns.obs_stride], obs));
  return d;
}

inline std::function<Eigen::VectorXd(RngStream&, int)> ns_init_sampler(const ExperimentConfig& c,
                                                                       const NsData& data) {
  const Eigen::VectorXd y1 = data.observations.front();
  const double scale = c.init_spread / std::sqrt(c.ns.noise.eta);
  auto sampler = data.ns.noise;
  return [y1, scale, sampler](RngStream& rng, int) -> Eigen::VectorXd {
    return y1 + scale * sampler->sample(rng);
  };
}

/// Copy of the field dynamics carrying the low-rank empirical precision used
/// by the Girsanov weights: built once per smoothing run from M dedicated
/// noise-field draws, as only a diagonal of the sample SVD is inverted.
inline DiffusionSpec<Eigen::VectorXd> ns_bridge_dynamics(const ExperimentConfig& c,
                                                         const NsData& data) {
  const int n = c.ns.grid.size();
  const int m = std::max(2, c.bridges);
  RngStream precision_rng = RngStream(c.smoother_seed).fork(0x6000);
  Eigen::MatrixXd samples(n, m);
  for (int j = 0; j < m; ++j) samples.col(j) = data.ns.noise->sample(precision_rng);
  auto precision = std::make_shared<models::EmpiricalPrecision>(
      models::EmpiricalPrecision::build(models::center_columns(std::move(samples))));

  DiffusionSpec<Eigen::VectorXd> dyn = data.ns.model.dynamics;
  dyn.precision = [precision](const Eigen::VectorXd& v) { return precision->apply(v); };
  return dyn;
}

}  // namespace smcs::harness
