#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "smcs/errors.hpp"
#include "smcs/sde.hpp"
#include "smcs/weights.hpp"

namespace smcs {

enum class Proposal { bootstrap, enkf };

struct FilterConfig {
  int n_particles = 100;              // N >= 2
  Proposal proposal = Proposal::bootstrap;
  double resample_threshold = 0.5;    // resample when ESS < threshold * N
  int cloud_stride = 1;               // dt steps between stored cloud slices
  bool store_clouds = true;
  double enkf_jitter = 1e-8;          // relative diagonal jitter on a singular innovation solve

  void validate(int obs_interval) const {
    if (n_particles < 2) throw ConfigError("FilterConfig: n_particles must be >= 2");
    if (!(resample_threshold > 0.0 && resample_threshold <= 1.0))
      throw ConfigError("FilterConfig: resample_threshold must be in (0, 1]");
    if (cloud_stride < 1 || obs_interval % cloud_stride != 0)
      throw ConfigError("FilterConfig: cloud_stride must divide obs_interval");
  }
};

/// N weighted particle trajectories spanning the window since the previous
/// observation. Each particle owns a private random stream so predictions
/// can run in any order (or in parallel) and reproduce bitwise.
template <class State>
struct WeightedEnsemble {
  std::vector<Trajectory<State>> particles;
  std::vector<double> log_weights;
  std::vector<double> norm_weights;
  double time = 0.0;
  std::vector<RngStream> streams;

  int size() const { return static_cast<int>(particles.size()); }
  const State& endpoint(int i) const { return particles[i].states.back(); }
  State& endpoint(int i) { return particles[i].states.back(); }

  State weighted_endpoint_mean() const {
    State m = StateOps<State>::zero(StateOps<State>::dim(endpoint(0)));
    for (int i = 0; i < size(); ++i) StateOps<State>::add_weighted(m, norm_weights[i], endpoint(i));
    return m;
  }
};

template <class State>
WeightedEnsemble<State> make_initial_ensemble(int n_particles, int dim,
                                              const std::function<State(RngStream&, int)>& x0_sampler,
                                              RngStream& rng) {
  WeightedEnsemble<State> ens;
  ens.particles.resize(n_particles);
  ens.log_weights.assign(n_particles, 0.0);
  ens.norm_weights.assign(n_particles, 1.0 / n_particles);
  ens.streams.reserve(n_particles);
  for (int i = 0; i < n_particles; ++i)
    ens.streams.push_back(rng.fork(0x1000 + static_cast<std::uint64_t>(i)));
  for (int i = 0; i < n_particles; ++i) {
    RngStream init = rng.fork(0x2000 + static_cast<std::uint64_t>(i));
    State x0 = x0_sampler(init, i);
    ens.particles[i] = Trajectory<State>{TimeGrid{}, {x0}};
  }
  (void)dim;
  return ens;
}

/// Extends every particle by unconditional model simulation over `window`.
/// Weights are never touched by prediction.
template <class State>
void predict(WeightedEnsemble<State>& ens, const DiffusionSpec<State>& dyn,
             const TimeGrid& window, RngStream& rng) {
  if (ens.streams.size() != ens.particles.size()) {
    ens.streams.clear();
    for (int i = 0; i < ens.size(); ++i)
      ens.streams.push_back(rng.fork(0x1000 + static_cast<std::uint64_t>(i)));
  }
  for (int i = 0; i < ens.size(); ++i) {
    State x = ens.endpoint(i);
    try {
      ens.particles[i] = simulate(dyn, x, window, ens.streams[i]);
    } catch (const SimulationDiverged& e) {
      throw SimulationDiverged(std::string("predict: ") + e.what(), e.time, i);
    }
  }
  ens.time = window.t_end();
}

/// Transition-prior correction: weights gain the observation likelihood at
/// each particle endpoint.
template <class State, class Obs>
void correct_bootstrap(WeightedEnsemble<State>& ens, const ObservationSpec<State, Obs>& obs,
                       const Obs& y, int observation_index = -1) {
  for (int i = 0; i < ens.size(); ++i)
    ens.log_weights[i] += obs.log_likelihood(y, ens.endpoint(i));
  try {
    ens.norm_weights = normalize_log_weights(ens.log_weights);
  } catch (const DegenerateWeights&) {
    throw FilterDegenerate("correct_bootstrap: all likelihoods vanished", observation_index);
  }
}

/// Ensemble-estimated Kalman gain K = A (HA)^T / (N-1) * S^{-1} with
/// S = (HA)(HA)^T / (N-1) + R; shared by the EnKF correction and its tests.
/// Returns the gain and whether the solve needed diagonal regularization.
inline std::pair<Eigen::MatrixXd, bool> enkf_gain(const Eigen::MatrixXd& anomalies,
                                                  const Eigen::MatrixXd& obs_anomalies,
                                                  const Eigen::VectorXd& r_diag,
                                                  double jitter_rel) {
  const double nm1 = static_cast<double>(anomalies.cols() - 1);
  Eigen::MatrixXd s = obs_anomalies * obs_anomalies.transpose() / nm1;
  s.diagonal() += r_diag;
  const Eigen::MatrixXd cross = anomalies * obs_anomalies.transpose() / nm1;

  Eigen::LDLT<Eigen::MatrixXd> ldlt(s);
  bool regularized = false;
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
    const double jitter = jitter_rel * std::max(s.trace() / s.rows(), 1e-300);
    s.diagonal().array() += jitter;
    ldlt.compute(s);
    regularized = true;
    if (ldlt.info() != Eigen::Success)
      throw Error("enkf_gain: innovation covariance solve failed");
  }
  // K = cross * S^{-1}  via  S^T X^T = cross^T (S symmetric)
  Eigen::MatrixXd gain = ldlt.solve(cross.transpose()).transpose();
  return {std::move(gain), regularized};
}

/// Perturbed-observation EnKF proposal: each particle endpoint is shifted by
/// K (y + eps_i - H x_i), then the importance weight gains the observation
/// log-likelihood at the shifted state. The shifted trajectories between
/// observations are no longer model paths; consumers that care are expected
/// to check the enkf flag carried through the filter history.
template <class State, class Obs>
bool correct_enkf(WeightedEnsemble<State>& ens, const ObservationSpec<State, Obs>& obs,
                  const Obs& y, double jitter_rel = 1e-8, int observation_index = -1) {
  const int n_particles = ens.size();
  const int state_dim = StateOps<State>::dim(ens.endpoint(0));
  const int obs_dim = obs.obs_dim;

  Eigen::MatrixXd states(state_dim, n_particles);
  Eigen::MatrixXd obs_space(obs_dim, n_particles);
  for (int i = 0; i < n_particles; ++i) {
    states.col(i) = StateOps<State>::to_vector(ens.endpoint(i));
    obs_space.col(i) = StateOps<Obs>::to_vector(obs.op(ens.endpoint(i)));
  }
  const Eigen::VectorXd state_mean = states.rowwise().mean();
  const Eigen::VectorXd obs_mean = obs_space.rowwise().mean();
  const Eigen::MatrixXd anomalies = states.colwise() - state_mean;
  const Eigen::MatrixXd obs_anomalies = obs_space.colwise() - obs_mean;

  auto [gain, regularized] = enkf_gain(anomalies, obs_anomalies, obs.noise_var, jitter_rel);

  const Eigen::VectorXd yv = StateOps<Obs>::to_vector(y);
  const Eigen::VectorXd noise_sd = obs.noise_var.cwiseSqrt();
  for (int i = 0; i < n_particles; ++i) {
    Eigen::VectorXd perturbed = yv;
    for (int d = 0; d < obs_dim; ++d) perturbed[d] += noise_sd[d] * ens.streams[i].normal();
    const Eigen::VectorXd shifted =
        states.col(i) + gain * (perturbed - obs_space.col(i));
    ens.endpoint(i) = StateOps<State>::from_vector(shifted);
    ens.log_weights[i] += obs.log_likelihood(y, ens.endpoint(i));
  }
  try {
    ens.norm_weights = normalize_log_weights(ens.log_weights);
  } catch (const DegenerateWeights&) {
    throw FilterDegenerate("correct_enkf: all likelihoods vanished", observation_index);
  }
  return regularized;
}

/// Ancestor choice of systematic resampling for a given uniform draw
/// u in [0, 1): stratified positions (i + u)/N walked against the weight CDF.
inline std::vector<int> systematic_ancestors(const std::vector<double>& norm_weights, double u) {
  const int n = static_cast<int>(norm_weights.size());
  std::vector<int> ancestors(n);
  double cum = norm_weights[0];
  int j = 0;
  for (int i = 0; i < n; ++i) {
    const double position = (static_cast<double>(i) + u) / n;
    while (position > cum && j + 1 < n) cum += norm_weights[++j];
    ancestors[i] = j;
  }
  return ancestors;
}

/// Systematic resampling: one uniform draw, stratified offsets (i+u)/N.
/// Offspring replace the ensemble, weights reset to uniform; the returned
/// ancestor indices keep (t_k, t_{k+1}) pairs lineage-consistent.
template <class State>
std::vector<int> resample_systematic(WeightedEnsemble<State>& ens, RngStream& rng) {
  const int n = ens.size();
  std::vector<int> ancestors = systematic_ancestors(ens.norm_weights, rng.uniform());
  std::vector<Trajectory<State>> offspring;
  offspring.reserve(n);
  for (int i = 0; i < n; ++i) offspring.push_back(ens.particles[ancestors[i]]);
  ens.particles = std::move(offspring);
  ens.log_weights.assign(n, 0.0);
  ens.norm_weights.assign(n, 1.0 / n);
  return ancestors;
}

/// Everything the smoother needs from one observation segment (t_k, t_{k+1}]:
/// lineage-consistent endpoint pairs, post-correction weights and the
/// strided predictive cloud. cloud[j] holds all particle states at
/// start_step + j * cloud_stride; the final slice reflects any EnKF shift.
template <class State>
struct WindowRecord {
  int window_index = 0;   // observation segment: 0 = (t_0, t_1], k = (t_k, t_{k+1}]
  long start_step = 0;    // global dt-step index of t_k
  TimeGrid grid;          // absolute-time grid of the window

  std::vector<State> start_states;
  std::vector<double> start_weights;
  std::vector<State> end_states;
  std::vector<double> end_log_weights;
  std::vector<double> end_weights;

  std::vector<std::vector<State>> cloud;
  int cloud_stride = 1;

  bool corrected = false;       // false only for a trailing window with no observation
  bool enkf_corrected = false;
  double ess_after_correction = 0.0;
  bool resampled_after = false;
  std::vector<int> ancestors;   // filled when resampled_after

  long end_step() const { return start_step + grid.n_steps; }
};

/// Per-run filter output: diagnostics at every dt step plus (optionally) the
/// retained window records. Large runs use run_filter_stream with a sink
/// instead of retaining everything.
template <class State>
struct FilterHistory {
  int n_particles = 0;
  double dt = 0.0;
  int obs_interval = 0;
  int n_observations = 0;
  bool enkf_used = false;

  std::vector<WindowRecord<State>> windows;

  // dt-grid traces; entry s corresponds to global step s. At observation
  // steps the mean is the post-correction value; the pre-correction value is
  // kept separately per observation.
  std::vector<State> mean_trace;
  std::vector<double> ess_trace;
  std::vector<State> pre_obs_means;
  std::vector<double> ess_before_correction;
  std::vector<double> ess_after_correction;
  std::vector<bool> resampled;
  std::vector<std::string> warnings;

  long n_steps_total() const { return static_cast<long>(mean_trace.size()) - 1; }
  double time_of_step(long s) const { return static_cast<double>(s) * dt; }
};

template <class State>
using WindowSink = std::function<void(WindowRecord<State>&&)>;

/// Sequential importance sampling / resampling over the observation
/// sequence. Observations are at steps obs_interval, 2*obs_interval, ...;
/// each completed window record is handed to `sink` (which may keep or drop
/// it). `trailing_steps` extends the run past the last observation by pure
/// prediction (used when there are no observations at all).
template <class State, class Obs>
FilterHistory<State> run_filter_stream(const StateSpaceModel<State, Obs>& model,
                                       const FilterConfig& config,
                                       const std::vector<Obs>& observations,
                                       const std::function<State(RngStream&, int)>& x0_sampler,
                                       RngStream rng, const WindowSink<State>& sink,
                                       int trailing_steps = 0) {
  config.validate(model.obs_interval);
  const int n = config.n_particles;
  const int s = model.obs_interval;
  const int n_obs = static_cast<int>(observations.size());

  WeightedEnsemble<State> ens = make_initial_ensemble<State>(n, model.dynamics.dim, x0_sampler, rng);
  ens.time = 0.0;

  FilterHistory<State> history;
  history.n_particles = n;
  history.dt = model.dt;
  history.obs_interval = s;
  history.n_observations = n_obs;
  history.enkf_used = (config.proposal == Proposal::enkf) && n_obs > 0;

  history.mean_trace.push_back(ens.weighted_endpoint_mean());
  history.ess_trace.push_back(ess(ens.norm_weights));

  RngStream resample_rng = rng.fork(0x3000);

  const int n_segments = n_obs + (trailing_steps > 0 ? 1 : 0);
  for (int k = 0; k < n_segments; ++k) {
    const bool has_obs = k < n_obs;
    const long start_step = static_cast<long>(k) * s;
    const int seg_steps = has_obs ? s : trailing_steps;
    const TimeGrid window{static_cast<double>(start_step) * model.dt, model.dt, seg_steps};

    WindowRecord<State> rec;
    rec.window_index = k;
    rec.start_step = start_step;
    rec.grid = window;
    rec.cloud_stride = config.cloud_stride;
    rec.start_weights = ens.norm_weights;
    rec.start_states.reserve(n);
    for (int i = 0; i < n; ++i) rec.start_states.push_back(ens.endpoint(i));

    try {
      predict(ens, model.dynamics, window, rng);
    } catch (const SimulationDiverged& e) {
      throw SimulationDiverged(std::string("run_filter: ") + e.what(), e.time, e.particle);
    }

    // predictive means over the window interior (weights unchanged)
    for (int j = 1; j < seg_steps; ++j) {
      State m = StateOps<State>::zero(model.dynamics.dim);
      for (int i = 0; i < n; ++i)
        StateOps<State>::add_weighted(m, ens.norm_weights[i], ens.particles[i].states[j]);
      history.mean_trace.push_back(std::move(m));
      history.ess_trace.push_back(ess(ens.norm_weights));
    }

    const double ess_before = ess(ens.norm_weights);
    State pre_mean = ens.weighted_endpoint_mean();

    if (has_obs) {
      history.pre_obs_means.push_back(pre_mean);
      history.ess_before_correction.push_back(ess_before);
      rec.corrected = true;
      try {
        if (config.proposal == Proposal::enkf) {
          rec.enkf_corrected = true;
          if (correct_enkf(ens, model.observation, observations[k], config.enkf_jitter, k))
            history.warnings.push_back("enkf: regularized innovation solve at observation " +
                                       std::to_string(k + 1));
        } else {
          correct_bootstrap(ens, model.observation, observations[k], k);
        }
      } catch (const FilterDegenerate& e) {
        throw FilterDegenerate(std::string("run_filter: ") + e.what(), k);
      }
      rec.ess_after_correction = ess(ens.norm_weights);
      history.ess_after_correction.push_back(rec.ess_after_correction);
    } else {
      rec.ess_after_correction = ess_before;
    }

    history.mean_trace.push_back(ens.weighted_endpoint_mean());
    history.ess_trace.push_back(rec.ess_after_correction);

    // snapshot endpoints and cloud: the final slice carries any EnKF shift
    rec.end_states.reserve(n);
    for (int i = 0; i < n; ++i) rec.end_states.push_back(ens.endpoint(i));
    rec.end_log_weights = ens.log_weights;
    rec.end_weights = ens.norm_weights;
    if (config.store_clouds) {
      const int n_slices = seg_steps / config.cloud_stride;
      rec.cloud.resize(n_slices + 1);
      for (int jj = 0; jj <= n_slices; ++jj) {
        const int j = jj * config.cloud_stride;
        rec.cloud[jj].reserve(n);
        for (int i = 0; i < n; ++i) rec.cloud[jj].push_back(ens.particles[i].states[j]);
      }
      // EnKF moved the endpoints after simulation; mirror that in the cloud
      if (rec.enkf_corrected)
        for (int i = 0; i < n; ++i) rec.cloud.back()[i] = ens.endpoint(i);
    }

    const bool do_resample =
        has_obs && rec.ess_after_correction < config.resample_threshold * n;
    if (do_resample) {
      rec.resampled_after = true;
      rec.ancestors = resample_systematic(ens, resample_rng);
    }
    history.resampled.push_back(do_resample);

    sink(std::move(rec));
  }
  return history;
}

/// Convenience wrapper retaining every window record in the history.
template <class State, class Obs>
FilterHistory<State> run_filter(const StateSpaceModel<State, Obs>& model,
                                const FilterConfig& config, const std::vector<Obs>& observations,
                                const std::function<State(RngStream&, int)>& x0_sampler,
                                RngStream rng, int trailing_steps = 0) {
  std::vector<WindowRecord<State>> kept;
  auto sink = [&kept](WindowRecord<State>&& rec) { kept.push_back(std::move(rec)); };
  FilterHistory<State> history = run_filter_stream<State, Obs>(
      model, config, observations, x0_sampler, std::move(rng), sink, trailing_steps);
  history.windows = std::move(kept);
  return history;
}

}  // namespace smcs
