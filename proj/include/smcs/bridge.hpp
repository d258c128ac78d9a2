#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "smcs/errors.hpp"
#include "smcs/sde.hpp"
#include "smcs/weights.hpp"

namespace smcs {

/// Endpoint constraints for a conditioned path: x(0) = start, x(T) = end,
/// with T = grid.t_end() (grids are in window-local time starting at 0).
template <class State>
struct BridgeConstraint {
  State start;
  State end;
  TimeGrid grid;
};

/// Drift of the auxiliary process whose paths hit `v` at time T by
/// construction: f(x) - (x - v) / (T - t).
template <class State>
State bridge_drift(const DiffusionSpec<State>& spec, const State& x, double t,
                   const State& v, double T) {
  if (!(t < T)) throw std::domain_error("bridge_drift: requires t < T");
  State d = spec.drift(x);
  const double pull = 1.0 / (T - t);
  StateOps<State>::axpy(d, pull, v);
  StateOps<State>::axpy(d, -pull, x);
  return d;
}

namespace detail {

/// Euler simulation of the auxiliary process with an optional inline
/// Girsanov accumulator. The pull term explodes as t -> T, so the final
/// step assigns x(T) := end instead of integrating over [T-dt, T]; the
/// log-weight is the left-endpoint Riemann sum of
///   -(x(t_k) - v)^T Sigma^{-1} f(x(t_k)) / (T - t_k)
/// over k = 0..n_steps-1, which never evaluates the singular endpoint t = T.
template <class State, bool WithWeight>
std::pair<Trajectory<State>, double> simulate_bridge_impl(const DiffusionSpec<State>& spec,
                                                          const BridgeConstraint<State>& c,
                                                          RngStream& rng) {
  const TimeGrid& grid = c.grid;
  if (grid.n_steps < 2)
    throw std::invalid_argument("simulate_bridge: grid must have at least 2 steps");
  if (!StateOps<State>::finite(c.start) || !StateOps<State>::finite(c.end))
    throw SimulationDiverged("simulate_bridge: non-finite constraint");
  if (WithWeight && !spec.has_precision())
    throw PrecisionUnavailable("simulate_bridge: diffusion has no precision operator");

  const double T = grid.t_end();
  const double dt = grid.dt;
  const double sqrt_dt = std::sqrt(dt);

  Trajectory<State> traj{grid, {}};
  traj.states.reserve(grid.n_points());
  traj.states.push_back(c.start);

  double log_weight = 0.0;
  State x = c.start;
  for (int k = 0; k < grid.n_steps; ++k) {
    const double t = grid.time(k);
    const State fx = spec.drift(x);
    if constexpr (WithWeight) {
      State diff = x;
      StateOps<State>::axpy(diff, -1.0, c.end);
      log_weight -= StateOps<State>::dot(diff, spec.precision(fx)) / (T - t) * dt;
    }
    if (k < grid.n_steps - 1) {
      const double pull = dt / (T - t);
      State next = x;
      StateOps<State>::axpy(next, dt, fx);
      StateOps<State>::axpy(next, pull, c.end);
      StateOps<State>::axpy(next, -pull, x);
      State dW = StateOps<State>::gaussian(spec.dim, rng);
      StateOps<State>::scale(dW, sqrt_dt);
      next += spec.noise_factor(dW);
      if (!StateOps<State>::finite(next))
        throw SimulationDiverged("simulate_bridge: trajectory diverged", grid.time(k + 1));
      x = std::move(next);
      traj.states.push_back(x);
    } else {
      traj.states.push_back(c.end);  // endpoint holds exactly, by construction
    }
  }
  return {std::move(traj), log_weight};
}

}  // namespace detail

/// Samples one trajectory of the auxiliary process from start to end.
template <class State>
Trajectory<State> simulate_bridge(const DiffusionSpec<State>& spec,
                                  const BridgeConstraint<State>& c, RngStream& rng) {
  return detail::simulate_bridge_impl<State, false>(spec, c, rng).first;
}

/// Log of the importance density correcting auxiliary-process samples to the
/// law of the conditioned diffusion, as a left-endpoint Riemann sum over the
/// trajectory's grid (the singular endpoint t = T is excluded).
template <class State>
double girsanov_log_weight(const DiffusionSpec<State>& spec, const Trajectory<State>& traj,
                           const State& v) {
  if (!spec.has_precision())
    throw PrecisionUnavailable("girsanov_log_weight: diffusion has no precision operator");
  const TimeGrid& grid = traj.grid;
  const double T = grid.t_end();
  double log_weight = 0.0;
  for (int k = 0; k < grid.n_steps; ++k) {
    const double t = grid.time(k);
    const State& x = traj.states[k];
    const State fx = spec.drift(x);
    State diff = x;
    StateOps<State>::axpy(diff, -1.0, v);
    // same expression order as the fused accumulation in simulate_bridge_impl
    log_weight -= StateOps<State>::dot(diff, spec.precision(fx)) / (T - t) * grid.dt;
  }
  return log_weight;
}

/// M conditioned trajectories for one endpoint pair with self-normalized
/// importance weights, all kept in log domain until normalization.
template <class State>
struct BridgeBatch {
  BridgeConstraint<State> constraint;
  std::vector<Trajectory<State>> trajectories;
  std::vector<double> log_weights;
  std::vector<double> norm_weights;

  int size() const { return static_cast<int>(trajectories.size()); }
};

/// Simulates M independent bridges and computes their normalized weights.
/// Child streams are pre-derived from `rng`, so bridge simulations are
/// order-independent. Throws DegenerateBatch when every weight underflows.
template <class State>
BridgeBatch<State> sample_bridge_batch(const DiffusionSpec<State>& spec,
                                       const BridgeConstraint<State>& c, int m_bridges,
                                       RngStream& rng) {
  if (m_bridges < 1) throw std::invalid_argument("sample_bridge_batch: M must be >= 1");
  BridgeBatch<State> batch{c, {}, {}, {}};
  batch.trajectories.reserve(m_bridges);
  batch.log_weights.reserve(m_bridges);

  std::vector<RngStream> streams;
  streams.reserve(m_bridges);
  for (int j = 0; j < m_bridges; ++j) streams.push_back(rng.fork(static_cast<std::uint64_t>(j)));

  for (int j = 0; j < m_bridges; ++j) {
    auto [traj, lw] = detail::simulate_bridge_impl<State, true>(spec, c, streams[j]);
    batch.trajectories.push_back(std::move(traj));
    batch.log_weights.push_back(lw);
  }
  try {
    batch.norm_weights = normalize_log_weights(batch.log_weights);
  } catch (const DegenerateWeights&) {
    throw DegenerateBatch("sample_bridge_batch: all Girsanov weights underflowed");
  }
  return batch;
}

}  // namespace smcs
