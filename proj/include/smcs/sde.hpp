#pragma once

#include <cmath>
#include <functional>
#include <numbers>
#include <utility>
#include <vector>

#include "smcs/errors.hpp"
#include "smcs/random.hpp"
#include "smcs/state_ops.hpp"
#include "smcs/time_grid.hpp"

namespace smcs {

template <class State>
using StateFn = std::function<State(const State&)>;

/// Time-homogeneous diffusion dx = f(x) dt + sigma dB with a noise factor
/// that is constant in the state (required by the bridge reweighting; models
/// with state-dependent sigma cannot be expressed through this type).
///
/// The noise factor and the precision of Sigma = sigma sigma^T are linear
/// operators rather than materialized matrices, so field models can apply
/// them spectrally or through a low-rank empirical factorization.
template <class State>
struct DiffusionSpec {
  int dim = 0;
  StateFn<State> drift;          // f
  StateFn<State> noise_factor;   // z -> sigma z
  StateFn<State> precision;      // v -> Sigma^{-1} v; may be empty until a
                                 // bridge weighting is requested

  bool has_precision() const { return static_cast<bool>(precision); }
};

template <class State>
struct Trajectory {
  TimeGrid grid;
  std::vector<State> states;  // grid.n_steps + 1 entries

  const State& front() const { return states.front(); }
  const State& back() const { return states.back(); }
};

/// One explicit Euler step: x + f(x) dt + sigma dW, with dW ~ N(0, dt I)
/// supplied by the caller (the noise factor is applied inside).
template <class State>
State euler_step(const DiffusionSpec<State>& spec, const State& x, double dt, const State& dW) {
  State next = x;
  StateOps<State>::axpy(next, dt, spec.drift(x));
  next += spec.noise_factor(dW);
  if (!StateOps<State>::finite(next))
    throw SimulationDiverged("euler_step: non-finite state");
  return next;
}

/// Unconditional path simulation over `grid` with fresh N(0, dt I)
/// increments drawn from `rng`. Deterministic for a given stream.
template <class State>
Trajectory<State> simulate(const DiffusionSpec<State>& spec, const State& x0,
                           const TimeGrid& grid, RngStream& rng) {
  if (!StateOps<State>::finite(x0))
    throw SimulationDiverged("simulate: non-finite initial state", grid.t_start);
  Trajectory<State> traj{grid, {}};
  traj.states.reserve(grid.n_points());
  traj.states.push_back(x0);
  const double sqrt_dt = std::sqrt(grid.dt);
  for (int k = 0; k < grid.n_steps; ++k) {
    State dW = StateOps<State>::gaussian(spec.dim, rng);
    StateOps<State>::scale(dW, sqrt_dt);
    try {
      traj.states.push_back(euler_step(spec, traj.states.back(), grid.dt, dW));
    } catch (const SimulationDiverged&) {
      throw SimulationDiverged("simulate: trajectory diverged", grid.time(k + 1));
    }
  }
  return traj;
}

/// Discrete-time observation y = g(x) + gamma, gamma ~ N(0, diag(noise_var)).
template <class State, class Obs = State>
struct ObservationSpec {
  int obs_dim = 0;
  std::function<Obs(const State&)> op;  // g
  Eigen::VectorXd noise_var;            // diagonal of R
  std::function<double(const Obs&, const State&)> log_likelihood;  // log N(y; g(x), R)
};

/// Gaussian observation model with diagonal covariance; builds a consistent
/// log-likelihood from the operator and noise variances.
template <class State, class Obs = State, class Op>
ObservationSpec<State, Obs> make_gaussian_observation(int obs_dim, Op op,
                                                      Eigen::VectorXd noise_var) {
  if (noise_var.size() != obs_dim)
    throw ConfigError("make_gaussian_observation: noise_var size mismatch");
  ObservationSpec<State, Obs> spec;
  spec.obs_dim = obs_dim;
  spec.op = op;
  spec.noise_var = std::move(noise_var);
  spec.log_likelihood = [op, v = spec.noise_var](const Obs& y, const State& x) {
    const Obs gx = op(x);
    if constexpr (StateOps<Obs>::is_scalar) {
      const double d = y - gx;
      return -0.5 * (d * d / v[0] + std::log(2.0 * std::numbers::pi * v[0]));
    } else {
      double ll = 0.0;
      for (Eigen::Index i = 0; i < y.size(); ++i) {
        const double d = y[i] - gx[i];
        ll += -0.5 * (d * d / v[i] + std::log(2.0 * std::numbers::pi * v[i]));
      }
      return ll;
    }
  };
  return spec;
}

/// Continuous dynamics observed at discrete times t_k = k * obs_interval * dt.
template <class State, class Obs = State>
struct StateSpaceModel {
  DiffusionSpec<State> dynamics;
  ObservationSpec<State, Obs> observation;
  double dt = 0.0;       // integrator step
  int obs_interval = 1;  // dt steps between observations

  double obs_time(int k) const {  // k = 1, 2, ...
    return static_cast<double>(static_cast<long>(k) * obs_interval) * dt;
  }
};

template <class State, class Obs>
Obs observe(const StateSpaceModel<State, Obs>& model, const State& x, RngStream& rng) {
  if (!StateOps<State>::finite(x)) throw SimulationDiverged("observe: non-finite state");
  Obs y = model.observation.op(x);
  if constexpr (StateOps<Obs>::is_scalar) {
    return y + std::sqrt(model.observation.noise_var[0]) * rng.normal();
  } else {
    for (Eigen::Index i = 0; i < y.size(); ++i)
      y[i] += std::sqrt(model.observation.noise_var[i]) * rng.normal();
    return y;
  }
}

}  // namespace smcs
