#pragma once

#include <stdexcept>

namespace smcs {

/// Uniform time grid over [t_start, t_start + n_steps*dt].
///
/// Grid points are always computed as t_start + k*dt by index, never by
/// repeated addition, so long integrations carry no accumulated drift.
struct TimeGrid {
  double t_start = 0.0;
  double dt = 0.0;
  int n_steps = 0;

  TimeGrid() = default;
  TimeGrid(double t_start, double dt, int n_steps)
      : t_start(t_start), dt(dt), n_steps(n_steps) {
    if (!(dt > 0.0)) throw std::invalid_argument("TimeGrid: dt must be > 0");
    if (n_steps < 1) throw std::invalid_argument("TimeGrid: n_steps must be >= 1");
  }

  double time(int k) const { return t_start + static_cast<double>(k) * dt; }
  double t_end() const { return time(n_steps); }
  double span() const { return t_end() - t_start; }
  int n_points() const { return n_steps + 1; }
};

}  // namespace smcs
