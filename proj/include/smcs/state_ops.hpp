#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "smcs/random.hpp"

namespace smcs {

/// Uniform vector-space interface over the supported state representations:
/// plain `double` for scalar models, Eigen::VectorXd for vector/field models.
/// Every algorithm in the library is templated on the state type through
/// these operations.
template <class State>
struct StateOps;

template <>
struct StateOps<double> {
  static constexpr bool is_scalar = true;

  static int dim(const double&) { return 1; }
  static double zero(int) { return 0.0; }
  static bool finite(const double& x) { return std::isfinite(x); }
  static double dot(const double& a, const double& b) { return a * b; }
  static double norm(const double& a) { return std::abs(a); }

  static double gaussian(int, RngStream& rng) { return rng.normal(); }

  static void scale(double& x, double a) { x *= a; }
  static void axpy(double& y, double a, const double& x) { y += a * x; }

  static void cwise_min_update(double& m, const double& x) { m = std::min(m, x); }
  static void cwise_max_update(double& m, const double& x) { m = std::max(m, x); }
  static void add_weighted(double& acc, double w, const double& x) { acc += w * x; }
  static void add_weighted_sq(double& acc, double w, const double& x) { acc += w * x * x; }

  // Per-coordinate sqrt(max(0, m2 - m1^2)).
  static double moments_to_sd(const double& m2, const double& m1) {
    return std::sqrt(std::max(0.0, m2 - m1 * m1));
  }

  static Eigen::VectorXd to_vector(const double& x) {
    Eigen::VectorXd v(1);
    v[0] = x;
    return v;
  }
  static double from_vector(const Eigen::VectorXd& v) { return v[0]; }
};

template <>
struct StateOps<Eigen::VectorXd> {
  static constexpr bool is_scalar = false;

  static int dim(const Eigen::VectorXd& x) { return static_cast<int>(x.size()); }
  static Eigen::VectorXd zero(int n) { return Eigen::VectorXd::Zero(n); }
  static bool finite(const Eigen::VectorXd& x) { return x.allFinite(); }
  static double dot(const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return a.dot(b); }
  static double norm(const Eigen::VectorXd& a) { return a.norm(); }

  static Eigen::VectorXd gaussian(int n, RngStream& rng) {
    Eigen::VectorXd z(n);
    for (int i = 0; i < n; ++i) z[i] = rng.normal();
    return z;
  }

  static void scale(Eigen::VectorXd& x, double a) { x *= a; }
  static void axpy(Eigen::VectorXd& y, double a, const Eigen::VectorXd& x) { y += a * x; }

  static void cwise_min_update(Eigen::VectorXd& m, const Eigen::VectorXd& x) {
    m = m.cwiseMin(x);
  }
  static void cwise_max_update(Eigen::VectorXd& m, const Eigen::VectorXd& x) {
    m = m.cwiseMax(x);
  }
  static void add_weighted(Eigen::VectorXd& acc, double w, const Eigen::VectorXd& x) {
    acc += w * x;
  }
  static void add_weighted_sq(Eigen::VectorXd& acc, double w, const Eigen::VectorXd& x) {
    acc.array() += w * x.array().square();
  }

  static Eigen::VectorXd moments_to_sd(const Eigen::VectorXd& m2, const Eigen::VectorXd& m1) {
    return (m2.array() - m1.array().square()).max(0.0).sqrt();
  }

  static Eigen::VectorXd to_vector(const Eigen::VectorXd& x) { return x; }
  static Eigen::VectorXd from_vector(const Eigen::VectorXd& v) { return v; }
};

}  // namespace smcs
