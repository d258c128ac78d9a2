#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "smcs/errors.hpp"
#include "smcs/sde.hpp"

namespace smcs::models {

/// Scalar Ornstein-Uhlenbeck diffusion dx = -theta x dt + sigma dB.
inline DiffusionSpec<double> make_ou_diffusion(double theta, double sigma) {
  DiffusionSpec<double> d;
  d.dim = 1;
  d.drift = [theta](const double& x) { return -theta * x; };
  d.noise_factor = [sigma](const double& z) { return sigma * z; };
  if (sigma > 0.0)
    d.precision = [q = sigma * sigma](const double& v) { return v / q; };
  return d;
}

/// Linear-Gaussian test model: dx = A x dt + sigma dB with Sigma = Q,
/// observed as y = H x + v, v ~ N(0, diag(r)). Under the Euler scheme the
/// discrete system is exactly x_{j+1} = (I + A dt) x_j + w, w ~ N(0, Q dt),
/// which is what the Kalman/RTS oracle below works with.
struct LinearGaussianSpec {
  Eigen::MatrixXd a;
  Eigen::MatrixXd h;
  Eigen::MatrixXd q;
  Eigen::VectorXd r_diag;
  double dt = 0.0;
  int stride = 1;
  Eigen::VectorXd m0;
  Eigen::MatrixXd p0;

  int dim() const { return static_cast<int>(a.rows()); }
  int obs_dim() const { return static_cast<int>(h.rows()); }

  void validate() const {
    if (a.rows() != a.cols() || q.rows() != q.cols() || p0.rows() != p0.cols())
      throw ConfigError("LinearGaussianSpec: square matrices required");
    if (h.cols() != a.rows() || q.rows() != a.rows() || m0.size() != a.rows() ||
        p0.rows() != a.rows() || r_diag.size() != h.rows())
      throw ConfigError("LinearGaussianSpec: dimension mismatch");
    if (!(dt > 0.0) || stride < 1) throw ConfigError("LinearGaussianSpec: bad dt/stride");
    check_psd(q, "Q");
    check_psd(p0, "P0");
    if ((r_diag.array() < 0.0).any()) throw ConfigError("LinearGaussianSpec: negative R");
  }

  static void check_psd(const Eigen::MatrixXd& m, const char* name) {
    if (!m.isApprox(m.transpose(), 1e-12))
      throw ConfigError(std::string("LinearGaussianSpec: ") + name + " not symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    const double scale = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
    if (es.eigenvalues().minCoeff() < -1e-12 * scale)
      throw ConfigError(std::string("LinearGaussianSpec: ") + name + " not PSD");
  }
};

/// PSD square root / pseudo-inverse through an eigendecomposition; tolerant
/// of zero modes so degenerate test models still construct.
inline std::pair<Eigen::MatrixXd, Eigen::MatrixXd> psd_sqrt_and_pinv(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  const Eigen::VectorXd lam = es.eigenvalues().cwiseMax(0.0);
  const double tol = 1e-14 * std::max(1.0, lam.maxCoeff());
  Eigen::VectorXd sqrt_lam(lam.size()), inv_lam(lam.size());
  for (Eigen::Index i = 0; i < lam.size(); ++i) {
    sqrt_lam[i] = std::sqrt(lam[i]);
    inv_lam[i] = lam[i] > tol ? 1.0 / lam[i] : 0.0;
  }
  const Eigen::MatrixXd& u = es.eigenvectors();
  return {u * sqrt_lam.asDiagonal() * u.transpose(), u * inv_lam.asDiagonal() * u.transpose()};
}

inline StateSpaceModel<Eigen::VectorXd> make_linear_gaussian(const LinearGaussianSpec& spec) {
  spec.validate();
  auto [sigma, prec] = psd_sqrt_and_pinv(spec.q);

  StateSpaceModel<Eigen::VectorXd> model;
  model.dt = spec.dt;
  model.obs_interval = spec.stride;
  model.dynamics.dim = spec.dim();
  model.dynamics.drift = [a = spec.a](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    return a * x;
  };
  model.dynamics.noise_factor = [sigma = sigma](const Eigen::VectorXd& z) -> Eigen::VectorXd {
    return sigma * z;
  };
  if (spec.q.norm() > 0.0)
    model.dynamics.precision = [prec = prec](const Eigen::VectorXd& v) -> Eigen::VectorXd {
      return prec * v;
    };
  model.observation = make_gaussian_observation<Eigen::VectorXd>(
      spec.obs_dim(),
      [h = spec.h](const Eigen::VectorXd& x) -> Eigen::VectorXd { return h * x; }, spec.r_diag);
  return model;
}

/// Scalar flavour of the same model, expressed on State = double.
inline StateSpaceModel<double> make_scalar_linear_gaussian(double a, double h, double q, double r,
                                                           double dt, int stride) {
  if (q < 0.0 || r < 0.0) throw ConfigError("make_scalar_linear_gaussian: negative variance");
  StateSpaceModel<double> model;
  model.dt = dt;
  model.obs_interval = stride;
  model.dynamics.dim = 1;
  model.dynamics.drift = [a](const double& x) { return a * x; };
  model.dynamics.noise_factor = [s = std::sqrt(q)](const double& z) { return s * z; };
  if (q > 0.0) model.dynamics.precision = [q](const double& v) { return v / q; };
  Eigen::VectorXd r_diag(1);
  r_diag[0] = r;
  model.observation =
      make_gaussian_observation<double>(1, [h](const double& x) { return h * x; }, r_diag);
  return model;
}

/// Exact Gaussian marginals of the discretized model: filtered and one-step
/// predicted moments at every dt step, plus fixed-interval RTS smoothing.
struct KalmanRtsResult {
  std::vector<Eigen::VectorXd> mean_predicted;  // p(x_j | y before step j)
  std::vector<Eigen::MatrixXd> cov_predicted;
  std::vector<Eigen::VectorXd> mean_filtered;   // p(x_j | y up to step j)
  std::vector<Eigen::MatrixXd> cov_filtered;
  std::vector<Eigen::VectorXd> mean_smoothed;   // p(x_j | all observations)
  std::vector<Eigen::MatrixXd> cov_smoothed;
};

inline KalmanRtsResult kalman_rts_oracle(const LinearGaussianSpec& spec,
                                         const std::vector<Eigen::VectorXd>& observations) {
  spec.validate();
  const int n = spec.dim();
  const long n_steps = static_cast<long>(observations.size()) * spec.stride;
  const Eigen::MatrixXd f = Eigen::MatrixXd::Identity(n, n) + spec.a * spec.dt;
  const Eigen::MatrixXd qd = spec.q * spec.dt;
  const Eigen::MatrixXd r = spec.r_diag.asDiagonal();

  KalmanRtsResult res;
  res.mean_predicted.resize(n_steps + 1);
  res.cov_predicted.resize(n_steps + 1);
  res.mean_filtered.resize(n_steps + 1);
  res.cov_filtered.resize(n_steps + 1);

  res.mean_predicted[0] = spec.m0;
  res.cov_predicted[0] = spec.p0;
  res.mean_filtered[0] = spec.m0;
  res.cov_filtered[0] = spec.p0;

  for (long j = 1; j <= n_steps; ++j) {
    res.mean_predicted[j] = f * res.mean_filtered[j - 1];
    res.cov_predicted[j] = f * res.cov_filtered[j - 1] * f.transpose() + qd;
    if (j % spec.stride == 0) {
      const Eigen::VectorXd& y = observations[j / spec.stride - 1];
      const Eigen::MatrixXd s = spec.h * res.cov_predicted[j] * spec.h.transpose() + r;
      const Eigen::MatrixXd gain =
          s.ldlt().solve(spec.h * res.cov_predicted[j].transpose()).transpose();
      res.mean_filtered[j] =
          res.mean_predicted[j] + gain * (y - spec.h * res.mean_predicted[j]);
      res.cov_filtered[j] =
          (Eigen::MatrixXd::Identity(n, n) - gain * spec.h) * res.cov_predicted[j];
    } else {
      res.mean_filtered[j] = res.mean_predicted[j];
      res.cov_filtered[j] = res.cov_predicted[j];
    }
  }

  res.mean_smoothed.resize(n_steps + 1);
  res.cov_smoothed.resize(n_steps + 1);
  res.mean_smoothed[n_steps] = res.mean_filtered[n_steps];
  res.cov_smoothed[n_steps] = res.cov_filtered[n_steps];
  for (long j = n_steps - 1; j >= 0; --j) {
    const Eigen::MatrixXd gain =
        res.cov_predicted[j + 1].ldlt().solve(f * res.cov_filtered[j].transpose()).transpose();
    res.mean_smoothed[j] =
        res.mean_filtered[j] + gain * (res.mean_smoothed[j + 1] - res.mean_predicted[j + 1]);
    res.cov_smoothed[j] =
        res.cov_filtered[j] +
        gain * (res.cov_smoothed[j + 1] - res.cov_predicted[j + 1]) * gain.transpose();
  }
  return res;
}

/// Lag-one smoothing marginals for window (t_k, t_{k+1}]: RTS run backward
/// from the filtered law at step (k+1)*stride, so step j inside the window
/// is conditioned on observations up to t_{k+1} only. Index 0 of the result
/// corresponds to step k*stride.
inline std::pair<std::vector<Eigen::VectorXd>, std::vector<Eigen::MatrixXd>>
fixed_lag_window_marginals(const LinearGaussianSpec& spec, const KalmanRtsResult& kf, int k) {
  const long start = static_cast<long>(k) * spec.stride;
  const long end = start + spec.stride;
  const int n = spec.dim();
  const Eigen::MatrixXd f = Eigen::MatrixXd::Identity(n, n) + spec.a * spec.dt;

  std::vector<Eigen::VectorXd> means(spec.stride + 1);
  std::vector<Eigen::MatrixXd> covs(spec.stride + 1);
  means[spec.stride] = kf.mean_filtered[end];
  covs[spec.stride] = kf.cov_filtered[end];
  for (long j = end - 1; j >= start; --j) {
    const Eigen::MatrixXd gain =
        kf.cov_predicted[j + 1].ldlt().solve(f * kf.cov_filtered[j].transpose()).transpose();
    const long local = j - start;
    means[local] = kf.mean_filtered[j] + gain * (means[local + 1] - kf.mean_predicted[j + 1]);
    covs[local] = kf.cov_filtered[j] +
                  gain * (covs[local + 1] - kf.cov_predicted[j + 1]) * gain.transpose();
  }
  return {means, covs};
}

}  // namespace smcs::models
