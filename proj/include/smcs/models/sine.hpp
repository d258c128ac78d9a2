#pragma once

#include <cmath>

#include "smcs/errors.hpp"
#include "smcs/sde.hpp"

namespace smcs::models {

inline double sine_drift(double x) { return std::sin(x); }

/// Scalar sine diffusion dx = sin(x) dt + sigma_x dB observed directly with
/// Gaussian noise every obs_stride steps.
struct SineModelParams {
  double sigma_x2 = 0.5;
  double sigma_y2 = 0.01;
  double dt = 0.005;
  int obs_stride = 20;

  void validate() const {
    // sigma_y2 == 0 is allowed for noise-free twin-experiment generation;
    // filtering against such observations is meaningless and not supported
    if (!(sigma_x2 > 0.0) || !(sigma_y2 >= 0.0) || !(dt > 0.0) || obs_stride < 1)
      throw ConfigError("SineModelParams: parameters must be positive (sigma_y2 >= 0)");
  }
};

inline StateSpaceModel<double> make_sine_model(const SineModelParams& p = {}) {
  p.validate();
  StateSpaceModel<double> model;
  model.dt = p.dt;
  model.obs_interval = p.obs_stride;
  model.dynamics.dim = 1;
  model.dynamics.drift = [](const double& x) { return std::sin(x); };
  model.dynamics.noise_factor = [s = std::sqrt(p.sigma_x2)](const double& z) { return s * z; };
  model.dynamics.precision = [q = p.sigma_x2](const double& v) { return v / q; };
  Eigen::VectorXd r(1);
  r[0] = p.sigma_y2;
  model.observation =
      make_gaussian_observation<double>(1, [](const double& x) { return x; }, r);
  return model;
}

}  // namespace smcs::models
