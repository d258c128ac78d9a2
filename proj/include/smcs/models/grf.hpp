#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <memory>
#include <vector>

#include "smcs/models/spectral.hpp"
#include "smcs/random.hpp"

namespace smcs::models {

/// Stationary periodic Gaussian random field with covariance
/// C(x_i, x_j) = eta * exp(-||x_i - x_j||^2 / lambda), distances in grid units.
struct GrfSpec {
  double eta = 0.01;
  double lambda = 13.0;

  void validate() const {
    if (!(eta >= 0.0) || !(lambda > 0.0)) throw ConfigError("GrfSpec: eta >= 0, lambda > 0 required");
  }
};

/// Samples the field by scaling white noise with the square root of the
/// covariance spectrum: the covariance is circulant on the periodic grid, so
/// the DFT diagonalizes it and C^{1/2} z costs two transforms.
///
/// apply_factor is exactly the constant noise factor sigma of the field
/// diffusion models (Sigma = sigma sigma^T = C).
class GrfSampler {
 public:
  GrfSampler(int nx, int ny, GrfSpec spec)
      : spec_(spec), grid_(std::make_unique<SpectralGrid2D>(nx, ny)) {
    spec.validate();
    const int n = grid_->n_real();
    // periodized kernel: summing the squared-exponential over image shifts
    // keeps the circulant covariance positive semi-definite on the torus
    std::vector<double> kernel(n);
    for (int i = 0; i < nx; ++i) {
      for (int j = 0; j < ny; ++j) {
        double sum = 0.0;
        for (int mx = -2; mx <= 2; ++mx) {
          const double dx = i + mx * nx;
          for (int my = -2; my <= 2; ++my) {
            const double dy = j + my * ny;
            sum += std::exp(-(dx * dx + dy * dy) / spec.lambda);
          }
        }
        kernel[i * ny + j] = spec.eta * sum;
      }
    }
    std::vector<std::complex<double>> spectrum(grid_->n_cplx());
    grid_->forward(kernel.data(), spectrum.data());

    sqrt_spectrum_.resize(grid_->n_cplx());
    double clipped = 0.0, total = 0.0;
    for (int p = 0; p < grid_->n_cplx(); ++p) {
      const double s = spectrum[p].real();
      total += std::abs(s);
      if (s < 0.0) clipped += -s;
      sqrt_spectrum_[p] = std::sqrt(std::max(s, 0.0));
    }
    clipped_mass_ = total > 0.0 ? clipped / total : 0.0;
    if (clipped_mass_ >= 1e-6)
      throw Error("GrfSampler: clipped spectral mass " + std::to_string(clipped_mass_) +
                  " exceeds 1e-6");
  }

  const GrfSpec& spec() const { return spec_; }
  int nx() const { return grid_->nx(); }
  int ny() const { return grid_->ny(); }
  int size() const { return grid_->n_real(); }
  double clipped_mass() const { return clipped_mass_; }

  /// C^{1/2} z for an arbitrary vector z.
  Eigen::VectorXd apply_factor(const Eigen::VectorXd& z) {
    std::vector<std::complex<double>> hat(grid_->n_cplx());
    grid_->forward(z.data(), hat.data());
    for (int p = 0; p < grid_->n_cplx(); ++p) hat[p] *= sqrt_spectrum_[p];
    Eigen::VectorXd out(grid_->n_real());
    grid_->inverse(hat.data(), out.data());
    return out;
  }

  /// One field draw: apply_factor of i.i.d. standard normals.
  Eigen::VectorXd sample(RngStream& rng) {
    Eigen::VectorXd z(grid_->n_real());
    for (int p = 0; p < grid_->n_real(); ++p) z[p] = rng.normal();
    return apply_factor(z);
  }

 private:
  GrfSpec spec_;
  std::unique_ptr<SpectralGrid2D> grid_;
  std::vector<double> sqrt_spectrum_;
  double clipped_mass_ = 0.0;
};

/// Convenience wrapper matching the free-function sampling surface.
inline Eigen::VectorXd sample_grf(GrfSampler& sampler, RngStream& rng) {
  return sampler.sample(rng);
}

}  // namespace smcs::models
