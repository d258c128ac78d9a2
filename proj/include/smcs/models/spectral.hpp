#pragma once

#include <fftw3.h>

#include <complex>
#include <numbers>
#include <vector>

#include "smcs/errors.hpp"

namespace smcs::models {

/// FFTW r2c/c2r plan pair for a periodic nx-by-ny grid with unit spacing.
/// Real fields are row-major (index i*ny + j); spectra use the half layout
/// i in [0, nx), jc in [0, ny/2]. One instance serves one thread; the
/// buffers are private scratch.
class SpectralGrid2D {
 public:
  SpectralGrid2D(int nx, int ny) : nx_(nx), ny_(ny), n_real_(nx * ny), n_cplx_(nx * (ny / 2 + 1)) {
    if (nx < 4 || ny < 4 || (nx & (nx - 1)) != 0 || (ny & (ny - 1)) != 0)
      throw ConfigError("SpectralGrid2D: grid sides must be powers of two >= 4");
    real_ = fftw_alloc_real(n_real_);
    cplx_ = fftw_alloc_complex(n_cplx_);
    fwd_ = fftw_plan_dft_r2c_2d(nx_, ny_, real_, cplx_, FFTW_ESTIMATE);
    bwd_ = fftw_plan_dft_c2r_2d(nx_, ny_, cplx_, real_, FFTW_ESTIMATE);
  }

  SpectralGrid2D(const SpectralGrid2D&) = delete;
  SpectralGrid2D& operator=(const SpectralGrid2D&) = delete;

  ~SpectralGrid2D() {
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(bwd_);
    fftw_free(real_);
    fftw_free(cplx_);
  }

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  int n_real() const { return n_real_; }
  int n_cplx() const { return n_cplx_; }

  /// Signed integer frequency of row index i.
  int mode_x(int i) const { return i <= nx_ / 2 ? i : i - nx_; }
  int mode_y(int jc) const { return jc; }

  double kx(int i) const { return 2.0 * std::numbers::pi * mode_x(i) / nx_; }
  double ky(int jc) const { return 2.0 * std::numbers::pi * jc / ny_; }

  /// Unnormalized forward transform.
  void forward(const double* in, std::complex<double>* out) {
    for (int p = 0; p < n_real_; ++p) real_[p] = in[p];
    fftw_execute(fwd_);
    const auto* c = reinterpret_cast<const std::complex<double>*>(cplx_);
    for (int p = 0; p < n_cplx_; ++p) out[p] = c[p];
  }

  /// Inverse transform including the 1/(nx*ny) normalization, so
  /// inverse(forward(x)) == x.
  void inverse(const std::complex<double>* in, double* out) {
    auto* c = reinterpret_cast<std::complex<double>*>(cplx_);
    for (int p = 0; p < n_cplx_; ++p) c[p] = in[p];
    fftw_execute(bwd_);
    const double scale = 1.0 / n_real_;
    for (int p = 0; p < n_real_; ++p) out[p] = real_[p] * scale;
  }

 private:
  int nx_, ny_, n_real_, n_cplx_;
  double* real_;
  fftw_complex* cplx_;
  fftw_plan fwd_;
  fftw_plan bwd_;
};

}  // namespace smcs::models
