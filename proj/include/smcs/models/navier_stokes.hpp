#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>

#include "smcs/models/grf.hpp"
#include "smcs/models/spectral.hpp"
#include "smcs/sde.hpp"

namespace smcs::models {

struct VorticityGrid {
  int nx = 32;
  int ny = 32;

  void validate() const {
    if (nx < 4 || ny < 4 || (nx & (nx - 1)) != 0 || (ny & (ny - 1)) != 0)
      throw ConfigError("VorticityGrid: sides must be powers of two >= 4");
  }
  int size() const { return nx * ny; }
};

struct NsDiagnostics {
  double max_cfl = 0.0;
  long cfl_warnings = 0;  // steps with CFL above 1
  long drift_evals = 0;
};

/// Pseudo-spectral evaluation of the vorticity dynamics on a periodic grid:
/// drift = -(w . grad) xi + nu * laplacian(xi), with the velocity recovered
/// from the streamfunction Poisson solve and the advection product
/// dealiased by the 2/3 rule. Owns FFT scratch: one instance per thread.
class VorticityDynamics {
 public:
  VorticityDynamics(VorticityGrid grid, double nu, double dt_for_cfl)
      : grid_(grid), nu_(nu), dt_(dt_for_cfl), fft_(grid.nx, grid.ny),
        diagnostics_(std::make_shared<NsDiagnostics>()) {
    grid.validate();
    if (!(nu > 0.0)) throw ConfigError("VorticityDynamics: nu must be > 0");
    const int nx = grid.nx, ny = grid.ny;
    const int nc = fft_.n_cplx();
    kx_.resize(nc);
    ky_.resize(nc);
    k2_.resize(nc);
    dealias_.resize(nc);
    deriv_mask_.resize(nc);
    for (int i = 0; i < nx; ++i) {
      for (int jc = 0; jc <= ny / 2; ++jc) {
        const int p = i * (ny / 2 + 1) + jc;
        kx_[p] = fft_.kx(i);
        ky_[p] = fft_.ky(jc);
        k2_[p] = kx_[p] * kx_[p] + ky_[p] * ky_[p];
        const bool keep = std::abs(fft_.mode_x(i)) <= nx / 3 && jc <= ny / 3;
        dealias_[p] = keep ? 1.0 : 0.0;
        // first derivatives of the Nyquist modes are not representable on the
        // grid (their samples vanish identically); the streamfunction solve
        // and the first-derivative operators live on the space without them
        deriv_mask_[p] = (i == nx / 2 || jc == ny / 2) ? 0.0 : 1.0;
      }
    }
    hat_.resize(nc);
    hat2_.resize(nc);
    scratch_a_.resize(fft_.n_real());
    scratch_b_.resize(fft_.n_real());
    scratch_c_.resize(fft_.n_real());
    scratch_d_.resize(fft_.n_real());
  }

  const VorticityGrid& grid() const { return grid_; }
  double nu() const { return nu_; }
  std::shared_ptr<NsDiagnostics> diagnostics() const { return diagnostics_; }

  /// Streamfunction velocity w = (d psi/dy, -d psi/dx) with laplacian(psi) =
  /// -xi; the zero mode is projected out (solvability), so w is exactly
  /// divergence-free and curl(w) = xi - mean(xi) to spectral precision.
  void velocity(const Eigen::VectorXd& xi, Eigen::VectorXd& wx, Eigen::VectorXd& wy) {
    const int nc = fft_.n_cplx();
    fft_.forward(xi.data(), hat_.data());
    for (int p = 0; p < nc; ++p) {
      const std::complex<double> psi =
          k2_[p] > 0.0 ? deriv_mask_[p] * hat_[p] / k2_[p] : 0.0;
      hat2_[p] = std::complex<double>(0.0, ky_[p]) * psi;   // d psi / dy
      hat_[p] = std::complex<double>(0.0, -kx_[p]) * psi;   // -d psi / dx
    }
    wx.resize(fft_.n_real());
    wy.resize(fft_.n_real());
    fft_.inverse(hat2_.data(), wx.data());
    fft_.inverse(hat_.data(), wy.data());
  }

  Eigen::VectorXd curl(const Eigen::VectorXd& wx, const Eigen::VectorXd& wy) {
    const int nc = fft_.n_cplx();
    std::vector<std::complex<double>> acc(nc);
    fft_.forward(wy.data(), hat_.data());
    for (int p = 0; p < nc; ++p)
      acc[p] = std::complex<double>(0.0, deriv_mask_[p] * kx_[p]) * hat_[p];
    fft_.forward(wx.data(), hat_.data());
    for (int p = 0; p < nc; ++p)
      acc[p] -= std::complex<double>(0.0, deriv_mask_[p] * ky_[p]) * hat_[p];
    Eigen::VectorXd out(fft_.n_real());
    fft_.inverse(acc.data(), out.data());
    return out;
  }

  Eigen::VectorXd divergence(const Eigen::VectorXd& wx, const Eigen::VectorXd& wy) {
    const int nc = fft_.n_cplx();
    std::vector<std::complex<double>> acc(nc);
    fft_.forward(wx.data(), hat_.data());
    for (int p = 0; p < nc; ++p)
      acc[p] = std::complex<double>(0.0, deriv_mask_[p] * kx_[p]) * hat_[p];
    fft_.forward(wy.data(), hat_.data());
    for (int p = 0; p < nc; ++p)
      acc[p] += std::complex<double>(0.0, deriv_mask_[p] * ky_[p]) * hat_[p];
    Eigen::VectorXd out(fft_.n_real());
    fft_.inverse(acc.data(), out.data());
    return out;
  }

  /// Projection onto the representable space of the first-derivative
  /// operators (mean kept, Nyquist rows/columns removed).
  Eigen::VectorXd representable(const Eigen::VectorXd& field) {
    fft_.forward(field.data(), hat_.data());
    for (int p = 0; p < fft_.n_cplx(); ++p) hat_[p] *= deriv_mask_[p];
    Eigen::VectorXd out(fft_.n_real());
    fft_.inverse(hat_.data(), out.data());
    return out;
  }

  Eigen::VectorXd drift(const Eigen::VectorXd& xi) {
    if (!xi.allFinite()) throw SimulationDiverged("ns_drift: non-finite vorticity field");
    const int nc = fft_.n_cplx();
    const int n = fft_.n_real();

    fft_.forward(xi.data(), hat_.data());  // hat_ = xi_hat (kept for diffusion)

    // velocity and vorticity gradient from the truncated spectrum
    for (int p = 0; p < nc; ++p) hat2_[p] = dealias_[p] * hat_[p];
    std::vector<std::complex<double>>& t = hat2_;
    std::vector<std::complex<double>> tmp(nc);
    for (int p = 0; p < nc; ++p) {
      const std::complex<double> psi = k2_[p] > 0.0 ? t[p] / k2_[p] : 0.0;
      tmp[p] = std::complex<double>(0.0, ky_[p]) * psi;  // wx
    }
    fft_.inverse(tmp.data(), scratch_a_.data());
    for (int p = 0; p < nc; ++p) {
      const std::complex<double> psi = k2_[p] > 0.0 ? t[p] / k2_[p] : 0.0;
      tmp[p] = std::complex<double>(0.0, -kx_[p]) * psi;  // wy
    }
    fft_.inverse(tmp.data(), scratch_b_.data());
    for (int p = 0; p < nc; ++p) tmp[p] = std::complex<double>(0.0, kx_[p]) * t[p];
    fft_.inverse(tmp.data(), scratch_c_.data());  // d xi / dx
    for (int p = 0; p < nc; ++p) tmp[p] = std::complex<double>(0.0, ky_[p]) * t[p];
    fft_.inverse(tmp.data(), scratch_d_.data());  // d xi / dy

    double max_speed = 0.0;
    for (int p = 0; p < n; ++p) {
      max_speed = std::max({max_speed, std::abs(scratch_a_[p]), std::abs(scratch_b_[p])});
      scratch_c_[p] = scratch_a_[p] * scratch_c_[p] + scratch_b_[p] * scratch_d_[p];
    }
    const double cfl = max_speed * dt_;  // unit spacing
    diagnostics_->max_cfl = std::max(diagnostics_->max_cfl, cfl);
    if (cfl > 1.0) ++diagnostics_->cfl_warnings;
    ++diagnostics_->drift_evals;

    fft_.forward(scratch_c_.data(), tmp.data());
    for (int p = 0; p < nc; ++p)
      tmp[p] = -dealias_[p] * tmp[p] - nu_ * k2_[p] * hat_[p];
    Eigen::VectorXd out(n);
    fft_.inverse(tmp.data(), out.data());
    return out;
  }

 private:
  VorticityGrid grid_;
  double nu_;
  double dt_;
  SpectralGrid2D fft_;
  std::shared_ptr<NsDiagnostics> diagnostics_;
  std::vector<double> kx_, ky_, k2_, dealias_, deriv_mask_;
  std::vector<std::complex<double>> hat_, hat2_;
  std::vector<double> scratch_a_, scratch_b_, scratch_c_, scratch_d_;
};

struct NsParams {
  VorticityGrid grid;
  // explicit Euler with spectral advection is stable only while
  // |w|^2 dt <~ 2 nu; the default keeps the stochastically forced flow well
  // inside that margin at dt = 0.1 with the default noise level
  double nu = 0.5;
  double dt = 0.1;
  int obs_stride = 100;
  GrfSpec noise{0.01, 13.0};
  double obs_var = 0.01;

  void validate() const {
    grid.validate();
    noise.validate();
    if (!(nu > 0.0) || !(dt > 0.0) || obs_stride < 1 || !(obs_var > 0.0))
      throw ConfigError("NsParams: nu, dt, obs_var must be positive, obs_stride >= 1");
  }
};

/// Stochastic vorticity model bundle: the state-space model plus handles to
/// the dynamics engine (velocity reconstruction, CFL diagnostics) and the
/// field-noise sampler. Vorticity is observed directly with i.i.d. noise.
struct NsModel {
  StateSpaceModel<Eigen::VectorXd> model;
  std::shared_ptr<VorticityDynamics> dynamics;
  std::shared_ptr<GrfSampler> noise;

  std::shared_ptr<NsDiagnostics> diagnostics() const { return dynamics->diagnostics(); }
};

inline NsModel make_ns_model(const NsParams& p) {
  p.validate();
  NsModel ns;
  ns.dynamics = std::make_shared<VorticityDynamics>(p.grid, p.nu, p.dt);
  ns.noise = std::make_shared<GrfSampler>(p.grid.nx, p.grid.ny, p.noise);

  ns.model.dt = p.dt;
  ns.model.obs_interval = p.obs_stride;
  ns.model.dynamics.dim = p.grid.size();
  ns.model.dynamics.drift = [dyn = ns.dynamics](const Eigen::VectorXd& xi) {
    return dyn->drift(xi);
  };
  ns.model.dynamics.noise_factor = [g = ns.noise](const Eigen::VectorXd& z) {
    return g->apply_factor(z);
  };
  // the precision operator is injected by the smoothing pipeline (empirical,
  // low-rank); unconditional simulation never needs it

  ns.model.observation = make_gaussian_observation<Eigen::VectorXd>(
      p.grid.size(), [](const Eigen::VectorXd& x) { return x; },
      Eigen::VectorXd::Constant(p.grid.size(), p.obs_var));
  return ns;
}

}  // namespace smcs::models
