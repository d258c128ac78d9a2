#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "smcs/errors.hpp"

namespace smcs::models {

/// Low-rank empirical precision of a field covariance, built from M centered
/// sample columns Z (n x M): the sample covariance is Z Z^T / M, and its
/// pseudo-inverse M * U (D D^T)^+ U^T follows from the thin SVD Z = U D V^T,
/// so only a diagonal is ever inverted. Vectors orthogonal to the retained
/// basis map to zero.
class EmpiricalPrecision {
 public:
  static EmpiricalPrecision build(const Eigen::MatrixXd& centered_samples,
                                  double rel_tol = 1e-8) {
    if (centered_samples.cols() < 2)
      throw ConfigError("EmpiricalPrecision: need at least 2 samples");
    Eigen::BDCSVD<Eigen::MatrixXd> svd(centered_samples, Eigen::ComputeThinU);
    const Eigen::VectorXd& d = svd.singularValues();
    const double d_max = d.size() > 0 ? d[0] : 0.0;
    if (!(d_max > 0.0))
      throw DegeneratePrecision("EmpiricalPrecision: all samples are zero");
    int rank = 0;
    while (rank < d.size() && d[rank] > rel_tol * d_max) ++rank;

    EmpiricalPrecision p;
    p.basis_ = svd.matrixU().leftCols(rank);
    p.inv_spectrum_.resize(rank);
    for (int i = 0; i < rank; ++i) p.inv_spectrum_[i] = 1.0 / (d[i] * d[i]);
    p.scale_ = static_cast<double>(centered_samples.cols());
    return p;
  }

  Eigen::VectorXd apply(const Eigen::VectorXd& v) const {
    return scale_ * (basis_ * inv_spectrum_.cwiseProduct(basis_.transpose() * v));
  }

  int rank() const { return static_cast<int>(inv_spectrum_.size()); }
  double scale() const { return scale_; }
  const Eigen::MatrixXd& basis() const { return basis_; }
  const Eigen::VectorXd& inv_spectrum() const { return inv_spectrum_; }

 private:
  Eigen::MatrixXd basis_;       // n x r, orthonormal columns
  Eigen::VectorXd inv_spectrum_;
  double scale_ = 0.0;          // sample count M
};

/// Column-centering helper for raw sample fields.
inline Eigen::MatrixXd center_columns(Eigen::MatrixXd samples) {
  const Eigen::VectorXd mean = samples.rowwise().mean();
  samples.colwise() -= mean;
  return samples;
}

}  // namespace smcs::models
