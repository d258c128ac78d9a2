#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "smcs/models/grf.hpp"
#include "test_support.hpp"

using Catch::Matchers::WithinAbs;
using namespace smcs;
using models::GrfSampler;
using models::GrfSpec;

TEST_CASE("zero marginal scale gives the zero field") {
  GrfSampler sampler(16, 16, GrfSpec{0.0, 13.0});
  RngStream rng(1);
  const Eigen::VectorXd f = sampler.sample(rng);
  CHECK(f.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("clipped spectral mass is negligible on the default grid") {
  GrfSampler sampler(32, 32, GrfSpec{0.01, 13.0});
  CHECK(sampler.clipped_mass() < 1e-6);
  GrfSampler small(16, 16, GrfSpec{0.01, 13.0});
  CHECK(small.clipped_mass() < 1e-6);
}

TEST_CASE("pointwise variance matches eta") {
  GrfSampler sampler(32, 32, GrfSpec{0.01, 13.0});
  RngStream rng(7);
  const int draws = 10000;
  std::vector<double> at_point;
  at_point.reserve(draws);
  for (int i = 0; i < draws; ++i) at_point.push_back(sampler.sample(rng)[5 * 32 + 11]);
  const double v = test_support::sample_var(at_point);
  CHECK_THAT(v, WithinAbs(0.01, 3.0 * test_support::var_se(at_point)));
}

TEST_CASE("spatial correlation follows the squared-exponential kernel") {
  const double eta = 0.01, lambda = 13.0;
  GrfSampler sampler(32, 32, GrfSpec{eta, lambda});
  RngStream rng(8);
  const int draws = 10000;
  const int base = 3 * 32 + 4;
  std::vector<int> lags{1, 3, 6};
  std::vector<double> prod(lags.size(), 0.0), var0 = {};
  std::vector<double> base_vals, lag_vals[3];
  for (int i = 0; i < draws; ++i) {
    const Eigen::VectorXd f = sampler.sample(rng);
    base_vals.push_back(f[base]);
    for (std::size_t l = 0; l < lags.size(); ++l)
      lag_vals[l].push_back(f[base + lags[l]]);  // displacement along y
  }
  const double mb = test_support::sample_mean(base_vals);
  const double vb = test_support::sample_var(base_vals);
  for (std::size_t l = 0; l < lags.size(); ++l) {
    const double ml = test_support::sample_mean(lag_vals[l]);
    const double vl = test_support::sample_var(lag_vals[l]);
    double cov = 0.0;
    for (int i = 0; i < draws; ++i)
      cov += (base_vals[i] - mb) * (lag_vals[l][i] - ml);
    cov /= draws - 1;
    const double corr = cov / std::sqrt(vb * vl);
    const double expected = std::exp(-static_cast<double>(lags[l] * lags[l]) / lambda);
    INFO("lag " << lags[l]);
    CHECK_THAT(corr, WithinAbs(expected, 0.05));
  }
}

TEST_CASE("the field is stationary: covariance depends on displacement only") {
  GrfSampler sampler(32, 32, GrfSpec{0.01, 13.0});
  RngStream rng(9);
  const int draws = 8000;
  const int a1 = 2 * 32 + 3, b1 = 2 * 32 + 6;    // displacement (0, 3)
  const int a2 = 20 * 32 + 17, b2 = 20 * 32 + 20;  // same displacement elsewhere
  std::vector<double> xa1, xb1, xa2, xb2;
  for (int i = 0; i < draws; ++i) {
    const Eigen::VectorXd f = sampler.sample(rng);
    xa1.push_back(f[a1]);
    xb1.push_back(f[b1]);
    xa2.push_back(f[a2]);
    xb2.push_back(f[b2]);
  }
  auto corr = [&](const std::vector<double>& x, const std::vector<double>& y) {
    const double mx = test_support::sample_mean(x), my = test_support::sample_mean(y);
    double c = 0.0;
    for (int i = 0; i < draws; ++i) c += (x[i] - mx) * (y[i] - my);
    c /= draws - 1;
    return c / std::sqrt(test_support::sample_var(x) * test_support::sample_var(y));
  };
  CHECK_THAT(corr(xa1, xb1), WithinAbs(corr(xa2, xb2), 0.07));
}

TEST_CASE("apply_factor is linear and deterministic") {
  GrfSampler sampler(16, 16, GrfSpec{0.01, 13.0});
  RngStream rng(10);
  Eigen::VectorXd z(256);
  for (int i = 0; i < 256; ++i) z[i] = rng.normal();
  const Eigen::VectorXd a = sampler.apply_factor(z);
  const Eigen::VectorXd b = sampler.apply_factor(z);
  CHECK(a == b);
  const Eigen::VectorXd scaled = sampler.apply_factor((2.0 * z).eval());
  CHECK((scaled - 2.0 * a).cwiseAbs().maxCoeff() < 1e-12);
}
