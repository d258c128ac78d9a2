#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "smcs/models/linear_gaussian.hpp"
#include "smcs/models/sine.hpp"
#include "smcs/sde.hpp"
#include "test_support.hpp"

using Catch::Matchers::WithinAbs;
using namespace smcs;

namespace {

DiffusionSpec<double> scalar_spec(std::function<double(const double&)> drift, double sigma) {
  DiffusionSpec<double> d;
  d.dim = 1;
  d.drift = std::move(drift);
  d.noise_factor = [sigma](const double& z) { return sigma * z; };
  return d;
}

}  // namespace

TEST_CASE("euler step: zero drift, identity noise factor, zero increment") {
  DiffusionSpec<Eigen::VectorXd> spec;
  spec.dim = 2;
  spec.drift = [](const Eigen::VectorXd& x) { return Eigen::VectorXd::Zero(x.size()).eval(); };
  spec.noise_factor = [](const Eigen::VectorXd& z) { return z; };
  Eigen::VectorXd x(2);
  x << 1.0, 2.0;
  const Eigen::VectorXd next = euler_step(spec, x, 0.1, Eigen::VectorXd::Zero(2).eval());
  CHECK(next[0] == 1.0);
  CHECK(next[1] == 2.0);
}

TEST_CASE("euler step: deterministic linear decay") {
  auto spec = scalar_spec([](const double& x) { return -x; }, 0.0);
  CHECK(euler_step(spec, 1.0, 0.5, 0.0) == 0.5);
}

TEST_CASE("euler step: sine drift matches scalar arithmetic") {
  const auto model = models::make_sine_model();
  RngStream rng(2024);
  const double x = 0.8, dt = 0.005;
  const double dw = std::sqrt(dt) * rng.normal();
  RngStream replay(2024);
  Eigen::VectorXd unused(1);
  const double expected = x + std::sin(x) * dt + std::sqrt(0.5) * dw;
  CHECK_THAT(euler_step(model.dynamics, x, dt, dw), WithinAbs(expected, 1e-15));
}

TEST_CASE("sine drift values") {
  CHECK(models::sine_drift(0.0) == 0.0);
  CHECK_THAT(models::sine_drift(std::numbers::pi / 2), WithinAbs(1.0, 1e-15));
}

TEST_CASE("euler step raises on non-finite drift output") {
  auto spec = scalar_spec(
      [](const double&) { return std::numeric_limits<double>::infinity(); }, 1.0);
  CHECK_THROWS_AS(euler_step(spec, 0.0, 0.01, 0.0), SimulationDiverged);
}

TEST_CASE("simulate: zero dynamics give a constant trajectory") {
  auto spec = scalar_spec([](const double&) { return 0.0; }, 0.0);
  RngStream rng(1);
  const auto traj = simulate(spec, 3.25, TimeGrid{0.0, 0.1, 50}, rng);
  REQUIRE(traj.states.size() == 51);
  for (double s : traj.states) CHECK(s == 3.25);
}

TEST_CASE("simulate: divergence reports the offending time") {
  auto spec = scalar_spec([](const double& x) { return x * 1e160; }, 0.0);
  RngStream rng(1);
  try {
    simulate(spec, 1.0, TimeGrid{0.0, 1.0, 10}, rng);
    FAIL("expected divergence");
  } catch (const SimulationDiverged& e) {
    CHECK(e.time > 0.0);
    CHECK(e.time <= 10.0);
  }
}

TEST_CASE("simulate: ensemble mean of OU matches the analytic decay") {
  const double theta = 1.0, sigma = 0.5, x0 = 1.0;
  auto spec = models::make_ou_diffusion(theta, sigma);
  const TimeGrid grid{0.0, 0.01, 100};
  RngStream rng(77);
  std::vector<double> finals;
  finals.reserve(10000);
  for (int i = 0; i < 10000; ++i) {
    RngStream stream = rng.fork(i);
    finals.push_back(simulate(spec, x0, grid, stream).back());
  }
  const double analytic = x0 * std::exp(-theta * 1.0);
  const double se = test_support::mean_se(finals);
  CHECK_THAT(test_support::sample_mean(finals), WithinAbs(analytic, 3.0 * se + 2e-3));
}

TEST_CASE("simulate: identical seeds give bitwise-identical trajectories") {
  const auto model = models::make_sine_model();
  const TimeGrid grid{0.0, 0.005, 2000};
  RngStream a(42), b(42);
  const auto t1 = simulate(model.dynamics, 0.0, grid, a);
  const auto t2 = simulate(model.dynamics, 0.0, grid, b);
  REQUIRE(t1.states.size() == t2.states.size());
  for (std::size_t k = 0; k < t1.states.size(); ++k) CHECK(t1.states[k] == t2.states[k]);
  for (int k = 0; k <= grid.n_steps; k += 500)
    CHECK(t1.grid.time(k) == static_cast<double>(k) * 0.005);
}

TEST_CASE("observe: identity operator with zero noise returns the state") {
  models::SineModelParams p;
  p.sigma_y2 = 0.0;
  const auto model = models::make_sine_model(p);
  RngStream rng(3);
  CHECK(observe(model, 1.7, rng) == 1.7);
}

TEST_CASE("observe: quadratic operator, zero noise") {
  StateSpaceModel<double> model;
  model.dt = 0.1;
  model.dynamics.dim = 1;
  model.observation = make_gaussian_observation<double>(
      1, [](const double& x) { return x * x; }, Eigen::VectorXd::Zero(1));
  RngStream rng(3);
  CHECK(observe(model, 2.0, rng) == 4.0);
}

TEST_CASE("observe: noise law matches N(0, 0.01) under a KS test") {
  const auto model = models::make_sine_model();  // sigma_y^2 = 0.01
  RngStream rng(911);
  std::vector<double> residuals;
  const double x = 0.37;
  for (int i = 0; i < 2000; ++i) residuals.push_back(observe(model, x, rng) - x);
  const double d = test_support::ks_statistic(
      residuals, [](double v) { return test_support::normal_cdf(v, 0.0, 0.1); });
  CHECK(d < 1.63 / std::sqrt(2000.0));  // alpha = 0.01 critical value
}

TEST_CASE("one-step linear-Gaussian ensemble matches the Kalman prediction") {
  const double a = -0.5, q = 0.09, dt = 0.05, x0 = 2.0;
  auto spec = scalar_spec([a](const double& x) { return a * x; }, std::sqrt(q));
  RngStream rng(31);
  std::vector<double> next;
  next.reserve(10000);
  const double sqrt_dt = std::sqrt(dt);
  for (int i = 0; i < 10000; ++i) next.push_back(euler_step(spec, x0, dt, sqrt_dt * rng.normal()));
  // discrete Kalman prediction: mean (1 + a dt) x0, variance q dt
  const double m = test_support::sample_mean(next);
  const double v = test_support::sample_var(next);
  CHECK_THAT(m, WithinAbs((1.0 + a * dt) * x0, 3.0 * test_support::mean_se(next)));
  CHECK_THAT(v, WithinAbs(q * dt, 3.0 * test_support::var_se(next)));
}
