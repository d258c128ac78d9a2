#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <map>

#include "smcs/filter.hpp"
#include "smcs/models/linear_gaussian.hpp"
#include "smcs/models/sine.hpp"
#include "test_support.hpp"

using Catch::Matchers::WithinAbs;
using namespace smcs;

namespace {

WeightedEnsemble<double> point_ensemble(const std::vector<double>& xs, RngStream& rng) {
  WeightedEnsemble<double> ens;
  const int n = static_cast<int>(xs.size());
  for (int i = 0; i < n; ++i) {
    ens.particles.push_back(Trajectory<double>{TimeGrid{}, {xs[i]}});
    ens.streams.push_back(rng.fork(1000 + i));
  }
  ens.log_weights.assign(n, 0.0);
  ens.norm_weights.assign(n, 1.0 / n);
  return ens;
}

StateSpaceModel<double> lg_model() {
  // scalar OU-style linear-Gaussian: a=-1, q=1, H=1, R=0.1
  return models::make_scalar_linear_gaussian(-1.0, 1.0, 1.0, 0.1, 0.01, 10);
}

models::LinearGaussianSpec lg_oracle_spec(double m0, double p0) {
  models::LinearGaussianSpec s;
  s.a = Eigen::MatrixXd::Constant(1, 1, -1.0);
  s.h = Eigen::MatrixXd::Constant(1, 1, 1.0);
  s.q = Eigen::MatrixXd::Constant(1, 1, 1.0);
  s.r_diag = Eigen::VectorXd::Constant(1, 0.1);
  s.dt = 0.01;
  s.stride = 10;
  s.m0 = Eigen::VectorXd::Constant(1, m0);
  s.p0 = Eigen::MatrixXd::Constant(1, 1, p0);
  return s;
}

}  // namespace

TEST_CASE("predict leaves frozen dynamics and weights untouched") {
  DiffusionSpec<double> dyn;
  dyn.dim = 1;
  dyn.drift = [](const double&) { return 0.0; };
  dyn.noise_factor = [](const double&) { return 0.0; };
  RngStream rng(1);
  auto ens = point_ensemble({0.5, -1.0, 2.0}, rng);
  ens.norm_weights = {0.2, 0.5, 0.3};
  const auto weights_before = ens.norm_weights;
  predict(ens, dyn, TimeGrid{0.0, 0.1, 5}, rng);
  CHECK(ens.endpoint(0) == 0.5);
  CHECK(ens.endpoint(1) == -1.0);
  CHECK(ens.endpoint(2) == 2.0);
  CHECK(ens.norm_weights == weights_before);
  CHECK(ens.time == 0.5);
}

TEST_CASE("predicted ensemble mean matches the Kalman prediction") {
  const auto model = lg_model();
  RngStream rng(23);
  std::vector<double> starts(10000, 2.0);
  auto ens = point_ensemble(starts, rng);
  predict(ens, model.dynamics, TimeGrid{0.0, 0.01, 10}, rng);
  std::vector<double> finals;
  for (int i = 0; i < ens.size(); ++i) finals.push_back(ens.endpoint(i));
  const double expected = 2.0 * std::pow(1.0 - 0.01, 10);  // F^s x0
  CHECK_THAT(test_support::sample_mean(finals),
             WithinAbs(expected, 3.0 * test_support::mean_se(finals)));
}

TEST_CASE("flat likelihood leaves weights unchanged") {
  auto model = models::make_scalar_linear_gaussian(0.0, 1.0, 1.0, 1e12, 0.01, 10);
  RngStream rng(2);
  auto ens = point_ensemble({0.0, 5.0, -3.0, 1.0}, rng);
  ens.norm_weights = {0.1, 0.4, 0.3, 0.2};
  ens.log_weights = {std::log(0.1), std::log(0.4), std::log(0.3), std::log(0.2)};
  correct_bootstrap(ens, model.observation, 0.7);
  CHECK_THAT(ens.norm_weights[0], WithinAbs(0.1, 1e-6));
  CHECK_THAT(ens.norm_weights[1], WithinAbs(0.4, 1e-6));
  CHECK_THAT(ens.norm_weights[3], WithinAbs(0.2, 1e-6));
}

TEST_CASE("two-particle bootstrap correction by hand") {
  auto model = models::make_scalar_linear_gaussian(0.0, 1.0, 1.0, 1.0, 0.01, 10);
  RngStream rng(2);
  auto ens = point_ensemble({0.0, 10.0}, rng);
  correct_bootstrap(ens, model.observation, 0.0);
  // weight ratio exp(0) : exp(-50)
  const double w1 = std::exp(-50.0) / (1.0 + std::exp(-50.0));
  CHECK_THAT(ens.norm_weights[0], WithinAbs(1.0 - w1, 1e-15));
  CHECK_THAT(ens.norm_weights[1], WithinAbs(w1, 1e-25));
  CHECK_THAT(ens.norm_weights[0] + ens.norm_weights[1], WithinAbs(1.0, 1e-12));
}

TEST_CASE("bootstrap posterior matches Kalman after one correction") {
  const auto model = lg_model();
  const double m0 = 1.0, p0 = 0.25;
  RngStream init_rng(5);
  std::vector<double> starts;
  for (int i = 0; i < 10000; ++i) starts.push_back(m0 + std::sqrt(p0) * init_rng.normal());
  auto ens = point_ensemble(starts, init_rng);
  RngStream rng(6);
  predict(ens, model.dynamics, TimeGrid{0.0, 0.01, 10}, rng);
  const double y = 0.4;
  correct_bootstrap(ens, model.observation, y);

  Eigen::VectorXd obs(1);
  obs << y;
  const auto kf = models::kalman_rts_oracle(lg_oracle_spec(m0, p0), {obs});
  std::vector<double> finals;
  for (int i = 0; i < ens.size(); ++i) finals.push_back(ens.endpoint(i));
  const auto ws = test_support::weighted_stats(finals, ens.norm_weights);
  CHECK_THAT(ws.mean, WithinAbs(kf.mean_filtered[10][0], 3.0 * ws.se_mean));
}

TEST_CASE("all-vanishing likelihoods raise FilterDegenerate") {
  auto model = models::make_scalar_linear_gaussian(0.0, 1.0, 1.0, 1e-6, 0.01, 10);
  RngStream rng(2);
  auto ens = point_ensemble({1e9, -1e9}, rng);
  CHECK_THROWS_AS(correct_bootstrap(ens, model.observation, 0.0, 3), FilterDegenerate);
}

TEST_CASE("enkf gain reduces to P/(P+R) in the scalar case") {
  RngStream rng(9);
  const int n = 500;
  Eigen::MatrixXd states(1, n);
  for (int i = 0; i < n; ++i) states(0, i) = 2.0 * rng.normal() + 1.0;
  const Eigen::MatrixXd anomalies = states.colwise() - states.rowwise().mean();
  const double p = anomalies.squaredNorm() / (n - 1);
  const double r = 0.7;
  const auto [gain, regularized] =
      enkf_gain(anomalies, anomalies, Eigen::VectorXd::Constant(1, r), 1e-8);
  CHECK_FALSE(regularized);
  CHECK_THAT(gain(0, 0), WithinAbs(p / (p + r), 1e-12));
}

TEST_CASE("enkf regularizes a singular innovation covariance") {
  Eigen::MatrixXd anomalies = Eigen::MatrixXd::Zero(1, 4);  // collapsed ensemble
  const auto [gain, regularized] =
      enkf_gain(anomalies, anomalies, Eigen::VectorXd::Zero(1), 1e-8);
  CHECK(regularized);
  CHECK(gain(0, 0) == 0.0);
}

TEST_CASE("enkf leaves a perfectly fitting ensemble in place") {
  auto model = models::make_scalar_linear_gaussian(0.0, 1.0, 1.0, 1e-12, 0.01, 10);
  RngStream rng(12);
  // spread in state space but identical under H would need H=0; instead give
  // the ensemble spread and observe the shift toward y with R -> 0
  auto ens = point_ensemble({0.7, 0.7 + 1e-9, 0.7 - 1e-9}, rng);
  correct_enkf(ens, model.observation, 0.7);
  for (int i = 0; i < 3; ++i) CHECK_THAT(ens.endpoint(i), WithinAbs(0.7, 1e-6));
}

TEST_CASE("enkf posterior matches Kalman on a scalar model") {
  const auto model = lg_model();
  const double m0 = 1.0, p0 = 0.25;
  RngStream init_rng(15);
  std::vector<double> starts;
  for (int i = 0; i < 10000; ++i) starts.push_back(m0 + std::sqrt(p0) * init_rng.normal());
  auto ens = point_ensemble(starts, init_rng);
  RngStream rng(16);
  predict(ens, model.dynamics, TimeGrid{0.0, 0.01, 10}, rng);
  const double y = 0.4;
  correct_enkf(ens, model.observation, y);

  Eigen::VectorXd obs(1);
  obs << y;
  const auto kf = models::kalman_rts_oracle(lg_oracle_spec(m0, p0), {obs});
  std::vector<double> finals;
  for (int i = 0; i < ens.size(); ++i) finals.push_back(ens.endpoint(i));
  // post-EnKF particle positions are equally weighted draws from the posterior
  const double m = test_support::sample_mean(finals);
  const double v = test_support::sample_var(finals);
  CHECK_THAT(m, WithinAbs(kf.mean_filtered[10][0], 3.0 * test_support::mean_se(finals)));
  CHECK_THAT(v, WithinAbs(kf.cov_filtered[10](0, 0), 3.0 * test_support::var_se(finals)));
}

TEST_CASE("systematic ancestors: degenerate weights clone the heavy particle") {
  std::vector<double> w(8, 0.0);
  w[0] = 1.0;
  for (double u : {0.0, 0.31, 0.99}) {
    const auto anc = systematic_ancestors(w, u);
    for (int a : anc) CHECK(a == 0);
  }
}

TEST_CASE("systematic ancestors: uniform weights stay within one copy, exhaustively") {
  for (int n = 1; n <= 8; ++n) {
    std::vector<double> w(n, 1.0 / n);
    for (int ui = 0; ui < 100; ++ui) {
      const double u = ui / 100.0;
      const auto anc = systematic_ancestors(w, u);
      std::vector<int> count(n, 0);
      for (int a : anc) ++count[a];
      int total = 0;
      for (int c : count) {
        CHECK(std::abs(c - 1) <= 1);
        total += c;
      }
      CHECK(total == n);
    }
  }
}

TEST_CASE("systematic resampling is unbiased") {
  const std::vector<double> w{0.4, 0.3, 0.15, 0.1, 0.05};
  const int n = static_cast<int>(w.size());
  RngStream rng(77);
  std::vector<double> mean_count(n, 0.0);
  const int reps = 10000;
  for (int r = 0; r < reps; ++r) {
    const auto anc = systematic_ancestors(w, rng.uniform());
    for (int a : anc) mean_count[a] += 1.0 / reps;
  }
  for (int i = 0; i < n; ++i) {
    // per-rep count varies by at most 1 around N w_i, so se <= 1/sqrt(reps)
    CHECK_THAT(mean_count[i], WithinAbs(n * w[i], 3.0 / std::sqrt(static_cast<double>(reps))));
  }
}

TEST_CASE("resample_systematic resets weights and copies trajectories") {
  RngStream rng(3);
  auto ens = point_ensemble({1.0, 2.0, 3.0, 4.0}, rng);
  ens.norm_weights = {1.0, 0.0, 0.0, 0.0};
  RngStream rrng(4);
  const auto anc = resample_systematic(ens, rrng);
  for (int a : anc) CHECK(a == 0);
  for (int i = 0; i < 4; ++i) {
    CHECK(ens.endpoint(i) == 1.0);
    CHECK(ens.norm_weights[i] == 0.25);
  }
}

TEST_CASE("run_filter with no observations is pure prediction") {
  const auto model = models::make_sine_model();
  FilterConfig cfg;
  cfg.n_particles = 16;
  auto init = [](RngStream& r, int) { return 0.1 * r.normal(); };
  const auto history =
      run_filter<double, double>(model, cfg, {}, init, RngStream(100), /*trailing_steps=*/40);
  CHECK(history.mean_trace.size() == 41);
  REQUIRE(history.windows.size() == 1);
  for (double w : history.windows[0].end_weights) CHECK(w == 1.0 / 16);
  CHECK_FALSE(history.windows[0].corrected);
}

TEST_CASE("run_filter tracks the sine diffusion at observation times") {
  const auto model = models::make_sine_model();
  // truth and observations
  RngStream truth_rng(40);
  const int n_obs = 100;
  const TimeGrid grid{0.0, model.dt, n_obs * model.obs_interval};
  const auto truth = simulate(model.dynamics, 0.0, grid, truth_rng);
  RngStream obs_rng(41);
  std::vector<double> obs;
  for (int k = 1; k <= n_obs; ++k)
    obs.push_back(observe(model, truth.states[k * model.obs_interval], obs_rng));

  FilterConfig cfg;
  cfg.n_particles = 10000;
  auto init = [y0 = obs[0]](RngStream& r, int) { return y0 + 0.5 * r.normal(); };
  const auto history = run_filter<double, double>(model, cfg, obs, init, RngStream(42));

  double sq = 0.0;
  int drops = 0;
  for (int k = 1; k <= n_obs; ++k) {
    const long g = static_cast<long>(k) * model.obs_interval;
    const double post = history.mean_trace[g];
    const double pre = history.pre_obs_means[k - 1];
    const double t = truth.states[g];
    sq += (post - t) * (post - t);
    if (std::abs(pre - t) > std::abs(post - t)) ++drops;
    // ESS bounds hold everywhere
    CHECK(history.ess_after_correction[k - 1] >= 1.0 - 1e-9);
    CHECK(history.ess_after_correction[k - 1] <= cfg.n_particles + 1e-6);
  }
  const double rmse = std::sqrt(sq / n_obs);
  CHECK(rmse < 3.0 * 0.1);          // below the observation-noise scale
  CHECK(drops >= 0.6 * n_obs);      // corrections pull the mean toward the truth
}

TEST_CASE("bootstrap filter matches Kalman marginals on the linear model") {
  const auto model = lg_model();
  const double m0 = 1.0, p0 = 0.25;
  const auto spec = lg_oracle_spec(m0, p0);

  RngStream truth_rng(50);
  const int n_obs = 10;
  const auto truth =
      simulate(model.dynamics, 1.0, TimeGrid{0.0, 0.01, n_obs * 10}, truth_rng);
  RngStream obs_rng(51);
  std::vector<double> obs;
  std::vector<Eigen::VectorXd> obs_vec;
  for (int k = 1; k <= n_obs; ++k) {
    obs.push_back(observe(model, truth.states[k * 10], obs_rng));
    obs_vec.push_back(Eigen::VectorXd::Constant(1, obs.back()));
  }
  const auto kf = models::kalman_rts_oracle(spec, obs_vec);

  FilterConfig cfg;
  cfg.n_particles = 10000;
  auto init = [m0, p0](RngStream& r, int) { return m0 + std::sqrt(p0) * r.normal(); };
  const auto history = run_filter<double, double>(model, cfg, obs, init, RngStream(52));

  for (int k = 1; k <= n_obs; ++k) {
    const auto& win = history.windows[k - 1];
    const auto ws = test_support::weighted_stats(win.end_states, win.end_weights);
    INFO("observation " << k);
    CHECK_THAT(ws.mean, WithinAbs(kf.mean_filtered[k * 10][0], 3.0 * ws.se_mean + 1e-9));
  }
}

TEST_CASE("weights stay normalized and lineage stays consistent through resampling") {
  const auto model = models::make_sine_model();
  RngStream truth_rng(60);
  const int n_obs = 12;
  const auto truth =
      simulate(model.dynamics, 0.0, TimeGrid{0.0, model.dt, n_obs * model.obs_interval},
               truth_rng);
  RngStream obs_rng(61);
  std::vector<double> obs;
  for (int k = 1; k <= n_obs; ++k)
    obs.push_back(observe(model, truth.states[k * model.obs_interval], obs_rng));

  FilterConfig cfg;
  cfg.n_particles = 50;
  cfg.resample_threshold = 1.0;  // force resampling at every observation
  auto init = [y0 = obs[0]](RngStream& r, int) { return y0 + 0.5 * r.normal(); };
  const auto history = run_filter<double, double>(model, cfg, obs, init, RngStream(62));

  for (std::size_t k = 0; k < history.windows.size(); ++k) {
    const auto& win = history.windows[k];
    double sum = 0.0;
    for (double w : win.end_weights) sum += w;
    CHECK_THAT(sum, WithinAbs(1.0, 1e-12));
    CHECK(win.resampled_after);
    if (k + 1 < history.windows.size()) {
      const auto& next = history.windows[k + 1];
      for (int i = 0; i < cfg.n_particles; ++i)
        CHECK(next.start_states[i] == win.end_states[win.ancestors[i]]);
    }
    // the window cloud is the particles' own paths: start and end rows agree
    CHECK(win.cloud.front() == win.start_states);
    CHECK(win.cloud.back() == win.end_states);
  }
}
