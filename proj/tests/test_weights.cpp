#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <limits>

#include "smcs/weights.hpp"

using Catch::Matchers::WithinAbs;

TEST_CASE("ess of uniform weights is N") {
  std::vector<double> w(20, 1.0 / 20);
  CHECK_THAT(smcs::ess(w), WithinAbs(20.0, 1e-12));
}

TEST_CASE("ess of a degenerate weight vector is 1") {
  std::vector<double> w{1.0, 0.0, 0.0, 0.0};
  CHECK(smcs::ess(w) == 1.0);
}

TEST_CASE("ess of (0.5, 0.25, 0.25)") {
  // 1 / (0.25 + 0.0625 + 0.0625) = 1 / 0.375
  CHECK_THAT(smcs::ess({0.5, 0.25, 0.25}), WithinAbs(1.0 / 0.375, 1e-14));
}

TEST_CASE("log weights normalize to one in linear domain") {
  const std::vector<double> logs{-3.0, -1.0, -2.5, -1.7};
  const auto w = smcs::normalize_log_weights(logs);
  double sum = 0.0;
  for (double v : w) {
    CHECK(v >= 0.0);
    sum += v;
  }
  CHECK_THAT(sum, WithinAbs(1.0, 1e-12));
  // matches a direct softmax
  double z = 0.0;
  for (double l : logs) z += std::exp(l);
  for (std::size_t i = 0; i < logs.size(); ++i)
    CHECK_THAT(w[i], WithinAbs(std::exp(logs[i]) / z, 1e-14));
}

TEST_CASE("normalization survives extreme log magnitudes") {
  // raw exponentials would underflow to zero for every entry
  const auto w = smcs::normalize_log_weights({-10000.0, -10001.0});
  CHECK_THAT(w[0], WithinAbs(1.0 / (1.0 + std::exp(-1.0)), 1e-13));
  CHECK_THAT(w[0] + w[1], WithinAbs(1.0, 1e-15));
}

TEST_CASE("all-zero weights are rejected") {
  const double inf = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(smcs::normalize_log_weights({-inf, -inf, -inf}), smcs::DegenerateWeights);
  CHECK_THROWS_AS(smcs::normalize_log_weights({}), smcs::DegenerateWeights);
}

TEST_CASE("log_sum_exp") {
  CHECK_THAT(smcs::log_sum_exp({0.0, 0.0}), WithinAbs(std::log(2.0), 1e-14));
  CHECK_THAT(smcs::log_sum_exp({-1000.0, -1000.0}), WithinAbs(-1000.0 + std::log(2.0), 1e-12));
}
