#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <filesystem>

#include "smcs/harness/config.hpp"
#include "smcs/harness/experiment.hpp"
#include "smcs/io/csv.hpp"

using Catch::Matchers::WithinAbs;
using namespace smcs;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
  const fs::path p = fs::temp_directory_path() / ("smcs_test_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("format_double round-trips arbitrary doubles") {
  RngStream rng(1);
  std::vector<double> values{0.0, -0.0, 1e-300, -1e300, 0.1, 1.0 / 3.0, 12345.678901234567};
  for (int i = 0; i < 100; ++i) values.push_back(std::exp(40.0 * rng.normal()) * rng.normal());
  for (double v : values) {
    const std::string s = io::format_double(v);
    const double back = std::strtod(s.c_str(), nullptr);
    CHECK(back == v);
  }
}

TEST_CASE("CSV write/read round trip is lossless") {
  const fs::path dir = temp_dir("csv");
  RngStream rng(2);
  std::vector<std::vector<double>> rows;
  for (int r = 0; r < 50; ++r) {
    std::vector<double> row;
    for (int c = 0; c < 4; ++c) row.push_back(std::exp(20.0 * rng.normal()) * rng.normal());
    rows.push_back(row);
  }
  {
    io::CsvWriter w(dir / "t.csv");
    w.header({"a", "b", "c", "d"});
    for (const auto& row : rows) w.row(row);
    w.close();
  }
  const auto table = io::read_csv(dir / "t.csv");
  REQUIRE(table.header == std::vector<std::string>{"a", "b", "c", "d"});
  REQUIRE(table.rows.size() == rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < 4; ++c) CHECK(table.rows[r][c] == rows[r][c]);
  fs::remove_all(dir);
}

TEST_CASE("config JSON round trip preserves every field") {
  harness::ExperimentConfig c;
  c.model = "ns";
  c.ns.grid = {32, 32};
  c.ns.nu = 0.013;
  c.ns_windows = 7;
  c.particles = 123;
  c.proposal = "enkf";
  c.bridges = 77;
  c.weight_floor = 1e-5;
  c.truth_seed = 111;
  c.filter_seed = 222;
  c.smoother_seed = 333;
  c.support_dump_windows = {2, 5};
  const auto j = c.to_json();
  const auto back = harness::ExperimentConfig::from_json(j);
  CHECK(back.to_json() == j);
}

TEST_CASE("config load/save and validation errors") {
  const fs::path dir = temp_dir("cfg");
  harness::ExperimentConfig c;
  c.save(dir / "c.json");
  const auto back = harness::ExperimentConfig::load(dir / "c.json");
  CHECK(back.to_json() == c.to_json());

  CHECK_THROWS_AS(harness::ExperimentConfig::load(dir / "missing.json"), ConfigError);
  {
    std::ofstream bad(dir / "bad.json");
    bad << "{ not json";
  }
  CHECK_THROWS_AS(harness::ExperimentConfig::load(dir / "bad.json"), ConfigError);

  harness::ExperimentConfig invalid;
  invalid.model = "weird";
  CHECK_THROWS_AS(invalid.validate(), ConfigError);
  invalid = {};
  invalid.particles = 1;
  CHECK_THROWS_AS(invalid.validate(), ConfigError);
  fs::remove_all(dir);
}

TEST_CASE("master seed derives three distinct streams") {
  harness::ExperimentConfig c;
  c.apply_master_seed(42);
  CHECK(c.truth_seed != c.filter_seed);
  CHECK(c.filter_seed != c.smoother_seed);
  harness::ExperimentConfig d;
  d.apply_master_seed(42);
  CHECK(c.truth_seed == d.truth_seed);
}

TEST_CASE("discontinuity metric on a constant trace") {
  std::vector<long> steps;
  std::vector<double> values;
  for (long g = 0; g <= 40; ++g) {
    steps.push_back(g);
    values.push_back(2.5);
  }
  const auto m = harness::discontinuity_metric(steps, values, {10, 20, 30, 40});
  REQUIRE(m.jumps.size() == 4);
  for (double j : m.jumps) CHECK(j == 0.0);
  CHECK(m.median_jump == 0.0);
}

TEST_CASE("discontinuity metric sees a unit step of size two") {
  std::vector<long> steps;
  std::vector<double> values;
  for (long g = 0; g <= 20; ++g) {
    steps.push_back(g);
    values.push_back(g >= 10 ? 3.0 : 1.0);
  }
  const auto m = harness::discontinuity_metric(steps, values, {5, 10, 15});
  REQUIRE(m.jumps.size() == 3);
  CHECK(m.jumps[0] == 0.0);
  CHECK(m.jumps[1] == 2.0);
  CHECK(m.jumps[2] == 0.0);
  CHECK(m.median_jump == 0.0);
}

TEST_CASE("median helper") {
  CHECK(harness::median({3.0, 1.0, 2.0}) == 2.0);
  CHECK(harness::median({4.0, 1.0, 2.0, 3.0}) == 2.5);
  CHECK(std::isnan(harness::median({})));
}
