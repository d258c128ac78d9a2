#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "smcs/errors.hpp"
#include "smcs/filter.hpp"
#include "smcs/models/navier_stokes.hpp"
#include "smcs/models/sine.hpp"
#include "smcs/random.hpp"
#include "smcs/smoother.hpp"

namespace smcs::harness {

/// Fully resolved experiment description. A run directory always carries the
/// exact JSON echo of this structure; together with the three seed streams
/// it reproduces the run bit for bit.
struct ExperimentConfig {
  std::string model = "sine";  // "sine" | "ns"

  // sine experiment
  models::SineModelParams sine;
  double sine_horizon = 250.0;
  double sine_x0 = 0.0;

  // ns experiment
  models::NsParams ns;
  int ns_windows = 10;
  double ns_init_amplitude = 0.3;  // initial vorticity sd, near the forced equilibrium

  // filter
  int particles = 20;
  std::string proposal = "bootstrap";  // "bootstrap" | "enkf"
  double resample_threshold = 0.5;
  double init_spread = 0.5;
  int cloud_stride = 1;

  // smoother
  int bridges = 50;
  double weight_floor = 1e-6;
  int max_active_pairs = 0;
  std::vector<int> support_dump_windows;

  // seeds
  std::uint64_t truth_seed = 1;
  std::uint64_t filter_seed = 2;
  std::uint64_t smoother_seed = 3;

  // output
  int truth_stride = 20;
  int field_stride = 100;
  int diag_mean_cols = 4;
  long snapshot_limit = 3000000;

  bool is_sine() const { return model == "sine"; }

  int obs_interval() const { return is_sine() ? sine.obs_stride : ns.obs_stride; }
  double dt() const { return is_sine() ? sine.dt : ns.dt; }
  int state_dim() const { return is_sine() ? 1 : ns.grid.size(); }

  int n_observations() const {
    if (is_sine()) {
      const double interval = sine.dt * sine.obs_stride;
      const long k = std::lround(sine_horizon / interval);
      return static_cast<int>(k);
    }
    return ns_windows + 1;
  }
  long n_steps() const { return static_cast<long>(n_observations()) * obs_interval(); }

  void validate() const {
    if (model != "sine" && model != "ns")
      throw ConfigError("config: model must be \"sine\" or \"ns\"");
    if (proposal != "bootstrap" && proposal != "enkf")
      throw ConfigError("config: proposal must be \"bootstrap\" or \"enkf\"");
    if (is_sine()) {
      sine.validate();
      if (!(sine_horizon > 0.0)) throw ConfigError("config: sine horizon must be > 0");
    } else {
      ns.validate();
      if (ns_windows < 1) throw ConfigError("config: ns windows must be >= 1");
    }
    if (n_observations() < 1) throw ConfigError("config: horizon shorter than one observation");
    if (truth_stride < 1 || field_stride < 1 || diag_mean_cols < 1)
      throw ConfigError("config: strides must be >= 1");
    filter_config().validate(obs_interval());
    smoother_config().validate();
  }

  FilterConfig filter_config() const {
    FilterConfig f;
    f.n_particles = particles;
    f.proposal = proposal == "enkf" ? Proposal::enkf : Proposal::bootstrap;
    f.resample_threshold = resample_threshold;
    f.cloud_stride = cloud_stride;
    return f;
  }

  SmootherConfig smoother_config() const {
    SmootherConfig s;
    s.bridges_per_pair = bridges;
    s.weight_floor = weight_floor;
    s.max_active_pairs = max_active_pairs;
    return s;
  }

  /// Derives the three independent seed streams from one master seed.
  void apply_master_seed(std::uint64_t seed) {
    truth_seed = mix64(seed, 1);
    filter_seed = mix64(seed, 2);
    smoother_seed = mix64(seed, 3);
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["model"] = model;
    j["sine"] = {{"sigma_x2", sine.sigma_x2}, {"sigma_y2", sine.sigma_y2},
                 {"dt", sine.dt},             {"obs_stride", sine.obs_stride},
                 {"horizon", sine_horizon},   {"x0", sine_x0}};
    j["ns"] = {{"grid", ns.grid.nx},
               {"nu", ns.nu},
               {"dt", ns.dt},
               {"obs_stride", ns.obs_stride},
               {"n_windows", ns_windows},
               {"eta", ns.noise.eta},
               {"lambda", ns.noise.lambda},
               {"obs_var", ns.obs_var},
               {"init_amplitude", ns_init_amplitude}};
    j["filter"] = {{"particles", particles},
                   {"proposal", proposal},
                   {"resample_threshold", resample_threshold},
                   {"init_spread", init_spread},
                   {"cloud_stride", cloud_stride}};
    j["smoother"] = {{"bridges", bridges},
                     {"weight_floor", weight_floor},
                     {"max_active_pairs", max_active_pairs},
                     {"support_dump_windows", support_dump_windows}};
    j["seeds"] = {{"truth", truth_seed}, {"filter", filter_seed}, {"smoother", smoother_seed}};
    j["output"] = {{"truth_stride", truth_stride},
                   {"field_stride", field_stride},
                   {"diag_mean_cols", diag_mean_cols},
                   {"snapshot_limit", snapshot_limit}};
    return j;
  }

  static ExperimentConfig from_json(const nlohmann::json& j) {
    ExperimentConfig c;
    try {
      c.model = j.value("model", c.model);
      if (j.contains("sine")) {
        const auto& s = j.at("sine");
        c.sine.sigma_x2 = s.value("sigma_x2", c.sine.sigma_x2);
        c.sine.sigma_y2 = s.value("sigma_y2", c.sine.sigma_y2);
        c.sine.dt = s.value("dt", c.sine.dt);
        c.sine.obs_stride = s.value("obs_stride", c.sine.obs_stride);
        c.sine_horizon = s.value("horizon", c.sine_horizon);
        c.sine_x0 = s.value("x0", c.sine_x0);
      }
      if (j.contains("ns")) {
        const auto& s = j.at("ns");
        const int g = s.value("grid", c.ns.grid.nx);
        c.ns.grid.nx = g;
        c.ns.grid.ny = g;
        c.ns.nu = s.value("nu", c.ns.nu);
        c.ns.dt = s.value("dt", c.ns.dt);
        c.ns.obs_stride = s.value("obs_stride", c.ns.obs_stride);
        c.ns_windows = s.value("n_windows", c.ns_windows);
        c.ns.noise.eta = s.value("eta", c.ns.noise.eta);
        c.ns.noise.lambda = s.value("lambda", c.ns.noise.lambda);
        c.ns.obs_var = s.value("obs_var", c.ns.obs_var);
        c.ns_init_amplitude = s.value("init_amplitude", c.ns_init_amplitude);
      }
      if (j.contains("filter")) {
        const auto& s = j.at("filter");
        c.particles = s.value("particles", c.particles);
        c.proposal = s.value("proposal", c.proposal);
        c.resample_threshold = s.value("resample_threshold", c.resample_threshold);
        c.init_spread = s.value("init_spread", c.init_spread);
        c.cloud_stride = s.value("cloud_stride", c.cloud_stride);
      }
      if (j.contains("smoother")) {
        const auto& s = j.at("smoother");
        c.bridges = s.value("bridges", c.bridges);
        c.weight_floor = s.value("weight_floor", c.weight_floor);
        c.max_active_pairs = s.value("max_active_pairs", c.max_active_pairs);
        c.support_dump_windows =
            s.value("support_dump_windows", c.support_dump_windows);
      }
      if (j.contains("seeds")) {
        const auto& s = j.at("seeds");
        c.truth_seed = s.value("truth", c.truth_seed);
        c.filter_seed = s.value("filter", c.filter_seed);
        c.smoother_seed = s.value("smoother", c.smoother_seed);
      }
      if (j.contains("output")) {
        const auto& s = j.at("output");
        c.truth_stride = s.value("truth_stride", c.truth_stride);
        c.field_stride = s.value("field_stride", c.field_stride);
        c.diag_mean_cols = s.value("diag_mean_cols", c.diag_mean_cols);
        c.snapshot_limit = s.value("snapshot_limit", c.snapshot_limit);
      }
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("config: ") + e.what());
    }
    c.validate();
    return c;
  }

  static ExperimentConfig load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path.string());
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("config: parse error in " + path.string() + ": " + e.what());
    }
    return from_json(j);
  }

  void save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw Error("config: cannot write " + path.string());
    out << to_json().dump(2) << '\n';
  }
};

}  // namespace smcs::harness
