#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "smcs/harness/experiment.hpp"
#include "smcs/io/csv.hpp"

namespace smcs::harness {

namespace fs = std::filesystem;

class WallTimer {
 public:
  WallTimer() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

/// Wall-clock timing lives in its own file: every other artifact of a run is
/// bitwise-reproducible from (config, seeds), timing necessarily is not.
inline void write_timing(const fs::path& dir, double seconds) {
  std::ofstream out(dir / "timing.json");
  out << nlohmann::json{{"wall_seconds", seconds}}.dump(2) << '\n';
}

template <class State>
void write_truth_csv(const fs::path& path, const std::vector<State>& truth, double dt,
                     int stride) {
  io::CsvWriter w(path);
  const int dim = StateOps<State>::dim(truth[0]);
  std::vector<std::string> cols{"t"};
  for (int d = 0; d < dim; ++d) cols.push_back("x_" + std::to_string(d));
  w.header(cols);
  std::vector<double> row(1 + dim);
  for (std::size_t g = 0; g < truth.size(); g += stride) {
    row[0] = static_cast<double>(g) * dt;
    const Eigen::VectorXd v = StateOps<State>::to_vector(truth[g]);
    for (int d = 0; d < dim; ++d) row[1 + d] = v[d];
    w.row(row);
  }
  w.close();
}

template <class State>
void write_observations_csv(const fs::path& path, const std::vector<State>& obs, double dt,
                            int obs_interval) {
  io::CsvWriter w(path);
  const int dim = StateOps<State>::dim(obs[0]);
  std::vector<std::string> cols{"k", "t"};
  for (int d = 0; d < dim; ++d) cols.push_back("y_" + std::to_string(d));
  w.header(cols);
  std::vector<double> row(2 + dim);
  for (std::size_t k = 0; k < obs.size(); ++k) {
    row[0] = static_cast<double>(k + 1);
    row[1] = static_cast<double>((k + 1) * static_cast<std::size_t>(obs_interval)) * dt;
    const Eigen::VectorXd v = StateOps<State>::to_vector(obs[k]);
    for (int d = 0; d < dim; ++d) row[2 + d] = v[d];
    w.row(row);
  }
  w.close();
}

template <class State>
std::vector<State> read_observations_csv(const fs::path& path, int dim) {
  io::CsvTable t = io::read_csv(path);
  std::vector<State> obs;
  for (const auto& row : t.rows) {
    if (static_cast<int>(row.size()) != 2 + dim)
      throw Error("observations.csv: expected " + std::to_string(2 + dim) + " columns");
    if constexpr (StateOps<State>::is_scalar) {
      obs.push_back(row[2]);
    } else {
      Eigen::VectorXd v(dim);
      for (int d = 0; d < dim; ++d) v[d] = row[2 + d];
      obs.push_back(std::move(v));
    }
  }
  return obs;
}

inline std::string step_tag(long step) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%06ld", step);
  return buf;
}

inline void write_field(const fs::path& dir, long step, double t, const std::string& quantity,
                        const Eigen::VectorXd& field, int nx, int ny) {
  fs::create_directories(dir);
  {
    io::CsvWriter w(dir / ("field_" + step_tag(step) + ".csv"));
    for (Eigen::Index p = 0; p < field.size(); ++p) w.row({field[p]});
    w.close();
  }
  std::ofstream side(dir / ("field_" + step_tag(step) + ".json"));
  side << nlohmann::json{{"t", t}, {"nx", nx}, {"ny", ny}, {"quantity", quantity}}.dump(2)
       << '\n';
}

template <class State>
void write_support_jsonl(const fs::path& path, const SmoothingEstimate<State>& est) {
  if (!est.has_support) throw Error("write_support_jsonl: estimate carries no support");
  const long mid_step = est.start_step + est.grid.n_steps / 2;
  std::ofstream out(path);
  if (!out) throw Error("write_support_jsonl: cannot open " + path.string());
  for (int idx = 0; idx < est.n_slices(); ++idx) {
    if (est.steps[idx] != mid_step) continue;
    const double t = static_cast<double>(est.steps[idx]) * est.grid.dt;
    for (const auto& [state, weight] : est.support[idx]) {
      const Eigen::VectorXd v = StateOps<State>::to_vector(state);
      nlohmann::json line;
      line["t"] = t;
      line["state"] = std::vector<double>(v.data(), v.data() + v.size());
      line["weight"] = weight;
      out << line.dump() << '\n';
    }
    break;
  }
}

inline nlohmann::json metrics_to_json(const MethodMetrics& m) {
  nlohmann::json j;
  j["mse"] = {{"steps", m.mse_steps}, {"values", m.mse}};
  j["rmse_hidden"] = m.rmse_hidden;
  j["rmse_obs"] = m.rmse_obs;
  j["jumps"] = m.jumps;
  j["median_jump"] = m.median_jump;
  j["coverage_fraction"] = m.coverage_fraction;
  j["windows_failed"] = m.windows_failed;
  return j;
}

inline nlohmann::json report_json(const std::string& method, const ExperimentConfig& c,
                                  const TwinMetrics& tm, const MethodMetrics& main_metrics) {
  nlohmann::json j;
  j["method"] = method;
  j["model"] = c.model;
  j["particles"] = c.particles;
  j["bridges"] = c.bridges;
  j["proposal"] = c.proposal;
  j["n_steps"] = tm.n_steps;
  j["n_observations"] = tm.n_observations;
  j["dt"] = c.dt();
  j["metrics"] = metrics_to_json(main_metrics);
  j["filter_metrics"] = metrics_to_json(tm.filter);
  j["ess_after"] = tm.ess_after;
  j["mse_pre_obs"] = tm.mse_pre_obs;
  j["mse_post_obs"] = tm.mse_post_obs;
  j["enkf"] = tm.enkf_used;
  j["warnings"] = tm.warnings;
  if (!std::isnan(tm.max_cfl)) j["max_cfl"] = tm.max_cfl;
  return j;
}

inline void check_config_echo(const ExperimentConfig& c, const fs::path& out) {
  const fs::path echo = out / "config.json";
  if (!fs::exists(echo))
    throw ConfigError("run directory has no config.json; run `simulate` first: " + out.string());
  const ExperimentConfig recorded = ExperimentConfig::load(echo);
  if (recorded.to_json() != c.to_json())
    throw ConfigError("config mismatch with recorded run config in " + out.string());
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

inline void cmd_simulate(const ExperimentConfig& c, const fs::path& out) {
  c.validate();
  WallTimer timer;
  fs::create_directories(out);
  c.save(out / "config.json");

  if (c.is_sine()) {
    SineData d = make_sine_data(c);
    write_truth_csv(out / "truth.csv", d.truth, c.sine.dt, c.truth_stride);
    write_observations_csv(out / "observations.csv", d.observations, c.sine.dt, c.sine.obs_stride);
  } else {
    NsData d = make_ns_data(c);
    write_truth_csv(out / "truth.csv", d.truth, c.ns.dt, c.truth_stride);
    write_observations_csv(out / "observations.csv", d.observations, c.ns.dt, c.ns.obs_stride);
    for (std::size_t g = 0; g < d.truth.size(); g += c.field_stride)
      write_field(out / "truth_fields", static_cast<long>(g), g * c.ns.dt, "vorticity",
                  d.truth[g], c.ns.grid.nx, c.ns.grid.ny);
  }
  write_timing(out, timer.seconds());
}

// ---------------------------------------------------------------------------
// filter
// ---------------------------------------------------------------------------

namespace detail {

template <class State>
void run_filter_command(const ExperimentConfig& c, const fs::path& out,
                        const StateSpaceModel<State>& model, const std::vector<State>& truth,
                        const std::function<State(RngStream&, int)>& init_sampler,
                        std::shared_ptr<models::NsDiagnostics> ns_diag) {
  const fs::path dir = out / "filter";
  fs::create_directories(dir);
  WallTimer timer;

  const std::vector<State> observations =
      read_observations_csv<State>(out / "observations.csv", c.state_dim());

  const int dim = c.state_dim();
  const int mean_cols = std::min(dim, c.diag_mean_cols);
  io::CsvWriter diag(dir / "diagnostics.csv");
  {
    std::vector<std::string> cols{"t", "ess"};
    for (int d = 0; d < mean_cols; ++d) cols.push_back("mean_" + std::to_string(d));
    diag.header(cols);
  }

  const long snapshot_scalars = static_cast<long>(c.particles) * (2 * dim + 1) *
                                static_cast<long>(observations.size());
  const bool write_snapshots = snapshot_scalars <= c.snapshot_limit;
  std::optional<io::CsvWriter> snaps;
  if (write_snapshots) {
    snaps.emplace(dir / "snapshots.csv");
    std::vector<std::string> cols{"window", "i", "weight"};
    for (int d = 0; d < dim; ++d) cols.push_back("x_start_" + std::to_string(d));
    for (int d = 0; d < dim; ++d) cols.push_back("x_end_" + std::to_string(d));
    snaps->header(cols);
  }

  TwinHooks<State> hooks;
  hooks.on_window = [&](const WindowRecord<State>& rec) {
    // diagnostics rows for the window interior plus its (possibly corrected)
    // end; the very first window also contributes the t=0 row
    const int n = static_cast<int>(rec.end_weights.size());
    for (int j = rec.window_index == 0 ? 0 : 1; j <= rec.grid.n_steps; ++j) {
      const double t = rec.grid.time(j);
      const bool at_end = j == rec.grid.n_steps;
      State m = StateOps<State>::zero(dim);
      if (at_end) {
        for (int i = 0; i < n; ++i)
          StateOps<State>::add_weighted(m, rec.end_weights[i], rec.end_states[i]);
      } else if (!rec.cloud.empty() && j % rec.cloud_stride == 0) {
        for (int i = 0; i < n; ++i)
          StateOps<State>::add_weighted(m, rec.start_weights[i], rec.cloud[j / rec.cloud_stride][i]);
      } else {
        continue;
      }
      std::vector<double> row{t, at_end ? rec.ess_after_correction
                                        : ess(rec.start_weights)};
      const Eigen::VectorXd v = StateOps<State>::to_vector(m);
      for (int d = 0; d < mean_cols; ++d) row.push_back(v[d]);
      diag.row(row);
    }
    if (snaps) {
      std::vector<double> row(3 + 2 * dim);
      for (int i = 0; i < n; ++i) {
        row[0] = rec.window_index;
        row[1] = i;
        row[2] = rec.end_weights[i];
        const Eigen::VectorXd xs = StateOps<State>::to_vector(rec.start_states[i]);
        const Eigen::VectorXd xe = StateOps<State>::to_vector(rec.end_states[i]);
        for (int d = 0; d < dim; ++d) row[3 + d] = xs[d];
        for (int d = 0; d < dim; ++d) row[3 + dim + d] = xe[d];
        snaps->row(row);
      }
    }
    if constexpr (!StateOps<State>::is_scalar) {
      // mean vorticity field at the observation time
      State m = StateOps<State>::zero(dim);
      for (int i = 0; i < n; ++i)
        StateOps<State>::add_weighted(m, rec.end_weights[i], rec.end_states[i]);
      write_field(dir / "fields", rec.end_step(), rec.grid.t_end(), "filter_mean_vorticity",
                  StateOps<State>::to_vector(m), c.ns.grid.nx, c.ns.grid.ny);
    }
  };

  TwinSpec<State> spec;
  spec.model = &model;
  spec.truth = &truth;
  spec.observations = &observations;
  spec.init_sampler = init_sampler;
  spec.filter_seed = c.filter_seed;
  spec.smoother_seed = c.smoother_seed;
  spec.filter_cfg = c.filter_config();
  spec.filter_cfg.store_clouds = true;  // diagnostics use the cloud slices

  TwinMetrics tm = run_twin(spec, &hooks);
  if (ns_diag) tm.max_cfl = ns_diag->max_cfl;
  if (!write_snapshots)
    tm.warnings.push_back("snapshots.csv skipped: " + std::to_string(snapshot_scalars) +
                          " scalars exceed snapshot_limit");

  diag.close();
  if (snaps) snaps->close();
  std::ofstream rep(dir / "report.json");
  rep << report_json("filter", c, tm, tm.filter).dump(2) << '\n';
  write_timing(dir, timer.seconds());
}

}  // namespace detail

inline void cmd_filter(const ExperimentConfig& c, const fs::path& out) {
  c.validate();
  check_config_echo(c, out);
  if (!fs::exists(out / "observations.csv"))
    throw ConfigError("observations.csv missing; run `simulate` first: " + out.string());
  if (c.is_sine()) {
    SineData d = make_sine_data(c);
    detail::run_filter_command<double>(c, out, d.model, d.truth, sine_init_sampler(c, d), nullptr);
  } else {
    NsData d = make_ns_data(c);
    detail::run_filter_command<Eigen::VectorXd>(c, out, d.ns.model, d.truth,
                                                ns_init_sampler(c, d), d.ns.diagnostics());
  }
}

// ---------------------------------------------------------------------------
// smooth
// ---------------------------------------------------------------------------

namespace detail {

template <class State>
void run_smooth_command(const ExperimentConfig& c, const fs::path& out, SmoothingMethod method,
                        const StateSpaceModel<State>& model, const std::vector<State>& truth,
                        const std::function<State(RngStream&, int)>& init_sampler,
                        const DiffusionSpec<State>* bridge_dynamics) {
  const bool standard = method == SmoothingMethod::standard;
  const fs::path dir = out / (standard ? "smooth_standard" : "smooth_conditional");
  fs::create_directories(dir);
  WallTimer timer;

  const std::vector<State> observations =
      read_observations_csv<State>(out / "observations.csv", c.state_dim());

  const int dim = c.state_dim();
  const int mean_cols = std::min(dim, c.diag_mean_cols);
  io::CsvWriter means(dir / "window_means.csv");
  {
    std::vector<std::string> cols{"t"};
    for (int d = 0; d < mean_cols; ++d) cols.push_back("mean_" + std::to_string(d));
    for (int d = 0; d < mean_cols; ++d) cols.push_back("sd_" + std::to_string(d));
    means.header(cols);
  }

  auto want_support = [&c](int window) {
    return std::find(c.support_dump_windows.begin(), c.support_dump_windows.end(), window) !=
           c.support_dump_windows.end();
  };

  auto on_estimate = [&](const SmoothingEstimate<State>& est) {
    std::vector<double> row(1 + 2 * mean_cols);
    for (int idx = 0; idx < est.n_slices(); ++idx) {
      row[0] = static_cast<double>(est.steps[idx]) * est.grid.dt;
      const Eigen::VectorXd m = StateOps<State>::to_vector(est.mean[idx]);
      const Eigen::VectorXd s = StateOps<State>::to_vector(est.sd[idx]);
      for (int d = 0; d < mean_cols; ++d) row[1 + d] = m[d];
      for (int d = 0; d < mean_cols; ++d) row[1 + mean_cols + d] = s[d];
      means.row(row);
      if constexpr (!StateOps<State>::is_scalar) {
        if (est.steps[idx] % c.field_stride == 0)
          write_field(dir / "fields", est.steps[idx], row[0], "smoothed_mean_vorticity",
                      StateOps<State>::to_vector(est.mean[idx]), c.ns.grid.nx, c.ns.grid.ny);
      }
    }
    if (est.has_support) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "window_%05d.jsonl", est.window_index);
      fs::create_directories(dir / "support");
      write_support_jsonl(dir / "support" / buf, est);
    }
  };

  TwinHooks<State> hooks;
  if (standard) {
    hooks.standard_support_wanted = want_support;
    hooks.on_standard = on_estimate;
  } else {
    hooks.conditional_support_wanted = want_support;
    hooks.on_conditional = on_estimate;
  }

  TwinSpec<State> spec;
  spec.model = &model;
  spec.bridge_dynamics = bridge_dynamics;
  spec.truth = &truth;
  spec.observations = &observations;
  spec.init_sampler = init_sampler;
  spec.filter_seed = c.filter_seed;
  spec.smoother_seed = c.smoother_seed;
  spec.filter_cfg = c.filter_config();
  spec.smoother_cfg = c.smoother_config();
  spec.run_standard = standard;
  spec.run_conditional = !standard;

  TwinMetrics tm = run_twin(spec, &hooks);
  means.close();

  const MethodMetrics& mm = standard ? tm.standard : tm.conditional;
  nlohmann::json rep = report_json(standard ? "standard" : "conditional", c, tm, mm);
  if (standard && tm.enkf_used)
    rep["caveat"] =
        "standard smoother over EnKF-proposal trajectories: stored paths between "
        "observations are not model trajectories";
  std::ofstream repf(dir / "report.json");
  repf << rep.dump(2) << '\n';
  write_timing(dir, timer.seconds());
}

}  // namespace detail

inline void cmd_smooth(const ExperimentConfig& c, const fs::path& out, const std::string& method) {
  c.validate();
  if (method != "standard" && method != "conditional")
    throw ConfigError("smooth: method must be standard|conditional");
  check_config_echo(c, out);
  if (!fs::exists(out / "filter" / "report.json"))
    throw ConfigError("filter outputs missing; run `filter` first: " + out.string());
  const SmoothingMethod m =
      method == "standard" ? SmoothingMethod::standard : SmoothingMethod::conditional;
  if (c.is_sine()) {
    SineData d = make_sine_data(c);
    detail::run_smooth_command<double>(c, out, m, d.model, d.truth, sine_init_sampler(c, d),
                                       nullptr);
  } else {
    NsData d = make_ns_data(c);
    DiffusionSpec<Eigen::VectorXd> bridge_dyn = ns_bridge_dynamics(c, d);
    detail::run_smooth_command<Eigen::VectorXd>(c, out, m, d.ns.model, d.truth,
                                                ns_init_sampler(c, d), &bridge_dyn);
  }
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

inline nlohmann::json cmd_report(const std::vector<fs::path>& runs, const fs::path& out_file) {
  nlohmann::json summary;
  summary["runs"] = nlohmann::json::array();
  summary["missing"] = nlohmann::json::array();

  std::vector<std::vector<std::string>> csv_rows;
  for (const fs::path& run : runs) {
    if (!fs::exists(run / "config.json")) {
      summary["missing"].push_back(run.string());
      continue;
    }
    bool found_any = false;
    for (const char* sub : {"filter", "smooth_standard", "smooth_conditional"}) {
      const fs::path rep = run / sub / "report.json";
      if (!fs::exists(rep)) continue;
      std::ifstream in(rep);
      nlohmann::json j;
      try {
        in >> j;
      } catch (const nlohmann::json::exception&) {
        summary["missing"].push_back(rep.string());
        continue;
      }
      found_any = true;
      nlohmann::json row;
      row["run"] = run.string();
      row["method"] = j.value("method", sub);
      row["particles"] = j.value("particles", 0);
      row["bridges"] = j.value("bridges", 0);
      const auto& m = j["metrics"];
      row["rmse_hidden"] = m.value("rmse_hidden", std::numeric_limits<double>::quiet_NaN());
      row["rmse_obs"] = m.value("rmse_obs", std::numeric_limits<double>::quiet_NaN());
      row["median_jump"] = m.value("median_jump", std::numeric_limits<double>::quiet_NaN());
      row["coverage_fraction"] =
          m.value("coverage_fraction", std::numeric_limits<double>::quiet_NaN());
      summary["runs"].push_back(row);
      csv_rows.push_back({run.string(), row["method"].get<std::string>(),
                          std::to_string(row["particles"].get<int>()),
                          std::to_string(row["bridges"].get<int>()),
                          io::format_double(row["rmse_hidden"].get<double>()),
                          io::format_double(row["median_jump"].get<double>())});
    }
    if (!found_any) summary["missing"].push_back(run.string() + " (no reports)");
  }

  if (!out_file.empty()) {
    if (out_file.has_parent_path()) fs::create_directories(out_file.parent_path());
    std::ofstream out(out_file);
    out << summary.dump(2) << '\n';
    fs::path csv_path = out_file;
    csv_path.replace_extension(".csv");
    std::ofstream csv(csv_path);
    csv << "run,method,particles,bridges,rmse_hidden,median_jump\n";
    for (const auto& row : csv_rows) {
      for (std::size_t i = 0; i < row.size(); ++i) csv << (i ? "," : "") << row[i];
      csv << '\n';
    }
  }
  return summary;
}

}  // namespace smcs::harness
