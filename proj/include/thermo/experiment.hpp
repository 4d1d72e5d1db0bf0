#ifndef THERMO_EXPERIMENT_HPP
#define THERMO_EXPERIMENT_HPP

// Batch commands behind the `thermo` tool. Each command writes its files to an
// output directory and returns an exit code:
//   0 ok, 1 config error, 2 numeric failure, 3 correspondence failure.

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <string>

#include "thermo/config.hpp"

namespace thermo {

enum ExitCode : int { kExitOk = 0, kExitConfig = 1, kExitNumeric = 2, kExitMismatch = 3 };

struct RunContext {
  std::filesystem::path out = ".";
  int workers = 1;
  std::ostream* log = &std::cerr;
};

namespace detail {

inline void write_json(const std::filesystem::path& p, const json& j) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  os << j.dump(2) << '\n';
}

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream os(p, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  return os;
}

/// Fields every report carries.
inline json report_header(const ExperimentConfig& cfg, std::string_view command, json tolerances) {
  return {{"command", command}, {"config_hash", hash_hex(cfg.hash)}, {"tolerances", std::move(tolerances)}};
}

inline std::vector<PhaseState> grid_states(const std::vector<Point>& positions, int headings) {
  std::vector<PhaseState> out;
  for (const auto& p : positions)
    for (int k = 0; k < headings; ++k) out.push_back({p, kTwoPi * k / headings});
  return out;
}

inline json state_json(const PhaseState& s) { return {{"x1", s.x.x1}, {"x2", s.x.x2}, {"theta", s.theta}}; }

}  // namespace detail

/// Trajectory CSVs for each initial state.
inline int cmd_simulate(const ExperimentConfig& cfg, const RunContext& ctx) {
  const auto& c = cfg.simulate;
  json rep = detail::report_header(cfg, "simulate", {{"tol", c.tol}});
  rep["duration"] = c.duration;
  rep["dt"] = c.dt;
  rep["trajectories"] = json::array();
  for (std::size_t i = 0; i < c.initial.size(); ++i) {
    const auto traj = evolve(cfg.system, c.initial[i], c.duration, c.tol);
    const std::string name = "trajectory_" + std::to_string(i) + ".csv";
    auto os = detail::open_out(ctx.out / name);
    traj.write_csv(os, c.dt);
    double unit = 0.0;
    for (double t : traj.sample_times()) unit = std::max(unit, traj.unit_speed_residual(t));
    json t;
    t["file"] = name;
    t["initial"] = detail::state_json(c.initial[i]);
    t["final"] = detail::state_json(traj.state(traj.t_max()));
    t["max_unit_speed_residual"] = unit;
    rep["trajectories"].push_back(t);
  }
  detail::write_json(ctx.out / "simulate.json", rep);
  return kExitOk;
}

/// First conjugate times over a grid (or random set) of initial conditions.
inline int cmd_conjugate_scan(const ExperimentConfig& cfg, const RunContext& ctx) {
  const auto& c = cfg.scan;
  std::vector<PhaseState> starts;
  if (c.random > 0) {
    std::mt19937_64 gen(cfg.verify.seed);
    std::uniform_real_distribution<double> u(0.0, kTwoPi);
    for (int i = 0; i < c.random; ++i) {
      const double a = u(gen), b = u(gen), t = u(gen);
      starts.push_back({{a, b}, t});
    }
  } else {
    starts = detail::grid_states(c.positions, c.headings);
  }
  std::vector<ConjugateReport> reports(starts.size());
  parallel_for(starts.size(), ctx.workers, [&](std::size_t i) {
    reports[i] = first_conjugate_time(cfg.system, starts[i], c.horizon, {c.tol, c.root_tol});
  });
  json rep = detail::report_header(cfg, "conjugate_scan", {{"tol", c.tol}, {"root_tol", c.root_tol}});
  rep["horizon"] = c.horizon;
  rep["records"] = json::array();
  int with = 0;
  for (std::size_t i = 0; i < starts.size(); ++i) {
    json r = to_json(reports[i]);
    r["initial"] = detail::state_json(starts[i]);
    rep["records"].push_back(r);
    if (reports[i].first_time) ++with;
  }
  rep["summary"] = {{"initial_conditions", starts.size()}, {"with_conjugate_points", with}};
  detail::write_json(ctx.out / "conjugate_scan.json", rep);
  return kExitOk;
}

/// Rigidity report and identity suite.
inline int cmd_verify(const ExperimentConfig& cfg, const RunContext& ctx) {
  const auto& c = cfg.verify;
  RigidityOptions ro;
  ro.n_x = c.n_x;
  ro.n_theta = c.n_theta;
  ro.workers = ctx.workers;
  ro.gauge = cfg.gauge.options;
  ro.gauge.verify_grid = c.verify_grid;
  const RigidityReport rig = rigidity_report(cfg.system, ro);

  IdentityOptions io;
  io.workers = ctx.workers;
  io.sampled_nodes = c.sampled_nodes;
  io.seed = c.seed;
  io.hopf.tol = c.hopf_tol;
  const IdentityReport ids = identity_suite(cfg.system, PhaseQuadrature(cfg.system, c.n_x, c.n_theta), io);

  json rep = detail::report_header(cfg, "verify",
                                   {{"hopf_tol", c.hopf_tol},
                                    {"f_norm", rig.thresholds.f_norm},
                                    {"flatness", rig.thresholds.flatness},
                                    {"divergence", rig.thresholds.divergence}});
  rep["seed"] = c.seed;
  rep["rigidity"] = to_json(rig);
  rep["identities"] = to_json(ids);
  detail::write_json(ctx.out / "verify.json", rep);
  if (c.dump_nodes) {
    auto os = detail::open_out(ctx.out / "nodes.csv");
    ids.write_nodes_csv(os);
  }
  return kExitOk;
}

/// Hopf profile CSV and its convergence sidecar.
inline int cmd_hopf(const ExperimentConfig& cfg, const RunContext& ctx) {
  const auto& c = cfg.hopf;
  const auto& o = c.options;
  json rep = detail::report_header(cfg, "hopf", {{"tol", o.tol}, {"integ_tol", o.integ_tol}});
  rep["initial"] = detail::state_json(c.initial);
  rep["b0"] = o.b0;
  rep["b_max"] = o.b_max;
  try {
    RiccatiProfile p = hopf_profile(cfg.system, c.initial, o, c.a);
    if (c.bounds) p.attach_bounds(comparison_bounds(cfg.system));
    auto os = detail::open_out(ctx.out / "profile.csv");
    p.write_csv(os);
    rep["converged"] = true;
    rep.update(history_json(p));
    detail::write_json(ctx.out / "profile_history.json", rep);
    return kExitOk;
  } catch (const HopfNonConvergence& e) {
    rep["converged"] = false;
    rep["error"] = e.what();
    rep["history"] = to_json(e.history());
    detail::write_json(ctx.out / "profile_history.json", rep);
    *ctx.log << "hopf: " << e.what() << '\n';
    return kExitNumeric;
  }
}

/// Gauge normalization with field dumps and the optional conjugacy check.
inline int cmd_gauge(const ExperimentConfig& cfg, const RunContext& ctx) {
  const GaugeTransform g = solve_gauge(cfg.system, cfg.gauge.options);
  const auto& cc = cfg.gauge.correspondence;
  json rep = detail::report_header(cfg, "gauge",
                                   {{"tail_target", cfg.gauge.options.tail_target},
                                    {"match_tol", cc.match_tol},
                                    {"tol", cc.tol}});
  rep.update(to_json(g));
  {
    auto os = detail::open_out(ctx.out / "U.toml");
    write_field(os, "U", g.U());
  }
  {
    auto os = detail::open_out(ctx.out / "transformed.toml");
    write_system(os, g.transformed());
  }
  int failed = 0;
  if (cc.headings > 0) {
    const auto starts = detail::grid_states(cc.positions, cc.headings);
    std::vector<CorrespondenceRecord> recs(starts.size());
    CorrespondenceOptions co;
    co.match_tol = cc.match_tol;
    co.conjugate = {cc.tol, 1e-12};
    co.trajectory_tol = cc.tol;
    parallel_for(starts.size(), ctx.workers,
                 [&](std::size_t i) { recs[i] = conjugacy_correspondence(g, starts[i], cc.horizon, co); });
    rep["correspondence"] = json::array();
    for (std::size_t i = 0; i < starts.size(); ++i) {
      json r = to_json(recs[i]);
      r["initial"] = detail::state_json(starts[i]);
      rep["correspondence"].push_back(r);
      if (!recs[i].passed) ++failed;
    }
    rep["correspondence_failures"] = failed;
  }
  detail::write_json(ctx.out / "gauge.json", rep);
  return failed > 0 ? kExitMismatch : kExitOk;
}

inline const std::map<std::string, std::function<int(const ExperimentConfig&, const RunContext&)>>& commands() {
  static const std::map<std::string, std::function<int(const ExperimentConfig&, const RunContext&)>> m{
      {"simulate", cmd_simulate}, {"conjugate-scan", cmd_conjugate_scan}, {"verify", cmd_verify},
      {"hopf", cmd_hopf},         {"gauge", cmd_gauge}};
  return m;
}

/// Runs a command and maps failures to exit codes.
inline int run_command(const std::string& name, const ExperimentConfig& cfg, const RunContext& ctx) {
  const auto it = commands().find(name);
  if (it == commands().end()) {
    *ctx.log << "unknown command: " << name << '\n';
    return kExitConfig;
  }
  try {
    std::filesystem::create_directories(ctx.out);
    return it->second(cfg, ctx);
  } catch (const ConfigError& e) {
    *ctx.log << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    *ctx.log << "invalid parameters: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    *ctx.log << "numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  }
}

}  // namespace thermo

#endif  // THERMO_EXPERIMENT_HPP
