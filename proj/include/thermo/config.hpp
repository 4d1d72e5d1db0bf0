#ifndef THERMO_CONFIG_HPP
#define THERMO_CONFIG_HPP

// Experiment configuration (TOML). Layout:
//
//   [system]            bandwidth (<= 64) and the field term arrays phi, f, e1, e2
//   [simulate]          initial = [[x1, x2, theta], ...], duration, dt, tol
//   [conjugate_scan]    positions = [[x1, x2], ...], headings, random, horizon, tol, root_tol
//   [verify]            n_x, n_theta, sampled_nodes, seed, hopf_tol, dump_nodes, verify_grid
//   [hopf]              initial, a, b0, b_max, tol, window, dt, integ_tol, bounds
//   [gauge]             bandwidth_factor, tail_target, verify_grid
//   [gauge.correspondence]  positions, headings, horizon, match_tol, tol
//
// Every section but [system] is optional; missing keys take the defaults below.

#include <array>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "thermo/io.hpp"

namespace thermo {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kMaxConfigBandwidth = 64;

struct SimulateConfig {
  std::vector<PhaseState> initial{PhaseState{}};
  double duration = 10.0;
  double dt = 0.01;
  double tol = 1e-10;
};

struct ScanConfig {
  std::vector<Point> positions{Point{}};
  int headings = 16;
  int random = 0;  // if positive, this many random initial conditions instead of the grid
  double horizon = 200.0;
  double tol = 1e-10;
  double root_tol = 1e-10;
};

struct VerifyConfig {
  int n_x = 64;
  int n_theta = 64;
  int sampled_nodes = 256;
  std::uint64_t seed = 1;
  double hopf_tol = 1e-4;
  bool dump_nodes = false;
  int verify_grid = 64;
};

struct HopfConfig {
  PhaseState initial;
  double a = 0.0;
  HopfOptions options;
  bool bounds = true;
};

struct CorrespondenceConfig {
  std::vector<Point> positions{Point{}};
  int headings = 0;  // zero: no correspondence check
  double horizon = 20.0;
  double match_tol = 1e-6;
  double tol = 1e-12;
};

struct GaugeConfig {
  GaugeOptions options;
  CorrespondenceConfig correspondence;
};

struct ExperimentConfig {
  int bandwidth = 16;
  ThermostatSystem system;
  SimulateConfig simulate;
  ScanConfig scan;
  VerifyConfig verify;
  HopfConfig hopf;
  GaugeConfig gauge;
  std::uint64_t hash = 0;  // FNV-1a of the config text

  /// Applies --tol: the integration tolerance of every command.
  void override_tolerance(double tol) {
    if (!(tol > 0.0)) throw ConfigError("--tol must be positive");
    simulate.tol = tol;
    scan.tol = tol;
    hopf.options.integ_tol = tol;
    gauge.correspondence.tol = tol;
  }
  void override_seed(std::uint64_t seed) { verify.seed = seed; }
};

inline std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hash_hex(std::uint64_t h) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

namespace detail {

inline bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

class Section {
 public:
  Section(const toml::table* t, std::string name) : t_(t), name_(std::move(name)) {}

  void allow(std::initializer_list<std::string_view> keys) const {
    if (!t_) return;
    for (const auto& [k, _] : *t_) {
      bool ok = false;
      for (auto a : keys) ok = ok || k.str() == a;
      if (!ok) throw ConfigError("unknown key '" + std::string(k.str()) + "' in [" + name_ + "]");
    }
  }

  double number(std::string_view key, double def) const {
    if (!t_ || !t_->contains(key)) return def;
    const auto v = (*t_)[key].value<double>();
    if (!v || !std::isfinite(*v)) throw ConfigError(where(key) + " must be a finite number");
    return *v;
  }
  double positive(std::string_view key, double def) const {
    const double v = number(key, def);
    if (!(v > 0.0)) throw ConfigError(where(key) + " must be positive");
    return v;
  }
  int integer(std::string_view key, int def, int lo) const {
    if (!t_ || !t_->contains(key)) return def;
    const auto v = (*t_)[key].value<int64_t>();
    if (!v || !(*t_)[key].is_integer()) throw ConfigError(where(key) + " must be an integer");
    if (*v < lo || *v > 1'000'000'000) throw ConfigError(where(key) + " out of range");
    return static_cast<int>(*v);
  }
  int pow2(std::string_view key, int def) const {
    const int v = integer(key, def, 1);
    if (!is_pow2(v)) throw ConfigError(where(key) + " must be a power of two");
    return v;
  }
  bool boolean(std::string_view key, bool def) const {
    if (!t_ || !t_->contains(key)) return def;
    const auto v = (*t_)[key].value_exact<bool>();
    if (!v) throw ConfigError(where(key) + " must be true or false");
    return *v;
  }
  /// Array of fixed-length numeric arrays.
  template <std::size_t D>
  std::optional<std::vector<std::array<double, D>>> tuples(std::string_view key) const {
    if (!t_ || !t_->contains(key)) return std::nullopt;
    const auto* arr = (*t_)[key].as_array();
    if (!arr) throw ConfigError(where(key) + " must be an array");
    std::vector<std::array<double, D>> out;
    for (const auto& el : *arr) {
      const auto* row = el.as_array();
      if (!row || row->size() != D)
        throw ConfigError(where(key) + " entries must be arrays of " + std::to_string(D) + " numbers");
      std::array<double, D> v{};
      for (std::size_t i = 0; i < D; ++i) {
        const auto x = (*row)[i].value<double>();
        if (!x || !std::isfinite(*x)) throw ConfigError(where(key) + " entries must be finite numbers");
        v[i] = *x;
      }
      out.push_back(v);
    }
    if (out.empty()) throw ConfigError(where(key) + " must not be empty");
    return out;
  }
  const toml::table* sub(std::string_view key) const {
    if (!t_ || !t_->contains(key)) return nullptr;
    const auto* s = (*t_)[key].as_table();
    if (!s) throw ConfigError(where(key) + " must be a table");
    return s;
  }

 private:
  std::string where(std::string_view key) const { return name_ + "." + std::string(key); }
  const toml::table* t_;
  std::string name_;
};

inline std::vector<Point> points(const std::vector<std::array<double, 2>>& v) {
  std::vector<Point> out;
  for (const auto& p : v) out.push_back({p[0], p[1]});
  return out;
}

inline PhaseState phase_state(const std::array<double, 3>& v) { return {{v[0], v[1]}, v[2]}; }

}  // namespace detail

inline ExperimentConfig parse_config(std::string_view text) {
  toml::table root;
  try {
    root = toml::parse(text);
  } catch (const toml::parse_error& err) {
    std::ostringstream os;
    os << "parse error at line " << err.source().begin.line << ", column " << err.source().begin.column << ": "
       << err.description();
    throw ConfigError(os.str());
  }
  ExperimentConfig cfg;
  cfg.hash = fnv1a(text);
  detail::Section top(&root, "");
  top.allow({"system", "simulate", "conjugate_scan", "verify", "hopf", "gauge"});

  const auto* sys = top.sub("system");
  if (!sys) throw ConfigError("missing [system] table");
  detail::Section s(sys, "system");
  cfg.bandwidth = s.integer("bandwidth", 16, 0);
  if (cfg.bandwidth > kMaxConfigBandwidth)
    throw ConfigError("system.bandwidth must be at most " + std::to_string(kMaxConfigBandwidth));
  try {
    cfg.system = read_system(*sys, cfg.bandwidth);
  } catch (const FieldFormatError& e) {
    throw ConfigError(std::string("system: ") + e.what());
  }

  {
    detail::Section c(top.sub("simulate"), "simulate");
    c.allow({"initial", "duration", "dt", "tol"});
    if (auto v = c.tuples<3>("initial")) {
      cfg.simulate.initial.clear();
      for (const auto& p : *v) cfg.simulate.initial.push_back(detail::phase_state(p));
    }
    cfg.simulate.duration = c.positive("duration", cfg.simulate.duration);
    cfg.simulate.dt = c.positive("dt", cfg.simulate.dt);
    cfg.simulate.tol = c.positive("tol", cfg.simulate.tol);
  }
  {
    detail::Section c(top.sub("conjugate_scan"), "conjugate_scan");
    c.allow({"positions", "headings", "random", "horizon", "tol", "root_tol"});
    if (auto v = c.tuples<2>("positions")) cfg.scan.positions = detail::points(*v);
    cfg.scan.headings = c.integer("headings", cfg.scan.headings, 1);
    cfg.scan.random = c.integer("random", cfg.scan.random, 0);
    cfg.scan.horizon = c.positive("horizon", cfg.scan.horizon);
    cfg.scan.tol = c.positive("tol", cfg.scan.tol);
    cfg.scan.root_tol = c.positive("root_tol", cfg.scan.root_tol);
  }
  {
    detail::Section c(top.sub("verify"), "verify");
    c.allow({"n_x", "n_theta", "sampled_nodes", "seed", "hopf_tol", "dump_nodes", "verify_grid"});
    cfg.verify.n_x = c.pow2("n_x", cfg.verify.n_x);
    cfg.verify.n_theta = c.pow2("n_theta", cfg.verify.n_theta);
    cfg.verify.sampled_nodes = c.integer("sampled_nodes", cfg.verify.sampled_nodes, 0);
    cfg.verify.seed = static_cast<std::uint64_t>(c.integer("seed", static_cast<int>(cfg.verify.seed), 0));
    cfg.verify.hopf_tol = c.positive("hopf_tol", cfg.verify.hopf_tol);
    cfg.verify.dump_nodes = c.boolean("dump_nodes", cfg.verify.dump_nodes);
    cfg.verify.verify_grid = c.pow2("verify_grid", cfg.verify.verify_grid);
  }
  {
    detail::Section c(top.sub("hopf"), "hopf");
    c.allow({"initial", "a", "b0", "b_max", "tol", "window", "dt", "integ_tol", "bounds"});
    if (auto v = c.tuples<3>("initial")) {
      if (v->size() != 1) throw ConfigError("hopf.initial must hold exactly one state");
      cfg.hopf.initial = detail::phase_state(v->front());
    }
    auto& o = cfg.hopf.options;
    cfg.hopf.a = c.number("a", cfg.hopf.a);
    o.b0 = c.positive("b0", o.b0);
    o.b_max = c.positive("b_max", o.b_max);
    if (o.b_max < o.b0) throw ConfigError("hopf.b_max must be at least hopf.b0");
    o.tol = c.positive("tol", o.tol);
    o.window = c.number("window", o.window);
    if (o.window < 0.0) throw ConfigError("hopf.window must be non-negative");
    o.dt = c.positive("dt", o.dt);
    o.integ_tol = c.positive("integ_tol", o.integ_tol);
    cfg.hopf.bounds = c.boolean("bounds", cfg.hopf.bounds);
  }
  {
    detail::Section c(top.sub("gauge"), "gauge");
    c.allow({"bandwidth_factor", "tail_target", "verify_grid", "correspondence"});
    auto& o = cfg.gauge.options;
    o.bandwidth_factor = c.integer("bandwidth_factor", o.bandwidth_factor, 1);
    o.tail_target = c.positive("tail_target", o.tail_target);
    o.verify_grid = c.pow2("verify_grid", o.verify_grid);
    detail::Section k(c.sub("correspondence"), "gauge.correspondence");
    k.allow({"positions", "headings", "horizon", "match_tol", "tol"});
    auto& cc = cfg.gauge.correspondence;
    if (auto v = k.tuples<2>("positions")) cc.positions = detail::points(*v);
    cc.headings = k.integer("headings", cc.headings, 0);
    cc.horizon = k.positive("horizon", cc.horizon);
    cc.match_tol = k.positive("match_tol", cc.match_tol);
    cc.tol = k.positive("tol", cc.tol);
  }
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace thermo

#endif  // THERMO_CONFIG_HPP
