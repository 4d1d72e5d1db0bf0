#ifndef THERMO_IO_HPP
#define THERMO_IO_HPP

// JSON records for reports and the TOML term format for fields.
//
// A field is an array of tables, one per term a cos(k1 x1 + k2 x2 + p):
//   [[phi]]
//   k1 = 1
//   k2 = 0
//   amplitude = 0.1
//   phase = 0.0
// A system uses the keys phi, f, e1, e2 (all optional, absent means zero).

#include <cmath>
#include <limits>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>
#include <toml.hpp>

#include "thermo/analysis.hpp"

namespace thermo {

using json = nlohmann::json;

/// Non-finite values become null.
inline json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json to_json(const ConjugateReport& r) {
  json j;
  j["first_conjugate_time"] = r.first_time ? json(*r.first_time) : json(nullptr);
  j["zero_count"] = r.zero_count;
  j["horizon"] = r.horizon;
  j["tolerances"] = {{"tol", r.tol}, {"root_tol", r.root_tol}};
  j["zeros"] = r.zeros;
  return j;
}

inline json to_json(const ComparisonBounds& b) {
  return {{"B", b.B}, {"C", b.C}, {"A", b.A}, {"p_minus", b.p_minus}, {"p_plus", b.p_plus}, {"resolution", b.resolution}};
}

inline json to_json(const HopfLevel& l) {
  return {{"b", l.b},
          {"delta", number_or_null(l.delta)},
          {"raw_delta", number_or_null(l.raw_delta)},
          {"monotone_violation", l.monotone_violation},
          {"valid", l.valid}};
}

inline json to_json(const std::vector<HopfLevel>& h) {
  json a = json::array();
  for (const auto& l : h) a.push_back(to_json(l));
  return a;
}

/// Convergence-history sidecar of a profile.
inline json history_json(const RiccatiProfile& p) {
  json j;
  j["base_time"] = p.base_time();
  j["tolerance"] = p.tolerance();
  j["extrapolated"] = p.extrapolated();
  j["samples"] = p.size();
  j["masked"] = p.masked_count();
  j["riccati_residual"] = p.residual() ? number_or_null(*p.residual()) : json(nullptr);
  j["history"] = to_json(p.history());
  if (p.bounds()) {
    j["bounds"] = to_json(*p.bounds());
    j["bound_violation"] = p.bound_violation();
    j["symmetric_bound_violation"] = p.symmetric_bound_violation();
  }
  return j;
}

inline json to_json(const GaugeTransform& g) {
  const auto& e1 = g.transformed().e();
  return {{"poisson_residual", g.poisson_residual()},
          {"mean_U", g.mean_U()},
          {"sup_U", g.sup_U()},
          {"aliasing_residual", g.aliasing_residual()},
          {"transformed_divergence_residual", g.transformed_divergence_residual()},
          {"flatness_residual", g.flatness_residual()},
          {"sup_e1", std::max(e1.c1().grid_sup_norm(g.verify_grid()), e1.c2().grid_sup_norm(g.verify_grid()))},
          {"bandwidth", g.bandwidth()},
          {"verify_grid", g.verify_grid()}};
}

inline json to_json(const CorrespondenceRecord& r) {
  json mapped = json::array();
  for (double v : r.mapped) mapped.push_back(v);
  return {{"original", to_json(r.original)},
          {"transformed", to_json(r.transformed)},
          {"mapped_zeros", mapped},
          {"s_horizon", r.s_horizon},
          {"max_mismatch", number_or_null(r.max_mismatch)},
          {"both_free", r.both_free},
          {"passed", r.passed}};
}

inline json to_json(const IdentityCheck& c) {
  json j{{"name", c.name}, {"lhs", c.lhs}, {"rhs", c.rhs}, {"difference", c.difference}, {"sampled", c.sampled}};
  j["standard_error"] = c.standard_error ? number_or_null(*c.standard_error) : json(nullptr);
  return j;
}

inline json to_json(const IdentityReport& r) {
  json j;
  j["resolution"] = {{"n_x", r.n_x}, {"n_theta", r.n_theta}};
  j["total_measure"] = r.total_measure;
  j["integrals"] = json::array();
  for (const auto& c : r.integrals) j["integrals"].push_back(to_json(c));
  j["pointwise"] = json::array();
  for (const auto& c : r.pointwise)
    j["pointwise"].push_back({{"name", c.name}, {"residual", c.residual}, {"applies", c.applies}});
  j["r_integrals"] = json::array();
  for (const auto& c : r.r_integrals) j["r_integrals"].push_back(to_json(c));
  j["sampled_nodes"] = r.nodes.size();
  j["excluded_nodes"] = r.excluded;
  return j;
}

inline json to_json(const RigidityReport& r) {
  json j;
  j["integrals"] = json::array();
  for (const auto& c : r.integrals) j["integrals"].push_back(to_json(c));
  j["f_norm"] = r.f_norm;
  j["flatness_residual"] = r.flatness_residual;
  j["divergence_residual"] = r.divergence_residual;
  j["poisson_residual"] = r.poisson_residual;
  j["curvature_minus_div_e"] = r.curvature_minus_div_e;
  j["conditions"] = {{"f_vanishes", r.f_vanishes}, {"metric_flat", r.metric_flat}, {"divergence_free", r.divergence_free}};
  j["thresholds"] = {{"f_norm", r.thresholds.f_norm},
                     {"flatness", r.thresholds.flatness},
                     {"divergence", r.thresholds.divergence}};
  j["verdict"] = r.verdict();
  return j;
}

class FieldFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Terms of one field from an array of tables.
inline std::vector<FourierTerm> read_terms(const toml::node_view<const toml::node>& node, std::string_view name) {
  std::vector<FourierTerm> out;
  if (!node) return out;
  const auto* arr = node.as_array();
  if (!arr) throw FieldFormatError(std::string(name) + " must be an array of term tables");
  for (const auto& el : *arr) {
    const auto* t = el.as_table();
    if (!t) throw FieldFormatError(std::string(name) + " entries must be tables");
    for (const auto& [key, _] : *t)
      if (key != "k1" && key != "k2" && key != "amplitude" && key != "phase")
        throw FieldFormatError("unknown key '" + std::string(key.str()) + "' in a term of " + std::string(name));
    const auto k1 = (*t)["k1"].value<int64_t>();
    const auto k2 = (*t)["k2"].value<int64_t>();
    const auto amp = (*t)["amplitude"].value<double>();
    if (!k1 || !k2 || !amp) throw FieldFormatError("term of " + std::string(name) + " needs k1, k2 and amplitude");
    const double phase = (*t)["phase"].value_or(0.0);
    if (!std::isfinite(*amp) || !std::isfinite(phase))
      throw FieldFormatError("non-finite amplitude or phase in " + std::string(name));
    out.push_back({static_cast<int>(*k1), static_cast<int>(*k2), *amp, phase});
  }
  return out;
}

inline int terms_bandwidth(const std::vector<FourierTerm>& terms) {
  int n = 0;
  for (const auto& t : terms) n = std::max({n, std::abs(t.k1), std::abs(t.k2)});
  return n;
}

/// Builds a system from a table holding phi, f, e1, e2. `bandwidth` caps the
/// frequencies allowed in the terms.
inline ThermostatSystem read_system(const toml::table& tbl, int bandwidth) {
  for (const auto& [key, _] : tbl)
    if (key != "phi" && key != "f" && key != "e1" && key != "e2" && key != "bandwidth")
      throw FieldFormatError("unknown system key '" + std::string(key.str()) + "'");
  auto field = [&](std::string_view name) {
    const auto terms = read_terms(tbl[name], name);
    if (terms_bandwidth(terms) > bandwidth)
      throw FieldFormatError(std::string(name) + " has a term beyond bandwidth " + std::to_string(bandwidth));
    return SpectralScalarField::from_terms(terms_bandwidth(terms), terms);
  };
  return ThermostatSystem(ConformalMetric(field("phi")), field("f"), SpectralVectorField(field("e1"), field("e2")));
}

inline toml::array terms_array(const SpectralScalarField& f, double drop) {
  toml::array arr;
  for (const auto& t : f.terms(drop))
    arr.push_back(toml::table{{"k1", t.k1}, {"k2", t.k2}, {"amplitude", t.amplitude}, {"phase", t.phase}});
  return arr;
}

/// Writes the system's nonzero fields as arrays of tables. Terms with
/// amplitude at most `drop` are omitted.
inline void write_system(std::ostream& os, const ThermostatSystem& sys, double drop = 1e-15) {
  toml::table tbl;
  auto put = [&](std::string_view name, const SpectralScalarField& f) {
    auto arr = terms_array(f, drop);
    if (!arr.empty()) tbl.insert(name, std::move(arr));
  };
  put("phi", sys.metric().phi());
  put("f", sys.f());
  put("e1", sys.e().c1());
  put("e2", sys.e().c2());
  os << toml::toml_formatter(tbl) << '\n';
}

/// One field under the key `name`.
inline void write_field(std::ostream& os, std::string_view name, const SpectralScalarField& f, double drop = 1e-15) {
  toml::table tbl;
  tbl.insert(name, terms_array(f, drop));
  os << toml::toml_formatter(tbl) << '\n';
}

}  // namespace thermo

#endif  // THERMO_IO_HPP
