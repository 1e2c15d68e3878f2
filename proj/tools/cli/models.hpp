#pragma once

#include "cli/io.hpp"
#include "imkit/catalog/brownian.hpp"
#include "imkit/catalog/gaussian.hpp"
#include "imkit/characteristics.hpp"
#include "imkit/distributions.hpp"
#include "imkit/expression.hpp"
#include "imkit/regularity.hpp"

#include <optional>
#include <string>
#include <vector>

namespace imkit::cli {

inline const std::vector<std::string>& catalog_ids() {
  static const std::vector<std::string> ids{"gaussian-mean", "gaussian-location-scale", "brownian",
                                            "brownian-marginal"};
  return ids;
}

/// A resolved model: the association plus regularity ranges from a model file.
struct ModelSpec {
  std::string id;
  Association assoc;
  std::vector<Interval> u_ranges;
  std::vector<Interval> theta_ranges;
  bool from_file = false;
};

inline double json_bound(const Json& j, double fallback, const std::string& what) {
  if (j.is_null()) return fallback;
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf" || s == "+inf") return kInf;
    if (s == "-inf") return -kInf;
  }
  throw ConfigError(what + " must be a number, null, \"inf\" or \"-inf\"");
}

inline std::vector<Interval> json_ranges(const Json& j, const std::string& what) {
  std::vector<Interval> out;
  if (!j.is_array()) throw ConfigError(what + " must be an array of [lo, hi] pairs");
  for (const auto& r : j) {
    if (!r.is_array() || r.size() != 2) throw ConfigError(what + " entries must be [lo, hi]");
    Interval iv{json_bound(r[0], -kInf, what), json_bound(r[1], kInf, what)};
    if (!(iv.lower < iv.upper) || !iv.bounded()) throw ConfigError(what + " entries need finite lo < hi");
    out.push_back(iv);
  }
  return out;
}

inline Vec json_vec(const Json& j, const std::string& what) {
  if (j.is_number()) return make_vec({j.get<double>()});
  if (!j.is_array()) throw ConfigError(what + " must be a number or an array of numbers");
  Vec v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ConfigError(what + " must contain numbers only");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

inline AuxiliaryDistribution named_aux(const std::string& name, std::size_t n) {
  if (name == "normal") return standard_normal_aux(n);
  if (name == "chi-square") return chi_square_aux(n);
  if (name == "uniform") return uniform01_aux(n);
  if (name == "log-chi-square") return log_chi_square1_aux(n);
  throw ConfigError("unknown auxiliary '" + name + "' (normal, chi-square, uniform, log-chi-square)");
}

/// {name, n, parameters: [{name, lower, upper}], auxiliary, components: [...], ranges: {u, theta}}.
inline ModelSpec load_model_file(const std::string& path) {
  const Json j = read_json_file(path);
  try {
    ModelSpec m;
    m.from_file = true;
    m.id = j.value("name", std::string("user-model"));
    const auto n = j.at("n").get<std::size_t>();
    if (n < 1) throw ConfigError("model n must be >= 1");
    std::vector<Interval> bounds;
    std::vector<std::string> names;
    for (const auto& p : j.at("parameters")) {
      names.push_back(p.at("name").get<std::string>());
      bounds.push_back({json_bound(p.value("lower", Json()), -kInf, "parameter lower"),
                        json_bound(p.value("upper", Json()), kInf, "parameter upper")});
    }
    if (bounds.empty()) throw ConfigError("model needs at least one parameter");
    std::vector<std::string> comps;
    const Json& c = j.at("components");
    if (c.is_string()) {
      comps.push_back(c.get<std::string>());
    } else {
      for (const auto& e : c) comps.push_back(e.get<std::string>());
    }
    m.assoc = make_expression_association(m.id, n, ParameterSpace(bounds, names),
                                          named_aux(j.value("auxiliary", std::string("normal")), n), comps);
    if (j.contains("ranges")) {
      const Json& r = j.at("ranges");
      if (r.contains("u")) m.u_ranges = json_ranges(r.at("u"), "ranges.u");
      if (r.contains("theta")) m.theta_ranges = json_ranges(r.at("theta"), "ranges.theta");
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

/// Catalog association. Brownian models use theta = (ln sigma^2, phi); the marginal model uses phi.
inline ModelSpec catalog_model(const std::string& id, std::size_t n) {
  ModelSpec m;
  m.id = id;
  if (id == "gaussian-mean") {
    m.assoc = catalog::gaussian_mean_model(n);
  } else if (id == "gaussian-location-scale") {
    m.assoc = catalog::gaussian_location_scale_model(n);
  } else if (id == "brownian") {
    m.assoc = catalog::brownian_v_association(n);
  } else if (id == "brownian-marginal") {
    m.assoc = catalog::brownian_multibeta_association(n);
  } else {
    std::string known;
    for (const auto& k : catalog_ids()) known += (known.empty() ? "" : ", ") + k;
    throw ConfigError("unknown model '" + id + "' (" + known + ")");
  }
  return m;
}

/// Per-coordinate medians of the auxiliary, or 0 where no quantile is available.
inline Vec aux_median(const AuxiliaryDistribution& aux) {
  Vec c = Vec::Zero(static_cast<Eigen::Index>(aux.dim));
  if (aux.marginal_quantile) {
    for (std::size_t i = 0; i < aux.dim; ++i) c[static_cast<Eigen::Index>(i)] = aux.marginal_quantile(i, 0.5);
  }
  return c;
}

/// A field read from JSON: {name, n, p, field: n rows of p expressions, anchor, u0, half_width, radius, slice}.
struct FieldSpec {
  CharacteristicField field;
  Vec u0;
  std::optional<Vec> half_width;
  double radius = 1.0;
  std::vector<double> slice;
};

inline FieldSpec load_field_file(const std::string& path) {
  const Json j = read_json_file(path);
  try {
    FieldSpec f;
    const auto n = j.at("n").get<std::size_t>();
    const auto p = j.at("p").get<std::size_t>();
    if (n < 1 || p < 1) throw ConfigError("field needs n >= 1 and p >= 1");
    std::vector<std::vector<std::string>> rows;
    for (const auto& row : j.at("field")) {
      std::vector<std::string> r;
      if (row.is_string()) {
        r.push_back(row.get<std::string>());
      } else {
        for (const auto& e : row) r.push_back(e.get<std::string>());
      }
      rows.push_back(std::move(r));
    }
    const Vec anchor = j.contains("anchor") ? json_vec(j.at("anchor"), "anchor") : Vec::Zero(static_cast<Eigen::Index>(p));
    f.field = make_expression_field(j.value("name", std::string("user-field")), n, p, rows, anchor);
    f.u0 = j.contains("u0") ? json_vec(j.at("u0"), "u0") : Vec::Zero(static_cast<Eigen::Index>(n));
    if (static_cast<std::size_t>(f.u0.size()) != n) throw ConfigError("u0 must have n entries");
    if (j.contains("half_width")) {
      Vec a = json_vec(j.at("half_width"), "half_width");
      if (a.size() == 1 && p > 1) a = Vec::Constant(static_cast<Eigen::Index>(p), a[0]);
      if (static_cast<std::size_t>(a.size()) != p || !(a.array() > 0).all()) {
        throw ConfigError("half_width must be positive, one value or p values");
      }
      f.half_width = a;
    }
    f.radius = j.value("radius", 1.0);
    if (!(f.radius > 0)) throw ConfigError("radius must be positive");
    if (j.contains("slice")) {
      const Vec s = json_vec(j.at("slice"), "slice");
      f.slice.assign(s.begin(), s.end());
    }
    return f;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

inline Json interval_json(const Interval& iv) { return Json::array({iv.lower, iv.upper}); }

inline Json ranges_json(const std::vector<Interval>& r) {
  Json a = Json::array();
  for (const auto& iv : r) a.push_back(interval_json(iv));
  return a;
}

inline Json classification_json(const Classification& c) {
  Json j;
  j["verdict"] = c.verdict;
  if (c.separability) {
    const auto& s = *c.separability;
    Json r;
    r["h_theta_dependence"] = s.h_theta_dependence;
    r["mixed_log_partial"] = s.mixed_log_partial;
    r["separable"] = s.separable;
    r["regular"] = s.regular;
    r["tol"] = s.tol;
    r["grid_points"] = s.grid_points;
    r["u_ranges"] = ranges_json(s.u_ranges);
    r["theta_ranges"] = ranges_json(s.theta_ranges);
    r["total_points"] = s.total_points;
    r["excluded_points"] = s.excluded_points;
    r["offending_index"] = s.offending_index ? Json(*s.offending_index + 1) : Json();
    Json pairs = Json::array();
    for (const auto& p : s.pairs) {
      pairs.push_back({{"i", p.i + 1},
                       {"j", p.j + 1},
                       {"h_theta_dependence", p.h_theta_dependence},
                       {"mixed_log_partial", p.mixed_log_partial},
                       {"passed", p.passed}});
    }
    r["pairs"] = pairs;
    r["warnings"] = s.warnings;
    j["separability"] = r;
  }
  if (c.transform) {
    const auto& t = *c.transform;
    Json maps = Json::array();
    for (const auto& m : t.v_maps) maps.push_back(interval_json({m.lower(), m.upper()}));
    j["transform"] = {{"kind", t.kind},
                      {"residual", t.residual},
                      {"u_anchor", to_json(t.u_anchor)},
                      {"theta_anchor", to_json(t.theta_anchor)},
                      {"v_map_ranges", maps},
                      {"delta_map_range", interval_json({t.delta_map.lower(), t.delta_map.upper()})}};
  }
  if (c.degeneracy) {
    const auto& d = *c.degeneracy;
    Json basis = Json::array();
    for (Eigen::Index r = 0; r < d.row_space_basis.rows(); ++r) basis.push_back(to_json(Vec(d.row_space_basis.row(r))));
    j["degeneracy"] = {{"numerical_rank", d.numerical_rank},
                       {"degenerate", d.degenerate},
                       {"singular_values", to_json(d.singular_values)},
                       {"row_space_basis", basis},
                       {"rank_tol", d.rank_tol},
                       {"theta_samples", d.theta_samples},
                       {"u_points", d.u_points},
                       {"excluded_points", d.excluded_points}};
  }
  return j;
}

}  // namespace imkit::cli
