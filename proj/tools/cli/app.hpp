#pragma once

#include "cli/io.hpp"
#include "cli/models.hpp"
#include "imkit/parallel.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace imkit::cli {

inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;

struct Options {
  std::string model;
  std::string model_file;
  std::optional<std::size_t> n;
  std::uint64_t seed = 1;
  std::optional<std::size_t> threads;
  std::string out;

  // data
  std::string x;
  std::string data;
  bool simulate = false;
  std::string theta;

  // plausibility
  std::vector<std::string> grids;
  double alpha = 0.05;
  std::size_t draws = 0;
  std::string prs = "symmetric";

  // validity
  std::size_t sims = 10000;

  // Brownian, psi = n phi
  double sigma2 = 1.0;
  double psi = 10.0;
  std::optional<double> psi0;
  double sigma2_0 = 1.0;

  // characteristics
  std::string field_file;
  std::string theta0;
  std::string slice;
  std::size_t points = 50;
  std::size_t certify_samples = 20;
  std::size_t steps = 21;
  double radius = 1.0;

  // classify
  std::size_t grid_points = 21;
  double tol = 1e-5;
  double rank_tol = 1e-8;
};

namespace detail {

inline ModelSpec resolve_model(const Options& o, std::size_t default_n) {
  if (!o.model.empty() && !o.model_file.empty()) throw ConfigError("give either --model or --model-file, not both");
  if (!o.model_file.empty()) {
    auto m = load_model_file(o.model_file);
    if (o.n && *o.n != m.assoc.n_data) throw ConfigError("--n conflicts with the model file's n");
    return m;
  }
  if (o.model.empty()) throw ConfigError("a model is required (--model or --model-file)");
  return catalog_model(o.model, o.n.value_or(default_n));
}

inline std::size_t catalog_default_n(const std::string& id) {
  if (id == "gaussian-location-scale") return 3;
  if (id == "brownian" || id == "brownian-marginal") return 10;
  if (id == "gaussian-mean") return 1;
  return 2;
}

inline bool is_brownian(const Options& o) { return o.model_file.empty() && o.model.rfind("brownian", 0) == 0; }

inline Vec parse_theta(const std::string& text, const Association& assoc, const std::string& flag) {
  if (text.empty()) throw ConfigError(flag + " is required");
  const auto v = parse_list(text, flag);
  Vec th(static_cast<Eigen::Index>(v.size()));
  for (std::size_t k = 0; k < v.size(); ++k) th[static_cast<Eigen::Index>(k)] = v[k];
  if (static_cast<std::size_t>(th.size()) != assoc.param_dim()) {
    throw ConfigError(flag + " needs " + std::to_string(assoc.param_dim()) + " values");
  }
  assoc.params.check(th);
  return th;
}

inline Vec to_vec(const std::vector<double>& v) {
  Vec out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[i];
  return out;
}

struct Dataset {
  Vec x;
  std::string source;
};

/// Observations from --x, --data or --simulate; exactly one source.
inline Dataset load_data(const Options& o) {
  const int sources = (o.x.empty() ? 0 : 1) + (o.data.empty() ? 0 : 1) + (o.simulate ? 1 : 0);
  if (sources == 0) throw ConfigError("no data: give --x, --data or --simulate");
  if (sources > 1) throw ConfigError("give exactly one of --x, --data and --simulate");
  if (!o.x.empty()) return {to_vec(parse_list(o.x, "--x")), "x"};
  if (!o.data.empty()) return {to_vec(read_csv_values(o.data)), o.data};
  return {Vec(), "simulate"};
}

inline PredictiveRandomSet make_prs(const Options& o, const AuxiliaryDistribution& aux) {
  if (o.prs == "symmetric") return symmetric_prs(aux, aux_median(aux));
  if (o.prs == "half-radius") return symmetric_prs(aux, aux_median(aux), 0.5);
  throw ConfigError("unknown --prs '" + o.prs + "' (symmetric, half-radius)");
}

inline Json grid_json(const std::vector<std::string>& grids) {
  Json a = Json::array();
  for (const auto& g : grids) {
    const auto parts = split(g, ':');
    a.push_back({{"lo", parse_number(parts[0], "grid")},
                 {"hi", parse_number(parts[1], "grid")},
                 {"count", static_cast<std::size_t>(parse_number(parts[2], "grid"))}});
  }
  return a;
}

inline std::string out_prefix(const Options& o, const std::string& fallback) { return o.out.empty() ? fallback : o.out; }

inline Json region_json(const PlausibilityCurve& c, double alpha) {
  if (c.axes.size() != 1) return Json();
  Json a = Json::array();
  for (const auto& iv : plausibility_region(c, alpha).intervals) a.push_back(Json::array({iv.lower, iv.upper}));
  return a;
}

inline void finish_curve(const Options& o, const PlausibilityCurve& c, Json meta, std::ostream& out) {
  const std::string prefix = out_prefix(o, "plausibility");
  const auto best = std::max_element(c.pl.begin(), c.pl.end()) - c.pl.begin();
  meta["alpha"] = o.alpha;
  meta["grid"] = grid_json(o.grids);
  meta["region"] = region_json(c, o.alpha);
  meta["pl_max"] = c.pl[static_cast<std::size_t>(best)];
  meta["argmax"] = to_json(c.points[static_cast<std::size_t>(best)]);
  meta["curve"] = prefix + ".csv";
  write_text(prefix + ".csv", curve_csv(c));
  write_json(prefix + ".json", meta);
  out << "wrote " << prefix << ".csv and " << prefix << ".json\n";
  if (meta["region"].is_array()) {
    for (const auto& iv : meta["region"]) {
      out << "region at alpha " << fmt_short(o.alpha) << ": [" << fmt_short(iv[0].get<double>()) << ", "
          << fmt_short(iv[1].get<double>()) << "]\n";
    }
  }
}

inline std::vector<std::vector<double>> parse_axes(const Options& o, std::size_t p) {
  if (o.grids.size() != p) {
    throw ConfigError("need one --grid per parameter: " + std::to_string(p) + " expected, got " +
                      std::to_string(o.grids.size()));
  }
  std::vector<std::vector<double>> axes;
  for (const auto& g : o.grids) axes.push_back(parse_grid(g));
  return axes;
}

inline void validate_alpha(double alpha) {
  if (!(alpha > 0 && alpha < 1)) throw ConfigError("--alpha must lie in (0, 1)");
}

/// Ratio IM for phi on a psi grid; data are the path y_0..y_n.
inline void plausibility_brownian(const Options& o, std::ostream& out) {
  Vec y;
  std::string source;
  if (o.simulate) {
    if (!o.x.empty() || !o.data.empty()) throw ConfigError("give exactly one of --x, --data and --simulate");
    y = catalog::brownian_simulate(o.n.value_or(10), o.sigma2, o.psi, o.seed).y;
    source = "simulate";
  } else {
    const auto d = load_data(o);
    y = d.x;
    source = d.source;
  }
  if (y.size() < 4) throw ConfigError("Brownian data need a path y_0..y_n with n >= 3");
  const auto n = static_cast<std::size_t>(y.size() - 1);
  if (o.n && *o.n != n) throw ConfigError("--n conflicts with the path length");
  const double nd = static_cast<double>(n);
  const double psi0 = o.psi0.value_or(nd);
  if (!(o.sigma2_0 > 0)) throw ConfigError("--sigma2-0 must be positive");
  const Vec q = catalog::brownian_statistics(y);
  const auto im = catalog::brownian_ratio_im(q, make_vec({std::log(o.sigma2_0), psi0 / nd}));
  if (o.grids.size() != 1) throw ConfigError("Brownian plausibility needs exactly one --grid over psi");
  if (o.draws) throw ConfigError("--draws is not available for the Brownian ratio IM");
  PlausibilityCurve c;
  c.axes = {parse_grid(o.grids[0])};
  c.assoc_id = im.cond.name;
  c.prs_id = im.prs.name;
  for (double psi : c.axes[0]) {
    c.points.push_back(make_vec({psi}));
    c.pl.push_back(im.plausibility(q, make_vec({psi / nd})));
  }
  Json meta;
  meta["command"] = "plausibility";
  meta["model"] = "brownian";
  meta["parameter"] = "psi";
  meta["n"] = n;
  meta["data"] = source;
  meta["seed"] = o.seed;
  meta["psi0"] = psi0;
  meta["sigma2_0"] = o.sigma2_0;
  if (o.simulate) meta["truth"] = {{"sigma2", o.sigma2}, {"psi", o.psi}};
  meta["prs"] = c.prs_id;
  meta["method"] = "closed-form";
  finish_curve(o, c, meta, out);
}

}  // namespace detail

inline int cmd_plausibility(const Options& o, std::ostream& out) {
  detail::validate_alpha(o.alpha);
  if (detail::is_brownian(o)) {
    if (o.model != "brownian") throw ConfigError("plausibility supports the Brownian model through --model brownian");
    detail::plausibility_brownian(o, out);
    return 0;
  }
  auto data = detail::load_data(o);
  std::size_t n_default = o.model.empty() ? 1 : detail::catalog_default_n(o.model);
  if (!o.simulate && o.model_file.empty()) {
    if (o.n && *o.n != static_cast<std::size_t>(data.x.size())) throw ConfigError("--n conflicts with the data length");
    n_default = static_cast<std::size_t>(data.x.size());
  }
  Options oo = o;
  if (!o.simulate) oo.n.reset();
  const auto m = detail::resolve_model(oo, n_default);
  Json meta;
  meta["command"] = "plausibility";
  meta["model"] = m.id;
  meta["n"] = m.assoc.n_data;
  meta["data"] = data.source;
  meta["seed"] = o.seed;
  if (o.simulate) {
    const Vec truth = detail::parse_theta(o.theta, m.assoc, "--theta");
    data.x = sample_data(m.assoc, truth, o.seed);
    meta["truth"] = to_json(truth);
  }
  if (static_cast<std::size_t>(data.x.size()) != m.assoc.n_data) {
    throw ConfigError("data have " + std::to_string(data.x.size()) + " values, model expects " +
                      std::to_string(m.assoc.n_data));
  }
  const auto axes = detail::parse_axes(o, m.assoc.param_dim());
  const auto prs = detail::make_prs(o, m.assoc.aux);
  const auto c = o.draws ? plausibility_curve_mc(m.assoc, prs, data.x, axes, o.draws, o.seed)
                         : plausibility_curve(m.assoc, prs, data.x, axes);
  meta["x"] = to_json(data.x);
  meta["prs"] = o.prs;
  meta["method"] = o.draws ? "monte-carlo" : "closed-form";
  if (o.draws) meta["draws"] = o.draws;
  detail::finish_curve(o, c, meta, out);
  return 0;
}

inline int cmd_validity(const Options& o, std::ostream& out) {
  if (detail::is_brownian(o)) throw ConfigError("validity is not available for the Brownian models");
  const auto m = detail::resolve_model(o, o.model.empty() ? 1 : detail::catalog_default_n(o.model));
  const Vec truth = detail::parse_theta(o.theta, m.assoc, "--theta");
  const auto prs = detail::make_prs(o, m.assoc.aux);
  const auto r = validity_diagnostic(m.assoc, prs, truth, o.sims, o.seed);
  Json j;
  j["command"] = "validity";
  j["model"] = m.id;
  j["n"] = m.assoc.n_data;
  j["theta"] = to_json(truth);
  j["prs"] = o.prs;
  j["seed"] = o.seed;
  j["n_sim"] = r.n_sim;
  j["ks_one_sided"] = r.ks_one_sided;
  j["critical"] = r.critical;
  j["pass"] = r.pass;
  const std::string prefix = detail::out_prefix(o, "validity");
  write_json(prefix + ".json", j);
  out << "validity: " << (r.pass ? "pass" : "fail") << " (ks_one_sided " << fmt_short(r.ks_one_sided) << ", critical "
      << fmt_short(r.critical) << ")\n";
  return 0;
}

namespace detail {

struct FieldRun {
  CharacteristicField field;
  std::optional<Association> assoc;  // present for model fields
  Vec theta0;
  Vec u0;
  std::optional<Vec> half_width;
  double radius = 1.0;
  std::vector<double> slice;
  std::string model;
  std::function<Vec(Engine&)> sample_point;
};

inline FieldRun field_from_options(const Options& o) {
  FieldRun r;
  if (!o.field_file.empty()) {
    if (!o.model.empty() || !o.model_file.empty()) throw ConfigError("give --field or a model, not both");
    auto f = load_field_file(o.field_file);
    r.field = f.field;
    r.theta0 = f.field.anchor;
    r.u0 = f.u0;
    r.half_width = f.half_width;
    r.radius = f.radius;
    r.slice = f.slice;
    r.model = f.field.name;
    const Vec c = f.u0;
    r.sample_point = [c](Engine& eng) {
      Vec u = c;
      for (auto& v : u) v += 0.5 * standard_normal(eng);
      return u;
    };
    if (r.slice.empty()) r.slice.assign(f.u0.data(), f.u0.data() + std::min<std::size_t>(f.field.p, f.field.n));
    return r;
  }
  const auto m = resolve_model(o, o.model.empty() ? 2 : (o.model == "gaussian-mean" ? 2 : catalog_default_n(o.model)));
  const auto& a = m.assoc;
  const double nd = static_cast<double>(a.n_data);
  const bool brownian = o.model_file.empty() && o.model.rfind("brownian", 0) == 0;
  if (brownian && !o.theta0.empty()) throw ConfigError("Brownian anchors use --psi0 and --sigma2-0");
  if (o.model == "brownian") {
    if (!(o.sigma2_0 > 0)) throw ConfigError("--sigma2-0 must be positive");
    r.theta0 = make_vec({std::log(o.sigma2_0), o.psi0.value_or(nd) / nd});
  } else if (o.model == "brownian-marginal") {
    r.theta0 = make_vec({o.psi0.value_or(nd + 1) / (nd + 1)});
  } else if (!o.theta0.empty()) {
    r.theta0 = parse_theta(o.theta0, a, "--theta0");
  } else {
    r.theta0 = imkit::detail::midpoints(imkit::detail::theta_ranges(a, RegularityOptions{{}, m.theta_ranges}));
  }
  a.params.check(r.theta0);
  r.field = o.model == "brownian" ? catalog::brownian_field(a.n_data, r.theta0[1]) : build_field(a, r.theta0);
  r.assoc = a;
  r.model = m.id;
  const Vec med = aux_median(a.aux);
  r.u0 = med;
  r.radius = o.radius;
  r.slice.assign(med.data(), med.data() + std::min<std::size_t>(a.param_dim(), a.aux.dim));
  const auto aux = a.aux;
  r.sample_point = [aux](Engine& eng) { return aux.sample(eng); };
  return r;
}

}  // namespace detail

inline int cmd_characteristics(const Options& o, std::ostream& out) {
  auto run = detail::field_from_options(o);
  const auto& f = run.field;
  const std::size_t n = f.n, p = f.p;
  if (!o.slice.empty()) run.slice = parse_list(o.slice, "--slice");
  if (o.points == 0) throw ConfigError("--points must be >= 1");
  if (o.steps < 2) throw ConfigError("--steps must be >= 2");
  const std::string prefix = detail::out_prefix(o, "characteristics");
  const Vec tau0 = Vec::Zero(static_cast<Eigen::Index>(p));

  // Trajectory through u0.
  PicardConfig pc;
  pc.radius = run.radius;
  std::optional<RectangleCertificate> rect;
  if (run.half_width) {
    pc.half_width = *run.half_width;
  } else {
    rect = certify_rectangle(f, run.u0, tau0, run.radius);
    pc.half_width = Vec::Constant(static_cast<Eigen::Index>(p), rect->a);
  }
  const Trajectory traj = picard_solve(f, run.u0, tau0, pc);
  std::size_t per_axis = o.steps;
  while (p > 1 && std::pow(static_cast<double>(per_axis), static_cast<double>(p)) > 4096.0) --per_axis;
  std::vector<Vec> rows;
  {
    std::vector<std::vector<double>> axes;
    for (std::size_t k = 0; k < p; ++k) {
      const double a = pc.half_width[static_cast<Eigen::Index>(k)];
      axes.push_back(linspace(-a, a, per_axis));
    }
    for (const Vec& tau : imkit::detail::product_grid(axes)) {
      Vec row(static_cast<Eigen::Index>(p + n));
      row << tau, traj.evaluate(tau);
      rows.push_back(row);
    }
  }
  write_text(prefix + "-trajectory.csv", table_csv({{"tau", p}, {"u", n}}, rows));

  Json cert;
  cert["command"] = "characteristics";
  cert["model"] = run.model;
  cert["n"] = n;
  cert["p"] = p;
  cert["anchor"] = to_json(run.theta0);
  cert["seed"] = o.seed;
  cert["trajectory"] = {{"u0", to_json(run.u0)},
                        {"half_width", to_json(pc.half_width)},
                        {"radius", pc.radius},
                        {"iterations", traj.iterations_used},
                        {"residual", traj.final_residual},
                        {"quadrature_error", traj.quadrature_error},
                        {"segments", traj.segments()},
                        {"file", prefix + "-trajectory.csv"}};
  if (rect) cert["trajectory"]["certificate"] = {{"M", rect->M}, {"L", rect->L}, {"a", rect->a}, {"b", rect->b}};

  if (p >= n) {
    cert["invariants"] = 0;
    write_json(prefix + ".json", cert);
    out << "wrote " << prefix << "-trajectory.csv and " << prefix << ".json (no invariants: p >= n)\n";
    return 0;
  }
  if (run.slice.size() != p) throw ConfigError("--slice needs p = " + std::to_string(p) + " values");

  // Invariants at seeded sample points.
  TraceConfig tc;
  tc.values = run.slice;
  Engine eng = make_engine(o.seed);
  std::vector<Vec> pts;
  for (std::size_t s = 0; s < o.points; ++s) pts.push_back(run.sample_point(eng));
  rows.clear();
  for (std::size_t s = 0; s < pts.size(); ++s) {
    TraceConfig cfg = tc;
    cfg.check_rank = s == 0;
    const Vec inv = trace_invariants(f, pts[s], cfg);
    Vec row(static_cast<Eigen::Index>(n + inv.size()));
    row << pts[s], inv;
    rows.push_back(row);
  }
  write_text(prefix + ".csv", table_csv({{"u", n}, {"eta", n - p}}, rows));

  // Certificate: theta-derivative of every traced invariant at the anchor.
  TraceConfig quiet = tc;
  quiet.check_rank = false;
  double worst = 0;
  std::string method;
  if (run.assoc) {
    method = "theta finite differences through the inverse map";
    for (std::size_t j = 0; j < n - p; ++j) {
      auto eta = [&f, quiet, j](const Vec& u) { return trace_invariants(f, u, quiet)[static_cast<Eigen::Index>(j)]; };
      worst = std::max(worst, verify_local_conditioning(eta, *run.assoc, run.theta0, o.certify_samples, std::nullopt, o.seed));
    }
  } else {
    method = "finite differences along the field directions";
    Engine ceng = make_engine(o.seed, 1);
    double ss = 0;
    std::size_t count = 0;
    for (std::size_t s = 0; s < o.certify_samples; ++s) {
      const Vec u = run.sample_point(ceng);
      const Vec e0 = trace_invariants(f, u, quiet);
      ss += e0.squaredNorm();
      count += static_cast<std::size_t>(e0.size());
      const Mat g = f.eval(tau0, u);
      for (std::size_t k = 0; k < p; ++k) {
        const Vec dir = g.col(static_cast<Eigen::Index>(k));
        const double h = 1e-4 * std::max(1.0, u.cwiseAbs().maxCoeff()) / std::max(1.0, dir.cwiseAbs().maxCoeff());
        const Vec d = (trace_invariants(f, u + h * dir, quiet) - trace_invariants(f, u - h * dir, quiet)) / (2 * h);
        worst = std::max(worst, d.cwiseAbs().maxCoeff());
      }
    }
    worst /= std::max(1.0, std::sqrt(ss / static_cast<double>(std::max<std::size_t>(count, 1))));
  }
  cert["invariants"] = n - p;
  Json fixed = Json::array();
  for (std::size_t k = 0; k < p; ++k) fixed.push_back(k + 1);
  cert["slice"] = {{"fixed", fixed}, {"values", to_json(run.slice)}};
  cert["points"] = pts.size();
  cert["certify_samples"] = o.certify_samples;
  cert["method"] = method;
  cert["max_theta_derivative"] = worst;
  cert["tolerance"] = 1e-6;
  cert["conditioning"] = worst <= 1e-6;
  cert["file"] = prefix + ".csv";
  write_json(prefix + ".json", cert);
  out << "wrote " << prefix << ".csv, " << prefix << "-trajectory.csv and " << prefix << ".json\n";
  out << n - p << " invariants, max theta-derivative " << fmt_short(worst) << "\n";
  return 0;
}

inline int cmd_classify(const Options& o, std::ostream& out) {
  const auto m = detail::resolve_model(o, o.model.empty() ? 2 : (o.model == "gaussian-mean" ? 2 : detail::catalog_default_n(o.model)));
  RegularityOptions ro;
  ro.u_ranges = m.u_ranges;
  ro.theta_ranges = m.theta_ranges;
  if (o.grid_points < 3) throw ConfigError("--grid-points must be >= 3");
  if (!(o.tol > 0) || !(o.rank_tol > 0)) throw ConfigError("tolerances must be positive");
  ro.grid_points = o.grid_points;
  ro.tol = o.tol;
  ro.rank_tol = o.rank_tol;
  const auto c = classify(m.assoc, ro);
  Json j;
  j["command"] = "classify";
  j["model"] = m.id;
  j["n"] = m.assoc.n_data;
  j["p"] = m.assoc.param_dim();
  j["seed"] = o.seed;
  const Json report = classification_json(c);
  for (const auto& [k, v] : report.items()) j[k] = v;
  const std::string prefix = detail::out_prefix(o, "classify");
  write_json(prefix + ".json", j);
  out << c.verdict << "\n";
  return 0;
}

inline int cmd_simulate(const Options& o, std::ostream& out) {
  const std::string prefix = detail::out_prefix(o, "simulate");
  Json j;
  j["command"] = "simulate";
  j["seed"] = o.seed;
  if (o.model == "brownian") {
    const std::size_t n = o.n.value_or(10);
    const auto path = catalog::brownian_simulate(n, o.sigma2, o.psi, o.seed);
    write_text(prefix + ".csv", column_csv("y", path.y));
    write_text(prefix + "-latent.csv", column_csv("xi", path.xi));
    write_text(prefix + "-statistics.csv", column_csv("q", catalog::brownian_statistics(path.y)));
    j["model"] = "brownian";
    j["n"] = n;
    j["sigma2"] = o.sigma2;
    j["psi"] = o.psi;
    j["phi"] = o.psi / static_cast<double>(n);
    j["files"] = {prefix + ".csv", prefix + "-latent.csv", prefix + "-statistics.csv"};
  } else {
    if (detail::is_brownian(o)) throw ConfigError("simulate supports the Brownian model through --model brownian");
    const auto m = detail::resolve_model(o, o.model.empty() ? 1 : detail::catalog_default_n(o.model));
    const Vec truth = detail::parse_theta(o.theta, m.assoc, "--theta");
    const Vec x = sample_data(m.assoc, truth, o.seed);
    write_text(prefix + ".csv", column_csv("x", x));
    j["model"] = m.id;
    j["n"] = m.assoc.n_data;
    j["theta"] = to_json(truth);
    j["files"] = {prefix + ".csv"};
  }
  write_json(prefix + ".json", j);
  out << "wrote " << prefix << ".csv and " << prefix << ".json\n";
  return 0;
}

namespace detail {

inline void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--model", o.model, "Catalog model id");
  cmd->add_option("--model-file", o.model_file, "JSON model file (expression grammar)");
  cmd->add_option("--n", o.n, "Sample size");
  cmd->add_option("--seed", o.seed, "Random seed")->capture_default_str();
  cmd->add_option("--threads", o.threads, "Worker cap (default: IMKIT_THREADS or hardware)")->check(CLI::PositiveNumber);
  cmd->add_option("--out", o.out, "Output prefix");
}

inline void add_brownian(CLI::App* cmd, Options& o) {
  cmd->add_option("--sigma2", o.sigma2, "Brownian noise variance for simulation")->capture_default_str();
  cmd->add_option("--psi", o.psi, "Brownian signal-to-noise psi for simulation")->capture_default_str();
  cmd->add_option("--psi0", o.psi0, "Brownian anchor psi0 (default n)");
  cmd->add_option("--sigma2-0", o.sigma2_0, "Brownian anchor sigma2_0")->capture_default_str();
}

}  // namespace detail

/// Parses argv, runs one subcommand, returns the process exit code.
inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"imkit: inferential models, plausibility and conditioning diagnostics"};
  app.name("imkit");
  app.require_subcommand(1);
  Options o;

  auto* pl = app.add_subcommand("plausibility", "Plausibility curve over a parameter grid");
  detail::add_common(pl, o);
  detail::add_brownian(pl, o);
  pl->add_option("--x", o.x, "Comma-separated observations");
  pl->add_option("--data", o.data, "CSV data file");
  pl->add_flag("--simulate", o.simulate, "Simulate data at --theta with --seed");
  pl->add_option("--theta", o.theta, "True parameter for --simulate");
  pl->add_option("--grid", o.grids, "Grid lo:hi:count, one per parameter")->take_all();
  pl->add_option("--alpha", o.alpha, "Region level")->capture_default_str();
  pl->add_option("--draws", o.draws, "Monte Carlo draws (0: closed form)");
  pl->add_option("--prs", o.prs, "symmetric or half-radius")->capture_default_str();

  auto* va = app.add_subcommand("validity", "Calibration of pl at the true parameter");
  detail::add_common(va, o);
  va->add_option("--theta", o.theta, "True parameter")->required();
  va->add_option("--sims", o.sims, "Simulated datasets")->capture_default_str();
  va->add_option("--prs", o.prs, "symmetric or half-radius")->capture_default_str();

  auto* ch = app.add_subcommand("characteristics", "Picard trajectory, traced invariants and certificate");
  detail::add_common(ch, o);
  detail::add_brownian(ch, o);
  ch->add_option("--field", o.field_file, "JSON field file");
  ch->add_option("--theta0", o.theta0, "Anchor for model fields");
  ch->add_option("--slice", o.slice, "Reference slice values for the first p coordinates");
  ch->add_option("--points", o.points, "Sample points")->capture_default_str();
  ch->add_option("--certify-samples", o.certify_samples, "Points for the derivative certificate")->capture_default_str();
  ch->add_option("--steps", o.steps, "Trajectory points per tau axis")->capture_default_str();
  ch->add_option("--radius", o.radius, "Picard ball radius for model fields")->capture_default_str();

  auto* cl = app.add_subcommand("classify", "Regularity classification");
  detail::add_common(cl, o);
  cl->add_option("--grid-points", o.grid_points, "Grid points per axis")->capture_default_str();
  cl->add_option("--tol", o.tol, "Separability tolerance")->capture_default_str();
  cl->add_option("--rank-tol", o.rank_tol, "Relative rank threshold")->capture_default_str();

  auto* si = app.add_subcommand("simulate", "Simulate a data set");
  detail::add_common(si, o);
  detail::add_brownian(si, o);
  si->add_option("--theta", o.theta, "True parameter");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (o.threads) set_thread_count(*o.threads);
    if (pl->parsed()) return cmd_plausibility(o, out);
    if (va->parsed()) return cmd_validity(o, out);
    if (ch->parsed()) return cmd_characteristics(o, out);
    if (cl->parsed()) return cmd_classify(o, out);
    return cmd_simulate(o, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const Error& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const nlohmann::json::exception& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  }
}

}  // namespace imkit::cli
