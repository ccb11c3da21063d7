#include "reithom/experiment.hpp"

#include "reithom/cellsolver.hpp"
#include "reithom/error.hpp"
#include "reithom/expression.hpp"
#include "reithom/fields.hpp"
#include "reithom/gammaharness.hpp"
#include "reithom/nfunction.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

namespace reithom::experiment {

namespace {

const std::vector<std::string> kKinds{"nfunction-check", "integrand-validate", "cell-inner",
                                      "cell-outer",      "hom-table",          "twoscale",
                                      "corrector",       "gamma-study"};

/// Non-finite doubles become null so that summaries survive a parse round trip.
Json num(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

Json num_array(std::span<const double> v) {
  Json a = Json::array();
  for (double x : v) a.push_back(num(x));
  return a;
}

std::string fmt_d(double v) { return report::format_double(v); }

[[noreturn]] void bad(const std::string& what) { throw ConfigError(what); }

double get_real(const Json& j, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_number()) bad(fmt::format("'{}' must be a number", key));
  return v.get<double>();
}

double get_positive(const Json& j, const char* key, double fallback) {
  const double v = get_real(j, key, fallback);
  if (!(v > 0.0) || !std::isfinite(v)) bad(fmt::format("'{}' must be positive", key));
  return v;
}

int get_int(const Json& j, const char* key, int fallback, int min_value = 1) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_number_integer()) bad(fmt::format("'{}' must be an integer", key));
  const auto x = v.get<long long>();
  if (x < min_value || x > std::numeric_limits<int>::max()) {
    bad(fmt::format("'{}' must be an integer >= {}", key, min_value));
  }
  return static_cast<int>(x);
}

std::string get_string(const Json& j, const char* key, const std::string& fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_string()) bad(fmt::format("'{}' must be a string", key));
  return v.get<std::string>();
}

/// A number or an array of numbers.
std::vector<double> get_vector(const Json& j, const char* key, std::vector<double> fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (v.is_number()) return {v.get<double>()};
  if (v.is_string()) return parse_real_list(v.get<std::string>());
  if (!v.is_array()) bad(fmt::format("'{}' must be a number or an array of numbers", key));
  std::vector<double> out;
  for (const auto& e : v) {
    if (!e.is_number()) bad(fmt::format("'{}' must hold numbers only", key));
    out.push_back(e.get<double>());
  }
  return out;
}

std::vector<double> get_epsilons(const Json& j, const char* key, const std::string& fallback) {
  std::vector<double> eps;
  if (!j.contains(key)) {
    eps = parse_epsilon_list(fallback);
  } else if (j.at(key).is_string()) {
    eps = parse_epsilon_list(j.at(key).get<std::string>());
  } else {
    eps = get_vector(j, key, {});
  }
  if (eps.empty()) bad(fmt::format("'{}' must list at least one epsilon", key));
  for (double e : eps) {
    if (!(e > 0.0 && e < 1.0)) bad("epsilon values must lie in (0, 1)");
  }
  return eps;
}

nfunction::NFunction nfunction_from_spec(const std::string& spec) {
  if (spec == "square") return integrand::square_nfunction();
  return nfunction::from_catalog(spec);
}

cellsolver::XiLattice lattice_from_json(const Json& j, std::size_t components,
                                        std::span<const double> center) {
  if (!j.is_object()) {
    double r = 1.0;
    for (double c : center) r = std::max(r, 2.0 * std::abs(c) + 1.0);
    return cellsolver::XiLattice::uniform(components, -r, r, 17);
  }
  cellsolver::XiLattice lat;
  if (j.contains("range")) {
    const auto range = get_vector(j, "range", {});
    if (range.size() != 2) bad("lattice 'range' must be [lower, upper]");
    lat = cellsolver::XiLattice::uniform(components, range[0], range[1], get_int(j, "count", 17, 2));
  } else {
    lat.lower = get_vector(j, "lower", {});
    lat.upper = get_vector(j, "upper", {});
    for (double c : get_vector(j, "counts", {})) lat.counts.push_back(static_cast<int>(c));
  }
  if (lat.components() != components || lat.lower.size() != components ||
      lat.upper.size() != components) {
    bad(fmt::format("lattice must have {} component(s)", components));
  }
  try {
    lat.validate();
  } catch (const Error& e) {
    bad(std::string("lattice: ") + e.what());
  }
  return lat;
}

Json solution_json(const cellsolver::CellSolution& s) {
  Json j;
  j["energy"] = num(s.energy);
  j["zero_corrector_energy"] = num(s.zero_corrector_energy);
  j["energy_gradient"] = num_array(s.energy_gradient);
  j["iterations"] = s.iterations;
  j["final_grad_norm"] = num(s.final_grad_norm);
  j["converged"] = s.converged;
  j["stop_reason"] = s.stop_reason;
  j["table_extensions"] = s.table_extensions;
  return j;
}

report::CsvTable field_csv(const fields::PeriodicField& f) {
  std::vector<std::string> header{"index"};
  for (std::size_t a = 0; a < f.axes(); ++a) header.push_back(fmt::format("x{}", a + 1));
  for (int c = 0; c < f.components(); ++c) header.push_back(fmt::format("value{}", c + 1));
  report::CsvTable t(header);
  std::vector<double> coords(f.axes());
  for (std::size_t p = 0; p < f.points(); ++p) {
    f.point_coordinates(p, coords);
    std::vector<std::string> row{std::to_string(p)};
    for (double c : coords) row.push_back(fmt_d(c));
    for (int c = 0; c < f.components(); ++c) row.push_back(fmt_d(f.at(p, c)));
    t.add_row(std::move(row));
  }
  return t;
}

report::CsvTable table_csv(const cellsolver::HomTable& table) {
  std::vector<std::string> header;
  if (table.level() == cellsolver::Level::inner) {
    for (int a = 0; a < table.N(); ++a) header.push_back(fmt::format("y{}", a + 1));
  }
  for (std::size_t k = 0; k < table.lattice().components(); ++k) {
    header.push_back(fmt::format("xi{}", k + 1));
  }
  header.insert(header.end(), {"value", "converged"});
  report::CsvTable t(header);
  for (std::size_t j = 0; j < table.y_count(); ++j) {
    const auto y = table.y_sample(j);
    for (std::size_t i = 0; i < table.lattice().size(); ++i) {
      std::vector<std::string> row;
      if (table.level() == cellsolver::Level::inner) {
        for (double v : y) row.push_back(fmt_d(v));
      }
      for (double v : table.lattice().point(i)) row.push_back(fmt_d(v));
      row.push_back(fmt_d(table.value(j, i)));
      row.push_back(table.converged()[j * table.lattice().size() + i] ? "1" : "0");
      t.add_row(std::move(row));
    }
  }
  return t;
}

struct Context {
  const ExperimentConfig& cfg;
  RunResult& out;
  std::vector<std::pair<std::string, fields::PeriodicField>>& fields_out;
  std::vector<std::pair<std::string, cellsolver::HomTable>>& tables_out;
};

// ---------------------------------------------------------------------------

void run_nfunction_check(Context& ctx) {
  const auto& p = ctx.cfg.params;
  const auto nf = nfunction_from_spec(ctx.cfg.nfunction.empty() ? "power:2" : ctx.cfg.nfunction);
  const double t_min = get_positive(p, "t_min", 1e-2);
  const double t_max = get_positive(p, "t_max", 1e3);
  if (!(t_max > t_min)) bad("'t_max' must exceed 't_min'");
  const int samples = get_int(p, "samples", 64, 4);
  const int table_samples = get_int(p, "table_samples", 16, 1);

  const auto d2 = nfunction::delta2_check(nf, t_min, t_max, samples);
  const auto inv = nfunction::check_invariants(nf);
  auto& s = ctx.out.summary;
  s["label"] = nf.label();
  s["delta2"] = {{"holds", d2.holds},
                 {"alpha", num(d2.alpha_est)},
                 {"t0", num(d2.t0_est)},
                 {"range", {t_min, t_max}},
                 {"heuristic", d2.heuristic}};

  // The conjugate may be unbounded (B not superlinear); report that rather than fail.
  Json conj_d2 = nullptr;
  try {
    const auto conj = nf.conjugate_function();
    const auto c2 = nfunction::delta2_check(conj, t_min, t_max, samples);
    conj_d2 = {{"holds", c2.holds}, {"alpha", num(c2.alpha_est)}, {"t0", num(c2.t0_est)}};
  } catch (const UnboundedConjugateError&) {
  }
  s["conjugate_delta2"] = conj_d2;
  s["invariants"] = {{"all", inv.all()},
                     {"convex", inv.convex},
                     {"density_consistent", inv.density_consistent},
                     {"young_consistent", inv.young_consistent},
                     {"worst_young_violation", num(inv.worst_young_violation)}};

  report::CsvTable csv({"t", "B", "b", "Bconj"});
  Json samples_json = Json::array();
  for (double t : nfunction::geometric_grid(t_min, t_max, table_samples)) {
    const auto [B, b] = nfunction::eval_pair(nf, t);
    double Bc = std::numeric_limits<double>::infinity();
    try {
      Bc = nfunction::conjugate(nf, t);
    } catch (const UnboundedConjugateError&) {
    }
    samples_json.push_back({{"t", t}, {"B", num(B)}, {"b", num(b)}, {"Bconj", num(Bc)}});
    csv.add_row({fmt_d(t), fmt_d(B), fmt_d(b), fmt_d(Bc)});
  }
  s["samples"] = samples_json;
  ctx.out.tables.emplace_back("samples.csv", std::move(csv));
}

void run_integrand_validate(Context& ctx) {
  const auto ig = integrand_from_json(ctx.cfg.integrand);
  const int budget = get_int(ctx.cfg.params, "budget", 1000);
  const auto rep = integrand::validate(ig, budget, ctx.cfg.seed);
  auto& s = ctx.out.summary;
  s["label"] = ig.label();
  s["all_pass"] = rep.all_pass();
  s["lower_ratio_min"] = num(rep.lower_ratio_min);
  s["upper_ratio_max"] = num(rep.upper_ratio_max);
  s["worst_convexity_violation"] = num(rep.worst_convexity_violation);
  s["max_gradient_discrepancy"] = num(rep.max_gradient_discrepancy);
  s["gradient_growth_constant"] = num(rep.gradient_growth_constant);
  s["sample_budget"] = rep.sample_budget;
  report::CsvTable csv({"check", "pass", "worst", "detail"});
  Json checks = Json::array();
  for (const auto& c : rep.checks) {
    checks.push_back({{"name", c.name}, {"pass", c.pass}, {"worst", num(c.worst)}, {"detail", c.detail}});
    csv.add_row({c.name, c.pass ? "1" : "0", fmt_d(c.worst), c.detail});
    if (!c.pass) ++ctx.out.flagged;
  }
  s["checks"] = checks;
  ctx.out.tables.emplace_back("checks.csv", std::move(csv));
}

void run_cell_inner(Context& ctx) {
  const auto& p = ctx.cfg.params;
  auto ig = integrand_from_json(ctx.cfg.integrand);
  const auto N = static_cast<std::size_t>(ig.dims().N);
  const cellsolver::CellProblem cp{std::move(ig), cellsolver::Level::inner,
                                   get_vector(p, "y", std::vector<double>(N, 0.0)),
                                   get_vector(p, "xi", {}), get_int(p, "resolution", 256, 4),
                                   solver_params_from_json(p)};
  const auto sol = cellsolver::solve_inner(cp);
  auto& s = ctx.out.summary;
  s["label"] = cp.integrand.label();
  s["xi"] = num_array(cp.xi);
  s["y"] = num_array(cp.frozen_y);
  s["resolution"] = cp.resolution;
  s["solution"] = solution_json(sol);
  if (!sol.converged) ++ctx.out.flagged;
  ctx.out.tables.emplace_back("corrector.csv", field_csv(sol.corrector));
  ctx.fields_out.emplace_back("corrector", sol.corrector);
}

cellsolver::HomTable build_inner_table(const Context& ctx, const integrand::Integrand& ig,
                                       std::span<const double> center) {
  const auto& p = ctx.cfg.params;
  const int res = get_int(p, "resolution", 256, 4);
  const int y_samples = get_int(p, "y_samples", res, 1);
  const auto lat = lattice_from_json(p.contains("lattice") ? p.at("lattice") : Json(),
                                     ig.xi_size(), center);
  return cellsolver::tabulate(ig, lat, y_samples, res, solver_params_from_json(p));
}

void run_cell_outer(Context& ctx) {
  const auto& p = ctx.cfg.params;
  const int res = get_int(p, "resolution", 256, 4);
  const auto xi = get_vector(p, "xi", {});
  auto table = [&] {
    if (p.contains("table")) return cellsolver::load(get_string(p, "table", ""));
    if (ctx.cfg.integrand.is_null()) bad("cell-outer needs 'params.table' or an integrand");
    return build_inner_table(ctx, integrand_from_json(ctx.cfg.integrand), xi);
  }();
  auto& s = ctx.out.summary;
  s["xi"] = num_array(xi);
  if (table.level() == cellsolver::Level::outer) {
    std::vector<double> grad(xi.size());
    const double v = cellsolver::eval_smooth(table, 0, xi, grad);
    if (!std::isfinite(v)) throw RangeError("xi lies outside the outer table lattice");
    s["source"] = "outer-table";
    s["energy"] = num(v);
    s["energy_gradient"] = num_array(grad);
    return;
  }
  if (!table.source) bad("inner table carries no integrand; cannot pose the outer problem");
  const cellsolver::CellProblem cp{*table.source, cellsolver::Level::outer, {}, xi, res,
                                   solver_params_from_json(p)};
  const auto sol = cellsolver::solve_outer(cp, table);
  s["source"] = "inner-table";
  s["label"] = cp.integrand.label();
  s["resolution"] = res;
  s["solution"] = solution_json(sol);
  s["inner_flagged_entries"] = table.flagged_entries();
  if (!sol.converged) ++ctx.out.flagged;
  ctx.out.flagged += table.flagged_entries();
  ctx.out.tables.emplace_back("corrector.csv", field_csv(sol.corrector));
  ctx.fields_out.emplace_back("corrector", sol.corrector);
}

void run_hom_table(Context& ctx) {
  const auto& p = ctx.cfg.params;
  const auto ig = integrand_from_json(ctx.cfg.integrand);
  const auto level = get_string(p, "level", "inner");
  if (level != "inner" && level != "outer") bad("'level' must be 'inner' or 'outer'");
  auto inner = build_inner_table(ctx, ig, {});
  auto& s = ctx.out.summary;
  s["label"] = ig.label();
  s["level"] = level;
  if (level == "inner") {
    s["entries"] = inner.values().size();
    s["flagged_entries"] = inner.flagged_entries();
    ctx.out.flagged += inner.flagged_entries();
    ctx.out.tables.emplace_back("hom_table.csv", table_csv(inner));
    ctx.tables_out.emplace_back("hom_table", std::move(inner));
    return;
  }
  const int outer_res = get_int(p, "outer_resolution", get_int(p, "resolution", 256, 4), 4);
  const auto lat = inner.lattice();
  cellsolver::HomTable outer(cellsolver::Level::outer, ig.dims().N, 1, lat);
  outer.source = ig;
  outer.inner_resolution = inner.inner_resolution;
  outer.inner_params = inner.inner_params;
  for (std::size_t i = 0; i < lat.size(); ++i) {
    const cellsolver::CellProblem cp{ig, cellsolver::Level::outer, {}, lat.point(i), outer_res,
                                     solver_params_from_json(p)};
    const auto sol = cellsolver::solve_outer(cp, inner);
    outer.value(0, i) = sol.energy;
    std::copy(sol.energy_gradient.begin(), sol.energy_gradient.end(), outer.gradient(0, i).begin());
    outer.converged()[i] = sol.converged ? 1 : 0;
  }
  s["entries"] = outer.values().size();
  s["flagged_entries"] = outer.flagged_entries();
  ctx.out.flagged += outer.flagged_entries();
  ctx.out.tables.emplace_back("hom_table.csv", table_csv(outer));
  ctx.tables_out.emplace_back("hom_table", std::move(outer));
}

fields::MacroGrid sequence_grid(const Json& p, const std::vector<double>& eps, int N) {
  fields::MacroGrid g;
  g.N = N;
  g.length = get_positive(p, "length", 1.0);
  const int cpp = get_int(p, "cells_per_period", 16, 8);
  const double emin = *std::min_element(eps.begin(), eps.end());
  const double periods = std::round(g.length / (emin * emin));
  if (periods * cpp > 1u << 26) throw ResolutionError("grid too fine for the finest epsilon");
  g.cells = static_cast<int>(periods) * cpp;
  g.xi0.assign(static_cast<std::size_t>(N), 0.0);
  return g;
}

void run_twoscale(Context& ctx) {
  const auto& p = ctx.cfg.params;
  const int N = get_int(p, "N", 1);
  const auto eps = get_epsilons(p, "eps", "2^-3..2^-7");
  const auto mode = get_string(p, "mode", "pair");
  multiscale::OscillatingSequence seq{generator_from_name(get_string(p, "seq", "cos_z"), N), eps,
                                      sequence_grid(p, eps, N)};
  const int target_res = get_int(p, "target_resolution", 64, 4);
  auto& s = ctx.out.summary;
  s["mode"] = mode;
  s["seq"] = get_string(p, "seq", "cos_z");
  s["epsilons"] = num_array(eps);
  s["cells"] = seq.grid.cells;
  if (mode == "pair") {
    const auto test = generator_from_name(get_string(p, "test", "cos_z"), N);
    const auto series = multiscale::two_scale_pair(seq, test, target_res);
    s["test"] = get_string(p, "test", "cos_z");
    s["target"] = num(series.target);
    s["pairings"] = num_array(series.pairings);
    s["residuals"] = num_array(series.residuals);
    s["limit_estimate"] = num(series.limit_estimate);
    s["fitted_order"] = num(series.fitted_order);
    ctx.out.tables.emplace_back("pairing.csv", multiscale::to_csv(series));
  } else if (mode == "norm") {
    const auto nf = nfunction_from_spec(ctx.cfg.nfunction.empty() ? "square" : ctx.cfg.nfunction);
    const auto series = multiscale::luxemburg_limit_check(seq, nf, target_res);
    s["nfunction"] = nf.label();
    s["target"] = num(series.target);
    s["norms"] = num_array(series.norms);
    report::CsvTable csv({"epsilon", "norm", "target", "residual"});
    for (std::size_t i = 0; i < series.norms.size(); ++i) {
      csv.add_row({fmt_d(series.epsilons[i]), fmt_d(series.norms[i]), fmt_d(series.target),
                   fmt_d(std::abs(series.norms[i] - series.target))});
    }
    ctx.out.tables.emplace_back("norms.csv", std::move(csv));
  } else {
    bad("twoscale 'mode' must be 'pair' or 'norm'");
  }
}

/// Preset corrector triples, as expressions in x, y, z.
std::map<std::string, std::array<std::string, 3>> triple_presets() {
  return {{"quadratic", {"x^2/2", "0", "0"}},
          {"U_sin", {"0", "sin(2*pi*y)/(4*pi^2)", "0"}},
          {"W_cos", {"0", "0", "-cos(2*pi*z)/(4*pi^2)"}},
          {"mixed", {"0", "x*sin(2*pi*y)/(4*pi^2)", "0"}}};
}

void run_corrector_theorem1(Context& ctx) {
  const auto& p = ctx.cfg.params;
  std::array<std::string, 3> src{"0", "0", "0"};
  if (p.contains("triple")) {
    const auto presets = triple_presets();
    const auto name = get_string(p, "triple", "");
    const auto it = presets.find(name);
    if (it == presets.end()) bad("unknown corrector triple '" + name + "'");
    src = it->second;
  }
  src[0] = get_string(p, "u", src[0]);
  src[1] = get_string(p, "U", src[1]);
  src[2] = get_string(p, "W", src[2]);
  const Expression u(src[0], {"x"});
  const Expression U(src[1], {"x", "y"});
  const Expression W(src[2], {"x", "y", "z"});
  multiscale::CorrectorTriple ct;
  ct.u = [u](double x) { return u(std::array{x}); };
  ct.U = [U](double x, double y) { return U(std::array{x, y}); };
  ct.W = [W](double x, double y, double z) { return W(std::array{x, y, z}); };
  const auto eps = get_epsilons(p, "eps", "2^-3..2^-5");
  const auto test_name = get_string(p, "test", "one");
  const auto rep = multiscale::verify_theorem1(ct, eps, generator_from_name(test_name, 1),
                                               get_positive(p, "length", 1.0),
                                               get_int(p, "cells_per_period", 64, 8),
                                               get_int(p, "target_resolution", 64, 4));
  auto& s = ctx.out.summary;
  s["mode"] = "theorem1";
  s["u"] = src[0];
  s["U"] = src[1];
  s["W"] = src[2];
  s["test"] = test_name;
  s["cells_per_period"] = rep.cells_per_period;
  s["target"] = num(rep.series.target);
  s["pairings"] = num_array(rep.series.pairings);
  s["residuals"] = num_array(rep.series.residuals);
  s["fitted_order"] = num(rep.series.fitted_order);
  ctx.out.tables.emplace_back("theorem1.csv", multiscale::to_csv(rep.series));
}

void run_corrector_recovery(Context& ctx) {
  const auto& p = ctx.cfg.params;
  const auto ig = integrand_from_json(ctx.cfg.integrand);
  if (ig.order() != 1) bad("recovery mode needs an order-1 integrand");
  const int N = ig.dims().N;
  const auto xi0 = get_vector(p, "xi0", std::vector<double>(ig.xi_size(), 1.0));
  if (xi0.size() != ig.xi_size()) bad("'xi0' has the wrong number of components");
  const int res = get_int(p, "resolution", 256, 4);
  const auto eps = get_epsilons(p, "eps", "2^-3..2^-6");
  const int cpp = get_int(p, "cells_per_period", 16, 8);
  const auto sp = solver_params_from_json(p);

  auto inner = build_inner_table(ctx, ig, xi0);
  const auto corr = cellsolver::build_correctors(ig, xi0, res, inner, sp);
  fields::MacroGrid base;
  base.N = N;
  base.length = get_positive(p, "length", 1.0);
  base.xi0 = xi0;
  const double hom = base.measure() * corr.outer.energy;

  report::CsvTable csv({"epsilon", "F_recovery", "F_eps_min", "hom_value", "recovery_gap",
                        "gradient_defect", "recovery_distance"});
  Json rows = Json::array();
  for (double e : eps) {
    auto grid = base;
    grid.cells = static_cast<int>(std::round(grid.length / (e * e))) * cpp;
    fields::cells_per_fast_period(grid, e);
    const auto coords = gammaharness::node_coordinates(grid);
    const auto nodes = coords.size() / static_cast<std::size_t>(N);
    std::vector<double> u(nodes);
    for (std::size_t i = 0; i < nodes; ++i) {
      u[i] = grid.boundary_value(std::span(coords).subspan(i * static_cast<std::size_t>(N),
                                                            static_cast<std::size_t>(N)));
    }
    const auto rec = multiscale::build_recovery_s1(grid, u, corr.phi, corr.psi, e);
    const double f_rec = gammaharness::energy_of(ig, grid, e, rec);
    const auto run = gammaharness::solve_epsilon(ig, grid, e, sp);
    if (!run.converged) ++ctx.out.flagged;
    const double defect = N == 1 ? multiscale::recovery_gradient_defect(grid, u, corr.phi, corr.psi, e)
                                 : std::numeric_limits<double>::quiet_NaN();
    std::vector<double> diff(nodes);
    for (std::size_t i = 0; i < nodes; ++i) diff[i] = rec[i] - u[i];
    const double dist = nfunction::luxemburg_norm(
        {diff, {}, grid.measure(), integrand::square_nfunction()});
    const double gap = (f_rec - hom) / hom;
    csv.add_row({fmt_d(e), fmt_d(f_rec), fmt_d(run.energy), fmt_d(hom), fmt_d(gap), fmt_d(defect),
                 fmt_d(dist)});
    rows.push_back({{"epsilon", e},
                    {"F_recovery", num(f_rec)},
                    {"F_eps_min", num(run.energy)},
                    {"recovery_gap", num(gap)},
                    {"gradient_defect", num(defect)},
                    {"recovery_distance", num(dist)},
                    {"converged", run.converged}});
  }
  auto& s = ctx.out.summary;
  s["mode"] = "recovery";
  s["label"] = ig.label();
  s["xi0"] = num_array(xi0);
  s["hom_value"] = num(hom);
  s["correctors_converged"] = corr.all_converged;
  s["runs"] = rows;
  if (!corr.all_converged) ++ctx.out.flagged;
  ctx.out.tables.emplace_back("recovery.csv", std::move(csv));
  ctx.fields_out.emplace_back("phi", corr.phi);
  ctx.fields_out.emplace_back("psi", corr.psi);
}

void run_corrector(Context& ctx) {
  const auto mode = get_string(ctx.cfg.params, "mode", "recovery");
  if (mode == "recovery") return run_corrector_recovery(ctx);
  if (mode == "theorem1") return run_corrector_theorem1(ctx);
  bad("corrector 'mode' must be 'recovery' or 'theorem1'");
}

void run_gamma_study(Context& ctx) {
  const auto& p = ctx.cfg.params;
  const auto ig = integrand_from_json(ctx.cfg.integrand);
  fields::MacroGrid grid;
  grid.N = ig.dims().N;
  grid.order = ig.order();
  grid.targets = ig.dims().d;
  grid.length = get_positive(p, "length", 1.0);
  grid.xi0 = get_vector(p, "xi0", std::vector<double>(ig.xi_size(), 1.0));
  if (grid.xi0.size() != ig.xi_size()) bad("'xi0' has the wrong number of components");
  const auto eps = get_epsilons(p, "eps", "2^-2..2^-6");
  const int cpp = get_int(p, "cells_per_period", 16, 8);
  const auto sp = solver_params_from_json(p);

  gammaharness::ConvergenceStudy study;
  std::string hom_source;
  if (p.contains("hom_value")) {
    hom_source = "given";
    study = gammaharness::convergence_study(ig, grid, eps, cpp, get_real(p, "hom_value", 0.0), sp);
  } else {
    auto table = p.contains("table") ? cellsolver::load(get_string(p, "table", ""))
                                     : build_inner_table(ctx, ig, grid.xi0);
    hom_source = p.contains("table") ? "table" : "computed";
    study = gammaharness::convergence_study(ig, grid, eps, cpp, table,
                                            get_int(p, "outer_resolution", 256, 4), sp);
    ctx.out.flagged += table.flagged_entries();
  }
  for (const auto& r : study.runs) {
    if (!r.converged) ++ctx.out.flagged;
  }
  auto& s = ctx.out.summary;
  s["label"] = ig.label();
  s["order"] = ig.order();
  s["xi0"] = num_array(grid.xi0);
  s["hom_source"] = hom_source;
  s["hom_value"] = num(study.homogenized_value);
  s["epsilons"] = num_array(eps);
  s["residuals"] = num_array(study.residuals);
  s["fitted_rate"] = num(study.fitted_rate);
  bool decreasing = true;
  for (std::size_t i = 1; i < study.residuals.size(); ++i) {
    decreasing = decreasing && study.residuals[i] < study.residuals[i - 1];
  }
  s["residuals_strictly_decreasing"] = decreasing;
  ctx.out.tables.emplace_back("study.csv", gammaharness::to_csv(study));
}

} // namespace

// ---------------------------------------------------------------------------

ExperimentConfig ExperimentConfig::from_json(const Json& j) {
  if (!j.is_object()) bad("config must be a JSON object");
  static const std::vector<std::string> known{"kind",   "seed",   "integrand",
                                              "nfunction", "params", "output"};
  for (const auto& [key, _] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      bad("unknown config key '" + key + "'");
    }
  }
  ExperimentConfig c;
  if (!j.contains("kind") || !j.at("kind").is_string()) bad("config needs a string 'kind'");
  c.kind = j.at("kind").get<std::string>();
  if (std::find(kKinds.begin(), kKinds.end(), c.kind) == kKinds.end()) {
    bad("unknown kind '" + c.kind + "'");
  }
  if (j.contains("seed")) {
    const auto& sj = j.at("seed");
    if (!sj.is_number_integer() || (!sj.is_number_unsigned() && sj.get<std::int64_t>() < 0)) {
      bad("'seed' must be a non-negative integer");
    }
    c.seed = j.at("seed").get<std::uint64_t>();
  }
  if (j.contains("integrand")) c.integrand = j.at("integrand");
  c.nfunction = get_string(j, "nfunction", "");
  if (j.contains("params")) {
    if (!j.at("params").is_object()) bad("'params' must be an object");
    c.params = j.at("params");
  }
  if (j.contains("output")) {
    const auto& o = j.at("output");
    if (!o.is_object()) bad("'output' must be an object");
    c.output_dir = get_string(o, "dir", ".");
    c.output_prefix = get_string(o, "prefix", "");
  }

  // Parse-time validation of everything that can be checked without solving.
  const bool needs_integrand = c.kind == "integrand-validate" || c.kind == "cell-inner" ||
                               c.kind == "hom-table" || c.kind == "gamma-study" ||
                               (c.kind == "corrector" &&
                                get_string(c.params, "mode", "recovery") == "recovery") ||
                               (c.kind == "cell-outer" && !c.params.contains("table"));
  if (needs_integrand && c.integrand.is_null()) bad("kind '" + c.kind + "' needs an integrand");
  if (!c.integrand.is_null()) (void)integrand_from_json(c.integrand);
  if (!c.nfunction.empty()) (void)nfunction_from_spec(c.nfunction);
  (void)solver_params_from_json(c.params);
  if ((c.kind == "cell-inner" || c.kind == "cell-outer") && !c.params.contains("xi")) {
    bad("kind '" + c.kind + "' needs 'params.xi'");
  }
  if (c.params.contains("eps")) (void)get_epsilons(c.params, "eps", "");
  return c;
}

Json ExperimentConfig::to_json() const {
  Json j;
  j["kind"] = kind;
  j["seed"] = seed;
  if (!integrand.is_null()) j["integrand"] = integrand;
  if (!nfunction.empty()) j["nfunction"] = nfunction;
  j["params"] = params;
  j["output"] = {{"dir", output_dir.string()}, {"prefix", output_prefix}};
  return j;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    bad(std::string("malformed config: ") + e.what());
  }
  return ExperimentConfig::from_json(j);
}

solver::Params solver_params_from_json(const Json& params) {
  solver::Params sp;
  if (!params.contains("solver")) return sp;
  const auto& s = params.at("solver");
  if (!s.is_object()) bad("'solver' must be an object");
  sp.max_iter = get_int(s, "max_iter", sp.max_iter);
  sp.grad_tol = get_positive(s, "grad_tol", sp.grad_tol);
  sp.energy_tol = get_positive(s, "energy_tol", sp.energy_tol);
  return sp;
}

integrand::Integrand integrand_from_json(const Json& spec) {
  if (spec.is_string()) return integrand::catalog(spec.get<std::string>());
  if (!spec.is_object()) bad("integrand spec must be a string or an object");
  if (spec.contains("catalog")) {
    integrand::Params params;
    if (spec.contains("params")) {
      const auto& p = spec.at("params");
      if (!p.is_object()) bad("integrand 'params' must be an object");
      for (const auto& [k, v] : p.items()) {
        params[k] = v.is_string() ? v.get<std::string>() : v.dump();
      }
    }
    return integrand::catalog(get_string(spec, "catalog", ""), params);
  }
  if (!spec.contains("coefficient")) bad("integrand spec needs 'catalog' or 'coefficient'");
  integrand::Dims dims;
  dims.N = get_int(spec, "N", 1);
  dims.d = get_int(spec, "d", 1);
  const int order = get_int(spec, "order", 1);
  if (order != 1 && order != 2) bad("integrand 'order' must be 1 or 2");
  const auto profile = get_string(spec, "profile", "quadratic");
  const Json g = spec.contains("growth") ? spec.at("growth") : Json::object();
  if (!g.is_object()) bad("integrand 'growth' must be an object");
  const integrand::Growth growth{get_positive(g, "c1", 1.0), get_positive(g, "c2", 1.0),
                                 nfunction_from_spec(get_string(g, "nf", "power:2"))};
  const double delta = get_real(spec, "delta", 0.0);
  if (delta < 0.0) bad("'delta' must be non-negative");
  return integrand::make_custom(get_string(spec, "coefficient", ""), profile, order, dims, growth,
                                delta);
}

std::vector<double> parse_real_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    if (b == std::string::npos) bad("empty entry in list '" + text + "'");
    const auto e = item.find_last_not_of(" \t");
    const auto trimmed = item.substr(b, e - b + 1);
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(trimmed, &used);
    } catch (const std::exception&) {
      bad("not a number: '" + trimmed + "'");
    }
    if (used != trimmed.size()) bad("not a number: '" + trimmed + "'");
    out.push_back(v);
  }
  if (out.empty()) bad("empty list");
  return out;
}

namespace {

/// "2^-3" -> -3.
int dyadic_exponent(const std::string& s) {
  if (s.rfind("2^", 0) != 0) bad("expected 2^k, got '" + s + "'");
  const auto rest = s.substr(2);
  std::size_t used = 0;
  int k = 0;
  try {
    k = std::stoi(rest, &used);
  } catch (const std::exception&) {
    bad("bad exponent in '" + s + "'");
  }
  if (used != rest.size()) bad("bad exponent in '" + s + "'");
  return k;
}

} // namespace

std::vector<double> parse_epsilon_list(const std::string& text) {
  const auto dots = text.find("..");
  if (dots == std::string::npos) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (item.rfind("2^", 0) == 0) {
        out.push_back(std::ldexp(1.0, dyadic_exponent(item)));
      } else {
        const auto v = parse_real_list(item);
        out.insert(out.end(), v.begin(), v.end());
      }
    }
    if (out.empty()) bad("empty epsilon list");
    return out;
  }
  const int a = dyadic_exponent(text.substr(0, dots));
  const int b = dyadic_exponent(text.substr(dots + 2));
  std::vector<double> out;
  const int step = b >= a ? 1 : -1;
  for (int k = a;; k += step) {
    out.push_back(std::ldexp(1.0, k));
    if (k == b) break;
  }
  return out;
}

multiscale::Generator generator_from_name(const std::string& name, int N) {
  static const std::map<std::string, std::string> named{
      {"one", "1"},
      {"cos_z", "cos(2*pi*z1)"},
      {"sin_z", "sin(2*pi*z1)"},
      {"cos_y", "cos(2*pi*y1)"},
      {"sin_y", "sin(2*pi*y1)"},
      {"cos_y_cos_z", "cos(2*pi*y1)*cos(2*pi*z1)"},
      {"two_plus_cos_y", "2+cos(2*pi*y1)"},
      {"x_sin_y", "x1*sin(2*pi*y1)"},
      {"x", "x1"}};
  std::string source;
  if (name.rfind("expr:", 0) == 0) {
    source = name.substr(5);
  } else {
    const auto it = named.find(name);
    if (it == named.end()) bad("unknown generator '" + name + "'");
    source = it->second;
  }
  if (N < 1 || N > 3) bad("generators need 1 <= N <= 3");
  std::vector<std::string> vars;
  for (const char* prefix : {"x", "y", "z"}) {
    for (int a = 1; a <= N; ++a) vars.push_back(fmt::format("{}{}", prefix, a));
  }
  const Expression expr(source, vars);
  const auto n = static_cast<std::size_t>(N);
  return [expr, n](std::span<const double> x, std::span<const double> y, std::span<const double> z) {
    std::array<double, 9> v{};
    for (std::size_t a = 0; a < n; ++a) {
      v[a] = x[a];
      v[n + a] = y[a];
      v[2 * n + a] = z[a];
    }
    return expr(std::span<const double>(v.data(), 3 * n));
  };
}

RunResult run(const ExperimentConfig& config) {
  RunResult out;
  std::vector<std::pair<std::string, fields::PeriodicField>> fields_out;
  std::vector<std::pair<std::string, cellsolver::HomTable>> tables_out;
  Context ctx{config, out, fields_out, tables_out};
  out.summary["kind"] = config.kind;
  out.summary["seed"] = config.seed;
  if (config.kind == "nfunction-check") run_nfunction_check(ctx);
  else if (config.kind == "integrand-validate") run_integrand_validate(ctx);
  else if (config.kind == "cell-inner") run_cell_inner(ctx);
  else if (config.kind == "cell-outer") run_cell_outer(ctx);
  else if (config.kind == "hom-table") run_hom_table(ctx);
  else if (config.kind == "twoscale") run_twoscale(ctx);
  else if (config.kind == "corrector") run_corrector(ctx);
  else if (config.kind == "gamma-study") run_gamma_study(ctx);
  else bad("unknown kind '" + config.kind + "'");
  out.summary["flagged"] = out.flagged;
  Json tables = Json::array();
  for (const auto& [name, _] : out.tables) tables.push_back(name);
  out.summary["tables"] = tables;

  // Binary artifacts are written eagerly; they are not part of the summary round trip.
  const auto dir = config.output_dir;
  if (!fields_out.empty() || !tables_out.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory '" + dir.string() + "'");
  }
  for (const auto& [name, f] : fields_out) fields::write(f, dir / (config.output_prefix + name));
  for (const auto& [name, t] : tables_out) cellsolver::save(t, dir / (config.output_prefix + name));
  return out;
}

std::vector<std::filesystem::path> emit_report(const RunResult& result,
                                               const ExperimentConfig& config) {
  std::vector<std::filesystem::path> written;
  const auto summary = config.output_dir / (config.output_prefix + "summary.json");
  report::write_text(summary, result.summary.dump(2) + "\n");
  written.push_back(summary);
  for (const auto& [name, table] : result.tables) {
    const auto path = config.output_dir / (config.output_prefix + name);
    table.write(path);
    written.push_back(path);
  }
  return written;
}

} // namespace reithom::experiment
