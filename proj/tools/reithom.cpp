// Command-line driver. Every subcommand is translated into an experiment
// config and executed through experiment::run, so `run <config>` and the
// direct subcommands share one code path.

#include "reithom/error.hpp"
#include "reithom/experiment.hpp"
#include "reithom/kernels.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

using reithom::experiment::Json;
namespace ex = reithom::experiment;

constexpr int kExitUsage = 64;
constexpr int kExitInternal = 70;

void print_error(std::string_view code, int exit_code, const std::string& message) {
  Json err;
  err["error"] = {{"code", code}, {"exit_code", exit_code}, {"message", message}};
  std::cerr << err.dump() << '\n';
}

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("reithom");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("REITHOM_LOG")) {
    spdlog::set_level(spdlog::level::from_str(env));
  }
}

/// "--integrand name" plus "--param k=v" pairs, or an inline JSON object.
Json integrand_spec(const std::string& name, const std::vector<std::string>& params) {
  if (!name.empty() && name.front() == '{') {
    try {
      return Json::parse(name);
    } catch (const nlohmann::json::parse_error& e) {
      throw reithom::ConfigError(std::string("malformed integrand JSON: ") + e.what());
    }
  }
  Json spec;
  spec["catalog"] = name;
  Json p = Json::object();
  for (const auto& kv : params) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw reithom::ConfigError("--param expects key=value, got '" + kv + "'");
    }
    p[kv.substr(0, eq)] = kv.substr(eq + 1);
  }
  spec["params"] = p;
  return spec;
}

/// "lo:hi:count" for a one-component lattice.
Json lattice_spec(const std::string& text) {
  const auto a = text.find(':');
  const auto b = text.find(':', a == std::string::npos ? a : a + 1);
  if (a == std::string::npos || b == std::string::npos) {
    throw reithom::ConfigError("--lattice expects lo:hi:count");
  }
  const auto lo = ex::parse_real_list(text.substr(0, a));
  const auto hi = ex::parse_real_list(text.substr(a + 1, b - a - 1));
  const auto n = ex::parse_real_list(text.substr(b + 1));
  return {{"range", {lo[0], hi[0]}}, {"count", static_cast<int>(n[0])}};
}

struct Globals {
  int jobs = 0;
  bool strict = false;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
};

int execute(Json config_json, const Globals& g, const std::string& primary_out = {}) {
  auto cfg = ex::ExperimentConfig::from_json(config_json);
  if (g.seed) cfg.seed = *g.seed;
  if (!g.out_dir.empty()) cfg.output_dir = g.out_dir;
  spdlog::info("running {} (seed {})", cfg.kind, cfg.seed);
  auto result = ex::run(cfg);
  if (!primary_out.empty() && !result.tables.empty()) result.tables.front().first = primary_out;
  const auto files = ex::emit_report(result, cfg);
  if (result.flagged > 0) {
    spdlog::warn("{} result(s) flagged (not converged or failed checks)", result.flagged);
    if (g.strict) {
      print_error(reithom::to_string(reithom::ErrorCode::non_convergence),
                  static_cast<int>(reithom::ErrorCode::non_convergence),
                  std::to_string(result.flagged) + " flagged result(s) under --strict");
      return static_cast<int>(reithom::ErrorCode::non_convergence);
    }
  }
  Json done;
  done["status"] = "ok";
  done["kind"] = cfg.kind;
  done["flagged"] = result.flagged;
  done["files"] = Json::array();
  for (const auto& f : files) done["files"].push_back(f.string());
  std::cout << done.dump(2) << '\n';
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Reiterated homogenization toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  std::uint64_t seed = 0;
  app.add_option("--jobs", g.jobs, "Worker threads (0 = runtime default)")->check(CLI::NonNegativeNumber);
  app.add_flag("--strict", g.strict, "Fail when any result is flagged as not converged");
  auto* seed_opt = app.add_option("--seed", seed, "Seed overriding the config");
  app.add_option("--out-dir", g.out_dir, "Output directory overriding the config");

  std::function<Json()> build;
  std::string primary_out;

  // run <config>
  std::string config_path;
  auto* run_cmd = app.add_subcommand("run", "Execute an experiment config");
  run_cmd->add_option("config", config_path, "Config JSON file")->required();
  run_cmd->callback([&] {
    build = [&] { return ex::load_config(config_path).to_json(); };
  });

  // nfunction check
  auto* nf_cmd = app.add_subcommand("nfunction", "N-function tools")->require_subcommand(1);
  std::string nf_spec = "power:2";
  double t_min = 1e-2, t_max = 1e3;
  int nf_samples = 64;
  auto* nf_check = nf_cmd->add_subcommand("check", "Delta2 check, conjugate and samples");
  nf_check->add_option("--nf", nf_spec, "Catalog spec: power:p, plog:p,q, exp")->capture_default_str();
  nf_check->add_option("--t-min", t_min)->capture_default_str();
  nf_check->add_option("--t-max", t_max)->capture_default_str();
  nf_check->add_option("--samples", nf_samples)->capture_default_str();
  nf_check->callback([&] {
    build = [&] {
      return Json{{"kind", "nfunction-check"},
                  {"nfunction", nf_spec},
                  {"params", {{"t_min", t_min}, {"t_max", t_max}, {"samples", nf_samples}}}};
    };
  });

  // Shared integrand options.
  std::string ig_name;
  std::vector<std::string> ig_params;
  auto add_integrand = [&](CLI::App* cmd, bool required) {
    auto* o = cmd->add_option("--integrand", ig_name, "Catalog name or inline JSON spec");
    if (required) o->required();
    cmd->add_option("--param", ig_params, "Catalog parameter key=value (repeatable)");
  };

  // integrand validate
  auto* ig_cmd = app.add_subcommand("integrand", "Integrand tools")->require_subcommand(1);
  int budget = 1000;
  auto* ig_validate = ig_cmd->add_subcommand("validate", "Sampled hypothesis checks");
  add_integrand(ig_validate, true);
  ig_validate->add_option("--budget", budget)->capture_default_str();
  ig_validate->callback([&] {
    build = [&] {
      return Json{{"kind", "integrand-validate"},
                  {"integrand", integrand_spec(ig_name, ig_params)},
                  {"params", {{"budget", budget}}}};
    };
  });

  // cell inner / outer / table
  auto* cell_cmd = app.add_subcommand("cell", "Cell problems")->require_subcommand(1);
  std::string xi_text, y_text, table_path, lattice_text, level = "inner";
  int res = 256, y_samples = 0;
  auto* cell_inner = cell_cmd->add_subcommand("inner", "Inner cell problem at frozen y");
  add_integrand(cell_inner, true);
  cell_inner->add_option("--xi", xi_text, "Comma-separated xi")->required();
  cell_inner->add_option("--y", y_text, "Comma-separated frozen y (default 0)");
  cell_inner->add_option("--res", res)->capture_default_str();
  cell_inner->callback([&] {
    build = [&] {
      Json p{{"xi", ex::parse_real_list(xi_text)}, {"resolution", res}};
      if (!y_text.empty()) p["y"] = ex::parse_real_list(y_text);
      return Json{{"kind", "cell-inner"}, {"integrand", integrand_spec(ig_name, ig_params)}, {"params", p}};
    };
  });
  auto* cell_outer = cell_cmd->add_subcommand("outer", "Outer cell problem");
  add_integrand(cell_outer, false);
  cell_outer->add_option("--table", table_path, "Saved table base path");
  cell_outer->add_option("--xi", xi_text, "Comma-separated xi")->required();
  cell_outer->add_option("--lattice", lattice_text, "lo:hi:count when tabulating on the fly");
  cell_outer->add_option("--res", res)->capture_default_str();
  cell_outer->callback([&] {
    build = [&] {
      Json c{{"kind", "cell-outer"}};
      Json p{{"xi", ex::parse_real_list(xi_text)}, {"resolution", res}};
      if (!table_path.empty()) p["table"] = table_path;
      if (!ig_name.empty()) c["integrand"] = integrand_spec(ig_name, ig_params);
      if (!lattice_text.empty()) p["lattice"] = lattice_spec(lattice_text);
      c["params"] = p;
      return c;
    };
  });
  auto* cell_table = cell_cmd->add_subcommand("table", "Tabulate f_hom (or fbar_hom) on a lattice");
  add_integrand(cell_table, true);
  cell_table->add_option("--lattice", lattice_text, "lo:hi:count");
  cell_table->add_option("--y-samples", y_samples, "Y samples per axis (default: --res)");
  cell_table->add_option("--res", res)->capture_default_str();
  cell_table->add_option("--level", level)->check(CLI::IsMember({"inner", "outer"}))->capture_default_str();
  cell_table->callback([&] {
    build = [&] {
      Json p{{"resolution", res}, {"level", level}};
      if (y_samples > 0) p["y_samples"] = y_samples;
      if (!lattice_text.empty()) p["lattice"] = lattice_spec(lattice_text);
      return Json{{"kind", "hom-table"}, {"integrand", integrand_spec(ig_name, ig_params)}, {"params", p}};
    };
  });

  // twoscale pair / norm
  auto* ts_cmd = app.add_subcommand("twoscale", "Reiterated two-scale checks")->require_subcommand(1);
  std::string seq = "cos_z", test = "cos_z", eps_text;
  int cpp = 16, dim = 1;
  auto* ts_pair = ts_cmd->add_subcommand("pair", "Pairing against a test function");
  ts_pair->add_option("--seq", seq, "Generator name or expr:<expression>")->capture_default_str();
  ts_pair->add_option("--test", test, "Test name or expr:<expression>")->capture_default_str();
  ts_pair->add_option("--eps", eps_text, "e.g. 2^-3..2^-7");
  ts_pair->add_option("--cells-per-period", cpp)->capture_default_str();
  ts_pair->add_option("--N", dim)->capture_default_str();
  ts_pair->callback([&] {
    build = [&] {
      Json p{{"mode", "pair"}, {"seq", seq}, {"test", test}, {"cells_per_period", cpp}, {"N", dim}};
      if (!eps_text.empty()) p["eps"] = eps_text;
      return Json{{"kind", "twoscale"}, {"params", p}};
    };
  });
  auto* ts_norm = ts_cmd->add_subcommand("norm", "Luxemburg norms along the sequence");
  std::string norm_nf = "square";
  ts_norm->add_option("--seq", seq)->capture_default_str();
  ts_norm->add_option("--nf", norm_nf)->capture_default_str();
  ts_norm->add_option("--eps", eps_text);
  ts_norm->add_option("--cells-per-period", cpp)->capture_default_str();
  ts_norm->callback([&] {
    build = [&] {
      Json p{{"mode", "norm"}, {"seq", seq}, {"cells_per_period", cpp}};
      if (!eps_text.empty()) p["eps"] = eps_text;
      return Json{{"kind", "twoscale"}, {"nfunction", norm_nf}, {"params", p}};
    };
  });

  // corrector recovery / theorem1
  auto* corr_cmd = app.add_subcommand("corrector", "Corrector sequences")->require_subcommand(1);
  std::string xi0_text = "1", triple = "U_sin", u_src, U_src, W_src;
  auto* corr_rec = corr_cmd->add_subcommand("recovery", "Recovery sequence u + eps phi + eps^2 psi");
  add_integrand(corr_rec, true);
  corr_rec->add_option("--xi0", xi0_text)->capture_default_str();
  corr_rec->add_option("--eps", eps_text);
  corr_rec->add_option("--res-per-period", cpp)->capture_default_str();
  corr_rec->add_option("--res", res, "Cell resolution")->capture_default_str();
  corr_rec->callback([&] {
    build = [&] {
      Json p{{"mode", "recovery"}, {"xi0", ex::parse_real_list(xi0_text)},
             {"cells_per_period", cpp}, {"resolution", res}};
      if (!eps_text.empty()) p["eps"] = eps_text;
      return Json{{"kind", "corrector"}, {"integrand", integrand_spec(ig_name, ig_params)}, {"params", p}};
    };
  });
  auto* corr_t1 = corr_cmd->add_subcommand("theorem1", "Hessian decomposition check");
  int t1_cpp = 64;
  corr_t1->add_option("--triple", triple, "quadratic | U_sin | W_cos | mixed")->capture_default_str();
  corr_t1->add_option("--u", u_src, "u(x) expression");
  corr_t1->add_option("--U", U_src, "U(x, y) expression");
  corr_t1->add_option("--W", W_src, "W(x, y, z) expression");
  corr_t1->add_option("--test", test, "Test name or expr:<expression>");
  corr_t1->add_option("--eps", eps_text);
  corr_t1->add_option("--cells-per-period", t1_cpp)->capture_default_str();
  corr_t1->callback([&] {
    build = [&] {
      Json p{{"mode", "theorem1"}, {"triple", triple}, {"test", test}, {"cells_per_period", t1_cpp}};
      if (!u_src.empty()) p["u"] = u_src;
      if (!U_src.empty()) p["U"] = U_src;
      if (!W_src.empty()) p["W"] = W_src;
      if (!eps_text.empty()) p["eps"] = eps_text;
      return Json{{"kind", "corrector"}, {"params", p}};
    };
  });

  // gamma study
  auto* gamma_cmd = app.add_subcommand("gamma", "Gamma-convergence studies")->require_subcommand(1);
  auto* gamma_study = gamma_cmd->add_subcommand("study", "min F_eps against the homogenized minimum");
  std::optional<double> hom_value;
  add_integrand(gamma_study, true);
  gamma_study->add_option("--xi0", xi0_text)->capture_default_str();
  gamma_study->add_option("--eps", eps_text, "e.g. 2^-2..2^-6");
  gamma_study->add_option("--res-per-period", cpp)->capture_default_str();
  gamma_study->add_option("--hom-value", hom_value, "Known homogenized minimum (skips tabulation)");
  gamma_study->add_option("--table", table_path, "Saved table base path");
  gamma_study->add_option("--out", primary_out, "CSV path (relative to --out-dir)");
  gamma_study->callback([&] {
    build = [&] {
      Json p{{"xi0", ex::parse_real_list(xi0_text)}, {"cells_per_period", cpp}};
      if (!eps_text.empty()) p["eps"] = eps_text;
      if (hom_value) p["hom_value"] = *hom_value;
      if (!table_path.empty()) p["table"] = table_path;
      return Json{{"kind", "gamma-study"}, {"integrand", integrand_spec(ig_name, ig_params)}, {"params", p}};
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("usage", kExitUsage, e.what());
    return kExitUsage;
  }
  if (*seed_opt) g.seed = seed;
  if (g.jobs > 0) reithom::kernels::set_thread_count(g.jobs);

  try {
    return execute(build(), g, primary_out);
  } catch (const reithom::Error& e) {
    const int code = static_cast<int>(e.code());
    print_error(reithom::to_string(e.code()), code, e.what());
    return code;
  } catch (const std::exception& e) {
    print_error("internal", kExitInternal, e.what());
    return kExitInternal;
  }
}
