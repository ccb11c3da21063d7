#pragma once

// Configuration-driven runs. A config is a JSON object:
//
//   {
//     "kind": "nfunction-check" | "integrand-validate" | "cell-inner" | "cell-outer" |
//             "hom-table" | "twoscale" | "corrector" | "gamma-study",
//     "seed": 1,
//     "integrand": {"catalog": "quadratic_laminate", "params": {"p": 3}}
//                | {"coefficient": "<expr in y1.., z1..>", "profile": "power:3",
//                   "order": 1, "N": 1, "delta": 0,
//                   "growth": {"c1": 0.3, "c2": 1, "nf": "power:3"}},
//     "nfunction": "power:3",
//     "params": { kind-specific, see README },
//     "output": {"dir": "out", "prefix": ""}
//   }
//
// Every run writes <prefix>summary.json plus its CSV tables into the output dir.

#include "reithom/integrand.hpp"
#include "reithom/minimizer.hpp"
#include "reithom/multiscale.hpp"
#include "reithom/report.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace reithom::experiment {

using Json = nlohmann::ordered_json;

struct ExperimentConfig {
  std::string kind;
  std::uint64_t seed = 1;
  Json integrand;
  std::string nfunction;
  Json params = Json::object();
  std::filesystem::path output_dir = ".";
  std::string output_prefix;

  /// Parses and validates (kind, types, positive tolerances, integrand
  /// expressions). Throws ConfigError on schema violations.
  static ExperimentConfig from_json(const Json& j);
  Json to_json() const;
};

ExperimentConfig load_config(const std::filesystem::path& path);

struct RunResult {
  Json summary = Json::object();
  std::vector<std::pair<std::string, report::CsvTable>> tables;
  /// Number of solver results flagged as not converged.
  std::size_t flagged = 0;
};

/// Executes a config. Deterministic given the config (including its seed).
RunResult run(const ExperimentConfig& config);

/// Writes summary.json and every table into the config's output dir;
/// returns the written paths.
std::vector<std::filesystem::path> emit_report(const RunResult& result, const ExperimentConfig& config);

/// Builds an integrand from its JSON spec.
integrand::Integrand integrand_from_json(const Json& spec);

/// "2^-3..2^-7" (dyadic range, both ends included) or a comma list of reals.
std::vector<double> parse_epsilon_list(const std::string& text);

/// Comma-separated reals.
std::vector<double> parse_real_list(const std::string& text);

/// Named or "expr:<expression in x1.., y1.., z1..>" generators and tests.
multiscale::Generator generator_from_name(const std::string& name, int N = 1);

solver::Params solver_params_from_json(const Json& params);

} // namespace reithom::experiment
