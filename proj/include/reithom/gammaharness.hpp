#pragma once

#include "reithom/cellsolver.hpp"
#include "reithom/fields.hpp"
#include "reithom/integrand.hpp"
#include "reithom/minimizer.hpp"
#include "reithom/report.hpp"

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace reithom::gammaharness {

/// One direct minimization of F_eps on the macro box with pinned boundary data.
struct EpsilonRun {
  double epsilon = 0.0;
  fields::MacroGrid grid;
  /// Node values: (cells + 1)^N nodes for order 1, cells + 3 nodes (one ghost
  /// layer outside each end) for the 1-D order-2 problem. Targets innermost.
  std::vector<double> minimizer;
  double energy = 0.0;
  double boundary_data_energy = 0.0;
  /// Closed-form minimum of the same discrete problem, when one is known.
  std::optional<double> oracle;
  int iterations = 0;
  double final_grad_norm = 0.0;
  bool converged = false;
  std::string stop_reason;
};

struct ConvergenceStudy {
  std::vector<EpsilonRun> runs;
  double homogenized_value = 0.0;
  std::vector<double> residuals;
  /// Least-squares slope of log residual against log epsilon (NaN with < 2 usable points).
  double fitted_rate = 0.0;
};

/// Minimizes F_eps(u) = int f(x/eps, x/eps^2, D^s u) dx. Order 1 uses cell-center
/// Q1 gradients in N <= 3; order 2 uses nodal second differences with
/// trapezoid weights in 1-D only.
EpsilonRun solve_epsilon(const integrand::Integrand& ig, const fields::MacroGrid& grid,
                         double epsilon, const solver::Params& params = {});

/// F_eps evaluated on given node values (same discretization as solve_epsilon).
double energy_of(const integrand::Integrand& ig, const fields::MacroGrid& grid, double epsilon,
                 std::span<const double> nodes);

/// Node coordinates of the direct problem (one row of N per node).
std::vector<double> node_coordinates(const fields::MacroGrid& grid);

/// Closed-form discrete minimum for 1-D scalar separable power integrands
/// (any p for order 1, p = 2 for order 2); empty otherwise.
std::optional<double> exact_discrete_minimum(const integrand::Integrand& ig,
                                             const fields::MacroGrid& grid, double epsilon);

/// |Omega| fbar_hom(xi0). An outer table is interpolated; an inner table is
/// passed through the outer cell problem at `outer_resolution`.
double homogenized_minimum(const integrand::Integrand& ig, const fields::MacroGrid& grid,
                           cellsolver::HomTable& table, int outer_resolution = 256,
                           const solver::Params& params = {});

/// Runs every epsilon (strictly decreasing) and compares with `homogenized_value`.
/// Each run's grid has `cells_per_period` cells per fast period.
ConvergenceStudy convergence_study(const integrand::Integrand& ig, const fields::MacroGrid& grid,
                                   const std::vector<double>& epsilons, int cells_per_period,
                                   double homogenized_value, const solver::Params& params = {});

/// Same, with the homogenized value taken from a table.
ConvergenceStudy convergence_study(const integrand::Integrand& ig, const fields::MacroGrid& grid,
                                   const std::vector<double>& epsilons, int cells_per_period,
                                   cellsolver::HomTable& table, int outer_resolution = 256,
                                   const solver::Params& params = {});

/// Columns: epsilon, grid_points, F_eps_min, oracle_min, hom_value, residual,
/// iterations, converged.
report::CsvTable to_csv(const ConvergenceStudy& study);

/// Least-squares slope of log|r| against log eps over positive residuals.
double fit_rate(std::span<const double> epsilons, std::span<const double> residuals);

} // namespace reithom::gammaharness
