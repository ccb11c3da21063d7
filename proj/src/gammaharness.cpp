#include "reithom/gammaharness.hpp"

#include "reithom/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

namespace reithom::gammaharness {

namespace {

constexpr long kMaxCellsPerAxis = 1L << 20;

/// Operator, quadrature and fast/slow coordinates of one direct problem.
struct DirectProblem {
  kernels::DiffOperator op;
  kernels::Quadrature quad;
  int pinned_layers = 1;
  std::vector<double> y;
  std::vector<double> z;
  std::vector<double> point_x;
  std::vector<double> node_x;
  int N = 1;
};

DirectProblem build(const integrand::Integrand& ig, const fields::MacroGrid& grid, double epsilon) {
  grid.validate();
  if (grid.order != ig.order() || grid.N != ig.dims().N || grid.targets != ig.dims().d) {
    throw ContractError("macro grid and integrand disagree on order, dimension or targets");
  }
  if (grid.cells > kMaxCellsPerAxis) {
    throw ResolutionError("macro grid exceeds 2^20 cells per axis");
  }
  fields::cells_per_fast_period(grid, epsilon);

  DirectProblem dp;
  dp.N = grid.N;
  const double h = grid.spacing();
  const int n = grid.cells;
  kernels::GridTopology topo;
  topo.N = grid.N;
  topo.periodic = false;
  if (grid.order == 1) {
    for (int a = 0; a < grid.N; ++a) {
      topo.point_shape[a] = n;
      topo.node_shape[a] = n + 1;
    }
    dp.op = kernels::make_gradient_operator(topo, h, grid.targets);
    dp.quad.uniform = std::pow(h, grid.N);
    dp.pinned_layers = 1;
  } else {
    if (grid.N != 1) {
      throw ContractError("second-order direct problems are implemented in 1-D only");
    }
    topo.point_shape[0] = n + 1;
    topo.node_shape[0] = n + 3;
    topo.base[0] = 1;
    dp.op = kernels::make_hessian_operator(topo, h, grid.targets);
    dp.quad.weights.assign(static_cast<std::size_t>(n + 1), h);
    dp.quad.weights.front() = 0.5 * h;
    dp.quad.weights.back() = 0.5 * h;
    dp.quad.uniform = h;
    dp.pinned_layers = 2;
  }

  const auto N = static_cast<std::size_t>(grid.N);
  const std::size_t P = topo.points();
  dp.point_x.resize(P * N);
  dp.y.resize(P * N);
  dp.z.resize(P * N);
  const double shift = grid.order == 1 ? 0.5 : 0.0;
  for (std::size_t p = 0; p < P; ++p) {
    std::size_t rest = p;
    for (std::size_t a = N; a-- > 0;) {
      const auto m = static_cast<std::size_t>(topo.point_shape[a]);
      const double x = (static_cast<double>(rest % m) + shift) * h;
      rest /= m;
      dp.point_x[p * N + a] = x;
      dp.y[p * N + a] = integrand::wrap_cell(x / epsilon);
      dp.z[p * N + a] = integrand::wrap_cell(x / (epsilon * epsilon));
    }
  }
  const std::size_t Nn = topo.nodes();
  dp.node_x.resize(Nn * N);
  const double node_offset = grid.order == 1 ? 0.0 : -1.0;
  for (std::size_t q = 0; q < Nn; ++q) {
    std::size_t rest = q;
    for (std::size_t a = N; a-- > 0;) {
      const auto m = static_cast<std::size_t>(topo.node_shape[a]);
      dp.node_x[q * N + a] = (static_cast<double>(rest % m) + node_offset) * h;
      rest /= m;
    }
  }
  return dp;
}

class EpsilonDensity final : public kernels::PointDensity {
public:
  EpsilonDensity(const integrand::Integrand& ig, const DirectProblem& dp) : ig_(ig), dp_(dp) {}

  double value(std::size_t p, std::span<const double> g) const override {
    return ig_.eval_raw(slot(dp_.y, p), slot(dp_.z, p), g);
  }
  double value_and_gradient(std::size_t p, std::span<const double> g,
                            std::span<double> grad) const override {
    ig_.grad_raw(slot(dp_.y, p), slot(dp_.z, p), g, grad);
    return ig_.eval_raw(slot(dp_.y, p), slot(dp_.z, p), g);
  }

private:
  std::span<const double> slot(const std::vector<double>& v, std::size_t p) const {
    const auto N = static_cast<std::size_t>(dp_.N);
    return {v.data() + p * N, N};
  }

  const integrand::Integrand& ig_;
  const DirectProblem& dp_;
};

std::vector<double> boundary_nodes(const fields::MacroGrid& grid, const DirectProblem& dp) {
  const auto N = static_cast<std::size_t>(grid.N);
  const auto d = static_cast<std::size_t>(grid.targets);
  const std::size_t Nn = dp.node_x.size() / N;
  std::vector<double> out(Nn * d);
  for (std::size_t q = 0; q < Nn; ++q) {
    const std::span<const double> x(dp.node_x.data() + q * N, N);
    for (std::size_t k = 0; k < d; ++k) {
      out[q * d + k] = grid.boundary_value(x, static_cast<int>(k));
    }
  }
  return out;
}

} // namespace

std::vector<double> node_coordinates(const fields::MacroGrid& grid) {
  grid.validate();
  const auto N = static_cast<std::size_t>(grid.N);
  const double h = grid.spacing();
  const std::size_t per = grid.order == 1 ? static_cast<std::size_t>(grid.cells + 1)
                                          : static_cast<std::size_t>(grid.cells + 3);
  const double offset = grid.order == 1 ? 0.0 : -1.0;
  std::size_t total = 1;
  for (std::size_t a = 0; a < N; ++a) {
    total *= per;
  }
  std::vector<double> out(total * N);
  for (std::size_t q = 0; q < total; ++q) {
    std::size_t rest = q;
    for (std::size_t a = N; a-- > 0;) {
      out[q * N + a] = (static_cast<double>(rest % per) + offset) * h;
      rest /= per;
    }
  }
  return out;
}

EpsilonRun solve_epsilon(const integrand::Integrand& ig, const fields::MacroGrid& grid,
                         double epsilon, const solver::Params& params) {
  if (!ig.differentiable()) {
    throw NonsmoothError("integrand '" + ig.label() +
                         "' is not differentiable in xi; set a positive regularization delta");
  }
  const DirectProblem dp = build(ig, grid, epsilon);
  const EpsilonDensity density(ig, dp);
  const solver::Constraint constraint{false, dp.pinned_layers};
  const solver::Preconditioner precond(dp.op, dp.quad.uniform, constraint);
  const solver::DiscreteEnergy energy(dp.op, density, dp.quad, params.backend);
  const solver::Result r = solver::minimize(energy, precond, constraint, boundary_nodes(grid, dp), params);

  EpsilonRun run;
  run.epsilon = epsilon;
  run.grid = grid;
  run.minimizer = r.x;
  run.energy = r.energy;
  run.boundary_data_energy = r.initial_energy;
  run.iterations = r.iterations;
  run.final_grad_norm = r.final_grad_norm;
  run.converged = r.converged;
  run.stop_reason = r.stop_reason;
  run.oracle = exact_discrete_minimum(ig, grid, epsilon);
  return run;
}

double energy_of(const integrand::Integrand& ig, const fields::MacroGrid& grid, double epsilon,
                 std::span<const double> nodes) {
  const DirectProblem dp = build(ig, grid, epsilon);
  if (nodes.size() != dp.op.node_values()) {
    throw ContractError("node vector does not match the macro grid");
  }
  const EpsilonDensity density(ig, dp);
  const solver::DiscreteEnergy energy(dp.op, density, dp.quad, kernels::Backend::parallel);
  return energy.value(nodes);
}

std::optional<double> exact_discrete_minimum(const integrand::Integrand& ig,
                                             const fields::MacroGrid& grid, double epsilon) {
  const auto& sep = ig.separable();
  if (!sep || !sep->profile.power_exponent || ig.dims().N != 1 || ig.dims().d != 1 ||
      ig.regularization_delta() != 0.0 || grid.N != 1 || grid.targets != 1) {
    return std::nullopt;
  }
  const double p = *sep->profile.power_exponent;
  const double k = sep->profile.power_scale;
  const DirectProblem dp = build(ig, grid, epsilon);
  const double h = grid.spacing();
  const double L = grid.length;
  const std::size_t P = dp.op.topo.points();
  auto coef = [&](std::size_t i) {
    return sep->coefficient(std::span<const double>(&dp.y[i], 1), std::span<const double>(&dp.z[i], 1));
  };
  if (grid.order == 1) {
    // g_i proportional to c_i^{-1/(p-1)} under the constraint sum h g_i = xi0 L.
    double S = 0.0;
    for (std::size_t i = 0; i < P; ++i) {
      S += h * std::pow(coef(i), -1.0 / (p - 1.0));
    }
    return k * std::pow(std::abs(grid.xi0[0]), p) * std::pow(L, p) * std::pow(S, 1.0 - p);
  }
  if (p != 2.0) {
    return std::nullopt;
  }
  // Second differences q_p, p = 0..n, are free up to two linear constraints
  // fixed by the four pinned nodes: sum h q_p = r1, sum h (L - x_p) q_p = r2.
  const std::vector<double> u = boundary_nodes(grid, dp);
  const std::size_t n = static_cast<std::size_t>(grid.cells);
  const double um1 = u[0], u0 = u[1], un = u[n + 1], un1 = u[n + 2];
  const double d_left = (u0 - um1) / h;
  const double d_right = (un1 - un) / h;
  const double r1 = d_right - d_left;
  const double r2 = un - u0 - L * d_left;
  double m11 = 0.0, m12 = 0.0, m22 = 0.0;
  std::vector<double> inv(P);
  for (std::size_t i = 0; i < P; ++i) {
    const double x = dp.point_x[i];
    inv[i] = 1.0 / (2.0 * dp.quad.at(i) * coef(i) * k);
    const double a1 = h;
    const double a2 = h * (L - x);
    m11 += a1 * a1 * inv[i];
    m12 += a1 * a2 * inv[i];
    m22 += a2 * a2 * inv[i];
  }
  const double det = m11 * m22 - m12 * m12;
  const double l1 = (r1 * m22 - r2 * m12) / det;
  const double l2 = (m11 * r2 - m12 * r1) / det;
  double E = 0.0;
  for (std::size_t i = 0; i < P; ++i) {
    const double q = (l1 * h + l2 * h * (L - dp.point_x[i])) * inv[i];
    E += dp.quad.at(i) * coef(i) * k * q * q;
  }
  return E;
}

double homogenized_minimum(const integrand::Integrand& ig, const fields::MacroGrid& grid,
                           cellsolver::HomTable& table, int outer_resolution,
                           const solver::Params& params) {
  grid.validate();
  if (table.level() == cellsolver::Level::outer) {
    return grid.measure() * cellsolver::eval_interp(table, {}, grid.xi0);
  }
  cellsolver::CellProblem cp{ig, cellsolver::Level::outer, {}, grid.xi0, outer_resolution, params};
  return grid.measure() * cellsolver::solve_outer(cp, table).energy;
}

double fit_rate(std::span<const double> epsilons, std::span<const double> residuals) {
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < epsilons.size() && i < residuals.size(); ++i) {
    if (residuals[i] > 0.0 && std::isfinite(residuals[i])) {
      lx.push_back(std::log(epsilons[i]));
      ly.push_back(std::log(residuals[i]));
    }
  }
  if (lx.size() < 2) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  const double n = static_cast<double>(lx.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sx += lx[i];
    sy += ly[i];
    sxx += lx[i] * lx[i];
    sxy += lx[i] * ly[i];
  }
  const double den = n * sxx - sx * sx;
  return den == 0.0 ? std::numeric_limits<double>::quiet_NaN() : (n * sxy - sx * sy) / den;
}

ConvergenceStudy convergence_study(const integrand::Integrand& ig, const fields::MacroGrid& grid,
                                   const std::vector<double>& epsilons, int cells_per_period,
                                   double homogenized_value, const solver::Params& params) {
  if (epsilons.empty()) {
    throw ContractError("convergence study needs at least one epsilon");
  }
  for (std::size_t i = 1; i < epsilons.size(); ++i) {
    if (!(epsilons[i] < epsilons[i - 1])) {
      throw ContractError("epsilon list must be strictly decreasing");
    }
  }
  if (cells_per_period < 8) {
    throw ResolutionError("at least 8 cells per fast period are required");
  }
  ConvergenceStudy study;
  study.homogenized_value = homogenized_value;
  // Runs are sequential; each one parallelizes its own grid reductions.
  for (double eps : epsilons) {
    fields::MacroGrid g = grid;
    const double periods = std::round(grid.length / (eps * eps));
    const double cells = periods * cells_per_period;
    if (cells > static_cast<double>(kMaxCellsPerAxis)) {
      throw ResolutionError("epsilon " + report::format_double(eps) +
                            " needs more than 2^20 cells per axis");
    }
    g.cells = static_cast<int>(cells);
    study.runs.push_back(solve_epsilon(ig, g, eps, params));
    study.residuals.push_back(std::abs(study.runs.back().energy - homogenized_value));
  }
  study.fitted_rate = fit_rate(epsilons, study.residuals);
  return study;
}

ConvergenceStudy convergence_study(const integrand::Integrand& ig, const fields::MacroGrid& grid,
                                   const std::vector<double>& epsilons, int cells_per_period,
                                   cellsolver::HomTable& table, int outer_resolution,
                                   const solver::Params& params) {
  const double hom = homogenized_minimum(ig, grid, table, outer_resolution, params);
  return convergence_study(ig, grid, epsilons, cells_per_period, hom, params);
}

report::CsvTable to_csv(const ConvergenceStudy& study) {
  report::CsvTable t({"epsilon", "grid_points", "F_eps_min", "oracle_min", "hom_value", "residual",
                      "iterations", "converged"});
  for (std::size_t i = 0; i < study.runs.size(); ++i) {
    const EpsilonRun& r = study.runs[i];
    const auto points = gammaharness::node_coordinates(r.grid).size() / static_cast<std::size_t>(r.grid.N);
    t.add_row({report::format_double(r.epsilon), std::to_string(points),
               report::format_double(r.energy),
               r.oracle ? report::format_double(*r.oracle) : std::string(),
               report::format_double(study.homogenized_value), report::format_double(study.residuals[i]),
               std::to_string(r.iterations), r.converged ? "true" : "false"});
  }
  return t;
}

} // namespace reithom::gammaharness
