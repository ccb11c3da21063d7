#include "reithom/cellsolver.hpp"

#include "reithom/error.hpp"

#include <json.hpp>
#include <omp.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <memory>

namespace reithom::cellsolver {

namespace {

constexpr std::size_t kMaxXi = 81;
constexpr int kMaxExtensions = 4;

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

/// Operator, preconditioner and point coordinates of one periodic cell grid.
struct CellWorkspace {
  int N = 1;
  int order = 1;
  int resolution = 8;
  kernels::DiffOperator op;
  std::unique_ptr<solver::Preconditioner> precond;
  kernels::Quadrature quad;
  std::vector<double> coords;

  CellWorkspace(int N_, int order_, int d, int res) : N(N_), order(order_), resolution(res) {
    if (!is_power_of_two(res) || res < 8) {
      throw ContractError("cell resolution must be a power of two >= 8");
    }
    kernels::GridTopology topo;
    topo.N = N;
    for (int a = 0; a < N; ++a) {
      topo.point_shape[a] = res;
      topo.node_shape[a] = res;
    }
    topo.periodic = true;
    const double h = 1.0 / res;
    op = order == 1 ? kernels::make_gradient_operator(topo, h, d)
                    : kernels::make_hessian_operator(topo, h, d);
    quad.uniform = std::pow(h, N);
    precond = std::make_unique<solver::Preconditioner>(op, quad.uniform, solver::Constraint{true, 0});
    // Forward differences live half a cell above the samples.
    const double shift = order == 1 ? 0.5 * h : 0.0;
    const std::size_t P = topo.points();
    coords.resize(P * static_cast<std::size_t>(N));
    for (std::size_t p = 0; p < P; ++p) {
      std::size_t rest = p;
      for (int a = N - 1; a >= 0; --a) {
        const int i = static_cast<int>(rest % static_cast<std::size_t>(res));
        rest /= static_cast<std::size_t>(res);
        coords[p * N + a] = integrand::wrap_cell(-0.5 + (i + 0.5) * h + shift);
      }
    }
  }

  std::span<const double> point(std::size_t p) const {
    return {coords.data() + p * static_cast<std::size_t>(N), static_cast<std::size_t>(N)};
  }
};

void symmetrize(std::vector<double>& xi, int order, int N, int d) {
  if (order != 2) {
    return;
  }
  const auto n = static_cast<std::size_t>(N);
  for (int k = 0; k < d; ++k) {
    double* m = xi.data() + static_cast<std::size_t>(k) * n * n;
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = a + 1; b < n; ++b) {
        const double s = 0.5 * (m[a * n + b] + m[b * n + a]);
        m[a * n + b] = s;
        m[b * n + a] = s;
      }
    }
  }
}

class InnerDensity final : public kernels::PointDensity {
public:
  InnerDensity(const integrand::Integrand& ig, std::vector<double> y, std::vector<double> xi,
               const CellWorkspace& ws)
      : ig_(ig), y_(std::move(y)), xi_(std::move(xi)), ws_(ws) {}

  double value(std::size_t p, std::span<const double> g) const override {
    std::array<double, kMaxXi> arg{};
    for (std::size_t i = 0; i < g.size(); ++i) {
      arg[i] = xi_[i] + g[i];
    }
    return ig_.eval_raw(y_, ws_.point(p), std::span<const double>(arg.data(), g.size()));
  }

  double value_and_gradient(std::size_t p, std::span<const double> g,
                            std::span<double> grad) const override {
    std::array<double, kMaxXi> arg{};
    for (std::size_t i = 0; i < g.size(); ++i) {
      arg[i] = xi_[i] + g[i];
    }
    const std::span<const double> a(arg.data(), g.size());
    ig_.grad_raw(y_, ws_.point(p), a, grad);
    return ig_.eval_raw(y_, ws_.point(p), a);
  }

private:
  const integrand::Integrand& ig_;
  std::vector<double> y_;
  std::vector<double> xi_;
  const CellWorkspace& ws_;
};

class OuterDensity final : public kernels::PointDensity {
public:
  OuterDensity(const HomTable& table, std::vector<double> xi, std::vector<std::size_t> y_index)
      : table_(table), xi_(std::move(xi)), y_index_(std::move(y_index)) {}

  double value(std::size_t p, std::span<const double> g) const override {
    std::array<double, kMaxXi> arg{};
    for (std::size_t i = 0; i < g.size(); ++i) {
      arg[i] = xi_[i] + g[i];
    }
    return eval_smooth(table_, y_index_[p], std::span<const double>(arg.data(), g.size()), {});
  }

  double value_and_gradient(std::size_t p, std::span<const double> g,
                            std::span<double> grad) const override {
    std::array<double, kMaxXi> arg{};
    for (std::size_t i = 0; i < g.size(); ++i) {
      arg[i] = xi_[i] + g[i];
    }
    return eval_smooth(table_, y_index_[p], std::span<const double>(arg.data(), g.size()), grad);
  }

private:
  const HomTable& table_;
  std::vector<double> xi_;
  std::vector<std::size_t> y_index_;
};

/// Runs the minimization on a prepared workspace and fills a CellSolution.
CellSolution run_cell(const CellWorkspace& ws, const kernels::PointDensity& density, int d,
                      fields::Cells cells, const solver::Params& params) {
  const solver::DiscreteEnergy energy(ws.op, density, ws.quad, params.backend);
  std::vector<double> x0(ws.op.node_values(), 0.0);
  const solver::Result r =
      solver::minimize(energy, *ws.precond, solver::Constraint{true, 0}, std::move(x0), params);

  CellSolution sol;
  sol.energy = r.energy;
  sol.zero_corrector_energy = r.initial_energy;
  sol.iterations = r.iterations;
  sol.final_grad_norm = r.final_grad_norm;
  sol.converged = r.converged;
  sol.stop_reason = r.stop_reason;
  sol.corrector = fields::PeriodicField(cells, ws.N, ws.resolution, d);
  sol.corrector.values() = r.x;

  // Envelope theorem: d/dxi of the minimum is the average of df/dxi at the optimum.
  const std::vector<double> g = energy.point_values(r.x);
  const auto stride = static_cast<std::size_t>(ws.op.entries * ws.op.targets);
  std::vector<double> wg(g.size());
  kernels::energy(params.backend, density, ws.quad, ws.op.topo.points(), stride, g, wg);
  sol.energy_gradient.assign(stride, 0.0);
  for (std::size_t p = 0; p < ws.op.topo.points(); ++p) {
    for (std::size_t i = 0; i < stride; ++i) {
      sol.energy_gradient[i] += wg[p * stride + i];
    }
  }
  return sol;
}

void require_differentiable(const integrand::Integrand& ig) {
  if (!ig.differentiable()) {
    throw NonsmoothError("integrand '" + ig.label() +
                         "' is not differentiable in xi; set a positive regularization delta");
  }
}

CellSolution solve_inner_with(const CellWorkspace& ws, const integrand::Integrand& ig,
                              std::vector<double> y, std::vector<double> xi,
                              const solver::Params& params) {
  for (double& v : y) {
    v = integrand::wrap_cell(v);
  }
  symmetrize(xi, ig.order(), ig.dims().N, ig.dims().d);
  const InnerDensity density(ig, std::move(y), std::move(xi), ws);
  return run_cell(ws, density, ig.dims().d, fields::Cells::Z, params);
}

/// Multilinear interpolation; returns false outside the hull.
bool multilinear(const HomTable& t, std::size_t j, std::span<const double> xi, double& value,
                 std::span<double> grad) {
  const XiLattice& L = t.lattice();
  const std::size_t K = L.components();
  std::array<int, kMaxXi> base{};
  std::array<double, kMaxXi> frac{};
  for (std::size_t k = 0; k < K; ++k) {
    if (L.counts[k] == 1) {
      if (std::abs(xi[k] - L.lower[k]) > 1e-12 * std::max(1.0, std::abs(L.lower[k]))) {
        return false;
      }
      base[k] = 0;
      frac[k] = 0.0;
      continue;
    }
    const double h = L.spacing(k);
    const double u = (xi[k] - L.lower[k]) / h;
    const double top = L.counts[k] - 1;
    if (!(u >= -1e-12) || !(u <= top + 1e-12)) {
      return false;
    }
    const int i = std::clamp(static_cast<int>(std::floor(u)), 0, L.counts[k] - 2);
    base[k] = i;
    frac[k] = std::clamp(u - i, 0.0, 1.0);
  }
  value = 0.0;
  if (!grad.empty()) {
    std::fill(grad.begin(), grad.end(), 0.0);
  }
  // Only components with more than one node contribute corners.
  std::vector<std::size_t> active;
  for (std::size_t k = 0; k < K; ++k) {
    if (L.counts[k] > 1) {
      active.push_back(k);
    }
  }
  const std::size_t corners = std::size_t{1} << active.size();
  for (std::size_t c = 0; c < corners; ++c) {
    std::size_t flat = 0;
    double w = 1.0;
    for (std::size_t k = 0; k < K; ++k) {
      int idx = base[k];
      const auto it = std::find(active.begin(), active.end(), k);
      if (it != active.end()) {
        const auto bit = static_cast<std::size_t>(it - active.begin());
        const bool up = (c >> bit) & 1U;
        idx += up ? 1 : 0;
        w *= up ? frac[k] : 1.0 - frac[k];
      }
      flat = flat * static_cast<std::size_t>(L.counts[k]) + static_cast<std::size_t>(idx);
    }
    const double v = t.value(j, flat);
    value += w * v;
    if (!grad.empty()) {
      for (std::size_t a = 0; a < active.size(); ++a) {
        const std::size_t k = active[a];
        double wk = 1.0;
        for (std::size_t b = 0; b < active.size(); ++b) {
          const std::size_t m = active[b];
          const bool up = (c >> b) & 1U;
          if (b == a) {
            wk *= (up ? 1.0 : -1.0) / L.spacing(m);
          } else {
            wk *= up ? frac[m] : 1.0 - frac[m];
          }
        }
        grad[k] += wk * v;
      }
    }
  }
  return true;
}

bool inside_hull(const XiLattice& L, std::span<const double> xi, double margin_cells) {
  for (std::size_t k = 0; k < L.components(); ++k) {
    const double m = L.counts[k] > 1 ? margin_cells * L.spacing(k) : 0.0;
    if (xi[k] < L.lower[k] + m - 1e-12 || xi[k] > L.upper[k] - m + 1e-12) {
      return false;
    }
  }
  return true;
}

XiLattice widened(const XiLattice& L) {
  XiLattice out = L;
  for (std::size_t k = 0; k < L.components(); ++k) {
    if (L.counts[k] == 1) {
      // A single node has no spacing to keep; open a symmetric three-node range.
      const double w = std::max(1.0, std::abs(L.lower[k]));
      out.lower[k] = L.lower[k] - w;
      out.upper[k] = L.upper[k] + w;
      out.counts[k] = 3;
      continue;
    }
    const int extra = std::max(1, (L.counts[k] - 1) / 2);
    const double h = L.spacing(k);
    out.lower[k] = L.lower[k] - extra * h;
    out.upper[k] = L.upper[k] + extra * h;
    out.counts[k] = L.counts[k] + 2 * extra;
  }
  return out;
}

void extend_table(HomTable& table) {
  if (!table.source) {
    throw RangeError("inner table range exhausted and the table has no source integrand to extend it");
  }
  const integrand::Integrand ig = *table.source;
  table = tabulate(ig, widened(table.lattice()), table.y_samples(), table.inner_resolution,
                   table.inner_params);
}

} // namespace

XiLattice XiLattice::uniform(std::size_t components, double lo, double hi, int count) {
  XiLattice L;
  L.lower.assign(components, lo);
  L.upper.assign(components, hi);
  L.counts.assign(components, count);
  L.validate();
  return L;
}

std::size_t XiLattice::size() const noexcept {
  std::size_t n = 1;
  for (int c : counts) {
    n *= static_cast<std::size_t>(c);
  }
  return n;
}

double XiLattice::spacing(std::size_t k) const {
  return counts[k] > 1 ? (upper[k] - lower[k]) / (counts[k] - 1) : 0.0;
}

double XiLattice::node(std::size_t k, int i) const {
  return counts[k] > 1 ? lower[k] + i * spacing(k) : lower[k];
}

std::vector<double> XiLattice::point(std::size_t flat) const {
  std::vector<double> out(counts.size());
  for (std::size_t k = counts.size(); k-- > 0;) {
    const auto n = static_cast<std::size_t>(counts[k]);
    out[k] = node(k, static_cast<int>(flat % n));
    flat /= n;
  }
  return out;
}

void XiLattice::validate() const {
  if (counts.empty() || lower.size() != counts.size() || upper.size() != counts.size()) {
    throw ContractError("xi lattice must have matching lower/upper/count per component");
  }
  if (counts.size() > kMaxXi) {
    throw ContractError("xi lattice has too many components");
  }
  for (std::size_t k = 0; k < counts.size(); ++k) {
    if (counts[k] < 1 || !std::isfinite(lower[k]) || !std::isfinite(upper[k])) {
      throw ContractError("xi lattice axis must have a positive count and finite bounds");
    }
    if (counts[k] == 1 ? lower[k] != upper[k] : !(upper[k] > lower[k])) {
      throw ContractError("xi lattice axis bounds are inconsistent with its count");
    }
  }
}

HomTable::HomTable(Level level, int N, int y_samples, XiLattice lattice)
    : level_(level), N_(N), y_samples_(level == Level::outer ? 1 : y_samples),
      lattice_(std::move(lattice)) {
  lattice_.validate();
  if (N < 1 || N > 3 || y_samples_ < 1) {
    throw ContractError("table needs 1 <= N <= 3 and at least one y sample");
  }
  const std::size_t n = y_count() * lattice_.size();
  values_.assign(n, 0.0);
  gradients_.assign(n * lattice_.components(), 0.0);
  converged_.assign(n, 1);
}

std::size_t HomTable::y_count() const noexcept {
  if (level_ == Level::outer) {
    return 1;
  }
  std::size_t n = 1;
  for (int a = 0; a < N_; ++a) {
    n *= static_cast<std::size_t>(y_samples_);
  }
  return n;
}

std::vector<double> HomTable::y_sample(std::size_t j) const {
  std::vector<double> y(static_cast<std::size_t>(N_), 0.0);
  if (level_ == Level::outer) {
    return y;
  }
  for (int a = N_ - 1; a >= 0; --a) {
    const auto m = static_cast<std::size_t>(y_samples_);
    y[static_cast<std::size_t>(a)] = -0.5 + static_cast<double>(j % m) / y_samples_;
    j /= m;
  }
  return y;
}

std::size_t HomTable::nearest_y(std::span<const double> y) const {
  if (level_ == Level::outer) {
    return 0;
  }
  if (y.size() != static_cast<std::size_t>(N_)) {
    throw ContractError("y point has the wrong dimension");
  }
  std::size_t flat = 0;
  for (int a = 0; a < N_; ++a) {
    const double u = (integrand::wrap_cell(y[static_cast<std::size_t>(a)]) + 0.5) * y_samples_;
    long i = std::lround(u) % y_samples_;
    if (i < 0) {
      i += y_samples_;
    }
    flat = flat * static_cast<std::size_t>(y_samples_) + static_cast<std::size_t>(i);
  }
  return flat;
}

std::span<double> HomTable::gradient(std::size_t j, std::size_t xi_index) {
  const std::size_t K = lattice_.components();
  return {gradients_.data() + (j * lattice_.size() + xi_index) * K, K};
}

std::span<const double> HomTable::gradient(std::size_t j, std::size_t xi_index) const {
  const std::size_t K = lattice_.components();
  return {gradients_.data() + (j * lattice_.size() + xi_index) * K, K};
}

std::size_t HomTable::flagged_entries() const {
  return static_cast<std::size_t>(std::count(converged_.begin(), converged_.end(), 0));
}

CellSolution solve_inner(const CellProblem& cp) {
  if (cp.level != Level::inner) {
    throw ContractError("solve_inner needs an inner-level cell problem");
  }
  const auto& ig = cp.integrand;
  require_differentiable(ig);
  if (cp.xi.size() != ig.xi_size()) {
    throw ContractError("xi has the wrong number of components for this integrand");
  }
  if (cp.frozen_y.size() != static_cast<std::size_t>(ig.dims().N)) {
    throw ContractError("inner cell problem needs a frozen y point of dimension N");
  }
  for (double v : cp.xi) {
    if (!std::isfinite(v)) {
      throw ContractError("xi must be finite");
    }
  }
  const CellWorkspace ws(ig.dims().N, ig.order(), ig.dims().d, cp.resolution);
  return solve_inner_with(ws, ig, cp.frozen_y, cp.xi, cp.solver);
}

double eval_smooth(const HomTable& table, std::size_t j, std::span<const double> xi,
                   std::span<double> grad) {
  const XiLattice& L = table.lattice();
  if (xi.size() != L.components()) {
    throw ContractError("xi has the wrong number of components for this table");
  }
  if (L.components() == 1 && L.counts[0] > 1) {
    const double h = L.spacing(0);
    const double u = (xi[0] - L.lower[0]) / h;
    if (!(u >= -1e-12) || !(u <= L.counts[0] - 1 + 1e-12)) {
      return std::numeric_limits<double>::infinity();
    }
    const int i = std::clamp(static_cast<int>(std::floor(u)), 0, L.counts[0] - 2);
    const double t = std::clamp(u - i, 0.0, 1.0);
    const auto i0 = static_cast<std::size_t>(i);
    const double f0 = table.value(j, i0);
    const double f1 = table.value(j, i0 + 1);
    const double m0 = table.gradient(j, i0)[0] * h;
    const double m1 = table.gradient(j, i0 + 1)[0] * h;
    const double t2 = t * t;
    const double t3 = t2 * t;
    const double v = (2 * t3 - 3 * t2 + 1) * f0 + (t3 - 2 * t2 + t) * m0 + (-2 * t3 + 3 * t2) * f1 +
                     (t3 - t2) * m1;
    if (!grad.empty()) {
      grad[0] = ((6 * t2 - 6 * t) * f0 + (3 * t2 - 4 * t + 1) * m0 + (-6 * t2 + 6 * t) * f1 +
                 (3 * t2 - 2 * t) * m1) /
                h;
    }
    return v;
  }
  double v = 0.0;
  if (!multilinear(table, j, xi, v, grad)) {
    return std::numeric_limits<double>::infinity();
  }
  return v;
}

double eval_interp(const HomTable& table, std::span<const double> y, std::span<const double> xi) {
  if (xi.size() != table.lattice().components()) {
    throw ContractError("xi has the wrong number of components for this table");
  }
  const std::size_t j = table.nearest_y(y);
  double v = 0.0;
  if (!multilinear(table, j, xi, v, {})) {
    throw RangeError("xi lies outside the tabulated lattice hull");
  }
  return v;
}

HomTable tabulate(const integrand::Integrand& ig, const XiLattice& lattice, int y_samples,
                  int resolution, const solver::Params& params) {
  lattice.validate();
  require_differentiable(ig);
  if (lattice.components() != ig.xi_size()) {
    throw ContractError("lattice components do not match the integrand's xi size");
  }
  HomTable table(Level::inner, ig.dims().N, y_samples, lattice);
  table.source = ig;
  table.inner_resolution = resolution;
  table.inner_params = params;
  // Validate the resolution before entering the parallel region.
  (void)CellWorkspace(ig.dims().N, ig.order(), ig.dims().d, resolution);

  const std::size_t L = lattice.size();
  const std::size_t K = lattice.components();
  const auto tasks = static_cast<std::ptrdiff_t>(table.y_count() * L);
  std::exception_ptr failure;
#pragma omp parallel
  {
    std::unique_ptr<CellWorkspace> ws;
    try {
      ws = std::make_unique<CellWorkspace>(ig.dims().N, ig.order(), ig.dims().d, resolution);
    } catch (...) {
#pragma omp critical(reithom_tabulate_failure)
      if (!failure) {
        failure = std::current_exception();
      }
    }
#pragma omp for schedule(dynamic, 1)
    for (std::ptrdiff_t task = 0; task < tasks; ++task) {
      if (!ws) {
        continue;
      }
      try {
        const auto j = static_cast<std::size_t>(task) / L;
        const auto k = static_cast<std::size_t>(task) % L;
        const CellSolution s = solve_inner_with(*ws, ig, table.y_sample(j), lattice.point(k), params);
        table.value(j, k) = s.energy;
        auto g = table.gradient(j, k);
        for (std::size_t c = 0; c < K; ++c) {
          g[c] = s.energy_gradient[c];
        }
        table.converged()[j * L + k] = s.converged ? 1 : 0;
      } catch (...) {
#pragma omp critical(reithom_tabulate_failure)
        if (!failure) {
          failure = std::current_exception();
        }
      }
    }
  }
  if (failure) {
    std::rethrow_exception(failure);
  }
  return table;
}

CellSolution solve_outer(const CellProblem& cp, HomTable& inner_table) {
  if (cp.level != Level::outer) {
    throw ContractError("solve_outer needs an outer-level cell problem");
  }
  if (inner_table.level() != Level::inner) {
    throw ContractError("solve_outer needs an inner (y-dependent) table");
  }
  const auto& ig = cp.integrand;
  if (cp.xi.size() != ig.xi_size() || inner_table.lattice().components() != ig.xi_size()) {
    throw ContractError("xi, integrand and table disagree on the number of xi components");
  }
  if (inner_table.N() != ig.dims().N) {
    throw ContractError("table and integrand disagree on the space dimension");
  }
  std::vector<double> xi = cp.xi;
  symmetrize(xi, ig.order(), ig.dims().N, ig.dims().d);

  const CellWorkspace ws(ig.dims().N, ig.order(), ig.dims().d, cp.resolution);
  const std::size_t P = ws.op.topo.points();
  const std::size_t stride = static_cast<std::size_t>(ws.op.entries * ws.op.targets);

  int extensions = 0;
  while (!inside_hull(inner_table.lattice(), xi, 0.0)) {
    if (extensions == kMaxExtensions) {
      throw RangeError("xi outside the inner table after the maximum number of extensions");
    }
    extend_table(inner_table);
    ++extensions;
  }
  for (;;) {
    std::vector<std::size_t> y_index(P);
    for (std::size_t p = 0; p < P; ++p) {
      y_index[p] = inner_table.nearest_y(ws.point(p));
    }
    const OuterDensity density(inner_table, xi, std::move(y_index));
    CellSolution sol = run_cell(ws, density, ig.dims().d, fields::Cells::Y, cp.solver);
    sol.table_extensions = extensions;

    // The optimum must stay clear of the hull, where the density jumps to +inf.
    const solver::DiscreteEnergy energy(ws.op, density, ws.quad, cp.solver.backend);
    const std::vector<double> g = energy.point_values(sol.corrector.values());
    bool touches = false;
    std::vector<double> arg(stride);
    for (std::size_t p = 0; p < P && !touches; ++p) {
      for (std::size_t i = 0; i < stride; ++i) {
        arg[i] = xi[i] + g[p * stride + i];
      }
      touches = !inside_hull(inner_table.lattice(), arg, 0.25);
    }
    if (!touches) {
      return sol;
    }
    if (extensions == kMaxExtensions) {
      throw RangeError("outer corrector keeps reaching the inner table hull after " +
                       std::to_string(kMaxExtensions) + " extensions");
    }
    extend_table(inner_table);
    ++extensions;
  }
}

void save(const HomTable& table, const std::filesystem::path& base) {
  std::filesystem::path bin = base;
  bin += ".bin";
  std::filesystem::path grad = base;
  grad += ".grad.bin";
  std::filesystem::path meta = base;
  meta += ".json";
  fields::write_doubles(bin, table.values());
  fields::write_doubles(grad, table.gradients());
  nlohmann::ordered_json j;
  j["format"] = "hom-table";
  j["level"] = table.level() == Level::inner ? "inner" : "outer";
  j["N"] = table.N();
  j["y_samples"] = table.y_samples();
  j["lattice"] = {{"lower", table.lattice().lower},
                  {"upper", table.lattice().upper},
                  {"counts", table.lattice().counts}};
  j["layout"] = "row-major [y sample][xi lattice point]; gradients add a trailing xi component axis";
  j["dtype"] = "float64-le";
  j["converged"] = table.converged();
  j["inner_resolution"] = table.inner_resolution;
  j["solver"] = {{"max_iter", table.inner_params.max_iter},
                 {"grad_tol", table.inner_params.grad_tol},
                 {"energy_tol", table.inner_params.energy_tol}};
  if (table.source && !table.source->catalog_name().empty()) {
    j["integrand"] = {{"catalog", table.source->catalog_name()},
                      {"params", table.source->catalog_params()}};
  } else {
    j["integrand"] = nullptr;
  }
  std::ofstream out(meta);
  if (!out) {
    throw IoError("cannot write " + meta.string());
  }
  out << j.dump(2) << '\n';
  if (!out) {
    throw IoError("failed writing " + meta.string());
  }
}

HomTable load(const std::filesystem::path& base) {
  std::filesystem::path meta = base;
  meta += ".json";
  std::ifstream in(meta);
  if (!in) {
    throw IoError("cannot open " + meta.string());
  }
  nlohmann::json j;
  try {
    in >> j;
    if (j.at("format").get<std::string>() != "hom-table") {
      throw DataError(meta.string() + " is not a hom-table sidecar");
    }
    XiLattice L;
    L.lower = j.at("lattice").at("lower").get<std::vector<double>>();
    L.upper = j.at("lattice").at("upper").get<std::vector<double>>();
    L.counts = j.at("lattice").at("counts").get<std::vector<int>>();
    const Level level = j.at("level").get<std::string>() == "outer" ? Level::outer : Level::inner;
    HomTable table(level, j.at("N").get<int>(), j.at("y_samples").get<int>(), L);
    std::filesystem::path bin = base;
    bin += ".bin";
    std::filesystem::path grad = base;
    grad += ".grad.bin";
    auto values = fields::read_doubles(bin);
    auto grads = fields::read_doubles(grad);
    if (values.size() != table.values().size() || grads.size() != table.gradients().size()) {
      throw DataError("hom-table binary size does not match its sidecar");
    }
    table.values() = std::move(values);
    table.gradients() = std::move(grads);
    table.converged() = j.at("converged").get<std::vector<std::uint8_t>>();
    if (table.converged().size() != table.values().size()) {
      throw DataError("hom-table convergence flags do not match its sidecar");
    }
    table.inner_resolution = j.value("inner_resolution", 0);
    if (j.contains("solver")) {
      table.inner_params.max_iter = j["solver"].value("max_iter", table.inner_params.max_iter);
      table.inner_params.grad_tol = j["solver"].value("grad_tol", table.inner_params.grad_tol);
      table.inner_params.energy_tol = j["solver"].value("energy_tol", table.inner_params.energy_tol);
    }
    if (j.contains("integrand") && !j["integrand"].is_null()) {
      table.source = integrand::catalog(j["integrand"].at("catalog").get<std::string>(),
                                        j["integrand"].at("params").get<integrand::Params>());
    }
    return table;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed hom-table sidecar " + meta.string() + ": " + e.what());
  }
}

Correctors build_correctors(const integrand::Integrand& ig, std::span<const double> xi,
                            int resolution, HomTable& inner_table, const solver::Params& params) {
  Correctors out;
  out.xi.assign(xi.begin(), xi.end());
  CellProblem cp{ig, Level::outer, {}, out.xi, resolution, params};
  out.outer = solve_outer(cp, inner_table);
  out.phi = out.outer.corrector;
  out.all_converged = out.outer.converged;

  const int N = ig.dims().N;
  const int d = ig.dims().d;
  const fields::PeriodicField slope = ig.order() == 1 ? fields::gradient(out.phi)
                                                      : fields::hessian(out.phi);
  const std::size_t Py = out.phi.points();
  const std::size_t m = ig.xi_size();
  out.psi = fields::PeriodicField(fields::Cells::YZ, N, resolution, d);
  const std::size_t Pz = Py;
  std::exception_ptr failure;
  bool all_ok = true;
#pragma omp parallel
  {
    std::unique_ptr<CellWorkspace> ws;
    try {
      ws = std::make_unique<CellWorkspace>(N, ig.order(), d, resolution);
    } catch (...) {
#pragma omp critical(reithom_corrector_failure)
      if (!failure) {
        failure = std::current_exception();
      }
    }
#pragma omp for schedule(dynamic, 1) reduction(&& : all_ok)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(Py); ++i) {
      if (!ws) {
        continue;
      }
      try {
        const auto p = static_cast<std::size_t>(i);
        std::vector<double> y(static_cast<std::size_t>(N));
        out.phi.point_coordinates(p, y);
        std::vector<double> local(m);
        for (std::size_t c = 0; c < m; ++c) {
          local[c] = out.xi[c] + slope.at(p, static_cast<int>(c));
        }
        const CellSolution s = solve_inner_with(*ws, ig, y, local, params);
        all_ok = all_ok && s.converged;
        const auto& v = s.corrector.values();
        std::copy(v.begin(), v.end(),
                  out.psi.values().begin() + static_cast<std::ptrdiff_t>(p * Pz * static_cast<std::size_t>(d)));
      } catch (...) {
#pragma omp critical(reithom_corrector_failure)
        if (!failure) {
          failure = std::current_exception();
        }
      }
    }
  }
  if (failure) {
    std::rethrow_exception(failure);
  }
  out.all_converged = out.all_converged && all_ok;
  return out;
}

} // namespace reithom::cellsolver
