// Serial reference vs OpenMP kernels, plus an end-to-end cell solve per backend.

#include "reithom/cellsolver.hpp"
#include "reithom/gammaharness.hpp"
#include "reithom/integrand.hpp"
#include "reithom/kernels.hpp"

#include <benchmark/benchmark.h>

#include <cmath>
#include <random>
#include <vector>

using namespace reithom;
using kernels::Backend;

namespace {

kernels::DiffOperator grid_operator(int N, int n, bool hessian) {
  kernels::GridTopology t;
  t.N = N;
  for (int a = 0; a < N; ++a) {
    t.point_shape[a] = n;
    t.node_shape[a] = n;
  }
  return hessian ? kernels::make_hessian_operator(t, 1.0 / n) : kernels::make_gradient_operator(t, 1.0 / n);
}

std::vector<double> noise(std::size_t n) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = U(rng);
  return v;
}

class LogCosh final : public kernels::PointDensity {
public:
  explicit LogCosh(std::size_t stride) : stride_(stride) {}
  double value(std::size_t, std::span<const double> g) const override {
    double s = 0.0;
    for (std::size_t k = 0; k < stride_; ++k) s += std::log(std::cosh(g[k]));
    return s;
  }
  double value_and_gradient(std::size_t p, std::span<const double> g, std::span<double> grad) const override {
    for (std::size_t k = 0; k < stride_; ++k) grad[k] = std::tanh(g[k]);
    return value(p, g);
  }

private:
  std::size_t stride_;
};

Backend backend_of(const benchmark::State& state) {
  return state.range(0) == 0 ? Backend::serial : Backend::parallel;
}

// Arguments: backend (0 serial, 1 parallel), N, points per axis.
void args(benchmark::internal::Benchmark* b) {
  for (int be : {0, 1}) {
    b->Args({be, 1, 1 << 20});
    b->Args({be, 2, 1024});
    b->Args({be, 3, 96});
  }
}

void BM_Apply(benchmark::State& state) {
  const auto op = grid_operator(static_cast<int>(state.range(1)), static_cast<int>(state.range(2)), false);
  const auto x = noise(op.node_values());
  std::vector<double> out(op.point_values());
  for (auto _ : state) {
    kernels::apply(backend_of(state), op, x, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(op.topo.points()));
}

void BM_Adjoint(benchmark::State& state) {
  const auto op = grid_operator(static_cast<int>(state.range(1)), static_cast<int>(state.range(2)), true);
  const auto g = noise(op.point_values());
  std::vector<double> out(op.node_values());
  for (auto _ : state) {
    kernels::apply_adjoint(backend_of(state), op, g, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(op.topo.points()));
}

void BM_Energy(benchmark::State& state) {
  const auto op = grid_operator(static_cast<int>(state.range(1)), static_cast<int>(state.range(2)), false);
  const auto g = noise(op.point_values());
  const LogCosh density(static_cast<std::size_t>(op.entries));
  const kernels::Quadrature q{1.0 / static_cast<double>(op.topo.points()), {}};
  std::vector<double> grad(g.size());
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        kernels::energy(backend_of(state), density, q, op.topo.points(), op.entries, g, grad));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(op.topo.points()));
}

void BM_Dot(benchmark::State& state) {
  const auto x = noise(static_cast<std::size_t>(1) << 22);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::dot(backend_of(state), x, x));
}

void BM_InnerSolve2D(benchmark::State& state) {
  const auto ig = integrand::catalog("constant_B", {{"nf", "power:3"}, {"N", "2"}});
  cellsolver::CellProblem cp{ig, cellsolver::Level::inner, {0.1, 0.2}, {1.0, -0.5}, 128, {}};
  cp.solver.backend = backend_of(state);
  for (auto _ : state) benchmark::DoNotOptimize(cellsolver::solve_inner(cp).energy);
}

void BM_DirectProblem(benchmark::State& state) {
  const auto ig = integrand::catalog("p_laminate", {{"p", "3"}});
  fields::MacroGrid g;
  g.cells = 256 * 16;
  solver::Params params;
  params.backend = backend_of(state);
  for (auto _ : state) benchmark::DoNotOptimize(gammaharness::solve_epsilon(ig, g, 0.0625, params).energy);
}

} // namespace

BENCHMARK(BM_Apply)->Apply(args);
BENCHMARK(BM_Adjoint)->Apply(args);
BENCHMARK(BM_Energy)->Apply(args);
BENCHMARK(BM_Dot)->Arg(0)->Arg(1);
BENCHMARK(BM_InnerSolve2D)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_DirectProblem)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
