#pragma once

// Data-parallel inner loops of the discrete energies. Every kernel exists
// twice: `serial` is the plain reference loop kept for testing, `parallel`
// is the OpenMP version used by the solvers. Parallel reductions sum fixed
// 2048-point blocks and combine them in order, so results do not depend on
// the thread count.

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace reithom::kernels {

enum class Backend { serial, parallel };

/// Points and nodes of a structured grid sharing N axes. Point p reads node
/// p + base + offset along each axis, wrapped modulo node_shape when periodic.
struct GridTopology {
  int N = 1;
  std::array<int, 3> point_shape{1, 1, 1};
  std::array<int, 3> node_shape{1, 1, 1};
  std::array<int, 3> base{0, 0, 0};
  bool periodic = true;

  std::size_t points() const noexcept;
  std::size_t nodes() const noexcept;
};

/// out[p][entry] = sum of coef * in[node(p) + offset] over the entry's terms.
struct StencilTerm {
  int entry = 0;
  std::array<int, 3> offset{0, 0, 0};
  double coef = 0.0;
};

/// A linear difference operator from node values (d per node) to point
/// tensors (d blocks of `entries` per point).
struct DiffOperator {
  GridTopology topo;
  int entries = 1;
  int targets = 1;
  std::vector<StencilTerm> terms;

  std::size_t point_values() const noexcept {
    return topo.points() * static_cast<std::size_t>(entries * targets);
  }
  std::size_t node_values() const noexcept {
    return topo.nodes() * static_cast<std::size_t>(targets);
  }
};

/// Cell-center gradient of the Q1 interpolant (forward differences in 1-D).
DiffOperator make_gradient_operator(const GridTopology& topo, double h, int targets = 1);

/// Second differences: three-point on the diagonal, four-point centered off it.
DiffOperator make_hessian_operator(const GridTopology& topo, double h, int targets = 1);

/// Pointwise convex density evaluated at point p with tensor argument g.
/// Writes d density / d g into `grad` and returns the density value.
class PointDensity {
public:
  virtual ~PointDensity() = default;
  virtual double value_and_gradient(std::size_t point, std::span<const double> g,
                                    std::span<double> grad) const = 0;
  virtual double value(std::size_t point, std::span<const double> g) const = 0;
};

/// Per-point quadrature weights: uniform unless `weights` is non-empty.
struct Quadrature {
  double uniform = 1.0;
  std::vector<double> weights;

  double at(std::size_t p) const noexcept { return weights.empty() ? uniform : weights[p]; }
};

namespace serial {
void apply(const DiffOperator& op, std::span<const double> nodes, std::span<double> out);
void apply_adjoint(const DiffOperator& op, std::span<const double> point_values,
                   std::span<double> nodes_out);
/// Returns sum_p w_p f_p(g_p); writes w_p * df_p/dg into `weighted_grad` when non-empty.
double energy(const PointDensity& density, const Quadrature& quad, std::size_t points,
              std::size_t stride, std::span<const double> g, std::span<double> weighted_grad);
double dot(std::span<const double> a, std::span<const double> b);
} // namespace serial

namespace parallel {
void apply(const DiffOperator& op, std::span<const double> nodes, std::span<double> out);
void apply_adjoint(const DiffOperator& op, std::span<const double> point_values,
                   std::span<double> nodes_out);
double energy(const PointDensity& density, const Quadrature& quad, std::size_t points,
              std::size_t stride, std::span<const double> g, std::span<double> weighted_grad);
double dot(std::span<const double> a, std::span<const double> b);
} // namespace parallel

/// Backend dispatch.
void apply(Backend b, const DiffOperator& op, std::span<const double> nodes, std::span<double> out);
void apply_adjoint(Backend b, const DiffOperator& op, std::span<const double> point_values,
                   std::span<double> nodes_out);
double energy(Backend b, const PointDensity& density, const Quadrature& quad, std::size_t points,
              std::size_t stride, std::span<const double> g, std::span<double> weighted_grad);
double dot(Backend backend, std::span<const double> a, std::span<const double> b);

/// Sets the OpenMP team size used by the parallel kernels (<= 0 keeps the default).
void set_thread_count(int threads);
int thread_count();

} // namespace reithom::kernels
