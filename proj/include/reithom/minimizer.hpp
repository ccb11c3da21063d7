#pragma once

// Convex minimization of discrete energies E(x) = sum_p w_p f_p((D x)_p) over
// grid node values x, either periodic with zero mean or with pinned boundary
// layers. Shared by the cell solver and the direct epsilon problems.

#include "reithom/kernels.hpp"

#include <memory>
#include <span>
#include <string>
#include <vector>

namespace reithom::solver {

struct Params {
  int max_iter = 20000;
  double grad_tol = 1e-8;
  double energy_tol = 1e-12;
  kernels::Backend backend = kernels::Backend::parallel;
};

struct Result {
  std::vector<double> x;
  double energy = 0.0;
  double initial_energy = 0.0;
  int iterations = 0;
  double final_grad_norm = 0.0;
  bool converged = false;
  std::string stop_reason;
};

/// Node layout of the unknowns: periodic (mean-zero per target component) or
/// with `pinned_layers` frozen node layers on each side of every axis.
struct Constraint {
  bool periodic = true;
  int pinned_layers = 0;
};

/// Inverse of w * D^T D on the free nodes, diagonalized by FFTW (real FFT on
/// periodic grids, DST-I on pinned grids). Zero-symbol modes are dropped.
class Preconditioner {
public:
  Preconditioner(const kernels::DiffOperator& op, double weight, Constraint constraint);
  ~Preconditioner();
  Preconditioner(const Preconditioner&) = delete;
  Preconditioner& operator=(const Preconditioner&) = delete;

  /// out = P in on free nodes; pinned entries of out are zero.
  void apply(std::span<const double> in, std::span<double> out) const;

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// E and its gradient for a fixed operator, density and quadrature.
class DiscreteEnergy {
public:
  DiscreteEnergy(const kernels::DiffOperator& op, const kernels::PointDensity& density,
                 kernels::Quadrature quad, kernels::Backend backend);

  double value(std::span<const double> x) const;
  double value_and_gradient(std::span<const double> x, std::span<double> grad) const;
  /// D x at every point (entries * targets per point).
  std::vector<double> point_values(std::span<const double> x) const;

  const kernels::DiffOperator& op() const noexcept { return op_; }
  const kernels::Quadrature& quadrature() const noexcept { return quad_; }
  kernels::Backend backend() const noexcept { return backend_; }

private:
  const kernels::DiffOperator& op_;
  const kernels::PointDensity& density_;
  kernels::Quadrature quad_;
  kernels::Backend backend_;
  mutable std::vector<double> g_;
  mutable std::vector<double> wg_;
};

/// Preconditioned gradient descent with Barzilai-Borwein steps and a
/// non-monotone Armijo safeguard. `x0` must satisfy the constraint (pinned
/// values are kept). Returns the best iterate seen.
Result minimize(const DiscreteEnergy& energy, const Preconditioner& precond, Constraint constraint,
                std::vector<double> x0, const Params& params);

/// Subtracts the mean of each target component (node-major, targets innermost).
void project_mean_zero(std::span<double> x, int targets, kernels::Backend backend);

} // namespace reithom::solver
