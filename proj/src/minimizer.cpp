#include "reithom/minimizer.hpp"

#include "fft.hpp"
#include "reithom/error.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <deque>
#include <limits>
#include <numbers>

namespace reithom::solver {

namespace {

/// sum over entries of |sum_terms coef e^{i theta.o}|^2
double stencil_symbol(const kernels::DiffOperator& op, const std::array<double, 3>& theta) {
  std::vector<std::complex<double>> sigma(static_cast<std::size_t>(op.entries));
  for (const auto& t : op.terms) {
    double phase = 0.0;
    for (int a = 0; a < op.topo.N; ++a) {
      phase += theta[a] * t.offset[a];
    }
    sigma[static_cast<std::size_t>(t.entry)] += t.coef * std::polar(1.0, phase);
  }
  double s = 0.0;
  for (const auto& v : sigma) {
    s += std::norm(v);
  }
  return s;
}

} // namespace

struct Preconditioner::Impl {
  Constraint constraint;
  int N = 1;
  int targets = 1;
  std::array<int, 3> node_shape{1, 1, 1};
  std::array<int, 3> free_shape{1, 1, 1};
  std::vector<double> inverse_symbol;
  std::unique_ptr<detail::RealFft> fft;
  std::unique_ptr<detail::SineTransform> dst;
  double normalization = 1.0;
};

Preconditioner::Preconditioner(const kernels::DiffOperator& op, double weight, Constraint constraint)
    : impl_(std::make_unique<Impl>()) {
  auto& m = *impl_;
  m.constraint = constraint;
  m.N = op.topo.N;
  m.targets = op.targets;
  m.node_shape = op.topo.node_shape;
  const double two_pi = 2.0 * std::numbers::pi;
  std::vector<int> shape;
  if (constraint.periodic) {
    for (int a = 0; a < m.N; ++a) {
      shape.push_back(m.node_shape[a]);
      m.free_shape[a] = m.node_shape[a];
    }
    m.fft = std::make_unique<detail::RealFft>(shape);
    const std::size_t nc = m.fft->complex_size();
    m.inverse_symbol.assign(nc, 0.0);
    std::vector<int> cshape = shape;
    cshape.back() = shape.back() / 2 + 1;
    for (std::size_t k = 0; k < nc; ++k) {
      std::size_t rest = k;
      std::array<double, 3> theta{0, 0, 0};
      for (int a = m.N - 1; a >= 0; --a) {
        const int j = static_cast<int>(rest % static_cast<std::size_t>(cshape[a]));
        rest /= static_cast<std::size_t>(cshape[a]);
        theta[a] = two_pi * m.fft->frequency(static_cast<std::size_t>(a), j) / shape[a];
      }
      m.inverse_symbol[k] = weight * stencil_symbol(op, theta);
    }
    const double top = *std::max_element(m.inverse_symbol.begin(), m.inverse_symbol.end());
    for (double& s : m.inverse_symbol) {
      s = s > 1e-13 * top ? 1.0 / s : 0.0;
    }
    m.normalization = static_cast<double>(m.fft->real_size());
  } else {
    const int L = constraint.pinned_layers;
    for (int a = 0; a < m.N; ++a) {
      m.free_shape[a] = m.node_shape[a] - 2 * L;
      if (m.free_shape[a] < 1) {
        throw ContractError("pinned grid has no free nodes");
      }
      shape.push_back(m.free_shape[a]);
    }
    m.dst = std::make_unique<detail::SineTransform>(shape);
    const std::size_t n = m.dst->size();
    m.inverse_symbol.assign(n, 0.0);
    m.normalization = 1.0;
    for (int a = 0; a < m.N; ++a) {
      m.normalization *= 2.0 * (shape[a] + 1);
    }
    for (std::size_t k = 0; k < n; ++k) {
      std::size_t rest = k;
      std::array<double, 3> theta{0, 0, 0};
      for (int a = m.N - 1; a >= 0; --a) {
        const int j = static_cast<int>(rest % static_cast<std::size_t>(shape[a]));
        rest /= static_cast<std::size_t>(shape[a]);
        theta[a] = std::numbers::pi * (j + 1) / (shape[a] + 1);
      }
      const double s = weight * stencil_symbol(op, theta);
      m.inverse_symbol[k] = s > 0.0 ? 1.0 / s : 0.0;
    }
  }
}

Preconditioner::~Preconditioner() = default;

void Preconditioner::apply(std::span<const double> in, std::span<double> out) const {
  auto& m = *impl_;
  const auto d = static_cast<std::size_t>(m.targets);
  std::fill(out.begin(), out.end(), 0.0);
  if (m.constraint.periodic) {
    const std::size_t n = m.fft->real_size();
    for (std::size_t k = 0; k < d; ++k) {
      double* r = m.fft->real();
      for (std::size_t i = 0; i < n; ++i) {
        r[i] = in[i * d + k];
      }
      m.fft->forward();
      fftw_complex* c = m.fft->spectrum();
      for (std::size_t i = 0; i < m.fft->complex_size(); ++i) {
        c[i][0] *= m.inverse_symbol[i];
        c[i][1] *= m.inverse_symbol[i];
      }
      m.fft->backward();
      for (std::size_t i = 0; i < n; ++i) {
        out[i * d + k] = r[i] / m.normalization;
      }
    }
    return;
  }
  const int L = m.constraint.pinned_layers;
  const std::size_t n = m.dst->size();
  // Map free index -> node index.
  auto node_index = [&](std::size_t f) {
    std::size_t rest = f;
    std::array<int, 3> idx{0, 0, 0};
    for (int a = m.N - 1; a >= 0; --a) {
      idx[a] = static_cast<int>(rest % static_cast<std::size_t>(m.free_shape[a])) + L;
      rest /= static_cast<std::size_t>(m.free_shape[a]);
    }
    std::size_t flat = 0;
    for (int a = 0; a < m.N; ++a) {
      flat = flat * static_cast<std::size_t>(m.node_shape[a]) + static_cast<std::size_t>(idx[a]);
    }
    return flat;
  };
  for (std::size_t k = 0; k < d; ++k) {
    double* r = m.dst->data();
    for (std::size_t f = 0; f < n; ++f) {
      r[f] = in[node_index(f) * d + k];
    }
    m.dst->execute();
    for (std::size_t f = 0; f < n; ++f) {
      r[f] *= m.inverse_symbol[f];
    }
    m.dst->execute();
    for (std::size_t f = 0; f < n; ++f) {
      out[node_index(f) * d + k] = r[f] / m.normalization;
    }
  }
}

DiscreteEnergy::DiscreteEnergy(const kernels::DiffOperator& op, const kernels::PointDensity& density,
                               kernels::Quadrature quad, kernels::Backend backend)
    : op_(op), density_(density), quad_(std::move(quad)), backend_(backend),
      g_(op.point_values()), wg_(op.point_values()) {}

double DiscreteEnergy::value(std::span<const double> x) const {
  kernels::apply(backend_, op_, x, g_);
  const auto stride = static_cast<std::size_t>(op_.entries * op_.targets);
  return kernels::energy(backend_, density_, quad_, op_.topo.points(), stride, g_, {});
}

double DiscreteEnergy::value_and_gradient(std::span<const double> x, std::span<double> grad) const {
  kernels::apply(backend_, op_, x, g_);
  const auto stride = static_cast<std::size_t>(op_.entries * op_.targets);
  const double e = kernels::energy(backend_, density_, quad_, op_.topo.points(), stride, g_, wg_);
  kernels::apply_adjoint(backend_, op_, wg_, grad);
  return e;
}

std::vector<double> DiscreteEnergy::point_values(std::span<const double> x) const {
  std::vector<double> out(op_.point_values());
  kernels::apply(backend_, op_, x, out);
  return out;
}

void project_mean_zero(std::span<double> x, int targets, kernels::Backend backend) {
  const auto d = static_cast<std::size_t>(targets);
  const std::size_t n = x.size() / d;
  for (std::size_t k = 0; k < d; ++k) {
    double mean = 0.0;
    if (d == 1) {
      std::vector<double> ones(n, 1.0);
      mean = kernels::dot(backend, x, ones) / static_cast<double>(n);
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        mean += x[i * d + k];
      }
      mean /= static_cast<double>(n);
    }
    for (std::size_t i = 0; i < n; ++i) {
      x[i * d + k] -= mean;
    }
  }
}

Result minimize(const DiscreteEnergy& energy, const Preconditioner& precond, Constraint constraint,
                std::vector<double> x0, const Params& params) {
  if (params.max_iter < 0 || !(params.grad_tol > 0.0) || !(params.energy_tol > 0.0)) {
    throw ContractError("solver parameters must be positive");
  }
  const auto backend = params.backend;
  const int targets = energy.op().targets;
  const std::size_t n = x0.size();
  if (n != energy.op().node_values()) {
    throw ContractError("initial guess has the wrong size");
  }
  if (constraint.periodic) {
    project_mean_zero(x0, targets, backend);
  }

  Result res;
  std::vector<double> x = std::move(x0);
  std::vector<double> g(n), d(n), xn(n), gn(n), dn(n);
  double E = energy.value_and_gradient(x, g);
  if (!std::isfinite(E)) {
    throw NonConvergenceError("initial discrete energy is not finite");
  }
  res.initial_energy = E;
  precond.apply(g, d);
  if (constraint.periodic) {
    project_mean_zero(d, targets, backend);
  }
  double gd = kernels::dot(backend, g, d);

  std::vector<double> best_x = x;
  double best_E = E;
  std::deque<double> recent{E};
  std::vector<double> best_history{E};
  double alpha = 1.0;
  constexpr double kArmijo = 1e-4;
  constexpr int kWindow = 10;
  constexpr double kTiny = 1e-300;

  int it = 0;
  res.stop_reason = "max_iter";
  for (; it < params.max_iter; ++it) {
    if (!(gd > params.grad_tol * params.grad_tol * std::max(std::abs(E), kTiny))) {
      res.converged = true;
      res.stop_reason = "grad_tol";
      break;
    }
    const double ref = *std::max_element(recent.begin(), recent.end());
    double t = alpha;
    bool accepted = false;
    double En = 0.0;
    for (int ls = 0; ls < 60; ++ls) {
      for (std::size_t i = 0; i < n; ++i) {
        xn[i] = x[i] - t * d[i];
      }
      En = energy.value_and_gradient(xn, gn);
      if (std::isfinite(En) && En <= ref - kArmijo * t * gd) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      res.stop_reason = "line_search";
      // No descent within roundoff: the iterate is stationary to working precision.
      res.converged = gd <= 1e-10 * std::max(std::abs(E), kTiny);
      break;
    }
    precond.apply(gn, dn);
    if (constraint.periodic) {
      project_mean_zero(dn, targets, backend);
    }
    double sy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      sy += -t * d[i] * (gn[i] - g[i]);
    }
    if (sy > 0.0) {
      alpha = std::clamp(t * t * gd / sy, 1e-14, 1e14);
    }
    x.swap(xn);
    g.swap(gn);
    d.swap(dn);
    E = En;
    gd = kernels::dot(backend, g, d);

    recent.push_back(E);
    if (static_cast<int>(recent.size()) > kWindow) {
      recent.pop_front();
    }
    if (E < best_E) {
      best_E = E;
      best_x = x;
    }
    best_history.push_back(best_E);
    const auto h = best_history.size();
    if (h > static_cast<std::size_t>(kWindow)) {
      const double before = best_history[h - 1 - kWindow];
      if (before - best_E <= params.energy_tol * std::max(std::abs(best_E), kTiny)) {
        ++it;
        res.converged = true;
        res.stop_reason = "energy_tol";
        break;
      }
    }
  }
  res.iterations = it;
  res.final_grad_norm = std::sqrt(std::max(gd, 0.0));
  res.x = std::move(best_x);
  res.energy = best_E;
  return res;
}

} // namespace reithom::solver
