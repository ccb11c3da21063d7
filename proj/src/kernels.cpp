#include "reithom/kernels.hpp"

#include "reithom/error.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <exception>

namespace reithom::kernels {

namespace {

constexpr std::size_t kBlock = 2048;

struct Index3 {
  std::array<int, 3> v{0, 0, 0};
};

Index3 unravel(std::size_t flat, const std::array<int, 3>& shape, int N) {
  Index3 out;
  for (int a = N - 1; a >= 0; --a) {
    const auto n = static_cast<std::size_t>(shape[a]);
    out.v[a] = static_cast<int>(flat % n);
    flat /= n;
  }
  return out;
}

inline int wrap(int i, int n) {
  i %= n;
  return i < 0 ? i + n : i;
}

/// Node index read by `point` through `term`, or -1 if outside the node grid.
inline long node_of(const GridTopology& t, const Index3& p, const StencilTerm& term) {
  long flat = 0;
  for (int a = 0; a < t.N; ++a) {
    int n = p.v[a] + t.base[a] + term.offset[a];
    if (t.periodic) {
      n = wrap(n, t.node_shape[a]);
    } else if (n < 0 || n >= t.node_shape[a]) {
      return -1;
    }
    flat = flat * t.node_shape[a] + n;
  }
  return flat;
}

/// Point that reads `node` through `term`, or -1.
inline long point_of(const GridTopology& t, const Index3& node, const StencilTerm& term) {
  long flat = 0;
  for (int a = 0; a < t.N; ++a) {
    int p = node.v[a] - t.base[a] - term.offset[a];
    if (t.periodic) {
      p = wrap(p, t.point_shape[a]);
    } else if (p < 0 || p >= t.point_shape[a]) {
      return -1;
    }
    flat = flat * t.point_shape[a] + p;
  }
  return flat;
}

void check_sizes(const DiffOperator& op, std::size_t nodes, std::size_t out) {
  if (nodes != op.node_values() || out != op.point_values()) {
    throw ContractError("difference operator applied to arrays of the wrong size");
  }
}

inline void apply_point(const DiffOperator& op, std::size_t p, const double* in, double* out) {
  const auto m = static_cast<std::size_t>(op.entries);
  const auto d = static_cast<std::size_t>(op.targets);
  double* row = out + p * m * d;
  std::fill(row, row + m * d, 0.0);
  const Index3 idx = unravel(p, op.topo.point_shape, op.topo.N);
  for (const auto& term : op.terms) {
    const long n = node_of(op.topo, idx, term);
    if (n < 0) {
      continue;
    }
    for (std::size_t k = 0; k < d; ++k) {
      row[k * m + static_cast<std::size_t>(term.entry)] += term.coef * in[static_cast<std::size_t>(n) * d + k];
    }
  }
}

inline void adjoint_node(const DiffOperator& op, std::size_t n, const double* in, double* out) {
  const auto m = static_cast<std::size_t>(op.entries);
  const auto d = static_cast<std::size_t>(op.targets);
  double* row = out + n * d;
  std::fill(row, row + d, 0.0);
  const Index3 idx = unravel(n, op.topo.node_shape, op.topo.N);
  for (const auto& term : op.terms) {
    const long p = point_of(op.topo, idx, term);
    if (p < 0) {
      continue;
    }
    const double* src = in + static_cast<std::size_t>(p) * m * d;
    for (std::size_t k = 0; k < d; ++k) {
      row[k] += term.coef * src[k * m + static_cast<std::size_t>(term.entry)];
    }
  }
}

} // namespace

std::size_t GridTopology::points() const noexcept {
  std::size_t n = 1;
  for (int a = 0; a < N; ++a) {
    n *= static_cast<std::size_t>(point_shape[a]);
  }
  return n;
}

std::size_t GridTopology::nodes() const noexcept {
  std::size_t n = 1;
  for (int a = 0; a < N; ++a) {
    n *= static_cast<std::size_t>(node_shape[a]);
  }
  return n;
}

DiffOperator make_gradient_operator(const GridTopology& topo, double h, int targets) {
  if (topo.N < 1 || topo.N > 3 || !(h > 0.0)) {
    throw ContractError("gradient operator needs 1 <= N <= 3 and h > 0");
  }
  DiffOperator op;
  op.topo = topo;
  op.entries = topo.N;
  op.targets = targets;
  const int corners = 1 << topo.N;
  const double scale = 1.0 / (h * static_cast<double>(1 << (topo.N - 1)));
  for (int k = 0; k < topo.N; ++k) {
    for (int c = 0; c < corners; ++c) {
      StencilTerm t;
      t.entry = k;
      for (int a = 0; a < topo.N; ++a) {
        t.offset[a] = (c >> a) & 1;
      }
      t.coef = (t.offset[k] == 1 ? scale : -scale);
      op.terms.push_back(t);
    }
  }
  return op;
}

DiffOperator make_hessian_operator(const GridTopology& topo, double h, int targets) {
  if (topo.N < 1 || topo.N > 3 || !(h > 0.0)) {
    throw ContractError("hessian operator needs 1 <= N <= 3 and h > 0");
  }
  DiffOperator op;
  op.topo = topo;
  op.entries = topo.N * topo.N;
  op.targets = targets;
  const double h2 = h * h;
  for (int k = 0; k < topo.N; ++k) {
    for (int l = 0; l < topo.N; ++l) {
      const int entry = k * topo.N + l;
      if (k == l) {
        for (int s : {-1, 0, 1}) {
          StencilTerm t;
          t.entry = entry;
          t.offset[k] = s;
          t.coef = (s == 0 ? -2.0 : 1.0) / h2;
          op.terms.push_back(t);
        }
      } else {
        for (int sk : {-1, 1}) {
          for (int sl : {-1, 1}) {
            StencilTerm t;
            t.entry = entry;
            t.offset[k] = sk;
            t.offset[l] = sl;
            t.coef = static_cast<double>(sk * sl) / (4.0 * h2);
            op.terms.push_back(t);
          }
        }
      }
    }
  }
  return op;
}

namespace serial {

void apply(const DiffOperator& op, std::span<const double> nodes, std::span<double> out) {
  check_sizes(op, nodes.size(), out.size());
  const std::size_t P = op.topo.points();
  for (std::size_t p = 0; p < P; ++p) {
    apply_point(op, p, nodes.data(), out.data());
  }
}

void apply_adjoint(const DiffOperator& op, std::span<const double> point_values,
                   std::span<double> nodes_out) {
  check_sizes(op, nodes_out.size(), point_values.size());
  const std::size_t Nn = op.topo.nodes();
  for (std::size_t n = 0; n < Nn; ++n) {
    adjoint_node(op, n, point_values.data(), nodes_out.data());
  }
}

double energy(const PointDensity& density, const Quadrature& quad, std::size_t points,
              std::size_t stride, std::span<const double> g, std::span<double> weighted_grad) {
  double sum = 0.0;
  const bool want_grad = !weighted_grad.empty();
  for (std::size_t p = 0; p < points; ++p) {
    const auto arg = g.subspan(p * stride, stride);
    const double w = quad.at(p);
    if (want_grad) {
      auto gr = weighted_grad.subspan(p * stride, stride);
      sum += w * density.value_and_gradient(p, arg, gr);
      for (double& v : gr) {
        v *= w;
      }
    } else {
      sum += w * density.value(p, arg);
    }
  }
  return sum;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    s += a[i] * b[i];
  }
  return s;
}

} // namespace serial

namespace parallel {

void apply(const DiffOperator& op, std::span<const double> nodes, std::span<double> out) {
  check_sizes(op, nodes.size(), out.size());
  const auto P = static_cast<std::ptrdiff_t>(op.topo.points());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t p = 0; p < P; ++p) {
    apply_point(op, static_cast<std::size_t>(p), nodes.data(), out.data());
  }
}

void apply_adjoint(const DiffOperator& op, std::span<const double> point_values,
                   std::span<double> nodes_out) {
  check_sizes(op, nodes_out.size(), point_values.size());
  const auto Nn = static_cast<std::ptrdiff_t>(op.topo.nodes());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t n = 0; n < Nn; ++n) {
    adjoint_node(op, static_cast<std::size_t>(n), point_values.data(), nodes_out.data());
  }
}

double energy(const PointDensity& density, const Quadrature& quad, std::size_t points,
              std::size_t stride, std::span<const double> g, std::span<double> weighted_grad) {
  const std::size_t blocks = (points + kBlock - 1) / kBlock;
  std::vector<double> partial(blocks, 0.0);
  const bool want_grad = !weighted_grad.empty();
  std::exception_ptr failure;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(blocks); ++b) {
    try {
      const std::size_t lo = static_cast<std::size_t>(b) * kBlock;
      const std::size_t hi = std::min(points, lo + kBlock);
      double s = 0.0;
      for (std::size_t p = lo; p < hi; ++p) {
        const auto arg = g.subspan(p * stride, stride);
        const double w = quad.at(p);
        if (want_grad) {
          auto gr = weighted_grad.subspan(p * stride, stride);
          s += w * density.value_and_gradient(p, arg, gr);
          for (double& v : gr) {
            v *= w;
          }
        } else {
          s += w * density.value(p, arg);
        }
      }
      partial[static_cast<std::size_t>(b)] = s;
    } catch (...) {
#pragma omp critical(reithom_kernel_failure)
      if (!failure) {
        failure = std::current_exception();
      }
    }
  }
  if (failure) {
    std::rethrow_exception(failure);
  }
  double sum = 0.0;
  for (double s : partial) {
    sum += s;
  }
  return sum;
}

double dot(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size();
  const std::size_t blocks = (n + kBlock - 1) / kBlock;
  std::vector<double> partial(blocks, 0.0);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(blocks); ++k) {
    const std::size_t lo = static_cast<std::size_t>(k) * kBlock;
    const std::size_t hi = std::min(n, lo + kBlock);
    double s = 0.0;
    for (std::size_t i = lo; i < hi; ++i) {
      s += a[i] * b[i];
    }
    partial[static_cast<std::size_t>(k)] = s;
  }
  double sum = 0.0;
  for (double s : partial) {
    sum += s;
  }
  return sum;
}

} // namespace parallel

void apply(Backend b, const DiffOperator& op, std::span<const double> nodes, std::span<double> out) {
  b == Backend::serial ? serial::apply(op, nodes, out) : parallel::apply(op, nodes, out);
}

void apply_adjoint(Backend b, const DiffOperator& op, std::span<const double> point_values,
                   std::span<double> nodes_out) {
  b == Backend::serial ? serial::apply_adjoint(op, point_values, nodes_out)
                       : parallel::apply_adjoint(op, point_values, nodes_out);
}

double energy(Backend b, const PointDensity& density, const Quadrature& quad, std::size_t points,
              std::size_t stride, std::span<const double> g, std::span<double> weighted_grad) {
  return b == Backend::serial ? serial::energy(density, quad, points, stride, g, weighted_grad)
                              : parallel::energy(density, quad, points, stride, g, weighted_grad);
}

double dot(Backend b, std::span<const double> a, std::span<const double> c) {
  return b == Backend::serial ? serial::dot(a, c) : parallel::dot(a, c);
}

void set_thread_count(int threads) {
  if (threads > 0) {
    omp_set_num_threads(threads);
  }
}

int thread_count() { return omp_get_max_threads(); }

} // namespace reithom::kernels
