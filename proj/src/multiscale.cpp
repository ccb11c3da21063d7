#include "reithom/multiscale.hpp"

#include "reithom/error.hpp"
#include "reithom/gammaharness.hpp"
#include "reithom/integrand.hpp"

#include <omp.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace reithom::multiscale {

namespace {

constexpr std::size_t kBlock = 2048;

/// sum_{i < n} term(i) with fixed blocks combined in order (thread-count independent).
template <typename F>
double blocked_sum(std::size_t n, F&& term) {
  const std::size_t blocks = (n + kBlock - 1) / kBlock;
  std::vector<double> partial(blocks, 0.0);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(blocks); ++b) {
    const std::size_t lo = static_cast<std::size_t>(b) * kBlock;
    const std::size_t hi = std::min(n, lo + kBlock);
    double s = 0.0;
    for (std::size_t i = lo; i < hi; ++i) {
      s += term(i);
    }
    partial[static_cast<std::size_t>(b)] = s;
  }
  double sum = 0.0;
  for (double s : partial) {
    sum += s;
  }
  return sum;
}

void check_grid(const fields::MacroGrid& grid) {
  if (grid.N < 1 || grid.N > 3 || !(grid.length > 0.0) || grid.cells < 1) {
    throw ContractError("macro grid needs 1 <= N <= 3, positive length and cells");
  }
}

std::size_t ipow(std::size_t b, int e) {
  std::size_t r = 1;
  for (int i = 0; i < e; ++i) {
    r *= b;
  }
  return r;
}

/// Midpoint coordinates of flat point `i` on an N-d grid of n cells over (lo, lo + len).
void midpoint(std::size_t i, int N, std::size_t n, double lo, double len, double* out) {
  for (int a = N - 1; a >= 0; --a) {
    out[a] = lo + (static_cast<double>(i % n) + 0.5) * len / static_cast<double>(n);
    i /= n;
  }
}

/// Caps the per-axis resolution so that the 3N-dimensional product stays desk-sized.
int effective_resolution(int N, int resolution) {
  if (resolution < 1) {
    throw ContractError("target resolution must be positive");
  }
  if (N == 2) {
    return std::min(resolution, 16);
  }
  if (N == 3) {
    return std::min(resolution, 8);
  }
  return resolution;
}

/// Pairs u_eps with a test on the midpoints of `grid`.
double pairing_at(const fields::MacroGrid& grid, double eps, const Generator& u, const Generator& test) {
  const int N = grid.N;
  const auto n = static_cast<std::size_t>(grid.cells);
  const std::size_t P = ipow(n, N);
  const double w = std::pow(grid.spacing(), N);
  return w * blocked_sum(P, [&](std::size_t i) {
           std::array<double, 3> x{}, y{}, z{};
           midpoint(i, N, n, 0.0, grid.length, x.data());
           for (int a = 0; a < N; ++a) {
             y[a] = integrand::wrap_cell(x[a] / eps);
             z[a] = integrand::wrap_cell(x[a] / (eps * eps));
           }
           const std::span<const double> xs(x.data(), N), ys(y.data(), N), zs(z.data(), N);
           return u(xs, ys, zs) * test(xs, ys, zs);
         });
}

void finish_series(PairingSeries& s) {
  const std::size_t n = s.pairings.size();
  s.residuals.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    s.residuals[i] = std::abs(s.pairings[i] - s.target);
  }
  if (n >= 2) {
    const double r = s.epsilons[n - 2] / s.epsilons[n - 1];
    s.limit_estimate = (r * s.pairings[n - 1] - s.pairings[n - 2]) / (r - 1.0);
  } else if (n == 1) {
    s.limit_estimate = s.pairings[0];
  }
  s.fitted_order = gammaharness::fit_rate(s.epsilons, s.residuals);
}

} // namespace

void OscillatingSequence::validate() const {
  check_grid(grid);
  if (!generator) {
    throw ContractError("oscillating sequence needs a generator");
  }
  if (epsilons.empty()) {
    throw ContractError("oscillating sequence needs at least one epsilon");
  }
  for (std::size_t i = 0; i < epsilons.size(); ++i) {
    fields::cells_per_fast_period(grid, epsilons[i]);
    if (i > 0 && !(epsilons[i] < epsilons[i - 1])) {
      throw ContractError("epsilon list must be strictly decreasing");
    }
  }
}

double triple_integral(const Generator& u0, const Generator& test, const fields::MacroGrid& grid,
                       int resolution) {
  check_grid(grid);
  const int N = grid.N;
  const auto r = static_cast<std::size_t>(effective_resolution(N, resolution));
  const std::size_t per = ipow(r, N);
  const std::size_t total = per * per * per;
  const double w = grid.measure() / static_cast<double>(total);
  return w * blocked_sum(total, [&](std::size_t i) {
           std::array<double, 3> x{}, y{}, z{};
           midpoint(i % per, N, r, -0.5, 1.0, z.data());
           midpoint((i / per) % per, N, r, -0.5, 1.0, y.data());
           midpoint(i / (per * per), N, r, 0.0, grid.length, x.data());
           const std::span<const double> xs(x.data(), N), ys(y.data(), N), zs(z.data(), N);
           return u0(xs, ys, zs) * test(xs, ys, zs);
         });
}

PairingSeries two_scale_pair(const OscillatingSequence& seq, const Generator& test,
                             int target_resolution) {
  seq.validate();
  if (!test) {
    throw ContractError("two-scale pairing needs a test function");
  }
  PairingSeries s;
  s.epsilons = seq.epsilons;
  for (double eps : seq.epsilons) {
    s.pairings.push_back(pairing_at(seq.grid, eps, seq.generator, test));
  }
  s.target = triple_integral(seq.generator, test, seq.grid, target_resolution);
  finish_series(s);
  return s;
}

NormSeries luxemburg_limit_check(const OscillatingSequence& seq, const nfunction::NFunction& nf,
                                 int target_resolution) {
  seq.validate();
  NormSeries out;
  out.epsilons = seq.epsilons;
  const int N = seq.grid.N;
  const auto n = static_cast<std::size_t>(seq.grid.cells);
  const std::size_t P = ipow(n, N);
  for (double eps : seq.epsilons) {
    std::vector<double> values(P);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(P); ++i) {
      std::array<double, 3> x{}, y{}, z{};
      midpoint(static_cast<std::size_t>(i), N, n, 0.0, seq.grid.length, x.data());
      for (int a = 0; a < N; ++a) {
        y[a] = integrand::wrap_cell(x[a] / eps);
        z[a] = integrand::wrap_cell(x[a] / (eps * eps));
      }
      values[static_cast<std::size_t>(i)] = seq.generator(std::span<const double>(x.data(), N),
                                                          std::span<const double>(y.data(), N),
                                                          std::span<const double>(z.data(), N));
    }
    nfunction::LuxemburgNormRequest req{values, {}, seq.grid.measure(), nf};
    out.norms.push_back(nfunction::luxemburg_norm(req));
  }
  const auto r = static_cast<std::size_t>(effective_resolution(N, target_resolution));
  const std::size_t per = ipow(r, N);
  const std::size_t total = per * per * per;
  std::vector<double> values(total);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(total); ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    std::array<double, 3> x{}, y{}, z{};
    midpoint(i % per, N, r, -0.5, 1.0, z.data());
    midpoint((i / per) % per, N, r, -0.5, 1.0, y.data());
    midpoint(i / (per * per), N, r, 0.0, seq.grid.length, x.data());
    values[i] = seq.generator(std::span<const double>(x.data(), N), std::span<const double>(y.data(), N),
                              std::span<const double>(z.data(), N));
  }
  // The triple cell has measure |Omega| * 1 * 1.
  nfunction::LuxemburgNormRequest req{values, {}, seq.grid.measure(), nf};
  out.target = nfunction::luxemburg_norm(req);
  return out;
}

AveragingReport averaging_consistency(const OscillatingSequence& seq,
                                      const std::function<double(std::span<const double>)>& test_x_only,
                                      const std::function<double(std::span<const double>,
                                                                 std::span<const double>)>& test_xy,
                                      int target_resolution) {
  if (!test_x_only || !test_xy) {
    throw ContractError("averaging consistency needs both test functions");
  }
  const Generator tx = [&](std::span<const double> x, std::span<const double>, std::span<const double>) {
    return test_x_only(x);
  };
  const Generator txy = [&](std::span<const double> x, std::span<const double> y,
                            std::span<const double>) { return test_xy(x, y); };
  AveragingReport rep;
  rep.x_only = two_scale_pair(seq, tx, target_resolution);
  rep.xy = two_scale_pair(seq, txy, target_resolution);
  return rep;
}

std::vector<double> build_recovery_s1(const fields::MacroGrid& grid, std::span<const double> u,
                                      const fields::PeriodicField& phi,
                                      const fields::PeriodicField& psi, double epsilon) {
  check_grid(grid);
  fields::cells_per_fast_period(grid, epsilon);
  if (phi.cells() != fields::Cells::Y || psi.cells() != fields::Cells::YZ || phi.N() != grid.N ||
      psi.N() != grid.N || phi.components() != psi.components()) {
    throw ContractError("recovery needs phi on Y and psi on Y x Z with matching dimension");
  }
  const int N = grid.N;
  const int d = phi.components();
  const auto per = static_cast<std::size_t>(grid.cells + 1);
  const std::size_t nodes = ipow(per, N);
  if (u.size() != nodes * static_cast<std::size_t>(d)) {
    throw ContractError("macro field does not match the node grid");
  }
  std::vector<double> out(u.begin(), u.end());
  const double h = grid.spacing();
  const double eps2 = epsilon * epsilon;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t qq = 0; qq < static_cast<std::ptrdiff_t>(nodes); ++qq) {
    const auto q = static_cast<std::size_t>(qq);
    std::array<double, 3> x{};
    std::array<double, 6> yz{};
    std::size_t rest = q;
    for (int a = N - 1; a >= 0; --a) {
      x[a] = static_cast<double>(rest % per) * h;
      rest /= per;
    }
    for (int a = 0; a < N; ++a) {
      yz[a] = integrand::wrap_cell(x[a] / epsilon);
      yz[N + a] = integrand::wrap_cell(x[a] / eps2);
    }
    for (int k = 0; k < d; ++k) {
      const double ph = fields::interpolate(phi, std::span<const double>(yz.data(), N), k);
      const double ps = fields::interpolate(psi, std::span<const double>(yz.data(), 2 * N), k);
      out[q * d + k] += epsilon * ph + eps2 * ps;
    }
  }
  return out;
}

double recovery_gradient_defect(const fields::MacroGrid& grid, std::span<const double> u,
                                const fields::PeriodicField& phi, const fields::PeriodicField& psi,
                                double epsilon) {
  if (grid.N != 1 || phi.components() != 1) {
    throw ContractError("the recovery gradient check is implemented for 1-D scalar fields");
  }
  const std::vector<double> rec = build_recovery_s1(grid, u, phi, psi, epsilon);
  const fields::PeriodicField dphi = fields::gradient(phi);
  const fields::PeriodicField dpsi = fields::gradient(psi);
  const double h = grid.spacing();
  const double eps2 = epsilon * epsilon;
  double worst = 0.0;
  for (int i = 0; i < grid.cells; ++i) {
    const double xc = (i + 0.5) * h;
    const std::array<double, 2> yz{integrand::wrap_cell(xc / epsilon), integrand::wrap_cell(xc / eps2)};
    const double du_eps = (rec[static_cast<std::size_t>(i) + 1] - rec[static_cast<std::size_t>(i)]) / h;
    const double du = (u[static_cast<std::size_t>(i) + 1] - u[static_cast<std::size_t>(i)]) / h;
    // Component 1 of the Y x Z gradient is the z derivative.
    const double expected = du + fields::interpolate(dphi, std::span<const double>(yz.data(), 1), 0) +
                            fields::interpolate(dpsi, yz, 1);
    worst = std::max(worst, std::abs(du_eps - expected));
  }
  return worst;
}

double build_recovery_s2(const CorrectorTriple& ct, double epsilon, double x) {
  const double e2 = epsilon * epsilon;
  double v = ct.u ? ct.u(x) : 0.0;
  if (ct.U) {
    v += e2 * ct.U(x, integrand::wrap_cell(x / epsilon));
  }
  if (ct.W) {
    v += e2 * e2 * ct.W(x, integrand::wrap_cell(x / epsilon), integrand::wrap_cell(x / e2));
  }
  return v;
}

namespace {

/// Fourth-order central second difference.
template <typename F>
double second_derivative(F&& f, double t) {
  constexpr double d = 1e-3;
  return (-f(t + 2 * d) + 16 * f(t + d) - 30 * f(t) + 16 * f(t - d) - f(t - 2 * d)) / (12 * d * d);
}

} // namespace

Theorem1Report verify_theorem1(const CorrectorTriple& ct, const std::vector<double>& epsilons,
                               const Generator& test, double length, int cells_per_period,
                               int target_resolution) {
  if (ct.order != 2) {
    throw ContractError("the hessian decomposition check needs a second-order triple");
  }
  if (!test || epsilons.empty()) {
    throw ContractError("verify_theorem1 needs a test function and at least one epsilon");
  }
  if (cells_per_period < 8) {
    throw ResolutionError("at least 8 cells per fast period are required");
  }
  Theorem1Report rep;
  rep.cells_per_period = cells_per_period;
  PairingSeries& s = rep.series;
  s.epsilons = epsilons;
  for (std::size_t k = 0; k < epsilons.size(); ++k) {
    const double eps = epsilons[k];
    if (k > 0 && !(eps < epsilons[k - 1])) {
      throw ContractError("epsilon list must be strictly decreasing");
    }
    fields::MacroGrid grid;
    grid.length = length;
    grid.cells = static_cast<int>(std::round(length / (eps * eps))) * cells_per_period;
    fields::cells_per_fast_period(grid, eps);
    const double h = grid.spacing();
    const auto n = static_cast<std::size_t>(grid.cells);
    const double sum = blocked_sum(n, [&](std::size_t i) {
      const double x = (static_cast<double>(i) + 0.5) * h;
      const double H = (build_recovery_s2(ct, eps, x + h) - 2.0 * build_recovery_s2(ct, eps, x) +
                        build_recovery_s2(ct, eps, x - h)) /
                       (h * h);
      const std::array<double, 1> xs{x}, ys{integrand::wrap_cell(x / eps)},
          zs{integrand::wrap_cell(x / (eps * eps))};
      return H * test(xs, ys, zs);
    });
    s.pairings.push_back(h * sum);
  }
  const Generator limit = [&ct](std::span<const double> x, std::span<const double> y,
                                std::span<const double> z) {
    double v = 0.0;
    if (ct.u) {
      v += second_derivative([&](double t) { return ct.u(t); }, x[0]);
    }
    if (ct.U) {
      v += second_derivative([&](double t) { return ct.U(x[0], t); }, y[0]);
    }
    if (ct.W) {
      v += second_derivative([&](double t) { return ct.W(x[0], y[0], t); }, z[0]);
    }
    return v;
  };
  fields::MacroGrid omega;
  omega.length = length;
  s.target = triple_integral(limit, test, omega, target_resolution);
  finish_series(s);
  return rep;
}

report::CsvTable to_csv(const PairingSeries& series) {
  report::CsvTable t({"epsilon", "pairing", "target", "residual"});
  for (std::size_t i = 0; i < series.pairings.size(); ++i) {
    t.add_row({report::format_double(series.epsilons[i]), report::format_double(series.pairings[i]),
               report::format_double(series.target), report::format_double(series.residuals[i])});
  }
  return t;
}

} // namespace reithom::multiscale
