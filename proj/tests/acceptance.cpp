// Acceptance criteria. Prints one PASS/FAIL line per criterion.
// Exit status is 0 when the failing set equals the --expect-fail set.

#include "reithom/cellsolver.hpp"
#include "reithom/error.hpp"
#include "reithom/gammaharness.hpp"
#include "reithom/integrand.hpp"
#include "reithom/multiscale.hpp"
#include "reithom/nfunction.hpp"

#include <CLI11.hpp>
#include <fmt/core.h>

#include <chrono>
#include <cmath>
#include <functional>
#include <numbers>
#include <set>
#include <string>
#include <vector>

using namespace reithom;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Pinned tolerances.
constexpr double kTol1 = 1e-3;
constexpr double kTime1 = 10.0;
constexpr double kTol2 = 1e-3;
constexpr double kTol3Energy = 1e-8;
constexpr double kTol3Corrector = 1e-6;
constexpr double kSlack4 = 1e-6;
constexpr double kRel5Hom = 0.02;
constexpr double kRel5Oracle = 1e-6;
constexpr double kTime5 = 60.0;
constexpr double kTol6 = 1e-6;
constexpr double kTol7 = 1e-3;
constexpr double kTol8 = 5e-2;
constexpr double kTol9Conj = 1e-6;
constexpr double kTol9Young = 1e-8;
constexpr double kAlpha9 = 8.0;
constexpr double kTol10 = 1e-3;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double a1(double y) { return 1.0 / (2.0 + std::sin(kTwoPi * y)); }
double a2(double z) { return 1.0 / (2.0 + std::cos(kTwoPi * z)); }

using S = std::span<const double>;

multiscale::Generator z_only(std::function<double(double)> f) {
  return [f](S, S, S z) { return f(z[0]); };
}

Outcome reiterated_cell_problem() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto ig = integrand::catalog("quadratic_laminate");
  auto table = cellsolver::tabulate(ig, cellsolver::XiLattice::uniform(1, 0.0, 2.0, 9), 256, 256);
  const auto sol = cellsolver::solve_outer({ig, cellsolver::Level::outer, {}, {1.0}, 256, {}}, table);
  const double dt = seconds_since(t0);
  // Reiterated harmonic mean: (int 1/a1)^-1 (int 1/a2)^-1 = 1/2 * 1/2.
  const double err = std::abs(sol.energy - 0.25);
  return {err <= kTol1 && dt < kTime1,
          fmt::format("fbar_hom(1) = {:.10f}, |err| = {:.2e} (tol {:.0e}), {:.2f} s (limit {:.0f} s)",
                      sol.energy, err, kTol1, dt, kTime1)};
}

Outcome p_growth_cell_problem() {
  const auto ig = integrand::catalog("p_laminate", {{"p", "3"}});
  const auto sol = cellsolver::solve_inner({ig, cellsolver::Level::inner, {0.0}, {1.0}, 256, {}});
  double s = 0.0;
  const int n = 1000000;
  for (int i = 0; i < n; ++i) s += std::pow(a2((i + 0.5) / n), -0.5) / n;
  const double oracle = 1.0 / (s * s);
  const double err = std::abs(sol.energy - oracle);
  return {err <= kTol2, fmt::format("f_hom(1) = {:.10f}, oracle = {:.10f}, |err| = {:.2e} (tol {:.0e})",
                                    sol.energy, oracle, err, kTol2)};
}

Outcome jensen_case() {
  const auto ig = integrand::make_custom("1/(2+sin(2*pi*y1))", "quadratic", 1, {1, 1},
                                         {1.0 / 3.0, 1.0, integrand::square_nfunction()}, 0.0);
  const double y = 0.3;
  const double xi = 1.4;
  const auto sol = cellsolver::solve_inner({ig, cellsolver::Level::inner, {y}, {xi}, 256, {}});
  const double f = a1(y) * xi * xi;
  const double gap = std::abs(sol.energy - f);
  double norm = 0.0;
  for (double v : sol.corrector.values()) norm = std::max(norm, std::abs(v));
  return {gap <= kTol3Energy && norm <= kTol3Corrector,
          fmt::format("|f_hom - f| = {:.2e} (tol {:.0e}), max|psi| = {:.2e} (tol {:.0e})", gap,
                      kTol3Energy, norm, kTol3Corrector)};
}

Outcome sandwich_and_convexity() {
  int entries = 0;
  int violations = 0;
  double worst = 0.0;
  auto check_row = [&](const integrand::Growth& g, const std::vector<double>& xi, const std::vector<double>& v) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double B = g.nf(std::abs(xi[i]));
      const double lo = g.c1 * B - v[i];
      const double hi = v[i] - g.c2 * (1.0 + B);
      double mid = 0.0;
      if (i > 0 && i + 1 < v.size()) mid = v[i] - 0.5 * (v[i - 1] + v[i + 1]);
      worst = std::max({worst, lo, hi, mid});
      if (lo > kSlack4 || hi > kSlack4 || mid > kSlack4) ++violations;
      ++entries;
    }
  };
  for (const char* name : {"quadratic_laminate", "p_laminate", "orlicz_plog"}) {
    const auto ig = integrand::catalog(name);
    const auto lattice = cellsolver::XiLattice::uniform(1, -2.0, 2.0, 9);
    auto inner = cellsolver::tabulate(ig, lattice, 16, 64);
    std::vector<double> xi(lattice.size());
    for (std::size_t i = 0; i < xi.size(); ++i) xi[i] = lattice.point(i)[0];
    for (std::size_t j = 0; j < inner.y_count(); ++j) {
      std::vector<double> row(lattice.size());
      for (std::size_t i = 0; i < row.size(); ++i) row[i] = inner.value(j, i);
      check_row(ig.growth(), xi, row);
    }
    // Outer values on the interior of the lattice keep the optimum inside the hull.
    std::vector<double> oxi, outer;
    for (double x : {-1.0, -0.5, 0.0, 0.5, 1.0}) {
      oxi.push_back(x);
      outer.push_back(cellsolver::solve_outer({ig, cellsolver::Level::outer, {}, {x}, 64, {}}, inner).energy);
    }
    check_row(ig.growth(), oxi, outer);
  }
  return {violations == 0, fmt::format("{} entries, {} violations, worst excess {:.2e} (slack {:.0e})", entries,
                                       violations, worst, kSlack4)};
}

Outcome gamma_study() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto ig = integrand::catalog("quadratic_laminate");
  fields::MacroGrid grid;
  grid.xi0 = {1.0};
  const std::vector<double> eps{0.25, 0.125, 0.0625, 0.03125};
  const auto study = gammaharness::convergence_study(ig, grid, eps, 16, 0.25);
  const double dt = seconds_since(t0);

  bool decreasing = true;
  for (std::size_t i = 1; i < study.residuals.size(); ++i) {
    decreasing = decreasing && study.residuals[i] < study.residuals[i - 1];
  }
  const double last = study.residuals.back() / 0.25;

  // Exact minimum of the discrete problem: (h sum 1/a_eps)^-1 over cell centers.
  double worst_oracle = 0.0;
  for (std::size_t k = 0; k < study.runs.size(); ++k) {
    const auto& run = study.runs[k];
    const double h = run.grid.spacing();
    double s = 0.0;
    for (int i = 0; i < run.grid.cells; ++i) {
      const double x = (i + 0.5) * h;
      s += h / (a1(x / eps[k]) * a2(x / (eps[k] * eps[k])));
    }
    worst_oracle = std::max(worst_oracle, std::abs(run.energy - 1.0 / s) * s);
  }
  std::string res;
  for (double r : study.residuals) res += fmt::format("{}{:.3e}", res.empty() ? "" : ", ", r);
  return {decreasing && last < kRel5Hom && worst_oracle <= kRel5Oracle && dt < kTime5,
          fmt::format("residuals [{}] strictly decreasing = {}, rel at 2^-5 = {:.2e} (< {:.0e}), "
                      "worst rel oracle gap = {:.2e} (tol {:.0e}), {:.2f} s (limit {:.0f} s)",
                      res, decreasing ? "yes" : "no", last, kRel5Hom, worst_oracle, kRel5Oracle, dt, kTime5)};
}

Outcome norm_convergence() {
  multiscale::OscillatingSequence seq;
  seq.generator = z_only([](double z) { return std::cos(kTwoPi * z); });
  seq.epsilons = {0.25, 0.125, 0.0625, 0.03125, 0.015625};
  seq.grid.cells = 4096 * 16;
  const auto r = multiscale::luxemburg_limit_check(seq, integrand::square_nfunction());
  const double want = std::sqrt(0.5);
  double worst = std::abs(r.target - want);
  for (double v : r.norms) worst = std::max(worst, std::abs(v - want));
  return {worst <= kTol6, fmt::format("max |norm - sqrt(1/2)| over {} epsilons and the limit = {:.2e} (tol {:.0e})",
                                      r.norms.size(), worst, kTol6)};
}

Outcome two_scale_pairing() {
  multiscale::OscillatingSequence seq;
  seq.generator = z_only([](double z) { return std::cos(kTwoPi * z); });
  seq.epsilons = {0.125};
  seq.grid.cells = 64 * 16;
  const auto r = multiscale::two_scale_pair(seq, z_only([](double z) { return std::cos(kTwoPi * z); }));
  const double err = std::abs(r.pairings.front() - 0.5);
  return {err <= kTol7, fmt::format("pairing at 2^-3 = {:.10f}, |err| = {:.2e} (tol {:.0e})", r.pairings.front(),
                                    err, kTol7)};
}

Outcome hessian_decomposition() {
  const std::vector<double> eps{0.125, 0.0625, 0.03125};
  multiscale::CorrectorTriple uy;
  uy.u = [](double) { return 0.0; };
  uy.U = [](double, double y) { return std::sin(kTwoPi * y) / (kTwoPi * kTwoPi); };
  uy.W = [](double, double, double) { return 0.0; };
  const auto ru = multiscale::verify_theorem1(uy, eps, [](S, S y, S) { return std::sin(kTwoPi * y[0]); });

  multiscale::CorrectorTriple wz;
  wz.u = [](double) { return 0.0; };
  wz.U = [](double, double) { return 0.0; };
  wz.W = [](double, double, double z) { return -std::cos(kTwoPi * z) / (kTwoPi * kTwoPi); };
  const auto rw = multiscale::verify_theorem1(wz, eps, z_only([](double z) { return std::cos(kTwoPi * z); }));

  auto decreasing = [](const std::vector<double>& r) {
    for (std::size_t i = 1; i < r.size(); ++i) {
      if (r[i] > r[i - 1]) return false;
    }
    return true;
  };
  const double eu = std::abs(ru.series.pairings.back() + 0.5);
  const double ew = std::abs(rw.series.pairings.back() - 0.5);
  const bool pass = eu <= kTol8 && ew <= kTol8 && decreasing(ru.series.residuals) &&
                    decreasing(rw.series.residuals);
  return {pass, fmt::format("U: pairing {:.6f} (|err| {:.2e}), residuals {:.3e} -> {:.3e}; W: pairing {:.6f} "
                            "(|err| {:.2e}), residuals {:.6e} -> {:.6e}; tol {:.0e}",
                            ru.series.pairings.back(), eu, ru.series.residuals.front(),
                            ru.series.residuals.back(), rw.series.pairings.back(), ew,
                            rw.series.residuals.front(), rw.series.residuals.back(), kTol8)};
}

Outcome orlicz_duality() {
  const auto grid = nfunction::geometric_grid(1e-2, 1e2, 64);
  double conj_err = 0.0;
  double young = 0.0;
  for (const char* spec : {"power:2", "power:3", "power:1.5", "plog:2,1"}) {
    const auto nf = nfunction::from_catalog(spec);
    const auto cc = nf.conjugate_function().conjugate_function();
    for (double t : grid) {
      const double b = nf.eval(t);
      conj_err = std::max(conj_err, std::abs(cc.eval(t) - b) / std::max(1.0, b));
    }
    for (double t : nfunction::geometric_grid(1e-2, 1e1, 16)) {
      for (double s : nfunction::geometric_grid(1e-2, 1e1, 16)) {
        young = std::min(young, nf.eval(t) + nfunction::conjugate(nf, s) - s * t);
      }
    }
  }
  const auto ex = nfunction::delta2_check(nfunction::from_catalog("exp"), 1.0, 1e2, 64);
  const auto cube = nfunction::delta2_check(nfunction::from_catalog("power:3"), 1e-2, 1e4, 64);
  const bool pass = conj_err <= kTol9Conj && young >= -kTol9Young && !ex.holds && cube.holds &&
                    cube.alpha_est <= kAlpha9 + 1e-12;
  return {pass, fmt::format("double-conjugate rel err {:.2e} (tol {:.0e}), min Young residual {:.2e} (>= -{:.0e}), "
                            "delta2(exp) = {}, delta2(t^3) = {} with alpha {:.6f} (<= {:.0f})",
                            conj_err, kTol9Conj, young, kTol9Young, ex.holds, cube.holds, cube.alpha_est, kAlpha9)};
}

Outcome second_order_cell_problem() {
  const auto ig = integrand::catalog("p_laminate", {{"p", "2"}, {"order", "2"}});
  double worst = 0.0;
  std::string vals;
  for (double xi : {1.0, 2.0, -0.5}) {
    const auto sol = cellsolver::solve_inner({ig, cellsolver::Level::inner, {0.0}, {xi}, 256, {}});
    worst = std::max(worst, std::abs(sol.energy - 0.5 * xi * xi));
    vals += fmt::format("{}f_hom({}) = {:.10f}", vals.empty() ? "" : ", ", xi, sol.energy);
  }
  return {worst <= kTol10, fmt::format("{}; max |err| = {:.2e} (tol {:.0e})", vals, worst, kTol10)};
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::vector<int> expected;
  app.add_option("--expect-fail", expected, "criteria whose failure is recorded and expected")->delimiter(',');
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"reiterated cell problem, quadratic laminate", reiterated_cell_problem},
      {"p-growth cell problem", p_growth_cell_problem},
      {"z-independent integrand", jensen_case},
      {"growth sandwich and convexity of tables", sandwich_and_convexity},
      {"gamma-convergence study, s = 1", gamma_study},
      {"Luxemburg norm of cos(2 pi x / eps^2)", norm_convergence},
      {"two-scale pairing", two_scale_pairing},
      {"hessian decomposition pairings", hessian_decomposition},
      {"Orlicz duality and delta2", orlicz_duality},
      {"second-order cell problem", second_order_cell_problem},
  };

  std::set<int> failed;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const Error& e) {
      o = {false, fmt::format("error: {}", e.what())};
    }
    if (!o.pass) failed.insert(id);
    fmt::print("{} {:>2} {}: {}\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first, o.detail);
    std::fflush(stdout);
  }
  const std::set<int> want(expected.begin(), expected.end());
  fmt::print("{} of {} criteria pass\n", criteria.size() - failed.size(), criteria.size());
  if (failed != want) {
    fmt::print("failing set differs from the expected set\n");
    return 1;
  }
  return 0;
}
