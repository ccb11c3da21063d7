#include "reithom/cellsolver.hpp"
#include "reithom/error.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

using namespace reithom;
using cellsolver::CellProblem;
using cellsolver::Level;
using cellsolver::XiLattice;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

integrand::Integrand a2_quadratic() {
  return integrand::make_custom("1/(2+cos(2*pi*z1))", "quadratic", 1, {1, 1},
                                {1.0 / 3.0, 1.0, integrand::square_nfunction()}, 0.0);
}

cellsolver::CellSolution inner(const integrand::Integrand& ig, double y, double xi, int res = 256) {
  return cellsolver::solve_inner(CellProblem{ig, Level::inner, {y}, {xi}, res, {}});
}

/// Midpoint rule with n points of (int a2^{-1/(p-1)})^{-(p-1)}.
double p_laplacian_oracle(double p, int n) {
  double s = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = -0.5 + (i + 0.5) / n;
    s += std::pow(2.0 + std::cos(kTwoPi * z), 1.0 / (p - 1.0)) / n;
  }
  return std::pow(s, -(p - 1.0));
}

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

} // namespace

TEST_CASE("inner problem: harmonic mean of a2") {
  const auto sol = inner(a2_quadratic(), 0.0, 1.0);
  CHECK(sol.energy == doctest::Approx(0.5).epsilon(1e-8));
  CHECK(sol.converged);
  CHECK(sol.energy <= sol.zero_corrector_energy + 1e-14);
  // Mean-zero corrector.
  double mean = 0.0;
  for (double v : sol.corrector.values()) mean += v;
  CHECK(std::abs(mean) / sol.corrector.values().size() < 1e-12);
  // Envelope derivative of xi^2 / 2 at xi = 1.
  CHECK(sol.energy_gradient.at(0) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("inner problem: z-independent integrand keeps psi = 0") {
  const auto ig = integrand::make_custom("1/(2+sin(2*pi*y1))", "power:3", 1, {1, 1},
                                         {1.0 / 9.0, 1.0, nfunction::from_catalog("power:3")}, 0.0);
  const double y = 0.2;
  const auto sol = inner(ig, y, 1.7);
  CHECK(std::abs(sol.energy - ig.eval(std::array{y}, std::array{0.0}, std::array{1.7})) <= 1e-8);
  CHECK(max_abs(sol.corrector.values()) <= 1e-6);
}

TEST_CASE("inner problem: p-growth against a 10^6-point quadrature oracle") {
  const auto sol = inner(integrand::catalog("p_laminate", {{"p", "3"}}), 0.0, 1.0);
  CHECK(sol.energy == doctest::Approx(p_laplacian_oracle(3.0, 1000000)).epsilon(1e-4));
}

TEST_CASE("inner problem: homogeneity and the zero slope") {
  const auto ig = integrand::catalog("p_laminate", {{"p", "3"}});
  CHECK(inner(ig, 0.0, 0.0, 64).energy == 0.0);
  const double e1 = inner(ig, 0.0, 1.0, 128).energy;
  const double e2 = inner(ig, 0.0, 2.0, 128).energy;
  CHECK(e2 == doctest::Approx(8.0 * e1).epsilon(1e-7));
}

TEST_CASE("inner problem: grid convergence at 32, 64, 128") {
  const auto ig = integrand::catalog("p_laminate", {{"p", "3"}});
  const double oracle = p_laplacian_oracle(3.0, 1000000);
  double prev = std::numeric_limits<double>::infinity();
  for (int res : {32, 64, 128}) {
    const double e = inner(ig, 0.0, 1.0, res).energy;
    CHECK(e <= prev + 1e-10);
    CHECK(e >= oracle - 1e-8);
    CHECK(e - oracle <= 1e-6);
    prev = e;
  }
}

TEST_CASE("inner problem: Lipschitz continuity in xi") {
  const auto ig = integrand::catalog("quadratic_laminate");
  const double base = inner(ig, 0.1, 1.0, 128).energy;
  // f_hom(y, .) is a1(y) |xi|^2 / 2; its slope on [0.9, 1.1] is at most 1.1 a1(y) <= 1.1.
  for (double h : {0.1, 0.05, 0.01}) {
    CHECK(std::abs(inner(ig, 0.1, 1.0 + h, 128).energy - base) <= 1.1 * h);
  }
}

TEST_CASE("inner problem: second order recovers the harmonic mean") {
  const auto ig = integrand::catalog("p_laminate", {{"p", "2"}, {"order", "2"}});
  for (double xi : {1.0, -1.5}) {
    CHECK(inner(ig, 0.0, xi).energy == doctest::Approx(0.5 * xi * xi).epsilon(1e-6));
  }
}

TEST_CASE("inner problem: contracts") {
  const auto ig = integrand::catalog("quadratic_laminate");
  CHECK_THROWS_AS(cellsolver::solve_inner(CellProblem{ig, Level::inner, {0.0}, {1.0}, 100, {}}), ContractError);
  CHECK_THROWS_AS(cellsolver::solve_inner(CellProblem{ig, Level::inner, {0.0}, {1.0, 2.0}, 64, {}}),
                  ContractError);
  CHECK_THROWS_AS(cellsolver::solve_inner(CellProblem{ig, Level::outer, {0.0}, {1.0}, 64, {}}), ContractError);
  const auto kinked = integrand::catalog("p_laminate", {{"p", "1.5"}, {"delta", "0"}});
  CHECK_THROWS_AS(inner(kinked, 0.0, 1.0, 64), NonsmoothError);
}

TEST_CASE("tabulate: laminate entries equal a1(y) hm(a2) xi^2") {
  const auto ig = integrand::catalog("quadratic_laminate");
  const auto table = cellsolver::tabulate(ig, XiLattice::uniform(1, -2.0, 2.0, 5), 16, 128);
  CHECK(table.y_count() == 16);
  for (std::size_t j = 0; j < table.y_count(); ++j) {
    const double a1 = integrand::laminate_a1(table.y_sample(j)[0]);
    for (std::size_t i = 0; i < 5; ++i) {
      const double xi = table.lattice().point(i)[0];
      CHECK(table.value(j, i) == doctest::Approx(0.5 * a1 * xi * xi).epsilon(1e-7));
    }
  }
  CHECK(table.flagged_entries() == 0);
}

TEST_CASE("tabulate: single-point lattice and constant_B") {
  const auto zero = cellsolver::tabulate(integrand::catalog("p_laminate"), XiLattice::uniform(1, 0.0, 0.0, 1), 4, 32);
  for (double v : zero.values()) CHECK(v == 0.0);

  const auto cb = integrand::catalog("constant_B", {{"nf", "power:3"}});
  const auto t = cellsolver::tabulate(cb, XiLattice::uniform(1, -1.0, 2.0, 7), 4, 32);
  for (std::size_t j = 0; j < t.y_count(); ++j) {
    for (std::size_t i = 0; i < 7; ++i) {
      const double xi = std::abs(t.lattice().point(i)[0]);
      CHECK(t.value(j, i) == doctest::Approx(xi * xi * xi / 3.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("tabulated entries satisfy the growth sandwich and midpoint convexity") {
  for (const char* name : {"quadratic_laminate", "p_laminate", "orlicz_plog"}) {
    CAPTURE(name);
    const auto ig = integrand::catalog(name);
    const auto t = cellsolver::tabulate(ig, XiLattice::uniform(1, -2.0, 2.0, 9), 16, 64);
    const auto& g = ig.growth();
    for (std::size_t j = 0; j < t.y_count(); ++j) {
      for (std::size_t i = 0; i < 9; ++i) {
        const double B = g.nf(std::abs(t.lattice().point(i)[0]));
        CHECK(t.value(j, i) >= g.c1 * B - 1e-6);
        CHECK(t.value(j, i) <= g.c2 * (1.0 + B) + 1e-6);
        if (i > 0 && i < 8) {
          CHECK(t.value(j, i) <= 0.5 * (t.value(j, i - 1) + t.value(j, i + 1)) + 1e-6);
        }
      }
    }
  }
}

TEST_CASE("eval_interp") {
  const auto cb = integrand::catalog("constant_B", {{"nf", "power:2"}});
  const auto t = cellsolver::tabulate(cb, XiLattice::uniform(1, 1.0, 2.0, 2), 4, 16);
  // Node values B(1) = 0.5 and B(2) = 2; the midpoint interpolates to 1.25 against the true 1.125.
  CHECK(cellsolver::eval_interp(t, std::array{0.0}, std::array{1.0}) == doctest::Approx(0.5));
  CHECK(cellsolver::eval_interp(t, std::array{0.0}, std::array{1.5}) == doctest::Approx(1.25));
  CHECK_THROWS_AS(cellsolver::eval_interp(t, std::array{0.0}, std::array{2.5}), RangeError);

  const auto lam = cellsolver::tabulate(integrand::catalog("quadratic_laminate"),
                                        XiLattice::uniform(1, 0.0, 1.0, 2), 8, 32);
  // y samples sit at -1/2 + j/8; 0.11 is nearest to 0.125, and 0.49 wraps to -0.5.
  CHECK(cellsolver::eval_interp(lam, std::array{0.11}, std::array{1.0}) ==
        doctest::Approx(lam.value(5, 1)));
  CHECK(lam.nearest_y(std::array{0.49}) == 0);
}

TEST_CASE("outer problem: reiterated harmonic mean") {
  const auto ig = integrand::catalog("quadratic_laminate");
  auto table = cellsolver::tabulate(ig, XiLattice::uniform(1, -2.0, 2.0, 17), 256, 256);
  const auto sol = cellsolver::solve_outer(CellProblem{ig, Level::outer, {}, {1.0}, 256, {}}, table);
  CHECK(sol.energy == doctest::Approx(0.25).epsilon(1e-6));
  CHECK(sol.energy <= sol.zero_corrector_energy);
  CHECK(sol.table_extensions == 0);

  const auto zero = cellsolver::solve_outer(CellProblem{ig, Level::outer, {}, {0.0}, 64, {}}, table);
  CHECK(std::abs(zero.energy) < 1e-12);
}

TEST_CASE("outer problem: y-independent inner density keeps phi = 0") {
  const auto ig = integrand::catalog("p_laminate", {{"p", "3"}});
  auto table = cellsolver::tabulate(ig, XiLattice::uniform(1, -2.0, 2.0, 17), 32, 128);
  const auto sol = cellsolver::solve_outer(CellProblem{ig, Level::outer, {}, {1.0}, 32, {}}, table);
  CHECK(sol.energy == doctest::Approx(table.value(0, 12)).epsilon(1e-10));
  CHECK(max_abs(sol.corrector.values()) < 1e-6);
}

TEST_CASE("outer problem: the inner lattice is extended on demand") {
  const auto ig = integrand::catalog("quadratic_laminate");
  // The optimal slope 1 + phi' = (2 + sin) / 2 reaches 1.5, beyond this hull.
  auto table = cellsolver::tabulate(ig, XiLattice::uniform(1, 0.0, 1.2, 7), 64, 128);
  const auto sol = cellsolver::solve_outer(CellProblem{ig, Level::outer, {}, {1.0}, 64, {}}, table);
  CHECK(sol.table_extensions >= 1);
  CHECK(table.lattice().upper[0] > 1.5);
  CHECK(sol.energy == doctest::Approx(0.25).epsilon(1e-4));

  auto bare = cellsolver::tabulate(ig, XiLattice::uniform(1, 0.0, 1.2, 7), 16, 64);
  bare.source.reset();
  CHECK_THROWS_AS(cellsolver::solve_outer(CellProblem{ig, Level::outer, {}, {1.0}, 16, {}}, bare), RangeError);
}

TEST_CASE("hom-table persistence round trip") {
  const auto ig = integrand::catalog("p_laminate", {{"p", "3"}});
  const auto t = cellsolver::tabulate(ig, XiLattice::uniform(1, -1.0, 1.0, 5), 8, 32);
  const auto dir = std::filesystem::temp_directory_path() / "reithom_tests" / "table";
  std::filesystem::create_directories(dir);
  cellsolver::save(t, dir / "t");
  const auto back = cellsolver::load(dir / "t");
  CHECK(back.values() == t.values());
  CHECK(back.gradients() == t.gradients());
  CHECK(back.converged() == t.converged());
  CHECK(back.y_samples() == 8);
  REQUIRE(back.source.has_value());
  CHECK(back.source->catalog_name() == "p_laminate");
  CHECK(back.inner_resolution == 32);
  CHECK_THROWS_AS(cellsolver::load(dir / "missing"), IoError);
}

TEST_CASE("correctors: outer and inner fields") {
  const auto ig = integrand::catalog("quadratic_laminate");
  auto table = cellsolver::tabulate(ig, XiLattice::uniform(1, -2.0, 2.0, 17), 64, 128);
  const auto c = cellsolver::build_correctors(ig, std::array{1.0}, 64, table);
  CHECK(c.all_converged);
  CHECK(c.outer.energy == doctest::Approx(0.25).epsilon(1e-4));
  // phi' = (2 + sin 2 pi y) / 2 - 1.
  auto dphi = fields::gradient(c.phi, fields::Scheme::spectral);
  std::vector<double> coords(1);
  for (std::size_t p = 0; p < dphi.points(); p += 7) {
    dphi.point_coordinates(p, coords);
    CHECK(dphi.at(p) == doctest::Approx(0.5 * std::sin(kTwoPi * coords[0])).epsilon(1e-2));
  }
}
