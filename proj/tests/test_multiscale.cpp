#include "reithom/cellsolver.hpp"
#include "reithom/error.hpp"
#include "reithom/gammaharness.hpp"
#include "reithom/integrand.hpp"
#include "reithom/multiscale.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace reithom;
using multiscale::Generator;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

using S = std::span<const double>;

Generator gen(std::function<double(double, double, double)> f) {
  return [f](S x, S y, S z) { return f(x[0], y[0], z[0]); };
}

multiscale::OscillatingSequence sequence(Generator g, std::vector<double> eps, int per_period = 16) {
  fields::MacroGrid grid;
  grid.xi0 = {0.0};
  const double emin = *std::min_element(eps.begin(), eps.end());
  grid.cells = static_cast<int>(std::lround(1.0 / (emin * emin))) * per_period;
  return {std::move(g), std::move(eps), grid};
}

const std::vector<double> kDyadic{0.125, 0.0625, 0.03125};

} // namespace

TEST_CASE("pairing examples") {
  auto seq = sequence(gen([](double, double, double z) { return std::cos(kTwoPi * z); }), kDyadic);
  const auto s = multiscale::two_scale_pair(seq, gen([](double, double, double z) { return std::cos(kTwoPi * z); }));
  CHECK(s.target == doctest::Approx(0.5).epsilon(1e-10));
  for (double p : s.pairings) CHECK(p == doctest::Approx(0.5).epsilon(1e-10));

  auto sin_y = sequence(gen([](double, double y, double) { return std::sin(kTwoPi * y); }), kDyadic);
  const auto s2 = multiscale::two_scale_pair(sin_y, gen([](double, double, double) { return 1.0; }));
  for (double p : s2.pairings) CHECK(std::abs(p) < 1e-13);

  auto xcos = sequence(gen([](double x, double y, double) { return x * std::cos(kTwoPi * y); }), kDyadic);
  const auto s3 = multiscale::two_scale_pair(xcos, gen([](double, double y, double) { return std::cos(kTwoPi * y); }));
  CHECK(s3.target == doctest::Approx(0.25).epsilon(1e-6));
  CHECK(s3.pairings.back() == doctest::Approx(0.25).epsilon(1e-3));
}

TEST_CASE("pairing is linear in the test function") {
  auto seq = sequence(gen([](double x, double y, double z) {
                        return (1.0 + x) * std::cos(kTwoPi * y) + std::sin(kTwoPi * z);
                      }),
                      kDyadic);
  auto t1 = gen([](double, double y, double) { return std::cos(kTwoPi * y); });
  auto t2 = gen([](double x, double, double z) { return x * std::sin(kTwoPi * z); });
  auto sum = gen([](double x, double y, double z) {
    return 2.0 * std::cos(kTwoPi * y) - 3.0 * x * std::sin(kTwoPi * z);
  });
  const auto a = multiscale::two_scale_pair(seq, t1);
  const auto b = multiscale::two_scale_pair(seq, t2);
  const auto c = multiscale::two_scale_pair(seq, sum);
  for (std::size_t i = 0; i < kDyadic.size(); ++i) {
    CHECK(c.pairings[i] == doctest::Approx(2.0 * a.pairings[i] - 3.0 * b.pairings[i]).epsilon(1e-12));
  }
}

TEST_CASE("pairing residual decays at least linearly on smooth data") {
  auto seq = sequence(gen([](double x, double y, double) { return std::exp(x) * std::cos(kTwoPi * y); }),
                      {0.25, 0.125, 0.0625, 0.03125});
  const auto s = multiscale::two_scale_pair(seq, gen([](double x, double y, double) {
    return std::sin(x) + std::cos(kTwoPi * y);
  }));
  CHECK(s.fitted_order >= 1.0);
}

TEST_CASE("incommensurate epsilon is rejected") {
  auto seq = sequence(gen([](double, double, double) { return 1.0; }), {0.3});
  seq.grid.cells = 1024;
  CHECK_THROWS_AS(multiscale::two_scale_pair(seq, gen([](double, double, double) { return 1.0; })), ContractError);
}

TEST_CASE("Luxemburg limits") {
  const auto sq = integrand::square_nfunction();
  auto cosz = sequence(gen([](double, double, double z) { return std::cos(kTwoPi * z); }),
                       {0.25, 0.125, 0.0625, 0.03125, 0.015625});
  const auto n = multiscale::luxemburg_limit_check(cosz, sq);
  CHECK(n.target == doctest::Approx(std::sqrt(0.5)).epsilon(1e-8));
  for (double v : n.norms) CHECK(v == doctest::Approx(std::sqrt(0.5)).epsilon(1e-8));

  auto constant = sequence(gen([](double, double, double) { return 3.0; }), kDyadic);
  for (double v : multiscale::luxemburg_limit_check(constant, sq).norms) CHECK(v == doctest::Approx(3.0));

  auto prod = sequence(gen([](double, double y, double z) { return std::cos(kTwoPi * y) * std::cos(kTwoPi * z); }),
                       kDyadic);
  CHECK(multiscale::luxemburg_limit_check(prod, sq).target == doctest::Approx(0.5).epsilon(1e-8));
}

TEST_CASE("averaging consistency") {
  auto cosz = sequence(gen([](double, double, double z) { return std::cos(kTwoPi * z); }), kDyadic);
  auto one_x = [](S) { return 1.0; };
  auto one_xy = [](S, S) { return 1.0; };
  const auto r = multiscale::averaging_consistency(cosz, one_x, one_xy);
  CHECK(std::abs(r.x_only.target) < 1e-12);
  for (double p : r.x_only.pairings) CHECK(std::abs(p) < 1e-12);

  auto two = sequence(gen([](double, double y, double) { return 2.0 + std::cos(kTwoPi * y); }), kDyadic);
  CHECK(multiscale::averaging_consistency(two, one_x, one_xy).x_only.target == doctest::Approx(2.0));

  auto xsin = sequence(gen([](double x, double y, double) { return x * std::sin(kTwoPi * y); }), kDyadic);
  const auto r3 = multiscale::averaging_consistency(xsin, one_x, [](S, S y) { return std::sin(kTwoPi * y[0]); });
  CHECK(r3.xy.target == doctest::Approx(0.25).epsilon(1e-6));
  CHECK(r3.xy.pairings.back() == doctest::Approx(0.25).epsilon(1e-3));
}

TEST_CASE("recovery sequence: zero correctors return u") {
  fields::MacroGrid g;
  g.cells = 256;
  const auto x = gammaharness::node_coordinates(g);
  const fields::PeriodicField phi(fields::Cells::Y, 1, 16);
  const fields::PeriodicField psi(fields::Cells::YZ, 1, 16);
  const auto rec = multiscale::build_recovery_s1(g, x, phi, psi, 0.25);
  CHECK(rec == x);
  CHECK_THROWS_AS(multiscale::build_recovery_s1(g, x, phi, psi, 0.3), ContractError);
}

TEST_CASE("recovery sequence: energy, gradient identity and distance") {
  const auto ig = integrand::catalog("quadratic_laminate");
  auto table = cellsolver::tabulate(ig, cellsolver::XiLattice::uniform(1, -2.0, 2.0, 17), 64, 64);
  const auto corr = cellsolver::build_correctors(ig, std::array{1.0}, 64, table);
  const double hom = corr.outer.energy;

  std::vector<double> defects, distances;
  const std::vector<double> eps{0.125, 0.0625, 0.03125, 0.015625};
  for (double e : eps) {
    fields::MacroGrid g;
    g.cells = static_cast<int>(std::lround(1.0 / (e * e))) * 16;
    const auto u = gammaharness::node_coordinates(g);
    const auto rec = multiscale::build_recovery_s1(g, u, corr.phi, corr.psi, e);
    const double f = gammaharness::energy_of(ig, g, e, rec);
    if (e == eps.back()) CHECK(std::abs(f - hom) <= 0.02 * hom);
    CHECK(f >= gammaharness::solve_epsilon(ig, g, e).energy - 1e-12);
    defects.push_back(multiscale::recovery_gradient_defect(g, u, corr.phi, corr.psi, e));
    std::vector<double> d(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) d[i] = rec[i] - u[i];
    distances.push_back(nfunction::luxemburg_norm({d, {}, 1.0, integrand::square_nfunction()}));
  }
  for (std::size_t i = 0; i < eps.size(); ++i) {
    // Bounded phi and psi: |u_eps - u| <= eps max|phi| + eps^2 max|psi|.
    CHECK(distances[i] <= 2.0 * eps[i]);
    CHECK(defects[i] <= 5.0 * eps[i]);
  }
}

TEST_CASE("second-order recovery sequence") {
  multiscale::CorrectorTriple ct;
  ct.u = [](double x) { return x * x / 2.0; };
  ct.U = [](double, double y) { return std::sin(kTwoPi * y); };
  ct.W = [](double, double, double z) { return std::cos(kTwoPi * z); };
  const double e = 0.25;
  CHECK(multiscale::build_recovery_s2(ct, e, 0.3) ==
        doctest::Approx(0.045 + e * e * std::sin(kTwoPi * 0.3 / e) +
                        std::pow(e, 4) * std::cos(kTwoPi * 0.3 / (e * e))));
}

TEST_CASE("hessian decomposition examples") {
  const std::vector<double> eps{0.125, 0.0625, 0.03125};
  multiscale::CorrectorTriple quad;
  quad.u = [](double x) { return x * x / 2.0; };
  quad.U = [](double, double) { return 0.0; };
  quad.W = [](double, double, double) { return 0.0; };
  const auto q = multiscale::verify_theorem1(quad, eps, gen([](double x, double, double) { return 1.0 + x; }));
  for (double p : q.series.pairings) CHECK(p == doctest::Approx(1.5).epsilon(1e-8));

  multiscale::CorrectorTriple uy;
  uy.u = [](double) { return 0.0; };
  uy.U = [](double, double y) { return std::sin(kTwoPi * y) / (kTwoPi * kTwoPi); };
  uy.W = [](double, double, double) { return 0.0; };
  const auto r = multiscale::verify_theorem1(uy, eps, gen([](double, double y, double) { return std::sin(kTwoPi * y); }));
  CHECK(r.series.target == doctest::Approx(-0.5).epsilon(1e-8));
  CHECK(r.series.pairings.back() == doctest::Approx(-0.5).epsilon(5e-2));
  CHECK(r.series.residuals[1] < r.series.residuals[0]);
  CHECK(r.series.residuals[2] < r.series.residuals[1]);

  multiscale::CorrectorTriple wz;
  wz.u = [](double) { return 0.0; };
  wz.U = [](double, double) { return 0.0; };
  wz.W = [](double, double, double z) { return -std::cos(kTwoPi * z) / (kTwoPi * kTwoPi); };
  const auto w = multiscale::verify_theorem1(wz, eps, gen([](double, double, double z) { return std::cos(kTwoPi * z); }));
  CHECK(w.series.target == doctest::Approx(0.5).epsilon(1e-8));
  CHECK(w.series.pairings.back() == doctest::Approx(0.5).epsilon(5e-2));
  // The discrete second difference of cos(2 pi z) at 64 points per period
  // has the symbol (sin(pi / 64) / (pi / 64))^2; the residual is that bias.
  const double bias = 0.5 * (1.0 - std::pow(std::sin(std::numbers::pi / 64) / (std::numbers::pi / 64), 2));
  for (double res : w.series.residuals) CHECK(res == doctest::Approx(bias).epsilon(1e-6));

  CHECK_THROWS_AS(multiscale::verify_theorem1(wz, eps, gen([](double, double, double) { return 1.0; }), 1.0, 4),
                  ResolutionError);
}

TEST_CASE("pairing CSV") {
  multiscale::PairingSeries s;
  s.epsilons = {0.5};
  s.pairings = {0.25};
  s.residuals = {0.0};
  s.target = 0.25;
  const auto csv = multiscale::to_csv(s);
  CHECK(csv.to_string() == "epsilon,pairing,target,residual\n0.5,0.25,0.25,0\n");
}
