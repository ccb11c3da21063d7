#include "reithom/error.hpp"
#include "reithom/integrand.hpp"

#include <doctest.h>

#include <array>
#include <cmath>
#include <numbers>

using namespace reithom;
using integrand::Integrand;

namespace {

const std::array<double, 1> kZero{0.0};

double f1(const Integrand& ig, double y, double z, double xi) {
  return ig.eval(std::array{y}, std::array{z}, std::array{xi});
}

double g1(const Integrand& ig, double y, double z, double xi) {
  std::array<double, 1> out{};
  ig.grad(std::array{y}, std::array{z}, std::array{xi}, out);
  return out[0];
}

Integrand custom(const std::string& coef, const std::string& profile, double c1, double c2,
                 const std::string& nf = "power:2") {
  return integrand::make_custom(coef, profile, 1, {1, 1},
                                {c1, c2, nf == "square" ? integrand::square_nfunction()
                                                        : nfunction::from_catalog(nf)},
                                0.0);
}

} // namespace

TEST_CASE("eval examples") {
  const auto lam = integrand::catalog("quadratic_laminate");
  CHECK(f1(lam, 0.0, 0.0, 1.0) == doctest::Approx(1.0 / 6.0).epsilon(1e-15));
  CHECK(f1(lam, 0.3, -0.2, 0.0) == 0.0);
  CHECK(f1(integrand::catalog("p_laminate", {{"p", "3"}}), 0.1, 0.4, 0.0) == 0.0);
  CHECK(f1(custom("1", "quadratic", 1, 1, "square"), 0.0, 0.0, 3.0) == doctest::Approx(9.0));
}

TEST_CASE("gradient examples") {
  CHECK(g1(custom("1", "quadratic", 1, 1, "square"), 0.0, 0.0, 3.0) == doctest::Approx(6.0));
  CHECK(g1(custom("2", "power:3", 1, 2, "power:3"), 0.0, 0.0, -1.0) == doctest::Approx(-6.0));
  const auto smoothed = integrand::catalog("p_laminate", {{"p", "1.5"}});
  CHECK(smoothed.regularization_delta() > 0.0);
  CHECK(g1(smoothed, 0.0, 0.0, 0.0) == 0.0);
  CHECK(smoothed.differentiable());
}

TEST_CASE("catalog entries") {
  const auto lam = integrand::catalog("quadratic_laminate");
  CHECK(lam.separable().has_value());
  CHECK(lam.catalog_name() == "quadratic_laminate");
  // a1(0) a2(0) = (1/2)(1/3).
  CHECK(integrand::laminate_a1(0.0) * integrand::laminate_a2(0.0) == doctest::Approx(1.0 / 6.0));

  const auto cb = integrand::catalog("constant_B", {{"nf", "power:2"}});
  CHECK(f1(cb, 0.2, 0.1, 3.0) == doctest::Approx(4.5));

  const auto pl = integrand::catalog("p_laminate", {{"p", "3"}});
  CHECK(f1(pl, 0.0, 0.25, 2.0) == doctest::Approx(8.0 / 2.0));
  CHECK(pl.separable()->profile.power_exponent.value() == 3.0);

  CHECK_THROWS_AS(integrand::catalog("nope"), ConfigError);
  CHECK_THROWS_AS(integrand::catalog("p_laminate", {{"p", "1"}}), ConfigError);
  CHECK_THROWS_AS(integrand::catalog("quadratic_laminate", {{"order", "3"}}), ConfigError);
}

TEST_CASE("shape contracts and wrapping") {
  const auto lam = integrand::catalog("quadratic_laminate");
  CHECK_THROWS_AS(lam.eval(std::array{0.0, 0.0}, kZero, std::array{1.0}), ContractError);
  CHECK(f1(lam, 0.3 + 5.0, -0.1 - 2.0, 1.2) == doctest::Approx(f1(lam, 0.3, -0.1, 1.2)).epsilon(1e-13));
  CHECK(integrand::wrap_cell(0.75) == doctest::Approx(-0.25));
}

TEST_CASE("second-order arguments are symmetrized") {
  const auto ig = integrand::catalog("quadratic_laminate", {{"order", "2"}, {"N", "2"}});
  CHECK(ig.xi_size() == 4);
  const std::array<double, 2> y{0.1, 0.2}, z{0.0, 0.3};
  const double a = ig.eval(y, z, std::array{1.0, 2.0, 0.0, 1.0});
  const double b = ig.eval(y, z, std::array{1.0, 1.0, 1.0, 1.0});
  CHECK(a == doctest::Approx(b).epsilon(1e-14));
}

TEST_CASE("scale map periodicity for commensurate epsilon") {
  const double eps = 0.125;
  const integrand::ScaleMap map(eps);
  const auto lam = integrand::catalog("quadratic_laminate");
  for (double x : {0.013, 0.37, 0.81}) {
    std::array<double, 1> y{}, z{}, y2{}, z2{};
    map.map(std::array{x}, y, z);
    map.map(std::array{x + eps}, y2, z2);
    CHECK(lam.eval(y, z, std::array{1.0}) ==
          doctest::Approx(lam.eval(y2, std::array{z[0]}, std::array{1.0})).epsilon(1e-12));
    std::array<double, 1> y3{}, z3{};
    map.map(std::array{x + eps * eps}, y3, z3);
    CHECK(lam.eval(y, z, std::array{1.0}) ==
          doctest::Approx(lam.eval(y, z3, std::array{1.0})).epsilon(1e-12));
  }
}

TEST_CASE("validation: laminate growth constants") {
  // The laminate coefficient spans [1/9, 1], so with B = t^2 the tight constants are 1/9 and 1.
  auto with_constants = [](double c1, double c2) {
    auto base = integrand::catalog("quadratic_laminate");
    const auto& sep = *base.separable();
    return integrand::make_separable("laminate", 1, {1, 1}, sep.coefficient, sep.profile,
                                     {c1, c2, integrand::square_nfunction()}, 0.0);
  };
  CHECK(integrand::validate(with_constants(1.0 / 9.0, 1.0), 1000, 1).all_pass());
  const auto loose = integrand::validate(with_constants(1.0 / 6.0, 0.5), 1000, 1);
  CHECK_FALSE(loose.all_pass());
  CHECK_FALSE(loose.get("H4_lower").pass);
}

TEST_CASE("validation failures") {
  const Integrand concave("concave", 1, {1, 1},
                          [](auto, auto, std::span<const double> xi) { return -xi[0] * xi[0]; },
                          [](auto, auto, std::span<const double> xi, std::span<double> out) {
                            out[0] = -2.0 * xi[0];
                          },
                          {1.0, 1.0, integrand::square_nfunction()}, 0.0, true);
  CHECK_FALSE(integrand::validate(concave, 1000, 2).get("H3").pass);

  const auto quartic = custom("1", "power:4", 0.01, 1.0, "square");
  CHECK_FALSE(integrand::validate(quartic, 1000, 2).get("H4_upper").pass);
}

TEST_CASE("validation is deterministic given the seed") {
  const auto ig = integrand::catalog("orlicz_plog");
  const auto a = integrand::validate(ig, 1000, 42);
  const auto b = integrand::validate(ig, 1000, 42);
  CHECK(a.worst_convexity_violation == b.worst_convexity_violation);
  CHECK(a.max_gradient_discrepancy == b.max_gradient_discrepancy);
  CHECK(a.lower_ratio_min == b.lower_ratio_min);
  CHECK(a.seed == 42);
}

TEST_CASE("subgradient inequality and gradient growth on catalog entries") {
  for (const char* name : {"quadratic_laminate", "p_laminate", "orlicz_plog"}) {
    CAPTURE(name);
    const auto rep = integrand::validate(integrand::catalog(name), 1000, 5);
    CHECK(rep.get("subgradient").pass);
    CHECK(rep.get("gradient_growth").pass);
    CHECK(std::isfinite(rep.gradient_growth_constant));
  }
}

TEST_CASE("custom coefficient expressions are parsed eagerly") {
  CHECK_THROWS_AS(custom("1/(2+cos(2*pi*z1)", "quadratic", 1, 1), ConfigError);
  CHECK_THROWS_AS(custom("w1", "quadratic", 1, 1), ConfigError);
  CHECK_THROWS_AS(custom("1", "cubicish", 1, 1), ConfigError);
  const auto ig = custom("1/(2+cos(2*pi*z1))", "quadratic", 1.0 / 3.0, 1.0, "square");
  CHECK(f1(ig, 0.0, 0.0, 1.0) == doctest::Approx(1.0 / 3.0));
}
