#include "reithom/error.hpp"
#include "reithom/integrand.hpp"
#include "reithom/nfunction.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

using namespace reithom;
using nfunction::NFunction;

namespace {

NFunction square() { return integrand::square_nfunction(); }

/// Legendre transform by brute force over a fine s-grid.
double brute_conjugate(const NFunction& nf, double t, double s_max, int n) {
  double best = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double s = s_max * i / n;
    best = std::max(best, s * t - nf(s));
  }
  return best;
}

} // namespace

TEST_CASE("eval_pair closed forms") {
  auto [b0, d0] = nfunction::eval_pair(square(), 0.0);
  CHECK(b0 == 0.0);
  CHECK(d0 == 0.0);

  auto [b3, d3] = nfunction::eval_pair(nfunction::from_catalog("power:3"), 2.0);
  CHECK(b3 == doctest::Approx(8.0 / 3.0).epsilon(1e-14));
  CHECK(d3 == doctest::Approx(4.0).epsilon(1e-14));

  auto [be, de] = nfunction::eval_pair(nfunction::from_catalog("exp"), 1.0);
  CHECK(be == doctest::Approx(std::exp(1.0) - 2.0).epsilon(1e-14));
  CHECK(de == doctest::Approx(std::exp(1.0) - 1.0).epsilon(1e-14));

  CHECK_THROWS_AS(nfunction::eval_pair(square(), -1.0), DomainError);
}

TEST_CASE("catalog parsing") {
  CHECK_THROWS_AS(nfunction::from_catalog("power:1"), ConfigError);
  CHECK_THROWS_AS(nfunction::from_catalog("nonsense"), ConfigError);
  CHECK(nfunction::from_catalog("plog:2,1")(1.0) == doctest::Approx(std::log(2.0)));
}

TEST_CASE("density fallback by finite differences") {
  const NFunction nf("cubic-fd", [](double t) { return t * t * t / 3.0; });
  CHECK(nf.density_is_finite_difference());
  CHECK(nf.density(2.0) == doctest::Approx(4.0).epsilon(1e-8));
}

TEST_CASE("conjugate closed forms") {
  const auto half_square = nfunction::from_catalog("power:2");
  CHECK(nfunction::conjugate(half_square, 3.0) == doctest::Approx(4.5).epsilon(1e-12));
  CHECK(nfunction::conjugate(nfunction::from_catalog("power:3"), 1.0) ==
        doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  for (const char* spec : {"power:2", "power:3", "plog:2,1", "exp"}) {
    CHECK(nfunction::conjugate(nfunction::from_catalog(spec), 0.0) == 0.0);
  }
}

TEST_CASE("conjugate agrees with a brute-force Legendre transform") {
  const auto nf = nfunction::from_catalog("plog:2,1");
  for (double t : {0.3, 1.0, 4.0}) {
    CHECK(nfunction::conjugate(nf, t) == doctest::Approx(brute_conjugate(nf, t, 10.0, 200000)).epsilon(1e-6));
  }
}

TEST_CASE("unbounded conjugate is reported") {
  // Linear growth is not an N-function at infinity: sup (s t - s) is unbounded for t > 1.
  const NFunction linear("linear", [](double t) { return t; }, [](double) { return 1.0; });
  CHECK_THROWS_AS(nfunction::conjugate(linear, 2.0), UnboundedConjugateError);
}

TEST_CASE("double conjugate reproduces B") {
  for (const char* spec : {"power:3", "power:1.5", "plog:2,1", "plog:3,2"}) {
    CAPTURE(spec);
    const auto nf = nfunction::from_catalog(spec);
    const auto conj = nf.conjugate_function();
    for (double t : nfunction::geometric_grid(1e-2, 1e2, 64)) {
      const double back = nfunction::conjugate(conj, t);
      CHECK(std::abs(back - nf(t)) <= 1e-6 * std::max(1.0, nf(t)));
    }
  }
}

TEST_CASE("Young inequality and its equality case") {
  for (const char* spec : {"power:3", "plog:2,1", "exp"}) {
    CAPTURE(spec);
    const auto nf = nfunction::from_catalog(spec);
    const auto grid = nfunction::geometric_grid(1e-2, 5.0, 24);
    for (double s : grid) {
      for (double t : grid) {
        const double slack = nf(s) + nfunction::conjugate(nf, t) - s * t;
        CHECK(slack >= -1e-8 * std::max(1.0, s * t));
      }
      const double b = nf.density(s);
      const double eq = nf(s) + nfunction::conjugate(nf, b) - s * b;
      CHECK(std::abs(eq) <= 1e-8 * std::max(1.0, s * b));
    }
  }
}

TEST_CASE("delta2 verdicts") {
  const auto cubic = nfunction::delta2_check(nfunction::from_catalog("power:3"), 1e-2, 1e4, 64);
  CHECK(cubic.holds);
  CHECK(cubic.alpha_est == doctest::Approx(8.0).epsilon(1e-12));
  CHECK(cubic.heuristic);

  const auto e = nfunction::delta2_check(nfunction::from_catalog("exp"), 1.0, 1e4, 64);
  CHECK_FALSE(e.holds);

  const auto plog = nfunction::delta2_check(nfunction::from_catalog("plog:2,1"), 1.0, 1e4, 64);
  CHECK(plog.holds);
  CHECK(plog.alpha_est <= 8.0);
  // Independent oracle: sup of 4 log(1 + 2t) / log(1 + t) over the same grid.
  double sup = 0.0;
  for (double t : nfunction::geometric_grid(1.0, 1e4, 64)) {
    sup = std::max(sup, 4.0 * std::log1p(2.0 * t) / std::log1p(t));
  }
  CHECK(plog.alpha_est == doctest::Approx(sup).epsilon(1e-12));
}

TEST_CASE("delta2 preconditions") {
  const auto nf = nfunction::from_catalog("power:2");
  CHECK_THROWS(nfunction::delta2_check(nf, 1.0, 0.5, 64));
  CHECK_THROWS(nfunction::delta2_check(nf, 1.0, 2.0, 4));
}

TEST_CASE("Luxemburg norm examples") {
  const std::vector<double> twos(100, 2.0);
  CHECK(nfunction::luxemburg_norm({twos, {}, 1.0, square()}) == doctest::Approx(2.0).epsilon(1e-9));

  const int n = 10000;
  std::vector<double> x(n);
  for (int i = 0; i < n; ++i) x[i] = (i + 0.5) / n;
  CHECK(nfunction::luxemburg_norm({x, {}, 1.0, square()}) ==
        doctest::Approx(1.0 / std::sqrt(3.0)).epsilon(1e-7));

  const std::vector<double> zeros(10, 0.0);
  CHECK(nfunction::luxemburg_norm({zeros, {}, 1.0, square()}) == 0.0);
}

TEST_CASE("Luxemburg norm scaling") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> U(-3.0, 3.0);
  std::vector<double> u(512);
  for (auto& v : u) v = U(rng);
  const auto nf = nfunction::from_catalog("plog:2,1");
  const double base = nfunction::luxemburg_norm({u, {}, 1.0, nf});
  for (double lambda : {0.5, 2.0, 10.0}) {
    std::vector<double> s(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) s[i] = lambda * u[i];
    CHECK(nfunction::luxemburg_norm({s, {}, 1.0, nf}) == doctest::Approx(lambda * base).epsilon(1e-8));
  }
}

TEST_CASE("Hoelder-type bound with the complementary norm") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> U(-4.0, 4.0);
  for (const char* spec : {"power:3", "plog:2,1"}) {
    CAPTURE(spec);
    const auto nf = nfunction::from_catalog(spec);
    const auto conj = nf.conjugate_function();
    for (int trial = 0; trial < 5; ++trial) {
      std::vector<double> u(256), v(256);
      for (auto& a : u) a = U(rng);
      for (auto& a : v) a = U(rng);
      double integral = 0.0;
      for (std::size_t i = 0; i < u.size(); ++i) integral += u[i] * v[i] / u.size();
      const double bound = 2.0 * nfunction::luxemburg_norm({u, {}, 1.0, nf}) *
                           nfunction::luxemburg_norm({v, {}, 1.0, conj});
      CHECK(std::abs(integral) <= bound + 1e-10);
    }
  }
}

TEST_CASE("norm-modular bracketing") {
  const auto nf = nfunction::from_catalog("power:3");
  for (double scale : {0.2, 0.7, 1.5, 4.0}) {
    std::vector<double> u(200);
    for (std::size_t i = 0; i < u.size(); ++i) u[i] = scale * std::sin(0.1 * static_cast<double>(i) + 0.3);
    const nfunction::LuxemburgNormRequest req{u, {}, 1.0, nf};
    const double norm = nfunction::luxemburg_norm(req);
    const double mod = nfunction::modular(req, 1.0);
    if (norm <= 1.0) {
      CHECK(mod <= norm + 1e-9);
    } else {
      CHECK(norm <= mod + 1e-9);
    }
  }
}

TEST_CASE("weighted quadrature matches uniform when weights are uniform") {
  std::vector<double> u{1.0, -2.0, 0.5, 3.0};
  std::vector<double> w(4, 0.25);
  const auto nf = nfunction::from_catalog("power:2");
  CHECK(nfunction::luxemburg_norm({u, w, 1.0, nf}) ==
        doctest::Approx(nfunction::luxemburg_norm({u, {}, 1.0, nf})).epsilon(1e-10));
}

TEST_CASE("invariant report for catalog entries") {
  for (const char* spec : {"power:2", "power:3", "plog:2,1", "exp"}) {
    CAPTURE(spec);
    CHECK(nfunction::check_invariants(nfunction::from_catalog(spec)).all());
  }
  const NFunction concave("sqrt", [](double t) { return std::sqrt(t); });
  CHECK_FALSE(nfunction::check_invariants(concave).all());
}

TEST_CASE("inverse") {
  const auto nf = nfunction::from_catalog("power:2");
  CHECK(nf.inverse(2.0) == doctest::Approx(2.0).epsilon(1e-10));
  CHECK(nf.inverse(0.0) == 0.0);
}
