#include "reithom/integrand.hpp"

#include "reithom/error.hpp"
#include "reithom/expression.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>

namespace reithom::integrand {

namespace {

constexpr std::size_t max_xi_entries = 81;

std::size_t xi_entries(int order, Dims dims) {
  const auto n = static_cast<std::size_t>(dims.N);
  return static_cast<std::size_t>(dims.d) * (order == 1 ? n : n * n);
}

double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) {
    s += x * x;
  }
  return s;
}

double parse_param(const Params& params, const std::string& key, double fallback) {
  auto it = params.find(key);
  if (it == params.end()) {
    return fallback;
  }
  try {
    std::size_t used = 0;
    const double v = std::stod(it->second, &used);
    if (used != it->second.size()) {
      throw std::invalid_argument("trailing");
    }
    return v;
  } catch (const std::exception&) {
    throw ConfigError("parameter '" + key + "' is not a number: '" + it->second + "'");
  }
}

int parse_int_param(const Params& params, const std::string& key, int fallback) {
  const double v = parse_param(params, key, fallback);
  if (v != std::floor(v)) {
    throw ConfigError("parameter '" + key + "' must be an integer");
  }
  return static_cast<int>(v);
}

} // namespace

double wrap_cell(double x) noexcept { return x - std::round(x); }

double laminate_a1(double y) noexcept { return 1.0 / (2.0 + std::sin(2.0 * std::numbers::pi * y)); }
double laminate_a2(double z) noexcept { return 1.0 / (2.0 + std::cos(2.0 * std::numbers::pi * z)); }

nfunction::NFunction square_nfunction() {
  return nfunction::NFunction(
      "t^2", [](double t) { return t * t; }, [](double t) { return 2.0 * t; },
      nfunction::Delta2Witness{4.0, 0.0});
}

Integrand::Integrand(std::string label, int order, Dims dims, EvalFn eval, GradFn grad,
                     Growth growth, double regularization_delta, bool smooth)
    : label_(std::move(label)), order_(order), dims_(dims), xi_size_(0), eval_(std::move(eval)),
      grad_(std::move(grad)), growth_(std::move(growth)), delta_(regularization_delta),
      smooth_(smooth) {
  if (order_ != 1 && order_ != 2) {
    throw ContractError("integrand order must be 1 or 2");
  }
  if (dims_.N < 1 || dims_.N > 3 || dims_.d < 1) {
    throw ContractError("integrand dims require 1 <= N <= 3 and d >= 1");
  }
  xi_size_ = xi_entries(order_, dims_);
  if (xi_size_ > max_xi_entries) {
    throw ContractError("integrand tensor argument too large");
  }
  if (!(delta_ >= 0.0)) {
    throw ContractError("regularization delta must be nonnegative");
  }
  if (!(growth_.c1 > 0.0) || !(growth_.c2 > 0.0)) {
    throw ContractError("growth constants c1, c2 must be positive");
  }
}

void Integrand::check_shapes(std::span<const double> y, std::span<const double> z,
                             std::span<const double> xi) const {
  const auto n = static_cast<std::size_t>(dims_.N);
  if (y.size() != n || z.size() != n || xi.size() != xi_size_) {
    throw ContractError("integrand '" + label_ + "': expected y, z of size " + std::to_string(n) +
                        " and xi of size " + std::to_string(xi_size_));
  }
}

namespace {

/// Wrapped points and (for s = 2) symmetrized tensor, in stack buffers.
struct Prepared {
  std::array<double, 3> y{};
  std::array<double, 3> z{};
  std::array<double, max_xi_entries> xi{};
};

Prepared prepare(std::span<const double> y, std::span<const double> z, std::span<const double> xi,
                 int order, Dims dims) {
  Prepared p;
  for (std::size_t i = 0; i < y.size(); ++i) {
    p.y[i] = wrap_cell(y[i]);
    p.z[i] = wrap_cell(z[i]);
  }
  std::copy(xi.begin(), xi.end(), p.xi.begin());
  if (order == 2) {
    const auto n = static_cast<std::size_t>(dims.N);
    for (int c = 0; c < dims.d; ++c) {
      double* m = p.xi.data() + static_cast<std::size_t>(c) * n * n;
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
          const double s = 0.5 * (m[i * n + j] + m[j * n + i]);
          m[i * n + j] = s;
          m[j * n + i] = s;
        }
      }
    }
  }
  return p;
}

} // namespace

double Integrand::eval(std::span<const double> y, std::span<const double> z,
                       std::span<const double> xi) const {
  check_shapes(y, z, xi);
  const auto n = static_cast<std::size_t>(dims_.N);
  const Prepared p = prepare(y, z, xi, order_, dims_);
  return eval_(std::span(p.y.data(), n), std::span(p.z.data(), n),
               std::span(p.xi.data(), xi_size_));
}

void Integrand::grad(std::span<const double> y, std::span<const double> z,
                     std::span<const double> xi, std::span<double> out) const {
  check_shapes(y, z, xi);
  if (out.size() != xi_size_) {
    throw ContractError("integrand '" + label_ + "': gradient buffer has wrong size");
  }
  if (!differentiable()) {
    throw NonsmoothError("integrand '" + label_ +
                         "' is not differentiable at xi = 0; set a positive regularization delta");
  }
  const auto n = static_cast<std::size_t>(dims_.N);
  const Prepared p = prepare(y, z, xi, order_, dims_);
  grad_(std::span(p.y.data(), n), std::span(p.z.data(), n), std::span(p.xi.data(), xi_size_),
        out);
}

ScaleMap::ScaleMap(double epsilon) : epsilon_(epsilon) {
  if (!(epsilon > 0.0) || epsilon > 1.0) {
    throw ContractError("scale map requires epsilon in (0, 1]");
  }
}

void ScaleMap::map(std::span<const double> x, std::span<double> y, std::span<double> z) const {
  for (std::size_t i = 0; i < x.size(); ++i) {
    y[i] = wrap_cell(x[i] / epsilon_);
    z[i] = wrap_cell(x[i] / (epsilon_ * epsilon_));
  }
}

Profile profile_from_spec(const std::string& spec) {
  Profile pr;
  pr.name = spec;
  if (spec == "quadratic") {
    pr.value = [](double t) { return t * t; };
    pr.slope = [](double t) { return 2.0 * t; };
    pr.power_exponent = 2.0;
    return pr;
  }
  if (spec.rfind("power:", 0) == 0) {
    double p = 0.0;
    try {
      p = std::stod(spec.substr(6));
    } catch (const std::exception&) {
      throw ConfigError("bad profile exponent in '" + spec + "'");
    }
    if (!(p > 1.0)) {
      throw ConfigError("profile power:p requires p > 1");
    }
    pr.value = [p](double t) { return std::pow(t, p); };
    pr.slope = [p](double t) { return p * std::pow(t, p - 1.0); };
    pr.smooth_at_origin = p >= 2.0;
    pr.power_exponent = p;
    return pr;
  }
  if (spec.rfind("nfunction:", 0) == 0) {
    const auto nf = nfunction::from_catalog(spec.substr(10));
    pr.value = [nf](double t) { return nf.eval(t); };
    pr.slope = [nf](double t) { return nf.density(t); };
    // B(t) = o(t) at zero and b(0) = 0: the composition with |xi| is C^1.
    pr.smooth_at_origin = true;
    if (spec.rfind("nfunction:power:", 0) == 0) {
      const double p = std::stod(spec.substr(16));
      pr.power_exponent = p;
      pr.power_scale = 1.0 / p;
      pr.smooth_at_origin = p >= 2.0;
    }
    return pr;
  }
  throw ConfigError("unknown profile '" + spec +
                    "' (expected quadratic, power:p or nfunction:<name>)");
}

Integrand make_separable(std::string label, int order, Dims dims,
                         std::function<double(std::span<const double>, std::span<const double>)>
                             coefficient,
                         Profile profile, Growth growth, double regularization_delta) {
  const double delta = regularization_delta;
  auto eval = [coefficient, value = profile.value, delta](std::span<const double> y,
                                                          std::span<const double> z,
                                                          std::span<const double> xi) {
    double r2 = norm2(xi);
    if (delta > 0.0) {
      r2 += delta * delta;
    }
    return coefficient(y, z) * value(std::sqrt(r2));
  };
  auto grad = [coefficient, slope = profile.slope, delta](
                  std::span<const double> y, std::span<const double> z,
                  std::span<const double> xi, std::span<double> out) {
    double r2 = norm2(xi);
    if (delta > 0.0) {
      r2 += delta * delta;
    }
    const double r = std::sqrt(r2);
    if (r == 0.0) {
      std::fill(out.begin(), out.end(), 0.0);
      return;
    }
    const double factor = coefficient(y, z) * slope(r) / r;
    for (std::size_t i = 0; i < xi.size(); ++i) {
      out[i] = factor * xi[i];
    }
  };
  const bool smooth = profile.smooth_at_origin;
  Integrand ig(std::move(label), order, dims, std::move(eval), std::move(grad), std::move(growth),
               delta, smooth);
  ig.set_separable(SeparableForm{std::move(coefficient), std::move(profile)});
  return ig;
}

Integrand make_custom(const std::string& coefficient_expr, const std::string& profile_spec,
                      int order, Dims dims, Growth growth, double regularization_delta) {
  std::vector<std::string> vars;
  for (int i = 1; i <= dims.N; ++i) {
    vars.push_back("y" + std::to_string(i));
  }
  for (int i = 1; i <= dims.N; ++i) {
    vars.push_back("z" + std::to_string(i));
  }
  const Expression expr(coefficient_expr, vars);
  const auto n = static_cast<std::size_t>(dims.N);
  auto coefficient = [expr, n](std::span<const double> y, std::span<const double> z) {
    std::array<double, 6> args{};
    std::copy(y.begin(), y.end(), args.begin());
    std::copy(z.begin(), z.end(), args.begin() + static_cast<std::ptrdiff_t>(n));
    return expr(std::span<const double>(args.data(), 2 * n));
  };
  return make_separable("custom[" + coefficient_expr + "|" + profile_spec + "]", order, dims,
                        std::move(coefficient), profile_from_spec(profile_spec), std::move(growth),
                        regularization_delta);
}

Integrand catalog(const std::string& name, const Params& params) {
  const int order = parse_int_param(params, "order", 1);
  const int N = parse_int_param(params, "N", 1);
  if (order != 1 && order != 2) {
    throw ConfigError("catalog parameter 'order' must be 1 or 2");
  }
  if (N < 1 || N > 3) {
    throw ConfigError("catalog parameter 'N' must be 1, 2 or 3");
  }
  const Dims dims{N, 1};
  auto delta_for = [&](bool smooth) {
    return parse_param(params, "delta", smooth ? 0.0 : 1e-6);
  };

  Integrand result = [&]() -> Integrand {
    if (name == "quadratic_laminate") {
      auto coef = [](std::span<const double> y, std::span<const double> z) {
        return laminate_a1(y[0]) * laminate_a2(z[0]);
      };
      auto ig = make_separable("quadratic_laminate", order, dims, coef,
                               profile_from_spec("quadratic"),
                               Growth{1.0 / 9.0, 1.0, square_nfunction()}, delta_for(true));
      ig.set_oracle("reiterated harmonic mean: fbar_hom(xi) = hm(a1) hm(a2) |xi|^2 = |xi|^2 / 4; "
                    "f_hom(y, xi) = a1(y) |xi|^2 / 2");
      return ig;
    }
    if (name == "p_laminate") {
      const double p = parse_param(params, "p", 3.0);
      if (!(p > 1.0)) {
        throw ConfigError("p_laminate requires p > 1");
      }
      auto coef = [](std::span<const double>, std::span<const double> z) {
        return laminate_a2(z[0]);
      };
      auto profile = profile_from_spec("power:" + std::to_string(p));
      const bool smooth = profile.smooth_at_origin;
      auto ig = make_separable("p_laminate", order, dims, coef, std::move(profile),
                               Growth{p / 3.0, p, nfunction::from_catalog("power:" + std::to_string(p))},
                               delta_for(smooth));
      ig.set_oracle("1-D p-Laplacian: f_hom(xi) = (int a2^{-1/(p-1)} dz)^{-(p-1)} |xi|^p");
      return ig;
    }
    if (name == "orlicz_plog") {
      const double p = parse_param(params, "p", 2.0);
      const double q = parse_param(params, "q", 1.0);
      const std::string spec = "plog:" + std::to_string(p) + "," + std::to_string(q);
      auto nf = nfunction::from_catalog(spec);
      auto coef = [](std::span<const double> y, std::span<const double> z) {
        return laminate_a1(y[0]) * laminate_a2(z[0]);
      };
      auto profile = profile_from_spec("nfunction:" + spec);
      profile.smooth_at_origin = p + q >= 2.0;
      return make_separable("orlicz_plog", order, dims, coef, std::move(profile),
                            Growth{1.0 / 9.0, 1.0, nf}, delta_for(p + q >= 2.0));
    }
    if (name == "constant_B") {
      const std::string spec = params.count("nf") ? params.at("nf") : "power:2";
      auto nf = nfunction::from_catalog(spec);
      auto profile = profile_from_spec("nfunction:" + spec);
      const bool smooth = profile.smooth_at_origin;
      auto ig = make_separable(
          "constant_B", order, dims,
          [](std::span<const double>, std::span<const double>) { return 1.0; }, std::move(profile),
          Growth{1.0, 1.0, nf}, delta_for(smooth));
      ig.set_oracle("no oscillation: f_hom = fbar_hom = B(|xi|)");
      return ig;
    }
    throw ConfigError("unknown integrand '" + name +
                      "' (expected quadratic_laminate, p_laminate, orlicz_plog, constant_B)");
  }();
  result.set_catalog(name, params);
  return result;
}

bool ValidationReport::all_pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.pass; });
}

const HypothesisCheck& ValidationReport::get(const std::string& name) const {
  for (const auto& c : checks) {
    if (c.name == name) {
      return c;
    }
  }
  throw ContractError("validation report has no check named '" + name + "'");
}

namespace {

struct Sample {
  std::vector<double> y;
  std::vector<double> z;
  std::vector<double> xi;
};

void symmetrize(std::vector<double>& xi, int order, Dims dims) {
  if (order != 2) {
    return;
  }
  const auto n = static_cast<std::size_t>(dims.N);
  for (int c = 0; c < dims.d; ++c) {
    double* m = xi.data() + static_cast<std::size_t>(c) * n * n;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        m[i * n + j] = m[j * n + i] = 0.5 * (m[i * n + j] + m[j * n + i]);
      }
    }
  }
}

} // namespace

ValidationReport validate(const Integrand& ig, int sample_budget, std::uint64_t seed) {
  if (sample_budget < 1000) {
    throw ContractError("validate requires a sample budget of at least 1000");
  }
  const Dims dims = ig.dims();
  const auto n = static_cast<std::size_t>(dims.N);
  const std::size_t m = ig.xi_size();
  const auto& growth = ig.growth();

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> cell(-0.5, 0.5);
  std::uniform_real_distribution<double> log_mag(std::log(1e-2), std::log(1e2));
  std::normal_distribution<double> gauss(0.0, 1.0);

  auto random_xi = [&](double magnitude) {
    std::vector<double> xi(m);
    for (auto& v : xi) {
      v = gauss(rng);
    }
    symmetrize(xi, ig.order(), dims);
    const double r = std::sqrt(norm2(xi));
    for (auto& v : xi) {
      v *= magnitude / (r > 0.0 ? r : 1.0);
    }
    return xi;
  };

  // Monte Carlo samples plus a y/z lattice swept at fixed magnitudes.
  std::vector<Sample> samples;
  samples.reserve(static_cast<std::size_t>(sample_budget));
  const int mc = sample_budget / 2;
  for (int k = 0; k < mc; ++k) {
    Sample s{std::vector<double>(n), std::vector<double>(n), {}};
    for (std::size_t i = 0; i < n; ++i) {
      s.y[i] = cell(rng);
      s.z[i] = cell(rng);
    }
    s.xi = k == 0 ? std::vector<double>(m, 0.0) : random_xi(std::exp(log_mag(rng)));
    samples.push_back(std::move(s));
  }
  const std::array<double, 5> magnitudes{1e-2, 0.3, 1.0, 10.0, 100.0};
  int per_axis = 2;
  while (std::pow(per_axis + 1, 2 * dims.N) * magnitudes.size() <= sample_budget - mc) {
    ++per_axis;
  }
  const auto lattice_pts = static_cast<std::size_t>(std::pow(per_axis, 2 * dims.N));
  for (std::size_t idx = 0; idx < lattice_pts; ++idx) {
    std::size_t rest = idx;
    Sample base{std::vector<double>(n), std::vector<double>(n), {}};
    for (std::size_t i = 0; i < 2 * n; ++i) {
      const double coord = -0.5 + (static_cast<double>(rest % per_axis) + 0.5) / per_axis;
      rest /= static_cast<std::size_t>(per_axis);
      (i < n ? base.y[i] : base.z[i - n]) = coord;
    }
    for (double mag : magnitudes) {
      Sample s = base;
      s.xi = random_xi(mag);
      samples.push_back(std::move(s));
    }
  }

  ValidationReport rep;
  rep.sample_budget = sample_budget;
  rep.seed = seed;
  rep.lower_ratio_min = std::numeric_limits<double>::infinity();
  rep.upper_ratio_max = 0.0;

  double worst_nonneg = 0.0;
  double worst_periodic = 0.0;
  double worst_lower = 0.0;
  double worst_upper = 0.0;
  double worst_convex = 0.0;
  double worst_grad = 0.0;
  double worst_subgrad = 0.0;
  double growth_c = 0.0;
  bool finite = true;
  const bool diff = ig.differentiable();

  std::vector<double> g(m);
  std::vector<double> g2(m);
  std::vector<double> xp(m);
  std::vector<double> shifted(n);
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const auto& s = samples[k];
    const double f = ig.eval_raw(s.y, s.z, s.xi);
    if (!std::isfinite(f)) {
      finite = false;
      continue;
    }
    worst_nonneg = std::max(worst_nonneg, -f);

    for (std::size_t i = 0; i < n; ++i) {
      shifted = s.y;
      shifted[i] += 1.0;
      const double fy = ig.eval_raw(shifted, s.z, s.xi);
      shifted = s.z;
      shifted[i] -= 1.0;
      const double fz = ig.eval_raw(s.y, shifted, s.xi);
      const double scale = std::max(1.0, std::abs(f));
      worst_periodic = std::max({worst_periodic, std::abs(fy - f) / scale, std::abs(fz - f) / scale});
    }

    const double r = std::sqrt(norm2(s.xi));
    const double B = growth.nf.eval(r);
    if (B > 0.0) {
      const double ratio = f / (growth.c1 * B);
      rep.lower_ratio_min = std::min(rep.lower_ratio_min, ratio);
      worst_lower = std::max(worst_lower, (growth.c1 * B - f) / std::max(1.0, growth.c1 * B));
    }
    const double upper = growth.c2 * (1.0 + B);
    rep.upper_ratio_max = std::max(rep.upper_ratio_max, f / upper);
    worst_upper = std::max(worst_upper, (f - upper) / upper);

    // Midpoint convexity against the next sample's tensor at the same (y, z).
    const auto& other = samples[(k + 1) % samples.size()].xi;
    for (std::size_t i = 0; i < m; ++i) {
      xp[i] = 0.5 * (s.xi[i] + other[i]);
    }
    const double f_other = ig.eval_raw(s.y, s.z, other);
    const double f_mid = ig.eval_raw(s.y, s.z, xp);
    const double avg = 0.5 * (f + f_other);
    worst_convex = std::max(worst_convex, (f_mid - avg) / std::max(1.0, std::abs(avg)));

    if (diff) {
      ig.grad_raw(s.y, s.z, s.xi, g);
      double gmax = 0.0;
      for (double v : g) {
        gmax = std::max(gmax, std::abs(v));
      }
      const double h = 1e-5 * std::max(1.0, r);
      double disc = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        xp = s.xi;
        xp[i] += h;
        const double fp = ig.eval_raw(s.y, s.z, xp);
        xp[i] -= 2.0 * h;
        const double fm = ig.eval_raw(s.y, s.z, xp);
        disc = std::max(disc, std::abs((fp - fm) / (2.0 * h) - g[i]));
      }
      worst_grad = std::max(worst_grad, disc / std::max(1.0, gmax));

      double dot = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        dot += g[i] * (other[i] - s.xi[i]);
      }
      const double gap = f + dot - f_other;
      worst_subgrad = std::max(
          worst_subgrad, gap / std::max({1.0, std::abs(f), std::abs(f_other), std::abs(dot)}));

      const double b = growth.nf.density(1.0 + r);
      growth_c = std::max(growth_c, std::sqrt(norm2(g)) / (1.0 + b));
    }
  }

  rep.worst_convexity_violation = worst_convex;
  rep.max_gradient_discrepancy = worst_grad;
  rep.gradient_growth_constant = growth_c;

  auto add = [&](std::string name, bool pass, double worst, std::string detail) {
    rep.checks.push_back({std::move(name), pass, worst, std::move(detail)});
  };
  add("H1", finite && worst_nonneg <= 0.0, worst_nonneg, "finite and nonnegative on samples");
  add("H2", worst_periodic <= 1e-10, worst_periodic, "separate Y- and Z-periodicity");
  add("H3", worst_convex <= 1e-10, worst_convex, "midpoint convexity in xi");
  add("H4_lower", worst_lower <= 1e-12, worst_lower, "c1 B(|xi|) <= f");
  add("H4_upper", worst_upper <= 1e-12, worst_upper, "f <= c2 (1 + B(|xi|))");
  if (diff) {
    add("A3", worst_grad <= 1e-5, worst_grad, "gradient vs central differences");
    add("subgradient", worst_subgrad <= 1e-9, worst_subgrad, "f(xi') >= f(xi) + grad . (xi' - xi)");
    add("gradient_growth", std::isfinite(growth_c), growth_c, "|grad f| <= c (1 + b(1 + |xi|))");
  } else {
    add("A3", false, 0.0, "not differentiable at xi = 0 (delta = 0); solver will reject it");
  }
  return rep;
}

} // namespace reithom::integrand
