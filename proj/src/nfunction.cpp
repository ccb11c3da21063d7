#include "reithom/nfunction.hpp"

#include "reithom/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <string>

namespace reithom::nfunction {

struct NFunction::State {
  std::string label;
  Scalar eval;
  Scalar density;
  bool fd_density = false;
  std::optional<Delta2Witness> witness;
};

namespace {

void require_nonnegative(double t, const char* what) {
  if (!(t >= 0.0)) {
    throw DomainError(std::string(what) + ": argument must be a nonnegative real, got " +
                      std::to_string(t));
  }
}

double parse_number(std::string_view text, std::string_view spec) {
  double value = 0.0;
  const auto* first = text.data();
  const auto* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last) {
    throw ConfigError("bad numeric parameter '" + std::string(text) + "' in N-function spec '" +
                      std::string(spec) + "'");
  }
  return value;
}

} // namespace

NFunction::NFunction(std::string label, Scalar eval, Scalar density,
                     std::optional<Delta2Witness> witness) {
  if (!eval) {
    throw ContractError("NFunction requires an evaluation map");
  }
  auto state = std::make_shared<State>();
  state->label = std::move(label);
  state->witness = witness;
  if (density) {
    state->density = std::move(density);
  } else {
    state->fd_density = true;
    state->density = [B = eval](double t) {
      if (t <= 0.0) {
        return 0.0;
      }
      const double h = 1e-6 * std::max(t, 1.0);
      const double lo = std::max(t - h, 0.0);
      return (B(t + h) - B(lo)) / (t + h - lo);
    };
  }
  state->eval = std::move(eval);
  state_ = std::move(state);
}

double NFunction::eval(double t) const {
  require_nonnegative(t, "NFunction::eval");
  return state_->eval(t);
}

double NFunction::density(double t) const {
  require_nonnegative(t, "NFunction::density");
  return state_->density(t);
}

const std::string& NFunction::label() const noexcept { return state_->label; }
bool NFunction::density_is_finite_difference() const noexcept { return state_->fd_density; }
const std::optional<Delta2Witness>& NFunction::delta2_witness() const noexcept {
  return state_->witness;
}

double NFunction::inverse(double value) const {
  require_nonnegative(value, "NFunction::inverse");
  if (value == 0.0) {
    return 0.0;
  }
  double lo = 0.0;
  double hi = 1.0;
  int expansions = 0;
  while (eval(hi) < value) {
    lo = hi;
    hi *= 2.0;
    if (++expansions > 1100) {
      throw InvalidNFunctionError("B stays below " + std::to_string(value) + " on [0, 2^1100]");
    }
  }
  for (int it = 0; it < 400 && hi - lo > 1e-16 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (eval(mid) < value ? lo : hi) = mid;
  }
  return hi;
}

NFunction NFunction::conjugate_function(double tol) const {
  NFunction base = *this;
  return NFunction(
      "conj(" + label() + ")", [base, tol](double t) { return conjugate(base, t, tol); },
      [base](double t) { return conjugate_density(base, t); });
}

NFunction from_catalog(std::string_view spec) {
  const auto colon = spec.find(':');
  const std::string_view name = spec.substr(0, colon);
  const std::string_view args = colon == std::string_view::npos ? "" : spec.substr(colon + 1);

  if (name == "power") {
    if (args.empty()) {
      throw ConfigError("power N-function needs an exponent, e.g. power:2");
    }
    const double p = parse_number(args, spec);
    if (!(p > 1.0)) {
      throw ConfigError("power:p requires p > 1");
    }
    return NFunction(
        std::string(spec), [p](double t) { return std::pow(t, p) / p; },
        [p](double t) { return std::pow(t, p - 1.0); },
        Delta2Witness{std::pow(2.0, p), 0.0});
  }
  if (name == "plog") {
    double p = 2.0;
    double q = 1.0;
    if (!args.empty()) {
      const auto comma = args.find(',');
      p = parse_number(args.substr(0, comma), spec);
      if (comma != std::string_view::npos) {
        q = parse_number(args.substr(comma + 1), spec);
      }
    }
    if (!(p >= 1.0) || !(q >= 0.0) || !(p + q > 1.0) || (p == 1.0 && q == 0.0)) {
      throw ConfigError("plog:p,q requires p >= 1, q >= 0 and p + q > 1");
    }
    return NFunction(
        std::string(spec),
        [p, q](double t) { return std::pow(t, p) * std::pow(std::log1p(t), q); },
        [p, q](double t) {
          if (t == 0.0) {
            return 0.0;
          }
          const double L = std::log1p(t);
          double b = p * std::pow(t, p - 1.0) * std::pow(L, q);
          if (q != 0.0) {
            b += q * std::pow(t, p) * std::pow(L, q - 1.0) / (1.0 + t);
          }
          return b;
        });
  }
  if (name == "exp") {
    if (!args.empty()) {
      throw ConfigError("exp N-function takes no parameters");
    }
    return NFunction(
        "exp", [](double t) { return std::expm1(t) - t; }, [](double t) { return std::expm1(t); });
  }
  throw ConfigError("unknown N-function '" + std::string(spec) +
                    "' (expected power:p, plog:p,q or exp)");
}

std::pair<double, double> eval_pair(const NFunction& nf, double t) {
  require_nonnegative(t, "eval_pair");
  return {nf.eval(t), nf.density(t)};
}

namespace {

/// Bracket [lo, hi] around the root of b(s) = t.
std::pair<double, double> bracket_density_root(const NFunction& nf, double t) {
  double lo = 0.0;
  double hi = 1.0;
  const double cap = std::ldexp(1.0, 60);
  while (nf.density(hi) < t) {
    if (hi >= cap) {
      throw UnboundedConjugateError("density stays below t = " + std::to_string(t) +
                                    " on [0, 2^60]; conjugate of '" + nf.label() +
                                    "' is unbounded there");
    }
    lo = hi;
    hi *= 2.0;
  }
  return {lo, hi};
}

} // namespace

double conjugate(const NFunction& nf, double t, double tol) {
  require_nonnegative(t, "conjugate");
  if (!(tol > 0.0)) {
    throw DomainError("conjugate: tol must be positive");
  }
  if (t == 0.0) {
    return 0.0;
  }
  auto [lo, hi] = bracket_density_root(nf, t);
  // The objective s t - B(s) is concave with maximizer inside [lo, hi], so its
  // value anywhere in the bracket is within (hi - lo)(b(hi) - b(lo)) of the sup.
  for (int it = 0; it < 300; ++it) {
    const double gap = (hi - lo) * (nf.density(hi) - nf.density(lo));
    if (gap <= tol || hi - lo <= 1e-17 * hi) {
      break;
    }
    const double mid = 0.5 * (lo + hi);
    (nf.density(mid) < t ? lo : hi) = mid;
  }
  const double mid = 0.5 * (lo + hi);
  double best = 0.0;
  for (double s : {lo, mid, hi}) {
    best = std::max(best, s * t - nf.eval(s));
  }
  return best;
}

double conjugate_density(const NFunction& nf, double t) {
  require_nonnegative(t, "conjugate_density");
  if (t == 0.0) {
    return 0.0;
  }
  auto [lo, hi] = bracket_density_root(nf, t);
  for (int it = 0; it < 300 && hi - lo > 1e-16 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (nf.density(mid) <= t ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

std::vector<double> geometric_grid(double t_min, double t_max, int n) {
  std::vector<double> grid(static_cast<std::size_t>(n));
  const double log_lo = std::log(t_min);
  const double log_hi = std::log(t_max);
  for (int k = 0; k < n; ++k) {
    const double frac = n == 1 ? 0.0 : static_cast<double>(k) / (n - 1);
    grid[static_cast<std::size_t>(k)] = std::exp(log_lo + frac * (log_hi - log_lo));
  }
  grid.front() = t_min;
  grid.back() = t_max;
  return grid;
}

Delta2Result delta2_check(const NFunction& nf, double t_min, double t_max, int n_samples) {
  if (!(t_min > 0.0) || !(t_max > t_min)) {
    throw DomainError("delta2_check requires 0 < t_min < t_max");
  }
  if (n_samples < 16) {
    throw DomainError("delta2_check requires at least 16 samples");
  }
  Delta2Result out;
  out.t_min = t_min;
  out.t_max = t_max;
  out.n_samples = n_samples;
  out.t_grid = geometric_grid(t_min, t_max, n_samples);
  out.ratios.reserve(out.t_grid.size());
  for (double t : out.t_grid) {
    const double Bt = nf.eval(t);
    if (!(Bt > 0.0)) {
      throw InvalidNFunctionError("B(" + std::to_string(t) + ") = " + std::to_string(Bt) +
                                  " is not positive for '" + nf.label() + "'");
    }
    const double B2t = nf.eval(2.0 * t);
    out.ratios.push_back(std::isfinite(B2t) ? B2t / Bt : std::numeric_limits<double>::infinity());
  }

  // Top decade of the inspected range (the whole range when it spans less).
  std::size_t first = 0;
  while (first + 2 < out.t_grid.size() && out.t_grid[first] < t_max / 10.0) {
    ++first;
  }
  bool grows = true;
  for (std::size_t k = first; k + 1 < out.ratios.size(); ++k) {
    const double r0 = out.ratios[k];
    const double r1 = out.ratios[k + 1];
    const bool up = std::isinf(r1) || r1 > r0 * (1.0 + 1e-9);
    if (!up) {
      grows = false;
      break;
    }
  }
  out.holds = !grows;
  if (!out.holds) {
    out.alpha_est = std::numeric_limits<double>::infinity();
    out.t0_est = std::numeric_limits<double>::infinity();
    return out;
  }
  out.alpha_est = *std::max_element(out.ratios.begin(), out.ratios.end());
  out.t0_est = t_min;
  if (const auto& w = nf.delta2_witness(); w && w->alpha >= out.alpha_est * (1.0 - 1e-12)) {
    out.t0_est = w->t0;
  }
  return out;
}

double modular(const LuxemburgNormRequest& req, double k) {
  const auto& nf = req.nf;
  const std::size_t n = req.values.size();
  const bool uniform = req.weights.empty();
  const double w0 = uniform && n > 0 ? req.domain_measure / static_cast<double>(n) : 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double w = uniform ? w0 : req.weights[i];
    sum += w * nf.eval(std::abs(req.values[i]) / k);
  }
  return sum;
}

double luxemburg_norm(const LuxemburgNormRequest& req, double tol) {
  if (!(req.domain_measure > 0.0)) {
    throw DataError("luxemburg_norm: domain measure must be positive");
  }
  if (!req.weights.empty() && req.weights.size() != req.values.size()) {
    throw ContractError("luxemburg_norm: weights and values differ in length");
  }
  double umax = 0.0;
  for (double v : req.values) {
    if (!std::isfinite(v)) {
      throw DataError("luxemburg_norm: field has non-finite values");
    }
    umax = std::max(umax, std::abs(v));
  }
  if (umax == 0.0) {
    return 0.0;
  }

  double lo = umax / req.nf.inverse(1.0 / req.domain_measure) * 1e-3;
  double hi = umax * 1e3;
  for (int it = 0; it < 2000 && modular(req, hi) > 1.0; ++it) {
    hi *= 2.0;
  }
  for (int it = 0; it < 2000 && modular(req, lo) < 1.0; ++it) {
    lo *= 0.5;
  }
  double mid = 0.5 * (lo + hi);
  for (int it = 0; it < 400; ++it) {
    mid = 0.5 * (lo + hi);
    const double m = modular(req, mid);
    if (std::abs(m - 1.0) <= tol || hi - lo <= 1e-16 * hi) {
      break;
    }
    (m > 1.0 ? lo : hi) = mid;
  }
  return mid;
}

namespace {

/// Composite Simpson rule for int_0^t b.
double integrate_density(const NFunction& nf, double t, int panels = 2048) {
  const double h = t / panels;
  double sum = nf.density(0.0) + nf.density(t);
  for (int i = 1; i < panels; ++i) {
    sum += (i % 2 == 1 ? 4.0 : 2.0) * nf.density(i * h);
  }
  return sum * h / 3.0;
}

} // namespace

InvariantReport check_invariants(const NFunction& nf, double t_min, double t_max, int n_samples) {
  InvariantReport rep;
  const auto grid = geometric_grid(t_min, t_max, n_samples);

  rep.zero_at_origin = nf.eval(0.0) == 0.0;
  rep.positive = std::all_of(grid.begin(), grid.end(), [&](double t) { return nf.eval(t) > 0.0; });

  double worst = 0.0;
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    const double a = grid[i];
    const double b = grid[i + 1];
    const double gap = nf.eval(0.5 * (a + b)) - 0.5 * (nf.eval(a) + nf.eval(b));
    worst = std::max(worst, gap / std::max(1.0, nf.eval(b)));
  }
  rep.worst_convexity_violation = worst;
  rep.convex = worst <= 1e-12;

  // B(t)/t must decrease toward 0 at the small end and blow up at the large end.
  const auto small = geometric_grid(1e-12, 1e-6, 8);
  const auto large = geometric_grid(1e6, 1e12, 8);
  auto slope = [&](double t) { return nf.eval(t) / t; };
  rep.sublinear_at_zero = slope(small.front()) < slope(small.back());
  // Fast growth overflows to inf at both ends of the large grid.
  rep.superlinear_at_infinity =
      std::isinf(slope(large.back())) || slope(large.back()) > slope(large.front());

  double mismatch = 0.0;
  for (double t : geometric_grid(1e-3, std::min(t_max, 10.0), 12)) {
    const double ref = nf.eval(t);
    mismatch = std::max(mismatch, std::abs(integrate_density(nf, t) - ref) / std::max(ref, 1e-300));
  }
  rep.worst_density_mismatch = mismatch;
  rep.density_consistent = mismatch <= (nf.density_is_finite_difference() ? 1e-4 : 1e-6);

  double young = 0.0;
  for (double t : geometric_grid(std::max(t_min, 1e-3), std::min(t_max, 20.0), 16)) {
    const double bt = nf.density(t);
    const double tb = t * bt;
    double conj;
    try {
      conj = conjugate(nf, bt);
    } catch (const UnboundedConjugateError&) {
      young = std::numeric_limits<double>::infinity();
      break;
    }
    const double scale = std::max(1.0, tb);
    young = std::max({young, (conj - tb) / scale, (tb - nf.eval(2.0 * t)) / scale});
  }
  rep.worst_young_violation = young;
  rep.young_consistent = young <= 1e-8;
  return rep;
}

} // namespace reithom::nfunction
