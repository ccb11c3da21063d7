#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace reithom::nfunction {

/// Known constants (alpha, t0) with B(2t) <= alpha B(t) for t >= t0.
struct Delta2Witness {
  double alpha = 0.0;
  double t0 = 0.0;
};

/// An Orlicz generator B(t) = int_0^t b. Immutable; copies share state.
class NFunction {
public:
  using Scalar = std::function<double(double)>;

  /// If `density` is empty, b is taken as a centered difference of B with
  /// step 1e-6 * max(t, 1) (lower-accuracy mode).
  NFunction(std::string label, Scalar eval, Scalar density = {},
            std::optional<Delta2Witness> witness = std::nullopt);

  double operator()(double t) const { return eval(t); }
  double eval(double t) const;
  double density(double t) const;

  const std::string& label() const noexcept;
  bool density_is_finite_difference() const noexcept;
  const std::optional<Delta2Witness>& delta2_witness() const noexcept;

  /// Smallest t with B(t) >= value.
  double inverse(double value) const;

  /// The complementary N-function, evaluated through root-finding on b.
  NFunction conjugate_function(double tol = 1e-13) const;

private:
  struct State;
  std::shared_ptr<const State> state_;
};

/// Built-in generators: "power:p" (t^p/p), "plog:p,q" (t^p log(1+t)^q), "exp" (e^t - t - 1).
NFunction from_catalog(std::string_view spec);

/// (B(t), b(t)). Throws DomainError for t < 0.
std::pair<double, double> eval_pair(const NFunction& nf, double t);

/// sup_{s>=0} (s t - B(s)) within `tol`, via bisection on b(s) = t.
/// Throws UnboundedConjugateError when b stays below t up to s = 2^60.
double conjugate(const NFunction& nf, double t, double tol = 1e-13);

/// Root of b(s) = t (generalized inverse of the density); the density of the conjugate.
double conjugate_density(const NFunction& nf, double t);

struct Delta2Result {
  bool holds = false;
  double alpha_est = 0.0; ///< sup of sampled B(2t)/B(t); +inf when rejected
  double t0_est = 0.0;
  double t_min = 0.0;
  double t_max = 0.0;
  int n_samples = 0;
  bool heuristic = true; ///< the verdict only inspects [t_min, t_max]
  std::vector<double> t_grid;
  std::vector<double> ratios;
};

/// Samples B(2t)/B(t) on a geometric grid. The condition is rejected when the
/// ratio grows monotonically across the top decade of the inspected range.
Delta2Result delta2_check(const NFunction& nf, double t_min, double t_max, int n_samples);

/// Sampled field plus quadrature weights. Empty weights mean uniform
/// weights domain_measure / values.size().
struct LuxemburgNormRequest {
  std::span<const double> values;
  std::span<const double> weights;
  double domain_measure = 1.0;
  NFunction nf;
};

/// int B(|u|/k) by the request's quadrature.
double modular(const LuxemburgNormRequest& req, double k);

/// inf{k > 0 : int B(|u|/k) <= 1}, bisected until |modular - 1| <= tol.
double luxemburg_norm(const LuxemburgNormRequest& req, double tol = 1e-10);

/// Sampled checks of the defining properties of an N-function.
struct InvariantReport {
  bool zero_at_origin = false;
  bool positive = false;
  bool convex = false;
  bool sublinear_at_zero = false;
  bool superlinear_at_infinity = false;
  bool density_consistent = false;
  bool young_consistent = false;
  double worst_convexity_violation = 0.0;
  double worst_density_mismatch = 0.0;
  double worst_young_violation = 0.0;

  bool all() const noexcept {
    return zero_at_origin && positive && convex && sublinear_at_zero && superlinear_at_infinity &&
           density_consistent && young_consistent;
  }
};

InvariantReport check_invariants(const NFunction& nf, double t_min = 1e-4, double t_max = 1e2,
                                 int n_samples = 64);

/// Geometric grid of n points spanning [t_min, t_max].
std::vector<double> geometric_grid(double t_min, double t_max, int n);

} // namespace reithom::nfunction
