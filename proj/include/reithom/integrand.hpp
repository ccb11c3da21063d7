#pragma once

#include "reithom/nfunction.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace reithom::integrand {

/// Space dimension N and target dimension d.
struct Dims {
  int N = 1;
  int d = 1;
};

/// Growth data (c1, c2, B) of c1 B(|xi|) <= f <= c2 (1 + B(|xi|)).
struct Growth {
  double c1 = 1.0;
  double c2 = 1.0;
  nfunction::NFunction nf;
};

/// Scalar profile Phi applied to |xi| in f = a(y, z) Phi(|xi|).
struct Profile {
  std::string name;
  std::function<double(double)> value;
  std::function<double(double)> slope;
  bool smooth_at_origin = true;
  /// Set when Phi(t) = scale * t^p; enables closed-form 1-D oracles.
  std::optional<double> power_exponent;
  double power_scale = 1.0;
};

/// "quadratic" | "power:p" | "nfunction:<catalog spec>".
Profile profile_from_spec(const std::string& spec);

/// Set for integrands of the form a(y, z) * Phi(|xi|).
struct SeparableForm {
  std::function<double(std::span<const double> y, std::span<const double> z)> coefficient;
  Profile profile;
};

/// The multiscale density f(y, z, xi) of order s in {1, 2}.
///
/// xi is flattened as d blocks of N^s entries (row-major N x N matrices for
/// s = 2). The checked entry points wrap y, z into the cell (-1/2, 1/2)^N and
/// symmetrize second-order arguments; the raw entry points do neither.
class Integrand {
public:
  using EvalFn = std::function<double(std::span<const double> y, std::span<const double> z,
                                      std::span<const double> xi)>;
  using GradFn = std::function<void(std::span<const double> y, std::span<const double> z,
                                    std::span<const double> xi, std::span<double> out)>;

  Integrand(std::string label, int order, Dims dims, EvalFn eval, GradFn grad, Growth growth,
            double regularization_delta, bool smooth);

  const std::string& label() const noexcept { return label_; }
  int order() const noexcept { return order_; }
  Dims dims() const noexcept { return dims_; }
  std::size_t xi_size() const noexcept { return xi_size_; }
  const Growth& growth() const noexcept { return growth_; }
  double regularization_delta() const noexcept { return delta_; }
  /// False when the density has a kink at xi = 0 that is not smoothed.
  bool differentiable() const noexcept { return smooth_ || delta_ > 0.0; }
  bool declared_smooth() const noexcept { return smooth_; }

  double eval(std::span<const double> y, std::span<const double> z,
              std::span<const double> xi) const;
  void grad(std::span<const double> y, std::span<const double> z, std::span<const double> xi,
            std::span<double> out) const;

  double eval_raw(std::span<const double> y, std::span<const double> z,
                  std::span<const double> xi) const {
    return eval_(y, z, xi);
  }
  void grad_raw(std::span<const double> y, std::span<const double> z, std::span<const double> xi,
                std::span<double> out) const {
    grad_(y, z, xi, out);
  }

  const std::optional<SeparableForm>& separable() const noexcept { return separable_; }
  void set_separable(SeparableForm form) { separable_ = std::move(form); }

  /// Free-text description of the analytic homogenization oracle, if any.
  const std::string& oracle() const noexcept { return oracle_; }
  void set_oracle(std::string text) { oracle_ = std::move(text); }

  /// Catalog name and parameters this integrand was built from (empty for ad-hoc ones).
  const std::string& catalog_name() const noexcept { return catalog_name_; }
  const std::map<std::string, std::string>& catalog_params() const noexcept {
    return catalog_params_;
  }
  void set_catalog(std::string name, std::map<std::string, std::string> params) {
    catalog_name_ = std::move(name);
    catalog_params_ = std::move(params);
  }

private:
  void check_shapes(std::span<const double> y, std::span<const double> z,
                    std::span<const double> xi) const;

  std::string label_;
  int order_;
  Dims dims_;
  std::size_t xi_size_;
  EvalFn eval_;
  GradFn grad_;
  Growth growth_;
  double delta_;
  bool smooth_;
  std::optional<SeparableForm> separable_;
  std::string oracle_;
  std::string catalog_name_;
  std::map<std::string, std::string> catalog_params_;
};

/// Wraps a coordinate into the cell (-1/2, 1/2] convention: x - round(x).
double wrap_cell(double x) noexcept;

/// x -> (x/eps mod Y, x/eps^2 mod Z).
struct ScaleMap {
  explicit ScaleMap(double epsilon);
  double epsilon() const noexcept { return epsilon_; }
  void map(std::span<const double> x, std::span<double> y, std::span<double> z) const;

private:
  double epsilon_;
};

/// f = a(y, z) Phi(|xi|_delta) with |xi|_delta = sqrt(|xi|^2 + delta^2) when delta > 0.
Integrand make_separable(std::string label, int order, Dims dims,
                         std::function<double(std::span<const double>, std::span<const double>)>
                             coefficient,
                         Profile profile, Growth growth, double regularization_delta);

/// Coefficient given as an expression in y1..yN, z1..zN.
Integrand make_custom(const std::string& coefficient_expr, const std::string& profile_spec,
                      int order, Dims dims, Growth growth, double regularization_delta);

using Params = std::map<std::string, std::string>;

/// Built-in integrands: quadratic_laminate, p_laminate, orlicz_plog, constant_B.
/// Throws ConfigError for unknown names or bad parameters.
Integrand catalog(const std::string& name, const Params& params = {});

/// B(t) = t^2 with density 2t.
nfunction::NFunction square_nfunction();

/// a1(y) = 1/(2 + sin 2 pi y), a2(z) = 1/(2 + cos 2 pi z).
double laminate_a1(double y) noexcept;
double laminate_a2(double z) noexcept;

struct HypothesisCheck {
  std::string name;
  bool pass = false;
  double worst = 0.0;
  std::string detail;
};

struct ValidationReport {
  std::vector<HypothesisCheck> checks;
  double lower_ratio_min = 0.0;  ///< min f / (c1 B(|xi|)) over samples
  double upper_ratio_max = 0.0;  ///< max f / (c2 (1 + B(|xi|)))
  double worst_convexity_violation = 0.0;
  double max_gradient_discrepancy = 0.0;
  double gradient_growth_constant = 0.0;
  int sample_budget = 0;
  std::uint64_t seed = 0;

  bool all_pass() const;
  const HypothesisCheck& get(const std::string& name) const;
};

/// Sampled (Monte Carlo plus lattice) checks of periodicity, convexity,
/// growth, and gradient consistency. Deterministic given the seed.
ValidationReport validate(const Integrand& ig, int sample_budget = 1000, std::uint64_t seed = 1);

} // namespace reithom::integrand
