#pragma once

#include "reithom/fields.hpp"
#include "reithom/nfunction.hpp"
#include "reithom/report.hpp"

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace reithom::multiscale {

/// v(x, y, z), periodic in y and z.
using Generator = std::function<double(std::span<const double> x, std::span<const double> y,
                                       std::span<const double> z)>;

/// u_eps(x) = v(x, x/eps, x/eps^2) on the midpoints of `grid` for each epsilon.
struct OscillatingSequence {
  Generator generator;
  std::vector<double> epsilons;
  fields::MacroGrid grid;

  /// Throws ContractError/ResolutionError unless every epsilon is commensurate.
  void validate() const;
};

/// Pairing values per epsilon against a target.
struct PairingSeries {
  std::vector<double> epsilons;
  std::vector<double> pairings;
  std::vector<double> residuals;
  double target = 0.0;
  /// Richardson extrapolation of the last two pairings assuming an O(eps) error.
  double limit_estimate = 0.0;
  /// Least-squares order of the residuals (NaN when they vanish).
  double fitted_order = 0.0;
};

/// Triple integral of u0 * test over Omega x Y x Z (midpoint rule, `resolution` per axis).
double triple_integral(const Generator& u0, const Generator& test, const fields::MacroGrid& grid,
                       int resolution = 64);

/// int_Omega u_eps(x) test(x, x/eps, x/eps^2) dx per epsilon; target = triple integral.
PairingSeries two_scale_pair(const OscillatingSequence& seq, const Generator& test,
                             int target_resolution = 64);

struct NormSeries {
  std::vector<double> epsilons;
  std::vector<double> norms;
  double target = 0.0;
};

/// Luxemburg norm of u_eps on Omega per epsilon, and of v on Omega x Y x Z.
NormSeries luxemburg_limit_check(const OscillatingSequence& seq, const nfunction::NFunction& nf,
                                 int target_resolution = 64);

struct AveragingReport {
  /// Pairing with a test depending on x only; target uses the double average over Y x Z.
  PairingSeries x_only;
  /// Pairing with a test depending on (x, y); target uses the average over Z.
  PairingSeries xy;
};

AveragingReport averaging_consistency(const OscillatingSequence& seq,
                                      const std::function<double(std::span<const double>)>& test_x_only,
                                      const std::function<double(std::span<const double>,
                                                                 std::span<const double>)>& test_xy,
                                      int target_resolution = 64);

/// u + eps phi(x/eps) + eps^2 psi(x/eps, x/eps^2) at the nodes of the direct
/// problem on `grid` (order 1). `u` holds node values of the macro field; phi
/// lives on Y and psi on Y x Z, both interpolated with periodic cubics.
std::vector<double> build_recovery_s1(const fields::MacroGrid& grid, std::span<const double> u,
                                      const fields::PeriodicField& phi,
                                      const fields::PeriodicField& psi, double epsilon);

/// Sup over cells of |D u_eps - [D u + D_y phi(x/eps) + D_z psi(x/eps, x/eps^2)]|
/// with D the cell-center difference of node values (1-D, scalar).
double recovery_gradient_defect(const fields::MacroGrid& grid, std::span<const double> u,
                                const fields::PeriodicField& phi, const fields::PeriodicField& psi,
                                double epsilon);

/// u on Omega, U on Omega x Y, W on Omega x Y x Z (1-D, scalar, order 2).
struct CorrectorTriple {
  std::function<double(double x)> u;
  std::function<double(double x, double y)> U;
  std::function<double(double x, double y, double z)> W;
  int order = 2;
};

/// u_eps(x) = u(x) + eps^2 U(x, x/eps) + eps^4 W(x, x/eps, x/eps^2).
double build_recovery_s2(const CorrectorTriple& ct, double epsilon, double x);

struct Theorem1Report {
  PairingSeries series;
  int cells_per_period = 0;
};

/// Pairs the discrete second derivative of u_eps (midpoints, `cells_per_period`
/// cells per fast period on (0, L)) with the test and compares with the
/// triple integral of (u'' + U_yy + W_zz) * test.
Theorem1Report verify_theorem1(const CorrectorTriple& ct, const std::vector<double>& epsilons,
                               const Generator& test, double length = 1.0,
                               int cells_per_period = 64, int target_resolution = 64);

/// Columns: epsilon, pairing, target, residual.
report::CsvTable to_csv(const PairingSeries& series);

} // namespace reithom::multiscale
