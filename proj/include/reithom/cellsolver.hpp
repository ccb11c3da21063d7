#pragma once

#include "reithom/fields.hpp"
#include "reithom/integrand.hpp"
#include "reithom/minimizer.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace reithom::cellsolver {

enum class Level { inner, outer };

/// Tensor lattice over the flattened xi components (row-major, last component fastest).
struct XiLattice {
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<int> counts;

  static XiLattice uniform(std::size_t components, double lo, double hi, int count);

  std::size_t components() const noexcept { return counts.size(); }
  std::size_t size() const noexcept;
  double spacing(std::size_t k) const;
  double node(std::size_t k, int i) const;
  std::vector<double> point(std::size_t flat) const;
  void validate() const;
};

class HomTable;

struct CellProblem {
  integrand::Integrand integrand;
  Level level = Level::inner;
  std::vector<double> frozen_y;
  std::vector<double> xi;
  int resolution = 256;
  solver::Params solver;
};

struct CellSolution {
  double energy = 0.0;
  /// Energy of the zero corrector (the upper admissible bound).
  double zero_corrector_energy = 0.0;
  fields::PeriodicField corrector{fields::Cells::Z, 1, 8};
  /// d energy / d xi at the optimum (envelope theorem).
  std::vector<double> energy_gradient;
  int iterations = 0;
  double final_grad_norm = 0.0;
  bool converged = false;
  std::string stop_reason;
  int table_extensions = 0;
};

/// f_hom(y_j, xi) on a lattice, for y_j = -1/2 + j/m per axis (inner level),
/// or fbar_hom(xi) with a single y slot (outer level).
class HomTable {
public:
  HomTable(Level level, int N, int y_samples, XiLattice lattice);

  Level level() const noexcept { return level_; }
  int N() const noexcept { return N_; }
  int y_samples() const noexcept { return y_samples_; }
  std::size_t y_count() const noexcept;
  const XiLattice& lattice() const noexcept { return lattice_; }

  std::vector<double> y_sample(std::size_t j) const;
  /// Nearest y sample with periodic wrap.
  std::size_t nearest_y(std::span<const double> y) const;

  double& value(std::size_t j, std::size_t xi_index) { return values_[j * lattice_.size() + xi_index]; }
  double value(std::size_t j, std::size_t xi_index) const {
    return values_[j * lattice_.size() + xi_index];
  }
  std::span<double> gradient(std::size_t j, std::size_t xi_index);
  std::span<const double> gradient(std::size_t j, std::size_t xi_index) const;

  std::vector<double>& values() noexcept { return values_; }
  const std::vector<double>& values() const noexcept { return values_; }
  std::vector<double>& gradients() noexcept { return gradients_; }
  const std::vector<double>& gradients() const noexcept { return gradients_; }
  std::vector<std::uint8_t>& converged() noexcept { return converged_; }
  const std::vector<std::uint8_t>& converged() const noexcept { return converged_; }
  std::size_t flagged_entries() const;

  /// Source integrand and inner settings, needed to extend the lattice.
  std::optional<integrand::Integrand> source;
  int inner_resolution = 0;
  solver::Params inner_params;

private:
  Level level_;
  int N_;
  int y_samples_;
  XiLattice lattice_;
  std::vector<double> values_;
  std::vector<double> gradients_;
  std::vector<std::uint8_t> converged_;
};

/// Minimizes over mean-zero periodic psi on Z with y frozen.
CellSolution solve_inner(const CellProblem& cp);

/// Minimizes over mean-zero periodic phi on Y with the tabulated inner
/// density. Extends `inner_table` (up to 4 times) when the optimum reaches its
/// hull; throws RangeError when that is exhausted or impossible.
CellSolution solve_outer(const CellProblem& cp, HomTable& inner_table);

/// Inner solves at every (y sample, lattice point); parallel over entries.
HomTable tabulate(const integrand::Integrand& ig, const XiLattice& lattice, int y_samples,
                  int resolution = 256, const solver::Params& params = {});

/// Multilinear in xi, nearest sample in y. Throws RangeError outside the hull.
double eval_interp(const HomTable& table, std::span<const double> y, std::span<const double> xi);

/// The interpolant the outer solver uses: cubic Hermite (values plus
/// envelope derivatives) for one-component lattices, multilinear otherwise.
/// Returns +infinity outside the hull. Writes d/dxi into `grad` if non-empty.
double eval_smooth(const HomTable& table, std::size_t y_index, std::span<const double> xi,
                   std::span<double> grad);

void save(const HomTable& table, const std::filesystem::path& base);
HomTable load(const std::filesystem::path& base);

/// Outer corrector phi on Y and inner correctors psi(y, .) assembled on Y x Z,
/// with psi solved at slope xi + D phi(y) for every sample of the Y grid.
struct Correctors {
  CellSolution outer;
  fields::PeriodicField phi{fields::Cells::Y, 1, 8};
  fields::PeriodicField psi{fields::Cells::YZ, 1, 8};
  std::vector<double> xi;
  bool all_converged = true;
};

Correctors build_correctors(const integrand::Integrand& ig, std::span<const double> xi,
                            int resolution, HomTable& inner_table,
                            const solver::Params& params = {});

} // namespace reithom::cellsolver
