#pragma once

#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace reithom::fields {

/// Which product of cells a field lives on. Omega axes (if any) come first.
enum class Cells { Y, Z, YZ, OmegaYZ };

enum class Scheme { central, spectral };

std::string to_string(Cells cells);
Cells cells_from_string(const std::string& name);

/// A sampled function on periodic unit cell(s), optionally times a macro box (0, L)^N.
///
/// Samples sit at cell midpoints lower + (i + 1/2) h along each axis; Y and Z
/// axes span (-1/2, 1/2) and wrap, Omega axes span (0, L) and do not.
/// Values are row-major over axes with the component index innermost.
class PeriodicField {
public:
  PeriodicField(Cells cells, int N, int resolution, int components = 1, double omega_length = 1.0);

  using Sampler = std::function<void(std::span<const double> coords, std::span<double> out)>;
  static PeriodicField sample(Cells cells, int N, int resolution, int components, const Sampler& fn,
                              double omega_length = 1.0);
  /// Scalar convenience overload.
  static PeriodicField sample(Cells cells, int N, int resolution,
                              const std::function<double(std::span<const double>)>& fn,
                              double omega_length = 1.0);

  Cells cells() const noexcept { return cells_; }
  int N() const noexcept { return N_; }
  int resolution() const noexcept { return resolution_; }
  int components() const noexcept { return components_; }
  double omega_length() const noexcept { return omega_length_; }
  std::size_t axes() const noexcept { return axes_; }
  std::size_t points() const noexcept { return points_; }

  bool periodic(std::size_t axis) const noexcept;
  double lower(std::size_t axis) const noexcept;
  double length(std::size_t axis) const noexcept;
  double spacing(std::size_t axis) const noexcept { return length(axis) / resolution_; }
  double cell_volume() const noexcept;
  double coordinate(std::size_t axis, int index) const noexcept;
  void point_coordinates(std::size_t point, std::span<double> out) const;

  std::vector<double>& values() noexcept { return values_; }
  const std::vector<double>& values() const noexcept { return values_; }
  double& at(std::size_t point, int component = 0) {
    return values_[point * static_cast<std::size_t>(components_) + static_cast<std::size_t>(component)];
  }
  double at(std::size_t point, int component = 0) const {
    return values_[point * static_cast<std::size_t>(components_) + static_cast<std::size_t>(component)];
  }
  /// Component-strided view of one component (copy).
  std::vector<double> component(int c) const;

  /// Same geometry, different component count, zero values.
  PeriodicField like(int components) const;

private:
  Cells cells_;
  int N_;
  int resolution_;
  int components_;
  double omega_length_;
  std::size_t axes_;
  std::size_t points_;
  std::vector<double> values_;
};

/// Midpoint-rule integral per component.
std::vector<double> integrate(const PeriodicField& field);

/// Derivative along every axis; component c, axis a is stored at c * axes + a.
PeriodicField gradient(const PeriodicField& field, Scheme scheme = Scheme::central);

/// Gradient applied twice and symmetrized; entry (a, b) of component c is
/// stored at c * axes^2 + a * axes + b.
PeriodicField hessian(const PeriodicField& field, Scheme scheme = Scheme::central);

/// Subtracts the cell average of each component.
PeriodicField project_mean_zero(const PeriodicField& field);

/// Tensor cubic (Catmull-Rom) interpolation, periodic along Y/Z axes.
double interpolate(const PeriodicField& field, std::span<const double> point, int component = 0);

/// Writes `<base>.bin` (row-major float64 little-endian) and `<base>.json`.
void write(const PeriodicField& field, const std::filesystem::path& base);
PeriodicField read(const std::filesystem::path& base);

/// Coordinate plus one column per component along `axis`, other axes at index 0.
void write_csv_slice(const PeriodicField& field, const std::filesystem::path& path,
                     std::size_t axis = 0);

/// Box (0, L)^N split into `cells` equal cells per axis, with Dirichlet data
/// u = xi0 . x (order 1) or u = x . xi0 x / 2 (order 2) for d targets.
struct MacroGrid {
  int N = 1;
  double length = 1.0;
  int cells = 64;
  int order = 1;
  int targets = 1;
  std::vector<double> xi0{1.0};

  double spacing() const noexcept { return length / cells; }
  double measure() const noexcept;
  void validate() const;
  /// Boundary datum (component k) at x.
  double boundary_value(std::span<const double> x, int k = 0) const;
};

/// Checks that 1/eps is an integer, that a fast period eps^2 tiles (0, L) and
/// the cell count, and returns the number of cells per fast period. Throws
/// ContractError when incommensurate and ResolutionError below `min_per_period`.
int cells_per_fast_period(const MacroGrid& grid, double epsilon, int min_per_period = 8);

/// Binary helpers shared with other persisted tables.
void write_doubles(const std::filesystem::path& path, std::span<const double> values);
std::vector<double> read_doubles(const std::filesystem::path& path);

} // namespace reithom::fields
