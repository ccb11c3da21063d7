#include "reithom/fields.hpp"

#include "fft.hpp"
#include "reithom/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <limits>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

namespace reithom::fields {

namespace {

std::size_t axis_count(Cells cells, int N) {
  switch (cells) {
  case Cells::Y:
  case Cells::Z: return static_cast<std::size_t>(N);
  case Cells::YZ: return 2 * static_cast<std::size_t>(N);
  case Cells::OmegaYZ: return 3 * static_cast<std::size_t>(N);
  }
  return 0;
}

std::size_t ipow(std::size_t base, std::size_t exp) {
  std::size_t r = 1;
  for (std::size_t i = 0; i < exp; ++i) {
    r *= base;
  }
  return r;
}

} // namespace

std::string to_string(Cells cells) {
  switch (cells) {
  case Cells::Y: return "Y";
  case Cells::Z: return "Z";
  case Cells::YZ: return "YxZ";
  case Cells::OmegaYZ: return "OmegaxYxZ";
  }
  return "?";
}

Cells cells_from_string(const std::string& name) {
  if (name == "Y") return Cells::Y;
  if (name == "Z") return Cells::Z;
  if (name == "YxZ") return Cells::YZ;
  if (name == "OmegaxYxZ") return Cells::OmegaYZ;
  throw DataError("unknown cells tag '" + name + "'");
}

PeriodicField::PeriodicField(Cells cells, int N, int resolution, int components,
                             double omega_length)
    : cells_(cells), N_(N), resolution_(resolution), components_(components),
      omega_length_(omega_length), axes_(axis_count(cells, N)), points_(0) {
  if (N < 1 || N > 3) {
    throw ContractError("fields support 1 <= N <= 3");
  }
  if (resolution < 8 || !std::has_single_bit(static_cast<unsigned>(resolution))) {
    throw ContractError("field resolution must be a power of two >= 8, got " +
                        std::to_string(resolution));
  }
  if (components < 1) {
    throw ContractError("field needs at least one component");
  }
  if (!(omega_length > 0.0)) {
    throw ContractError("macro box length must be positive");
  }
  points_ = ipow(static_cast<std::size_t>(resolution), axes_);
  values_.assign(points_ * static_cast<std::size_t>(components), 0.0);
}

PeriodicField PeriodicField::sample(Cells cells, int N, int resolution, int components,
                                    const Sampler& fn, double omega_length) {
  PeriodicField f(cells, N, resolution, components, omega_length);
  std::vector<double> coords(f.axes());
  for (std::size_t p = 0; p < f.points(); ++p) {
    f.point_coordinates(p, coords);
    fn(coords, std::span(f.values_.data() + p * static_cast<std::size_t>(components),
                         static_cast<std::size_t>(components)));
  }
  return f;
}

PeriodicField PeriodicField::sample(Cells cells, int N, int resolution,
                                    const std::function<double(std::span<const double>)>& fn,
                                    double omega_length) {
  return sample(
      cells, N, resolution, 1,
      [&fn](std::span<const double> x, std::span<double> out) { out[0] = fn(x); }, omega_length);
}

bool PeriodicField::periodic(std::size_t axis) const noexcept {
  return !(cells_ == Cells::OmegaYZ && axis < static_cast<std::size_t>(N_));
}

double PeriodicField::lower(std::size_t axis) const noexcept { return periodic(axis) ? -0.5 : 0.0; }

double PeriodicField::length(std::size_t axis) const noexcept {
  return periodic(axis) ? 1.0 : omega_length_;
}

double PeriodicField::cell_volume() const noexcept {
  double v = 1.0;
  for (std::size_t a = 0; a < axes_; ++a) {
    v *= spacing(a);
  }
  return v;
}

double PeriodicField::coordinate(std::size_t axis, int index) const noexcept {
  return lower(axis) + (index + 0.5) * spacing(axis);
}

void PeriodicField::point_coordinates(std::size_t point, std::span<double> out) const {
  const auto n = static_cast<std::size_t>(resolution_);
  for (std::size_t a = axes_; a-- > 0;) {
    out[a] = coordinate(a, static_cast<int>(point % n));
    point /= n;
  }
}

std::vector<double> PeriodicField::component(int c) const {
  std::vector<double> out(points_);
  for (std::size_t p = 0; p < points_; ++p) {
    out[p] = at(p, c);
  }
  return out;
}

PeriodicField PeriodicField::like(int components) const {
  return PeriodicField(cells_, N_, resolution_, components, omega_length_);
}

std::vector<double> integrate(const PeriodicField& field) {
  std::vector<double> sums(static_cast<std::size_t>(field.components()), 0.0);
  for (std::size_t p = 0; p < field.points(); ++p) {
    for (int c = 0; c < field.components(); ++c) {
      sums[static_cast<std::size_t>(c)] += field.at(p, c);
    }
  }
  const double w = field.cell_volume();
  for (auto& s : sums) {
    s *= w;
  }
  return sums;
}

namespace {

/// Central (or one-sided at non-periodic ends) derivative of one component along `axis`.
void central_derivative(const PeriodicField& in, int comp, std::size_t axis, PeriodicField& out,
                        int out_comp) {
  const auto n = static_cast<std::size_t>(in.resolution());
  const std::size_t stride = ipow(n, in.axes() - 1 - axis);
  const double h = in.spacing(axis);
  const bool wrap = in.periodic(axis);
  for (std::size_t p = 0; p < in.points(); ++p) {
    const std::size_t i = (p / stride) % n;
    const std::size_t base = p - i * stride;
    auto val = [&](std::size_t j) { return in.at(base + j * stride, comp); };
    double d = 0.0;
    if (wrap) {
      d = (val((i + 1) % n) - val((i + n - 1) % n)) / (2.0 * h);
    } else if (i == 0) {
      d = (-3.0 * val(0) + 4.0 * val(1) - val(2)) / (2.0 * h);
    } else if (i + 1 == n) {
      d = (3.0 * val(n - 1) - 4.0 * val(n - 2) + val(n - 3)) / (2.0 * h);
    } else {
      d = (val(i + 1) - val(i - 1)) / (2.0 * h);
    }
    out.at(p, out_comp) = d;
  }
}

void spectral_gradient(const PeriodicField& in, PeriodicField& out) {
  for (std::size_t a = 0; a < in.axes(); ++a) {
    if (!in.periodic(a)) {
      throw ContractError("spectral differentiation requires every axis to be periodic");
    }
  }
  const std::size_t axes = in.axes();
  const std::vector<int> shape(axes, in.resolution());
  detail::RealFft fft(shape);
  const auto n = static_cast<std::size_t>(in.resolution());
  const std::size_t half = n / 2 + 1;
  std::vector<std::array<double, 2>> spectrum(fft.complex_size());
  for (int c = 0; c < in.components(); ++c) {
    for (std::size_t p = 0; p < in.points(); ++p) {
      fft.real()[p] = in.at(p, c);
    }
    fft.forward();
    for (std::size_t k = 0; k < fft.complex_size(); ++k) {
      spectrum[k] = {fft.spectrum()[k][0], fft.spectrum()[k][1]};
    }
    for (std::size_t a = 0; a < axes; ++a) {
      for (std::size_t k = 0; k < fft.complex_size(); ++k) {
        // Decompose k into the index along axis a.
        std::size_t rest = k;
        std::size_t idx = 0;
        for (std::size_t b = axes; b-- > 0;) {
          const std::size_t len = b + 1 == axes ? half : n;
          const std::size_t j = rest % len;
          rest /= len;
          if (b == a) {
            idx = j;
          }
        }
        const int freq = fft.frequency(a, static_cast<int>(idx));
        const bool nyquist = 2 * idx == n;
        const double kk = nyquist ? 0.0 : 2.0 * std::numbers::pi * freq / in.length(a);
        // (re + i im) * (i kk) = -kk im + i kk re
        fft.spectrum()[k][0] = -kk * spectrum[k][1];
        fft.spectrum()[k][1] = kk * spectrum[k][0];
      }
      fft.backward();
      const double scale = 1.0 / static_cast<double>(fft.real_size());
      for (std::size_t p = 0; p < in.points(); ++p) {
        out.at(p, c * static_cast<int>(axes) + static_cast<int>(a)) = fft.real()[p] * scale;
      }
    }
  }
}

} // namespace

PeriodicField gradient(const PeriodicField& field, Scheme scheme) {
  const int axes = static_cast<int>(field.axes());
  PeriodicField out = field.like(field.components() * axes);
  if (scheme == Scheme::spectral) {
    spectral_gradient(field, out);
    return out;
  }
  for (int c = 0; c < field.components(); ++c) {
    for (int a = 0; a < axes; ++a) {
      central_derivative(field, c, static_cast<std::size_t>(a), out, c * axes + a);
    }
  }
  return out;
}

PeriodicField hessian(const PeriodicField& field, Scheme scheme) {
  const auto axes = static_cast<int>(field.axes());
  const PeriodicField twice = gradient(gradient(field, scheme), scheme);
  PeriodicField out = field.like(field.components() * axes * axes);
  for (std::size_t p = 0; p < field.points(); ++p) {
    for (int c = 0; c < field.components(); ++c) {
      // twice: component (c * axes + a) differentiated along b -> ((c * axes + a) * axes + b)
      for (int a = 0; a < axes; ++a) {
        for (int b = 0; b < axes; ++b) {
          const double ab = twice.at(p, (c * axes + a) * axes + b);
          const double ba = twice.at(p, (c * axes + b) * axes + a);
          out.at(p, c * axes * axes + a * axes + b) = 0.5 * (ab + ba);
        }
      }
    }
  }
  return out;
}

PeriodicField project_mean_zero(const PeriodicField& field) {
  PeriodicField out = field;
  const auto means = integrate(field);
  double volume = 1.0;
  for (std::size_t a = 0; a < field.axes(); ++a) {
    volume *= field.length(a);
  }
  // A mean below the summation round-off of the field is already zero, so a
  // second projection leaves the field bit-for-bit unchanged.
  for (int c = 0; c < field.components(); ++c) {
    double abs_sum = 0.0;
    for (std::size_t p = 0; p < field.points(); ++p) abs_sum += std::abs(field.at(p, c));
    const double mean = means[static_cast<std::size_t>(c)] / volume;
    if (std::abs(mean) <= 4.0 * std::numeric_limits<double>::epsilon() * abs_sum) continue;
    for (std::size_t p = 0; p < field.points(); ++p) out.at(p, c) -= mean;
  }
  return out;
}

namespace {

std::array<double, 4> catmull_rom_weights(double t) {
  const double t2 = t * t;
  const double t3 = t2 * t;
  return {-0.5 * t3 + t2 - 0.5 * t, 1.5 * t3 - 2.5 * t2 + 1.0, -1.5 * t3 + 2.0 * t2 + 0.5 * t,
          0.5 * t3 - 0.5 * t2};
}

} // namespace

double interpolate(const PeriodicField& field, std::span<const double> point, int component) {
  const std::size_t axes = field.axes();
  if (point.size() != axes) {
    throw ContractError("interpolate: point dimension does not match field axes");
  }
  const auto n = static_cast<long>(field.resolution());
  std::vector<long> base(axes);
  std::vector<std::array<double, 4>> weights(axes);
  for (std::size_t a = 0; a < axes; ++a) {
    // Continuous index so that sample i sits at i.
    double s = (point[a] - field.lower(a)) / field.spacing(a) - 0.5;
    if (field.periodic(a)) {
      s -= std::floor(s / static_cast<double>(n)) * static_cast<double>(n);
    } else {
      s = std::clamp(s, 0.0, static_cast<double>(n - 1));
    }
    const double fl = std::floor(s);
    base[a] = static_cast<long>(fl);
    weights[a] = catmull_rom_weights(s - fl);
  }
  const std::size_t corners = ipow(4, axes);
  double sum = 0.0;
  for (std::size_t k = 0; k < corners; ++k) {
    std::size_t rest = k;
    double w = 1.0;
    std::size_t flat = 0;
    for (std::size_t a = 0; a < axes; ++a) {
      const auto off = static_cast<long>(rest % 4);
      rest /= 4;
      w *= weights[a][static_cast<std::size_t>(off)];
      long j = base[a] + off - 1;
      if (field.periodic(a)) {
        j = ((j % n) + n) % n;
      } else {
        j = std::clamp(j, 0L, n - 1);
      }
      flat = flat * static_cast<std::size_t>(n) + static_cast<std::size_t>(j);
    }
    sum += w * field.at(flat, component);
  }
  return sum;
}

void write_doubles(const std::filesystem::path& path, std::span<const double> values) {
  static_assert(std::endian::native == std::endian::little, "binary format is little-endian");
  std::ofstream os(path, std::ios::binary);
  if (!os) {
    throw IoError("cannot open '" + path.string() + "' for writing");
  }
  os.write(reinterpret_cast<const char*>(values.data()),
           static_cast<std::streamsize>(values.size() * sizeof(double)));
  if (!os) {
    throw IoError("failed writing '" + path.string() + "'");
  }
}

std::vector<double> read_doubles(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary | std::ios::ate);
  if (!is) {
    throw IoError("cannot open '" + path.string() + "'");
  }
  const auto bytes = static_cast<std::size_t>(is.tellg());
  if (bytes % sizeof(double) != 0) {
    throw DataError("'" + path.string() + "' is not a float64 array");
  }
  std::vector<double> out(bytes / sizeof(double));
  is.seekg(0);
  is.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(bytes));
  return out;
}

void write(const PeriodicField& field, const std::filesystem::path& base) {
  write_doubles(std::filesystem::path(base.string() + ".bin"), field.values());
  nlohmann::ordered_json meta;
  meta["cells"] = to_string(field.cells());
  meta["N"] = field.N();
  meta["resolution"] = field.resolution();
  meta["components"] = field.components();
  meta["omega_length"] = field.omega_length();
  meta["layout"] = "row-major, component innermost";
  meta["dtype"] = "float64-le";
  std::ofstream os(base.string() + ".json");
  if (!os) {
    throw IoError("cannot open '" + base.string() + ".json' for writing");
  }
  os << meta.dump(2) << '\n';
}

PeriodicField read(const std::filesystem::path& base) {
  std::ifstream is(base.string() + ".json");
  if (!is) {
    throw IoError("cannot open '" + base.string() + ".json'");
  }
  nlohmann::json meta;
  try {
    is >> meta;
    PeriodicField field(cells_from_string(meta.at("cells").get<std::string>()),
                        meta.at("N").get<int>(), meta.at("resolution").get<int>(),
                        meta.at("components").get<int>(), meta.value("omega_length", 1.0));
    auto values = read_doubles(base.string() + ".bin");
    if (values.size() != field.values().size()) {
      throw DataError("binary payload size does not match sidecar for '" + base.string() + "'");
    }
    field.values() = std::move(values);
    return field;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed field sidecar '" + base.string() + ".json': " + e.what());
  }
}

void write_csv_slice(const PeriodicField& field, const std::filesystem::path& path,
                     std::size_t axis) {
  if (axis >= field.axes()) {
    throw ContractError("CSV slice axis out of range");
  }
  std::ofstream os(path);
  if (!os) {
    throw IoError("cannot open '" + path.string() + "' for writing");
  }
  os << "coordinate";
  for (int c = 0; c < field.components(); ++c) {
    os << ",c" << c;
  }
  os << '\n' << std::setprecision(17);
  const auto n = static_cast<std::size_t>(field.resolution());
  const std::size_t stride = ipow(n, field.axes() - 1 - axis);
  for (std::size_t i = 0; i < n; ++i) {
    os << field.coordinate(axis, static_cast<int>(i));
    for (int c = 0; c < field.components(); ++c) {
      os << ',' << field.at(i * stride, c);
    }
    os << '\n';
  }
}

double MacroGrid::measure() const noexcept { return std::pow(length, N); }

void MacroGrid::validate() const {
  if (N < 1 || N > 3) {
    throw ContractError("macro grid dimension must be 1, 2 or 3");
  }
  if (!(length > 0.0) || !std::isfinite(length) || cells < 1) {
    throw ContractError("macro grid needs a positive length and cell count");
  }
  if (order != 1 && order != 2) {
    throw ContractError("macro grid boundary data order must be 1 or 2");
  }
  const std::size_t per_target = order == 1 ? static_cast<std::size_t>(N)
                                            : static_cast<std::size_t>(N * N);
  if (targets < 1 || xi0.size() != per_target * static_cast<std::size_t>(targets)) {
    throw ContractError("boundary slope xi0 has the wrong number of components");
  }
  for (double v : xi0) {
    if (!std::isfinite(v)) {
      throw ContractError("boundary slope xi0 must be finite");
    }
  }
}

double MacroGrid::boundary_value(std::span<const double> x, int k) const {
  const auto n = static_cast<std::size_t>(N);
  double v = 0.0;
  if (order == 1) {
    const double* row = xi0.data() + static_cast<std::size_t>(k) * n;
    for (std::size_t a = 0; a < n; ++a) {
      v += row[a] * x[a];
    }
    return v;
  }
  const double* m = xi0.data() + static_cast<std::size_t>(k) * n * n;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      v += 0.5 * x[a] * m[a * n + b] * x[b];
    }
  }
  return v;
}

int cells_per_fast_period(const MacroGrid& grid, double epsilon, int min_per_period) {
  if (!(epsilon > 0.0) || epsilon > 1.0) {
    throw ContractError("epsilon must lie in (0, 1]");
  }
  const double inv = 1.0 / epsilon;
  const double k = std::round(inv);
  if (std::abs(inv - k) > 1e-9 * inv) {
    throw ContractError("1/epsilon must be an integer for commensurate sampling");
  }
  const double periods = grid.length * k * k;
  const double rp = std::round(periods);
  if (rp < 1.0 || std::abs(periods - rp) > 1e-9 * periods) {
    throw ContractError("the fast period epsilon^2 does not tile the macro box");
  }
  const auto fast = static_cast<long long>(rp);
  if (static_cast<long long>(grid.cells) % fast != 0) {
    if (grid.cells < fast * min_per_period) {
      throw ResolutionError("macro grid resolves the fast scale with fewer than " +
                            std::to_string(min_per_period) + " cells per period");
    }
    throw ContractError("macro grid cell count is not a multiple of L / epsilon^2");
  }
  const auto per = static_cast<int>(grid.cells / fast);
  if (per < min_per_period) {
    throw ResolutionError("macro grid resolves the fast scale with " + std::to_string(per) +
                          " cells per period (need at least " + std::to_string(min_per_period) +
                          ")");
  }
  return per;
}

} // namespace reithom::fields
