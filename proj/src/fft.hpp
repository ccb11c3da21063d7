#pragma once

// Thin RAII layer over FFTW. Plan creation is serialized; execution uses the
// new-array interface on buffers owned by the caller's object.

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <mutex>
#include <vector>

namespace reithom::detail {

std::mutex& fftw_planner_mutex();

template <typename T>
struct FftwDeleter {
  void operator()(T* p) const noexcept { fftw_free(p); }
};

/// Real <-> half-complex N-d transform pair on a fixed shape.
class RealFft {
public:
  explicit RealFft(std::vector<int> shape);
  ~RealFft();
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  std::size_t real_size() const noexcept { return real_size_; }
  std::size_t complex_size() const noexcept { return complex_size_; }
  const std::vector<int>& shape() const noexcept { return shape_; }

  double* real() noexcept { return real_; }
  fftw_complex* spectrum() noexcept { return spectrum_; }

  void forward() { fftw_execute_dft_r2c(forward_, real_, spectrum_); }
  /// Unnormalized: multiplies by real_size().
  void backward() { fftw_execute_dft_c2r(backward_, spectrum_, real_); }

  /// Signed integer frequency of index j along `axis` (last axis is halved).
  int frequency(std::size_t axis, int j) const noexcept {
    const int n = shape_[axis];
    return j <= n / 2 ? j : j - n;
  }

private:
  std::vector<int> shape_;
  std::size_t real_size_ = 1;
  std::size_t complex_size_ = 1;
  double* real_ = nullptr;
  fftw_complex* spectrum_ = nullptr;
  fftw_plan forward_ = nullptr;
  fftw_plan backward_ = nullptr;
};

/// In-place DST-I (RODFT00) over all axes; applying it twice multiplies by prod 2(n+1).
class SineTransform {
public:
  explicit SineTransform(std::vector<int> shape);
  ~SineTransform();
  SineTransform(const SineTransform&) = delete;
  SineTransform& operator=(const SineTransform&) = delete;

  std::size_t size() const noexcept { return size_; }
  double* data() noexcept { return data_; }
  void execute() { fftw_execute_r2r(plan_, data_, data_); }

private:
  std::vector<int> shape_;
  std::size_t size_ = 1;
  double* data_ = nullptr;
  fftw_plan plan_ = nullptr;
};

} // namespace reithom::detail
