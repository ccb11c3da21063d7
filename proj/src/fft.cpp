#include "fft.hpp"

#include "reithom/error.hpp"

namespace reithom::detail {

std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

RealFft::RealFft(std::vector<int> shape) : shape_(std::move(shape)) {
  if (shape_.empty()) {
    throw ContractError("FFT shape must have at least one axis");
  }
  for (std::size_t a = 0; a < shape_.size(); ++a) {
    real_size_ *= static_cast<std::size_t>(shape_[a]);
    complex_size_ *= static_cast<std::size_t>(a + 1 == shape_.size() ? shape_[a] / 2 + 1 : shape_[a]);
  }
  real_ = static_cast<double*>(fftw_malloc(sizeof(double) * real_size_));
  spectrum_ = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * complex_size_));
  std::lock_guard lock(fftw_planner_mutex());
  const int rank = static_cast<int>(shape_.size());
  forward_ = fftw_plan_dft_r2c(rank, shape_.data(), real_, spectrum_, FFTW_ESTIMATE);
  backward_ = fftw_plan_dft_c2r(rank, shape_.data(), spectrum_, real_, FFTW_ESTIMATE);
}

RealFft::~RealFft() {
  {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(forward_);
    fftw_destroy_plan(backward_);
  }
  fftw_free(real_);
  fftw_free(spectrum_);
}

SineTransform::SineTransform(std::vector<int> shape) : shape_(std::move(shape)) {
  for (int n : shape_) {
    size_ *= static_cast<std::size_t>(n);
  }
  data_ = static_cast<double*>(fftw_malloc(sizeof(double) * size_));
  std::vector<fftw_r2r_kind> kinds(shape_.size(), FFTW_RODFT00);
  std::lock_guard lock(fftw_planner_mutex());
  plan_ = fftw_plan_r2r(static_cast<int>(shape_.size()), shape_.data(), data_, data_, kinds.data(),
                        FFTW_ESTIMATE);
}

SineTransform::~SineTransform() {
  {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(plan_);
  }
  fftw_free(data_);
}

} // namespace reithom::detail
