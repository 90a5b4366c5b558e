#include "fft.hpp"

#include <fftw3.h>

#include <cstring>
#include <map>
#include <mutex>

namespace sleepdyn::detail {

namespace {
// FFTW plan creation/destruction is not thread-safe.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

Fft::Fft(std::size_t n) : n_(n) {
  real_buf_ = fftw_alloc_real(n);
  half_buf_ = reinterpret_cast<std::complex<double>*>(fftw_alloc_complex(n / 2 + 1));
  full_in_ = reinterpret_cast<std::complex<double>*>(fftw_alloc_complex(n));
  full_out_ = reinterpret_cast<std::complex<double>*>(fftw_alloc_complex(n));
  std::lock_guard<std::mutex> lock(planner_mutex());
  plan_r2c_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), real_buf_,
                                   reinterpret_cast<fftw_complex*>(half_buf_),
                                   FFTW_ESTIMATE);
  plan_c2r_ = fftw_plan_dft_c2r_1d(static_cast<int>(n),
                                   reinterpret_cast<fftw_complex*>(half_buf_),
                                   real_buf_, FFTW_ESTIMATE);
  plan_c2c_ = fftw_plan_dft_1d(static_cast<int>(n),
                               reinterpret_cast<fftw_complex*>(full_in_),
                               reinterpret_cast<fftw_complex*>(full_out_),
                               FFTW_BACKWARD, FFTW_ESTIMATE);
}

Fft::~Fft() {
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(static_cast<fftw_plan>(plan_r2c_));
    fftw_destroy_plan(static_cast<fftw_plan>(plan_c2r_));
    fftw_destroy_plan(static_cast<fftw_plan>(plan_c2c_));
  }
  fftw_free(real_buf_);
  fftw_free(half_buf_);
  fftw_free(full_in_);
  fftw_free(full_out_);
}

void Fft::forward_real(const double* in, std::complex<double>* out) {
  std::memcpy(real_buf_, in, n_ * sizeof(double));
  fftw_execute(static_cast<fftw_plan>(plan_r2c_));
  std::memcpy(out, half_buf_, (n_ / 2 + 1) * sizeof(std::complex<double>));
}

void Fft::inverse_real(const std::complex<double>* in, double* out) {
  std::memcpy(half_buf_, in, (n_ / 2 + 1) * sizeof(std::complex<double>));
  fftw_execute(static_cast<fftw_plan>(plan_c2r_));
  const double scale = 1.0 / static_cast<double>(n_);
  for (std::size_t i = 0; i < n_; ++i) out[i] = real_buf_[i] * scale;
}

void Fft::inverse_complex(const std::complex<double>* in, std::complex<double>* out) {
  std::memcpy(full_in_, in, n_ * sizeof(std::complex<double>));
  fftw_execute(static_cast<fftw_plan>(plan_c2c_));
  const double scale = 1.0 / static_cast<double>(n_);
  for (std::size_t i = 0; i < n_; ++i) out[i] = full_out_[i] * scale;
}

Fft& fft_for(std::size_t n) {
  thread_local std::map<std::size_t, Fft> cache;
  auto it = cache.find(n);
  if (it == cache.end()) {
    it = cache.try_emplace(n, n).first;
  }
  return it->second;
}

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

std::size_t next_power_of_two(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

}  // namespace sleepdyn::detail
