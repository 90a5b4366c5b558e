#pragma once

#include <complex>
#include <cstddef>

namespace sleepdyn::detail {

// Fixed-size FFT workspace around FFTW. Plans and buffers are owned by the
// instance, so one instance must not be shared across threads; fft_for()
// hands out a thread-local instance per size.
class Fft {
 public:
  explicit Fft(std::size_t n);
  ~Fft();
  Fft(const Fft&) = delete;
  Fft& operator=(const Fft&) = delete;

  std::size_t size() const { return n_; }

  // Real n -> Hermitian half spectrum (n/2 + 1 bins).
  void forward_real(const double* in, std::complex<double>* out);
  // Hermitian half spectrum -> real n, scaled by 1/n.
  void inverse_real(const std::complex<double>* in, double* out);
  // Full complex spectrum -> complex n, scaled by 1/n.
  void inverse_complex(const std::complex<double>* in, std::complex<double>* out);

 private:
  std::size_t n_;
  void* plan_r2c_;
  void* plan_c2r_;
  void* plan_c2c_;
  double* real_buf_;
  std::complex<double>* half_buf_;
  std::complex<double>* full_in_;
  std::complex<double>* full_out_;
};

// Thread-local cached workspace for the given transform size.
Fft& fft_for(std::size_t n);

bool is_power_of_two(std::size_t n);
std::size_t next_power_of_two(std::size_t n);

}  // namespace sleepdyn::detail
