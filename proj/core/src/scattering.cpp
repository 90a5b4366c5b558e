#include "sleepdyn/scattering.hpp"

#include <cmath>
#include <complex>

#include "fft.hpp"

namespace sleepdyn {

namespace {

constexpr double kLn2 = 0.6931471805599453;

// Zero-mean Gaussian band-pass: exp(-(w-c)^2/(2s^2)) - K exp(-w^2/(2s^2))
// with K chosen so the value at w = 0 vanishes. Non-negative for w >= 0.
double corrected_gaussian(double w, double center, double sigma) {
  const double k = std::exp(-center * center / (2.0 * sigma * sigma));
  const double main = std::exp(-(w - center) * (w - center) / (2.0 * sigma * sigma));
  const double corr = k * std::exp(-w * w / (2.0 * sigma * sigma));
  return std::max(0.0, main - corr);
}

}  // namespace

FilterBank FilterBank::build(int q, int h, std::size_t n, bool include_lowfreq_paths) {
  if (q < 1 || h < 1 || n == 0) {
    throw InvalidParameters("filter bank needs q >= 1, h >= 1, n > 0");
  }
  if (!detail::is_power_of_two(n)) {
    throw InvalidParameters("filter bank length must be a power of two");
  }
  const double max_scale = std::pow(2.0, static_cast<double>(h) / q);
  if (static_cast<double>(n) < max_scale) {
    throw InvalidParameters("filter bank length shorter than the largest wavelet scale");
  }

  FilterBank bank;
  bank.q_ = q;
  bank.h_ = h;
  bank.n_ = n;
  bank.include_lowfreq_paths_ = include_lowfreq_paths;
  bank.stride_ = std::max(
      1, static_cast<int>(std::lround(std::pow(2.0, static_cast<double>(h) / q - 1.0))));

  const std::size_t half = n / 2 + 1;
  auto bin_freq = [n](std::size_t k) {
    return 2.0 * static_cast<double>(k) / static_cast<double>(n);  // Nyquist units
  };

  // Dyadic filters j = 0..h: center 2^{-j/q}, bandwidth 2^{-j/q}/q.
  const double sigma0 = 1.0 / (2.0 * q * std::sqrt(kLn2));
  for (int j = 0; j <= h; ++j) {
    const double dil = std::pow(2.0, static_cast<double>(j) / q);
    Eigen::ArrayXd f(half);
    for (std::size_t k = 0; k < half; ++k) {
      f[k] = corrected_gaussian(bin_freq(k) * dil, 1.0, sigma0);
    }
    bank.psi_hat_.push_back(std::move(f));
    bank.centers_.push_back(1.0 / dil);
  }
  // q-1 equally spaced low-frequency filters below 2^{-h/q}.
  const double low_band = std::pow(2.0, -static_cast<double>(h) / q) / q;
  const double sigma_low = low_band / (2.0 * std::sqrt(kLn2));
  for (int l = 1; l <= q - 1; ++l) {
    const double center = l * low_band;
    Eigen::ArrayXd f(half);
    for (std::size_t k = 0; k < half; ++k) {
      f[k] = corrected_gaussian(bin_freq(k), center, sigma_low);
    }
    bank.psi_hat_.push_back(std::move(f));
    bank.centers_.push_back(center);
  }

  const double sigma_phi = low_band / std::sqrt(kLn2);
  bank.phi_hat_.resize(half);
  for (std::size_t k = 0; k < half; ++k) {
    const double w = bin_freq(k);
    bank.phi_hat_[k] = std::exp(-w * w / (2.0 * sigma_phi * sigma_phi));
  }

  for (int j = 0; j <= h; ++j) bank.path_filters_.push_back(j);
  if (include_lowfreq_paths) {
    for (int j = h + 1; j < bank.num_filters(); ++j) bank.path_filters_.push_back(j);
  }
  return bank;
}

namespace {

using Cplx = std::complex<double>;

struct ScatterWork {
  std::vector<Cplx> x_half;     // input half spectrum
  std::vector<Cplx> u_half;     // first-order envelope half spectrum
  std::vector<Cplx> band_half;  // scratch half spectrum
  std::vector<Cplx> full;       // analytic full spectrum
  std::vector<Cplx> analytic;   // complex band-passed signal
  std::vector<double> real_buf;
};

// conv with an analytic (non-negative-frequency) filter, then modulus.
void analytic_envelope(detail::Fft& fft, const std::vector<Cplx>& half,
                       const Eigen::ArrayXd& psi, ScatterWork& w,
                       std::vector<double>& out) {
  const std::size_t n = fft.size();
  const std::size_t m = n / 2 + 1;
  std::fill(w.full.begin(), w.full.end(), Cplx(0.0, 0.0));
  for (std::size_t k = 0; k < m; ++k) w.full[k] = half[k] * psi[k];
  fft.inverse_complex(w.full.data(), w.analytic.data());
  out.resize(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = std::abs(w.analytic[i]);
}

// low-pass a real series through phi and keep the signal support.
void lowpass_into(detail::Fft& fft, const std::vector<Cplx>& half,
                  const Eigen::ArrayXd& phi, ScatterWork& w, double* out,
                  std::size_t len, bool clamp_nonneg) {
  const std::size_t m = fft.size() / 2 + 1;
  for (std::size_t k = 0; k < m; ++k) w.band_half[k] = half[k] * phi[k];
  fft.inverse_real(w.band_half.data(), w.real_buf.data());
  for (std::size_t i = 0; i < len; ++i) {
    double v = w.real_buf[i];
    // Moduli smoothed by a positive kernel are non-negative; strip FFT dust.
    if (clamp_nonneg && v < 0.0) v = 0.0;
    out[i] = v;
  }
}

}  // namespace

ScatteringCoefficients scatter(std::span<const double> window, const FilterBank& bank) {
  const std::size_t n = bank.size();
  const std::size_t len = window.size();
  if (len == 0 || len > n) {
    throw InvalidParameters("window length " + std::to_string(len) +
                            " does not fit the bank length " + std::to_string(n));
  }
  for (double v : window) {
    if (!std::isfinite(v)) throw NonFiniteInput("non-finite sample in scatter input");
  }

  detail::Fft& fft = detail::fft_for(n);
  const std::size_t m = n / 2 + 1;
  ScatterWork w;
  w.x_half.resize(m);
  w.u_half.resize(m);
  w.band_half.resize(m);
  w.full.resize(n);
  w.analytic.resize(n);
  w.real_buf.resize(n);

  std::vector<double> padded(n, 0.0);
  std::copy(window.begin(), window.end(), padded.begin());
  fft.forward_real(padded.data(), w.x_half.data());

  const std::vector<int>& paths = bank.path_filters();
  const int p1 = static_cast<int>(paths.size());

  ScatteringCoefficients c;
  c.signal_len = len;
  c.subsample_stride = bank.subsample_stride();
  c.s0.resize(len);
  c.abs_lowpass.resize(len);
  c.s1.resize(len, p1);
  c.s1_filters = paths;
  for (int a = 0; a < p1; ++a) {
    for (int b = a + 1; b < p1; ++b) {
      c.s2_pairs.emplace_back(paths[a], paths[b]);
    }
  }
  c.s2.resize(len, static_cast<Eigen::Index>(c.s2_pairs.size()));

  // S0 = x * phi (sign kept; the signal mean can be negative).
  lowpass_into(fft, w.x_half, bank.phi_hat(), w, c.s0.data(), len, false);

  // |x| * phi, the first-order renormalizer.
  for (std::size_t i = 0; i < n; ++i) w.real_buf[i] = std::abs(padded[i]);
  {
    std::vector<Cplx> abs_half(m);
    fft.forward_real(w.real_buf.data(), abs_half.data());
    lowpass_into(fft, abs_half, bank.phi_hat(), w, c.abs_lowpass.data(), len, true);
  }

  std::vector<double> u1, u2;
  std::vector<Cplx> u2_half(m);
  int pair_col = 0;
  for (int a = 0; a < p1; ++a) {
    analytic_envelope(fft, w.x_half, bank.psi_hat(paths[a]), w, u1);
    fft.forward_real(u1.data(), w.u_half.data());
    lowpass_into(fft, w.u_half, bank.phi_hat(), w, c.s1.col(a).data(), len, true);
    for (int b = a + 1; b < p1; ++b) {
      analytic_envelope(fft, w.u_half, bank.psi_hat(paths[b]), w, u2);
      fft.forward_real(u2.data(), u2_half.data());
      lowpass_into(fft, u2_half, bank.phi_hat(), w, c.s2.col(pair_col).data(), len, true);
      ++pair_col;
    }
  }
  return c;
}

void renormalize_and_log(ScatteringCoefficients& c) {
  if (c.log_compressed) {
    throw Error("scattering coefficients are already log-compressed");
  }
  const double eps = c.epsilon;

  // Column index of each first-order filter, for the S2 denominators.
  auto s1_col_of = [&](int j1) {
    for (std::size_t i = 0; i < c.s1_filters.size(); ++i) {
      if (c.s1_filters[i] == j1) return static_cast<Eigen::Index>(i);
    }
    throw SizeMismatch("second-order path references a missing first-order column");
  };

  for (Eigen::Index col = 0; col < c.s2.cols(); ++col) {
    const Eigen::Index den = s1_col_of(c.s2_pairs[static_cast<std::size_t>(col)].first);
    c.s2.col(col).array() /= c.s1.col(den).array() + eps;
  }
  for (Eigen::Index col = 0; col < c.s1.cols(); ++col) {
    c.s1.col(col).array() /= c.abs_lowpass.array() + eps;
  }
  c.s0.array() += eps;

  auto floor_log = [eps](double v) { return std::log(std::max(v, eps)); };
  c.s0 = c.s0.unaryExpr(floor_log);
  c.s1 = c.s1.unaryExpr(floor_log);
  c.s2 = c.s2.unaryExpr(floor_log);
  c.log_compressed = true;
}

PathKey FeatureLayout::path_of(std::size_t flat_index) const {
  return paths.at(flat_index / static_cast<std::size_t>(t_sub));
}

int FeatureLayout::slot_of(std::size_t flat_index) const {
  return static_cast<int>(flat_index % static_cast<std::size_t>(t_sub));
}

FeatureLayout feature_layout(const FilterBank& bank, std::size_t signal_len) {
  FeatureLayout layout;
  layout.stride = bank.subsample_stride();
  layout.window = bank.averaging_window();
  const auto stride = static_cast<std::size_t>(layout.stride);
  for (std::size_t c = stride; c + stride <= signal_len; c += stride) {
    layout.slot_centers.push_back(c);
  }
  layout.t_sub = static_cast<int>(layout.slot_centers.size());
  if (layout.t_sub == 0) {
    throw InvalidParameters("signal too short for the subsampling grid");
  }

  layout.paths.push_back(PathKey{0, -1, -1});
  const std::vector<int>& pf = bank.path_filters();
  for (int j : pf) layout.paths.push_back(PathKey{1, j, -1});
  for (std::size_t a = 0; a < pf.size(); ++a) {
    for (std::size_t b = a + 1; b < pf.size(); ++b) {
      layout.paths.push_back(PathKey{2, pf[a], pf[b]});
    }
  }
  return layout;
}

std::vector<double> subsample_concat(const ScatteringCoefficients& c,
                                     const FeatureLayout& layout) {
  const std::size_t expected_paths =
      1 + c.s1_filters.size() + c.s2_pairs.size();
  if (layout.paths.size() != expected_paths) {
    throw SizeMismatch("feature layout does not match the coefficient paths");
  }
  std::vector<double> out;
  out.reserve(layout.dim());
  auto sample = [&](const auto& series) {
    for (std::size_t center : layout.slot_centers) {
      out.push_back(series[static_cast<Eigen::Index>(center)]);
    }
  };
  sample(c.s0);
  for (Eigen::Index col = 0; col < c.s1.cols(); ++col) sample(c.s1.col(col));
  for (Eigen::Index col = 0; col < c.s2.cols(); ++col) sample(c.s2.col(col));
  return out;
}

}  // namespace sleepdyn
