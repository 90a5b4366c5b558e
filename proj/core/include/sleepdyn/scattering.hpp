#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sleepdyn/errors.hpp"

namespace sleepdyn {

// Renormalization constant and log floor.
inline constexpr double kScatterEpsilon = 9.5367431640625e-07;  // 2^-20

// Analytic Morlet filter bank on the FFT grid of length n. Frequencies are
// Nyquist-normalized: filter j peaks at 2^{-j/q}, j = 0..h, with bandwidth
// 2^{-j/q}/q. The low-frequency band [0, 2^{-h/q}] is covered by q-1 equally
// spaced filters of bandwidth 2^{-h/q}/q; they participate in scattering
// paths only when include_lowfreq_paths is set.
class FilterBank {
 public:
  static FilterBank build(int q, int h, std::size_t n,
                          bool include_lowfreq_paths = false);

  int q() const { return q_; }
  int h() const { return h_; }
  std::size_t size() const { return n_; }
  bool include_lowfreq_paths() const { return include_lowfreq_paths_; }

  int num_filters() const { return static_cast<int>(psi_hat_.size()); }
  int num_dyadic() const { return h_ + 1; }
  // Half-spectrum (n/2 + 1 bins), non-negative reals.
  const Eigen::ArrayXd& psi_hat(int j) const { return psi_hat_[j]; }
  const Eigen::ArrayXd& phi_hat() const { return phi_hat_; }
  double center_frequency(int j) const { return centers_[j]; }

  // Path filters in ascending frequency-index order (dyadic 0..h, then the
  // low-frequency filters when enabled).
  const std::vector<int>& path_filters() const { return path_filters_; }

  int subsample_stride() const { return stride_; }
  int averaging_window() const { return 2 * stride_; }

 private:
  int q_ = 0;
  int h_ = 0;
  std::size_t n_ = 0;
  bool include_lowfreq_paths_ = false;
  int stride_ = 0;
  std::vector<Eigen::ArrayXd> psi_hat_;
  Eigen::ArrayXd phi_hat_;
  std::vector<double> centers_;
  std::vector<int> path_filters_;
};

// Scattering outputs on the full time grid over the original signal support.
// s1 column c corresponds to filter s1_filters[c]; s2 column c to the pair
// s2_pairs[c] (j1 < j2). abs_lowpass is |x| * phi_H, the S1 renormalizer.
struct ScatteringCoefficients {
  Eigen::VectorXd s0;
  Eigen::MatrixXd s1;
  Eigen::MatrixXd s2;
  std::vector<int> s1_filters;
  std::vector<std::pair<int, int>> s2_pairs;
  Eigen::VectorXd abs_lowpass;
  std::size_t signal_len = 0;
  int subsample_stride = 0;
  double epsilon = kScatterEpsilon;
  bool log_compressed = false;
};

ScatteringCoefficients scatter(std::span<const double> window, const FilterBank& bank);

// In place: S1 <- S1 / (|x|*phi + eps), S2(:,j1,j2) <- S2 / (S1_raw(:,j1) + eps),
// S0 <- S0 + eps; then natural log with floor eps on every value.
void renormalize_and_log(ScatteringCoefficients& coeffs);

struct PathKey {
  int order = 0;  // 0, 1 or 2
  int j1 = -1;
  int j2 = -1;
  bool operator==(const PathKey&) const = default;
};

// Fixed feature layout for one (bank, signal length) combination. Slot
// centers sit at l * stride, l >= 1, and only slots whose averaging window
// [c - stride, c + stride] lies inside the signal support are kept.
struct FeatureLayout {
  int t_sub = 0;
  int stride = 0;
  int window = 0;
  std::vector<PathKey> paths;           // block order: S0, S1 by j1, S2 lex
  std::vector<std::size_t> slot_centers;
  std::size_t dim() const { return paths.size() * static_cast<std::size_t>(t_sub); }
  // flat index -> (path, slot)
  PathKey path_of(std::size_t flat_index) const;
  int slot_of(std::size_t flat_index) const;
};

FeatureLayout feature_layout(const FilterBank& bank, std::size_t signal_len);

// Samples every path at the layout's slot centers and concatenates the path
// blocks in layout order.
std::vector<double> subsample_concat(const ScatteringCoefficients& coeffs,
                                     const FeatureLayout& layout);

}  // namespace sleepdyn
