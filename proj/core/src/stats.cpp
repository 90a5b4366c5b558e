#include "sleepdyn/stats.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include <boost/math/distributions/fisher_f.hpp>

namespace sleepdyn {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double f_distribution_cdf(double x, double df1, double df2) {
  if (x <= 0.0) return 0.0;
  boost::math::fisher_f dist(df1, df2);
  return boost::math::cdf(dist, x);
}

namespace {

// Midranks of |d|, ties averaged.
std::vector<double> midranks(const std::vector<double>& abs_d) {
  const std::size_t n = abs_d.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t i, std::size_t j) { return abs_d[i] < abs_d[j]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && abs_d[order[j + 1]] == abs_d[order[i]]) ++j;
    const double avg = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

// P(W+ >= w) by enumerating all 2^n sign assignments over the observed ranks.
double exact_upper_tail(const std::vector<double>& ranks, double w) {
  const int n = static_cast<int>(ranks.size());
  const std::uint64_t combos = std::uint64_t{1} << n;
  std::uint64_t count = 0;
  for (std::uint64_t mask = 0; mask < combos; ++mask) {
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
      if (mask & (std::uint64_t{1} << i)) sum += ranks[i];
    }
    if (sum >= w - 1e-9) ++count;
  }
  return static_cast<double>(count) / static_cast<double>(combos);
}

}  // namespace

StatTestResult wilcoxon_signed_rank(std::span<const double> a,
                                    std::span<const double> b,
                                    Tail alternative) {
  if (a.size() != b.size()) {
    throw LengthMismatch("wilcoxon: paired samples of unequal length");
  }
  std::vector<double> d;
  d.reserve(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double di = a[i] - b[i];
    if (di != 0.0) d.push_back(di);
  }
  const int n = static_cast<int>(d.size());
  if (n < 5) {
    throw TooFewPairs("wilcoxon: " + std::to_string(n) +
                      " non-zero pairs, need at least 5");
  }

  std::vector<double> abs_d(d.size());
  std::transform(d.begin(), d.end(), abs_d.begin(),
                 [](double x) { return std::abs(x); });
  const std::vector<double> ranks = midranks(abs_d);

  double w_pos = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (d[i] > 0.0) w_pos += ranks[i];
  }
  // Tail::Less on W+ is Tail::Greater on W-; both reduce to an upper tail.
  const double rank_total = static_cast<double>(n) * (n + 1) / 2.0;
  const double w_tail = alternative == Tail::Greater ? w_pos : rank_total - w_pos;

  StatTestResult r;
  r.test_name = "wilcoxon_signed_rank";
  r.statistic = w_pos;
  r.tail = alternative;
  r.n = n;

  if (n <= 12) {
    r.exact = true;
    r.p_value = exact_upper_tail(ranks, w_tail);
    return r;
  }

  const double mu = rank_total / 2.0;
  double var = static_cast<double>(n) * (n + 1) * (2 * n + 1) / 24.0;
  std::map<double, int> tie_groups;
  for (double x : abs_d) ++tie_groups[x];
  for (const auto& [value, t] : tie_groups) {
    (void)value;
    if (t > 1) var -= static_cast<double>(t) * t * t / 48.0 - t / 48.0;
  }
  const double z = (w_tail - mu - 0.5) / std::sqrt(var);
  r.exact = false;
  r.p_value = 1.0 - normal_cdf(z);
  return r;
}

namespace {

double sample_variance(std::span<const double> x) {
  const double n = static_cast<double>(x.size());
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  return ss / (n - 1.0);
}

}  // namespace

StatTestResult f_test_variance(std::span<const double> a,
                               std::span<const double> b,
                               Tail alternative) {
  if (a.size() < 2 || b.size() < 2) {
    throw ZeroVariance("f test: both samples need at least 2 values");
  }
  const double va = sample_variance(a);
  const double vb = sample_variance(b);
  if (va <= 0.0 || vb <= 0.0) {
    throw ZeroVariance("f test: constant sample has zero variance");
  }

  StatTestResult r;
  r.test_name = "f_test_variance";
  r.statistic = va / vb;
  r.tail = alternative;
  r.n = static_cast<int>(a.size());
  r.exact = true;

  const double df1 = static_cast<double>(a.size()) - 1.0;
  const double df2 = static_cast<double>(b.size()) - 1.0;
  boost::math::fisher_f dist(df1, df2);
  if (alternative == Tail::Less) {
    r.p_value = boost::math::cdf(dist, r.statistic);
  } else {
    r.p_value = boost::math::cdf(boost::math::complement(dist, r.statistic));
  }
  return r;
}

std::vector<bool> bonferroni(std::span<const double> p_values, double alpha) {
  if (p_values.empty()) {
    throw LengthMismatch("bonferroni: no p-values given");
  }
  const double threshold = alpha / static_cast<double>(p_values.size());
  std::vector<bool> flags(p_values.size());
  for (std::size_t i = 0; i < p_values.size(); ++i) {
    flags[i] = p_values[i] < threshold;
  }
  return flags;
}

}  // namespace sleepdyn
