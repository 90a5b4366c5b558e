#pragma once

#include <span>
#include <string>
#include <vector>

#include "sleepdyn/errors.hpp"

namespace sleepdyn {

enum class Tail { Greater, Less };

struct StatTestResult {
  std::string test_name;
  double statistic = 0.0;
  double p_value = 1.0;
  Tail tail = Tail::Greater;
  int n = 0;       // effective sample size (pairs after zero-drop, or n_a)
  bool exact = false;
  double bonferroni_adjusted_alpha = 0.0;  // filled by bonferroni()
};

// One-tailed Wilcoxon signed-rank test on paired samples. Zero differences
// are dropped; at least 5 pairs must remain. The null distribution is exact
// (sign enumeration) for n <= 12 and a tie-corrected normal approximation
// with continuity correction above. Tail::Greater tests H1: a > b.
StatTestResult wilcoxon_signed_rank(std::span<const double> a,
                                    std::span<const double> b,
                                    Tail alternative = Tail::Greater);

// One-tailed F test of equal variances; statistic is var(a)/var(b) with
// (n_a-1, n_b-1) degrees of freedom. Tail::Less tests H1: var(a) < var(b).
StatTestResult f_test_variance(std::span<const double> a,
                               std::span<const double> b,
                               Tail alternative = Tail::Less);

// flag[i] = (p[i] < alpha / m) with m = p.size().
std::vector<bool> bonferroni(std::span<const double> p_values, double alpha = 0.05);

// Lower CDF of the F distribution; exposed for the fixture tests.
double f_distribution_cdf(double x, double df1, double df2);

// Standard normal CDF.
double normal_cdf(double z);

}  // namespace sleepdyn
