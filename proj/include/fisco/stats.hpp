#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace fisco::stats {

inline constexpr double kDefaultSignificance = 0.05;

// ---------------------------------------------------------------------------
// Pair enumeration

using IdPair = std::pair<std::string, std::string>;

struct PairEnumeration {
  std::vector<IdPair> inter;  // k^2, every (g1[i], g2[j])
  std::vector<IdPair> intra;  // k(k-1), (g[i], g[j]) with i < j inside each group
};

PairEnumeration enumerate_pairs(std::span<const std::string> group1, std::span<const std::string> group2);

// ---------------------------------------------------------------------------
// Student t distribution

/// Regularized incomplete beta I_x(a, b) via Lentz's continued fraction
/// (at most 300 iterations, 1e-14 relative convergence).
double incomplete_beta(double a, double b, double x);

/// P(T <= t) for Student's t with `df` degrees of freedom.
double student_t_cdf(double t, double df);

/// 2 * (1 - CDF(|t|)). Infinite |t| yields 0.
double student_t_two_sided_p(double t, double df);

// ---------------------------------------------------------------------------
// Welch's test

struct SampleSummary {
  std::size_t n = 0;
  double mean = 0.0;
  double variance = 0.0;  // N-1 denominator; zero for an effectively constant sample
};

SampleSummary summarize(std::span<const double> values);

struct WelchStatistic {
  double t = 0.0;
  double df = 0.0;
};

/// t = (mean1 - mean2) / sqrt(s1^2/N1 + s2^2/N2) with Welch-Satterthwaite df.
///
/// Both variances zero: equal means give t = 0, unequal means give t = +/-inf;
/// df is then reported as N1 + N2 - 2.
WelchStatistic welch_t(std::span<const double> first, std::span<const double> second);

struct WelchResult {
  double t = 0.0;
  double df = 0.0;
  double p_two_sided = 1.0;
  bool significant = false;
};

WelchResult welch_test(std::span<const double> first, std::span<const double> second,
                       double significance_level = kDefaultSignificance);

// ---------------------------------------------------------------------------
// Per-case decision

struct CaseResult {
  std::string case_id;
  double mean_inter = 0.0;
  double mean_intra = 0.0;
  double var_inter = 0.0;
  double var_intra = 0.0;
  std::size_t n1 = 0;
  std::size_t n2 = 0;
  WelchResult welch;
  bool biased = false;
  std::size_t excluded_pairs = 0;
};

/// Welch test of inter- against intra-group similarities. Throws
/// InsufficientPairs when fewer than two scores of either kind survive.
CaseResult fisco_case(std::string case_id, std::span<const double> inter, std::span<const double> intra,
                      double significance_level = kDefaultSignificance, std::size_t excluded_pairs = 0);

// ---------------------------------------------------------------------------
// Bootstrap and paired test

struct BootstrapCI {
  double point = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double level = 0.95;
  std::size_t resamples = 1000;
  std::uint64_t seed = 0;
};

using Statistic = std::function<double(std::span<const double>)>;

double mean(std::span<const double> values);

/// Percentile bootstrap. Deterministic for a fixed seed.
BootstrapCI bootstrap_ci(std::span<const double> values, double level = 0.95, std::size_t resamples = 1000,
                         std::uint64_t seed = 0, const Statistic& statistic = mean);

struct PairedTestResult {
  double mean_diff = 0.0;
  double t = 0.0;
  double df = 0.0;
  double p_two_sided = 1.0;
};

/// One-sample t test on a[i] - b[i].
PairedTestResult paired_t_test(std::span<const double> a, std::span<const double> b);

}  // namespace fisco::stats
