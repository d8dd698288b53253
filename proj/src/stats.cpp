#include "fisco/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>
#include <utility>

#include "fisco/errors.hpp"

namespace fisco::stats {

PairEnumeration enumerate_pairs(std::span<const std::string> group1, std::span<const std::string> group2) {
  if (group1.size() < 2 || group2.size() < 2) {
    throw Error(ErrorCode::GroupTooSmall, "each group needs at least 2 responses");
  }
  std::set<std::string> seen;
  for (const auto& id : group1) seen.insert(id);
  for (const auto& id : group2) seen.insert(id);
  if (seen.size() != group1.size() + group2.size()) {
    throw Error(ErrorCode::InvalidArgument, "response ids must be distinct across both groups");
  }

  PairEnumeration out;
  out.inter.reserve(group1.size() * group2.size());
  for (const auto& a : group1) {
    for (const auto& b : group2) out.inter.emplace_back(a, b);
  }
  for (const auto group : {group1, group2}) {
    for (std::size_t i = 0; i < group.size(); ++i) {
      for (std::size_t j = i + 1; j < group.size(); ++j) out.intra.emplace_back(group[i], group[j]);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

constexpr int kMaxIterations = 300;
constexpr double kConvergence = 1e-14;
constexpr double kTiny = 1e-300;

// Modified Lentz evaluation of the incomplete beta continued fraction.
double beta_continued_fraction(double a, double b, double x) {
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIterations; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;

    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0) < kConvergence) return h;
  }
  throw Error(ErrorCode::InvalidArgument, "incomplete beta continued fraction did not converge");
}

// Stirling remainder of lgamma(x) for x >= 30.
double stirling_tail(double x) {
  const double x2 = x * x;
  return (1.0 / 12.0 - (1.0 / 360.0 - (1.0 / 1260.0) / x2) / x2) / x;
}

// log B(a, b). Plain lgamma differences lose about 1e-9 absolute once the
// larger argument reaches 1e5, so that side goes through Stirling instead.
double log_beta(double a, double b) {
  if (a < b) std::swap(a, b);
  if (a < 30.0) return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
  // lgamma(a + b) - lgamma(a)
  const double ratio = (a - 0.5) * std::log1p(b / a) + b * std::log(a + b) - b + stirling_tail(a + b) -
                       stirling_tail(a);
  return std::lgamma(b) - ratio;
}

}  // namespace

namespace {

// I_x(a, b) with y = 1 - x supplied by the caller, who can often form it
// without cancellation.
double incomplete_beta_xy(double a, double b, double x, double y) {
  if (x == 0.0) return 0.0;
  if (y == 0.0) return 1.0;
  const double log_front = a * std::log(x) + b * std::log(y) - log_beta(a, b);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, y) / b;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0) || !std::isfinite(a) || !std::isfinite(b)) {
    throw Error(ErrorCode::InvalidArgument, "incomplete beta needs a, b > 0");
  }
  if (!(x >= 0.0 && x <= 1.0)) throw Error(ErrorCode::InvalidArgument, "incomplete beta needs x in [0, 1]");
  return incomplete_beta_xy(a, b, x, 1.0 - x);
}

namespace {

void check_df(double df) {
  if (!(df > 0.0) || !std::isfinite(df)) {
    throw Error(ErrorCode::InvalidDf, "degrees of freedom must be finite and > 0");
  }
}

// P(|T| > |t|) = I_{df/(df+t^2)}(df/2, 1/2).
double two_sided_tail(double t, double df) {
  const double t2 = t * t;
  return incomplete_beta_xy(0.5 * df, 0.5, df / (df + t2), t2 / (df + t2));
}

}  // namespace

double student_t_cdf(double t, double df) {
  check_df(df);
  if (!std::isfinite(t)) throw Error(ErrorCode::InvalidArgument, "t must be finite");
  if (t == 0.0) return 0.5;
  const double half_tail = 0.5 * two_sided_tail(t, df);
  return t > 0.0 ? 1.0 - half_tail : half_tail;
}

double student_t_two_sided_p(double t, double df) {
  check_df(df);
  if (std::isnan(t)) throw Error(ErrorCode::InvalidArgument, "t is NaN");
  if (std::isinf(t)) return 0.0;
  if (t == 0.0) return 1.0;
  return std::clamp(two_sided_tail(t, df), 0.0, 1.0);
}

// ---------------------------------------------------------------------------

double mean(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorCode::SampleTooSmall, "mean of empty sample");
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

namespace {

// Spread below this fraction of the magnitude is rounding noise from
// computing a constant sample (e.g. (b + 0.1) - b), treated as exactly zero.
constexpr double kConstantRelTol = 1e-12;

bool effectively_constant(std::span<const double> values) {
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const double scale = std::max(std::fabs(*lo), std::fabs(*hi));
  return (*hi - *lo) <= kConstantRelTol * scale;
}

}  // namespace

SampleSummary summarize(std::span<const double> values) {
  if (values.size() < 2) throw Error(ErrorCode::SampleTooSmall, "sample needs at least 2 values");
  for (double v : values) {
    if (!std::isfinite(v)) throw Error(ErrorCode::InvalidArgument, "sample contains a non-finite value");
  }
  SampleSummary s;
  s.n = values.size();
  s.mean = mean(values);
  if (effectively_constant(values)) return s;
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.variance = ss / static_cast<double>(s.n - 1);
  return s;
}

namespace {

WelchStatistic welch_from(const SampleSummary& s1, const SampleSummary& s2) {
  const double n1 = static_cast<double>(s1.n);
  const double n2 = static_cast<double>(s2.n);
  const double diff = s1.mean - s2.mean;

  if (s1.variance == 0.0 && s2.variance == 0.0) {
    const double max_df = n1 + n2 - 2.0;
    const double scale = std::max(std::fabs(s1.mean), std::fabs(s2.mean));
    if (std::fabs(diff) <= kConstantRelTol * scale) return {0.0, max_df};
    return {diff > 0.0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity(),
            max_df};
  }

  const double v1 = s1.variance / n1;
  const double v2 = s2.variance / n2;
  const double se2 = v1 + v2;
  WelchStatistic w;
  w.t = diff / std::sqrt(se2);
  w.df = se2 * se2 / (v1 * v1 / (n1 - 1.0) + v2 * v2 / (n2 - 1.0));
  return w;
}

}  // namespace

WelchStatistic welch_t(std::span<const double> first, std::span<const double> second) {
  return welch_from(summarize(first), summarize(second));
}

WelchResult welch_test(std::span<const double> first, std::span<const double> second, double significance_level) {
  const WelchStatistic w = welch_t(first, second);
  WelchResult r;
  r.t = w.t;
  r.df = w.df;
  r.p_two_sided = student_t_two_sided_p(w.t, w.df);
  r.significant = r.p_two_sided < significance_level;
  return r;
}

CaseResult fisco_case(std::string case_id, std::span<const double> inter, std::span<const double> intra,
                      double significance_level, std::size_t excluded_pairs) {
  if (!(significance_level > 0.0 && significance_level < 1.0)) {
    throw Error(ErrorCode::ConfigError, "significance level must lie in (0, 1)");
  }
  if (inter.size() < 2 || intra.size() < 2) {
    throw Error(ErrorCode::InsufficientPairs, "case " + case_id + " has " + std::to_string(inter.size()) +
                                                  " inter and " + std::to_string(intra.size()) +
                                                  " intra scores after exclusions; need at least 2 of each");
  }
  const SampleSummary s_inter = summarize(inter);
  const SampleSummary s_intra = summarize(intra);
  const WelchStatistic w = welch_from(s_inter, s_intra);

  CaseResult r;
  r.case_id = std::move(case_id);
  r.mean_inter = s_inter.mean;
  r.mean_intra = s_intra.mean;
  r.var_inter = s_inter.variance;
  r.var_intra = s_intra.variance;
  r.n1 = s_inter.n;
  r.n2 = s_intra.n;
  r.welch.t = w.t;
  r.welch.df = w.df;
  r.welch.p_two_sided = student_t_two_sided_p(w.t, w.df);
  r.welch.significant = r.welch.p_two_sided < significance_level;
  r.biased = r.welch.significant;
  r.excluded_pairs = excluded_pairs;
  return r;
}

// ---------------------------------------------------------------------------

namespace {

// Linear interpolation between order statistics (R type 7).
double quantile_sorted(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace

BootstrapCI bootstrap_ci(std::span<const double> values, double level, std::size_t resamples, std::uint64_t seed,
                         const Statistic& statistic) {
  if (values.size() < 2) throw Error(ErrorCode::SampleTooSmall, "bootstrap needs at least 2 values");
  if (!(level > 0.0 && level < 1.0)) throw Error(ErrorCode::InvalidArgument, "confidence level must lie in (0, 1)");
  if (resamples < 1) throw Error(ErrorCode::InvalidArgument, "bootstrap needs at least one resample");

  BootstrapCI ci;
  ci.level = level;
  ci.resamples = resamples;
  ci.seed = seed;
  ci.point = statistic(values);

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, values.size() - 1);
  std::vector<double> draw(values.size());
  std::vector<double> stats;
  stats.reserve(resamples);
  for (std::size_t r = 0; r < resamples; ++r) {
    for (auto& d : draw) d = values[pick(rng)];
    stats.push_back(statistic(draw));
  }
  std::sort(stats.begin(), stats.end());
  const double alpha = 1.0 - level;
  // Percentile intervals can exclude the point estimate on skewed samples;
  // widen so the reported interval always brackets it.
  ci.lower = std::min(quantile_sorted(stats, alpha / 2.0), ci.point);
  ci.upper = std::max(quantile_sorted(stats, 1.0 - alpha / 2.0), ci.point);
  return ci;
}

PairedTestResult paired_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(ErrorCode::LengthMismatch, "paired samples differ in length");
  if (a.size() < 2) throw Error(ErrorCode::SampleTooSmall, "paired test needs at least 2 pairs");
  std::vector<double> diff(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) diff[i] = a[i] - b[i];

  const SampleSummary s = summarize(diff);
  PairedTestResult r;
  r.mean_diff = s.mean;
  r.df = static_cast<double>(s.n - 1);
  if (s.variance == 0.0) {
    const double scale = std::max(*std::max_element(diff.begin(), diff.end()),
                                  -*std::min_element(diff.begin(), diff.end()));
    const bool zero_mean = std::fabs(s.mean) <= kConstantRelTol * scale || s.mean == 0.0;
    r.t = zero_mean ? 0.0
                    : (s.mean > 0.0 ? std::numeric_limits<double>::infinity()
                                    : -std::numeric_limits<double>::infinity());
    r.p_two_sided = zero_mean ? 1.0 : 0.0;
    return r;
  }
  r.t = s.mean / std::sqrt(s.variance / static_cast<double>(s.n));
  r.p_two_sided = student_t_two_sided_p(r.t, r.df);
  return r;
}

}  // namespace fisco::stats
