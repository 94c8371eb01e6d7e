#pragma once
// Descriptive summaries and the paired/unpaired hypothesis tests used to
// compare segmentation methods.

#include <span>
#include <string_view>

#include "vterr/grid.hpp"

namespace vterr::stats {

class StatsError : public Error {
public:
  using Error::Error;
};

enum class SummaryKind { MedianIqr, MeanCi95 };
enum class TestKind { Wilcoxon, PairedT, McNemar, Chi2 };

std::string_view to_string(SummaryKind k);
std::string_view to_string(TestKind k);
SummaryKind parse_summary_kind(std::string_view s);
TestKind parse_test_kind(std::string_view s);

struct SummaryStat {
  SummaryKind kind = SummaryKind::MedianIqr;
  double center = 0.0;
  double low = 0.0;
  double high = 0.0;
};

struct TestResult {
  TestKind test = TestKind::Wilcoxon;
  double statistic = 0.0;
  double p_value = 1.0;
  int n = 0;
  /// True when p came from an exact (enumeration / binomial) computation.
  bool exact = false;
};

/// Percentile with linear interpolation between order statistics
/// (position (n-1)*q).
double quantile(std::span<const double> xs, double q);

SummaryStat median_iqr(std::span<const double> xs);
/// mean +- 1.96 * sd / sqrt(n), sd with n-1 denominator.
SummaryStat mean_ci95(std::span<const double> xs);
SummaryStat summarize(std::span<const double> xs, SummaryKind kind);

inline constexpr int kWilcoxonExactMaxN = 12;

/// Two-sided Wilcoxon signed-rank test. Zero differences are dropped and tied
/// |d| receive averaged ranks. The statistic is min(W+, W-). Exact null
/// distribution for n <= 12, otherwise the tie-corrected normal approximation
/// with a 0.5 continuity correction.
TestResult wilcoxon_signed_rank(std::span<const double> xs,
                                std::span<const double> ys);

/// The two branches on their own, for diagnostics and branch comparisons.
double wilcoxon_exact_p(std::span<const double> differences);
double wilcoxon_normal_p(std::span<const double> differences);

/// Two-sided paired Student t-test on xs - ys with n-1 degrees of freedom.
TestResult paired_t(std::span<const double> xs, std::span<const double> ys);

/// McNemar test on discordant counts. The statistic is always the
/// continuity-corrected chi-square (|b-c|-1)^2/(b+c); p is the exact two-sided
/// binomial when b + c < 25, else the chi-square(1) tail of the statistic.
TestResult mcnemar(int b, int c);
inline constexpr int kMcNemarExactBelow = 25;

/// Pearson chi-square on the 2x2 table of successes/failures in two groups,
/// no Yates correction.
TestResult chi2_proportions(int successes_a, int n_a, int successes_b, int n_b);

/// Upper tail of the chi-square distribution with `df` degrees of freedom.
double chi2_sf(double x, double df);
/// Two-sided exact binomial p for k successes out of n at p = 0.5.
double binomial_two_sided_half(int k, int n);

/// "***" for p <= 0.001, "**" for p <= 0.01, "*" for p <= 0.05.
std::string_view significance_stars(double p);

} // namespace vterr::stats
