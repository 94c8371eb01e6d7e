#include "vterr/stats.hpp"

#include <algorithm>
#include <boost/math/distributions/binomial.hpp>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <cctype>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

namespace vterr::stats {

namespace bm = boost::math;

std::string_view to_string(SummaryKind k) {
  return k == SummaryKind::MedianIqr ? "MEDIAN_IQR" : "MEAN_CI95";
}

std::string_view to_string(TestKind k) {
  switch (k) {
  case TestKind::Wilcoxon:
    return "WILCOXON";
  case TestKind::PairedT:
    return "PAIRED_T";
  case TestKind::McNemar:
    return "MCNEMAR";
  case TestKind::Chi2:
    return "CHI2";
  }
  return "?";
}

namespace {
std::string upper(std::string_view s) {
  std::string out;
  for (char c : s)
    out.push_back(c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  return out;
}
} // namespace

SummaryKind parse_summary_kind(std::string_view s) {
  const auto u = upper(s);
  if (u == "MEDIAN_IQR")
    return SummaryKind::MedianIqr;
  if (u == "MEAN_CI95")
    return SummaryKind::MeanCi95;
  throw StatsError("unknown summary kind '" + std::string(s) + "'");
}

TestKind parse_test_kind(std::string_view s) {
  const auto u = upper(s);
  if (u == "WILCOXON")
    return TestKind::Wilcoxon;
  if (u == "PAIRED_T" || u == "T")
    return TestKind::PairedT;
  if (u == "MCNEMAR")
    return TestKind::McNemar;
  if (u == "CHI2")
    return TestKind::Chi2;
  throw StatsError("unknown test '" + std::string(s) + "'");
}

double quantile(std::span<const double> xs, double q) {
  if (xs.empty())
    throw StatsError("quantile of empty sample");
  std::vector<double> v(xs.begin(), xs.end());
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return v[lo] + frac * (v[hi] - v[lo]);
}

SummaryStat median_iqr(std::span<const double> xs) {
  if (xs.empty())
    throw StatsError("median_iqr: empty sample");
  return {SummaryKind::MedianIqr, quantile(xs, 0.5), quantile(xs, 0.25),
          quantile(xs, 0.75)};
}

SummaryStat mean_ci95(std::span<const double> xs) {
  if (xs.size() < 2)
    throw StatsError("mean_ci95: need n >= 2");
  const double n = static_cast<double>(xs.size());
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : xs)
    ss += (x - mean) * (x - mean);
  const double half = 1.96 * std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  return {SummaryKind::MeanCi95, mean, mean - half, mean + half};
}

SummaryStat summarize(std::span<const double> xs, SummaryKind kind) {
  return kind == SummaryKind::MedianIqr ? median_iqr(xs) : mean_ci95(xs);
}

namespace {

struct SignedRanks {
  // Ranks doubled so tied averages stay integral.
  std::vector<long> doubled_ranks;
  std::vector<bool> positive;
  std::vector<long> tie_sizes;
};

SignedRanks rank_differences(std::span<const double> d) {
  std::vector<double> nz;
  for (double v : d)
    if (v != 0.0)
      nz.push_back(v);
  SignedRanks r;
  const std::size_t n = nz.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::fabs(nz[a]) < std::fabs(nz[b]);
  });
  r.doubled_ranks.assign(n, 0);
  r.positive.assign(n, false);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && std::fabs(nz[order[j + 1]]) == std::fabs(nz[order[i]]))
      ++j;
    // 1-based positions i+1 .. j+1 share the average rank (i+j+2)/2.
    const long doubled = static_cast<long>(i + j + 2);
    for (std::size_t k = i; k <= j; ++k)
      r.doubled_ranks[order[k]] = doubled;
    r.tie_sizes.push_back(static_cast<long>(j - i + 1));
    i = j + 1;
  }
  for (std::size_t k = 0; k < n; ++k)
    r.positive[k] = nz[k] > 0;
  return r;
}

std::vector<double> differences(std::span<const double> xs,
                                 std::span<const double> ys, const char *what) {
  if (xs.size() != ys.size())
    throw StatsError(std::string(what) + ": paired samples differ in length");
  std::vector<double> d(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i)
    d[i] = xs[i] - ys[i];
  return d;
}

} // namespace

double wilcoxon_exact_p(std::span<const double> diffs) {
  const SignedRanks r = rank_differences(diffs);
  const std::size_t n = r.doubled_ranks.size();
  if (n == 0)
    throw StatsError("wilcoxon: all differences are zero");
  const long total = std::accumulate(r.doubled_ranks.begin(), r.doubled_ranks.end(), 0L);
  long observed = 0;
  for (std::size_t k = 0; k < n; ++k)
    if (r.positive[k])
      observed += r.doubled_ranks[k];

  // Null distribution of the doubled positive-rank sum: every sign pattern is
  // equally likely.
  std::vector<double> ways(static_cast<std::size_t>(total) + 1, 0.0);
  ways[0] = 1.0;
  long reach = 0;
  for (long rank : r.doubled_ranks) {
    for (long s = reach; s >= 0; --s)
      if (ways[static_cast<std::size_t>(s)] != 0.0)
        ways[static_cast<std::size_t>(s + rank)] += ways[static_cast<std::size_t>(s)];
    reach += rank;
  }
  const long obs_dev = std::labs(2 * observed - total);
  double hit = 0.0;
  for (long s = 0; s <= total; ++s)
    if (std::labs(2 * s - total) >= obs_dev)
      hit += ways[static_cast<std::size_t>(s)];
  return std::min(1.0, hit / std::ldexp(1.0, static_cast<int>(n)));
}

double wilcoxon_normal_p(std::span<const double> diffs) {
  const SignedRanks r = rank_differences(diffs);
  const double n = static_cast<double>(r.doubled_ranks.size());
  if (n == 0)
    throw StatsError("wilcoxon: all differences are zero");
  double w_plus = 0.0;
  for (std::size_t k = 0; k < r.doubled_ranks.size(); ++k)
    if (r.positive[k])
      w_plus += 0.5 * static_cast<double>(r.doubled_ranks[k]);
  const double mean = n * (n + 1.0) / 4.0;
  double tie_term = 0.0;
  for (long t : r.tie_sizes)
    tie_term += static_cast<double>(t * t * t - t);
  const double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
  if (var <= 0.0)
    return 1.0;
  const double dev = std::max(0.0, std::fabs(w_plus - mean) - 0.5);
  const double z = dev / std::sqrt(var);
  return std::min(1.0, 2.0 * bm::cdf(bm::complement(bm::normal_distribution<>(), z)));
}

TestResult wilcoxon_signed_rank(std::span<const double> xs,
                                std::span<const double> ys) {
  const std::vector<double> d = differences(xs, ys, "wilcoxon");
  const SignedRanks r = rank_differences(d);
  const int n = static_cast<int>(r.doubled_ranks.size());
  if (n == 0)
    throw StatsError("wilcoxon: all differences are zero");
  double w_plus = 0.0, w_total = 0.0;
  for (std::size_t k = 0; k < r.doubled_ranks.size(); ++k) {
    const double rank = 0.5 * static_cast<double>(r.doubled_ranks[k]);
    w_total += rank;
    if (r.positive[k])
      w_plus += rank;
  }
  TestResult res;
  res.test = TestKind::Wilcoxon;
  res.n = n;
  res.statistic = std::min(w_plus, w_total - w_plus);
  res.exact = n <= kWilcoxonExactMaxN;
  res.p_value = res.exact ? wilcoxon_exact_p(d) : wilcoxon_normal_p(d);
  return res;
}

TestResult paired_t(std::span<const double> xs, std::span<const double> ys) {
  const std::vector<double> d = differences(xs, ys, "paired_t");
  if (d.size() < 2)
    throw StatsError("paired_t: need n >= 2");
  const double n = static_cast<double>(d.size());
  const double mean = std::accumulate(d.begin(), d.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : d)
    ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  if (!(sd > 0.0))
    throw StatsError("paired_t: differences have zero variance");
  TestResult res;
  res.test = TestKind::PairedT;
  res.n = static_cast<int>(d.size());
  res.statistic = mean / (sd / std::sqrt(n));
  const bm::students_t_distribution<> dist(n - 1.0);
  res.p_value = std::min(1.0, 2.0 * bm::cdf(bm::complement(dist, std::fabs(res.statistic))));
  return res;
}

double chi2_sf(double x, double df) {
  if (x <= 0.0)
    return 1.0;
  return bm::cdf(bm::complement(bm::chi_squared_distribution<>(df), x));
}

double binomial_two_sided_half(int k, int n) {
  if (n <= 0)
    throw StatsError("binomial test needs n >= 1");
  const int tail = std::min(k, n - k);
  const bm::binomial_distribution<> dist(n, 0.5);
  return std::min(1.0, 2.0 * bm::cdf(dist, tail));
}

TestResult mcnemar(int b, int c) {
  if (b < 0 || c < 0)
    throw StatsError("mcnemar: negative count");
  if (b + c == 0)
    throw StatsError("mcnemar: no discordant pairs");
  TestResult res;
  res.test = TestKind::McNemar;
  res.n = b + c;
  const double diff = std::fabs(double(b - c)) - 1.0;
  res.statistic = std::max(0.0, diff) * std::max(0.0, diff) / double(b + c);
  if (b + c < kMcNemarExactBelow) {
    res.exact = true;
    res.p_value = binomial_two_sided_half(b, b + c);
  } else {
    res.p_value = chi2_sf(res.statistic, 1.0);
  }
  return res;
}

TestResult chi2_proportions(int successes_a, int n_a, int successes_b, int n_b) {
  if (n_a < 1 || n_b < 1)
    throw StatsError("chi2_proportions: group sizes must be >= 1");
  if (successes_a < 0 || successes_a > n_a || successes_b < 0 || successes_b > n_b)
    throw StatsError("chi2_proportions: successes outside [0, n]");
  const double a = successes_a, b = n_a - successes_a;
  const double c = successes_b, d = n_b - successes_b;
  const double n = a + b + c + d;
  const double row1 = a + b, row2 = c + d, col1 = a + c, col2 = b + d;
  if (col1 == 0.0 || col2 == 0.0)
    throw StatsError("chi2_proportions: zero margin in 2x2 table");
  TestResult res;
  res.test = TestKind::Chi2;
  res.n = static_cast<int>(n);
  const double num = (a * d - b * c);
  res.statistic = n * num * num / (row1 * row2 * col1 * col2);
  res.p_value = chi2_sf(res.statistic, 1.0);
  return res;
}

std::string_view significance_stars(double p) {
  if (p <= 0.001)
    return "***";
  if (p <= 0.01)
    return "**";
  if (p <= 0.05)
    return "*";
  return "";
}

} // namespace vterr::stats
