#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "vterr/stats.hpp"

using namespace vterr;
using namespace vterr::stats;

TEST(Summary, MedianIqr) {
  const std::vector<double> xs{1, 2, 3, 4, 5};
  const auto s = median_iqr(xs);
  EXPECT_DOUBLE_EQ(s.center, 3);
  EXPECT_DOUBLE_EQ(s.low, 2);
  EXPECT_DOUBLE_EQ(s.high, 4);
  const auto one = median_iqr(std::vector<double>{7.5});
  EXPECT_EQ(one.low, 7.5);
  EXPECT_EQ(one.high, 7.5);
  const auto flat = median_iqr(std::vector<double>(9, 2.0));
  EXPECT_EQ(flat.high - flat.low, 0.0);
  EXPECT_THROW(median_iqr(std::vector<double>{}), StatsError);
}

TEST(Summary, MeanCi95) {
  const auto s = mean_ci95(std::vector<double>{0, 2});
  EXPECT_DOUBLE_EQ(s.center, 1);
  EXPECT_NEAR(s.high - s.center, 1.96, 1e-12);
  EXPECT_EQ(mean_ci95(std::vector<double>(5, 3.0)).low, 3.0);
  EXPECT_THROW(mean_ci95(std::vector<double>{1}), StatsError);
}

TEST(Summary, MeanCi95Coverage) {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> nd(10.0, 2.0);
  int covered = 0;
  for (int r = 0; r < 1000; ++r) {
    std::vector<double> xs(200);
    for (auto &x : xs)
      x = nd(rng);
    const auto s = mean_ci95(xs);
    covered += s.low <= 10.0 && 10.0 <= s.high;
  }
  EXPECT_GE(covered, 925);
  EXPECT_LE(covered, 975);
}

TEST(Wilcoxon, ExactMatchesEnumeration) {
  std::mt19937_64 rng(22);
  std::uniform_int_distribution<int> small(-6, 6);
  for (int n = 1; n <= 12; ++n)
    for (int rep = 0; rep < 8; ++rep) {
      std::vector<double> xs(n), ys(n), d(n);
      for (int i = 0; i < n; ++i) {
        xs[i] = small(rng);
        ys[i] = small(rng) * (rep % 2 ? 1.0 : 0.5);
        d[i] = xs[i] - ys[i];
      }
      bool any = false;
      for (double v : d)
        any |= v != 0.0;
      if (!any)
        continue;
      const auto r = wilcoxon_signed_rank(xs, ys);
      EXPECT_TRUE(r.exact);
      EXPECT_NEAR(r.p_value, oracle::wilcoxon_enumeration(d), 1e-12) << "n=" << n;
      EXPECT_EQ(wilcoxon_signed_rank(ys, xs).p_value, r.p_value);
    }
}

TEST(Wilcoxon, AllZeroDifferencesRejected) {
  const std::vector<double> xs{1, 2, 3};
  EXPECT_THROW(wilcoxon_signed_rank(xs, xs), StatsError);
}

TEST(Wilcoxon, ApproximationCloseAtSwitchSize) {
  std::mt19937_64 rng(23);
  std::normal_distribution<double> nd(0.3, 1.0);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> d(kWilcoxonExactMaxN);
    for (auto &v : d)
      v = nd(rng);
    EXPECT_NEAR(wilcoxon_exact_p(d), wilcoxon_normal_p(d), 0.02);
  }
}

TEST(PairedT, Fixtures) {
  const auto zero = paired_t(std::vector<double>{1, -1}, std::vector<double>{0, 0});
  EXPECT_EQ(zero.statistic, 0.0);
  EXPECT_NEAR(zero.p_value, 1.0, 1e-12);

  const std::vector<double> a{12.1, 14.3, 11.8, 15.2, 13.9, 12.7, 14.8, 13.1};
  const std::vector<double> b{11.4, 13.2, 12.0, 13.9, 12.8, 12.9, 13.5, 12.2};
  const auto r = paired_t(a, b);
  EXPECT_NEAR(r.p_value, oracle::t_quadrature(r.statistic, 7), 1e-7);

  std::vector<double> a3(a), b3(b);
  for (auto &v : a3)
    v *= 3.5;
  for (auto &v : b3)
    v *= 3.5;
  const auto s = paired_t(a3, b3);
  EXPECT_NEAR(s.statistic, r.statistic, 1e-9);
  EXPECT_NEAR(s.p_value, r.p_value, 1e-12);
  EXPECT_THROW(paired_t(std::vector<double>{1, 2}, std::vector<double>{0, 1}), StatsError);
}

TEST(McNemar, Fixtures) {
  const auto r = mcnemar(15, 5);
  EXPECT_NEAR(r.statistic, 4.05, 1e-12);
  EXPECT_TRUE(r.exact);
  EXPECT_NEAR(r.p_value, oracle::binomial_two_sided(15, 20), 1e-12);
  EXPECT_NEAR(mcnemar(4, 4).p_value, 1.0, 1e-12);
  try {
    (void)mcnemar(0, 0);
    FAIL();
  } catch (const StatsError &e) {
    EXPECT_NE(std::string(e.what()).find("no discordant pairs"), std::string::npos);
  }
  const auto big = mcnemar(40, 20);
  EXPECT_FALSE(big.exact);
  EXPECT_NEAR(big.statistic, 19.0 * 19.0 / 60.0, 1e-12);
  EXPECT_NEAR(big.p_value, oracle::binomial_two_sided(40, 60), 0.01);
}

TEST(Chi2, Fixtures) {
  const auto eq = chi2_proportions(30, 60, 15, 30);
  EXPECT_NEAR(eq.statistic, 0.0, 1e-12);
  EXPECT_NEAR(eq.p_value, 1.0, 1e-12);
  const auto r = chi2_proportions(90, 100, 60, 100);
  // Pearson: N (ad - bc)^2 / (r1 r2 c1 c2)
  const double want = 200.0 * std::pow(90.0 * 40 - 10.0 * 60, 2) / (100.0 * 100 * 150 * 50);
  EXPECT_NEAR(r.statistic, want, 1e-9);
  EXPECT_NEAR(chi2_proportions(60, 100, 90, 100).statistic, r.statistic, 1e-12);
  EXPECT_THROW(chi2_proportions(0, 10, 0, 10), StatsError);
}

TEST(Stats, PValuesInRange) {
  std::mt19937_64 rng(24);
  std::normal_distribution<double> nd;
  for (int rep = 0; rep < 50; ++rep) {
    const int n = 3 + rep % 30;
    std::vector<double> a(n), b(n);
    for (int i = 0; i < n; ++i) {
      a[i] = nd(rng);
      b[i] = nd(rng);
    }
    for (const auto &r : {wilcoxon_signed_rank(a, b), paired_t(a, b)}) {
      EXPECT_GE(r.p_value, 0.0);
      EXPECT_LE(r.p_value, 1.0);
    }
  }
}

TEST(Stats, Stars) {
  EXPECT_EQ(significance_stars(0.001), "***");
  EXPECT_EQ(significance_stars(0.005), "**");
  EXPECT_EQ(significance_stars(0.04), "*");
  EXPECT_EQ(significance_stars(0.2), "");
}
