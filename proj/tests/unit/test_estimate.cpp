#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "gibbslab/estimate.hpp"
#include "gibbslab/exact_sum.hpp"
#include "gibbslab/random.hpp"
#include "gibbslab/stats.hpp"

using namespace gibbslab;

TEST(ExactSum, CancellationIsExact) {
  ExactSum s;
  for (double x : {1e100, 1.0, -1e100, 1e-100, 3.0}) s += x;
  EXPECT_EQ(s.value(), 4.0);
}

TEST(ExactSum, MergeEqualsConcatenation) {
  Rng rng(1);
  std::vector<double> xs(10000);
  for (auto& x : xs) x = rng.normal() * std::pow(10.0, rng.uniform(-8, 8));
  ExactSum all, a, b;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    all += xs[i];
    (i % 3 == 0 ? a : b) += xs[i];
  }
  a += b;
  EXPECT_EQ(a.value(), all.value());
}

TEST(Estimate, ConstantSeries) {
  const std::vector<double> xs(1000, 2.5);
  const auto e = estimate_of(xs);
  EXPECT_EQ(e.mean, 2.5);
  EXPECT_EQ(e.std_error, 0.0);
  EXPECT_EQ(e.n, 1000u);
  EXPECT_EQ(e.batch_means.size(), kDefaultBatches);
}

TEST(Estimate, IidStandardError) {
  Rng rng(2);
  std::vector<double> xs(64000);
  for (auto& x : xs) x = rng.normal();
  const auto e = estimate_of(xs);
  EXPECT_NEAR(e.std_error, 1.0 / std::sqrt(64000.0), 0.3 / std::sqrt(64000.0));
  EXPECT_LE(e.ess, static_cast<double>(e.n));
  EXPECT_GE(e.std_error, 0.0);
}

TEST(Estimate, RemainderJoinsLastBatch) {
  std::vector<double> xs(100);
  std::iota(xs.begin(), xs.end(), 0.0);
  const auto e = estimate_of(xs, 8);
  ASSERT_EQ(e.batch_sizes.size(), 8u);
  EXPECT_EQ(e.batch_sizes.front(), 12u);
  EXPECT_EQ(e.batch_sizes.back(), 16u);
  EXPECT_DOUBLE_EQ(e.mean, 49.5);
}

TEST(Estimate, MergeOfEightSeedsMatchesPooledStream) {
  std::vector<Estimate> parts;
  std::vector<double> pooled;
  for (std::uint64_t s = 0; s < 8; ++s) {
    Rng rng(derive_seed(7, s));
    std::vector<double> xs(3200);
    for (auto& x : xs) x = rng.normal() + 0.5;
    pooled.insert(pooled.end(), xs.begin(), xs.end());
    parts.push_back(estimate_of(xs));
  }
  const auto merged = merge(parts);
  ExactSum exact;
  for (double x : pooled) exact += x;
  EXPECT_EQ(merged.mean, exact.value() / static_cast<double>(pooled.size()));
  EXPECT_EQ(merged.n, pooled.size());
  const auto single = estimate_of(pooled, 8 * kDefaultBatches);
  EXPECT_EQ(merged.mean, single.mean);
  EXPECT_NEAR(merged.std_error, single.std_error, 1e-12);
}

TEST(Estimate, MergeAssociativeAndCommutativeInMean) {
  Rng rng(3);
  std::vector<Estimate> e;
  for (int i = 0; i < 3; ++i) {
    std::vector<double> xs(500 + 100 * i);
    for (auto& x : xs) x = rng.uniform() * 1e6 + rng.normal();
    e.push_back(estimate_of(xs));
  }
  const auto l = merge(merge(e[0], e[1]), e[2]);
  const auto r = merge(e[0], merge(e[1], e[2]));
  const auto c = merge(merge(e[2], e[0]), e[1]);
  EXPECT_EQ(l.mean, r.mean);
  EXPECT_EQ(l.mean, c.mean);
  EXPECT_EQ(l.std_error, r.std_error);
}

TEST(Estimate, BatchAccumulatorMatchesSeries) {
  Rng rng(4);
  std::vector<double> xs(777);
  for (auto& x : xs) x = rng.normal();
  BatchMeansAccumulator acc(xs.size());
  for (double x : xs) acc.add(x);
  const auto a = acc.finish(), b = estimate_of(xs);
  EXPECT_EQ(a.mean, b.mean);
  EXPECT_EQ(a.std_error, b.std_error);
}

TEST(Estimate, RatioDeltaMethod) {
  Rng rng(5);
  const std::size_t n = 32000;
  std::vector<double> num(n), den(n);
  for (std::size_t i = 0; i < n; ++i) {
    den[i] = 2.0 + 0.1 * rng.normal();
    num[i] = 3.0 * den[i] + 0.05 * rng.normal();
  }
  const auto r = ratio(estimate_of(num), estimate_of(den));
  EXPECT_NEAR(r.mean, 3.0, 5e-3);
  // Residual noise 0.05 / 2 per sample.
  EXPECT_NEAR(r.std_error, 0.025 / std::sqrt(static_cast<double>(n)), 0.4 * 0.025 / std::sqrt(static_cast<double>(n)));
  EXPECT_THROW((void)ratio(estimate_of(num, 16), estimate_of(den, 32)), std::invalid_argument);
}

TEST(Estimate, DifferenceIndependent) {
  Estimate a, b;
  a.mean = 1.0;
  a.std_error = 0.3;
  a.n = 10;
  b.mean = 0.5;
  b.std_error = 0.4;
  b.n = 20;
  const auto d = difference_independent(a, b);
  EXPECT_DOUBLE_EQ(d.mean, 0.5);
  EXPECT_DOUBLE_EQ(d.std_error, 0.5);
}

TEST(Stats, NormalAndChiSquare) {
  EXPECT_NEAR(stats::normal_quantile(0.975), 1.959963984540054, 1e-12);
  EXPECT_NEAR(stats::normal_two_sided_p(1.959963984540054), 0.05, 1e-12);
  EXPECT_NEAR(stats::p_to_abs_z(0.05), 1.959963984540054, 1e-10);
  EXPECT_NEAR(stats::chi_square_sf(3.841458820694124, 1), 0.05, 1e-12);
  EXPECT_NEAR(stats::chi_square_sf(18.307038053275146, 10), 0.05, 1e-12);
  EXPECT_NEAR(stats::poisson_pmf(3, 2.0), std::exp(-2.0) * 8.0 / 6.0, 1e-15);
}

TEST(Stats, ChiSquareGoodnessOfFit) {
  // Exact expected counts give a zero statistic.
  const std::vector<double> p{0.25, 0.25, 0.5};
  const std::vector<std::size_t> obs{250, 250, 500};
  const auto r = stats::chi_square_gof(obs, p);
  EXPECT_NEAR(r.statistic, 0.0, 1e-12);
  EXPECT_EQ(r.dof, 2u);
  EXPECT_NEAR(r.p_value, 1.0, 1e-12);
  // Sparse tail bins are pooled.
  const std::vector<double> q{0.5, 0.49, 0.005, 0.005};
  const std::vector<std::size_t> o{50, 49, 1, 0};
  EXPECT_EQ(stats::chi_square_gof(o, q).bins, 2u);
}

TEST(Stats, TrimmedMeanAndAggregate) {
  EXPECT_DOUBLE_EQ(stats::trimmed_mean({1, 2, 3, 4, 5, 6, 7, 8, 9, 1000}, 0.1), 5.5);
  const std::vector<double> z{0.0, 0.0};
  EXPECT_NEAR(stats::aggregate_z(z).p_value, 1.0, 1e-12);
}

TEST(Stats, AutocorrelationOfAr1) {
  Rng rng(6);
  const double rho = 0.8;
  std::vector<double> xs(200000);
  double x = 0.0;
  for (auto& v : xs) {
    x = rho * x + std::sqrt(1 - rho * rho) * rng.normal();
    v = x;
  }
  // tau = (1 + rho) / (1 - rho) = 9.
  EXPECT_NEAR(stats::autocorrelation_time(xs), 9.0, 1.0);
  std::vector<double> iid(100000);
  for (auto& v : iid) v = rng.normal();
  EXPECT_NEAR(stats::autocorrelation_time(iid), 1.0, 0.15);
}
