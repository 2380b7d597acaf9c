#include "gibbslab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/poisson.hpp>

namespace gibbslab::stats {

double normal_quantile(double p) {
  return boost::math::quantile(boost::math::normal_distribution<>(), p);
}

double normal_two_sided_p(double z) {
  return 2.0 * boost::math::cdf(boost::math::complement(boost::math::normal_distribution<>(), std::abs(z)));
}

double chi_square_sf(double x, double k) {
  if (x <= 0.0) return 1.0;
  return boost::math::cdf(boost::math::complement(boost::math::chi_squared_distribution<>(k), x));
}

double p_to_abs_z(double p) {
  if (p >= 1.0) return 0.0;
  if (p <= 0.0) return std::numeric_limits<double>::infinity();
  return boost::math::quantile(boost::math::complement(boost::math::normal_distribution<>(), p / 2.0));
}

double poisson_pmf(std::size_t n, double mean) {
  if (mean == 0.0) return n == 0 ? 1.0 : 0.0;
  return boost::math::pdf(boost::math::poisson_distribution<>(mean), static_cast<double>(n));
}

ChiSquareResult chi_square_gof(std::span<const std::size_t> observed, std::span<const double> probs,
                               double min_expected) {
  if (observed.size() != probs.size() || observed.empty())
    throw std::invalid_argument("chi-square: observed and probability vectors differ in size");
  const double total = static_cast<double>(std::accumulate(observed.begin(), observed.end(), std::size_t{0}));
  if (total == 0.0) throw std::invalid_argument("chi-square: no observations");

  std::vector<double> p(probs.begin(), probs.end());
  const double covered = std::accumulate(p.begin(), p.end(), 0.0);
  p.back() += std::max(0.0, 1.0 - covered);

  std::vector<double> exp_bins, obs_bins;
  double e = 0.0, o = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    e += p[i] * total;
    o += static_cast<double>(observed[i]);
    if (e >= min_expected) {
      exp_bins.push_back(e);
      obs_bins.push_back(o);
      e = o = 0.0;
    }
  }
  if (e > 0.0 || o > 0.0) {
    if (exp_bins.empty()) {
      exp_bins.push_back(e);
      obs_bins.push_back(o);
    } else {
      exp_bins.back() += e;
      obs_bins.back() += o;
    }
  }

  ChiSquareResult r;
  r.bins = exp_bins.size();
  for (std::size_t i = 0; i < exp_bins.size(); ++i) {
    const double d = obs_bins[i] - exp_bins[i];
    r.statistic += d * d / exp_bins[i];
  }
  r.dof = r.bins > 1 ? r.bins - 1 : 0;
  r.p_value = r.dof > 0 ? chi_square_sf(r.statistic, static_cast<double>(r.dof)) : 1.0;
  return r;
}

ChiSquareResult aggregate_z(std::span<const double> z) {
  ChiSquareResult r;
  for (double x : z) r.statistic += x * x;
  r.dof = z.size();
  r.bins = z.size();
  r.p_value = r.dof > 0 ? chi_square_sf(r.statistic, static_cast<double>(r.dof)) : 1.0;
  return r;
}

double trimmed_mean(std::vector<double> xs, double fraction) {
  if (xs.empty()) return 0.0;
  std::sort(xs.begin(), xs.end());
  const auto cut = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(xs.size())));
  if (2 * cut >= xs.size()) return xs[xs.size() / 2];
  double s = 0.0;
  for (std::size_t i = cut; i < xs.size() - cut; ++i) s += xs[i];
  return s / static_cast<double>(xs.size() - 2 * cut);
}

double autocorrelation_time(std::span<const double> xs) {
  const std::size_t n = xs.size();
  if (n < 4) return 1.0;
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(n);
  auto autocov = [&](std::size_t lag) {
    double s = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) s += (xs[i] - mean) * (xs[i + lag] - mean);
    return s / static_cast<double>(n);
  };
  const double c0 = autocov(0);
  if (c0 <= 0.0) return 1.0;
  // tau = -1 + 2 sum_m Gamma_m, Gamma_m = rho_{2m} + rho_{2m+1}, stopped at
  // the first non-positive pair.
  double tau = -1.0;
  const std::size_t max_lag = std::min<std::size_t>(n, 8192);
  for (std::size_t m = 0; 2 * m + 1 < max_lag; ++m) {
    const double g = (autocov(2 * m) + autocov(2 * m + 1)) / c0;
    if (g <= 0.0) break;
    tau += 2.0 * g;
  }
  return std::max(tau, 1e-12);
}

} // namespace gibbslab::stats
