#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace gibbslab::stats {

/// Phi^{-1}(p) for the standard normal.
[[nodiscard]] double normal_quantile(double p);
/// P(|Z| >= |z|).
[[nodiscard]] double normal_two_sided_p(double z);
/// P(X >= x) for X ~ chi^2_k.
[[nodiscard]] double chi_square_sf(double x, double k);
/// |z| with the same two-sided tail probability as p.
[[nodiscard]] double p_to_abs_z(double p);

[[nodiscard]] double poisson_pmf(std::size_t n, double mean);

struct ChiSquareResult {
  double statistic = 0.0;
  std::size_t dof = 0;
  double p_value = 1.0;
  std::size_t bins = 0;
};

/// Pearson goodness-of-fit of observed counts against expected
/// probabilities. Adjacent bins are pooled left to right until each holds an
/// expected count of at least `min_expected`; the remainder of probability
/// mass not covered by `probs` is added to the last bin.
[[nodiscard]] ChiSquareResult chi_square_gof(std::span<const std::size_t> observed, std::span<const double> probs,
                                             double min_expected = 5.0);

/// Aggregate of independent z-scores: sum z^2 against chi^2 with one degree
/// of freedom per score.
[[nodiscard]] ChiSquareResult aggregate_z(std::span<const double> z);

/// Mean after discarding the lowest and highest `fraction` of the sorted
/// values.
[[nodiscard]] double trimmed_mean(std::vector<double> xs, double fraction);

/// Integrated autocorrelation time by Geyer's initial positive sequence.
[[nodiscard]] double autocorrelation_time(std::span<const double> xs);

} // namespace gibbslab::stats
