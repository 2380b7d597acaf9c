#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "gibbslab/exact_sum.hpp"

namespace gibbslab {

inline constexpr std::size_t kDefaultBatches = 32;

/// Monte Carlo mean with a batch-means standard error.
///
/// Sums are held exactly, so merge() reproduces the mean of the pooled stream
/// bit-for-bit regardless of grouping. The standard error of a merged
/// estimate is computed from the union of the batch means.
struct Estimate {
  double mean = 0.0;
  double std_error = 0.0;
  /// Sample variance divided by the squared standard error, capped at n.
  double ess = 0.0;
  std::size_t n = 0;
  std::vector<double> batch_means;
  std::vector<std::size_t> batch_sizes;
  ExactSum sum;
  ExactSum sum_sq;

  /// Recomputes mean, std_error and ess from the sums and batches.
  void finalize();
};

/// Merge is associative and commutative on the sums; the batch list is the
/// concatenation in argument order.
[[nodiscard]] Estimate merge(const Estimate& a, const Estimate& b);
[[nodiscard]] Estimate merge(std::span<const Estimate> parts);

/// Estimate of mean(num) / mean(den) from two estimates over the same samples
/// and batches; std_error by the delta method on the batch means.
[[nodiscard]] Estimate ratio(const Estimate& num, const Estimate& den);

/// Difference of estimates from independent streams: standard errors add in
/// quadrature.
[[nodiscard]] Estimate difference_independent(const Estimate& a, const Estimate& b);

/// Streaming batch-means accumulator. `expected` samples are split into
/// `batches` consecutive groups; any remainder joins the last group.
class BatchMeansAccumulator {
public:
  explicit BatchMeansAccumulator(std::size_t expected, std::size_t batches = kDefaultBatches);

  void add(double x);
  [[nodiscard]] std::size_t count() const { return count_; }
  [[nodiscard]] Estimate finish() const;

private:
  std::size_t batch_size_ = 1;
  std::size_t batches_ = 1;
  std::size_t count_ = 0;
  std::vector<ExactSum> batch_sums_;
  std::vector<std::size_t> batch_counts_;
  ExactSum sum_;
  ExactSum sum_sq_;
};

/// Builds an Estimate from a finished series.
[[nodiscard]] Estimate estimate_of(std::span<const double> xs, std::size_t batches = kDefaultBatches);

} // namespace gibbslab
