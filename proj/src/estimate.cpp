#include "gibbslab/estimate.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gibbslab {

void Estimate::finalize() {
  if (n == 0) {
    mean = std_error = ess = 0.0;
    return;
  }
  const double dn = static_cast<double>(n);
  mean = sum.value() / dn;

  // Weighted batch-means variance: B/(B-1) * sum (s_j/n)^2 (m_j - mean)^2.
  const std::size_t nb = batch_means.size();
  if (nb >= 2) {
    double acc = 0.0;
    for (std::size_t j = 0; j < nb; ++j) {
      const double w = static_cast<double>(batch_sizes[j]) / dn;
      const double dev = batch_means[j] - mean;
      acc += w * w * dev * dev;
    }
    std_error = std::sqrt(acc * static_cast<double>(nb) / static_cast<double>(nb - 1));
  } else {
    std_error = 0.0;
  }

  double var = 0.0;
  if (n > 1) {
    ExactSum centered = sum_sq;
    centered += -(sum.value() * mean);
    var = std::max(0.0, centered.value() / (dn - 1.0));
  }
  if (std_error > 0.0) ess = std::min(dn, var / (std_error * std_error));
  else ess = dn;
}

Estimate merge(const Estimate& a, const Estimate& b) {
  Estimate out;
  out.n = a.n + b.n;
  out.sum = a.sum;
  out.sum += b.sum;
  out.sum_sq = a.sum_sq;
  out.sum_sq += b.sum_sq;
  out.batch_means = a.batch_means;
  out.batch_means.insert(out.batch_means.end(), b.batch_means.begin(), b.batch_means.end());
  out.batch_sizes = a.batch_sizes;
  out.batch_sizes.insert(out.batch_sizes.end(), b.batch_sizes.begin(), b.batch_sizes.end());
  out.finalize();
  return out;
}

Estimate merge(std::span<const Estimate> parts) {
  if (parts.empty()) return {};
  Estimate out = parts.front();
  for (std::size_t i = 1; i < parts.size(); ++i) out = merge(out, parts[i]);
  return out;
}

Estimate ratio(const Estimate& num, const Estimate& den) {
  if (num.n != den.n || num.batch_sizes != den.batch_sizes)
    throw std::invalid_argument("ratio estimate needs two estimates over the same batches");
  const double r = num.mean / den.mean;
  Estimate out;
  out.n = num.n;
  out.mean = r;
  out.batch_sizes = num.batch_sizes;
  out.batch_means.resize(num.batch_means.size());
  for (std::size_t j = 0; j < num.batch_means.size(); ++j)
    out.batch_means[j] = num.batch_means[j] / den.batch_means[j];
  // Delta method: residual batches u_j = num_j - r den_j, se = se(u) / mean(den).
  const double dn = static_cast<double>(num.n);
  const std::size_t nb = num.batch_means.size();
  if (nb >= 2) {
    double acc = 0.0;
    for (std::size_t j = 0; j < nb; ++j) {
      const double w = static_cast<double>(num.batch_sizes[j]) / dn;
      const double u = num.batch_means[j] - r * den.batch_means[j];
      acc += w * w * u * u;
    }
    out.std_error = std::sqrt(acc * static_cast<double>(nb) / static_cast<double>(nb - 1)) / std::abs(den.mean);
  }
  out.ess = std::min(num.ess, den.ess);
  return out;
}

Estimate difference_independent(const Estimate& a, const Estimate& b) {
  Estimate out;
  out.mean = a.mean - b.mean;
  out.std_error = std::hypot(a.std_error, b.std_error);
  out.n = std::min(a.n, b.n);
  out.ess = std::min(a.ess, b.ess);
  if (a.batch_means.size() == b.batch_means.size()) {
    out.batch_means.resize(a.batch_means.size());
    for (std::size_t j = 0; j < a.batch_means.size(); ++j) out.batch_means[j] = a.batch_means[j] - b.batch_means[j];
    out.batch_sizes = a.batch_sizes;
  }
  return out;
}

BatchMeansAccumulator::BatchMeansAccumulator(std::size_t expected, std::size_t batches) {
  if (batches == 0) throw std::invalid_argument("need at least one batch");
  batches_ = std::max<std::size_t>(1, std::min(batches, expected));
  batch_size_ = std::max<std::size_t>(1, expected / batches_);
  batch_sums_.resize(batches_);
  batch_counts_.assign(batches_, 0);
}

void BatchMeansAccumulator::add(double x) {
  const std::size_t j = std::min(count_ / batch_size_, batches_ - 1);
  batch_sums_[j] += x;
  ++batch_counts_[j];
  sum_ += x;
  sum_sq_ += x * x;
  ++count_;
}

Estimate BatchMeansAccumulator::finish() const {
  Estimate e;
  e.n = count_;
  e.sum = sum_;
  e.sum_sq = sum_sq_;
  for (std::size_t j = 0; j < batches_; ++j) {
    if (batch_counts_[j] == 0) continue;
    e.batch_means.push_back(batch_sums_[j].value() / static_cast<double>(batch_counts_[j]));
    e.batch_sizes.push_back(batch_counts_[j]);
  }
  e.finalize();
  return e;
}

Estimate estimate_of(std::span<const double> xs, std::size_t batches) {
  BatchMeansAccumulator acc(xs.size(), batches);
  for (double x : xs) acc.add(x);
  return acc.finish();
}

} // namespace gibbslab
