#pragma once

#include <cmath>
#include <span>
#include <vector>

namespace gibbslab {

/// Exactly rounded floating-point summation (Shewchuk's non-overlapping
/// partials). The represented sum is exact, so merging two accumulators gives
/// the same result as accumulating the concatenated stream.
class ExactSum {
public:
  void add(double x) {
    std::size_t i = 0;
    for (double y : partials_) {
      if (std::abs(x) < std::abs(y)) std::swap(x, y);
      const double hi = x + y;
      const double lo = y - (hi - x);
      if (lo != 0.0) partials_[i++] = lo;
      x = hi;
    }
    partials_.resize(i);
    partials_.push_back(x);
  }

  ExactSum& operator+=(double x) {
    add(x);
    return *this;
  }

  ExactSum& operator+=(const ExactSum& other) {
    for (double p : other.partials_) add(p);
    return *this;
  }

  /// The exact sum rounded to nearest.
  [[nodiscard]] double value() const {
    if (partials_.empty()) return 0.0;
    std::size_t n = partials_.size() - 1;
    double hi = partials_[n];
    double lo = 0.0;
    while (n > 0) {
      const double x = hi;
      const double y = partials_[--n];
      hi = x + y;
      const double yr = hi - x;
      lo = y - yr;
      if (lo != 0.0) break;
    }
    // Half-way correction so the result is correctly rounded.
    if (n > 0 && ((lo < 0.0 && partials_[n - 1] < 0.0) || (lo > 0.0 && partials_[n - 1] > 0.0))) {
      const double y = lo * 2.0;
      const double x = hi + y;
      if (y == x - hi) hi = x;
    }
    return hi;
  }

  [[nodiscard]] std::span<const double> partials() const { return partials_; }

private:
  std::vector<double> partials_;
};

} // namespace gibbslab
