#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "gibbslab/cylinder.hpp"
#include "gibbslab/sampler.hpp"

namespace gibbslab {

struct TruncationSpec {
  std::size_t n_max = 10;
  std::size_t nodes_per_axis = 64;
};

/// Quadrature engine controls. An order-n integral over the n-fold torus
/// uses the exact tensor midpoint grid when nodes_per_axis^(d n) fits
/// `tensor_budget`, and a rank-1 Kronecker lattice of `lattice_points`
/// points otherwise.
struct OracleOptions {
  std::uint64_t tensor_budget = std::uint64_t{1} << 25;
  std::uint64_t lattice_points = std::uint64_t{1} << 21;
  /// Guard on the total number of integrand evaluations.
  std::uint64_t max_evaluations = 1000000000;
  /// Also run the coarse rule (half nodes, or the first half of the
  /// lattice) and report the difference.
  bool estimate_error = true;
  std::size_t workers = 1;
};

class BudgetExceeded : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct OrderTerm {
  std::size_t n = 0;
  std::string method;
  std::uint64_t points = 0;
  /// z^n / n! * integral over the n-fold torus.
  double term = 0.0;
  /// |term - coarse term|.
  double delta = 0.0;
};

struct PartitionResult {
  double Z = 1.0;
  /// Bound on the omitted orders n > n_max.
  double tail_bound = 0.0;
  double quadrature_delta = 0.0;
  std::vector<OrderTerm> terms;
  std::uint64_t evaluations = 0;
};

struct ExpectationResult {
  std::vector<double> values;
  /// 2 * max|F| over visited nodes * tail / Z per observable.
  std::vector<double> tail_bounds;
  /// Change of each value between the coarse and the fine rule.
  std::vector<double> quadrature_deltas;
  PartitionResult partition;
};

struct XiResult {
  double value = 1.0;
  double tail_bound = 0.0;
  double quadrature_delta = 0.0;
  PartitionResult with_psi;
  PartitionResult without_psi;
};

/// sum_{n > n_max} x^n / n!, summed directly.
[[nodiscard]] double poisson_tail(double x, std::size_t n_max);

/// x = z V e^{beta b} sup e^{-beta psi}; +inf without a stability claim.
[[nodiscard]] double tail_parameter(const ModelSpec& model);

[[nodiscard]] PartitionResult partition_function(const ModelSpec& model, const TruncationSpec& trunc,
                                                 const OracleOptions& options = {});

[[nodiscard]] ExpectationResult exact_expectation(const ModelSpec& model, const std::vector<Observable>& observables,
                                                  const TruncationSpec& trunc, const OracleOptions& options = {});

/// Xi_psi = Z(z sigma_{beta psi}) / Z(z m).
[[nodiscard]] XiResult xi_psi_exact(const ModelSpec& with_psi, const ModelSpec& without_psi,
                                    const TruncationSpec& trunc, const OracleOptions& options = {});

/// Axis-aligned sub-box [lower, lower + extent) of the fundamental cell.
struct Window {
  Vec lower{};
  Vec extent{};

  [[nodiscard]] bool contains(const TorusDomain& domain, const Point& p) const;
  [[nodiscard]] double volume(const TorusDomain& domain) const;
  void validate(const TorusDomain& domain) const;
};

/// Exact conditional expectation of a cylinder function given the
/// configuration outside a window: the truncated series over eta in the
/// window with the cross energy against the outside points.
class WindowIntegrator {
public:
  struct Options {
    /// Orders with nodes^(d n) up to this size use the tensor rule.
    std::uint64_t tensor_budget = std::uint64_t{1} << 17;
    std::uint64_t lattice_points = std::uint64_t{1} << 10;
  };

  struct Result {
    double value = 0.0;
    /// Conditional partition function (>= 1).
    double Z = 1.0;
    /// 2 sup|g| * omitted-order bound / Z.
    double tail_bound = 0.0;
  };

  WindowIntegrator(const ModelSpec& model, const CylinderFunction& F, const Window& window, const TruncationSpec& trunc,
                   const Options& options);
  WindowIntegrator(const ModelSpec& model, const CylinderFunction& F, const Window& window, const TruncationSpec& trunc)
      : WindowIntegrator(model, F, window, trunc, Options{}) {}

  /// `outer` must have no point in the window.
  [[nodiscard]] Result integrate(const Configuration& outer) const;

  [[nodiscard]] const Window& window() const { return window_; }

private:
  /// One order of the series: a node table and the quadrature tuples over
  /// it. Each tuple lists n node ids; its weight holds the psi factors and
  /// the pair factors inside the window, and f_sum the summed inner field.
  struct Order {
    std::size_t n = 0;
    std::string method;
    std::vector<Point> nodes;
    std::vector<std::uint32_t> ids;
    std::vector<double> weight;
    std::vector<double> f_sum;
    std::uint64_t points = 0;
  };

  ModelSpec model_;
  CylinderFunction F_;
  Window window_;
  TruncationSpec trunc_;
  double volume_ = 0.0;
  double phi_min_ = 0.0;
  double g_bound_ = 0.0;
  std::vector<Order> orders_;
};

} // namespace gibbslab
