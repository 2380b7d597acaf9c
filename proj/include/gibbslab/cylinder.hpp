#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gibbslab/config_space.hpp"

namespace gibbslab {

/// Smooth outer map g: R^k -> R built from affine maps, tanh and exp links,
/// and products, with closed-form partial derivatives.
class OuterMap {
public:
  enum class Kind { affine, tanh, exp, product };

  static OuterMap affine(std::vector<double> weights, double bias = 0.0);
  /// tanh(inner(t)).
  static OuterMap tanh_of(OuterMap inner);
  /// exp(inner(t)).
  static OuterMap exp_of(OuterMap inner);
  static OuterMap product(std::vector<OuterMap> factors);

  /// Convenience: tanh(w.t + b) and exp(w.t + b).
  static OuterMap tanh_affine(std::vector<double> weights, double bias = 0.0) {
    return tanh_of(affine(std::move(weights), bias));
  }
  static OuterMap exp_affine(std::vector<double> weights, double bias = 0.0) {
    return exp_of(affine(std::move(weights), bias));
  }

  [[nodiscard]] std::size_t arity() const { return arity_; }
  [[nodiscard]] Kind kind() const { return kind_; }
  [[nodiscard]] const std::vector<double>& weights() const { return weights_; }
  [[nodiscard]] double bias() const { return bias_; }
  [[nodiscard]] const std::vector<OuterMap>& children() const { return children_; }

  [[nodiscard]] double value(std::span<const double> t) const;
  /// Returns g(t) and writes the gradient into `grad` (size k).
  double value_and_gradient(std::span<const double> t, std::span<double> grad) const;

  /// True when g and its first partials are bounded; then value_bound() and
  /// gradient_bound() hold the declared bounds.
  [[nodiscard]] bool bounded() const { return value_bound_.has_value() && gradient_bound_.has_value(); }
  [[nodiscard]] std::optional<double> value_bound() const { return value_bound_; }
  [[nodiscard]] std::optional<double> gradient_bound() const { return gradient_bound_; }

  [[nodiscard]] std::string describe() const;

private:
  OuterMap() = default;
  void derive_bounds();

  Kind kind_ = Kind::affine;
  std::size_t arity_ = 0;
  std::vector<double> weights_;
  double bias_ = 0.0;
  std::vector<OuterMap> children_;
  std::optional<double> value_bound_;
  std::optional<double> gradient_bound_;
};

/// F(gamma) = g(<f_1, gamma>, ..., <f_k, gamma>).
class CylinderFunction {
public:
  CylinderFunction(TestField inner, OuterMap outer, std::string name = "F");

  [[nodiscard]] double eval(const Configuration& gamma) const;
  /// sum_j d_j g(<f, gamma>) <grad f_j, gamma>.
  [[nodiscard]] Vec grad_gamma(const Configuration& gamma) const;
  /// Value from precomputed pairings t_j = <f_j, gamma>.
  [[nodiscard]] double eval_pairings(std::span<const double> t) const { return outer_.value(t); }

  [[nodiscard]] const TestField& inner() const { return inner_; }
  [[nodiscard]] const OuterMap& outer() const { return outer_; }
  [[nodiscard]] const std::string& name() const { return name_; }
  [[nodiscard]] bool bounded() const { return outer_.bounded(); }

private:
  TestField inner_;
  OuterMap outer_;
  std::string name_;
};

} // namespace gibbslab
