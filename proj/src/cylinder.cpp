#include "gibbslab/cylinder.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace gibbslab {

OuterMap OuterMap::affine(std::vector<double> weights, double bias) {
  if (weights.empty()) throw std::invalid_argument("affine outer map needs at least one weight");
  OuterMap m;
  m.kind_ = Kind::affine;
  m.arity_ = weights.size();
  m.weights_ = std::move(weights);
  m.bias_ = bias;
  m.derive_bounds();
  return m;
}

OuterMap OuterMap::tanh_of(OuterMap inner) {
  OuterMap m;
  m.kind_ = Kind::tanh;
  m.arity_ = inner.arity_;
  m.children_.push_back(std::move(inner));
  m.derive_bounds();
  return m;
}

OuterMap OuterMap::exp_of(OuterMap inner) {
  OuterMap m;
  m.kind_ = Kind::exp;
  m.arity_ = inner.arity_;
  m.children_.push_back(std::move(inner));
  m.derive_bounds();
  return m;
}

OuterMap OuterMap::product(std::vector<OuterMap> factors) {
  if (factors.empty()) throw std::invalid_argument("product needs at least one factor");
  for (const auto& f : factors)
    if (f.arity_ != factors.front().arity_) throw std::invalid_argument("product factors must share their arity");
  OuterMap m;
  m.kind_ = Kind::product;
  m.arity_ = factors.front().arity_;
  m.children_ = std::move(factors);
  m.derive_bounds();
  return m;
}

void OuterMap::derive_bounds() {
  value_bound_.reset();
  gradient_bound_.reset();
  switch (kind_) {
    case Kind::affine: {
      double w = 0.0;
      for (double x : weights_) w = std::max(w, std::abs(x));
      gradient_bound_ = w;
      if (w == 0.0) value_bound_ = std::abs(bias_);
      break;
    }
    case Kind::tanh:
      value_bound_ = 1.0;
      // sech^2 <= 1, so the chain rule inherits the inner gradient bound.
      gradient_bound_ = children_[0].gradient_bound_;
      break;
    case Kind::exp:
      if (children_[0].value_bound_ && children_[0].gradient_bound_) {
        value_bound_ = std::exp(*children_[0].value_bound_);
        gradient_bound_ = *value_bound_ * *children_[0].gradient_bound_;
      }
      break;
    case Kind::product: {
      double v = 1.0;
      bool ok = true;
      for (const auto& c : children_) {
        if (!c.bounded()) ok = false;
        else v *= *c.value_bound_;
      }
      if (ok) {
        double g = 0.0;
        for (const auto& c : children_) g += *c.gradient_bound_ * v / std::max(*c.value_bound_, 1e-300);
        value_bound_ = v;
        gradient_bound_ = g;
      }
      break;
    }
  }
}

double OuterMap::value(std::span<const double> t) const {
  if (t.size() != arity_) throw std::invalid_argument("outer map arity mismatch");
  switch (kind_) {
    case Kind::affine: {
      double s = bias_;
      for (std::size_t j = 0; j < arity_; ++j) s += weights_[j] * t[j];
      return s;
    }
    case Kind::tanh: return std::tanh(children_[0].value(t));
    case Kind::exp: return std::exp(children_[0].value(t));
    case Kind::product: {
      double p = 1.0;
      for (const auto& c : children_) p *= c.value(t);
      return p;
    }
  }
  return 0.0;
}

double OuterMap::value_and_gradient(std::span<const double> t, std::span<double> grad) const {
  if (t.size() != arity_ || grad.size() != arity_) throw std::invalid_argument("outer map arity mismatch");
  switch (kind_) {
    case Kind::affine: {
      double s = bias_;
      for (std::size_t j = 0; j < arity_; ++j) {
        s += weights_[j] * t[j];
        grad[j] = weights_[j];
      }
      return s;
    }
    case Kind::tanh: {
      const double u = children_[0].value_and_gradient(t, grad);
      const double th = std::tanh(u);
      const double d = 1.0 - th * th;
      for (double& g : grad) g *= d;
      return th;
    }
    case Kind::exp: {
      const double u = children_[0].value_and_gradient(t, grad);
      const double e = std::exp(u);
      for (double& g : grad) g *= e;
      return e;
    }
    case Kind::product: {
      const std::size_t m = children_.size();
      std::vector<double> vals(m);
      std::vector<std::vector<double>> grads(m, std::vector<double>(arity_));
      for (std::size_t c = 0; c < m; ++c) vals[c] = children_[c].value_and_gradient(t, grads[c]);
      double p = 1.0;
      for (double v : vals) p *= v;
      for (std::size_t j = 0; j < arity_; ++j) {
        double g = 0.0;
        for (std::size_t c = 0; c < m; ++c) {
          double others = 1.0;
          for (std::size_t o = 0; o < m; ++o)
            if (o != c) others *= vals[o];
          g += grads[c][j] * others;
        }
        grad[j] = g;
      }
      return p;
    }
  }
  return 0.0;
}

std::string OuterMap::describe() const {
  std::ostringstream os;
  switch (kind_) {
    case Kind::affine:
      os << "affine(";
      for (std::size_t j = 0; j < weights_.size(); ++j) os << (j ? "," : "") << weights_[j];
      os << ";" << bias_ << ")";
      break;
    case Kind::tanh: os << "tanh(" << children_[0].describe() << ")"; break;
    case Kind::exp: os << "exp(" << children_[0].describe() << ")"; break;
    case Kind::product:
      os << "product(";
      for (std::size_t c = 0; c < children_.size(); ++c) os << (c ? "," : "") << children_[c].describe();
      os << ")";
      break;
  }
  return os.str();
}

CylinderFunction::CylinderFunction(TestField inner, OuterMap outer, std::string name)
    : inner_(std::move(inner)), outer_(std::move(outer)), name_(std::move(name)) {
  if (inner_.size() != outer_.arity())
    throw std::invalid_argument("cylinder function: inner field size differs from outer arity");
}

double CylinderFunction::eval(const Configuration& gamma) const { return outer_.value(inner_.pair_sums(gamma)); }

Vec CylinderFunction::grad_gamma(const Configuration& gamma) const {
  const std::vector<double> t = inner_.pair_sums(gamma);
  std::vector<double> dg(t.size());
  outer_.value_and_gradient(t, dg);
  const std::vector<Vec> gs = inner_.gradient_sums(gamma);
  Vec out{};
  for (std::size_t j = 0; j < t.size(); ++j)
    for (std::size_t i = 0; i < kMaxDim; ++i) out[i] += dg[j] * gs[j][i];
  return out;
}

} // namespace gibbslab
