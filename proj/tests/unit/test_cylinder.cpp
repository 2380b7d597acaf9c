#include <gtest/gtest.h>

#include <cmath>

#include "gibbslab/cylinder.hpp"
#include "gibbslab/random.hpp"

using namespace gibbslab;

namespace {

const TorusDomain kDom({3.0, 3.0});

Configuration random_config(std::size_t n, Rng& rng) {
  Configuration g(kDom);
  while (g.size() < n) {
    const Point p = kDom.point({rng.uniform(0, 3), rng.uniform(0, 3)});
    if (g.can_insert(p)) g.insert(p);
  }
  return g;
}

Bump random_bump(Rng& rng) {
  return Bump::make(kDom, std::vector<double>{rng.uniform(0, 3), rng.uniform(0, 3)}, rng.uniform(0.4, 1.2),
                    rng.uniform(-2, 2));
}

} // namespace

TEST(Cylinder, EvalExamples) {
  const CylinderFunction affine(TestField(kDom, {UniformComponent{1.0}}), OuterMap::affine({1.0}, 0.25));
  EXPECT_DOUBLE_EQ(affine.eval(Configuration(kDom)), 0.25);

  const Bump b = Bump::make(kDom, std::vector<double>{1.0, 1.0}, 0.8);
  const CylinderFunction sel(TestField(kDom, {b}), OuterMap::affine({1.0}));
  const auto g = Configuration::from_coordinates(kDom, {{1.0, 1.1}, {1.3, 0.9}, {2.5, 2.5}});
  EXPECT_DOUBLE_EQ(sel.eval(g), pair_sum([&](const Point& x) { return b.value(kDom, x); }, g));

  const CylinderFunction th(TestField(kDom, {UniformComponent{1.0}}), OuterMap::tanh_affine({1.0}));
  EXPECT_DOUBLE_EQ(th.eval(Configuration::from_coordinates(kDom, {{0.5, 0.5}, {2.0, 2.0}})), std::tanh(2.0));
}

TEST(Cylinder, GradientExamples) {
  const Bump b = Bump::make(kDom, std::vector<double>{1.0, 1.0}, 0.8);
  const CylinderFunction F(TestField(kDom, {b}), OuterMap::affine({1.0}));
  const Vec zero = F.grad_gamma(Configuration(kDom));
  EXPECT_EQ(zero[0], 0.0);
  EXPECT_EQ(zero[1], 0.0);
  const Point x = kDom.point({1.2, 0.7});
  const Vec gx = F.grad_gamma(Configuration(kDom, {x}));
  const Vec bx = b.gradient(kDom, x);
  EXPECT_DOUBLE_EQ(gx[0], bx[0]);
  EXPECT_DOUBLE_EQ(gx[1], bx[1]);
}

TEST(Cylinder, DirectionalDerivativeIdentity) {
  Rng rng(31);
  const double t = 1e-6;
  int checked = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t k = 1 + rng.index(3);
    std::vector<TestComponent> comps;
    std::vector<double> w;
    for (std::size_t j = 0; j < k; ++j) {
      comps.push_back(random_bump(rng));
      w.push_back(rng.uniform(-1, 1));
    }
    OuterMap g = rng.uniform() < 0.5 ? OuterMap::tanh_affine(w, 0.1) : OuterMap::exp_affine(w, -0.2);
    const CylinderFunction F(TestField(kDom, comps), g);
    const auto gamma = random_config(1 + rng.index(15), rng);
    const double ang = rng.uniform(0, 6.283);
    const Vec v{std::cos(ang), std::sin(ang), 0.0};
    const Vec vp{t * v[0], t * v[1], 0.0}, vm{-t * v[0], -t * v[1], 0.0};
    // Translate through double coordinates so the shift is not quantized away.
    auto shifted = [&](const Vec& s) {
      std::vector<Point> pts;
      for (const Point& p : gamma) pts.push_back(kDom.point({kDom.coord(p, 0) + s[0], kDom.coord(p, 1) + s[1]}));
      return Configuration(kDom, pts);
    };
    const double fd = (F.eval(shifted(vp)) - F.eval(shifted(vm))) / (2 * t);
    const double an = dot(v, F.grad_gamma(gamma));
    EXPECT_NEAR(fd, an, 1e-6 * std::max(1.0, std::abs(an))) << "trial " << trial;
    ++checked;
  }
  EXPECT_EQ(checked, 1000);
}

TEST(Cylinder, LocalityOfGradient) {
  Rng rng(32);
  for (int trial = 0; trial < 200; ++trial) {
    const TestField f(kDom, {random_bump(rng), random_bump(rng)});
    const CylinderFunction F(f, OuterMap::tanh_affine({0.7, -0.4}));
    const auto gamma = random_config(20, rng);
    std::vector<Point> inside;
    for (const Point& p : gamma)
      if (f.in_support(p)) inside.push_back(p);
    const Vec a = F.grad_gamma(gamma), b = F.grad_gamma(Configuration(kDom, inside));
    EXPECT_EQ(a[0], b[0]);
    EXPECT_EQ(a[1], b[1]);
  }
}

TEST(OuterMap, ChainRuleConsistency) {
  Rng rng(33);
  for (int trial = 0; trial < 500; ++trial) {
    const std::vector<double> w{rng.uniform(-1, 1), rng.uniform(-1, 1)};
    const double b = rng.uniform(-1, 1);
    const OuterMap g = OuterMap::exp_of(OuterMap::tanh_affine(w, b));
    const std::vector<double> t{rng.uniform(-2, 2), rng.uniform(-2, 2)};
    std::vector<double> grad(2);
    const double v = g.value_and_gradient(t, grad);
    const double u = w[0] * t[0] + w[1] * t[1] + b;
    const double th = std::tanh(u);
    EXPECT_NEAR(v, std::exp(th), 1e-12 * std::exp(th));
    for (std::size_t j = 0; j < 2; ++j) {
      const double exact = std::exp(th) * (1 - th * th) * w[j];
      EXPECT_NEAR(grad[j], exact, 1e-12 * std::max(1.0, std::abs(exact)));
    }
  }
}

TEST(OuterMap, ProductRule) {
  const OuterMap p = OuterMap::product({OuterMap::affine({2.0}, 1.0), OuterMap::tanh_affine({1.0})});
  std::vector<double> grad(1);
  const std::vector<double> t{0.3};
  const double v = p.value_and_gradient(t, grad);
  EXPECT_NEAR(v, 1.6 * std::tanh(0.3), 1e-15);
  EXPECT_NEAR(grad[0], 2.0 * std::tanh(0.3) + 1.6 * (1 - std::tanh(0.3) * std::tanh(0.3)), 1e-14);
}

TEST(OuterMap, BoundsDeclaredAndHeld) {
  const OuterMap th = OuterMap::tanh_affine({2.0, -1.0}, 0.5);
  ASSERT_TRUE(th.bounded());
  EXPECT_FALSE(OuterMap::affine({1.0}).bounded());
  EXPECT_FALSE(OuterMap::exp_affine({1.0}).bounded());
  EXPECT_TRUE(OuterMap::product({OuterMap::tanh_affine({1.0}), OuterMap::tanh_affine({3.0})}).bounded());
  Rng rng(34);
  std::vector<double> grad(2);
  for (int i = 0; i < 5000; ++i) {
    const std::vector<double> t{rng.uniform(-50, 50), rng.uniform(-50, 50)};
    const double v = th.value_and_gradient(t, grad);
    EXPECT_LE(std::abs(v), *th.value_bound());
    for (double gj : grad) EXPECT_LE(std::abs(gj), *th.gradient_bound());
  }
}

TEST(OuterMap, ArityErrors) {
  EXPECT_THROW((void)OuterMap::affine({}), std::invalid_argument);
  EXPECT_THROW((void)OuterMap::product({OuterMap::affine({1.0}), OuterMap::affine({1.0, 2.0})}), std::invalid_argument);
  EXPECT_THROW(CylinderFunction(TestField(kDom, {UniformComponent{}}), OuterMap::affine({1.0, 1.0})), std::invalid_argument);
}
