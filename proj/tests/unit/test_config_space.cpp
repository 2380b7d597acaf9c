#include <gtest/gtest.h>

#include <cmath>

#include "gibbslab/config_space.hpp"
#include "gibbslab/random.hpp"

using namespace gibbslab;

namespace {

Configuration random_config(const TorusDomain& dom, std::size_t n, Rng& rng) {
  Configuration g(dom);
  while (g.size() < n) {
    std::vector<double> c(dom.dim());
    for (std::size_t i = 0; i < dom.dim(); ++i) c[i] = rng.uniform(0.0, dom.side(i));
    const Point p = dom.point(c);
    if (g.can_insert(p)) g.insert(p);
  }
  return g;
}

} // namespace

TEST(TorusDomain, RejectsBadSides) {
  EXPECT_THROW(TorusDomain(std::vector<double>{}), std::invalid_argument);
  EXPECT_THROW(TorusDomain(std::vector<double>{1.0, 0.0}), std::invalid_argument);
  EXPECT_THROW(TorusDomain(std::vector<double>{1.0, -2.0}), std::invalid_argument);
  EXPECT_THROW(TorusDomain(std::vector<double>{1, 1, 1, 1}), std::invalid_argument);
  EXPECT_THROW(TorusDomain(std::vector<double>{INFINITY}), std::invalid_argument);
  EXPECT_DOUBLE_EQ(TorusDomain({2.0, 3.0}).volume(), 6.0);
}

TEST(TorusDomain, CoordinatesReducedIntoCell) {
  const TorusDomain dom({1.0, 2.0});
  const Point p = dom.point({-0.25, 4.5});
  EXPECT_NEAR(dom.coord(p, 0), 0.75, 1e-15);
  EXPECT_NEAR(dom.coord(p, 1), 0.5, 1e-15);
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const Point q = dom.point({rng.uniform(-10, 10), rng.uniform(-10, 10)});
    for (std::size_t a = 0; a < 2; ++a) {
      EXPECT_GE(dom.coord(q, a), 0.0);
      EXPECT_LT(dom.coord(q, a), dom.side(a));
    }
  }
  EXPECT_THROW((void)dom.point({0.1}), std::invalid_argument);
  EXPECT_THROW((void)dom.point({0.1, NAN}), std::invalid_argument);
}

TEST(PairSum, EmptyConfigurationIsZero) {
  const TorusDomain dom({1.0, 1.0});
  const Configuration g(dom);
  EXPECT_EQ(pair_sum([](const Point&) { return 7.0; }, g), 0.0);
}

TEST(PairSum, ConstantSummand) {
  const TorusDomain dom({1.0, 1.0});
  const Configuration g = Configuration::from_coordinates(dom, {{0.1, 0.1}, {0.4, 0.2}, {0.8, 0.9}});
  const TestField f(dom, {UniformComponent{2.5}});
  EXPECT_DOUBLE_EQ(f.pair_sums(g)[0], 7.5);
}

TEST(PairSum, FirstCoordinate) {
  const TorusDomain dom({1.0, 1.0});
  const Configuration g = Configuration::from_coordinates(dom, {{0.1, 0.2}, {0.5, 0.5}});
  const double s = pair_sum([&](const Point& x) { return dom.coord(x, 0); }, g);
  EXPECT_NEAR(s, 0.6, 1e-15);
}

TEST(Translate, ZeroShiftIsIdentity) {
  const TorusDomain dom({1.0, 1.0});
  Rng rng(1);
  const auto g = random_config(dom, 12, rng);
  EXPECT_EQ(translate(g, Vec{0.0, 0.0, 0.0}), g);
  EXPECT_TRUE(translate(Configuration(dom), Vec{0.3, 0.2, 0.0}).empty());
}

TEST(Translate, WrapsModuloSides) {
  const TorusDomain dom({1.0, 1.0});
  const auto g = Configuration::from_coordinates(dom, {{0.9, 0.5}});
  const auto h = translate(g, Vec{0.2, 0.0, 0.0});
  ASSERT_EQ(h.size(), 1u);
  EXPECT_NEAR(dom.coord(h[0], 0), 0.1, 1e-15);
  EXPECT_NEAR(dom.coord(h[0], 1), 0.5, 1e-15);
}

TEST(Translate, InverseRestoresExactly) {
  Rng rng(11);
  for (std::size_t d = 1; d <= 3; ++d) {
    const TorusDomain dom(std::vector<double>(d, 1.7));
    for (int trial = 0; trial < 50; ++trial) {
      const auto g = random_config(dom, 1 + rng.index(20), rng);
      Vec v{};
      for (std::size_t i = 0; i < d; ++i) v[i] = rng.uniform(-5, 5);
      const Shift s = dom.shift(v);
      const auto h = translate(g, s);
      EXPECT_EQ(h.size(), g.size());
      EXPECT_EQ(translate(h, -s), g);
    }
  }
}

TEST(Translate, PairSumCovariance) {
  Rng rng(5);
  const TorusDomain dom({2.0, 2.0});
  for (int trial = 0; trial < 100; ++trial) {
    const TestField f(dom, {Bump::make(dom, std::vector<double>{rng.uniform(0, 2), rng.uniform(0, 2)}, 0.7, 1.3)});
    const auto g = random_config(dom, 30, rng);
    const Vec v{rng.uniform(-3, 3), rng.uniform(-3, 3), 0.0};
    const Shift s = dom.shift(v);
    EXPECT_NEAR(f.pair_sums(translate(g, s))[0], f.shifted(-s).pair_sums(g)[0], 1e-13);
  }
}

TEST(MinImage, Examples) {
  const TorusDomain dom({1.0, 1.0});
  const Point x = dom.point({0.3, 0.3});
  const Vec zero = min_image_displacement(dom, x, x);
  EXPECT_EQ(zero[0], 0.0);
  EXPECT_EQ(zero[1], 0.0);
  const Vec w = min_image_displacement(dom, dom.point({0.95, 0.0}), dom.point({0.05, 0.0}));
  EXPECT_NEAR(w[0], -0.10, 1e-15);
  EXPECT_NEAR(w[1], 0.0, 1e-15);
  const Vec u = min_image_displacement(dom, x, dom.point({0.1, 0.1}));
  EXPECT_NEAR(u[0], 0.2, 1e-15);
  EXPECT_NEAR(u[1], 0.2, 1e-15);
}

TEST(MinImage, ComponentsInHalfOpenRange) {
  const TorusDomain dom({1.0, 3.0});
  Rng rng(8);
  for (int i = 0; i < 2000; ++i) {
    const Point a = dom.point({rng.uniform(0, 1), rng.uniform(0, 3)});
    const Point b = dom.point({rng.uniform(0, 1), rng.uniform(0, 3)});
    const Vec d = min_image_displacement(dom, a, b);
    for (std::size_t k = 0; k < 2; ++k) {
      EXPECT_GE(d[k], -0.5 * dom.side(k));
      EXPECT_LT(d[k], 0.5 * dom.side(k));
    }
  }
}

TEST(Configuration, SimplicityEnforced) {
  const TorusDomain dom({1.0, 1.0});
  const Point p = dom.point({0.25, 0.25});
  EXPECT_THROW(Configuration(dom, {p, p}), SimplicityError);
  EXPECT_FALSE(Configuration::try_make(dom, {p, p}).has_value());
  Configuration g(dom, {p});
  EXPECT_FALSE(g.can_insert(p));
  EXPECT_THROW(g.insert(p), SimplicityError);
  // Closer than the simplicity threshold counts as coincident.
  const Point q = dom.point({0.25 + 0.25 * dom.simplicity_threshold(), 0.25});
  EXPECT_FALSE(g.can_insert(q));
  const Point r = dom.point({0.25 + 4.0 * dom.simplicity_threshold(), 0.25});
  EXPECT_TRUE(g.can_insert(r));
}

TEST(Configuration, CanonicalOrderAfterMutation) {
  const TorusDomain dom({1.0, 1.0});
  Rng rng(21);
  Configuration g(dom);
  for (int step = 0; step < 500; ++step) {
    const double u = rng.uniform();
    if (u < 0.5 || g.empty()) {
      const Point p = dom.point({rng.uniform(), rng.uniform()});
      if (g.can_insert(p)) g.insert(p);
    } else if (u < 0.75) {
      g.erase(rng.index(g.size()));
    } else {
      const Point p = dom.point({rng.uniform(), rng.uniform()});
      const auto i = rng.index(g.size());
      if (g.without(i).can_insert(p)) g.replace(i, p);
    }
    for (std::size_t i = 1; i < g.size(); ++i) ASSERT_LT(g[i - 1], g[i]);
  }
  EXPECT_THROW(g.erase(g.size()), std::out_of_range);
}

TEST(Configuration, ConstructionOrderIrrelevant) {
  const TorusDomain dom({1.0, 1.0});
  const Point a = dom.point({0.7, 0.1}), b = dom.point({0.2, 0.9}), c = dom.point({0.2, 0.3});
  EXPECT_EQ(Configuration(dom, {a, b, c}), Configuration(dom, {c, a, b}));
}

TEST(Temperedness, Examples) {
  const TorusDomain dom({3.0, 3.0});
  EXPECT_EQ(temperedness_index(Configuration(dom), 1, 1.0), 1);
  EXPECT_EQ(temperedness_index(Configuration::from_coordinates(dom, {{0.1, 0.1}}), 1, 1.0), 1);
  // n points in the single cell around the origin: ceil(n / 3) for d = 2, l = 1.
  for (std::size_t n = 1; n <= 20; ++n) {
    Configuration g(dom);
    for (std::size_t i = 0; i < n; ++i) g.insert(dom.point({0.01 * static_cast<double>(i + 1), 0.2}));
    EXPECT_EQ(temperedness_index(g, 1, 1.0), static_cast<std::int64_t>((n + 2) / 3)) << n;
  }
}

TEST(Temperedness, GridMustFit) {
  const TorusDomain dom({3.0, 3.0});
  EXPECT_THROW((void)temperedness_index(Configuration(dom), 2, 1.0), std::invalid_argument);
  EXPECT_THROW((void)temperedness_index(Configuration(dom), 0, 1.0), std::invalid_argument);
}

TEST(Temperedness, NonIncreasingInL) {
  const TorusDomain dom({9.0, 9.0});
  Rng rng(4);
  for (int trial = 0; trial < 30; ++trial) {
    Configuration g(dom);
    const double cx = rng.uniform(-0.4, 0.4), cy = rng.uniform(-0.4, 0.4);
    const std::size_t n = 1 + rng.index(40);
    while (g.size() < n) {
      const Point p = dom.point({cx + rng.uniform(-1.4, 1.4), cy + rng.uniform(-1.4, 1.4)});
      if (g.can_insert(p)) g.insert(p);
    }
    std::int64_t prev = temperedness_index(g, 1, 1.0);
    for (int l = 2; l <= 4; ++l) {
      const auto cur = temperedness_index(g, l, 1.0);
      EXPECT_LE(cur, prev);
      prev = cur;
    }
  }
}

TEST(Bump, SupportAndGradient) {
  const TorusDomain dom({2.0, 2.0});
  const Bump b = Bump::make(dom, std::vector<double>{1.0, 1.0}, 0.5, 2.0);
  EXPECT_DOUBLE_EQ(b.value(dom, dom.point({1.0, 1.0})), 2.0);
  EXPECT_EQ(b.value(dom, dom.point({1.6, 1.0})), 0.0);
  const Vec g = b.gradient(dom, dom.point({1.6, 1.0}));
  EXPECT_EQ(g[0], 0.0);
  EXPECT_EQ(g[1], 0.0);
  EXPECT_THROW((void)Bump::make(dom, std::vector<double>{1.0, 1.0}, 1.0), std::invalid_argument);
  EXPECT_THROW((void)Bump::make(dom, std::vector<double>{1.0, 1.0}, 0.0), std::invalid_argument);

  // Gradient against central differences at interior points.
  Rng rng(2);
  for (int i = 0; i < 200; ++i) {
    const double x = 1.0 + rng.uniform(-0.45, 0.45), y = 1.0 + rng.uniform(-0.2, 0.2);
    const double h = 1e-6;
    const Vec gr = b.gradient(dom, dom.point({x, y}));
    const double fd = (b.value(dom, dom.point({x + h, y})) - b.value(dom, dom.point({x - h, y}))) / (2 * h);
    EXPECT_NEAR(gr[0], fd, 1e-5 * std::max(1.0, std::abs(fd)));
  }
}

TEST(Bump, PeriodizedAcrossTheSeam) {
  const TorusDomain dom({2.0, 2.0});
  const Bump b = Bump::make(dom, std::vector<double>{0.1, 1.0}, 0.5);
  EXPECT_GT(b.value(dom, dom.point({1.8, 1.0})), 0.0);
  EXPECT_NEAR(b.value(dom, dom.point({1.9, 1.0})), b.value(dom, dom.point({0.3, 1.0})), 1e-14);
}
