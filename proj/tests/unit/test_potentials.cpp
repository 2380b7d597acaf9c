#include <gtest/gtest.h>

#include <cmath>

#include "gibbslab/potentials.hpp"
#include "gibbslab/random.hpp"
#include "gibbslab/stability.hpp"

using namespace gibbslab;

namespace {

Configuration random_config(const TorusDomain& dom, std::size_t n, Rng& rng, double min_gap = 0.0) {
  Configuration g(dom);
  std::size_t attempts = 0;
  while (g.size() < n && ++attempts < 100000) {
    std::vector<double> c(dom.dim());
    for (std::size_t i = 0; i < dom.dim(); ++i) c[i] = rng.uniform(0.0, dom.side(i));
    const Point p = dom.point(c);
    bool ok = g.can_insert(p);
    for (const Point& q : g) ok = ok && dom.distance2(p, q) > min_gap * min_gap;
    if (ok) g.insert(p);
  }
  return g;
}

std::vector<PairPotential> builtins() {
  return {zero_pair_potential(),
          lennard_jones_truncated(1.0, 0.5, 1.25, 2),
          soft_sphere(1.0, 0.4, 1.0),
          hard_core(0.3),
          gaussian_attractive(1.0, 0.5),
          tabulated_pair_potential({0.1, 0.5, 1.0}, {3.0, -0.5, 0.0})};
}

double lj(double r) { return 4.0 * (std::pow(0.5 / r, 12) - std::pow(0.5 / r, 6)) - 4.0 * (std::pow(0.4, 12) - std::pow(0.4, 6)); }

} // namespace

TEST(PairPotential, ClosedForms) {
  const auto phi = lennard_jones_truncated(1.0, 0.5, 1.25, 2);
  for (double r : {0.45, 0.5, 0.56, 0.8, 1.2}) EXPECT_NEAR(phi.radial(r), lj(r), 1e-12 * std::max(1.0, std::abs(lj(r))));
  EXPECT_EQ(phi.radial(1.3), 0.0);
  EXPECT_NEAR(phi.radial(1.25), 0.0, 1e-15);

  const auto hc = hard_core(0.3);
  EXPECT_EQ(hc.radial(0.29), kInfiniteEnergy);
  EXPECT_EQ(hc.radial(0.31), 0.0);
  EXPECT_DOUBLE_EQ(hc.hard_core_radius(), 0.3);

  EXPECT_DOUBLE_EQ(soft_sphere(2.0, 0.5, 1.0).radial(0.5), 2.0);
  EXPECT_NEAR(gaussian_attractive(1.0, 0.5).radial(0.5), -std::exp(-1.0), 1e-15);

  const auto tab = tabulated_pair_potential({0.1, 0.5, 1.0}, {3.0, -0.5, 0.0});
  EXPECT_DOUBLE_EQ(tab.radial(0.3), 1.25);
  EXPECT_EQ(tab.radial(0.05), kInfiniteEnergy);
  EXPECT_EQ(tab.radial(1.5), 0.0);
  EXPECT_THROW((void)tabulated_pair_potential({0.5, 0.1}, {1.0, 0.0}), std::invalid_argument);
  EXPECT_THROW((void)hard_core(0.0), std::invalid_argument);
}

TEST(PairPotential, Evenness) {
  Rng rng(13);
  for (const auto& phi : builtins()) {
    for (int i = 0; i < 10000; ++i) {
      const Vec u{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)};
      const Vec m{-u[0], -u[1], -u[2]};
      const double a = phi.evaluate(u), b = phi.evaluate(m);
      if (std::isinf(a)) EXPECT_EQ(a, b);
      else ASSERT_EQ(a, b) << phi.label();
    }
  }
}

TEST(PairPotential, CutoffAndHardCore) {
  Rng rng(14);
  for (const auto& phi : builtins()) {
    for (int i = 0; i < 2000; ++i) {
      const double r = rng.uniform(0.0, 3.0);
      if (r > phi.cutoff()) EXPECT_EQ(phi.radial(r), 0.0) << phi.label() << " r=" << r;
      if (r < phi.hard_core_radius()) EXPECT_EQ(phi.radial(r), kInfiniteEnergy) << phi.label();
    }
  }
}

TEST(PairPotential, RadialMinimum) {
  const auto phi = lennard_jones_truncated(1.0, 0.5, 1.25, 2);
  EXPECT_NEAR(radial_minimum(phi), lj(std::pow(2.0, 1.0 / 6.0) * 0.5), 1e-9);
  EXPECT_EQ(radial_minimum(soft_sphere(1.0, 0.5, 1.0)), 0.0);
  EXPECT_EQ(radial_minimum(zero_pair_potential()), 0.0);
}

TEST(PairEnergy, Examples) {
  const TorusDomain dom({4.0, 4.0});
  const auto phi = lennard_jones_truncated(1.0, 0.5, 1.25, 2);
  EXPECT_EQ(pair_energy(phi, Configuration(dom)), 0.0);
  EXPECT_EQ(pair_energy(phi, Configuration::from_coordinates(dom, {{1.0, 1.0}})), 0.0);
  EXPECT_NEAR(pair_energy(phi, Configuration::from_coordinates(dom, {{1.0, 1.0}, {1.7, 1.0}})), lj(0.7), 1e-14);
  // Pair across the seam.
  EXPECT_NEAR(pair_energy(phi, Configuration::from_coordinates(dom, {{0.1, 1.0}, {3.5, 1.0}})), lj(0.6), 1e-14);
  // Equilateral triangle.
  const double r = 0.8;
  const auto tri = Configuration::from_coordinates(dom, {{1.0, 1.0}, {1.0 + r, 1.0}, {1.0 + r / 2, 1.0 + r * std::sqrt(3.0) / 2}});
  EXPECT_NEAR(pair_energy(phi, tri), 3.0 * lj(r), 1e-12);
  EXPECT_EQ(pair_energy(hard_core(0.5), Configuration::from_coordinates(dom, {{1.0, 1.0}, {1.2, 1.0}})), kInfiniteEnergy);
}

TEST(PairEnergy, CellListMatchesAllPairs) {
  Rng rng(15);
  const TorusDomain dom({6.0, 5.0});
  for (const auto& phi : builtins()) {
    for (int trial = 0; trial < 20; ++trial) {
      const auto g = random_config(dom, 60, rng, phi.hard_core_radius());
      const double a = pair_energy(phi, g), b = pair_energy_all_pairs(phi, g);
      EXPECT_NEAR(a, b, 1e-12 * std::max(1.0, std::abs(b))) << phi.label();
    }
  }
}

TEST(CrossEnergy, PartitionIdentity) {
  Rng rng(16);
  const TorusDomain dom({3.0, 3.0});
  for (const auto& phi : builtins()) {
    for (int trial = 0; trial < 50; ++trial) {
      const auto all = random_config(dom, 2 + rng.index(30), rng, phi.hard_core_radius());
      std::vector<Point> a, b;
      for (const Point& p : all) (rng.uniform() < 0.5 ? a : b).push_back(p);
      const Configuration eta(dom, a), gamma(dom, b);
      const double lhs = cross_energy(phi, eta, gamma) + pair_energy(phi, eta) + pair_energy(phi, gamma);
      const double rhs = pair_energy(phi, all);
      EXPECT_NEAR(lhs, rhs, 1e-12 * std::max(1.0, std::abs(rhs))) << phi.label();
    }
  }
  const auto phi = lennard_jones_truncated(1.0, 0.5, 1.25, 2);
  const auto g = Configuration::from_coordinates(dom, {{1.0, 1.0}});
  EXPECT_EQ(cross_energy(phi, Configuration(dom), g), 0.0);
  EXPECT_EQ(cross_energy(phi, g, Configuration(dom)), 0.0);
  EXPECT_NEAR(cross_energy(phi, Configuration::from_coordinates(dom, {{1.9, 1.0}}), g), lj(0.9), 1e-14);
  EXPECT_THROW((void)cross_energy(phi, g, g), std::invalid_argument);
}

TEST(InsertionEnergy, MatchesEnergyDifference) {
  Rng rng(17);
  const TorusDomain dom({3.0, 3.0});
  const auto psi = bump_field(dom, std::vector<double>{1.5, 1.5}, 1.0, 2.0);
  for (const auto& phi : builtins()) {
    for (int trial = 0; trial < 100; ++trial) {
      const auto g = random_config(dom, rng.index(25), rng, phi.hard_core_radius());
      const Point x = dom.point({rng.uniform(0, 3), rng.uniform(0, 3)});
      if (!g.can_insert(x)) continue;
      const double e = insertion_energy(phi, psi, g, x);
      double diff = psi.evaluate(x);
      for (const Point& p : g) diff += phi.evaluate(min_image_displacement(dom, x, p));
      if (std::isinf(diff)) EXPECT_EQ(e, kInfiniteEnergy);
      else EXPECT_NEAR(e, diff, 1e-11 * std::max(1.0, std::abs(diff))) << phi.label();
    }
  }
  const auto none = zero_field(dom);
  const Point x = dom.point({1.5, 1.5});
  EXPECT_DOUBLE_EQ(insertion_energy(lennard_jones_truncated(1, 0.5, 1.25, 2), psi, Configuration(dom), x), 2.0);
  EXPECT_EQ(insertion_energy(hard_core(0.5), none, Configuration::from_coordinates(dom, {{1.6, 1.5}}), x), kInfiniteEnergy);
}

TEST(InsertionEnergy, Locality) {
  Rng rng(18);
  const TorusDomain dom({6.0, 6.0});
  const auto phi = lennard_jones_truncated(1.0, 0.5, 1.25, 2);
  const auto psi = zero_field(dom);
  for (int trial = 0; trial < 50; ++trial) {
    const auto g = random_config(dom, 40, rng, 0.4);
    const Point x = dom.point({rng.uniform(0, 6), rng.uniform(0, 6)});
    if (!g.can_insert(x)) continue;
    std::vector<Point> near;
    for (const Point& p : g)
      if (dom.distance2(p, x) <= phi.cutoff() * phi.cutoff()) near.push_back(p);
    EXPECT_NEAR(insertion_energy(phi, psi, g, x), insertion_energy(phi, psi, Configuration(dom, near), x), 1e-13);
  }
}

TEST(OneBody, LowerBoundAndPeriodicity) {
  const TorusDomain dom({3.0, 3.0});
  const std::vector<double> c{1.5, 1.5};
  const std::vector<OneBodyPotential> fields{zero_field(dom), constant_field(dom, -0.7), bump_field(dom, c, 1.0, -2.0),
                                             bump_field(dom, c, 1.0, 4.0), singular_field(dom, c, 2, 0.8, 0.2)};
  Rng rng(19);
  for (const auto& psi : fields) {
    for (int i = 0; i < 5000; ++i) {
      const double x = rng.uniform(0, 3), y = rng.uniform(0, 3);
      const double v = psi.evaluate(dom.point({x, y}));
      EXPECT_GE(v, -psi.lower_bound() - 1e-15) << psi.label();
      EXPECT_NEAR(v, psi.evaluate(dom.point({x + 3.0, y - 6.0})), 1e-9 * std::max(1.0, std::abs(v))) << psi.label();
    }
  }
  EXPECT_DOUBLE_EQ(fields[1].lower_bound(), 0.7);
  EXPECT_DOUBLE_EQ(fields[2].lower_bound(), 2.0);
}

TEST(OneBody, SingularField) {
  const TorusDomain dom({3.0, 3.0});
  const auto psi = singular_field(dom, std::vector<double>{1.5, 1.5}, 2, 0.8, 0.2);
  EXPECT_EQ(psi.evaluate(dom.point({1.5, 1.5})), kInfiniteEnergy);
  EXPECT_NEAR(psi.evaluate(dom.point({1.9, 1.5})), 0.2 * (1 / 0.16 - 1 / 0.64), 1e-12);
  EXPECT_EQ(psi.evaluate(dom.point({2.4, 1.5})), 0.0);
  ASSERT_EQ(psi.singular_set().size(), 1u);
  EXPECT_TRUE(std::isnan(psi.gradient(dom.point({1.5, 1.5}))[0]));
  EXPECT_THROW((void)singular_field(dom, std::vector<double>{1.5, 1.5}, 0, 0.8, 0.2), std::invalid_argument);
}

TEST(OneBody, GradientMatchesFiniteDifferences) {
  const TorusDomain dom({3.0, 3.0});
  const std::vector<double> c{1.5, 1.5};
  const std::vector<OneBodyPotential> fields{bump_field(dom, c, 1.0, 4.0), singular_field(dom, c, 2, 0.8, 0.2),
                                             constant_field(dom, 1.0)};
  Rng rng(20);
  for (const auto& psi : fields) {
    for (int i = 0; i < 500; ++i) {
      const double r = rng.uniform(0.2, 0.75), t = rng.uniform(0, 6.283);
      const double x = 1.5 + r * std::cos(t), y = 1.5 + r * std::sin(t);
      const double h = 1e-6;
      const Vec g = psi.gradient(dom.point({x, y}));
      const double fx = (psi.evaluate(dom.point({x + h, y})) - psi.evaluate(dom.point({x - h, y}))) / (2 * h);
      const double fy = (psi.evaluate(dom.point({x, y + h})) - psi.evaluate(dom.point({x, y - h}))) / (2 * h);
      EXPECT_NEAR(g[0], fx, 1e-5 * std::max(1.0, std::abs(fx))) << psi.label();
      EXPECT_NEAR(g[1], fy, 1e-5 * std::max(1.0, std::abs(fy))) << psi.label();
    }
  }
}

TEST(Superstability, HardCoreInconclusive) {
  // At most one point per cell: the right-hand side is (a - b) n <= 0.
  SuperstabilitySearch s;
  s.budget = 20000;
  s.cell_edge = 0.5;
  const auto rep = check_superstability(hard_core(0.8), 0.5, 1.0, s);
  EXPECT_EQ(rep.verdict, Verdict::inconclusive);
  EXPECT_FALSE(rep.witness.has_value());
}

TEST(Superstability, AttractiveGaussianFailsWithWitness) {
  SuperstabilitySearch s;
  s.budget = 100000;
  const double a = 0.1, b = 1.0;
  const auto phi = gaussian_attractive(1.0, 1.0);
  const auto rep = check_superstability(phi, a, b, s);
  ASSERT_EQ(rep.verdict, Verdict::fail);
  ASSERT_TRUE(rep.witness.has_value());
  const double slack = superstability_slack(phi, *rep.witness, a, b, s.cell_edge);
  EXPECT_LT(slack, 0.0);
  EXPECT_LE(slack, rep.margin + 1e-9 * std::abs(rep.margin));
}

TEST(Superstability, ClusteredSlackTurnsNegative) {
  // Independent evaluation: n points packed near the origin, -exp(-|u|^2) pair energy.
  const auto phi = gaussian_attractive(1.0, 1.0);
  const TorusDomain dom({64.0, 64.0});
  bool violated = false;
  for (std::size_t n = 2; n <= 50 && !violated; ++n) {
    Configuration g(dom);
    for (std::size_t i = 0; i < n; ++i) g.insert(dom.point({0.001 * static_cast<double>(i), 0.0}));
    double e = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) e -= std::exp(-dom.distance2(g[i], g[j]));
    const double rhs = 0.1 * static_cast<double>(n * n) - 1.0 * static_cast<double>(n);
    EXPECT_NEAR(superstability_slack(phi, g, 0.1, 1.0, 1.0), e - rhs, 1e-9 * static_cast<double>(n * n));
    violated = e < rhs;
  }
  EXPECT_TRUE(violated);
}

TEST(Superstability, StabilityOnlyCheckAccepted) {
  SuperstabilitySearch s;
  s.budget = 5000;
  EXPECT_NO_THROW((void)check_superstability(soft_sphere(1.0, 0.5, 1.0), 0.0, 0.0, s));
  EXPECT_THROW((void)check_superstability(soft_sphere(1.0, 0.5, 1.0), -1.0, 0.0, s), std::invalid_argument);
}

TEST(LowerRegularity, Verdicts) {
  const auto phi = lennard_jones_truncated(1.0, 0.5, 1.25, 2);
  const auto shallow = check_lower_regularity(phi, power_envelope(0.5, 2), 256, 2, 1);
  ASSERT_EQ(shallow.verdict, Verdict::fail);
  ASSERT_TRUE(shallow.witness.has_value());
  EXPECT_TRUE(shallow.envelope_integral.has_value());

  const auto deep = check_lower_regularity(phi, step_envelope(1.0, 1.25), 256, 2, 1);
  EXPECT_EQ(deep.verdict, Verdict::inconclusive);
  const auto positive = check_lower_regularity(soft_sphere(1.0, 0.5, 1.0), power_envelope(0.1, 2), 64, 2, 1);
  EXPECT_EQ(positive.verdict, Verdict::inconclusive);

  Envelope increasing{[](double r) { return r; }, "increasing"};
  EXPECT_THROW((void)check_lower_regularity(phi, increasing, 64), std::invalid_argument);
}

TEST(Integrability, Examples) {
  const TorusDomain dom({2.0, 2.0});
  auto one = [](const Point&) { return 1.0; };
  EXPECT_EQ(integrability_constant(dom, [](const Point&) { return 0.0; }, one).value, 0.0);
  // log 2 on the left half: |e^f - 1| = 1 there, so C = area = 2.
  auto f = [&](const Point& x) { return dom.coord(x, 0) < 1.0 ? std::log(2.0) : 0.0; };
  EXPECT_NEAR(integrability_constant(dom, f, one).value, 2.0, 1e-12);
}

TEST(Integrability, BumpAgainstMonteCarlo) {
  const TorusDomain dom({3.0, 3.0});
  const double beta = 0.25;
  const auto psi = bump_field(dom, std::vector<double>{1.5, 1.5}, 1.0, 4.0);
  auto f = [&](const Point& x) { return -beta * psi.evaluate(x); };
  const auto q = integrability_constant(dom, f, [](const Point&) { return 1.0; });
  Rng rng(99);
  double s = 0.0;
  const int n = 400000;
  for (int i = 0; i < n; ++i) s += std::abs(std::exp(f(dom.point({rng.uniform(0, 3), rng.uniform(0, 3)}))) - 1.0);
  const double mc = 9.0 * s / n;
  EXPECT_NEAR(q.value, mc, 0.01 * mc);
  EXPECT_LT(q.refinement_delta, 1e-3 * q.value);
}
