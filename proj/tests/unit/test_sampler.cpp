#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <utility>

#include "gibbslab/diagnostics.hpp"
#include "gibbslab/random.hpp"
#include "gibbslab/sampler.hpp"
#include "gibbslab/stats.hpp"

using namespace gibbslab;

namespace {

ModelSpec poisson(const TorusDomain& dom, double z) { return {dom, z, 1.0, zero_pair_potential(), zero_field(dom)}; }

ModelSpec lj_bump() {
  const TorusDomain dom({2.0, 2.0});
  return {dom, 0.8, 0.5, lennard_jones_truncated(1.0, 0.4, 1.0, 2), bump_field(dom, std::vector<double>{1.0, 1.0}, 0.7, 2.0)};
}

Configuration random_config(const TorusDomain& dom, std::size_t n, Rng& rng, double gap) {
  Configuration g(dom);
  for (int attempts = 0; g.size() < n && attempts < 10000; ++attempts) {
    const Point p = dom.point({rng.uniform(0, dom.side(0)), rng.uniform(0, dom.side(1))});
    bool ok = g.can_insert(p);
    for (const Point& q : g) ok = ok && dom.distance2(p, q) > gap * gap;
    if (ok) g.insert(p);
  }
  return g;
}

Observable count_obs() {
  return {"n", [](const Configuration& g) { return static_cast<double>(g.size()); }};
}

} // namespace

TEST(Acceptance, BirthDeathRatioIsStationarityRatio) {
  const auto model = lj_bump();
  const auto& dom = model.domain;
  Rng rng(41);
  const MoveMix mix{0.3, 0.2, 0.0};
  int checked = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const auto g = random_config(dom, rng.index(8), rng, 0.3);
    const Point x = dom.point({rng.uniform(0, 2), rng.uniform(0, 2)});
    if (!g.can_insert(x)) continue;
    Configuration h = g;
    h.insert(x);
    std::size_t ix = 0;
    while (!(h[ix] == x)) ++ix;
    const double dE = insertion_energy(model.phi, model.psi, g, x);
    const double r = (mix.death / mix.birth) * model.z * dom.volume() * std::exp(-model.beta * dE) /
                     static_cast<double>(g.size() + 1);
    const double ab = birth_acceptance(model, mix, g, x), ad = death_acceptance(model, mix, h, ix);
    EXPECT_NEAR(ab, std::min(1.0, r), 1e-12);
    EXPECT_NEAR(ad, std::min(1.0, 1.0 / r), 1e-12);
    EXPECT_NEAR(ab / ad, r, 1e-9 * r);
    ++checked;
  }
  EXPECT_GT(checked, 400);
}

TEST(Acceptance, DisplacementIsSymmetric) {
  const auto model = lj_bump();
  const auto& dom = model.domain;
  Rng rng(42);
  for (int trial = 0; trial < 300; ++trial) {
    const auto g = random_config(dom, 1 + rng.index(6), rng, 0.3);
    const std::size_t i = rng.index(g.size());
    const Point x = dom.point({rng.uniform(0, 2), rng.uniform(0, 2)});
    if (!g.without(i).can_insert(x)) continue;
    Configuration h = g;
    const Point old = g[i];
    h.replace(i, x);
    std::size_t j = 0;
    while (!(h[j] == x)) ++j;
    const double a = displacement_acceptance(model, g, i, x), b = displacement_acceptance(model, h, j, old);
    const double dE = total_energy(model.phi, model.psi, h) - total_energy(model.phi, model.psi, g);
    if (std::abs(dE) > 50) continue;
    EXPECT_NEAR(std::min(a, b) / std::max(a, b), std::exp(-model.beta * std::abs(dE)), 1e-8);
  }
}

TEST(Acceptance, IllegalStates) {
  const TorusDomain dom({1.0, 1.0});
  const ModelSpec model{dom, 1.0, 1.0, hard_core(0.3), zero_field(dom)};
  const auto bad = Configuration::from_coordinates(dom, {{0.5, 0.5}, {0.6, 0.5}});
  EXPECT_EQ(death_acceptance(model, {}, bad, 0), 1.0);
  EXPECT_EQ(birth_acceptance(model, {}, bad, dom.point({0.1, 0.1})), 0.0);
  auto state = ChainState::from(model, bad, 3);
  EXPECT_TRUE(std::isinf(state.current_energy));
  // Births are refused until the overlap is gone.
  for (int i = 0; i < 50; ++i) {
    gcmc_step(state, model, {0.5, 0.5, 0.0});
    if (std::isinf(state.current_energy)) ASSERT_LE(state.config.size(), 2u);
    else break;
  }
  EXPECT_EQ(state.config.size(), 1u);
  EXPECT_EQ(state.current_energy, 0.0);
}

TEST(Chain, HardCoreLargerThanDiagonalKeepsOnePoint) {
  const TorusDomain dom({1.0, 1.0});
  const ModelSpec model{dom, 5.0, 1.0, hard_core(0.8), zero_field(dom)};
  ChainParams p;
  p.sweeps = 3000;
  p.burn_in = 100;
  p.record_trace = true;
  const auto r = run_chain(model, p, {count_obs()});
  std::size_t ones = 0;
  for (const auto& rec : r.trace->records) {
    ASSERT_LE(rec.n, 1u);
    ones += rec.n;
  }
  // P(n = 1) = zV / (1 + zV).
  const double frac = static_cast<double>(ones) / static_cast<double>(r.trace->records.size());
  EXPECT_NEAR(frac, 5.0 / 6.0, 0.05);
}

TEST(Chain, PoissonCountDistribution) {
  const TorusDomain dom({2.0, 1.0});
  const double z = 1.5, mu = z * dom.volume();
  ChainParams p;
  p.sweeps = 40000;
  p.burn_in = 1000;
  std::vector<Observable> obs{count_obs()};
  for (int k = 0; k <= 6; ++k)
    obs.push_back({"n==" + std::to_string(k), [k](const Configuration& g) { return g.size() == static_cast<std::size_t>(k) ? 1.0 : 0.0; }});
  const auto runs = run_chains(poisson(dom, z), p, obs, 77, 4, 1);
  const auto est = merge_estimates(runs);
  EXPECT_LT(std::abs(est[0].mean - mu) / est[0].std_error, 4.0) << est[0].mean;
  for (int k = 0; k <= 6; ++k) {
    const auto& e = est[static_cast<std::size_t>(k + 1)];
    EXPECT_LT(std::abs(e.mean - stats::poisson_pmf(static_cast<std::size_t>(k), mu)) / e.std_error, 4.5) << k;
  }
}

TEST(Chain, CampbellFormulaForPoisson) {
  const TorusDomain dom({2.0, 2.0});
  const double z = 0.75;
  const Bump b = Bump::make(dom, std::vector<double>{0.5, 1.5}, 0.8, 2.0);
  // Midpoint rule on a fine grid.
  double integral = 0.0;
  const int m = 400;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      integral += b.value(dom, dom.point({(i + 0.5) * 2.0 / m, (j + 0.5) * 2.0 / m}));
  integral *= 4.0 / (m * m);
  ChainParams p;
  p.sweeps = 30000;
  p.burn_in = 1000;
  const Observable f{"f", [&](const Configuration& g) { return pair_sum([&](const Point& x) { return b.value(dom, x); }, g); }};
  const auto est = merge_estimates(run_chains(poisson(dom, z), p, {f}, 5, 4));
  EXPECT_LT(std::abs(est[0].mean - z * integral) / est[0].std_error, 4.0) << est[0].mean << " vs " << z * integral;
}

TEST(Chain, Deterministic) {
  const auto model = lj_bump();
  ChainParams p;
  p.sweeps = 2000;
  p.burn_in = 200;
  p.record_trace = true;
  const auto a = run_chain(model, p, {count_obs()});
  const auto b = run_chain(model, p, {count_obs()});
  EXPECT_EQ(a.estimates[0].mean, b.estimates[0].mean);
  EXPECT_EQ(a.energy.mean, b.energy.mean);
  EXPECT_EQ(a.final_config, b.final_config);
  EXPECT_EQ(a.stats.accepted, b.stats.accepted);
  std::ostringstream ta, tb;
  write_trace_csv(ta, *a.trace);
  write_trace_csv(tb, *b.trace);
  EXPECT_EQ(ta.str(), tb.str());

  const auto one = run_chains(model, p, {count_obs()}, 9, 3, 1);
  const auto three = run_chains(model, p, {count_obs()}, 9, 3, 3);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(one[i].seed, derive_seed(9, i));
    EXPECT_EQ(one[i].final_config, three[i].final_config);
    EXPECT_EQ(one[i].estimates[0].mean, three[i].estimates[0].mean);
  }
  p.seed = 2;
  EXPECT_NE(run_chain(model, p, {count_obs()}).final_config, a.final_config);
}

TEST(Chain, PureStepMatchesInPlace) {
  const auto model = lj_bump();
  auto s = ChainState::initial(model, 11);
  for (int i = 0; i < 500; ++i) {
    const ChainState next = gcmc_step(std::as_const(s), model, MoveMix{});
    gcmc_step(s, model, MoveMix{});
    ASSERT_EQ(next.config, s.config);
    ASSERT_EQ(next.current_energy, s.current_energy);
  }
  resync_energy(s, model);
  EXPECT_LT(s.stats.max_energy_drift, 1e-9);
}

TEST(Chain, SweepLengthFixedAfterBurnIn) {
  const TorusDomain dom({2.0, 2.0});
  ChainParams p;
  p.sweeps = 500;
  p.burn_in = 100;
  const auto r = run_chain(poisson(dom, 2.0), p, {});
  EXPECT_EQ(r.samples, p.samples());
  EXPECT_GE(r.sweep_length, 5u);
  EXPECT_LE(r.sweep_length, 12u);
  EXPECT_THROW((void)run_chain(poisson(dom, 2.0), ChainParams{.sweeps = 10, .burn_in = 10}, {}), std::invalid_argument);
}

TEST(Chain, NonFiniteObservableAborts) {
  const TorusDomain dom({1.0, 1.0});
  ChainParams p;
  p.sweeps = 200;
  p.burn_in = 10;
  const Observable bad{"bad", [](const Configuration& g) { return g.empty() ? 0.0 : std::nan(""); }};
  EXPECT_THROW((void)run_chain(poisson(dom, 3.0), p, {bad}), ObservableError);
  try {
    (void)run_chain(poisson(dom, 3.0), p, {bad});
  } catch (const ObservableError& e) {
    EXPECT_NE(std::string(e.what()).find("bad"), std::string::npos);
    EXPECT_FALSE(e.configuration().empty());
  }
}

TEST(Output, TraceCsvLayout) {
  const TorusDomain dom({1.0, 1.0});
  ChainParams p;
  p.sweeps = 120;
  p.burn_in = 20;
  p.thin = 3;
  p.record_trace = true;
  const auto r = run_chain(poisson(dom, 2.0), p, {count_obs()});
  std::ostringstream os;
  write_trace_csv(os, *r.trace);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "step,n,energy,n");
  std::size_t rows = 0;
  while (std::getline(is, line)) ++rows;
  EXPECT_EQ(rows, p.samples());
  EXPECT_EQ(rows, 34u);
}

TEST(Output, SnapshotRoundTrip) {
  Rng rng(12);
  for (std::size_t d = 1; d <= 3; ++d) {
    const TorusDomain dom(std::vector<double>(d, 1.3));
    std::vector<Configuration> cs;
    for (int k = 0; k < 5; ++k) {
      Configuration g(dom);
      for (std::size_t i = 0; i < static_cast<std::size_t>(k * 3); ++i) {
        std::vector<double> c(d);
        for (auto& v : c) v = rng.uniform(0, 1.3);
        const Point q = dom.point(c);
        if (g.can_insert(q)) g.insert(q);
      }
      cs.push_back(g);
    }
    std::stringstream ss;
    write_snapshots(ss, cs);
    const auto back = read_snapshots(ss, dom);
    ASSERT_EQ(back.size(), cs.size());
    // Ticks carry 64 bits and the file 53; points come back within a few ulps.
    for (std::size_t k = 0; k < cs.size(); ++k) {
      ASSERT_EQ(back[k].size(), cs[k].size());
      for (std::size_t i = 0; i < cs[k].size(); ++i)
        for (std::size_t a = 0; a < d; ++a)
          EXPECT_NEAR(dom.coord(back[k][i], a), dom.coord(cs[k][i], a), 1e-15);
    }
  }
}

TEST(Diagnose, PoissonIntensityNearOne) {
  const TorusDomain dom({2.0, 2.0});
  const auto model = poisson(dom, 0.3);
  ChainParams p;
  p.sweeps = 20000;
  p.burn_in = 500;
  p.record_trace = true;
  p.keep_configurations = true;
  const auto runs = run_chains(model, p, {}, 3, 4);
  const auto rep = diagnose(model, runs);
  EXPECT_GE(rep.xi_hat, 0.8);
  EXPECT_LE(rep.xi_hat, 1.25);
  EXPECT_EQ(rep.histogram.size(), 16u);
  std::size_t empty = 0, total = 0;
  for (const auto& r : runs)
    for (const auto& rec : r.trace->records) {
      empty += rec.n == 0;
      ++total;
    }
  EXPECT_EQ(rep.samples, total);
  EXPECT_EQ(rep.empty_samples, empty);
  // P(n = 0) = e^{-1.2}.
  EXPECT_NEAR(static_cast<double>(empty) / static_cast<double>(total), std::exp(-1.2), 0.03);
  for (const auto& bin : rep.histogram) EXPECT_NEAR(bin.reference, 0.3 * 0.25, 1e-12);
}

TEST(Diagnose, RepulsionLowersIntensity) {
  const TorusDomain dom({2.0, 2.0});
  const ModelSpec model{dom, 3.0, 1.0, soft_sphere(1.0, 0.5, 1.0), zero_field(dom)};
  ChainParams p;
  p.sweeps = 8000;
  p.burn_in = 500;
  p.record_trace = true;
  p.keep_configurations = true;
  const auto rep = diagnose(model, run_chains(model, p, {}, 4, 4));
  EXPECT_LE(rep.xi_hat, 1.0 + 3.0 * rep.xi_std_error);
  EXPECT_LT(rep.xi_hat, 0.9);
}

TEST(Diagnose, RequiresConfigurations) {
  const TorusDomain dom({1.0, 1.0});
  EXPECT_THROW((void)diagnose(poisson(dom, 1.0), Trace{}), std::invalid_argument);
}
