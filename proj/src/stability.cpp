#include "gibbslab/stability.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

#include "gibbslab/random.hpp"

namespace gibbslab {

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::pass: return "pass";
    case Verdict::fail: return "fail";
    case Verdict::inconclusive: return "inconclusive";
  }
  return "unknown";
}

std::int64_t cell_occupation_squares(const Configuration& gamma, double cell_edge) {
  const TorusDomain& dom = gamma.domain();
  const Point origin{};
  std::map<std::array<std::int64_t, kMaxDim>, std::int64_t> counts;
  for (const Point& p : gamma) {
    const Vec x = dom.displacement(p, origin);
    std::array<std::int64_t, kMaxDim> r{};
    for (std::size_t i = 0; i < dom.dim(); ++i) r[i] = static_cast<std::int64_t>(std::ceil(x[i] / cell_edge - 0.5));
    ++counts[r];
  }
  std::int64_t s = 0;
  for (const auto& [cell, n] : counts) s += n * n;
  return s;
}

double superstability_slack(const PairPotential& phi, const Configuration& gamma, double a, double b,
                            double cell_edge) {
  const double e = pair_energy_all_pairs(phi, gamma);
  if (e == kInfiniteEnergy) return kInfiniteEnergy;
  const double occ = static_cast<double>(cell_occupation_squares(gamma, cell_edge));
  return e - a * occ + b * static_cast<double>(gamma.size());
}

namespace {

struct Searcher {
  const PairPotential& phi;
  double a;
  double b;
  const SuperstabilitySearch& opt;
  TorusDomain domain;
  Rng rng;
  std::uint64_t used = 0;
  double best_slack = std::numeric_limits<double>::infinity();
  std::optional<Configuration> best;
  std::optional<Configuration> violation;

  Searcher(const PairPotential& p, double a_, double b_, const SuperstabilitySearch& o)
      : phi(p), a(a_), b(b_), opt(o), domain(make_domain(p, o)), rng(o.seed) {}

  static TorusDomain make_domain(const PairPotential& p, const SuperstabilitySearch& o) {
    // Large enough that clusters near the origin never see their own images.
    const double side = 4.0 * (32.0 * o.cell_edge + p.cutoff());
    return TorusDomain::cube(o.dim, side);
  }

  bool done() const { return violation.has_value() || used >= opt.budget; }

  double tolerance(const Configuration& c) const {
    return 1e-9 * (1.0 + b * static_cast<double>(c.size()) +
                   a * static_cast<double>(c.size() * c.size()));
  }

  /// Returns the slack, or +inf when the candidate is not a valid simple
  /// configuration.
  double evaluate(const std::vector<Vec>& coords) {
    if (coords.empty() || done()) return std::numeric_limits<double>::infinity();
    std::vector<Point> pts;
    pts.reserve(coords.size());
    for (const Vec& c : coords) pts.push_back(domain.point(c));
    auto cfg = Configuration::try_make(domain, std::move(pts));
    ++used;
    if (!cfg) return std::numeric_limits<double>::infinity();
    const double s = superstability_slack(phi, *cfg, a, b, opt.cell_edge);
    if (s < best_slack) {
      best_slack = s;
      best = *cfg;
    }
    if (s < -tolerance(*cfg)) violation = *cfg;
    return s;
  }

  Vec random_offset(double scale) {
    Vec v{};
    for (std::size_t i = 0; i < opt.dim; ++i) v[i] = rng.uniform(-scale, scale);
    return v;
  }

  std::vector<Vec> random_cluster() {
    const std::size_t n = 2 + rng.index(49);
    const double radius = opt.cell_edge * std::pow(10.0, rng.uniform(-3.0, 0.5));
    const Vec c = random_offset(opt.cell_edge);
    std::vector<Vec> out(n);
    for (auto& p : out) {
      const Vec u = random_offset(radius);
      for (std::size_t i = 0; i < opt.dim; ++i) p[i] = c[i] + u[i];
    }
    return out;
  }

  std::vector<Vec> lattice(bool triangular) {
    const std::size_t per_axis = opt.dim == 1 ? 2 + rng.index(63) : (opt.dim == 2 ? 2 + rng.index(7) : 2 + rng.index(3));
    const double spacing = opt.cell_edge * std::pow(10.0, rng.uniform(-2.0, 0.3));
    const Vec c = random_offset(opt.cell_edge);
    std::vector<Vec> out;
    std::size_t total = 1;
    for (std::size_t i = 0; i < opt.dim; ++i) total *= per_axis;
    for (std::size_t k = 0; k < total; ++k) {
      std::size_t rem = k;
      Vec p = c;
      std::array<std::size_t, kMaxDim> idx{};
      for (std::size_t i = 0; i < opt.dim; ++i) {
        idx[i] = rem % per_axis;
        rem /= per_axis;
      }
      for (std::size_t i = 0; i < opt.dim; ++i) p[i] += spacing * static_cast<double>(idx[i]);
      if (triangular && opt.dim >= 2) {
        p[0] += 0.5 * spacing * static_cast<double>(idx[1] % 2);
        p[1] = c[1] + spacing * std::sqrt(0.75) * static_cast<double>(idx[1]);
      }
      out.push_back(p);
    }
    return out;
  }

  void hill_climb(std::vector<Vec> state, std::uint64_t steps) {
    double current = evaluate(state);
    for (std::uint64_t s = 0; s < steps && !done(); ++s) {
      std::vector<Vec> trial = state;
      const double step = opt.cell_edge * std::pow(10.0, rng.uniform(-3.0, 0.0));
      const double u = rng.uniform();
      if (u < 0.6 || trial.size() < 2) {
        Vec& p = trial[rng.index(trial.size())];
        for (std::size_t i = 0; i < opt.dim; ++i) p[i] += step * rng.normal();
      } else if (u < 0.85 && trial.size() < opt.max_points) {
        Vec p = trial[rng.index(trial.size())];
        for (std::size_t i = 0; i < opt.dim; ++i) p[i] += step * rng.normal();
        trial.push_back(p);
      } else if (trial.size() > 2) {
        trial.erase(trial.begin() + static_cast<std::ptrdiff_t>(rng.index(trial.size())));
      }
      const double t = evaluate(trial);
      if (t <= current) {
        current = t;
        state = std::move(trial);
      }
    }
  }
};

} // namespace

StabilityReport check_superstability(const PairPotential& phi, double a, double b, const SuperstabilitySearch& search) {
  if (a < 0.0) throw std::invalid_argument("superstability constant a must be >= 0");
  if (b < 0.0) throw std::invalid_argument("superstability constant b must be >= 0");
  if (search.dim < 1 || search.dim > kMaxDim) throw std::invalid_argument("search dimension must be 1..3");
  Searcher s(phi, a, b, search);

  const std::uint64_t cluster_budget = search.budget / 3;
  while (!s.done() && s.used < cluster_budget) s.evaluate(s.random_cluster());
  const std::uint64_t lattice_budget = cluster_budget + search.budget / 6;
  while (!s.done() && s.used < lattice_budget) s.evaluate(s.lattice(s.rng.uniform() < 0.5));
  while (!s.done()) {
    std::vector<Vec> start;
    if (s.best && s.rng.uniform() < 0.5) {
      for (const Point& p : *s.best) start.push_back(s.domain.displacement(p, Point{}));
    } else {
      start = s.random_cluster();
    }
    s.hill_climb(std::move(start), 2000);
  }

  StabilityReport rep;
  rep.evaluations = s.used;
  if (s.violation) {
    rep.verdict = Verdict::fail;
    rep.witness = s.violation;
    rep.margin = superstability_slack(phi, *s.violation, a, b, search.cell_edge);
    rep.detail = "violation with n=" + std::to_string(s.violation->size());
  } else {
    rep.verdict = Verdict::inconclusive;
    rep.margin = s.best_slack;
    rep.detail = "no violation found";
  }
  return rep;
}

StabilityReport check_lower_regularity(const PairPotential& phi, const Envelope& theta, std::size_t n_radii,
                                       std::size_t dim, std::uint64_t seed) {
  if (n_radii < 2) throw std::invalid_argument("need at least two radii");
  if (dim < 1 || dim > kMaxDim) throw std::invalid_argument("dimension must be 1..3");
  const double reach = std::max(phi.cutoff(), 1.0);
  const double r_hi = 1.05 * reach;
  const double r_lo = phi.hard_core_radius() > 0.0 ? phi.hard_core_radius() * (1.0 + 1e-9) : 1e-4 * reach;

  std::vector<double> radii(n_radii);
  const double ratio = std::log(r_hi / r_lo);
  for (std::size_t k = 0; k < n_radii; ++k)
    radii[k] = r_lo * std::exp(ratio * static_cast<double>(k) / static_cast<double>(n_radii - 1));

  double prev = std::numeric_limits<double>::infinity();
  for (double r : radii) {
    const double t = theta.theta(r);
    if (!(t >= 0.0)) throw std::invalid_argument("envelope must be non-negative");
    if (t > prev * (1.0 + 1e-12) + 1e-300) throw std::invalid_argument("envelope must be decreasing");
    prev = t;
  }

  const auto slack = [&](double r) { return phi.radial(r) + theta.theta(r); };
  std::size_t worst = 0;
  double worst_slack = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < n_radii; ++k) {
    const double s = slack(radii[k]);
    if (s < worst_slack) {
      worst_slack = s;
      worst = k;
    }
  }
  // Golden-section refinement around the worst grid radius.
  double lo = radii[worst == 0 ? 0 : worst - 1];
  double hi = radii[std::min(worst + 1, n_radii - 1)];
  double best_r = radii[worst];
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  for (int it = 0; it < 80 && hi > lo; ++it) {
    const double m1 = hi - g * (hi - lo);
    const double m2 = lo + g * (hi - lo);
    if (slack(m1) < slack(m2)) hi = m2;
    else lo = m1;
  }
  if (slack(0.5 * (lo + hi)) < slack(best_r)) best_r = 0.5 * (lo + hi);

  // Random direction for the witness separation.
  Rng rng(seed);
  Vec dir{};
  double nrm = 0.0;
  while (nrm < 1e-12) {
    for (std::size_t i = 0; i < dim; ++i) dir[i] = rng.normal();
    nrm = std::sqrt(norm2(dir));
  }
  for (std::size_t i = 0; i < dim; ++i) dir[i] *= best_r / nrm;

  StabilityReport rep;
  rep.evaluations = n_radii + 160;
  {
    namespace q = boost::math::quadrature;
    std::vector<double> cuts{0.0, 1.0};
    if (phi.cutoff() > 0.0 && phi.cutoff() != 1.0) cuts.push_back(phi.cutoff());
    std::sort(cuts.begin(), cuts.end());
    const auto integrand = [&](double r) { return std::pow(r, static_cast<double>(dim) - 1.0) * theta.theta(r); };
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
      total += q::gauss_kronrod<double, 61>::integrate(integrand, cuts[i], cuts[i + 1], 12, 1e-10);
    total += q::gauss_kronrod<double, 61>::integrate(integrand, cuts.back(), std::numeric_limits<double>::infinity(),
                                                     12, 1e-10);
    rep.envelope_integral = total;
    if (!std::isfinite(total)) throw std::invalid_argument("envelope is not integrable against r^{d-1}");
  }

  const TorusDomain dom = TorusDomain::cube(dim, 4.0 * r_hi);
  const Configuration pair(dom, {Point{}, dom.point(dir)});
  const Vec u = dom.displacement(pair[1], pair[0]);
  const double witness_slack = phi.evaluate(u) + theta.theta(std::sqrt(norm2(u)));
  const double tol = 1e-12 * (1.0 + std::abs(theta.theta(best_r)));
  if (witness_slack < -tol) {
    rep.verdict = Verdict::fail;
    rep.witness = pair;
    rep.margin = witness_slack;
    rep.detail = "phi below -theta at r=" + std::to_string(std::sqrt(norm2(u)));
  } else {
    rep.verdict = Verdict::inconclusive;
    rep.margin = std::min(worst_slack, witness_slack);
    rep.detail = "no violation found";
  }
  return rep;
}

namespace {

double midpoint_sum(const TorusDomain& domain, const std::function<double(const Point&)>& integrand,
                    std::size_t nodes) {
  const std::size_t d = domain.dim();
  std::size_t total = 1;
  for (std::size_t i = 0; i < d; ++i) total *= nodes;
  double sum = 0.0;
  std::vector<double> x(d);
  for (std::size_t k = 0; k < total; ++k) {
    std::size_t rem = k;
    for (std::size_t i = 0; i < d; ++i) {
      x[i] = (static_cast<double>(rem % nodes) + 0.5) * domain.side(i) / static_cast<double>(nodes);
      rem /= nodes;
    }
    const double v = integrand(domain.point(x));
    if (!std::isfinite(v)) throw std::domain_error("non-finite integrand at a quadrature node");
    sum += v;
  }
  return sum * domain.volume() / static_cast<double>(total);
}

} // namespace

QuadratureResult midpoint_integral(const TorusDomain& domain, const std::function<double(const Point&)>& integrand,
                                   const QuadratureSpec& spec) {
  if (spec.nodes_per_axis < 1) throw std::invalid_argument("need at least one node per axis");
  QuadratureResult r;
  const double coarse = midpoint_sum(domain, integrand, spec.nodes_per_axis);
  if (!spec.refine) {
    r.value = r.refined_value = coarse;
    return r;
  }
  r.refined_value = midpoint_sum(domain, integrand, 2 * spec.nodes_per_axis);
  r.value = r.refined_value;
  r.refinement_delta = std::abs(r.refined_value - coarse);
  return r;
}

QuadratureResult integrability_constant(const TorusDomain& domain, const std::function<double(const Point&)>& f,
                                        const std::function<double(const Point&)>& sigma_density,
                                        const QuadratureSpec& spec) {
  return midpoint_integral(
      domain,
      [&](const Point& x) {
        const double s = sigma_density(x);
        if (!(s >= 0.0) || !std::isfinite(s)) throw std::domain_error("sigma density must be finite and >= 0");
        const double fx = f(x);
        if (std::isnan(fx) || fx == std::numeric_limits<double>::infinity())
          throw std::domain_error("non-finite integrand at a quadrature node");
        return std::abs(std::exp(fx) - 1.0) * s;
      },
      spec);
}

} // namespace gibbslab
