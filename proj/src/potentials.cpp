#include "gibbslab/potentials.hpp"

#include <algorithm>
#include <stdexcept>

namespace gibbslab {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

double lj_raw(double epsilon, double sigma, double r2) {
  if (r2 == 0.0) return kInfiniteEnergy;
  const double s2 = sigma * sigma / r2;
  if (s2 > 1e25) return kInfiniteEnergy;
  const double s6 = s2 * s2 * s2;
  return 4.0 * epsilon * (s6 * s6 - s6);
}

} // namespace

Envelope power_envelope(double c, std::size_t dim) {
  const double p = static_cast<double>(dim) + 1.0;
  return {[c, p](double r) { return r <= 1.0 ? c : c * std::pow(r, -p); },
          "power(c=" + std::to_string(c) + ",d=" + std::to_string(dim) + ")"};
}

Envelope step_envelope(double level, double radius) {
  return {[level, radius](double r) { return r <= radius ? level : 0.0; },
          "step(level=" + std::to_string(level) + ",radius=" + std::to_string(radius) + ")"};
}

PairPotential::PairPotential(Model model, std::string label, std::optional<StabilityConstants> claimed,
                             std::optional<Envelope> envelope)
    : model_(std::move(model)), label_(std::move(label)), claimed_(claimed), envelope_(std::move(envelope)) {
  std::visit(overloaded{
                 [&](const NoInteraction&) {},
                 [&](const LennardJones& m) {
                   if (!(m.sigma > 0.0 && m.cutoff > 0.0 && m.epsilon >= 0.0))
                     throw std::invalid_argument("invalid Lennard-Jones parameters");
                   cutoff_ = m.cutoff;
                 },
                 [&](const SoftSphere& m) {
                   if (!(m.sigma > 0.0 && m.cutoff > 0.0 && m.epsilon >= 0.0))
                     throw std::invalid_argument("invalid soft-sphere parameters");
                   cutoff_ = m.cutoff;
                 },
                 [&](const HardCore& m) {
                   if (!(m.diameter > 0.0)) throw std::invalid_argument("hard-core diameter must be positive");
                   cutoff_ = m.diameter;
                   hard_core_ = m.diameter;
                 },
                 [&](const GaussianWell& m) {
                   if (!(m.width > 0.0 && m.cutoff > 0.0)) throw std::invalid_argument("invalid Gaussian parameters");
                   cutoff_ = m.cutoff;
                 },
                 [&](const TabulatedRadial& m) {
                   if (m.radii.size() < 2 || m.radii.size() != m.values.size())
                     throw std::invalid_argument("tabulated potential needs matching radii/values, at least two");
                   if (!std::is_sorted(m.radii.begin(), m.radii.end()) || m.radii.front() < 0.0 ||
                       std::adjacent_find(m.radii.begin(), m.radii.end()) != m.radii.end())
                     throw std::invalid_argument("tabulated radii must be strictly increasing and non-negative");
                   cutoff_ = m.radii.back();
                   hard_core_ = m.radii.front();
                 },
             },
             model_);
}

double PairPotential::at_r2(double r2) const {
  return std::visit(overloaded{
                        [](const NoInteraction&) { return 0.0; },
                        [r2](const LennardJones& m) {
                          if (r2 > m.cutoff * m.cutoff) return 0.0;
                          return lj_raw(m.epsilon, m.sigma, r2) - m.shift;
                        },
                        [r2](const SoftSphere& m) {
                          if (r2 > m.cutoff * m.cutoff) return 0.0;
                          if (r2 == 0.0) return kInfiniteEnergy;
                          const double s2 = m.sigma * m.sigma / r2;
                          const double s6 = s2 * s2 * s2;
                          return m.epsilon * s6 * s6;
                        },
                        [r2](const HardCore& m) { return r2 < m.diameter * m.diameter ? kInfiniteEnergy : 0.0; },
                        [r2](const GaussianWell& m) {
                          if (r2 > m.cutoff * m.cutoff) return 0.0;
                          return -m.depth * std::exp(-r2 / (m.width * m.width));
                        },
                        [r2](const TabulatedRadial& m) {
                          const double r = std::sqrt(r2);
                          if (r < m.radii.front()) return kInfiniteEnergy;
                          if (r > m.radii.back()) return 0.0;
                          const auto it = std::upper_bound(m.radii.begin(), m.radii.end(), r);
                          if (it == m.radii.end()) return m.values.back();
                          const auto j = static_cast<std::size_t>(it - m.radii.begin());
                          const double t = (r - m.radii[j - 1]) / (m.radii[j] - m.radii[j - 1]);
                          return (1.0 - t) * m.values[j - 1] + t * m.values[j];
                        },
                    },
                    model_);
}

PairPotential zero_pair_potential() { return {}; }

double radial_minimum(const PairPotential& phi) {
  if (phi.is_zero() || phi.cutoff() <= 0.0) return 0.0;
  constexpr int kSteps = 200000;
  const double lo = phi.hard_core_radius();
  const double hi = phi.cutoff();
  double m = 0.0;
  for (int i = 0; i <= kSteps; ++i) {
    const double r = lo + (hi - lo) * (static_cast<double>(i) + 0.5) / (kSteps + 1);
    const double v = phi.radial(r);
    if (std::isfinite(v)) m = std::min(m, v);
  }
  return m;
}

PairPotential lennard_jones_truncated(double epsilon, double sigma, double cutoff, std::size_t dim,
                                      std::optional<double> stability_b) {
  LennardJones m{epsilon, sigma, cutoff, 0.0};
  m.shift = lj_raw(epsilon, sigma, cutoff * cutoff);
  double per_eps = 9.0;
  if (dim == 1) per_eps = 1.1;
  else if (dim == 2) per_eps = 3.5;
  const double b = stability_b.value_or(per_eps * epsilon);
  // Lower envelope: the well depth below the cutoff.
  const double well = epsilon - m.shift;
  return {m, "lj-truncated", StabilityConstants{0.0, b}, step_envelope(well, cutoff)};
}

PairPotential soft_sphere(double epsilon, double sigma, double cutoff) {
  return {SoftSphere{epsilon, sigma, cutoff}, "soft-sphere", StabilityConstants{0.0, 0.0}, step_envelope(0.0, cutoff)};
}

PairPotential hard_core(double diameter) {
  return {HardCore{diameter}, "hard-core", StabilityConstants{0.0, 0.0}, step_envelope(0.0, diameter)};
}

PairPotential gaussian_attractive(double depth, double width) {
  return {GaussianWell{depth, width, 6.0 * width}, "gaussian-attractive", std::nullopt,
          step_envelope(depth, 6.0 * width)};
}

PairPotential tabulated_pair_potential(std::vector<double> radii, std::vector<double> values,
                                       std::optional<StabilityConstants> claimed) {
  return {TabulatedRadial{std::move(radii), std::move(values)}, "tabulated", claimed};
}

// --- one-body --------------------------------------------------------------

OneBodyPotential::OneBodyPotential(TorusDomain domain, Model model, std::string label)
    : domain_(std::move(domain)), model_(std::move(model)), label_(std::move(label)) {
  std::visit(overloaded{
                 [&](const ZeroField&) { lower_bound_ = 0.0; },
                 [&](const ConstantField& m) {
                   if (!std::isfinite(m.value)) throw std::invalid_argument("constant field must be finite");
                   lower_bound_ = std::max(0.0, -m.value);
                 },
                 [&](const BumpField& m) {
                   if (!(m.bump.radius < 0.5 * domain_.min_side()))
                     throw std::invalid_argument("bump support exceeds half the torus");
                   lower_bound_ = std::max(0.0, -m.height);
                 },
                 [&](const SingularPower& m) {
                   if (m.k < 1) throw std::invalid_argument("singular exponent k must be >= 1");
                   if (!(m.radius > 0.0 && m.radius < 0.5 * domain_.min_side()))
                     throw std::invalid_argument("singular field radius must lie in (0, min_side / 2)");
                   if (!(m.strength >= 0.0)) throw std::invalid_argument("singular field strength must be >= 0");
                   lower_bound_ = 0.0;
                   singular_.push_back(m.center);
                 },
             },
             model_);
}

double OneBodyPotential::evaluate(const Point& x) const {
  return std::visit(overloaded{
                        [](const ZeroField&) { return 0.0; },
                        [](const ConstantField& m) { return m.value; },
                        [&](const BumpField& m) {
                          const double q = 1.0 - domain_.distance2(x, m.bump.center) / (m.bump.radius * m.bump.radius);
                          return q <= 0.0 ? 0.0 : m.height * std::exp(1.0 - 1.0 / q);
                        },
                        [&](const SingularPower& m) {
                          const double r2 = domain_.distance2(x, m.center);
                          if (r2 >= m.radius * m.radius) return 0.0;
                          if (r2 == 0.0) return kInfiniteEnergy;
                          const double v = std::pow(r2, -0.5 * m.k) - std::pow(m.radius, -m.k);
                          return m.strength * v;
                        },
                    },
                    model_);
}

Vec OneBodyPotential::gradient(const Point& x) const {
  return std::visit(overloaded{
                        [](const ZeroField&) { return Vec{}; },
                        [](const ConstantField&) { return Vec{}; },
                        [&](const BumpField& m) {
                          const Vec u = domain_.displacement(x, m.bump.center);
                          const double rho2 = m.bump.radius * m.bump.radius;
                          const double q = 1.0 - norm2(u) / rho2;
                          Vec g{};
                          if (q <= 0.0) return g;
                          const double c = -2.0 * m.height * std::exp(1.0 - 1.0 / q) / (q * q * rho2);
                          for (std::size_t i = 0; i < kMaxDim; ++i) g[i] = c * u[i];
                          return g;
                        },
                        [&](const SingularPower& m) {
                          const Vec u = domain_.displacement(x, m.center);
                          const double r2 = norm2(u);
                          Vec g{};
                          if (r2 >= m.radius * m.radius) return g;
                          if (r2 == 0.0) {
                            g.fill(std::numeric_limits<double>::quiet_NaN());
                            return g;
                          }
                          // d/dx r^{-k} = -k r^{-k-2} u
                          const double c = -m.strength * m.k * std::pow(r2, -0.5 * m.k - 1.0);
                          for (std::size_t i = 0; i < kMaxDim; ++i) g[i] = c * u[i];
                          return g;
                        },
                    },
                    model_);
}

OneBodyPotential zero_field(const TorusDomain& domain) { return {domain, ZeroField{}, "psi-zero"}; }

OneBodyPotential constant_field(const TorusDomain& domain, double value) {
  return {domain, ConstantField{value}, "psi-const"};
}

OneBodyPotential bump_field(const TorusDomain& domain, std::span<const double> center, double radius, double height) {
  return {domain, BumpField{Bump::make(domain, center, radius, 1.0), height}, "psi-bump"};
}

OneBodyPotential singular_field(const TorusDomain& domain, std::span<const double> center, int k, double radius,
                                double strength) {
  return {domain, SingularPower{domain.point(center), k, radius, strength}, "psi-singular-k"};
}

// --- energies --------------------------------------------------------------

namespace {

/// Periodic cell list with at least three cells per axis, so the 3^d
/// neighbor stencil never visits a cell twice.
class CellList {
public:
  CellList(const TorusDomain& domain, double cutoff, std::span<const Point> points) : domain_(domain) {
    std::size_t total = 1;
    for (std::size_t i = 0; i < domain.dim(); ++i) {
      ncell_[i] = static_cast<std::size_t>(std::floor(domain.side(i) / cutoff));
      total *= ncell_[i];
    }
    head_.assign(total, kNone);
    next_.assign(points.size(), kNone);
    for (std::size_t p = points.size(); p-- > 0;) {
      const std::size_t c = flat(cell_of(points[p]));
      next_[p] = head_[c];
      head_[c] = p;
    }
  }

  static bool applicable(const TorusDomain& domain, double cutoff) {
    if (!(cutoff > 0.0)) return false;
    for (std::size_t i = 0; i < domain.dim(); ++i)
      if (domain.side(i) < 3.0 * cutoff) return false;
    return true;
  }

  template <typename Fn>
  void for_each_neighbor_cell_member(const Point& x, Fn&& fn) const {
    const auto c = cell_of(x);
    const std::size_t d = domain_.dim();
    std::array<long, kMaxDim> off{};
    const long span = 3;
    long combos = 1;
    for (std::size_t i = 0; i < d; ++i) combos *= span;
    for (long k = 0; k < combos; ++k) {
      long rem = k;
      std::array<std::size_t, kMaxDim> cc{};
      for (std::size_t i = 0; i < d; ++i) {
        off[i] = rem % span - 1;
        rem /= span;
        const long n = static_cast<long>(ncell_[i]);
        cc[i] = static_cast<std::size_t>(((static_cast<long>(c[i]) + off[i]) % n + n) % n);
      }
      for (std::size_t p = head_[flat(cc)]; p != kNone; p = next_[p]) fn(p);
    }
  }

private:
  static constexpr std::size_t kNone = static_cast<std::size_t>(-1);

  std::array<std::size_t, kMaxDim> cell_of(const Point& p) const {
    std::array<std::size_t, kMaxDim> c{};
    for (std::size_t i = 0; i < domain_.dim(); ++i) {
      // Top bits of the tick count index the cell directly.
      const auto n = static_cast<unsigned __int128>(ncell_[i]);
      c[i] = static_cast<std::size_t>((static_cast<unsigned __int128>(p.ticks[i]) * n) >> 64);
    }
    return c;
  }

  std::size_t flat(const std::array<std::size_t, kMaxDim>& c) const {
    std::size_t f = 0;
    for (std::size_t i = domain_.dim(); i-- > 0;) f = f * ncell_[i] + c[i];
    return f;
  }

  const TorusDomain& domain_;
  std::array<std::size_t, kMaxDim> ncell_{1, 1, 1};
  std::vector<std::size_t> head_;
  std::vector<std::size_t> next_;
};

} // namespace

double pair_energy_all_pairs(const PairPotential& phi, const Configuration& gamma) {
  if (phi.is_zero()) return 0.0;
  const auto& dom = gamma.domain();
  const auto pts = gamma.points();
  double e = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      const double v = phi.at_r2(dom.distance2(pts[i], pts[j]));
      if (v == kInfiniteEnergy) return kInfiniteEnergy;
      e += v;
    }
  return e;
}

double pair_energy(const PairPotential& phi, const Configuration& gamma) {
  if (phi.is_zero() || gamma.size() < 2) return 0.0;
  const auto& dom = gamma.domain();
  if (!CellList::applicable(dom, phi.cutoff())) return pair_energy_all_pairs(phi, gamma);
  const auto pts = gamma.points();
  const CellList cells(dom, phi.cutoff(), pts);
  const double rc2 = phi.cutoff() * phi.cutoff();
  double e = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    bool infinite = false;
    cells.for_each_neighbor_cell_member(pts[i], [&](std::size_t j) {
      if (j <= i || infinite) return;
      const double r2 = dom.distance2(pts[i], pts[j]);
      if (r2 > rc2) return;
      const double v = phi.at_r2(r2);
      if (v == kInfiniteEnergy) infinite = true;
      else e += v;
    });
    if (infinite) return kInfiniteEnergy;
  }
  return e;
}

double cross_energy(const PairPotential& phi, const Configuration& eta, const Configuration& gamma) {
  if (!(eta.domain() == gamma.domain())) throw std::invalid_argument("configurations live on different domains");
  for (const Point& x : eta)
    if (gamma.contains(x)) throw std::invalid_argument("cross_energy requires disjoint configurations");
  if (phi.is_zero()) return 0.0;
  const auto& dom = eta.domain();
  double e = 0.0;
  for (const Point& x : eta)
    for (const Point& y : gamma) {
      const double v = phi.at_r2(dom.distance2(x, y));
      if (v == kInfiniteEnergy) return kInfiniteEnergy;
      e += v;
    }
  return e;
}

double insertion_energy(const PairPotential& phi, const OneBodyPotential& psi, const Configuration& gamma,
                        const Point& x) {
  double e = psi.evaluate(x);
  if (e == kInfiniteEnergy || phi.is_zero()) return e;
  const auto& dom = gamma.domain();
  const double rc2 = phi.cutoff() * phi.cutoff();
  for (const Point& y : gamma) {
    const double r2 = dom.distance2(x, y);
    if (r2 > rc2) continue;
    const double v = phi.at_r2(r2);
    if (v == kInfiniteEnergy) return kInfiniteEnergy;
    e += v;
  }
  return e;
}

double local_energy_at(const PairPotential& phi, const OneBodyPotential& psi, const Configuration& gamma,
                       std::size_t index, const Point& x) {
  double e = psi.evaluate(x);
  if (e == kInfiniteEnergy || phi.is_zero()) return e;
  const auto& dom = gamma.domain();
  const double rc2 = phi.cutoff() * phi.cutoff();
  const auto pts = gamma.points();
  for (std::size_t j = 0; j < pts.size(); ++j) {
    if (j == index) continue;
    const double r2 = dom.distance2(x, pts[j]);
    if (r2 > rc2) continue;
    const double v = phi.at_r2(r2);
    if (v == kInfiniteEnergy) return kInfiniteEnergy;
    e += v;
  }
  return e;
}

double local_energy(const PairPotential& phi, const OneBodyPotential& psi, const Configuration& gamma,
                    std::size_t index) {
  return local_energy_at(phi, psi, gamma, index, gamma[index]);
}

double one_body_energy(const OneBodyPotential& psi, const Configuration& gamma) {
  double e = 0.0;
  for (const Point& x : gamma) {
    const double v = psi.evaluate(x);
    if (v == kInfiniteEnergy) return kInfiniteEnergy;
    e += v;
  }
  return e;
}

double total_energy(const PairPotential& phi, const OneBodyPotential& psi, const Configuration& gamma) {
  const double a = one_body_energy(psi, gamma);
  if (a == kInfiniteEnergy) return a;
  const double b = pair_energy(phi, gamma);
  if (b == kInfiniteEnergy) return b;
  return a + b;
}

} // namespace gibbslab
