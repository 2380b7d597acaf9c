#include "gibbslab/config_space.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace gibbslab {

namespace {

// Coordinates are decoded from the top 53 bits so the result is exact before
// the final scaling by the side length.
double ticks_to_fraction(std::uint64_t t) { return std::ldexp(static_cast<double>(t >> 11), -53); }

double signed_ticks_to_fraction(std::uint64_t t) {
  const auto s = static_cast<std::int64_t>(t);
  return std::ldexp(static_cast<double>(s >> 11), -53);
}

std::uint64_t fraction_to_ticks(double x) {
  double frac = x - std::floor(x);
  if (!(frac < 1.0)) frac = 0.0;
  return static_cast<std::uint64_t>(std::ldexp(frac, 64));
}

} // namespace

TorusDomain::TorusDomain(std::vector<double> sides) {
  if (sides.empty() || sides.size() > kMaxDim)
    throw std::invalid_argument("torus dimension must be between 1 and 3");
  for (double s : sides)
    if (!(s > 0.0) || !std::isfinite(s)) throw std::invalid_argument("torus sides must be positive and finite");
  dim_ = sides.size();
  side_ = {1.0, 1.0, 1.0};
  std::copy(sides.begin(), sides.end(), side_.begin());
}

double TorusDomain::volume() const {
  double v = 1.0;
  for (std::size_t i = 0; i < dim_; ++i) v *= side_[i];
  return v;
}

double TorusDomain::min_side() const {
  return *std::min_element(side_.begin(), side_.begin() + static_cast<std::ptrdiff_t>(dim_));
}

Point TorusDomain::point(std::span<const double> coords) const {
  if (coords.size() != dim_) throw std::invalid_argument("point dimension does not match the domain");
  Point p;
  for (std::size_t i = 0; i < dim_; ++i) {
    if (!std::isfinite(coords[i])) throw std::invalid_argument("non-finite coordinate");
    p.ticks[i] = fraction_to_ticks(coords[i] / side_[i]);
  }
  return p;
}

double TorusDomain::coord(const Point& p, std::size_t i) const {
  const double c = side_[i] * ticks_to_fraction(p.ticks[i]);
  return c < side_[i] ? c : std::nextafter(side_[i], 0.0);
}

Vec TorusDomain::position(const Point& p) const {
  Vec v{};
  for (std::size_t i = 0; i < dim_; ++i) v[i] = coord(p, i);
  return v;
}

Vec TorusDomain::displacement(const Point& x, const Point& y) const {
  Vec v{};
  for (std::size_t i = 0; i < dim_; ++i) v[i] = side_[i] * signed_ticks_to_fraction(x.ticks[i] - y.ticks[i]);
  return v;
}

Shift TorusDomain::shift(std::span<const double> v) const {
  if (v.size() != dim_) throw std::invalid_argument("shift dimension does not match the domain");
  Shift s;
  for (std::size_t i = 0; i < dim_; ++i) {
    if (!std::isfinite(v[i])) throw std::invalid_argument("non-finite shift");
    // Quantize |v| and negate afterwards so that shift(-v) == -shift(v).
    const double g = std::fmod(std::abs(v[i]) / side_[i], 1.0);
    const double t = std::nearbyint(std::ldexp(g, 64));
    const std::uint64_t k = t >= 0x1.0p64 ? 0 : static_cast<std::uint64_t>(t);
    s.ticks[i] = v[i] < 0.0 ? std::uint64_t{0} - k : k;
  }
  return s;
}

Point TorusDomain::translate(const Point& p, const Shift& s) const {
  Point q = p;
  for (std::size_t i = 0; i < dim_; ++i) q.ticks[i] += s.ticks[i];
  return q;
}

// --- Configuration ---------------------------------------------------------

namespace {

bool simple(const TorusDomain& domain, const std::vector<Point>& pts) {
  const double thr2 = domain.simplicity_threshold() * domain.simplicity_threshold();
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j)
      if (domain.distance2(pts[i], pts[j]) < thr2) return false;
  return true;
}

} // namespace

Configuration::Configuration(TorusDomain domain, std::vector<Point> points)
    : domain_(std::move(domain)), points_(std::move(points)) {
  std::sort(points_.begin(), points_.end());
  if (!simple(domain_, points_)) throw SimplicityError("configuration is not simple: two points coincide");
}

std::optional<Configuration> Configuration::try_make(const TorusDomain& domain, std::vector<Point> points) {
  std::sort(points.begin(), points.end());
  if (!simple(domain, points)) return std::nullopt;
  Configuration c(domain);
  c.points_ = std::move(points);
  return c;
}

Configuration Configuration::from_coordinates(const TorusDomain& domain, std::span<const double> flat) {
  const std::size_t d = domain.dim();
  if (flat.size() % d != 0) throw std::invalid_argument("flat coordinate array length is not a multiple of d");
  std::vector<Point> pts;
  pts.reserve(flat.size() / d);
  for (std::size_t i = 0; i < flat.size(); i += d) pts.push_back(domain.point(flat.subspan(i, d)));
  return {domain, std::move(pts)};
}

Configuration Configuration::from_coordinates(const TorusDomain& domain,
                                              std::initializer_list<std::initializer_list<double>> pts) {
  std::vector<Point> out;
  for (const auto& p : pts) out.push_back(domain.point(p));
  return {domain, std::move(out)};
}

bool Configuration::can_insert(const Point& p) const {
  const double thr2 = domain_.simplicity_threshold() * domain_.simplicity_threshold();
  return std::none_of(points_.begin(), points_.end(),
                      [&](const Point& q) { return domain_.distance2(p, q) < thr2; });
}

bool Configuration::contains(const Point& p) const { return std::binary_search(points_.begin(), points_.end(), p); }

std::size_t Configuration::insert(const Point& p) {
  if (!can_insert(p)) throw SimplicityError("inserted point coincides with an existing point");
  const auto it = std::lower_bound(points_.begin(), points_.end(), p);
  const auto idx = static_cast<std::size_t>(it - points_.begin());
  points_.insert(it, p);
  return idx;
}

void Configuration::erase(std::size_t index) {
  if (index >= points_.size()) throw std::out_of_range("configuration index");
  points_.erase(points_.begin() + static_cast<std::ptrdiff_t>(index));
}

std::size_t Configuration::replace(std::size_t index, const Point& p) {
  if (index >= points_.size()) throw std::out_of_range("configuration index");
  const Point old = points_[index];
  erase(index);
  try {
    return insert(p);
  } catch (...) {
    points_.insert(std::lower_bound(points_.begin(), points_.end(), old), old);
    throw;
  }
}

Configuration Configuration::without(std::size_t index) const {
  Configuration c = *this;
  c.erase(index);
  return c;
}

Configuration Configuration::united(const Configuration& other) const {
  if (!(other.domain_ == domain_)) throw std::invalid_argument("configurations live on different domains");
  std::vector<Point> pts = points_;
  pts.insert(pts.end(), other.points_.begin(), other.points_.end());
  return {domain_, std::move(pts)};
}

std::vector<double> Configuration::flat_coordinates() const {
  std::vector<double> out;
  out.reserve(points_.size() * domain_.dim());
  for (const Point& p : points_)
    for (std::size_t i = 0; i < domain_.dim(); ++i) out.push_back(domain_.coord(p, i));
  return out;
}

std::string Configuration::to_string() const {
  std::ostringstream os;
  os.precision(17);
  os << '{';
  for (std::size_t k = 0; k < points_.size(); ++k) {
    os << (k ? ", (" : "(");
    for (std::size_t i = 0; i < domain_.dim(); ++i) os << (i ? ", " : "") << domain_.coord(points_[k], i);
    os << ')';
  }
  os << '}';
  return os.str();
}

Configuration translate(const Configuration& gamma, const Shift& s) {
  const TorusDomain& dom = gamma.domain();
  // Exact tick arithmetic keeps every pairwise difference, hence simplicity.
  std::vector<Point> pts;
  pts.reserve(gamma.size());
  for (const Point& p : gamma) pts.push_back(dom.translate(p, s));
  return *Configuration::try_make(dom, std::move(pts));
}

Configuration translate(const Configuration& gamma, std::span<const double> v) {
  return translate(gamma, gamma.domain().shift(v));
}

Configuration translate(const Configuration& gamma, const Vec& v) {
  return translate(gamma, gamma.domain().shift(v));
}

std::int64_t temperedness_index(const Configuration& gamma, int l, double cell_edge) {
  if (l < 1) throw std::invalid_argument("temperedness block half-width l must be >= 1");
  if (!(cell_edge > 0.0)) throw std::invalid_argument("cell edge must be positive");
  const TorusDomain& dom = gamma.domain();
  const std::size_t d = dom.dim();
  for (std::size_t i = 0; i < d; ++i)
    if ((2.0 * l + 1.0) * cell_edge > dom.side(i))
      throw std::invalid_argument("temperedness cell grid does not fit the domain");

  const Point origin{};
  std::map<std::array<std::int64_t, kMaxDim>, std::int64_t> counts;
  for (const Point& p : gamma) {
    const Vec x = dom.displacement(p, origin);
    std::array<std::int64_t, kMaxDim> r{};
    bool inside = true;
    for (std::size_t i = 0; i < d; ++i) {
      r[i] = static_cast<std::int64_t>(std::ceil(x[i] / cell_edge - 0.5));
      if (r[i] < -l || r[i] > l) inside = false;
    }
    if (inside) ++counts[r];
  }
  std::int64_t sum = 0;
  for (const auto& [cell, n] : counts) sum += n * n;
  std::int64_t block = 1;
  for (std::size_t i = 0; i < d; ++i) block *= 2 * l + 1;

  const std::int64_t q = (sum + block - 1) / block;
  auto n = static_cast<std::int64_t>(std::sqrt(static_cast<double>(q)));
  while (n * n < q) ++n;
  while (n > 0 && (n - 1) * (n - 1) >= q) --n;
  return std::max<std::int64_t>(1, n);
}

// --- Test fields -----------------------------------------------------------

Bump Bump::make(const TorusDomain& domain, std::span<const double> center, double radius, double scale) {
  if (!(radius > 0.0) || !(radius < 0.5 * domain.min_side()))
    throw std::invalid_argument("bump radius must lie in (0, min_side / 2)");
  if (!std::isfinite(scale)) throw std::invalid_argument("bump scale must be finite");
  return Bump{domain.point(center), radius, scale};
}

double Bump::value(const TorusDomain& domain, const Point& x) const {
  const double q = 1.0 - domain.distance2(x, center) / (radius * radius);
  if (q <= 0.0) return 0.0;
  return scale * std::exp(1.0 - 1.0 / q);
}

Vec Bump::gradient(const TorusDomain& domain, const Point& x) const {
  const Vec u = domain.displacement(x, center);
  const double rho2 = radius * radius;
  const double q = 1.0 - norm2(u) / rho2;
  Vec g{};
  if (q <= 0.0) return g;
  const double f = scale * std::exp(1.0 - 1.0 / q);
  const double c = -2.0 * f / (q * q * rho2);
  for (std::size_t i = 0; i < kMaxDim; ++i) g[i] = c * u[i];
  return g;
}

TestField::TestField(TorusDomain domain, std::vector<TestComponent> components)
    : domain_(std::move(domain)), components_(std::move(components)) {
  for (const auto& c : components_)
    if (const auto* b = std::get_if<Bump>(&c))
      if (!(b->radius < 0.5 * domain_.min_side())) throw std::invalid_argument("bump support exceeds half the torus");
}

double TestField::value(std::size_t j, const Point& x) const {
  return std::visit(
      [&](const auto& c) -> double {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, Bump>) return c.value(domain_, x);
        else return c.value;
      },
      components_.at(j));
}

Vec TestField::gradient(std::size_t j, const Point& x) const {
  return std::visit(
      [&](const auto& c) -> Vec {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, Bump>) return c.gradient(domain_, x);
        else return Vec{};
      },
      components_.at(j));
}

std::vector<double> TestField::pair_sums(const Configuration& gamma) const {
  std::vector<double> s(components_.size(), 0.0);
  for (std::size_t j = 0; j < components_.size(); ++j)
    s[j] = pair_sum([&](const Point& x) { return value(j, x); }, gamma);
  return s;
}

std::vector<Vec> TestField::gradient_sums(const Configuration& gamma) const {
  std::vector<Vec> s(components_.size(), Vec{});
  for (std::size_t j = 0; j < components_.size(); ++j)
    for (const Point& x : gamma) {
      const Vec g = gradient(j, x);
      for (std::size_t i = 0; i < kMaxDim; ++i) s[j][i] += g[i];
    }
  return s;
}

TestField TestField::shifted(const Shift& s) const {
  TestField out = *this;
  for (auto& c : out.components_)
    if (auto* b = std::get_if<Bump>(&c)) b->center = domain_.translate(b->center, s);
  return out;
}

bool TestField::in_support(const Point& x) const {
  for (const auto& c : components_) {
    if (std::holds_alternative<UniformComponent>(c)) return true;
    const auto& b = std::get<Bump>(c);
    if (domain_.distance2(x, b.center) <= b.radius * b.radius) return true;
  }
  return false;
}

} // namespace gibbslab
