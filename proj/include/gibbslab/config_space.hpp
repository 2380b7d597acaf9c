#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace gibbslab {

inline constexpr std::size_t kMaxDim = 3;

/// Real vector in the tangent space of the torus. Entries beyond the domain
/// dimension are zero.
using Vec = std::array<double, kMaxDim>;

inline double dot(const Vec& a, const Vec& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline double norm2(const Vec& a) { return dot(a, a); }

/// A point of the flat torus. Each coordinate is stored as a fraction of the
/// side length in units of 2^-64, so the fundamental cell [0, side) is the
/// full range of an unsigned 64-bit integer and translations are exact
/// modular additions. The lexicographic order of ticks equals the
/// lexicographic order of coordinates.
struct Point {
  std::array<std::uint64_t, kMaxDim> ticks{};

  auto operator<=>(const Point&) const = default;
};

/// Quantized displacement: ticks to add per axis (mod 2^64).
struct Shift {
  std::array<std::uint64_t, kMaxDim> ticks{};

  [[nodiscard]] Shift operator-() const {
    Shift s;
    for (std::size_t i = 0; i < kMaxDim; ++i) s.ticks[i] = std::uint64_t{0} - ticks[i];
    return s;
  }
  bool operator==(const Shift&) const = default;
};

class SimplicityError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Flat torus [0, L_1) x ... x [0, L_d), 1 <= d <= 3.
class TorusDomain {
public:
  TorusDomain() : TorusDomain(std::vector<double>{1.0}) {}
  explicit TorusDomain(std::vector<double> sides);

  static TorusDomain cube(std::size_t dim, double side) {
    return TorusDomain(std::vector<double>(dim, side));
  }

  [[nodiscard]] std::size_t dim() const { return dim_; }
  [[nodiscard]] double side(std::size_t i) const { return side_[i]; }
  [[nodiscard]] std::vector<double> sides() const { return {side_.begin(), side_.begin() + static_cast<std::ptrdiff_t>(dim_)}; }
  [[nodiscard]] double volume() const;
  [[nodiscard]] double min_side() const;

  /// Two points closer than this are treated as coincident.
  [[nodiscard]] double simplicity_threshold() const { return 0x1.0p-40 * min_side(); }

  /// Reduces arbitrary real coordinates modulo the sides.
  [[nodiscard]] Point point(std::span<const double> coords) const;
  [[nodiscard]] Point point(std::initializer_list<double> coords) const {
    return point(std::span<const double>(coords.begin(), coords.size()));
  }
  [[nodiscard]] Point point(const Vec& coords) const { return point(std::span<const double>(coords.data(), dim_)); }

  [[nodiscard]] double coord(const Point& p, std::size_t i) const;
  [[nodiscard]] Vec position(const Point& p) const;

  /// Representative of x - y with every component in [-L_i/2, L_i/2).
  [[nodiscard]] Vec displacement(const Point& x, const Point& y) const;
  [[nodiscard]] double distance2(const Point& x, const Point& y) const { return norm2(displacement(x, y)); }

  [[nodiscard]] Shift shift(std::span<const double> v) const;
  [[nodiscard]] Shift shift(const Vec& v) const { return shift(std::span<const double>(v.data(), dim_)); }
  [[nodiscard]] Point translate(const Point& p, const Shift& s) const;

  bool operator==(const TorusDomain&) const = default;

private:
  std::size_t dim_ = 1;
  std::array<double, kMaxDim> side_{1.0, 1.0, 1.0};
};

/// Finite simple configuration on a torus, kept in canonical lexicographic
/// order. Mutators are provided for the owner of a chain state; every
/// mutation re-establishes order and simplicity.
class Configuration {
public:
  Configuration() = default;
  explicit Configuration(TorusDomain domain) : domain_(std::move(domain)) {}
  Configuration(TorusDomain domain, std::vector<Point> points);

  static Configuration from_coordinates(const TorusDomain& domain, std::span<const double> flat);
  static Configuration from_coordinates(const TorusDomain& domain,
                                        std::initializer_list<std::initializer_list<double>> pts);

  /// Like the constructor but returns nullopt instead of throwing on a
  /// simplicity violation.
  static std::optional<Configuration> try_make(const TorusDomain& domain, std::vector<Point> points);

  [[nodiscard]] const TorusDomain& domain() const { return domain_; }
  [[nodiscard]] std::span<const Point> points() const { return points_; }
  [[nodiscard]] std::size_t size() const { return points_.size(); }
  [[nodiscard]] bool empty() const { return points_.empty(); }
  [[nodiscard]] const Point& operator[](std::size_t i) const { return points_[i]; }
  [[nodiscard]] auto begin() const { return points_.begin(); }
  [[nodiscard]] auto end() const { return points_.end(); }

  [[nodiscard]] bool can_insert(const Point& p) const;
  [[nodiscard]] bool contains(const Point& p) const;
  std::size_t insert(const Point& p);
  void erase(std::size_t index);
  /// Moves point `index` to `p`; returns its new index.
  std::size_t replace(std::size_t index, const Point& p);

  [[nodiscard]] Configuration without(std::size_t index) const;
  /// Union of two disjoint configurations on the same domain.
  [[nodiscard]] Configuration united(const Configuration& other) const;

  [[nodiscard]] std::vector<double> flat_coordinates() const;
  [[nodiscard]] std::string to_string() const;

  bool operator==(const Configuration&) const = default;

private:
  TorusDomain domain_;
  std::vector<Point> points_;
};

/// <f, gamma> for any scalar callable f(const Point&).
template <typename F>
double pair_sum(F&& f, const Configuration& gamma) {
  double s = 0.0;
  for (const Point& x : gamma) s += f(x);
  return s;
}

[[nodiscard]] Configuration translate(const Configuration& gamma, std::span<const double> v);
[[nodiscard]] Configuration translate(const Configuration& gamma, const Vec& v);
[[nodiscard]] Configuration translate(const Configuration& gamma, const Shift& s);

[[nodiscard]] inline Vec min_image_displacement(const TorusDomain& domain, const Point& x, const Point& y) {
  return domain.displacement(x, y);
}

/// Minimal N >= 1 with sum_{r in [-l,l]^d} #(gamma ∩ Q_r)^2 <= N^2 (2l+1)^d.
/// Q_r are half-open cells (r_i - 1/2, r_i + 1/2] * cell_edge around the
/// origin, with coordinates taken in [-L/2, L/2). Throws std::invalid_argument
/// when (2l+1) * cell_edge exceeds a side.
[[nodiscard]] std::int64_t temperedness_index(const Configuration& gamma, int l, double cell_edge = 1.0);

/// Smooth compactly supported bump scale * exp(1 - 1/(1 - |x-c|^2/rho^2)),
/// periodized through the minimum image. Requires rho < min_side / 2.
struct Bump {
  Point center;
  double radius = 1.0;
  double scale = 1.0;

  static Bump make(const TorusDomain& domain, std::span<const double> center, double radius, double scale = 1.0);

  [[nodiscard]] double value(const TorusDomain& domain, const Point& x) const;
  [[nodiscard]] Vec gradient(const TorusDomain& domain, const Point& x) const;
};

/// Constant component, the whole-torus limit of a plateau bump.
struct UniformComponent {
  double value = 1.0;
};

using TestComponent = std::variant<Bump, UniformComponent>;

/// f = (f_1, ..., f_k) with closed-form gradients.
class TestField {
public:
  TestField() = default;
  TestField(TorusDomain domain, std::vector<TestComponent> components);

  [[nodiscard]] std::size_t size() const { return components_.size(); }
  [[nodiscard]] const TorusDomain& domain() const { return domain_; }
  [[nodiscard]] const std::vector<TestComponent>& components() const { return components_; }

  [[nodiscard]] double value(std::size_t j, const Point& x) const;
  [[nodiscard]] Vec gradient(std::size_t j, const Point& x) const;

  /// Component-wise <f_j, gamma>.
  [[nodiscard]] std::vector<double> pair_sums(const Configuration& gamma) const;
  /// Component-wise <grad f_j, gamma>.
  [[nodiscard]] std::vector<Vec> gradient_sums(const Configuration& gamma) const;

  /// f(. - v): every bump center moved by v.
  [[nodiscard]] TestField shifted(const Shift& s) const;

  /// True when x lies in the closed support of some component.
  [[nodiscard]] bool in_support(const Point& x) const;

private:
  TorusDomain domain_;
  std::vector<TestComponent> components_;
};

} // namespace gibbslab
