#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "gibbslab/config_space.hpp"

namespace gibbslab {

/// +inf is the energy of a forbidden configuration. It propagates through
/// sums and e^{-beta * inf} is exactly zero.
inline constexpr double kInfiniteEnergy = std::numeric_limits<double>::infinity();

inline double boltzmann(double beta, double energy) {
  return energy == kInfiniteEnergy ? 0.0 : std::exp(-beta * energy);
}

/// Constants (a, b) of sum phi >= a * sum_r #(gamma ∩ Q_r)^2 - b * #gamma.
/// a = 0 is plain stability.
struct StabilityConstants {
  double a = 0.0;
  double b = 0.0;
};

/// Decreasing radial lower envelope: phi(x) >= -theta(|x|).
struct Envelope {
  std::function<double(double)> theta;
  std::string label;
};

/// theta(r) = c * min(1, r^{-(d+1)}).
Envelope power_envelope(double c, std::size_t dim);
/// theta(r) = level for r <= radius, 0 beyond.
Envelope step_envelope(double level, double radius);

// Built-in radial models. All are even (functions of |u| only).

struct NoInteraction {};

/// 4 eps [(s/r)^12 - (s/r)^6] - shift on r <= cutoff, zero beyond; the shift
/// makes phi continuous at the cutoff.
struct LennardJones {
  double epsilon = 1.0;
  double sigma = 1.0;
  double cutoff = 2.5;
  double shift = 0.0;
};

/// eps (s/r)^12 on r <= cutoff, zero beyond.
struct SoftSphere {
  double epsilon = 1.0;
  double sigma = 1.0;
  double cutoff = 2.5;
};

struct HardCore {
  double diameter = 1.0;
};

/// -depth * exp(-r^2 / width^2), cut at `cutoff`.
struct GaussianWell {
  double depth = 1.0;
  double width = 1.0;
  double cutoff = 6.0;
};

/// Linear interpolation of tabulated values on increasing radii. Below the
/// first radius the potential is +inf (a hard core when radii.front() > 0);
/// beyond the last radius it is zero.
struct TabulatedRadial {
  std::vector<double> radii;
  std::vector<double> values;
};

class PairPotential {
public:
  using Model = std::variant<NoInteraction, LennardJones, SoftSphere, HardCore, GaussianWell, TabulatedRadial>;

  PairPotential() : PairPotential(NoInteraction{}, "zero", StabilityConstants{}) {}
  PairPotential(Model model, std::string label, std::optional<StabilityConstants> claimed = std::nullopt,
                std::optional<Envelope> envelope = std::nullopt);

  /// phi as a function of the squared separation.
  [[nodiscard]] double at_r2(double r2) const;
  [[nodiscard]] double radial(double r) const { return at_r2(r * r); }
  [[nodiscard]] double evaluate(const Vec& u) const { return at_r2(norm2(u)); }

  [[nodiscard]] double cutoff() const { return cutoff_; }
  [[nodiscard]] double hard_core_radius() const { return hard_core_; }
  [[nodiscard]] const std::optional<StabilityConstants>& claimed_stability() const { return claimed_; }
  [[nodiscard]] const std::optional<Envelope>& claimed_envelope() const { return envelope_; }
  [[nodiscard]] const std::string& label() const { return label_; }
  [[nodiscard]] const Model& model() const { return model_; }
  [[nodiscard]] bool is_zero() const { return std::holds_alternative<NoInteraction>(model_); }

private:
  Model model_;
  std::string label_;
  std::optional<StabilityConstants> claimed_;
  std::optional<Envelope> envelope_;
  double cutoff_ = 0.0;
  double hard_core_ = 0.0;
};

/// min(0, inf_r phi(r)) over r beyond the hard core, by a fine radial scan.
[[nodiscard]] double radial_minimum(const PairPotential& phi);

// Factories with the claimed constants used elsewhere in the library.
PairPotential zero_pair_potential();
/// Claimed stability b defaults to a coordination-based bound on the
/// cohesive energy per particle: 1.1 eps (d=1), 3.5 eps (d=2), 9 eps (d=3).
PairPotential lennard_jones_truncated(double epsilon, double sigma, double cutoff, std::size_t dim,
                                      std::optional<double> stability_b = std::nullopt);
PairPotential soft_sphere(double epsilon, double sigma, double cutoff);
PairPotential hard_core(double diameter);
PairPotential gaussian_attractive(double depth = 1.0, double width = 1.0);
PairPotential tabulated_pair_potential(std::vector<double> radii, std::vector<double> values,
                                       std::optional<StabilityConstants> claimed = std::nullopt);

// One-body models. Each is periodized through the minimum image with its
// support inside the fundamental cell.

struct ZeroField {};
struct ConstantField {
  double value = 0.0;
};
/// height * bump(x); the bump's scale is ignored in favor of `height`.
struct BumpField {
  Bump bump;
  double height = 1.0;
};
/// strength * (|x - center|^{-k} - radius^{-k}) inside the radius, 0 outside.
/// Continuous, +inf at the center, classical gradient off {center} and the
/// support sphere.
struct SingularPower {
  Point center;
  int k = 2;
  double radius = 1.0;
  double strength = 1.0;
};

class OneBodyPotential {
public:
  using Model = std::variant<ZeroField, ConstantField, BumpField, SingularPower>;

  OneBodyPotential() : OneBodyPotential(TorusDomain{}, ZeroField{}, "psi-zero") {}
  OneBodyPotential(TorusDomain domain, Model model, std::string label);

  [[nodiscard]] double evaluate(const Point& x) const;
  /// Classical gradient; NaN components on the singular set.
  [[nodiscard]] Vec gradient(const Point& x) const;
  /// C such that psi >= -C everywhere.
  [[nodiscard]] double lower_bound() const { return lower_bound_; }
  [[nodiscard]] const std::vector<Point>& singular_set() const { return singular_; }
  [[nodiscard]] const std::string& label() const { return label_; }
  [[nodiscard]] const Model& model() const { return model_; }
  [[nodiscard]] const TorusDomain& domain() const { return domain_; }
  [[nodiscard]] bool is_zero() const { return std::holds_alternative<ZeroField>(model_); }
  [[nodiscard]] bool is_constant() const {
    return std::holds_alternative<ZeroField>(model_) || std::holds_alternative<ConstantField>(model_);
  }

private:
  TorusDomain domain_;
  Model model_;
  std::string label_;
  double lower_bound_ = 0.0;
  std::vector<Point> singular_;
};

OneBodyPotential zero_field(const TorusDomain& domain);
OneBodyPotential constant_field(const TorusDomain& domain, double value);
OneBodyPotential bump_field(const TorusDomain& domain, std::span<const double> center, double radius, double height);
OneBodyPotential singular_field(const TorusDomain& domain, std::span<const double> center, int k, double radius,
                                double strength);

// Energies. Separations always use the minimum image.

/// Sum over unordered pairs; +inf on any hard-core overlap. Uses a cell list
/// when every side holds at least three cutoff lengths.
[[nodiscard]] double pair_energy(const PairPotential& phi, const Configuration& gamma);
/// The all-pairs double sum; reference for the cell-list path.
[[nodiscard]] double pair_energy_all_pairs(const PairPotential& phi, const Configuration& gamma);
/// sum_{x in eta, y in gamma} phi(x - y). Throws on shared points.
[[nodiscard]] double cross_energy(const PairPotential& phi, const Configuration& eta, const Configuration& gamma);
/// sum_{y in gamma} phi(x - y) + psi(x), for x not in gamma.
[[nodiscard]] double insertion_energy(const PairPotential& phi, const OneBodyPotential& psi, const Configuration& gamma,
                                      const Point& x);
/// Energy of point `index` against the rest of gamma, plus psi at that point.
[[nodiscard]] double local_energy(const PairPotential& phi, const OneBodyPotential& psi, const Configuration& gamma,
                                  std::size_t index);
/// Same as local_energy but with point `index` relocated to x.
[[nodiscard]] double local_energy_at(const PairPotential& phi, const OneBodyPotential& psi, const Configuration& gamma,
                                     std::size_t index, const Point& x);
[[nodiscard]] double one_body_energy(const OneBodyPotential& psi, const Configuration& gamma);
[[nodiscard]] double total_energy(const PairPotential& phi, const OneBodyPotential& psi, const Configuration& gamma);

} // namespace gibbslab
