#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>

#include "gibbslab/config_space.hpp"
#include "gibbslab/potentials.hpp"

namespace gibbslab {

enum class Verdict { pass, fail, inconclusive };

std::string to_string(Verdict v);

/// Outcome of a refutation search. A fail verdict always carries a witness
/// whose violation can be recomputed from scratch.
struct StabilityReport {
  Verdict verdict = Verdict::inconclusive;
  std::optional<Configuration> witness;
  /// Smallest slack (lhs - rhs) seen; negative on failure.
  double margin = 0.0;
  std::uint64_t evaluations = 0;
  /// Lower-regularity only: the integral of r^{d-1} theta(r) over [0, inf).
  std::optional<double> envelope_integral;
  std::string detail;
};

/// Cell occupation sum_r #(gamma ∩ Q_r)^2 over the cells (r - 1/2, r + 1/2]
/// * cell_edge of the plane, with coordinates read in [-L/2, L/2).
[[nodiscard]] std::int64_t cell_occupation_squares(const Configuration& gamma, double cell_edge);

/// sum phi - (a * sum_r n_r^2 - b * n) evaluated directly.
[[nodiscard]] double superstability_slack(const PairPotential& phi, const Configuration& gamma, double a, double b,
                                          double cell_edge);

struct SuperstabilitySearch {
  std::size_t dim = 2;
  double cell_edge = 1.0;
  std::uint64_t budget = 100000;
  std::uint64_t seed = 1;
  std::size_t max_points = 512;
};

/// Hunts for a finite configuration violating
///   sum_{pairs} phi >= a sum_r #(gamma ∩ Q_r)^2 - b #gamma
/// by random clusters, lattice packings and hill-climbing on the slack.
/// a = 0 checks plain stability. Never returns pass.
[[nodiscard]] StabilityReport check_superstability(const PairPotential& phi, double a, double b,
                                                   const SuperstabilitySearch& search = {});

/// Samples separations on a log-spaced radius grid in random directions and
/// checks phi(u) >= -theta(|u|). Throws if theta is negative or increases
/// on the grid.
[[nodiscard]] StabilityReport check_lower_regularity(const PairPotential& phi, const Envelope& theta,
                                                     std::size_t n_radii, std::size_t dim = 2,
                                                     std::uint64_t seed = 1);

struct QuadratureSpec {
  std::size_t nodes_per_axis = 64;
  bool refine = true;
};

struct QuadratureResult {
  double value = 0.0;
  /// |value at 2 * nodes - value at nodes|, zero when refinement is off.
  double refinement_delta = 0.0;
  /// The refined value when refinement is on.
  double refined_value = 0.0;
};

/// Tensor midpoint rule over the torus.
[[nodiscard]] QuadratureResult midpoint_integral(const TorusDomain& domain,
                                                 const std::function<double(const Point&)>& integrand,
                                                 const QuadratureSpec& spec = {});

/// C_{f, sigma} = integral of |e^f - 1| d sigma. f = -inf contributes
/// sigma density; any other non-finite node value throws.
[[nodiscard]] QuadratureResult integrability_constant(const TorusDomain& domain,
                                                      const std::function<double(const Point&)>& f,
                                                      const std::function<double(const Point&)>& sigma_density,
                                                      const QuadratureSpec& spec = {});

} // namespace gibbslab
