#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gibbslab/config_space.hpp"
#include "gibbslab/estimate.hpp"
#include "gibbslab/potentials.hpp"
#include "gibbslab/random.hpp"

namespace gibbslab {

/// Finite-volume Gibbs model: density e^{-beta H} against the Lebesgue-Poisson
/// measure with intensity z e^{-beta psi} dx on the torus.
struct ModelSpec {
  TorusDomain domain;
  double z = 1.0;
  double beta = 1.0;
  PairPotential phi;
  OneBodyPotential psi;

  /// Throws std::invalid_argument unless z > 0, beta > 0, z V finite and psi
  /// lives on `domain`.
  void validate() const;

  /// Same model with psi replaced by zero.
  [[nodiscard]] ModelSpec without_psi() const;
};

struct MoveMix {
  double birth = 0.25;
  double death = 0.25;
  /// Standard deviation of the Gaussian displacement kick; non-positive means
  /// 0.1 * min side.
  double kick_scale = 0.0;

  [[nodiscard]] double displacement() const { return 1.0 - birth - death; }
  [[nodiscard]] double kick(const TorusDomain& domain) const {
    return kick_scale > 0.0 ? kick_scale : 0.1 * domain.min_side();
  }
  void validate() const;
};

enum class MoveType : std::size_t { birth = 0, death = 1, displacement = 2 };

struct MoveStats {
  std::array<std::uint64_t, 3> proposed{};
  std::array<std::uint64_t, 3> accepted{};
  /// Largest |cached - recomputed| energy seen at a resync.
  double max_energy_drift = 0.0;

  [[nodiscard]] double acceptance_rate(MoveType t) const {
    const auto i = static_cast<std::size_t>(t);
    return proposed[i] ? static_cast<double>(accepted[i]) / static_cast<double>(proposed[i]) : 0.0;
  }
  MoveStats& operator+=(const MoveStats& o);
};

struct ChainState {
  Configuration config;
  Rng rng;
  std::uint64_t step = 0;
  MoveStats stats;
  /// pair_energy + one_body_energy of config; +inf for an illegal state.
  double current_energy = 0.0;

  /// Empty configuration on the model's domain.
  static ChainState initial(const ModelSpec& model, std::uint64_t seed);
  /// Arbitrary starting configuration, possibly with infinite energy.
  static ChainState from(const ModelSpec& model, Configuration config, std::uint64_t seed);
};

// Metropolis-Hastings acceptance probabilities. Energies include psi.

/// min(1, (p_d / p_b) z V e^{-beta dE} / (n + 1)) for adding x to gamma; 0
/// when gamma is illegal.
[[nodiscard]] double birth_acceptance(const ModelSpec& model, const MoveMix& mix, const Configuration& gamma,
                                      const Point& x);
/// min(1, (p_b / p_d) n / (z V) e^{+beta dE}) for removing gamma[index]; 1
/// when that point carries infinite energy.
[[nodiscard]] double death_acceptance(const ModelSpec& model, const MoveMix& mix, const Configuration& gamma,
                                      std::size_t index);
/// min(1, e^{-beta dE}) for moving gamma[index] to x.
[[nodiscard]] double displacement_acceptance(const ModelSpec& model, const Configuration& gamma, std::size_t index,
                                             const Point& x);

/// One elementary move, in place.
void gcmc_step(ChainState& state, const ModelSpec& model, const MoveMix& mix = {});
/// Pure variant.
[[nodiscard]] ChainState gcmc_step(const ChainState& state, const ModelSpec& model, const MoveMix& mix);

/// Recomputes the cached energy; records the drift.
void resync_energy(ChainState& state, const ModelSpec& model);

struct Observable {
  std::string name;
  std::function<double(const Configuration&)> eval;
};

class ObservableError : public std::runtime_error {
public:
  ObservableError(const std::string& observable, const Configuration& gamma);
  [[nodiscard]] const std::string& configuration() const { return config_; }

private:
  std::string config_;
};

struct ChainParams {
  std::uint64_t sweeps = 10000;
  std::uint64_t burn_in = 1000;
  std::uint64_t thin = 1;
  std::uint64_t seed = 1;
  MoveMix mix;
  std::size_t batches = kDefaultBatches;
  /// Elementary moves between energy resyncs.
  std::uint64_t resync_interval = 4096;
  /// Keep per-sample records (step, n, energy, observable values).
  bool record_trace = false;
  /// Also keep the sampled configurations (needed by diagnose).
  bool keep_configurations = false;
  /// Optional starting configuration; empty otherwise.
  std::optional<Configuration> initial;

  void validate() const;
  [[nodiscard]] std::uint64_t samples() const { return (sweeps - burn_in + thin - 1) / thin; }
};

struct TraceRecord {
  std::uint64_t step = 0;
  std::size_t n = 0;
  double energy = 0.0;
  std::vector<double> values;
};

struct Trace {
  std::vector<std::string> names;
  std::vector<TraceRecord> records;
  std::vector<Configuration> configurations;
};

struct ChainResult {
  std::vector<Estimate> estimates;
  Estimate count;
  Estimate energy;
  MoveStats stats;
  std::uint64_t seed = 0;
  std::uint64_t samples = 0;
  /// Moves per sampling sweep.
  std::size_t sweep_length = 1;
  std::optional<Trace> trace;
  Configuration final_config;
};

/// Burn-in sweeps are max(1, n) elementary moves with n taken at the start of
/// the sweep. After burn-in every sweep has the fixed length max(1, round(mean
/// n over burn-in)) and every `thin`-th sweep is sampled.
/// Deterministic in (model, params); throws ObservableError on a non-finite
/// observable value.
[[nodiscard]] ChainResult run_chain(const ModelSpec& model, const ChainParams& params,
                                    const std::vector<Observable>& observables);

/// Several chains with seeds derive_seed(master, i), run on up to `workers`
/// threads; results are returned in chain order.
[[nodiscard]] std::vector<ChainResult> run_chains(const ModelSpec& model, const ChainParams& params,
                                                  const std::vector<Observable>& observables, std::uint64_t master_seed,
                                                  std::size_t chains, std::size_t workers = 1);

/// Same with an explicit seed per chain.
[[nodiscard]] std::vector<ChainResult> run_chains(const ModelSpec& model, const ChainParams& params,
                                                  const std::vector<Observable>& observables,
                                                  const std::vector<std::uint64_t>& seeds, std::size_t workers = 1);

/// Merged estimates of several chains, observable by observable.
[[nodiscard]] std::vector<Estimate> merge_estimates(const std::vector<ChainResult>& results);

/// Runs body(i) for i in [0, n) on up to `workers` threads. The first
/// exception thrown by any task is rethrown after all threads join.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& body);

/// CSV: step,n,energy,<observable names>. Values use round-trip precision.
void write_trace_csv(std::ostream& os, const Trace& trace);
/// Per configuration: u64 d, u64 n, then n*d little-endian f64 coordinates.
void write_snapshots(std::ostream& os, const std::vector<Configuration>& configs);
[[nodiscard]] std::vector<Configuration> read_snapshots(std::istream& is, const TorusDomain& domain);

} // namespace gibbslab
