#include "gibbslab/sampler.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <exception>
#include <istream>
#include <mutex>
#include <ostream>
#include <thread>

namespace gibbslab {

void ModelSpec::validate() const {
  if (!(z > 0.0) || !std::isfinite(z)) throw std::invalid_argument("activity z must be positive and finite");
  if (!(beta > 0.0) || !std::isfinite(beta)) throw std::invalid_argument("inverse temperature beta must be positive and finite");
  if (!std::isfinite(z * domain.volume())) throw std::invalid_argument("z * volume must be finite");
  if (!psi.is_zero() && !(psi.domain() == domain))
    throw std::invalid_argument("one-body potential is defined on a different domain");
}

ModelSpec ModelSpec::without_psi() const {
  ModelSpec m = *this;
  m.psi = zero_field(domain);
  return m;
}

void MoveMix::validate() const {
  if (!(birth > 0.0) || !(death > 0.0)) throw std::invalid_argument("birth and death probabilities must be positive");
  if (birth + death > 1.0 + 1e-15) throw std::invalid_argument("birth + death probabilities exceed 1");
  if (!std::isfinite(kick_scale)) throw std::invalid_argument("kick scale must be finite");
}

MoveStats& MoveStats::operator+=(const MoveStats& o) {
  for (std::size_t i = 0; i < 3; ++i) {
    proposed[i] += o.proposed[i];
    accepted[i] += o.accepted[i];
  }
  max_energy_drift = std::max(max_energy_drift, o.max_energy_drift);
  return *this;
}

ChainState ChainState::initial(const ModelSpec& model, std::uint64_t seed) {
  return from(model, Configuration(model.domain), seed);
}

ChainState ChainState::from(const ModelSpec& model, Configuration config, std::uint64_t seed) {
  if (!(config.domain() == model.domain)) throw std::invalid_argument("initial configuration is on a different domain");
  ChainState s{std::move(config), Rng(seed), 0, {}, 0.0};
  s.current_energy = total_energy(model.phi, model.psi, s.config);
  return s;
}

namespace {

Point uniform_point(const TorusDomain& domain, Rng& rng) {
  Point p;
  for (std::size_t i = 0; i < domain.dim(); ++i) p.ticks[i] = rng.bits();
  return p;
}

bool can_move(const Configuration& g, std::size_t index, const Point& x) {
  const double thr = g.domain().simplicity_threshold();
  for (std::size_t j = 0; j < g.size(); ++j)
    if (j != index && g.domain().distance2(g[j], x) < thr * thr) return false;
  return true;
}

double metropolis(double factor, double beta, double d_energy) {
  if (d_energy == kInfiniteEnergy) return 0.0;
  return std::min(1.0, factor * std::exp(-beta * d_energy));
}

} // namespace

double birth_acceptance(const ModelSpec& model, const MoveMix& mix, const Configuration& gamma, const Point& x) {
  if (!gamma.can_insert(x) || total_energy(model.phi, model.psi, gamma) == kInfiniteEnergy) return 0.0;
  const double de = insertion_energy(model.phi, model.psi, gamma, x);
  const double factor = (mix.death / mix.birth) * model.z * model.domain.volume() / static_cast<double>(gamma.size() + 1);
  return metropolis(factor, model.beta, de);
}

double death_acceptance(const ModelSpec& model, const MoveMix& mix, const Configuration& gamma, std::size_t index) {
  const double de = local_energy(model.phi, model.psi, gamma, index);
  if (de == kInfiniteEnergy) return 1.0;
  const double factor = (mix.birth / mix.death) * static_cast<double>(gamma.size()) / (model.z * model.domain.volume());
  return metropolis(factor, model.beta, -de);
}

double displacement_acceptance(const ModelSpec& model, const Configuration& gamma, std::size_t index, const Point& x) {
  if (!can_move(gamma, index, x)) return 0.0;
  const double before = local_energy(model.phi, model.psi, gamma, index);
  const double after = local_energy_at(model.phi, model.psi, gamma, index, x);
  if (after == kInfiniteEnergy) return 0.0;
  if (before == kInfiniteEnergy) return 1.0;
  return metropolis(1.0, model.beta, after - before);
}

void resync_energy(ChainState& state, const ModelSpec& model) {
  const double e = total_energy(model.phi, model.psi, state.config);
  if (std::isfinite(e) && std::isfinite(state.current_energy))
    state.stats.max_energy_drift = std::max(state.stats.max_energy_drift, std::abs(e - state.current_energy));
  state.current_energy = e;
}

void gcmc_step(ChainState& s, const ModelSpec& model, const MoveMix& mix) {
  Configuration& g = s.config;
  const double u = s.rng.uniform();
  ++s.step;
  const bool illegal = s.current_energy == kInfiniteEnergy;

  if (u < mix.birth) {
    auto& st = s.stats;
    ++st.proposed[0];
    const Point x = uniform_point(model.domain, s.rng);
    const double r = s.rng.uniform();
    if (!illegal && g.can_insert(x)) {
      const double de = insertion_energy(model.phi, model.psi, g, x);
      const double factor = (mix.death / mix.birth) * model.z * model.domain.volume() / static_cast<double>(g.size() + 1);
      if (r < metropolis(factor, model.beta, de)) {
        g.insert(x);
        s.current_energy += de;
        ++st.accepted[0];
      }
    }
  } else if (u < mix.birth + mix.death) {
    ++s.stats.proposed[1];
    if (!g.empty()) {
      const std::size_t idx = s.rng.index(g.size());
      const double r = s.rng.uniform();
      if (illegal) {
        // Leaving an illegal state: deaths are always accepted.
        g.erase(idx);
        s.current_energy = total_energy(model.phi, model.psi, g);
        ++s.stats.accepted[1];
      } else {
        const double de = local_energy(model.phi, model.psi, g, idx);
        const double factor = (mix.birth / mix.death) * static_cast<double>(g.size()) / (model.z * model.domain.volume());
        if (r < metropolis(factor, model.beta, -de)) {
          g.erase(idx);
          s.current_energy -= de;
          ++s.stats.accepted[1];
        }
      }
    }
  } else {
    ++s.stats.proposed[2];
    if (!g.empty()) {
      const std::size_t idx = s.rng.index(g.size());
      const double sd = mix.kick(model.domain);
      Vec kick{};
      for (std::size_t i = 0; i < model.domain.dim(); ++i) kick[i] = sd * s.rng.normal();
      const Point x = model.domain.translate(g[idx], model.domain.shift(kick));
      const double r = s.rng.uniform();
      if (can_move(g, idx, x)) {
        if (illegal) {
          Configuration moved = g;
          moved.replace(idx, x);
          const double e = total_energy(model.phi, model.psi, moved);
          if (e != kInfiniteEnergy) {
            g = std::move(moved);
            s.current_energy = e;
            ++s.stats.accepted[2];
          }
        } else {
          const double before = local_energy(model.phi, model.psi, g, idx);
          const double after = local_energy_at(model.phi, model.psi, g, idx, x);
          if (r < metropolis(1.0, model.beta, after - before)) {
            g.replace(idx, x);
            s.current_energy += after - before;
            ++s.stats.accepted[2];
          }
        }
      }
    }
  }
}

ChainState gcmc_step(const ChainState& state, const ModelSpec& model, const MoveMix& mix) {
  ChainState next = state;
  gcmc_step(next, model, mix);
  return next;
}

ObservableError::ObservableError(const std::string& observable, const Configuration& gamma)
    : std::runtime_error("observable '" + observable + "' is not finite at " + gamma.to_string()),
      config_(gamma.to_string()) {}

void ChainParams::validate() const {
  if (sweeps <= burn_in) throw std::invalid_argument("sweeps must exceed burn_in");
  if (thin < 1) throw std::invalid_argument("thin must be at least 1");
  if (batches < 1) throw std::invalid_argument("batches must be at least 1");
  if (resync_interval < 1) throw std::invalid_argument("resync interval must be at least 1");
  mix.validate();
}

ChainResult run_chain(const ModelSpec& model, const ChainParams& params, const std::vector<Observable>& observables) {
  model.validate();
  params.validate();
  ChainState state = params.initial ? ChainState::from(model, *params.initial, params.seed)
                                    : ChainState::initial(model, params.seed);

  const std::uint64_t n_samples = params.samples();
  std::vector<BatchMeansAccumulator> acc(observables.size(), BatchMeansAccumulator(n_samples, params.batches));
  BatchMeansAccumulator count_acc(n_samples, params.batches);
  BatchMeansAccumulator energy_acc(n_samples, params.batches);

  ChainResult result;
  result.seed = params.seed;
  if (params.record_trace) {
    result.trace.emplace();
    for (const auto& o : observables) result.trace->names.push_back(o.name);
  }

  std::uint64_t next_resync = params.resync_interval;
  std::vector<double> values(observables.size());
  // Burn-in sweeps follow the current size. Sampling sweeps have a fixed
  // length (rounded mean size over burn-in): a state-dependent gap between
  // samples would bias the sampled law.
  double burn_in_size = 0.0;
  std::size_t sweep_length = 1;
  for (std::uint64_t sweep = 0; sweep < params.sweeps; ++sweep) {
    if (sweep == params.burn_in && params.burn_in > 0)
      sweep_length = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(burn_in_size / static_cast<double>(params.burn_in))));
    std::size_t moves = sweep_length;
    if (sweep < params.burn_in) {
      moves = std::max<std::size_t>(1, state.config.size());
      burn_in_size += static_cast<double>(state.config.size());
    }
    for (std::size_t k = 0; k < moves; ++k) {
      gcmc_step(state, model, params.mix);
      if (state.step >= next_resync) {
        resync_energy(state, model);
        next_resync += params.resync_interval;
      }
    }
    if (sweep < params.burn_in || (sweep - params.burn_in) % params.thin != 0) continue;

    for (std::size_t j = 0; j < observables.size(); ++j) {
      const double v = observables[j].eval(state.config);
      if (!std::isfinite(v)) throw ObservableError(observables[j].name, state.config);
      values[j] = v;
      acc[j].add(v);
    }
    count_acc.add(static_cast<double>(state.config.size()));
    energy_acc.add(state.current_energy);
    if (result.trace) {
      result.trace->records.push_back({state.step, state.config.size(), state.current_energy, values});
      if (params.keep_configurations) result.trace->configurations.push_back(state.config);
    }
  }

  resync_energy(state, model);
  for (auto& a : acc) result.estimates.push_back(a.finish());
  result.count = count_acc.finish();
  result.energy = energy_acc.finish();
  result.stats = state.stats;
  result.samples = n_samples;
  result.sweep_length = sweep_length;
  result.final_config = std::move(state.config);
  return result;
}

void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& body) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first;
  std::mutex mu;
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!first) first = std::current_exception();
          next.store(n);
          return;
        }
      }
    });
  }
  for (auto& t : threads) t.join();
  if (first) std::rethrow_exception(first);
}

std::vector<ChainResult> run_chains(const ModelSpec& model, const ChainParams& params,
                                    const std::vector<Observable>& observables, const std::vector<std::uint64_t>& seeds,
                                    std::size_t workers) {
  std::vector<ChainResult> out(seeds.size());
  parallel_for(seeds.size(), workers, [&](std::size_t i) {
    ChainParams p = params;
    p.seed = seeds[i];
    out[i] = run_chain(model, p, observables);
  });
  return out;
}

std::vector<ChainResult> run_chains(const ModelSpec& model, const ChainParams& params,
                                    const std::vector<Observable>& observables, std::uint64_t master_seed,
                                    std::size_t chains, std::size_t workers) {
  std::vector<std::uint64_t> seeds(chains);
  for (std::size_t i = 0; i < chains; ++i) seeds[i] = derive_seed(master_seed, i);
  return run_chains(model, params, observables, seeds, workers);
}

std::vector<Estimate> merge_estimates(const std::vector<ChainResult>& results) {
  if (results.empty()) return {};
  std::vector<Estimate> out = results.front().estimates;
  for (std::size_t c = 1; c < results.size(); ++c)
    for (std::size_t j = 0; j < out.size(); ++j) out[j] = merge(out[j], results[c].estimates[j]);
  return out;
}

namespace {

std::string fmt_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) throw std::runtime_error("truncated snapshot stream");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

} // namespace

void write_trace_csv(std::ostream& os, const Trace& trace) {
  os << "step,n,energy";
  for (const auto& n : trace.names) os << ',' << n;
  os << '\n';
  for (const auto& r : trace.records) {
    os << r.step << ',' << r.n << ',' << fmt_double(r.energy);
    for (double v : r.values) os << ',' << fmt_double(v);
    os << '\n';
  }
}

void write_snapshots(std::ostream& os, const std::vector<Configuration>& configs) {
  for (const auto& c : configs) {
    put_u64(os, c.domain().dim());
    put_u64(os, c.size());
    for (double x : c.flat_coordinates()) put_u64(os, std::bit_cast<std::uint64_t>(x));
  }
}

std::vector<Configuration> read_snapshots(std::istream& is, const TorusDomain& domain) {
  std::vector<Configuration> out;
  while (is.peek() != std::char_traits<char>::eof()) {
    const std::uint64_t d = get_u64(is);
    const std::uint64_t n = get_u64(is);
    if (d != domain.dim()) throw std::runtime_error("snapshot dimension differs from the domain");
    std::vector<double> flat(n * d);
    for (auto& x : flat) x = std::bit_cast<double>(get_u64(is));
    out.push_back(Configuration::from_coordinates(domain, flat));
  }
  return out;
}

} // namespace gibbslab
