#include "gibbslab/diagnostics.hpp"

#include <algorithm>
#include <stdexcept>

#include "gibbslab/stats.hpp"

namespace gibbslab {

namespace {

std::size_t bin_of(const TorusDomain& domain, const Point& p, std::size_t b) {
  std::size_t flat = 0;
  for (std::size_t i = domain.dim(); i-- > 0;) {
    const auto k = static_cast<std::size_t>((static_cast<unsigned __int128>(p.ticks[i]) * b) >> 64);
    flat = flat * b + k;
  }
  return flat;
}

std::vector<std::size_t> unflatten(std::size_t flat, std::size_t b, std::size_t dim) {
  std::vector<std::size_t> idx(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    idx[i] = flat % b;
    flat /= b;
  }
  return idx;
}

double bin_reference(const ModelSpec& model, const std::vector<std::size_t>& idx, std::size_t b, std::size_t m) {
  const TorusDomain& dom = model.domain;
  const std::size_t d = dom.dim();
  std::size_t total = 1;
  for (std::size_t i = 0; i < d; ++i) total *= m;
  double bin_volume = 1.0;
  for (std::size_t i = 0; i < d; ++i) bin_volume *= dom.side(i) / static_cast<double>(b);
  ExactSum s;
  std::vector<double> x(d);
  for (std::size_t k = 0; k < total; ++k) {
    std::size_t r = k;
    for (std::size_t i = 0; i < d; ++i) {
      const double w = dom.side(i) / static_cast<double>(b);
      x[i] = w * (static_cast<double>(idx[i]) + (static_cast<double>(r % m) + 0.5) / static_cast<double>(m));
      r /= m;
    }
    s += boltzmann(model.beta, model.psi.evaluate(dom.point(x)));
  }
  return model.z * bin_volume * s.value() / static_cast<double>(total);
}

DiagnosticsReport diagnose_traces(const ModelSpec& model, const std::vector<const Trace*>& traces,
                                  const MoveStats& moves, const DiagnoseOptions& opt) {
  const TorusDomain& dom = model.domain;
  const std::size_t d = dom.dim();
  const std::size_t b = std::max<std::size_t>(1, opt.bins_per_axis);
  std::size_t nbins = 1;
  for (std::size_t i = 0; i < d; ++i) nbins *= b;

  DiagnosticsReport rep;
  rep.moves = moves;
  rep.acceptance_birth = moves.acceptance_rate(MoveType::birth);
  rep.acceptance_death = moves.acceptance_rate(MoveType::death);
  rep.acceptance_displacement = moves.acceptance_rate(MoveType::displacement);

  const int l = std::max(1, opt.temperedness_l);
  rep.cell_edge = opt.cell_edge;
  if (static_cast<double>(2 * l + 1) * rep.cell_edge > dom.min_side())
    rep.cell_edge = dom.min_side() / static_cast<double>(2 * l + 1);

  std::vector<Estimate> bin_est(nbins);
  double tau_weighted = 0.0;
  bool any = false;
  for (const Trace* t : traces) {
    const auto& configs = t->configurations;
    if (configs.empty()) continue;
    std::vector<BatchMeansAccumulator> acc(nbins, BatchMeansAccumulator(configs.size()));
    std::vector<double> counts;
    counts.reserve(configs.size());
    std::vector<std::size_t> per_bin(nbins);
    for (const auto& g : configs) {
      ++rep.samples;
      if (g.empty()) ++rep.empty_samples;
      std::fill(per_bin.begin(), per_bin.end(), 0);
      for (const Point& p : g) ++per_bin[bin_of(dom, p, b)];
      for (std::size_t k = 0; k < nbins; ++k) acc[k].add(static_cast<double>(per_bin[k]));
      counts.push_back(static_cast<double>(g.size()));
      rep.temperedness.push_back(temperedness_index(g, l, rep.cell_edge));
    }
    const double tau = stats::autocorrelation_time(counts);
    tau_weighted += tau * static_cast<double>(counts.size());
    rep.ess += static_cast<double>(counts.size()) / tau;
    for (std::size_t k = 0; k < nbins; ++k) {
      Estimate e = acc[k].finish();
      bin_est[k] = any ? merge(bin_est[k], e) : e;
    }
    any = true;
  }
  if (rep.samples == 0) throw std::invalid_argument("diagnose needs a non-empty trace with configurations");
  rep.autocorrelation_time = tau_weighted / static_cast<double>(rep.samples);

  rep.xi_hat = 0.0;
  for (std::size_t k = 0; k < nbins; ++k) {
    IntensityBin bin;
    bin.index = unflatten(k, b, d);
    bin.mean_count = bin_est[k];
    bin.reference = bin_reference(model, bin.index, b, std::max<std::size_t>(1, opt.reference_nodes));
    if (bin.reference > 0.0) {
      bin.ratio = bin.mean_count.mean / bin.reference;
      bin.ratio_std_error = bin.mean_count.std_error / bin.reference;
      if (bin.ratio > rep.xi_hat) {
        rep.xi_hat = bin.ratio;
        rep.xi_std_error = bin.ratio_std_error;
        rep.xi_bin = k;
      }
    }
    rep.histogram.push_back(std::move(bin));
  }
  return rep;
}

} // namespace

DiagnosticsReport diagnose(const ModelSpec& model, const Trace& trace, const MoveStats& moves,
                           const DiagnoseOptions& options) {
  return diagnose_traces(model, {&trace}, moves, options);
}

DiagnosticsReport diagnose(const ModelSpec& model, const std::vector<ChainResult>& chains,
                           const DiagnoseOptions& options) {
  std::vector<const Trace*> traces;
  MoveStats moves;
  for (const auto& c : chains) {
    if (c.trace) traces.push_back(&*c.trace);
    moves += c.stats;
  }
  return diagnose_traces(model, traces, moves, options);
}

} // namespace gibbslab
