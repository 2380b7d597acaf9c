#include "gibbslab/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "gibbslab/exact_sum.hpp"
#include "gibbslab/random.hpp"

namespace gibbslab {

double poisson_tail(double x, std::size_t n_max) {
  if (x == 0.0) return 0.0;
  if (!std::isfinite(x)) return std::numeric_limits<double>::infinity();
  double term = 1.0;
  for (std::size_t n = 1; n <= n_max; ++n) term *= x / static_cast<double>(n);
  double sum = 0.0;
  for (std::size_t n = n_max + 1;; ++n) {
    term *= x / static_cast<double>(n);
    sum += term;
    if (static_cast<double>(n) > 2.0 * x && term < 1e-18 * sum) break;
    if (n > n_max + 100000) break;
  }
  return sum;
}

double tail_parameter(const ModelSpec& model) {
  const auto& claim = model.phi.claimed_stability();
  if (!claim) return std::numeric_limits<double>::infinity();
  return model.z * model.domain.volume() * std::exp(model.beta * claim->b) *
         std::exp(model.beta * model.psi.lower_bound());
}

namespace {

/// Generator of the Kronecker sequence in `dim` dimensions in 2^-64 units:
/// alpha_j = phi^{-(j+1)} mod 1, phi the positive root of x^{dim+1} = x + 1.
std::vector<std::uint64_t> kronecker_generator(std::size_t dim) {
  long double x = 2.0L;
  for (int it = 0; it < 200; ++it) {
    const long double f = std::pow(x, static_cast<long double>(dim + 1)) - x - 1.0L;
    const long double df = static_cast<long double>(dim + 1) * std::pow(x, static_cast<long double>(dim)) - 1.0L;
    x -= f / df;
  }
  std::vector<std::uint64_t> a(dim);
  long double p = 1.0L;
  for (std::size_t j = 0; j < dim; ++j) {
    p /= x;
    const long double frac = p - std::floor(p);
    a[j] = static_cast<std::uint64_t>(std::ldexp(frac, 64));
  }
  return a;
}

std::uint64_t ipow(std::uint64_t b, std::size_t e) {
  std::uint64_t r = 1;
  for (std::size_t i = 0; i < e; ++i) {
    if (b != 0 && r > std::numeric_limits<std::uint64_t>::max() / b) return std::numeric_limits<std::uint64_t>::max();
    r *= b;
  }
  return r;
}

double slot_offset(std::size_t slot, std::size_t n) {
  // Distinct sub-cell offsets per slot keep nodes of different slots apart.
  return 0.5 + (static_cast<double>(slot) - 0.5 * static_cast<double>(n - 1)) / (2.0 * static_cast<double>(n));
}

double pair_factor(const ModelSpec& m, const Point& a, const Point& b) {
  return boltzmann(m.beta, m.phi.at_r2(m.domain.distance2(a, b)));
}

struct Sums {
  ExactSum w;
  std::vector<ExactSum> wf;
  double max_abs_f = 0.0;

  explicit Sums(std::size_t k = 0) : wf(k) {}
  void merge(const Sums& o) {
    w += o.w;
    for (std::size_t j = 0; j < wf.size(); ++j) wf[j] += o.wf[j];
    max_abs_f = std::max(max_abs_f, o.max_abs_f);
  }
};

class OrderIntegrator {
public:
  OrderIntegrator(const ModelSpec& model, const std::vector<Observable>& obs) : m_(model), obs_(obs) {}

  void leaf(const std::vector<Point>& pts, double w, Sums& s) const {
    s.w += w;
    if (obs_.empty()) return;
    auto gamma = Configuration::try_make(m_.domain, pts);
    if (!gamma) throw std::runtime_error("oracle quadrature produced coincident nodes");
    for (std::size_t j = 0; j < obs_.size(); ++j) {
      const double f = obs_[j].eval(*gamma);
      if (!std::isfinite(f))
        throw std::runtime_error("observable '" + obs_[j].name + "' is not finite at oracle node " + gamma->to_string());
      s.wf[j] += w * f;
      s.max_abs_f = std::max(s.max_abs_f, std::abs(f));
    }
  }

  /// Tensor midpoint grid with `nodes` per axis; returns the sums over all
  /// nodes^(d n) tuples.
  Sums tensor(std::size_t n, std::size_t nodes, std::size_t workers) const {
    const std::size_t d = m_.domain.dim();
    const std::uint64_t per_slot = ipow(nodes, d);
    std::vector<std::vector<Point>> slot_pts(n, std::vector<Point>(per_slot));
    std::vector<std::vector<double>> slot_w(n, std::vector<double>(per_slot));
    std::vector<double> c(d);
    for (std::size_t s = 0; s < n; ++s) {
      const double off = slot_offset(s, n);
      for (std::uint64_t k = 0; k < per_slot; ++k) {
        std::uint64_t r = k;
        for (std::size_t a = 0; a < d; ++a) {
          const double h = m_.domain.side(a) / static_cast<double>(nodes);
          c[a] = h * (static_cast<double>(r % nodes) + off);
          r /= nodes;
        }
        slot_pts[s][k] = m_.domain.point(c);
        slot_w[s][k] = boltzmann(m_.beta, m_.psi.evaluate(slot_pts[s][k]));
      }
    }

    const std::size_t chunks = static_cast<std::size_t>(per_slot);
    std::vector<Sums> parts(chunks, Sums(obs_.size()));
    parallel_for(chunks, workers, [&](std::size_t k0) {
      std::vector<Point> pts(n);
      Sums& acc = parts[k0];
      std::function<void(std::size_t, double)> rec = [&](std::size_t level, double w) {
        if (level == n) {
          leaf(pts, w, acc);
          return;
        }
        for (std::uint64_t k = 0; k < per_slot; ++k) {
          double wk = w * slot_w[level][k];
          if (wk == 0.0) continue;
          const Point& p = slot_pts[level][k];
          for (std::size_t j = 0; j < level && wk != 0.0; ++j) wk *= pair_factor(m_, pts[j], p);
          if (wk == 0.0) continue;
          pts[level] = p;
          rec(level + 1, wk);
        }
      };
      const double w0 = slot_w[0][k0];
      if (w0 == 0.0) return;
      pts[0] = slot_pts[0][k0];
      rec(1, w0);
    });
    Sums total(obs_.size());
    for (const auto& p : parts) total.merge(p);
    return total;
  }

  /// Kronecker lattice with `count` points; also returns the sums over the
  /// first half of the points.
  std::pair<Sums, Sums> lattice(std::size_t n, std::uint64_t count, std::size_t workers) const {
    const std::size_t d = m_.domain.dim();
    const auto gen = kronecker_generator(n * d);
    std::vector<std::uint64_t> shift(n * d);
    for (std::size_t j = 0; j < shift.size(); ++j) shift[j] = splitmix64(0x5EEDULL + j);

    const std::uint64_t half = count / 2;
    const std::uint64_t chunk = std::max<std::uint64_t>(1, std::min<std::uint64_t>(half, 4096));
    const std::size_t chunks = static_cast<std::size_t>((count + chunk - 1) / chunk);
    std::vector<Sums> parts(chunks, Sums(obs_.size()));
    parallel_for(chunks, workers, [&](std::size_t c) {
      std::vector<Point> pts(n);
      const std::uint64_t lo = c * chunk;
      const std::uint64_t hi = std::min(count, lo + chunk);
      for (std::uint64_t k = lo; k < hi; ++k) {
        double w = 1.0;
        for (std::size_t s = 0; s < n && w != 0.0; ++s) {
          Point p;
          for (std::size_t a = 0; a < d; ++a) p.ticks[a] = shift[s * d + a] + k * gen[s * d + a];
          w *= boltzmann(m_.beta, m_.psi.evaluate(p));
          for (std::size_t j = 0; j < s && w != 0.0; ++j) w *= pair_factor(m_, pts[j], p);
          pts[s] = p;
        }
        if (w == 0.0) continue;
        leaf(pts, w, parts[c]);
      }
    });
    Sums full(obs_.size()), first(obs_.size());
    for (std::size_t c = 0; c < chunks; ++c) {
      full.merge(parts[c]);
      if ((c + 1) * chunk <= half) first.merge(parts[c]);
    }
    return {full, first};
  }

private:
  const ModelSpec& m_;
  const std::vector<Observable>& obs_;
};

struct SeriesResult {
  PartitionResult partition;
  std::vector<ExactSum> numer;
  std::vector<ExactSum> numer_coarse;
  ExactSum z_coarse;
  double max_abs_f = 0.0;
};

SeriesResult run_series(const ModelSpec& model, const std::vector<Observable>& obs, const TruncationSpec& trunc,
                        const OracleOptions& opt) {
  model.validate();
  if (trunc.nodes_per_axis < 1) throw std::invalid_argument("nodes_per_axis must be positive");
  const std::size_t d = model.domain.dim();
  const std::size_t k = obs.size();
  const std::size_t coarse_nodes = std::max<std::size_t>(1, trunc.nodes_per_axis / 2);

  // Plan and guard.
  std::vector<bool> use_tensor(trunc.n_max + 1, false);
  std::uint64_t planned = 0;
  auto add = [&](std::uint64_t x) {
    planned = (planned > std::numeric_limits<std::uint64_t>::max() - x) ? std::numeric_limits<std::uint64_t>::max()
                                                                         : planned + x;
  };
  for (std::size_t n = 1; n <= trunc.n_max; ++n) {
    const std::uint64_t grid = ipow(trunc.nodes_per_axis, d * n);
    use_tensor[n] = grid <= opt.tensor_budget;
    if (use_tensor[n]) {
      add(grid);
      if (opt.estimate_error) add(ipow(coarse_nodes, d * n));
    } else {
      add(opt.lattice_points);
    }
  }
  if (planned > opt.max_evaluations)
    throw BudgetExceeded("oracle needs " + std::to_string(planned) + " integrand evaluations, over the budget of " +
                         std::to_string(opt.max_evaluations));

  SeriesResult res;
  res.numer.resize(k);
  res.numer_coarse.resize(k);
  PartitionResult& P = res.partition;
  P.evaluations = planned;

  // n = 0: the empty configuration.
  ExactSum Z;
  Z += 1.0;
  res.z_coarse += 1.0;
  {
    Configuration empty(model.domain);
    for (std::size_t j = 0; j < k; ++j) {
      const double f = obs[j].eval(empty);
      if (!std::isfinite(f)) throw std::runtime_error("observable '" + obs[j].name + "' is not finite at the empty configuration");
      res.numer[j] += f;
      res.numer_coarse[j] += f;
      res.max_abs_f = std::max(res.max_abs_f, std::abs(f));
    }
    P.terms.push_back({0, "exact", 1, 1.0, 0.0});
  }

  OrderIntegrator integ(model, obs);
  const double zv = model.z * model.domain.volume();
  double coef = 1.0;  // (zV)^n / n!
  for (std::size_t n = 1; n <= trunc.n_max; ++n) {
    coef *= zv / static_cast<double>(n);
    Sums fine(k), coarse(k);
    OrderTerm t;
    t.n = n;
    double fine_count = 0.0, coarse_count = 0.0;
    if (use_tensor[n]) {
      t.method = "tensor";
      t.points = ipow(trunc.nodes_per_axis, d * n);
      fine = integ.tensor(n, trunc.nodes_per_axis, opt.workers);
      fine_count = static_cast<double>(t.points);
      if (opt.estimate_error) {
        coarse = integ.tensor(n, coarse_nodes, opt.workers);
        coarse_count = static_cast<double>(ipow(coarse_nodes, d * n));
      }
    } else {
      t.method = "lattice";
      t.points = opt.lattice_points;
      auto [full, first] = integ.lattice(n, opt.lattice_points, opt.workers);
      fine = std::move(full);
      fine_count = static_cast<double>(opt.lattice_points);
      if (opt.estimate_error) {
        coarse = std::move(first);
        coarse_count = static_cast<double>(opt.lattice_points / 2);
      }
    }
    const double scale = coef / fine_count;
    t.term = fine.w.value() * scale;
    Z += t.term;
    for (std::size_t j = 0; j < k; ++j) res.numer[j] += fine.wf[j].value() * scale;
    res.max_abs_f = std::max(res.max_abs_f, fine.max_abs_f);
    if (opt.estimate_error && coarse_count > 0.0) {
      const double cs = coef / coarse_count;
      const double ct = coarse.w.value() * cs;
      t.delta = std::abs(t.term - ct);
      res.z_coarse += ct;
      for (std::size_t j = 0; j < k; ++j) res.numer_coarse[j] += coarse.wf[j].value() * cs;
    } else {
      res.z_coarse += t.term;
      for (std::size_t j = 0; j < k; ++j) res.numer_coarse[j] += fine.wf[j].value() * scale;
    }
    P.quadrature_delta += t.delta;
    P.terms.push_back(t);
  }
  P.Z = Z.value();
  P.tail_bound = poisson_tail(tail_parameter(model), trunc.n_max);
  return res;
}

} // namespace

PartitionResult partition_function(const ModelSpec& model, const TruncationSpec& trunc, const OracleOptions& options) {
  return run_series(model, {}, trunc, options).partition;
}

ExpectationResult exact_expectation(const ModelSpec& model, const std::vector<Observable>& observables,
                                    const TruncationSpec& trunc, const OracleOptions& options) {
  SeriesResult s = run_series(model, observables, trunc, options);
  ExpectationResult r;
  r.partition = s.partition;
  const double Z = s.partition.Z;
  const double Zc = s.z_coarse.value();
  for (std::size_t j = 0; j < observables.size(); ++j) {
    const double v = s.numer[j].value() / Z;
    r.values.push_back(v);
    r.quadrature_deltas.push_back(std::abs(v - s.numer_coarse[j].value() / Zc));
    r.tail_bounds.push_back(2.0 * s.max_abs_f * s.partition.tail_bound / Z);
  }
  return r;
}

XiResult xi_psi_exact(const ModelSpec& with_psi, const ModelSpec& without_psi, const TruncationSpec& trunc,
                      const OracleOptions& options) {
  if (!(with_psi.domain == without_psi.domain) || with_psi.z != without_psi.z || with_psi.beta != without_psi.beta ||
      with_psi.phi.label() != without_psi.phi.label())
    throw std::invalid_argument("xi_psi_exact: models differ in more than psi");
  if (!without_psi.psi.is_zero()) throw std::invalid_argument("xi_psi_exact: reference model must have psi = 0");
  XiResult r;
  r.with_psi = partition_function(with_psi, trunc, options);
  r.without_psi = partition_function(without_psi, trunc, options);
  r.value = r.with_psi.Z / r.without_psi.Z;
  // Truncated Z underestimates both; the ratio moves by at most this much.
  r.tail_bound = std::max(r.with_psi.tail_bound / r.without_psi.Z, r.value * r.without_psi.tail_bound / r.without_psi.Z);
  r.quadrature_delta = r.with_psi.quadrature_delta / r.without_psi.Z + r.value * r.without_psi.quadrature_delta / r.without_psi.Z;
  return r;
}

// --- window integrator ------------------------------------------------------

bool Window::contains(const TorusDomain& domain, const Point& p) const {
  for (std::size_t i = 0; i < domain.dim(); ++i) {
    const double c = domain.coord(p, i);
    if (c < lower[i] || c >= lower[i] + extent[i]) return false;
  }
  return true;
}

double Window::volume(const TorusDomain& domain) const {
  double v = 1.0;
  for (std::size_t i = 0; i < domain.dim(); ++i) v *= extent[i];
  return v;
}

void Window::validate(const TorusDomain& domain) const {
  for (std::size_t i = 0; i < domain.dim(); ++i) {
    if (!(extent[i] > 0.0)) throw std::invalid_argument("window extent must be positive");
    if (lower[i] < 0.0 || lower[i] + extent[i] > domain.side(i) || extent[i] >= domain.side(i))
      throw std::invalid_argument("window must lie strictly inside the fundamental cell");
  }
}

namespace {

double distance_to_window(const TorusDomain& dom, const Window& w, const Point& p) {
  double s = 0.0;
  for (std::size_t i = 0; i < dom.dim(); ++i) {
    const double c = dom.coord(p, i);
    const double L = dom.side(i);
    const double lo = w.lower[i], hi = w.lower[i] + w.extent[i];
    if (c >= lo && c <= hi) continue;
    auto circ = [L](double a) {
      a = std::fmod(std::abs(a), L);
      return std::min(a, L - a);
    };
    const double di = std::min(circ(c - lo), circ(c - hi));
    s += di * di;
  }
  return std::sqrt(s);
}

} // namespace

WindowIntegrator::WindowIntegrator(const ModelSpec& model, const CylinderFunction& F, const Window& window,
                                   const TruncationSpec& trunc, const Options& options)
    : model_(model), F_(F), window_(window), trunc_(trunc) {
  model_.validate();
  window_.validate(model_.domain);
  volume_ = window_.volume(model_.domain);
  phi_min_ = radial_minimum(model_.phi);
  g_bound_ = F_.outer().value_bound().value_or(0.0);

  const TorusDomain& dom = model_.domain;
  const std::size_t d = dom.dim();
  const std::size_t k = F_.inner().size();
  const std::size_t nodes = std::max<std::size_t>(1, trunc_.nodes_per_axis);

  for (std::size_t n = 1; n <= trunc_.n_max; ++n) {
    Order o;
    o.n = n;
    std::vector<double> c(d);
    std::vector<std::uint32_t> tuple(n);
    std::vector<double> fs(k);

    auto push_tuple = [&](const std::vector<std::uint32_t>& ids) {
      double w = 1.0;
      for (std::size_t s = 0; s < n && w != 0.0; ++s) {
        w *= boltzmann(model_.beta, model_.psi.evaluate(o.nodes[ids[s]]));
        for (std::size_t t = 0; t < s && w != 0.0; ++t) w *= pair_factor(model_, o.nodes[ids[t]], o.nodes[ids[s]]);
      }
      if (w == 0.0) return;
      std::fill(fs.begin(), fs.end(), 0.0);
      for (std::size_t s = 0; s < n; ++s)
        for (std::size_t j = 0; j < k; ++j) fs[j] += F_.inner().value(j, o.nodes[ids[s]]);
      o.ids.insert(o.ids.end(), ids.begin(), ids.end());
      o.weight.push_back(w);
      o.f_sum.insert(o.f_sum.end(), fs.begin(), fs.end());
    };

    const std::uint64_t grid = ipow(nodes, d * n);
    if (grid <= options.tensor_budget) {
      o.method = "tensor";
      o.points = grid;
      const std::uint64_t per_slot = ipow(nodes, d);
      for (std::size_t s = 0; s < n; ++s) {
        const double off = slot_offset(s, n);
        for (std::uint64_t q = 0; q < per_slot; ++q) {
          std::uint64_t r = q;
          for (std::size_t a = 0; a < d; ++a) {
            const double h = window_.extent[a] / static_cast<double>(nodes);
            c[a] = window_.lower[a] + h * (static_cast<double>(r % nodes) + off);
            r /= nodes;
          }
          o.nodes.push_back(dom.point(c));
        }
      }
      std::vector<std::uint32_t> ids(n);
      for (std::uint64_t g = 0; g < grid; ++g) {
        std::uint64_t r = g;
        for (std::size_t s = 0; s < n; ++s) {
          ids[s] = static_cast<std::uint32_t>(s * per_slot + r % per_slot);
          r /= per_slot;
        }
        push_tuple(ids);
      }
    } else {
      o.method = "lattice";
      o.points = options.lattice_points;
      const auto gen = kronecker_generator(n * d);
      std::vector<std::uint64_t> shift(n * d);
      for (std::size_t j = 0; j < shift.size(); ++j) shift[j] = splitmix64(0x5EEDULL + j);
      std::vector<std::uint32_t> ids(n);
      for (std::uint64_t q = 0; q < options.lattice_points; ++q) {
        for (std::size_t s = 0; s < n; ++s) {
          for (std::size_t a = 0; a < d; ++a) {
            const std::uint64_t t = shift[s * d + a] + q * gen[s * d + a];
            c[a] = window_.lower[a] + window_.extent[a] * std::ldexp(static_cast<double>(t >> 11), -53);
          }
          ids[s] = static_cast<std::uint32_t>(o.nodes.size());
          o.nodes.push_back(dom.point(c));
        }
        push_tuple(ids);
      }
    }
    orders_.push_back(std::move(o));
  }
}

WindowIntegrator::Result WindowIntegrator::integrate(const Configuration& outer) const {
  const TorusDomain& dom = model_.domain;
  const std::size_t k = F_.inner().size();
  std::vector<const Point*> near;
  std::size_t interacting = 0;
  for (const Point& y : outer) {
    if (window_.contains(dom, y)) throw std::invalid_argument("outer configuration has a point in the window");
    if (!model_.phi.is_zero() && distance_to_window(dom, window_, y) < model_.phi.cutoff()) {
      near.push_back(&y);
      ++interacting;
    }
  }

  const std::vector<double> t_out = F_.inner().pair_sums(outer);
  std::vector<double> t(k);
  ExactSum Z, num;
  Z += 1.0;
  const double g0 = F_.eval_pairings(t_out);
  num += g0;
  double g_max = std::abs(g0);

  const double zv = model_.z * volume_;
  double coef = 1.0;
  std::vector<double> cross;
  for (const Order& o : orders_) {
    coef *= zv / static_cast<double>(o.n);
    cross.assign(o.nodes.size(), 1.0);
    if (!near.empty()) {
      for (std::size_t q = 0; q < o.nodes.size(); ++q) {
        double e = 0.0;
        for (const Point* y : near) e += model_.phi.at_r2(dom.distance2(o.nodes[q], *y));
        cross[q] = boltzmann(model_.beta, e);
      }
    }
    double zw = 0.0, nw = 0.0;
    const std::size_t tuples = o.weight.size();
    for (std::size_t i = 0; i < tuples; ++i) {
      double w = o.weight[i];
      for (std::size_t s = 0; s < o.n; ++s) w *= cross[o.ids[i * o.n + s]];
      if (w == 0.0) continue;
      for (std::size_t j = 0; j < k; ++j) t[j] = t_out[j] + o.f_sum[i * k + j];
      const double g = F_.eval_pairings(t);
      g_max = std::max(g_max, std::abs(g));
      zw += w;
      nw += w * g;
    }
    const double scale = coef / static_cast<double>(o.points);
    Z += zw * scale;
    num += nw * scale;
  }

  Result r;
  r.Z = Z.value();
  r.value = num.value() / r.Z;
  const auto& claim = model_.phi.claimed_stability();
  if (!claim) {
    r.tail_bound = std::numeric_limits<double>::infinity();
  } else {
    const double x = zv * std::exp(model_.beta * claim->b) * std::exp(model_.beta * model_.psi.lower_bound()) *
                     std::exp(model_.beta * static_cast<double>(interacting) * -phi_min_);
    const double gb = g_bound_ > 0.0 ? g_bound_ : g_max;
    r.tail_bound = 2.0 * gb * poisson_tail(x, trunc_.n_max) / r.Z;
  }
  return r;
}

} // namespace gibbslab
