#include "gibbslab/verify.hpp"

#include <cmath>
#include <limits>

#include "gibbslab/stats.hpp"

namespace gibbslab {

std::vector<std::uint64_t> ChainPlan::seeds() const {
  if (!explicit_seeds.empty()) return explicit_seeds;
  std::vector<std::uint64_t> s;
  for (std::size_t i = 0; i < chains; ++i) s.push_back(derive_seed(master_seed, i));
  return s;
}

double z_score_of(const Estimate& residual) {
  if (residual.std_error > 0.0) return residual.mean / residual.std_error;
  if (residual.mean == 0.0) return 0.0;
  return std::copysign(std::numeric_limits<double>::infinity(), residual.mean);
}

namespace {

Check make_check(std::string name, double estimate, double std_error, double reference, double extra_error,
                 double tol) {
  Check c;
  c.name = std::move(name);
  c.estimate = estimate;
  c.reference = reference;
  c.std_error = std::hypot(std_error, extra_error);
  const double diff = estimate - reference;
  c.z_score = c.std_error > 0.0 ? diff / c.std_error : (diff == 0.0 ? 0.0 : std::copysign(INFINITY, diff));
  c.pass = std::abs(c.z_score) <= tol;
  return c;
}

void finish(VerificationReport& r) {
  r.z_score = z_score_of(r.residual);
  bool ok = r.one_sided ? r.z_score <= r.tolerance_sigma : std::abs(r.z_score) <= r.tolerance_sigma;
  for (const auto& c : r.checks) ok = ok && c.pass;
  r.pass = ok;
  r.verdict = ok ? Verdict::pass : Verdict::fail;
}

VerificationReport start(std::string name, const ModelSpec& model, const ChainPlan& plan, double tol) {
  VerificationReport r;
  r.test = std::move(name);
  r.tolerance_sigma = tol;
  r.model_hash = model_hash(model);
  r.seeds = plan.seeds();
  return r;
}

std::vector<double> collect(const std::vector<ChainResult>& runs, std::size_t column) {
  std::vector<double> out;
  for (const auto& c : runs)
    if (c.trace)
      for (const auto& rec : c.trace->records) out.push_back(rec.values[column]);
  return out;
}

Configuration outside(const Configuration& gamma, const Window& w) {
  std::vector<Point> pts;
  for (const Point& p : gamma)
    if (!w.contains(gamma.domain(), p)) pts.push_back(p);
  return Configuration(gamma.domain(), std::move(pts));
}

} // namespace

Json to_json(const VerificationReport& r) {
  Json checks = Json::array();
  for (const auto& c : r.checks)
    checks.push_back(Json{{"name", c.name},
                          {"estimate", number(c.estimate)},
                          {"reference", number(c.reference)},
                          {"std_error", number(c.std_error)},
                          {"z_score", number(c.z_score)},
                          {"pass", c.pass}});
  Json j{{"test", r.test},
         {"lhs", to_json(r.lhs)},
         {"rhs", to_json(r.rhs)},
         {"residual", to_json(r.residual)},
         {"z_score", number(r.z_score)},
         {"tolerance_sigma", r.tolerance_sigma},
         {"one_sided", r.one_sided},
         {"pass", r.pass},
         {"verdict", to_string(r.verdict)},
         {"model_hash", r.model_hash},
         {"seeds", r.seeds},
         {"checks", checks},
         {"note", r.note}};
  j["trimmed_residual"] = r.trimmed_residual ? number(*r.trimmed_residual) : Json(nullptr);
  j["tail_bound"] = r.tail_bound ? number(*r.tail_bound) : Json(nullptr);
  return j;
}

VerificationReport verify_ibp(const ModelSpec& model, const CylinderFunction& F, const Vec& v, const ChainPlan& plan,
                              const std::optional<OracleRequest>& oracle, double tol) {
  VerificationReport rep = start("ibp", model, plan, tol);
  const double beta = model.beta;
  auto lhs = [&F, v](const Configuration& g) { return dot(v, F.grad_gamma(g)); };
  auto rhs = [&F, &model, v, beta](const Configuration& g) {
    if (model.psi.is_zero()) return 0.0;
    Vec s{};
    for (const Point& x : g) {
      const Vec gx = model.psi.gradient(x);
      for (std::size_t i = 0; i < kMaxDim; ++i) s[i] += gx[i];
    }
    const double vs = dot(v, s);
    if (!std::isfinite(vs)) throw VerificationAborted("psi gradient is not finite at sampled configuration " + g.to_string());
    return beta * F.eval(g) * vs;
  };
  std::vector<Observable> obs{{"lhs", lhs}, {"rhs", rhs}, {"residual", [=](const Configuration& g) { return lhs(g) - rhs(g); }}};

  ChainParams p = plan.params;
  p.record_trace = true;
  const auto runs = run_chains(model, p, obs, plan.seeds(), plan.workers);
  const auto est = merge_estimates(runs);
  rep.lhs = est[0];
  rep.rhs = est[1];
  rep.residual = est[2];
  rep.trimmed_residual = stats::trimmed_mean(collect(runs, 2), 0.1);

  if (oracle) {
    const std::vector<Observable> exact_obs{obs[0], obs[1]};
    const auto ex = exact_expectation(model, exact_obs, oracle->trunc, oracle->options);
    rep.checks.push_back(make_check("lhs_vs_oracle", rep.lhs.mean, rep.lhs.std_error, ex.values[0],
                                    std::hypot(ex.quadrature_deltas[0], ex.tail_bounds[0]), tol));
    rep.checks.push_back(make_check("rhs_vs_oracle", rep.rhs.mean, rep.rhs.std_error, ex.values[1],
                                    std::hypot(ex.quadrature_deltas[1], ex.tail_bounds[1]), tol));
  }
  finish(rep);
  return rep;
}

VerificationReport verify_reweighting(const ModelSpec& model_m, const ModelSpec& model_psi, const CylinderFunction& F,
                                      const ChainPlan& plan, const std::optional<OracleRequest>& oracle, double tol) {
  if (!model_m.psi.is_zero()) throw std::invalid_argument("reweighting: reference model must have psi = 0");
  if (!(model_m.domain == model_psi.domain) || model_m.z != model_psi.z || model_m.beta != model_psi.beta ||
      to_json(model_m.phi) != to_json(model_psi.phi))
    throw std::invalid_argument("reweighting: models must share z, beta, phi and the domain");
  VerificationReport rep = start("reweighting", model_psi, plan, tol);
  const double beta = model_psi.beta;
  const OneBodyPotential& psi = model_psi.psi;
  auto weight = [&psi, beta](const Configuration& g) { return std::exp(-beta * one_body_energy(psi, g)); };
  auto f = [&F](const Configuration& g) { return F.eval(g); };

  const auto runs_psi = run_chains(model_psi, plan.params, {{"F", f}}, plan.seeds(), plan.workers);
  const auto runs_m = run_chains(model_m, plan.params,
                                 {{"F_weighted", [=](const Configuration& g) { return f(g) * weight(g); }}, {"weight", weight}},
                                 plan.seeds(), plan.workers);
  const auto est_psi = merge_estimates(runs_psi);
  const auto est_m = merge_estimates(runs_m);
  const Estimate& xi_hat = est_m[1];
  if (!(xi_hat.mean > 0.0) || xi_hat.mean <= 3.0 * xi_hat.std_error)
    throw VerificationAborted("estimated Xi_psi is consistent with zero (mean " + std::to_string(xi_hat.mean) +
                              ", std error " + std::to_string(xi_hat.std_error) + "); psi is too singular for this box");
  rep.lhs = est_psi[0];
  rep.rhs = ratio(est_m[0], xi_hat);
  rep.residual = difference_independent(rep.lhs, rep.rhs);
  rep.note = "xi_hat=" + std::to_string(xi_hat.mean) + " se=" + std::to_string(xi_hat.std_error);

  if (oracle) {
    const auto xi = xi_psi_exact(model_psi, model_m, oracle->trunc, oracle->options);
    rep.checks.push_back(make_check("xi_psi_vs_oracle", xi_hat.mean, xi_hat.std_error, xi.value,
                                    std::hypot(xi.quadrature_delta, xi.tail_bound), tol));
    const auto ex = exact_expectation(model_psi, {{"F", f}}, oracle->trunc, oracle->options);
    const double extra = std::hypot(ex.quadrature_deltas[0], ex.tail_bounds[0]);
    rep.checks.push_back(make_check("lhs_vs_oracle", rep.lhs.mean, rep.lhs.std_error, ex.values[0], extra, tol));
    rep.checks.push_back(make_check("rhs_vs_oracle", rep.rhs.mean, rep.rhs.std_error, ex.values[0], extra, tol));
  }
  finish(rep);
  return rep;
}

VerificationReport verify_translation_invariance(const ModelSpec& model, const CylinderFunction& F, const Vec& v,
                                                 const ChainPlan& plan, double tol) {
  const ModelSpec base = model.without_psi();
  VerificationReport rep = start("translation_invariance", base, plan, tol);
  const Shift s = base.domain.shift(v);
  auto shifted = [&F, s](const Configuration& g) { return F.eval(translate(g, s)); };
  auto plain = [&F](const Configuration& g) { return F.eval(g); };
  const auto runs = run_chains(base, plan.params,
                               {{"shifted", shifted}, {"plain", plain},
                                {"residual", [=](const Configuration& g) { return shifted(g) - plain(g); }}},
                               plan.seeds(), plan.workers);
  const auto est = merge_estimates(runs);
  rep.lhs = est[0];
  rep.rhs = est[1];
  rep.residual = est[2];
  finish(rep);
  return rep;
}

VerificationReport verify_dlr(const ModelSpec& model, const CylinderFunction& F, const Window& window,
                              const ChainPlan& plan, const TruncationSpec& trunc,
                              const WindowIntegrator::Options& inner, double tol) {
  VerificationReport rep = start("dlr", model, plan, tol);
  const WindowIntegrator integ(model, F, window, trunc, inner);

  ChainParams p = plan.params;
  p.record_trace = true;
  p.keep_configurations = true;
  auto runs = run_chains(model, p, {}, plan.seeds(), plan.workers);

  std::vector<Estimate> lhs(runs.size()), rhs(runs.size()), res(runs.size());
  std::vector<double> tails(runs.size(), 0.0);
  parallel_for(runs.size(), plan.workers, [&](std::size_t c) {
    const auto& configs = runs[c].trace->configurations;
    std::vector<double> a, b, r;
    a.reserve(configs.size());
    b.reserve(configs.size());
    r.reserve(configs.size());
    for (const auto& g : configs) {
      const auto in = integ.integrate(outside(g, window));
      const double f = F.eval(g);
      a.push_back(f);
      b.push_back(in.value);
      r.push_back(f - in.value);
      tails[c] = std::max(tails[c], in.tail_bound);
    }
    lhs[c] = estimate_of(a, p.batches);
    rhs[c] = estimate_of(b, p.batches);
    res[c] = estimate_of(r, p.batches);
    runs[c].trace.reset();
  });
  rep.lhs = merge(lhs);
  rep.rhs = merge(rhs);
  rep.residual = merge(res);
  double tail = 0.0;
  for (double t : tails) tail = std::max(tail, t);
  rep.tail_bound = tail;
  finish(rep);
  if (!(tail <= 0.5 * tol * rep.residual.std_error)) {
    rep.pass = false;
    rep.verdict = Verdict::inconclusive;
    rep.note = "truncation tail bound exceeds half the residual tolerance";
  }
  return rep;
}

VerificationReport verify_l1_bound(const ModelSpec& model, const std::function<double(const Point&)>& f,
                                   const ChainPlan& plan, const DiagnoseOptions& diag, const QuadratureSpec& quad,
                                   double tol) {
  VerificationReport rep = start("l1_bound", model, plan, tol);
  rep.one_sided = true;
  ChainParams p = plan.params;
  p.record_trace = true;
  p.keep_configurations = true;
  const auto runs = run_chains(model, p, {{"pairing", [&f](const Configuration& g) { return pair_sum(f, g); }}},
                               plan.seeds(), plan.workers);
  const auto est = merge_estimates(runs);
  const DiagnosticsReport d = diagnose(model, runs, diag);
  const auto integral = midpoint_integral(
      model.domain, [&](const Point& x) { return f(x) * boltzmann(model.beta, model.psi.evaluate(x)); }, quad);
  const double mass = model.z * integral.value;

  rep.lhs = est[0];
  rep.rhs.n = rep.lhs.n;
  rep.rhs.mean = d.xi_hat * mass;
  rep.rhs.std_error = d.xi_std_error * mass;
  rep.residual.n = rep.lhs.n;
  rep.residual.mean = rep.lhs.mean - rep.rhs.mean;
  rep.residual.std_error = rep.lhs.std_error;
  rep.residual.ess = rep.lhs.ess;
  rep.note = "xi_hat=" + std::to_string(d.xi_hat) + " margin=" + std::to_string(rep.rhs.mean - rep.lhs.mean);
  if (model.phi.is_zero())
    rep.checks.push_back(make_check("poisson_campbell", rep.lhs.mean, rep.lhs.std_error, mass, integral.refinement_delta, tol));
  finish(rep);
  return rep;
}

} // namespace gibbslab
