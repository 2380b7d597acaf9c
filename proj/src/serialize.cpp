#include "gibbslab/serialize.hpp"

#include <cmath>
#include <cstdio>
#include <variant>

namespace gibbslab {

namespace {
template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

Json point_json(const TorusDomain& dom, const Point& p) {
  Json a = Json::array();
  for (std::size_t i = 0; i < dom.dim(); ++i) a.push_back(dom.coord(p, i));
  return a;
}
} // namespace

Json number(double x) { return std::isfinite(x) ? Json(x) : Json(nullptr); }

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t x) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(x));
  return buf;
}

Json to_json(const TorusDomain& domain) { return Json{{"dim", domain.dim()}, {"sides", domain.sides()}}; }

Json to_json(const PairPotential& phi) {
  Json j;
  j["label"] = phi.label();
  std::visit(overloaded{
                 [&](const NoInteraction&) { j["kind"] = "zero"; },
                 [&](const LennardJones& m) {
                   j["kind"] = "lennard-jones";
                   j["epsilon"] = m.epsilon;
                   j["sigma"] = m.sigma;
                   j["cutoff"] = m.cutoff;
                   j["shift"] = m.shift;
                 },
                 [&](const SoftSphere& m) {
                   j["kind"] = "soft-sphere";
                   j["epsilon"] = m.epsilon;
                   j["sigma"] = m.sigma;
                   j["cutoff"] = m.cutoff;
                 },
                 [&](const HardCore& m) {
                   j["kind"] = "hard-core";
                   j["diameter"] = m.diameter;
                 },
                 [&](const GaussianWell& m) {
                   j["kind"] = "gaussian-well";
                   j["depth"] = m.depth;
                   j["width"] = m.width;
                   j["cutoff"] = m.cutoff;
                 },
                 [&](const TabulatedRadial& m) {
                   j["kind"] = "tabulated";
                   j["radii"] = m.radii;
                   j["values"] = m.values;
                 },
             },
             phi.model());
  if (const auto& c = phi.claimed_stability()) j["claimed_stability"] = Json{{"a", c->a}, {"b", c->b}};
  else j["claimed_stability"] = nullptr;
  return j;
}

Json to_json(const OneBodyPotential& psi) {
  Json j;
  j["label"] = psi.label();
  const TorusDomain& dom = psi.domain();
  std::visit(overloaded{
                 [&](const ZeroField&) { j["kind"] = "zero"; },
                 [&](const ConstantField& m) {
                   j["kind"] = "constant";
                   j["value"] = m.value;
                 },
                 [&](const BumpField& m) {
                   j["kind"] = "bump";
                   j["center"] = point_json(dom, m.bump.center);
                   j["radius"] = m.bump.radius;
                   j["height"] = m.height;
                 },
                 [&](const SingularPower& m) {
                   j["kind"] = "singular-power";
                   j["center"] = point_json(dom, m.center);
                   j["k"] = m.k;
                   j["radius"] = m.radius;
                   j["strength"] = m.strength;
                 },
             },
             psi.model());
  return j;
}

Json to_json(const ModelSpec& model) {
  return Json{{"domain", to_json(model.domain)},
              {"z", model.z},
              {"beta", model.beta},
              {"phi", to_json(model.phi)},
              {"psi", to_json(model.psi)}};
}

Json to_json(const Configuration& gamma) {
  Json pts = Json::array();
  for (const Point& p : gamma) pts.push_back(point_json(gamma.domain(), p));
  return pts;
}

Json to_json(const Estimate& e) {
  Json bm = Json::array();
  for (double x : e.batch_means) bm.push_back(number(x));
  return Json{{"mean", number(e.mean)},
              {"std_error", number(e.std_error)},
              {"ess", number(e.ess)},
              {"n", e.n},
              {"batch_means", bm}};
}

Json to_json(const MoveStats& s) {
  return Json{{"proposed", {{"birth", s.proposed[0]}, {"death", s.proposed[1]}, {"displacement", s.proposed[2]}}},
              {"accepted", {{"birth", s.accepted[0]}, {"death", s.accepted[1]}, {"displacement", s.accepted[2]}}},
              {"max_energy_drift", number(s.max_energy_drift)}};
}

Json to_json(const PartitionResult& p) {
  Json terms = Json::array();
  for (const auto& t : p.terms)
    terms.push_back(Json{{"n", t.n}, {"method", t.method}, {"points", t.points}, {"term", number(t.term)},
                         {"delta", number(t.delta)}});
  return Json{{"Z", number(p.Z)},
              {"tail_bound", number(p.tail_bound)},
              {"quadrature_delta", number(p.quadrature_delta)},
              {"evaluations", p.evaluations},
              {"terms", terms}};
}

Json to_json(const DiagnosticsReport& r) {
  Json hist = Json::array();
  for (const auto& b : r.histogram)
    hist.push_back(Json{{"index", b.index},
                        {"mean_count", number(b.mean_count.mean)},
                        {"mean_count_std_error", number(b.mean_count.std_error)},
                        {"reference", number(b.reference)},
                        {"ratio", number(b.ratio)},
                        {"ratio_std_error", number(b.ratio_std_error)}});
  return Json{{"samples", r.samples},
              {"empty_samples", r.empty_samples},
              {"moves", to_json(r.moves)},
              {"acceptance", {{"birth", number(r.acceptance_birth)},
                              {"death", number(r.acceptance_death)},
                              {"displacement", number(r.acceptance_displacement)}}},
              {"autocorrelation_time", number(r.autocorrelation_time)},
              {"ess", number(r.ess)},
              {"temperedness", r.temperedness},
              {"cell_edge", number(r.cell_edge)},
              {"histogram", hist},
              {"xi_hat", number(r.xi_hat)},
              {"xi_std_error", number(r.xi_std_error)}};
}

Json to_json(const StabilityReport& r) {
  Json j{{"verdict", to_string(r.verdict)},
         {"margin", number(r.margin)},
         {"evaluations", r.evaluations},
         {"detail", r.detail}};
  j["witness"] = r.witness ? to_json(*r.witness) : Json(nullptr);
  j["envelope_integral"] = r.envelope_integral ? number(*r.envelope_integral) : Json(nullptr);
  return j;
}

std::string model_hash(const ModelSpec& model) { return hex64(fnv1a64(to_json(model).dump())); }

} // namespace gibbslab
