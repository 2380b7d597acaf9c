#include "gibbslab/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <mutex>
#include <set>
#include <sstream>

#include "gibbslab/diagnostics.hpp"
#include "gibbslab/oracle.hpp"
#include "gibbslab/stability.hpp"
#include "gibbslab/verify.hpp"

#ifndef GIBBSLAB_VERSION
#define GIBBSLAB_VERSION "0.0.0"
#endif

namespace gibbslab::experiment {

std::string version_string() { return std::string("gibbslab ") + GIBBSLAB_VERSION; }

namespace fs = std::filesystem;

namespace {

// ---------------------------------------------------------------------------
// Parameter schemas

struct Param {
  std::string name;
  /// number, positive, nonnegative, integer (>= 1), count (>= 0), seed,
  /// vector, number|null, bool, string, outer, outer[]
  std::string type;
  Json fallback;  // null with required = true means no default
  bool required = false;
  std::string doc;
};

struct Preset {
  std::string id;
  std::string doc;
  std::vector<Param> params;
};

Param req(std::string name, std::string type, std::string doc) { return {std::move(name), std::move(type), nullptr, true, std::move(doc)}; }
Param opt(std::string name, std::string type, Json def, std::string doc) {
  return {std::move(name), std::move(type), std::move(def), false, std::move(doc)};
}

const std::vector<Preset>& pair_presets() {
  static const std::vector<Preset> p{
      {"zero", "no interaction", {}},
      {"lj-truncated",
       "Lennard-Jones 4 eps [(s/r)^12 - (s/r)^6], shifted to vanish at the cutoff",
       {opt("epsilon", "positive", 1.0, "well depth"), opt("sigma", "positive", 1.0, "length scale"),
        opt("cutoff", "positive", 2.5, "interaction range"),
        opt("stability_b", "number|null", nullptr, "claimed stability constant b; null uses the built-in bound")}},
      {"soft-sphere",
       "eps (s/r)^12 up to the cutoff",
       {opt("epsilon", "positive", 1.0, "strength"), opt("sigma", "positive", 1.0, "length scale"),
        opt("cutoff", "positive", 2.5, "interaction range")}},
      {"hard-core", "infinite below the diameter, zero beyond", {req("diameter", "positive", "exclusion diameter")}},
      {"gaussian-attractive",
       "-depth exp(-r^2 / width^2); not stable, no claimed constants",
       {opt("depth", "positive", 1.0, "well depth"), opt("width", "positive", 1.0, "well width")}},
      {"tabulated",
       "radial table with linear interpolation, zero beyond the last radius",
       {req("radii", "vector", "increasing radii"), req("values", "vector", "phi at each radius"),
        opt("stability_a", "number|null", nullptr, "claimed a (set together with b)"),
        opt("stability_b", "number|null", nullptr, "claimed b (set together with a)")}},
  };
  return p;
}

const std::vector<Preset>& field_presets() {
  static const std::vector<Preset> p{
      {"psi-zero", "psi = 0", {}},
      {"psi-const", "psi = value everywhere", {req("value", "number", "constant value")}},
      {"psi-bump",
       "height * exp(1 - 1/(1 - |x-c|^2/radius^2)) inside the radius",
       {req("center", "vector", "bump center"), opt("radius", "positive", 1.0, "support radius"),
        opt("height", "number", 1.0, "peak value")}},
      {"psi-singular-k",
       "strength * (|x-c|^-k - radius^-k) inside the radius, 0 outside",
       {req("center", "vector", "singular point"), req("k", "integer", "power of the singularity"),
        opt("radius", "positive", 1.0, "support radius"), opt("strength", "positive", 1.0, "prefactor")}},
  };
  return p;
}

const std::vector<Preset>& outer_presets() {
  static const std::vector<Preset> p{
      {"affine", "w . t + bias", {req("weights", "vector", "one weight per component"), opt("bias", "number", 0.0, "offset")}},
      {"tanh", "tanh(inner(t))", {req("inner", "outer", "inner map")}},
      {"exp", "exp(inner(t))", {req("inner", "outer", "inner map")}},
      {"product", "product of factors", {req("factors", "outer[]", "factor maps of equal arity")}},
  };
  return p;
}

const std::vector<Preset>& component_presets() {
  static const std::vector<Preset> p{
      {"bump",
       "scale * exp(1 - 1/(1 - |x-c|^2/radius^2)) inside the radius",
       {req("center", "vector", "bump center"), opt("radius", "positive", 1.0, "support radius"),
        opt("scale", "number", 1.0, "peak value")}},
      {"uniform", "constant over the torus", {opt("value", "number", 1.0, "constant value")}},
  };
  return p;
}

const Preset* find_preset(const std::vector<Preset>& list, const std::string& id) {
  for (const auto& p : list)
    if (p.id == id) return &p;
  return nullptr;
}

std::string preset_ids(const std::vector<Preset>& list) {
  std::string s;
  for (const auto& p : list) s += (s.empty() ? "" : ", ") + p.id;
  return s;
}

const std::vector<std::string> kTestKinds{"ibp", "reweighting", "translation", "dlr",
                                          "l1_bound", "oracle", "sample", "check_potential"};
const std::vector<std::string> kBuiltinObservables{"count", "pair_energy", "one_body_energy", "energy"};

// ---------------------------------------------------------------------------
// Validation helpers

std::string key_path(const std::string& base, const std::string& key) { return base + "." + key; }
std::string index_path(const std::string& base, std::size_t i) { return base + "[" + std::to_string(i) + "]"; }

class Obj {
public:
  Obj(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw SchemaError(path_, "expected an object");
  }
  const Json* get(const std::string& k) {
    seen_.insert(k);
    auto it = j_.find(k);
    return it == j_.end() ? nullptr : &*it;
  }
  const Json& need(const std::string& k) {
    const Json* v = get(k);
    if (!v) throw SchemaError(at(k), "required key is missing");
    return *v;
  }
  [[nodiscard]] std::string at(const std::string& k) const { return key_path(path_, k); }
  [[nodiscard]] const std::string& path() const { return path_; }
  void done() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw SchemaError(at(it.key()), "unknown key");
  }

private:
  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

double as_number(const Json& v, const std::string& path) {
  if (!v.is_number()) throw SchemaError(path, "expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw SchemaError(path, "expected a finite number");
  return x;
}

double as_positive(const Json& v, const std::string& path) {
  const double x = as_number(v, path);
  if (!(x > 0.0)) throw SchemaError(path, "expected a positive number");
  return x;
}

double as_nonnegative(const Json& v, const std::string& path) {
  const double x = as_number(v, path);
  if (x < 0.0) throw SchemaError(path, "expected a non-negative number");
  return x;
}

std::uint64_t as_unsigned(const Json& v, const std::string& path, std::uint64_t min = 0) {
  if (v.is_number_unsigned()) {
    const auto x = v.get<std::uint64_t>();
    if (x < min) throw SchemaError(path, "expected an integer >= " + std::to_string(min));
    return x;
  }
  if (v.is_number_integer()) {
    const auto x = v.get<std::int64_t>();
    if (x < 0 || static_cast<std::uint64_t>(x) < min)
      throw SchemaError(path, "expected an integer >= " + std::to_string(min));
    return static_cast<std::uint64_t>(x);
  }
  if (v.is_number_float()) {
    const double x = v.get<double>();
    if (x >= static_cast<double>(min) && x < 0x1.0p63 && x == std::floor(x)) return static_cast<std::uint64_t>(x);
  }
  throw SchemaError(path, "expected an integer >= " + std::to_string(min));
}

bool as_bool(const Json& v, const std::string& path) {
  if (!v.is_boolean()) throw SchemaError(path, "expected true or false");
  return v.get<bool>();
}

std::string as_string(const Json& v, const std::string& path) {
  if (!v.is_string()) throw SchemaError(path, "expected a string");
  return v.get<std::string>();
}

std::vector<double> as_vector(const Json& v, const std::string& path, std::optional<std::size_t> size = {}) {
  if (!v.is_array()) throw SchemaError(path, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(as_number(v[i], index_path(path, i)));
  if (size && out.size() != *size)
    throw SchemaError(path, "expected " + std::to_string(*size) + " entries, got " + std::to_string(out.size()));
  return out;
}

Json normalize_outer(const Json& raw, const std::string& path);

Json normalize_param(const Param& p, const Json* v, const std::string& path) {
  if (!v) {
    if (p.required) throw SchemaError(path, "required key is missing");
    return p.fallback;
  }
  const std::string& t = p.type;
  if (t == "number") return as_number(*v, path);
  if (t == "positive") return as_positive(*v, path);
  if (t == "nonnegative") return as_nonnegative(*v, path);
  if (t == "integer") return as_unsigned(*v, path, 1);
  if (t == "count" || t == "seed") return as_unsigned(*v, path, 0);
  if (t == "vector") return as_vector(*v, path);
  if (t == "bool") return as_bool(*v, path);
  if (t == "string") return as_string(*v, path);
  if (t == "number|null") return v->is_null() ? Json(nullptr) : Json(as_number(*v, path));
  if (t == "outer") return normalize_outer(*v, path);
  if (t == "outer[]") {
    if (!v->is_array() || v->empty()) throw SchemaError(path, "expected a non-empty array of maps");
    Json a = Json::array();
    for (std::size_t i = 0; i < v->size(); ++i) a.push_back(normalize_outer((*v)[i], index_path(path, i)));
    return a;
  }
  throw std::logic_error("unknown parameter type " + t);
}

/// Fills `out` with every parameter of `preset` read from `obj`.
void normalize_params(const Preset& preset, Obj& obj, Json& out) {
  for (const auto& p : preset.params) out[p.name] = normalize_param(p, obj.get(p.name), obj.at(p.name));
}

/// {"preset": id, "params": {...}} against one of the preset lists.
Json normalize_preset_block(const Json& raw, const std::string& path, const std::vector<Preset>& list) {
  Obj o(raw, path);
  const std::string id = as_string(o.need("preset"), o.at("preset"));
  const Preset* p = find_preset(list, id);
  if (!p) throw SchemaError(o.at("preset"), "unknown preset '" + id + "' (known: " + preset_ids(list) + ")");
  static const Json empty = Json::object();
  const Json* params = o.get("params");
  Obj po(params ? *params : empty, o.at("params"));
  Json out{{"preset", id}, {"params", Json::object()}};
  normalize_params(*p, po, out["params"]);
  po.done();
  o.done();
  return out;
}

/// Inline {"kind": id, ...params} against one of the preset lists.
Json normalize_kind_block(const Json& raw, const std::string& path, const std::vector<Preset>& list) {
  Obj o(raw, path);
  const std::string id = as_string(o.need("kind"), o.at("kind"));
  const Preset* p = find_preset(list, id);
  if (!p) throw SchemaError(o.at("kind"), "unknown kind '" + id + "' (known: " + preset_ids(list) + ")");
  Json out{{"kind", id}};
  normalize_params(*p, o, out);
  o.done();
  return out;
}

Json normalize_outer(const Json& raw, const std::string& path) { return normalize_kind_block(raw, path, outer_presets()); }

Json normalize_component(const Json& raw, const std::string& path) {
  return normalize_kind_block(raw, path, component_presets());
}

Json normalize_move_mix(const Json& raw, const Json& base, const std::string& path) {
  Obj o(raw, path);
  Json out = base;
  if (auto v = o.get("birth")) out["birth"] = as_positive(*v, o.at("birth"));
  if (auto v = o.get("death")) out["death"] = as_positive(*v, o.at("death"));
  if (auto v = o.get("kick_scale")) out["kick_scale"] = as_nonnegative(*v, o.at("kick_scale"));
  o.done();
  return out;
}

Json default_chain() {
  return Json{{"sweeps", 20000},
              {"burn_in", 2000},
              {"thin", 1},
              {"master_seed", 1},
              {"chains", 4},
              {"seeds", Json::array()},
              {"move_mix", Json{{"birth", 0.25}, {"death", 0.25}, {"kick_scale", 0.0}}},
              {"batches", kDefaultBatches},
              {"resync_interval", 4096}};
}

ChainPlan plan_from(const Json& c, std::size_t workers);

Json normalize_chain(const Json& raw, const Json& base, const std::string& path) {
  Obj o(raw, path);
  Json out = base;
  if (auto v = o.get("sweeps")) out["sweeps"] = as_unsigned(*v, o.at("sweeps"), 1);
  if (auto v = o.get("burn_in")) out["burn_in"] = as_unsigned(*v, o.at("burn_in"));
  if (auto v = o.get("thin")) out["thin"] = as_unsigned(*v, o.at("thin"), 1);
  if (auto v = o.get("master_seed")) out["master_seed"] = as_unsigned(*v, o.at("master_seed"));
  if (auto v = o.get("chains")) out["chains"] = as_unsigned(*v, o.at("chains"), 1);
  if (auto v = o.get("seeds")) {
    if (!v->is_array()) throw SchemaError(o.at("seeds"), "expected an array of seeds");
    Json s = Json::array();
    for (std::size_t i = 0; i < v->size(); ++i) s.push_back(as_unsigned((*v)[i], index_path(o.at("seeds"), i)));
    out["seeds"] = s;
  }
  if (auto v = o.get("move_mix")) out["move_mix"] = normalize_move_mix(*v, out["move_mix"], o.at("move_mix"));
  if (auto v = o.get("batches")) out["batches"] = as_unsigned(*v, o.at("batches"), 2);
  if (auto v = o.get("resync_interval")) out["resync_interval"] = as_unsigned(*v, o.at("resync_interval"), 1);
  o.done();
  // An explicit seed list fixes the chain count; a bare chain count drops
  // any inherited list.
  if (raw.contains("seeds") && !out["seeds"].empty()) {
    if (raw.contains("chains") && out["chains"].get<std::size_t>() != out["seeds"].size())
      throw SchemaError(path, "chains disagrees with the length of seeds");
    out["chains"] = out["seeds"].size();
  } else if (raw.contains("chains")) {
    out["seeds"] = Json::array();
  } else if (!out["seeds"].empty()) {
    out["chains"] = out["seeds"].size();
  }
  try {
    plan_from(out, 1).params.validate();
  } catch (const std::invalid_argument& e) {
    throw SchemaError(path, e.what());
  }
  return out;
}

Json default_oracle() {
  const OracleOptions d;
  return Json{{"n_max", 10},
              {"nodes_per_axis", 64},
              {"tensor_budget", d.tensor_budget},
              {"lattice_points", d.lattice_points},
              {"max_evaluations", d.max_evaluations}};
}

Json normalize_oracle(const Json& raw, const std::string& path) {
  Obj o(raw, path);
  Json out = default_oracle();
  if (auto v = o.get("n_max")) out["n_max"] = as_unsigned(*v, o.at("n_max"), 1);
  if (auto v = o.get("nodes_per_axis")) out["nodes_per_axis"] = as_unsigned(*v, o.at("nodes_per_axis"), 2);
  if (auto v = o.get("tensor_budget")) out["tensor_budget"] = as_unsigned(*v, o.at("tensor_budget"), 1);
  if (auto v = o.get("lattice_points")) out["lattice_points"] = as_unsigned(*v, o.at("lattice_points"), 2);
  if (auto v = o.get("max_evaluations")) out["max_evaluations"] = as_unsigned(*v, o.at("max_evaluations"), 1);
  o.done();
  return out;
}

Json normalize_output(const Json& raw, const std::string& path) {
  Obj o(raw, path);
  Json out{{"directory", "gibbslab-out"}, {"trace_csv", false}, {"snapshots", false}, {"cache", true}};
  if (auto v = o.get("directory")) {
    out["directory"] = as_string(*v, o.at("directory"));
    if (out["directory"].get<std::string>().empty()) throw SchemaError(o.at("directory"), "must not be empty");
  }
  for (const char* k : {"trace_csv", "snapshots", "cache"})
    if (auto v = o.get(k)) out[k] = as_bool(*v, o.at(k));
  o.done();
  return out;
}

Json normalize_function(const Json& raw, const std::string& path) {
  Obj o(raw, path);
  Json out;
  out["outer"] = normalize_outer(o.need("outer"), o.at("outer"));
  const Json& comps = o.need("components");
  if (!comps.is_array() || comps.empty()) throw SchemaError(o.at("components"), "expected a non-empty array");
  out["components"] = Json::array();
  for (std::size_t i = 0; i < comps.size(); ++i)
    out["components"].push_back(normalize_component(comps[i], index_path(o.at("components"), i)));
  o.done();
  return out;
}

Json normalize_envelope(const Json& raw, const std::string& path) {
  Obj o(raw, path);
  const std::string kind = as_string(o.need("kind"), o.at("kind"));
  Json out{{"kind", kind}};
  if (kind == "power") {
    out["c"] = o.get("c") ? as_positive(*o.get("c"), o.at("c")) : 1.0;
  } else if (kind == "step") {
    out["level"] = o.get("level") ? as_nonnegative(*o.get("level"), o.at("level")) : 1.0;
    out["radius"] = o.get("radius") ? as_positive(*o.get("radius"), o.at("radius")) : 1.0;
  } else {
    throw SchemaError(o.at("kind"), "unknown envelope kind '" + kind + "' (known: power, step)");
  }
  o.done();
  return out;
}

bool uses_chains(const std::string& kind) { return kind != "oracle" && kind != "check_potential"; }
bool uses_tolerance(const std::string& kind) { return kind != "oracle" && kind != "sample" && kind != "check_potential"; }

std::string as_verdict(const Json& v, const std::string& path) {
  const std::string s = as_string(v, path);
  if (s != "pass" && s != "fail" && s != "inconclusive") throw SchemaError(path, "expected pass, fail or inconclusive");
  return s;
}

Json normalize_observables(const Json* v, const std::string& path) {
  if (!v) return Json::array({"count"});
  if (!v->is_array()) throw SchemaError(path, "expected an array of observable names");
  Json out = Json::array();
  for (std::size_t i = 0; i < v->size(); ++i) out.push_back(as_string((*v)[i], index_path(path, i)));
  return out;
}

Json normalize_test(const Json& raw, const std::string& path, const Json& chain, const Json& phi) {
  Obj o(raw, path);
  Json out;
  const std::string name = as_string(o.need("name"), o.at("name"));
  if (name.empty() || name.find_first_not_of("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_.-") !=
                          std::string::npos || name[0] == '.')
    throw SchemaError(o.at("name"), "test names use letters, digits, '_', '-' and '.'");
  out["name"] = name;
  const std::string kind = as_string(o.need("kind"), o.at("kind"));
  if (std::find(kTestKinds.begin(), kTestKinds.end(), kind) == kTestKinds.end()) {
    std::string known;
    for (const auto& k : kTestKinds) known += (known.empty() ? "" : ", ") + k;
    throw SchemaError(o.at("kind"), "unknown test kind '" + kind + "' (known: " + known + ")");
  }
  out["kind"] = kind;
  if (uses_tolerance(kind))
    out["tolerance_sigma"] = o.get("tolerance_sigma") ? as_positive(*o.get("tolerance_sigma"), o.at("tolerance_sigma")) : 3.0;
  if (uses_chains(kind)) {
    static const Json empty = Json::object();
    const Json* c = o.get("chain");
    out["chain"] = normalize_chain(c ? *c : empty, chain, o.at("chain"));
  }

  auto function_ref = [&] { out["function"] = as_string(o.need("function"), o.at("function")); };
  auto direction = [&] { out["direction"] = as_vector(o.need("direction"), o.at("direction")); };
  auto flag = [&](const char* k, bool def) { out[k] = o.get(k) ? as_bool(*o.get(k), o.at(k)) : def; };
  auto count = [&](const char* k, std::uint64_t def, std::uint64_t min) {
    out[k] = o.get(k) ? as_unsigned(*o.get(k), o.at(k), min) : def;
  };

  if (kind == "ibp") {
    function_ref();
    direction();
    flag("oracle", false);
  } else if (kind == "reweighting") {
    function_ref();
    flag("oracle", false);
  } else if (kind == "translation") {
    function_ref();
    direction();
  } else if (kind == "dlr") {
    function_ref();
    Obj w(o.need("window"), o.at("window"));
    out["window"] = Json{{"lower", as_vector(w.need("lower"), w.at("lower"))},
                         {"extent", as_vector(w.need("extent"), w.at("extent"))}};
    w.done();
    const WindowIntegrator::Options d;
    count("n_max", 6, 1);
    count("nodes_per_axis", 16, 2);
    count("tensor_budget", d.tensor_budget, 1);
    count("lattice_points", d.lattice_points, 2);
  } else if (kind == "l1_bound") {
    out["field"] = normalize_component(o.need("field"), o.at("field"));
    count("bins_per_axis", 4, 1);
    count("reference_nodes", 16, 1);
    count("quadrature_nodes", 64, 2);
  } else if (kind == "oracle") {
    out["observables"] = normalize_observables(o.get("observables"), o.at("observables"));
    out["max_relative_tail"] =
        o.get("max_relative_tail") ? as_positive(*o.get("max_relative_tail"), o.at("max_relative_tail")) : 1e-6;
  } else if (kind == "sample") {
    out["observables"] = normalize_observables(o.get("observables"), o.at("observables"));
    count("bins_per_axis", 4, 1);
    count("reference_nodes", 16, 1);
  } else if (kind == "check_potential") {
    out["phi"] = o.get("phi") ? normalize_preset_block(*o.get("phi"), o.at("phi"), pair_presets()) : phi;
    const std::string check = o.get("check") ? as_string(*o.get("check"), o.at("check")) : "superstability";
    out["check"] = check;
    out["expect"] = o.get("expect") ? as_verdict(*o.get("expect"), o.at("expect")) : "inconclusive";
    count("seed", 1, 0);
    if (check == "superstability") {
      out["a"] = o.get("a") ? as_nonnegative(*o.get("a"), o.at("a")) : 0.0;
      out["b"] = o.get("b") ? as_nonnegative(*o.get("b"), o.at("b")) : 0.0;
      out["cell_edge"] = o.get("cell_edge") ? as_positive(*o.get("cell_edge"), o.at("cell_edge")) : 1.0;
      count("budget", 100000, 1);
      count("max_points", 512, 2);
    } else if (check == "lower_regularity") {
      out["envelope"] = normalize_envelope(o.need("envelope"), o.at("envelope"));
      count("n_radii", 64, 2);
    } else {
      throw SchemaError(o.at("check"), "unknown check '" + check + "' (known: superstability, lower_regularity)");
    }
  }
  o.done();
  return out;
}

Json normalize_model(const Json& raw, const std::string& path) {
  Obj o(raw, path);
  Json out;
  out["sides"] = as_vector(o.need("sides"), o.at("sides"));
  if (out["sides"].empty() || out["sides"].size() > kMaxDim)
    throw SchemaError(o.at("sides"), "expected 1 to " + std::to_string(kMaxDim) + " sides");
  for (std::size_t i = 0; i < out["sides"].size(); ++i) as_positive(out["sides"][i], index_path(o.at("sides"), i));
  out["z"] = as_positive(o.need("z"), o.at("z"));
  out["beta"] = o.get("beta") ? as_positive(*o.get("beta"), o.at("beta")) : 1.0;
  out["phi"] = o.get("phi") ? normalize_preset_block(*o.get("phi"), o.at("phi"), pair_presets())
                            : Json{{"preset", "zero"}, {"params", Json::object()}};
  out["psi"] = o.get("psi") ? normalize_preset_block(*o.get("psi"), o.at("psi"), field_presets())
                            : Json{{"preset", "psi-zero"}, {"params", Json::object()}};
  o.done();
  return out;
}

// ---------------------------------------------------------------------------
// Builders

OuterMap build_outer(const Json& j) {
  const std::string kind = j.at("kind");
  if (kind == "affine") return OuterMap::affine(j.at("weights").get<std::vector<double>>(), j.at("bias").get<double>());
  if (kind == "tanh") return OuterMap::tanh_of(build_outer(j.at("inner")));
  if (kind == "exp") return OuterMap::exp_of(build_outer(j.at("inner")));
  std::vector<OuterMap> f;
  for (const auto& x : j.at("factors")) f.push_back(build_outer(x));
  return OuterMap::product(std::move(f));
}

TestComponent build_component(const Json& j, const TorusDomain& domain) {
  if (j.at("kind") == "uniform") return UniformComponent{j.at("value").get<double>()};
  const auto c = j.at("center").get<std::vector<double>>();
  if (c.size() != domain.dim()) throw std::invalid_argument("bump center has the wrong dimension");
  return Bump::make(domain, c, j.at("radius").get<double>(), j.at("scale").get<double>());
}

Vec to_vec(const Json& j, std::size_t dim, const std::string& path) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != dim)
    throw SchemaError(path, "expected " + std::to_string(dim) + " entries, got " + std::to_string(v.size()));
  Vec out{};
  for (std::size_t i = 0; i < dim; ++i) out[i] = v[i];
  return out;
}

ChainPlan plan_from(const Json& c, std::size_t workers) {
  ChainPlan plan;
  plan.params.sweeps = c.at("sweeps");
  plan.params.burn_in = c.at("burn_in");
  plan.params.thin = c.at("thin");
  plan.params.batches = c.at("batches");
  plan.params.resync_interval = c.at("resync_interval");
  plan.params.mix.birth = c.at("move_mix").at("birth");
  plan.params.mix.death = c.at("move_mix").at("death");
  plan.params.mix.kick_scale = c.at("move_mix").at("kick_scale");
  plan.master_seed = c.at("master_seed");
  plan.chains = c.at("chains");
  plan.explicit_seeds = c.at("seeds").get<std::vector<std::uint64_t>>();
  plan.workers = workers;
  return plan;
}

TruncationSpec trunc_from(const Json& o) { return {o.at("n_max"), o.at("nodes_per_axis")}; }

OracleOptions oracle_options_from(const Json& o, std::size_t workers) {
  OracleOptions opt;
  opt.tensor_budget = o.at("tensor_budget");
  opt.lattice_points = o.at("lattice_points");
  opt.max_evaluations = o.at("max_evaluations");
  opt.workers = workers;
  return opt;
}

std::vector<Observable> build_observables(const Json& names, const Json& config, const ModelSpec& model) {
  std::vector<Observable> obs;
  for (const auto& n : names) {
    const std::string name = n;
    if (name == "count") {
      obs.push_back({name, [](const Configuration& g) { return static_cast<double>(g.size()); }});
    } else if (name == "pair_energy") {
      obs.push_back({name, [phi = model.phi](const Configuration& g) { return pair_energy(phi, g); }});
    } else if (name == "one_body_energy") {
      obs.push_back({name, [psi = model.psi](const Configuration& g) { return one_body_energy(psi, g); }});
    } else if (name == "energy") {
      obs.push_back({name, [phi = model.phi, psi = model.psi](const Configuration& g) { return total_energy(phi, psi, g); }});
    } else {
      const CylinderFunction F = build_function(config.at("functions").at(name), model.domain, name);
      obs.push_back({name, [F](const Configuration& g) { return F.eval(g); }});
    }
  }
  return obs;
}

/// Builds everything a test will need so that bad parameters surface before
/// any computation.
void check_buildable(const Json& cfg) {
  ModelSpec model;
  try {
    model = build_model(cfg.at("model"));
  } catch (const std::invalid_argument& e) {
    throw SchemaError("config.model", e.what());
  }
  const auto dim = model.domain.dim();
  for (auto it = cfg.at("functions").begin(); it != cfg.at("functions").end(); ++it) {
    try {
      (void)build_function(it.value(), model.domain, it.key());
    } catch (const std::invalid_argument& e) {
      throw SchemaError("config.functions." + it.key(), e.what());
    }
  }
  const Json& tests = cfg.at("tests");
  for (std::size_t i = 0; i < tests.size(); ++i) {
    const Json& t = tests[i];
    const std::string path = index_path("config.tests", i);
    if (t.contains("function") && !cfg.at("functions").contains(t.at("function").get<std::string>()))
      throw SchemaError(key_path(path, "function"), "no function named '" + t.at("function").get<std::string>() + "'");
    if (t.contains("direction")) (void)to_vec(t.at("direction"), dim, key_path(path, "direction"));
    if (t.contains("observables"))
      for (std::size_t k = 0; k < t.at("observables").size(); ++k) {
        const std::string n = t.at("observables")[k];
        if (std::find(kBuiltinObservables.begin(), kBuiltinObservables.end(), n) == kBuiltinObservables.end() &&
            !cfg.at("functions").contains(n))
          throw SchemaError(index_path(key_path(path, "observables"), k),
                            "unknown observable '" + n + "' (built in: count, pair_energy, one_body_energy, energy, "
                            "or a function name)");
      }
    try {
      const std::string kind = t.at("kind");
      if (kind == "dlr") {
        Window w{to_vec(t.at("window").at("lower"), dim, key_path(path, "window.lower")),
                 to_vec(t.at("window").at("extent"), dim, key_path(path, "window.extent"))};
        w.validate(model.domain);
      } else if (kind == "l1_bound") {
        (void)TestField(model.domain, {build_component(t.at("field"), model.domain)});
      } else if (kind == "check_potential") {
        (void)build_pair_potential(t.at("phi"), dim);
      } else if (kind == "reweighting" && model.psi.is_zero()) {
        throw std::invalid_argument("reweighting needs a non-zero psi");
      }
    } catch (const std::invalid_argument& e) {
      throw SchemaError(path, e.what());
    }
  }
}

// ---------------------------------------------------------------------------
// Demo configs

Json lj_bump_model() {
  return Json{{"sides", {3.0, 3.0}},
              {"z", 0.5 / 9.0},
              {"beta", 0.25},
              {"phi", {{"preset", "lj-truncated"}, {"params", {{"epsilon", 1.0}, {"sigma", 0.5}, {"cutoff", 1.25}}}}},
              {"psi", {{"preset", "psi-bump"}, {"params", {{"center", {1.5, 1.5}}, {"radius", 1.0}, {"height", 4.0}}}}}};
}

Json tanh_bump_function() {
  return Json{{"outer", {{"kind", "tanh"}, {"inner", {{"kind", "affine"}, {"weights", {1.0}}}}}},
              {"components", Json::array({{{"kind", "bump"}, {"center", {1.9, 1.5}}, {"radius", 0.8}}})}};
}

const std::map<std::string, Json>& demos() {
  static const std::map<std::string, Json> d{
      {"ibp-lj-bump",
       Json{{"schema_version", kSchemaVersion},
            {"name", "ibp-lj-bump"},
            {"model", lj_bump_model()},
            {"chain", {{"sweeps", 20000}, {"burn_in", 2000}, {"chains", 4}, {"master_seed", 1}}},
            {"oracle", {{"n_max", 10}, {"nodes_per_axis", 64}}},
            {"functions", {{"F", tanh_bump_function()}}},
            {"tests",
             Json::array({
                 {{"name", "ibp"}, {"kind", "ibp"}, {"function", "F"}, {"direction", {1.0, 0.0}}, {"oracle", true}},
                 {{"name", "reweighting"}, {"kind", "reweighting"}, {"function", "F"}, {"oracle", true}},
                 {{"name", "translation"}, {"kind", "translation"}, {"function", "F"}, {"direction", {0.37, -0.21}}},
                 {{"name", "dlr"},
                  {"kind", "dlr"},
                  {"function", "F"},
                  {"window", {{"lower", {0.75, 0.75}}, {"extent", {1.5, 1.5}}}},
                  {"chain", {{"thin", 10}}}},
                 {{"name", "l1-bound"},
                  {"kind", "l1_bound"},
                  {"field", {{"kind", "bump"}, {"center", {1.5, 1.5}}, {"radius", 1.0}}}},
                 {{"name", "superstability"},
                  {"kind", "check_potential"},
                  {"check", "superstability"},
                  {"a", 0.05},
                  {"b", 5.0},
                  {"budget", 20000}},
             })},
            {"output", {{"directory", "gibbslab-out/ibp-lj-bump"}}}}},
      {"poisson-oracle",
       Json{{"schema_version", kSchemaVersion},
            {"name", "poisson-oracle"},
            {"model", {{"sides", {2.0, 2.0}}, {"z", 0.25}}},
            {"chain", {{"sweeps", 20000}, {"burn_in", 1000}, {"thin", 4}}},
            {"tests",
             Json::array({{{"name", "partition"}, {"kind", "oracle"}, {"observables", {"count"}}},
                          {{"name", "sample"}, {"kind", "sample"}, {"observables", {"count"}}}})},
            {"output", {{"directory", "gibbslab-out/poisson-oracle"}, {"trace_csv", true}}}}},
      {"potential-checks",
       Json{{"schema_version", kSchemaVersion},
            {"name", "potential-checks"},
            {"model", {{"sides", {4.0, 4.0}}, {"z", 0.1}}},
            {"tests",
             Json::array({
                 {{"name", "gaussian-unstable"},
                  {"kind", "check_potential"},
                  {"phi", {{"preset", "gaussian-attractive"}, {"params", {{"depth", 1.0}, {"width", 1.0}}}}},
                  {"a", 0.0},
                  {"b", 1.0},
                  {"expect", "fail"}},
                 {{"name", "lj-superstable"},
                  {"kind", "check_potential"},
                  {"phi", {{"preset", "lj-truncated"}, {"params", {{"sigma", 0.5}, {"cutoff", 1.25}}}}},
                  {"a", 0.05},
                  {"b", 5.0}},
                 {{"name", "hard-core-superstable"},
                  {"kind", "check_potential"},
                  {"phi", {{"preset", "hard-core"}, {"params", {{"diameter", 0.5}}}}},
                  {"a", 0.5},
                  {"b", 1.0}},
                 {{"name", "lj-envelope-too-shallow"},
                  {"kind", "check_potential"},
                  {"phi", {{"preset", "lj-truncated"}, {"params", {{"sigma", 0.5}, {"cutoff", 1.25}}}}},
                  {"check", "lower_regularity"},
                  {"envelope", {{"kind", "step"}, {"level", 0.5}, {"radius", 2.0}}},
                  {"expect", "fail"}},
             })},
            {"output", {{"directory", "gibbslab-out/potential-checks"}}}}},
  };
  return d;
}

// ---------------------------------------------------------------------------
// Running

std::string status_of(Verdict v) { return to_string(v); }

struct JobResult {
  TestOutcome outcome;
  Json report;
};

std::optional<Json> load_cache(const fs::path& file) {
  std::ifstream in(file);
  if (!in) return std::nullopt;
  try {
    return Json::parse(in);
  } catch (const Json::parse_error&) {
    return std::nullopt;
  }
}

Json oracle_job(const Json& cfg, const Json& t, const ModelSpec& model, const fs::path& dir, std::size_t workers,
                bool* pass) {
  const auto names = t.at("observables");
  Json fn_specs = Json::object();
  for (const auto& n : names)
    if (cfg.at("functions").contains(n.get<std::string>())) fn_specs[n.get<std::string>()] = cfg.at("functions").at(n.get<std::string>());
  Json oracle_cfg = cfg.at("oracle");
  const Json key{{"model", to_json(model)}, {"oracle", oracle_cfg}, {"observables", names}, {"functions", fn_specs}};
  const std::string digest = hex64(fnv1a64(key.dump()));
  const fs::path cache_file = dir / "cache" / ("oracle-" + digest + ".json");
  const bool use_cache = cfg.at("output").at("cache").get<bool>();

  Json payload;
  std::optional<Json> hit = use_cache ? load_cache(cache_file) : std::nullopt;
  if (hit && hit->value("key", Json()) == key) {
    payload = hit->at("payload");
  } else {
    const auto obs = build_observables(names, cfg, model);
    const auto ex = exact_expectation(model, obs, trunc_from(oracle_cfg), oracle_options_from(oracle_cfg, workers));
    payload["partition"] = to_json(ex.partition);
    payload["observables"] = Json::array();
    for (std::size_t j = 0; j < obs.size(); ++j)
      payload["observables"].push_back(Json{{"name", obs[j].name},
                                            {"value", number(ex.values[j])},
                                            {"tail_bound", number(ex.tail_bounds[j])},
                                            {"quadrature_delta", number(ex.quadrature_deltas[j])}});
    if (use_cache) {
      fs::create_directories(cache_file.parent_path());
      write_atomic(cache_file, Json{{"key", key}, {"payload", payload}}.dump(1) + "\n");
    }
  }
  const double Z = payload.at("partition").at("Z").get<double>();
  const Json& tb = payload.at("partition").at("tail_bound");
  const double rel = tb.is_null() ? std::numeric_limits<double>::infinity() : tb.get<double>() / Z;
  const double limit = t.at("max_relative_tail");
  *pass = rel < limit;
  Json r = payload;
  r["model_hash"] = model_hash(model);
  r["n_max"] = oracle_cfg.at("n_max");
  r["nodes_per_axis"] = oracle_cfg.at("nodes_per_axis");
  r["Z"] = Z;
  r["tail_bound"] = tb;
  r["relative_tail"] = number(rel);
  r["max_relative_tail"] = limit;
  r["pass"] = *pass;
  return r;
}

Json sample_job(const Json& cfg, const Json& t, const ModelSpec& model, const fs::path& dir, std::size_t workers) {
  const ChainPlan plan = plan_from(t.at("chain"), workers);
  const auto obs = build_observables(t.at("observables"), cfg, model);
  ChainParams p = plan.params;
  p.record_trace = true;
  p.keep_configurations = true;
  const auto seeds = plan.seeds();
  const auto runs = run_chains(model, p, obs, seeds, plan.workers);
  const auto est = merge_estimates(runs);

  DiagnoseOptions d;
  d.bins_per_axis = t.at("bins_per_axis");
  d.reference_nodes = t.at("reference_nodes");
  const DiagnosticsReport diag = diagnose(model, runs, d);

  Json r;
  r["model_hash"] = model_hash(model);
  r["seeds"] = seeds;
  r["estimates"] = Json::object();
  for (std::size_t j = 0; j < obs.size(); ++j) r["estimates"][obs[j].name] = to_json(est[j]);
  std::vector<Estimate> counts, energies;
  MoveStats moves;
  Json lengths = Json::array();
  for (const auto& c : runs) {
    counts.push_back(c.count);
    energies.push_back(c.energy);
    moves += c.stats;
    lengths.push_back(c.sweep_length);
  }
  r["count"] = to_json(merge(counts));
  r["energy"] = to_json(merge(energies));
  r["moves"] = to_json(moves);
  r["sweep_lengths"] = lengths;
  r["diagnostics"] = to_json(diag);

  const std::string name = t.at("name");
  const bool csv = cfg.at("output").at("trace_csv");
  const bool snaps = cfg.at("output").at("snapshots");
  for (std::size_t c = 0; c < runs.size(); ++c) {
    const std::string stem = name + "-chain" + std::to_string(c);
    if (csv) {
      std::ostringstream os;
      write_trace_csv(os, *runs[c].trace);
      fs::create_directories(dir / "traces");
      write_atomic(dir / "traces" / (stem + ".csv"), os.str());
    }
    if (snaps) {
      std::ostringstream os(std::ios::binary);
      write_snapshots(os, runs[c].trace->configurations);
      fs::create_directories(dir / "snapshots");
      write_atomic(dir / "snapshots" / (stem + ".bin"), os.str());
    }
  }
  return r;
}

Envelope build_envelope(const Json& e, std::size_t dim) {
  if (e.at("kind") == "power") return power_envelope(e.at("c"), dim);
  return step_envelope(e.at("level"), e.at("radius"));
}

JobResult run_test(const Json& cfg, const Json& t, const fs::path& dir, std::size_t workers) {
  JobResult res;
  res.outcome.name = t.at("name");
  res.outcome.kind = t.at("kind");
  const std::string& kind = res.outcome.kind;
  const ModelSpec model = build_model(cfg.at("model"));
  const std::size_t dim = model.domain.dim();
  const double tol = t.value("tolerance_sigma", 3.0);
  auto F = [&] { return build_function(cfg.at("functions").at(t.at("function").get<std::string>()), model.domain, t.at("function")); };
  auto oracle = [&]() -> std::optional<OracleRequest> {
    if (!t.value("oracle", false)) return std::nullopt;
    return OracleRequest{trunc_from(cfg.at("oracle")), oracle_options_from(cfg.at("oracle"), workers)};
  };
  auto from_report = [&](const VerificationReport& rep) {
    res.report = to_json(rep);
    res.outcome.status = status_of(rep.verdict);
    res.outcome.z_score = rep.z_score;
  };

  if (kind == "ibp") {
    from_report(verify_ibp(model, F(), to_vec(t.at("direction"), dim, "direction"), plan_from(t.at("chain"), workers),
                           oracle(), tol));
  } else if (kind == "reweighting") {
    from_report(verify_reweighting(model.without_psi(), model, F(), plan_from(t.at("chain"), workers), oracle(), tol));
  } else if (kind == "translation") {
    from_report(verify_translation_invariance(model, F(), to_vec(t.at("direction"), dim, "direction"),
                                              plan_from(t.at("chain"), workers), tol));
  } else if (kind == "dlr") {
    const Window w{to_vec(t.at("window").at("lower"), dim, "window.lower"),
                   to_vec(t.at("window").at("extent"), dim, "window.extent")};
    WindowIntegrator::Options inner;
    inner.tensor_budget = t.at("tensor_budget");
    inner.lattice_points = t.at("lattice_points");
    from_report(verify_dlr(model, F(), w, plan_from(t.at("chain"), workers),
                           TruncationSpec{t.at("n_max"), t.at("nodes_per_axis")}, inner, tol));
  } else if (kind == "l1_bound") {
    const TestField field(model.domain, {build_component(t.at("field"), model.domain)});
    DiagnoseOptions d;
    d.bins_per_axis = t.at("bins_per_axis");
    d.reference_nodes = t.at("reference_nodes");
    QuadratureSpec q;
    q.nodes_per_axis = t.at("quadrature_nodes");
    from_report(verify_l1_bound(model, [field](const Point& x) { return field.value(0, x); },
                                plan_from(t.at("chain"), workers), d, q, tol));
  } else if (kind == "oracle") {
    bool pass = false;
    res.report = oracle_job(cfg, t, model, dir, workers, &pass);
    res.outcome.status = pass ? "pass" : "fail";
  } else if (kind == "sample") {
    res.report = sample_job(cfg, t, model, dir, workers);
    res.outcome.status = "pass";
  } else if (kind == "check_potential") {
    const PairPotential phi = build_pair_potential(t.at("phi"), dim);
    StabilityReport rep;
    if (t.at("check") == "superstability") {
      SuperstabilitySearch s;
      s.dim = dim;
      s.cell_edge = t.at("cell_edge");
      s.budget = t.at("budget");
      s.seed = t.at("seed");
      s.max_points = t.at("max_points");
      rep = check_superstability(phi, t.at("a"), t.at("b"), s);
    } else {
      rep = check_lower_regularity(phi, build_envelope(t.at("envelope"), dim), t.at("n_radii"), dim, t.at("seed"));
    }
    const bool pass = to_string(rep.verdict) == t.at("expect").get<std::string>();
    res.report = Json{{"check", t.at("check")}, {"expect", t.at("expect")}, {"phi", to_json(phi)},
                      {"result", to_json(rep)}, {"pass", pass}};
    res.outcome.status = pass ? "pass" : "fail";
  }
  return res;
}

std::string format_z(const std::optional<double>& z) {
  if (!z) return "";
  if (!std::isfinite(*z)) return *z > 0 ? "inf" : (*z < 0 ? "-inf" : "nan");
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", *z);
  return buf;
}

} // namespace

// ---------------------------------------------------------------------------
// Public entry points

Json preset_catalog() {
  auto schema = [](const std::vector<Preset>& list) {
    Json a = Json::array();
    for (const auto& p : list) {
      Json params = Json::array();
      for (const auto& q : p.params) {
        Json e{{"name", q.name}, {"type", q.type}, {"doc", q.doc}, {"required", q.required}};
        if (!q.required) e["default"] = q.fallback;
        params.push_back(e);
      }
      a.push_back(Json{{"id", p.id}, {"doc", p.doc}, {"params", params}});
    }
    return a;
  };
  Json demos_list = Json::array();
  for (const auto& [name, cfg] : demos()) {
    Json kinds = Json::array();
    for (const auto& t : cfg.at("tests")) kinds.push_back(t.at("kind"));
    demos_list.push_back(Json{{"id", name}, {"tests", kinds}});
  }
  return Json{{"version", version_string()},
              {"schema_version", kSchemaVersion},
              {"pair_potentials", schema(pair_presets())},
              {"one_body_potentials", schema(field_presets())},
              {"outer_functions", schema(outer_presets())},
              {"components", schema(component_presets())},
              {"observables", kBuiltinObservables},
              {"test_kinds", kTestKinds},
              {"demos", demos_list}};
}

std::string format_catalog(const Json& catalog) {
  std::ostringstream os;
  os << catalog.at("version").get<std::string>() << " (schema_version " << catalog.at("schema_version") << ")\n";
  for (const char* section : {"pair_potentials", "one_body_potentials", "outer_functions", "components"}) {
    os << "\n" << section << ":\n";
    for (const auto& p : catalog.at(section)) {
      os << "  " << p.at("id").get<std::string>() << "  " << p.at("doc").get<std::string>() << "\n";
      for (const auto& q : p.at("params")) {
        os << "      " << q.at("name").get<std::string>() << " : " << q.at("type").get<std::string>();
        if (q.at("required").get<bool>()) os << " (required)";
        else os << " = " << q.at("default").dump();
        os << "  " << q.at("doc").get<std::string>() << "\n";
      }
    }
  }
  os << "\nobservables: ";
  for (const auto& o : catalog.at("observables")) os << o.get<std::string>() << " ";
  os << "<function name>\ntest_kinds: ";
  for (const auto& k : catalog.at("test_kinds")) os << k.get<std::string>() << " ";
  os << "\n\ndemos:\n";
  for (const auto& d : catalog.at("demos")) {
    os << "  " << d.at("id").get<std::string>() << " [";
    bool first = true;
    for (const auto& k : d.at("tests")) {
      os << (first ? "" : ", ") << k.get<std::string>();
      first = false;
    }
    os << "]\n";
  }
  return os.str();
}

std::vector<std::string> demo_names() {
  std::vector<std::string> n;
  for (const auto& [name, cfg] : demos()) n.push_back(name);
  return n;
}

Json demo_config(const std::string& name) {
  const auto& d = demos();
  const auto it = d.find(name);
  if (it == d.end()) {
    std::string known;
    for (const auto& [n, cfg] : d) known += (known.empty() ? "" : ", ") + n;
    throw SchemaError("demo", "unknown demo '" + name + "' (known: " + known + ")");
  }
  return it->second;
}

Json normalize_config(const Json& raw) {
  Obj o(raw, "config");
  const std::uint64_t version = as_unsigned(o.need("schema_version"), o.at("schema_version"));
  if (version != kSchemaVersion)
    throw SchemaError(o.at("schema_version"), "unsupported schema_version " + std::to_string(version) +
                                                  " (this build reads " + std::to_string(kSchemaVersion) + ")");
  if (auto g = o.get("generator")) (void)as_string(*g, o.at("generator"));
  Json out;
  out["schema_version"] = kSchemaVersion;
  out["generator"] = version_string();
  out["name"] = o.get("name") ? as_string(*o.get("name"), o.at("name")) : "experiment";
  out["workers"] = o.get("workers") ? as_unsigned(*o.get("workers"), o.at("workers"), 1) : 1;
  out["model"] = normalize_model(o.need("model"), o.at("model"));
  static const Json empty = Json::object();
  out["chain"] = normalize_chain(o.get("chain") ? *o.get("chain") : empty, default_chain(), o.at("chain"));
  out["oracle"] = normalize_oracle(o.get("oracle") ? *o.get("oracle") : empty, o.at("oracle"));
  out["functions"] = Json::object();
  if (auto f = o.get("functions")) {
    if (!f->is_object()) throw SchemaError(o.at("functions"), "expected an object of named functions");
    for (auto it = f->begin(); it != f->end(); ++it) {
      if (std::find(kBuiltinObservables.begin(), kBuiltinObservables.end(), it.key()) != kBuiltinObservables.end())
        throw SchemaError(o.at("functions") + "." + it.key(), "name clashes with a built-in observable");
      out["functions"][it.key()] = normalize_function(it.value(), o.at("functions") + "." + it.key());
    }
  }
  const Json& tests = o.need("tests");
  if (!tests.is_array() || tests.empty()) throw SchemaError(o.at("tests"), "expected a non-empty array of tests");
  out["tests"] = Json::array();
  std::set<std::string> names;
  for (std::size_t i = 0; i < tests.size(); ++i) {
    Json t = normalize_test(tests[i], index_path(o.at("tests"), i), out["chain"], out["model"]["phi"]);
    if (!names.insert(t["name"].get<std::string>()).second)
      throw SchemaError(index_path(o.at("tests"), i) + ".name", "duplicate test name '" + t["name"].get<std::string>() + "'");
    out["tests"].push_back(std::move(t));
  }
  out["output"] = normalize_output(o.get("output") ? *o.get("output") : empty, o.at("output"));
  o.done();
  check_buildable(out);
  return out;
}

PairPotential build_pair_potential(const Json& b, std::size_t dim) {
  const std::string id = b.at("preset");
  const Json& p = b.at("params");
  if (id == "zero") return zero_pair_potential();
  if (id == "lj-truncated") {
    std::optional<double> sb;
    if (!p.at("stability_b").is_null()) sb = p.at("stability_b").get<double>();
    return lennard_jones_truncated(p.at("epsilon"), p.at("sigma"), p.at("cutoff"), dim, sb);
  }
  if (id == "soft-sphere") return soft_sphere(p.at("epsilon"), p.at("sigma"), p.at("cutoff"));
  if (id == "hard-core") return hard_core(p.at("diameter"));
  if (id == "gaussian-attractive") return gaussian_attractive(p.at("depth"), p.at("width"));
  std::optional<StabilityConstants> claim;
  const bool ha = !p.at("stability_a").is_null(), hb = !p.at("stability_b").is_null();
  if (ha != hb) throw std::invalid_argument("tabulated: stability_a and stability_b must be given together");
  if (ha) claim = StabilityConstants{p.at("stability_a"), p.at("stability_b")};
  return tabulated_pair_potential(p.at("radii"), p.at("values"), claim);
}

ModelSpec build_model(const Json& m) {
  ModelSpec model;
  model.domain = TorusDomain(m.at("sides").get<std::vector<double>>());
  model.z = m.at("z");
  model.beta = m.at("beta");
  model.phi = build_pair_potential(m.at("phi"), model.domain.dim());
  const std::string id = m.at("psi").at("preset");
  const Json& p = m.at("psi").at("params");
  auto center = [&] {
    auto c = p.at("center").get<std::vector<double>>();
    if (c.size() != model.domain.dim()) throw std::invalid_argument("psi center has the wrong dimension");
    return c;
  };
  if (id == "psi-zero") model.psi = zero_field(model.domain);
  else if (id == "psi-const") model.psi = constant_field(model.domain, p.at("value"));
  else if (id == "psi-bump") model.psi = bump_field(model.domain, center(), p.at("radius"), p.at("height"));
  else model.psi = singular_field(model.domain, center(), p.at("k").get<int>(), p.at("radius"), p.at("strength"));
  model.validate();
  return model;
}

CylinderFunction build_function(const Json& f, const TorusDomain& domain, const std::string& name) {
  std::vector<TestComponent> comps;
  for (const auto& c : f.at("components")) comps.push_back(build_component(c, domain));
  return CylinderFunction(TestField(domain, std::move(comps)), build_outer(f.at("outer")), name);
}

RunOptions with_environment(RunOptions flags) {
  if (!flags.out)
    if (const char* e = std::getenv("GIBBSLAB_OUT"); e && *e) flags.out = fs::path(e);
  if (!flags.workers)
    if (const char* e = std::getenv("GIBBSLAB_WORKERS"); e && *e) {
      char* end = nullptr;
      const unsigned long long w = std::strtoull(e, &end, 10);
      if (*end != '\0' || w == 0) throw SchemaError("GIBBSLAB_WORKERS", "expected a positive integer");
      flags.workers = static_cast<std::size_t>(w);
    }
  return flags;
}

void write_atomic(const fs::path& path, const std::string& contents) {
  static std::atomic<std::uint64_t> counter{0};
  fs::path tmp = path;
  tmp += ".tmp" + std::to_string(counter.fetch_add(1));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
  }
  fs::rename(tmp, path);
}

Json read_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError(path.string(), "cannot read config file");
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw SchemaError(path.string(), std::string("malformed JSON: ") + e.what());
  }
}

RunOutcome run(const Json& raw_config, const RunOptions& options) {
  Json cfg = normalize_config(raw_config);
  if (options.only_kind) {
    Json kept = Json::array();
    for (const auto& t : cfg["tests"])
      if (t["kind"] == *options.only_kind) kept.push_back(t);
    if (kept.empty()) throw SchemaError("config.tests", "no test of kind '" + *options.only_kind + "'");
    cfg["tests"] = kept;
  }
  if (options.seed) {
    cfg["chain"]["master_seed"] = *options.seed;
    for (auto& t : cfg["tests"])
      if (t.contains("chain")) t["chain"]["master_seed"] = *options.seed;
  }
  if (options.workers) cfg["workers"] = *options.workers;
  if (options.out) cfg["output"]["directory"] = options.out->string();

  RunOutcome outcome;
  outcome.directory = fs::path(cfg["output"]["directory"].get<std::string>());
  outcome.effective_config = cfg;
  const fs::path& dir = outcome.directory;
  fs::create_directories(dir / "reports");
  write_atomic(dir / "effective-config.json", cfg.dump(2) + "\n");

  const std::size_t workers = cfg["workers"];
  const std::size_t n = cfg["tests"].size();
  const std::size_t inner = n >= workers ? 1 : workers;
  outcome.tests.resize(n);
  std::mutex log;
  parallel_for(n, std::min(workers, n), [&](std::size_t i) {
    const Json& t = cfg["tests"][i];
    JobResult r;
    try {
      r = run_test(cfg, t, dir, inner);
    } catch (const std::exception& e) {
      r.outcome.name = t["name"];
      r.outcome.kind = t["kind"];
      r.outcome.status = "aborted";
      r.outcome.error = e.what();
      r.report = Json{{"error", e.what()}};
    }
    Json doc{{"test", r.outcome.name},
             {"kind", r.outcome.kind},
             {"status", r.outcome.status},
             {"z_score", r.outcome.z_score ? number(*r.outcome.z_score) : Json(nullptr)},
             {"version", version_string()},
             {"report", r.report}};
    write_atomic(dir / "reports" / (r.outcome.name + ".json"), doc.dump(2) + "\n");
    {
      std::lock_guard<std::mutex> lock(log);
      std::cerr << "[" << r.outcome.name << "] " << r.outcome.status;
      if (r.outcome.z_score) std::cerr << " z=" << format_z(r.outcome.z_score);
      if (!r.outcome.error.empty()) std::cerr << " error: " << r.outcome.error;
      std::cerr << "\n";
    }
    outcome.tests[i] = std::move(r.outcome);
  });

  std::string csv = "test,kind,status,z_score,pass\n";
  bool failed = false, aborted = false;
  for (const auto& t : outcome.tests) {
    csv += t.name + "," + t.kind + "," + t.status + "," + format_z(t.z_score) + "," +
           (t.status == "pass" ? "true" : "false") + "\n";
    if (t.status == "aborted") aborted = true;
    else if (t.status != "pass") failed = true;
  }
  write_atomic(dir / "summary.csv", csv);
  outcome.exit_code = aborted ? ExitCode::runtime_abort : failed ? ExitCode::test_failed : ExitCode::ok;
  return outcome;
}

} // namespace gibbslab::experiment
