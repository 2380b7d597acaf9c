#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include <json.hpp>

#include "gibbslab/diagnostics.hpp"
#include "gibbslab/estimate.hpp"
#include "gibbslab/oracle.hpp"
#include "gibbslab/sampler.hpp"
#include "gibbslab/stability.hpp"

namespace gibbslab {

using Json = nlohmann::json;

/// Non-finite doubles become null.
[[nodiscard]] Json number(double x);

[[nodiscard]] std::uint64_t fnv1a64(std::string_view bytes);
[[nodiscard]] std::string hex64(std::uint64_t x);

[[nodiscard]] Json to_json(const TorusDomain& domain);
[[nodiscard]] Json to_json(const PairPotential& phi);
[[nodiscard]] Json to_json(const OneBodyPotential& psi);
[[nodiscard]] Json to_json(const ModelSpec& model);
[[nodiscard]] Json to_json(const Configuration& gamma);
[[nodiscard]] Json to_json(const Estimate& e);
[[nodiscard]] Json to_json(const MoveStats& s);
[[nodiscard]] Json to_json(const PartitionResult& p);
[[nodiscard]] Json to_json(const DiagnosticsReport& r);
[[nodiscard]] Json to_json(const StabilityReport& r);

/// FNV-1a of the canonical (sorted-key, compact) JSON of the model.
[[nodiscard]] std::string model_hash(const ModelSpec& model);

} // namespace gibbslab
