#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gibbslab/cylinder.hpp"
#include "gibbslab/sampler.hpp"
#include "gibbslab/serialize.hpp"

namespace gibbslab::experiment {

inline constexpr int kSchemaVersion = 1;

/// "gibbslab <major.minor.patch>".
[[nodiscard]] std::string version_string();

/// Raised for any config that fails validation; `path` locates the offending
/// key (e.g. "tests[2].direction").
class SchemaError : public std::runtime_error {
public:
  SchemaError(const std::string& path, const std::string& message)
      : std::runtime_error(path + ": " + message), path_(path) {}
  [[nodiscard]] const std::string& path() const { return path_; }

private:
  std::string path_;
};

/// Built-in potentials, outer maps, test-field components, test kinds and
/// demo configs with their parameter schemas. Stable across runs.
[[nodiscard]] Json preset_catalog();
/// Plain-text rendering of the catalog.
[[nodiscard]] std::string format_catalog(const Json& catalog);

[[nodiscard]] std::vector<std::string> demo_names();
/// Throws SchemaError for an unknown name.
[[nodiscard]] Json demo_config(const std::string& name);

/// Validates a raw config and returns it with every default filled in.
/// Unknown keys, wrong types and invalid parameters throw SchemaError.
[[nodiscard]] Json normalize_config(const Json& raw);

/// Builders over a normalized config.
[[nodiscard]] ModelSpec build_model(const Json& model_block);
[[nodiscard]] CylinderFunction build_function(const Json& function_block, const TorusDomain& domain,
                                              const std::string& name);
[[nodiscard]] PairPotential build_pair_potential(const Json& preset_block, std::size_t dim);

struct RunOptions {
  std::optional<std::filesystem::path> out;
  std::optional<std::size_t> workers;
  std::optional<std::uint64_t> seed;
  /// Run only tests of this kind; SchemaError when there are none.
  std::optional<std::string> only_kind;
};

/// Resolves --out / --workers from flag, then environment (GIBBSLAB_OUT,
/// GIBBSLAB_WORKERS), then leaves them to the config.
[[nodiscard]] RunOptions with_environment(RunOptions flags);

enum class ExitCode : int { ok = 0, test_failed = 1, schema_violation = 2, runtime_abort = 3 };

struct TestOutcome {
  std::string name;
  std::string kind;
  /// pass, fail, inconclusive or aborted.
  std::string status;
  std::optional<double> z_score;
  std::string error;
};

struct RunOutcome {
  ExitCode exit_code = ExitCode::ok;
  std::filesystem::path directory;
  Json effective_config;
  std::vector<TestOutcome> tests;
};

/// Validates, applies overrides, writes effective-config.json and runs every
/// test, writing reports/<name>.json as each finishes and summary.csv at the
/// end. Throws SchemaError before touching the output directory when the
/// config is invalid.
[[nodiscard]] RunOutcome run(const Json& raw_config, const RunOptions& options);

/// Writes through a temporary sibling and renames it into place.
void write_atomic(const std::filesystem::path& path, const std::string& contents);

/// Reads and parses a JSON file; unreadable or malformed files throw
/// SchemaError.
[[nodiscard]] Json read_config(const std::filesystem::path& path);

} // namespace gibbslab::experiment
