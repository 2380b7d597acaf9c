// gibbslab: run sampling, oracle and verification experiments from a JSON
// config.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "gibbslab/experiment.hpp"

namespace ex = gibbslab::experiment;

namespace {

struct Common {
  std::string config;
  std::string demo;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
};

void add_common(CLI::App* sub, Common& c) {
  auto* cfg = sub->add_option("--config,-c", c.config, "experiment config (JSON)");
  auto* demo = sub->add_option("--demo", c.demo, "built-in demo config instead of a file");
  cfg->excludes(demo);
  sub->add_option("--seed", c.seed, "master seed override for every chain block");
  sub->add_option("--workers", c.workers, "worker threads (env GIBBSLAB_WORKERS)")->check(CLI::PositiveNumber);
  sub->add_option("--out", c.out, "output directory (env GIBBSLAB_OUT)");
}

int execute(const Common& c, std::optional<std::string> only_kind) {
  try {
    if (c.config.empty() && c.demo.empty()) throw ex::SchemaError("--config", "one of --config or --demo is required");
    const gibbslab::Json raw = c.demo.empty() ? ex::read_config(c.config) : ex::demo_config(c.demo);
    ex::RunOptions opts;
    if (!c.out.empty()) opts.out = c.out;
    opts.workers = c.workers;
    opts.seed = c.seed;
    opts.only_kind = std::move(only_kind);
    opts = ex::with_environment(opts);
    const auto outcome = ex::run(raw, opts);
    std::cout << "reports: " << outcome.directory.string() << "\n";
    for (const auto& t : outcome.tests) {
      std::cout << "  " << t.name << " (" << t.kind << "): " << t.status;
      if (t.z_score) std::cout << "  z=" << *t.z_score;
      std::cout << "\n";
    }
    return static_cast<int>(outcome.exit_code);
  } catch (const ex::SchemaError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return static_cast<int>(ex::ExitCode::schema_violation);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(ex::ExitCode::runtime_abort);
  }
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Finite-volume Gibbs point process sampler and identity checker"};
  app.set_version_flag("--version", ex::version_string());
  app.require_subcommand(1);

  struct Entry {
    const char* name;
    const char* help;
    std::optional<std::string> kind;
  };
  const Entry entries[] = {
      {"run", "run every test in the config", std::nullopt},
      {"oracle", "run the oracle tests of the config", "oracle"},
      {"sample", "run the sample tests of the config", "sample"},
      {"verify-ibp", "run the integration-by-parts tests", "ibp"},
      {"verify-reweight", "run the reweighting tests", "reweighting"},
      {"verify-dlr", "run the conditional-expectation (DLR) tests", "dlr"},
      {"verify-tinv", "run the translation-invariance tests", "translation"},
      {"check-potential", "run the potential checks", "check_potential"},
  };
  Common common;
  std::optional<std::string> chosen_kind;
  for (const auto& e : entries) {
    auto* sub = app.add_subcommand(e.name, e.help);
    add_common(sub, common);
    sub->callback([&chosen_kind, kind = e.kind] { chosen_kind = kind; });
  }

  bool as_json = false;
  auto* list = app.add_subcommand("list-presets", "print built-in potentials, outer maps and demo configs");
  list->add_flag("--json", as_json, "machine-readable catalog");
  std::string show;
  auto* show_demo = app.add_subcommand("show-demo", "print a demo config");
  show_demo->add_option("name", show, "demo name")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ex::ExitCode::schema_violation);
  }

  if (list->parsed()) {
    const auto catalog = ex::preset_catalog();
    std::cout << (as_json ? catalog.dump(2) + "\n" : ex::format_catalog(catalog));
    return 0;
  }
  if (show_demo->parsed()) {
    try {
      std::cout << ex::demo_config(show).dump(2) << "\n";
      return 0;
    } catch (const ex::SchemaError& e) {
      std::cerr << "error: " << e.what() << "\n";
      return static_cast<int>(ex::ExitCode::schema_violation);
    }
  }
  return execute(common, chosen_kind);
}
