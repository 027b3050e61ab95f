// Command line front end for the offline pipeline. Exit codes: 0 success,
// 1 validation or data failure, 2 backend/client failure, 64 usage errors.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "emotrans/config.hpp"
#include "emotrans/pipeline.hpp"
#include "emotrans/version.hpp"

namespace {

// File (when given) -> environment -> --set flags, later layers winning.
emotrans::PipelineConfig assemble_config(const std::optional<std::string>& config_path,
                                         const std::vector<std::string>& sets,
                                         const std::optional<int>& parallelism,
                                         bool offline) {
  emotrans::PipelineConfig cfg;
  if (config_path) {
    cfg = emotrans::load_config_file(*config_path, sets);
  } else {
    emotrans::apply_env_overrides(cfg);
    for (const std::string& a : sets) emotrans::apply_assignment(cfg, a);
  }
  if (parallelism) cfg.parallelism = *parallelism;
  if (offline) cfg.offline = true;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"emotrans: emotion-transition speech pipeline"};
  app.set_version_flag("--version", std::string("emotrans ") + emotrans::kVersion);

  std::optional<std::string> config_path;
  std::vector<std::string> sets;
  std::optional<int> parallelism;
  bool offline = false;
  app.add_option("--config", config_path, "JSON configuration file");
  app.add_option("--set", sets, "override one key, as section.key=value (repeatable)");
  app.add_option("--parallelism", parallelism, "worker threads for per-utterance stages");
  app.add_flag("--offline", offline, "ignore endpoints and use the bundled backends");

  app.add_subcommand("plan", "enumerate the transition plan inventory");
  app.add_subcommand("build-dataset", "generate, synthesize, and manifest the corpus");
  app.add_subcommand("preprocess", "trim silence and write alignment maps");
  app.add_subcommand("train-mtetr", "train the transition detector");
  app.add_subcommand("annotate", "measure attributes and compose captions");
  app.add_subcommand("evaluate", "score the detector and write the metrics report");
  app.add_subcommand("stats", "tabulate corpus statistics");
  app.add_subcommand("dump-config", "print the effective configuration and exit");
  app.require_subcommand(0, 1);
  for (CLI::App* sub : app.get_subcommands(nullptr)) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? emotrans::kExitOk : emotrans::kExitUsage;
  }

  auto subcommands = app.get_subcommands();
  if (subcommands.empty()) {
    std::cerr << app.help();
    return emotrans::kExitUsage;
  }
  const std::string command = subcommands.front()->get_name();

  try {
    emotrans::PipelineConfig cfg =
        assemble_config(config_path, sets, parallelism, offline);
    if (command == "dump-config") {
      std::cout << emotrans::dump_config(cfg);
      return emotrans::kExitOk;
    }
    return emotrans::run_command(command, cfg, std::cout, std::cerr);
  } catch (const emotrans::ClientError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return emotrans::kExitClientError;
  } catch (const emotrans::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return emotrans::kExitFailure;
  }
}
