#include <CLI11.hpp>

#include "entrolab/runner.hpp"

// Exit codes: 0 all checks passed, 1 a check failed, 2 configuration or
// usage error, 3 solver or runtime failure.
int main(int argc, char** argv) {
  CLI::App app{"numerical laboratory for entropic interpolations between densities"};
  app.require_subcommand(1);

  entrolab::RunOptions options;
  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", options.config_path, "scenario configuration (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--out", options.output_dir,
                    "artifact directory (default: output_dir from the config)");
    cmd->add_option("--workers", options.workers, "worker threads")
        ->check(CLI::Range(1, 4096));
  };

  CLI::App* bridge =
      app.add_subcommand("bridge", "solve a single eps and export the interpolation");
  CLI::App* sweep =
      app.add_subcommand("sweep", "run the eps ladder and the decay diagnostics");
  CLI::App* verify =
      app.add_subcommand("verify", "run the configured checks, write a machine-readable summary");
  add_common(bridge);
  add_common(sweep);
  add_common(verify);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (bridge->parsed()) return entrolab::run_bridge(options);
  if (sweep->parsed()) return entrolab::run_sweep(options);
  return entrolab::run_verify(options);
}
