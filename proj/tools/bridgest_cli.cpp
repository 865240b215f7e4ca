// bridgest command-line driver.
//
//   bridgest <command> [--config PATH] [--set key=value]...
//
// Exit codes: 0 success, 1 configuration/validation error, 2 runtime or
// numeric failure (including a failed grad-check).

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bridgest/cli/commands.hpp"

namespace cli = bridgest::cli;

int main(int argc, char** argv) {
  CLI::App app{"Speech-translation bridge toolkit: synthetic data, training, evaluation and checks"};
  app.require_subcommand(1);

  struct Opts {
    std::string config;
    std::vector<std::string> sets;
  };
  std::map<std::string, Opts> opts;
  for (const auto& name : cli::kCommands) {
    auto* sub = app.add_subcommand(name);
    auto& o = opts[name];
    sub->add_option("--config", o.config, "JSON config file");
    sub->add_option("--set", o.sets, "Override as dotted.key=value (value parsed as JSON when possible)")
        ->allow_extra_args(false);
    sub->add_flag_callback("--print-defaults", [name] {
      std::cout << cli::default_config(name).dump(2) << '\n';
      std::exit(0);
    }, "Print the default config and exit");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  const Opts& o = opts.at(command);
  try {
    std::optional<std::string> env_seed;
    if (const char* s = std::getenv("BRIDGEST_SEED")) env_seed = s;
    std::optional<std::filesystem::path> cfg_file;
    if (!o.config.empty()) cfg_file = o.config;
    const auto run = cli::resolve_config(command, cli::default_config(command), cfg_file, o.sets, env_seed);
    const auto outcome = cli::run_command(command, run, std::cout);
    std::cout << "run_dir " << run.dir.string() << '\n';
    return outcome.exit_code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::exit_code_for(e);
  }
}
