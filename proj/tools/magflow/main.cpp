#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "commands.hpp"
#include "magflow/errors.hpp"

int main(int argc, char** argv) {
  using namespace magflow::cli;

  CLI::App app{"magflow: periodic orbits of magnetic systems on the 2-sphere"};
  app.require_subcommand(0, 1);

  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool print_defaults = false;
  for (const std::string& name : command_names()) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "flat key = value config file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "directory for CSV and loop artifacts (overrides run.out)");
    sub->add_option("--seed", seed, "RNG seed (overrides run.seed)");
  }
  app.add_flag("--print-defaults", print_defaults, "print every config key with its default and exit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // CLI11 uses 0 for --help; every other parse failure is a usage error.
    return app.exit(e) == 0 ? kExitSuccess : kExitError;
  }
  if (print_defaults) {
    std::cout << documented_defaults();
    return kExitSuccess;
  }
  if (app.get_subcommands().empty()) {
    std::cerr << app.help();
    return kExitError;
  }

  const CLI::App* sub = app.get_subcommands().front();
  RunConfig cfg;
  try {
    cfg = parse_config(config_path);
  } catch (const magflow::Error& e) {
    std::cerr << e.kind() << ": " << e.what() << '\n';
    return kExitError;
  }
  if (sub->count("--out") > 0) cfg.output_dir = out_dir;
  if (sub->count("--seed") > 0) cfg.rng_seed = seed;
  return run_command(sub->get_name(), cfg, std::cout, std::cerr);
}
