#include <iostream>
#include <map>

#include <CLI11.hpp>

#include "condkl/app/commands.hpp"

int main(int argc, char** argv) {
  using namespace condkl::app;
  CLI::App app{"Conditional Karhunen-Loeve models for diffusion with a partially observed log-normal coefficient"};
  app.require_subcommand(1, 1);

  CommandOptions opt;
  std::string out;
  std::uint64_t seed = 0;
  const std::map<std::string, std::string> help = {
      {"synth", "write the reference field and the observation set"},
      {"fit", "fit kernel hyperparameters to the observations"},
      {"condition", "build the conditional KL models and their spectra"},
      {"propagate", "Monte Carlo and/or sparse-grid moments of g and u"},
      {"compare", "both conditioning approaches at equal dimension"},
      {"learn", "sequential acquisition campaigns"},
  };
  for (const std::string& name : command_names()) {
    CLI::App* sub = app.add_subcommand(name, help.count(name) ? help.at(name) : "");
    sub->add_option("--config", opt.config, "INI config file or preset name (paper-sigma065, paper-sigma13)")
        ->required();
    sub->add_option("--out", out, "output directory (overrides CONDKL_OUTPUT_DIR and run.output)");
    sub->add_option("--seed", seed, "master seed (overrides run.seed)");
    sub->add_option("--threads", opt.threads, "worker threads; never changes results")->check(CLI::PositiveNumber);
    sub->callback([&, name, sub] {
      opt.command = name;
      if (sub->count("--out")) opt.out = out;
      if (sub->count("--seed")) opt.seed = seed;
    });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }
  return run_command(opt, std::cerr);
}
