#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ipcc/app.hpp"
#include "ipcc/config.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Case-control analysis with incident and prevalent cases"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<int> replications;
  std::optional<std::string> input;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file, or an output file with an embedded config")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--seed", seed, "override the config seed");
    sub->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
  };
  CLI::App* fit = app.add_subcommand("fit", "fit models A, B and C to a subject-level CSV");
  add_common(fit);
  fit->add_option("--input", input, "override the input CSV path");
  CLI::App* simulate = app.add_subcommand("simulate", "run a simulation scenario");
  add_common(simulate);
  simulate->add_option("--replications", replications, "override the number of replications")
      ->check(CLI::PositiveNumber);
  CLI::App* efficiency = app.add_subcommand("efficiency", "variance-ratio curves and equivalence search");
  add_common(efficiency);
  efficiency->add_option("--replications", replications, "override the number of replications")
      ->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  ipcc::RunConfig cfg;
  try {
    cfg = ipcc::load_config(config_path);
    cfg.command = app.get_subcommands().front()->get_name();
    if (seed) cfg.seed = *seed;
    if (threads) cfg.threads = *threads;
    if (replications) cfg.replications = *replications;
    if (input) cfg.input = *input;
    ipcc::validate(cfg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  try {
    return ipcc::run_command(cfg, out_dir, std::cout, std::cerr);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
