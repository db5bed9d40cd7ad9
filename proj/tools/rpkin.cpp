// rpkin: command-line front end for the radical-pair recombination models.
//
//   rpkin run     --config scenario.json --out-dir out/
//   rpkin verify  --config scenario.json --out-dir out/
//   rpkin compare --config scenario.json --out-dir out/
//
// Exit codes: 0 success / all checks pass, 1 check failure, 2 config error,
// 3 integration error.

#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "rpkin/cli.hpp"

namespace {

struct CommonArgs {
  std::string config;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  bool quiet = false;
};

void add_common(CLI::App* sub, CommonArgs& args) {
  sub->add_option("--config", args.config, "Scenario config (JSON)")->required();
  sub->add_option("--out-dir", args.out_dir, "Directory for output files");
  sub->add_option("--seed", args.seed, "Override the config seed");
  sub->add_flag("--quiet", args.quiet, "Suppress progress output");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spin-selective radical-pair recombination models and consistency checks"};
  app.require_subcommand(1);

  CommonArgs args;
  auto* run = app.add_subcommand("run", "Integrate the configured models and write trajectories");
  auto* verify = app.add_subcommand("verify", "Run the consistency checks and write a JSON report");
  auto* compare = app.add_subcommand("compare", "Tabulate singlet probability across models");
  for (auto* sub : {run, verify, compare}) add_common(sub, args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : rpkin::cli::kConfigError;
  }

  rpkin::cli::ScenarioConfig config;
  try {
    config = rpkin::cli::load_config(args.config);
    if (args.seed) config.seed = *args.seed;
  } catch (const rpkin::Error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return rpkin::cli::kConfigError;
  }

  const rpkin::cli::RunOptions ro{args.out_dir, args.quiet};
  try {
    if (run->parsed()) return rpkin::cli::run_command(config, ro, std::cerr);
    if (verify->parsed()) return rpkin::cli::verify_command(config, ro, std::cout);
    return rpkin::cli::compare_command(config, ro, std::cerr);
  } catch (const rpkin::cli::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return rpkin::cli::kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return rpkin::cli::kIntegrationError;
  }
}
