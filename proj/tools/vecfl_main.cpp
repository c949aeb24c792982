#include <cstdint>
#include <string>

#include "CLI11.hpp"
#include "vecfl/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"vecfl: vehicle-edge-cloud federated learning simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string mode = "optimize";

  app.add_option("--config", config_path, "run configuration JSON")
      ->required()
      ->group("global");
  app.add_option("--out", out_dir, "artifact output directory")->group("global");
  app.add_option("--seed", seed, "override the config master seed")
      ->group("global")
      ->each([&](const std::string&) { seed_set = true; });

  app.add_subcommand("gen-scenario", "generate the scenario JSON");
  app.add_subcommand("collect-errors", "drive the scenario and register errors");
  app.add_subcommand("place-sensors", "place road sensors on the registry");
  app.add_subcommand("fit-predictor", "fit inverse-power predictors from CSVs");
  auto* allocate =
      app.add_subcommand("allocate", "plan the wireless/wireline budget");
  allocate->add_option("--mode", mode, "optimize | equal");
  app.add_subcommand("run-pipeline", "run the three-stage training pipeline");
  app.add_subcommand("report", "run every scheme and emit comparison CSVs");

  CLI11_PARSE(app, argc, argv);

  vecfl::cli::CommandIo io;
  io.config_path = config_path;
  io.out_dir = out_dir;
  if (seed_set) io.seed_override = seed;
  io.allocate_mode = mode;

  return vecfl::cli::run_command(app.get_subcommands().front()->get_name(), io);
}
