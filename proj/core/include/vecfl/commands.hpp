#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

namespace vecfl::cli {

struct CommandIo {
  std::filesystem::path config_path;
  std::filesystem::path out_dir;
  std::optional<std::uint64_t> seed_override;
  std::string allocate_mode = "optimize";  // or "equal"
};

// Artifact filenames inside --out.
namespace artifact {
inline constexpr const char* kScenario = "scenario.json";
inline constexpr const char* kRegistry = "registry.json";
inline constexpr const char* kPlacement = "placement.json";
inline constexpr const char* kPlacementBaseline = "placement_baseline.json";
inline constexpr const char* kPredictors = "predictors.json";
inline constexpr const char* kAllocation = "allocation.json";
inline constexpr const char* kAllocationCsv = "allocation.csv";
inline constexpr const char* kManifest = "manifest.json";
inline constexpr const char* kStageMetrics = "stage_metrics.csv";
inline constexpr const char* kRounds = "rounds.csv";
inline constexpr const char* kLedger = "ledger.csv";
inline constexpr const char* kSchemes = "schemes.csv";
inline constexpr const char* kRadar = "radar.csv";
}  // namespace artifact

void cmd_gen_scenario(const CommandIo& io);
void cmd_collect_errors(const CommandIo& io);
void cmd_place_sensors(const CommandIo& io);
void cmd_fit_predictor(const CommandIo& io);
void cmd_allocate(const CommandIo& io);
void cmd_run_pipeline(const CommandIo& io);
void cmd_report(const CommandIo& io);

// Dispatches by subcommand name and maps exceptions to the exit-code
// contract: 0 ok, 2 config error, 3 missing artifact, 4 infeasible
// allocation, 1 anything else.
int run_command(const std::string& name, const CommandIo& io);

}  // namespace vecfl::cli
