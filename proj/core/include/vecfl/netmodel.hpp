#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace vecfl::netmodel {

// Training stages: I cloud pretraining, II edge FL, III cloud FL.
enum class Stage { kPretrain, kEdgeFl, kCloudFl };
enum class Medium { kWireless, kWireline };
enum class Direction { kUplink, kDownlink };

inline constexpr std::array<Stage, 3> kAllStages{Stage::kPretrain,
                                                 Stage::kEdgeFl,
                                                 Stage::kCloudFl};

std::string to_string(Stage stage);    // "I" / "II" / "III"
std::string to_string(Medium medium);  // "wireless" / "wireline"
Stage stage_from_string(const std::string& s);
Medium medium_from_string(const std::string& s);

// Throughput is accounted in exact integer bytes; 1 MB = 1e6 bytes. The
// public API speaks double MB and converts at the boundary.
std::int64_t mb_to_bytes(double mb);
double bytes_to_mb(std::int64_t bytes);

struct VehicleNode {
  int id = 0;
  int home_edge_id = 0;
  double data_quality = 1.0;  // >= 0
};

struct EdgeNode {
  int id = 0;
};

struct CloudNode {};

struct NetworkTopology {
  std::vector<VehicleNode> vehicles;
  std::vector<EdgeNode> edges;
  CloudNode cloud;

  void validate() const;
  std::vector<int> vehicles_at_edge(int edge_id) const;
  const VehicleNode* find_vehicle(int id) const;
};

struct ResourceBudget {
  double wireless_total_mb = 0.0;
  double wireline_total_mb = 0.0;
  void validate() const;
};

// Per-unit communication prices of one training job (one DNN).
// stage2_size_fraction scales the parameter exchange for edge FL when
// segments are frozen (apply_freeze reports the transmitted fraction);
// stage III always exchanges the full model.
struct CostCard {
  double sample_size_mb = 1.0;  // per data sample
  double dnn_size_mb = 1.0;     // per parameter exchange
  int group_size = 1;           // vehicles per edge FL group
  int num_edges = 1;            // edge servers in cloud FL
  double stage2_size_fraction = 1.0;
  void validate() const;
};

// Exact per-unit byte prices derived from a cost card.
std::int64_t sample_cost_bytes(const CostCard& card);
std::int64_t stage2_round_cost_bytes(const CostCard& card);
std::int64_t stage3_round_cost_bytes(const CostCard& card);

struct AllocationKey {
  int task_id = 0;
  Stage stage = Stage::kPretrain;
  auto operator<=>(const AllocationKey&) const = default;
};

struct AllocationCell {
  std::int64_t wireless_bytes = 0;
  std::int64_t wireline_bytes = 0;
};

// Budget split across (task, stage) cells. Task ids are the caller's
// training-job ids (one per DNN in planned runs).
class Allocation {
 public:
  void add(int task_id, Stage stage, double wireless_mb, double wireline_mb);
  void add_bytes(int task_id, Stage stage, std::int64_t wireless,
                 std::int64_t wireline);
  AllocationCell cell(int task_id, Stage stage) const;
  std::int64_t total_bytes(Medium medium) const;
  const std::map<AllocationKey, AllocationCell>& cells() const { return cells_; }
  bool empty() const { return cells_.empty(); }

 private:
  std::map<AllocationKey, AllocationCell> cells_;
};

struct BudgetViolation {
  Medium medium = Medium::kWireless;
  double excess_mb = 0.0;
};

struct AllocationCheck {
  bool ok = true;
  std::vector<BudgetViolation> violations;
};

// ok iff the summed wireless and wireline usage each fit their budget
// (closed boundary: exact fits are feasible).
AllocationCheck validate_allocation(const Allocation& alloc,
                                    const ResourceBudget& budget);

// Stage capacities, floor semantics via integer byte division.
// Stage I: samples relayed vehicle->edge->cloud, the lesser medium binds.
long long stage1_capacity(double alloc_wireless_mb, double alloc_wireline_mb,
                          double sample_size_mb);
// Stage II: wireless rounds of group_size parameter uploads.
long long stage2_capacity(double alloc_wireless_mb, int group_size,
                          double dnn_size_mb);
// Stage III: wireline rounds of num_edges parameter uploads.
long long stage3_capacity(double alloc_wireline_mb, int num_edges,
                          double dnn_size_mb);

std::int64_t stage1_capacity_bytes(std::int64_t wireless, std::int64_t wireline,
                                   std::int64_t sample_bytes);
std::int64_t stage2_capacity_bytes(std::int64_t wireless, int group_size,
                                   std::int64_t dnn_bytes);
std::int64_t stage3_capacity_bytes(std::int64_t wireline, int num_edges,
                                   std::int64_t dnn_bytes);

struct UsageEvent {
  int task_id = 0;
  Stage stage = Stage::kPretrain;
  Medium medium = Medium::kWireless;
  Direction direction = Direction::kUplink;
  double mb = 0.0;
};

struct LedgerRow {
  int task_id = 0;
  Stage stage = Stage::kPretrain;
  double wireless_mb = 0.0;
  double wireline_mb = 0.0;
};

// Exact running totals per (task, stage, medium) against fixed limits.
// Uplink-only accounting: downlink events contribute 0 bytes. Recording an
// event that would exceed its cell throws "allocation exhausted".
class UsageLedger {
 public:
  explicit UsageLedger(Allocation limits);

  void record(const UsageEvent& event);
  void record_bytes(int task_id, Stage stage, Medium medium,
                    std::int64_t bytes);

  std::int64_t used_bytes(int task_id, Stage stage, Medium medium) const;
  std::int64_t total_used_bytes(Medium medium) const;
  const Allocation& limits() const { return limits_; }
  std::vector<LedgerRow> rows() const;

 private:
  Allocation limits_;
  std::map<AllocationKey, AllocationCell> used_;
};

// Replays an event log against the limits; throws on the first violation.
UsageLedger account_usage(const Allocation& limits,
                          const std::vector<UsageEvent>& events);

std::string to_json(const Allocation& alloc, const std::string& config_hash = "");
Allocation allocation_from_json(const std::string& text);
std::string to_csv(const Allocation& alloc);
std::string to_json(const UsageLedger& ledger);
std::string to_csv(const UsageLedger& ledger);

}  // namespace vecfl::netmodel
