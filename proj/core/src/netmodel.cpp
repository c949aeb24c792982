#include "vecfl/netmodel.hpp"

#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "vecfl/format.hpp"

namespace vecfl::netmodel {

std::string to_string(Stage stage) {
  switch (stage) {
    case Stage::kPretrain: return "I";
    case Stage::kEdgeFl: return "II";
    case Stage::kCloudFl: return "III";
  }
  return "I";
}

std::string to_string(Medium medium) {
  return medium == Medium::kWireless ? "wireless" : "wireline";
}

Stage stage_from_string(const std::string& s) {
  if (s == "I") return Stage::kPretrain;
  if (s == "II") return Stage::kEdgeFl;
  if (s == "III") return Stage::kCloudFl;
  throw std::invalid_argument("unknown stage: " + s);
}

Medium medium_from_string(const std::string& s) {
  if (s == "wireless") return Medium::kWireless;
  if (s == "wireline") return Medium::kWireline;
  throw std::invalid_argument("unknown medium: " + s);
}

std::int64_t mb_to_bytes(double mb) {
  if (!(mb >= 0.0) || !std::isfinite(mb)) {
    throw std::invalid_argument("MB amount must be finite and >= 0");
  }
  return std::llround(mb * 1e6);
}

double bytes_to_mb(std::int64_t bytes) {
  return static_cast<double>(bytes) / 1e6;
}

void NetworkTopology::validate() const {
  if (edges.empty()) {
    throw std::invalid_argument("NetworkTopology: at least one edge required");
  }
  std::set<int> edge_ids;
  for (const auto& e : edges) {
    if (!edge_ids.insert(e.id).second) {
      throw std::invalid_argument("NetworkTopology: duplicate edge id");
    }
  }
  std::set<int> vehicle_ids;
  for (const auto& v : vehicles) {
    if (!vehicle_ids.insert(v.id).second) {
      throw std::invalid_argument("NetworkTopology: duplicate vehicle id");
    }
    if (edge_ids.count(v.home_edge_id) == 0) {
      throw std::invalid_argument("NetworkTopology: vehicle " +
                                  std::to_string(v.id) +
                                  " references unknown edge");
    }
    if (v.data_quality < 0.0) {
      throw std::invalid_argument("NetworkTopology: data_quality must be >= 0");
    }
  }
}

std::vector<int> NetworkTopology::vehicles_at_edge(int edge_id) const {
  std::vector<int> out;
  for (const auto& v : vehicles) {
    if (v.home_edge_id == edge_id) out.push_back(v.id);
  }
  return out;
}

const VehicleNode* NetworkTopology::find_vehicle(int id) const {
  for (const auto& v : vehicles) {
    if (v.id == id) return &v;
  }
  return nullptr;
}

void ResourceBudget::validate() const {
  if (wireless_total_mb < 0.0 || wireline_total_mb < 0.0) {
    throw std::invalid_argument("ResourceBudget: totals must be >= 0");
  }
}

void CostCard::validate() const {
  if (sample_size_mb <= 0.0) {
    throw std::invalid_argument("CostCard: sample_size_mb must be > 0");
  }
  if (dnn_size_mb <= 0.0) {
    throw std::invalid_argument("CostCard: dnn_size_mb must be > 0");
  }
  if (group_size < 1) {
    throw std::invalid_argument("CostCard: group_size must be >= 1");
  }
  if (num_edges < 1) {
    throw std::invalid_argument("CostCard: num_edges must be >= 1");
  }
  if (stage2_size_fraction <= 0.0 || stage2_size_fraction > 1.0) {
    throw std::invalid_argument("CostCard: stage2_size_fraction must be in (0,1]");
  }
}

std::int64_t sample_cost_bytes(const CostCard& card) {
  return mb_to_bytes(card.sample_size_mb);
}

std::int64_t stage2_round_cost_bytes(const CostCard& card) {
  const std::int64_t scaled =
      std::llround(mb_to_bytes(card.dnn_size_mb) * card.stage2_size_fraction);
  return card.group_size * scaled;
}

std::int64_t stage3_round_cost_bytes(const CostCard& card) {
  return static_cast<std::int64_t>(card.num_edges) * mb_to_bytes(card.dnn_size_mb);
}

void Allocation::add(int task_id, Stage stage, double wireless_mb,
                     double wireline_mb) {
  add_bytes(task_id, stage, mb_to_bytes(wireless_mb), mb_to_bytes(wireline_mb));
}

void Allocation::add_bytes(int task_id, Stage stage, std::int64_t wireless,
                           std::int64_t wireline) {
  if (wireless < 0 || wireline < 0) {
    throw std::invalid_argument("Allocation: negative amount");
  }
  auto& cell = cells_[{task_id, stage}];
  cell.wireless_bytes += wireless;
  cell.wireline_bytes += wireline;
}

AllocationCell Allocation::cell(int task_id, Stage stage) const {
  auto it = cells_.find({task_id, stage});
  return it == cells_.end() ? AllocationCell{} : it->second;
}

std::int64_t Allocation::total_bytes(Medium medium) const {
  std::int64_t total = 0;
  for (const auto& [key, cell] : cells_) {
    total += medium == Medium::kWireless ? cell.wireless_bytes
                                         : cell.wireline_bytes;
  }
  return total;
}

AllocationCheck validate_allocation(const Allocation& alloc,
                                    const ResourceBudget& budget) {
  budget.validate();
  AllocationCheck check;
  const std::int64_t wireless = alloc.total_bytes(Medium::kWireless);
  const std::int64_t wireline = alloc.total_bytes(Medium::kWireline);
  const std::int64_t wireless_limit = mb_to_bytes(budget.wireless_total_mb);
  const std::int64_t wireline_limit = mb_to_bytes(budget.wireline_total_mb);
  if (wireless > wireless_limit) {
    check.ok = false;
    check.violations.push_back(
        {Medium::kWireless, bytes_to_mb(wireless - wireless_limit)});
  }
  if (wireline > wireline_limit) {
    check.ok = false;
    check.violations.push_back(
        {Medium::kWireline, bytes_to_mb(wireline - wireline_limit)});
  }
  return check;
}

std::int64_t stage1_capacity_bytes(std::int64_t wireless, std::int64_t wireline,
                                   std::int64_t sample_bytes) {
  if (sample_bytes <= 0) {
    throw std::invalid_argument("stage1_capacity: sample size must be > 0");
  }
  const std::int64_t binding = std::min(wireless, wireline);
  return binding <= 0 ? 0 : binding / sample_bytes;
}

std::int64_t stage2_capacity_bytes(std::int64_t wireless, int group_size,
                                   std::int64_t dnn_bytes) {
  if (group_size < 1) {
    throw std::invalid_argument("stage2_capacity: group_size must be >= 1");
  }
  if (dnn_bytes <= 0) {
    throw std::invalid_argument("stage2_capacity: dnn size must be > 0");
  }
  const std::int64_t round_cost = group_size * dnn_bytes;
  return wireless <= 0 ? 0 : wireless / round_cost;
}

std::int64_t stage3_capacity_bytes(std::int64_t wireline, int num_edges,
                                   std::int64_t dnn_bytes) {
  if (num_edges < 1) {
    throw std::invalid_argument("stage3_capacity: num_edges must be >= 1");
  }
  if (dnn_bytes <= 0) {
    throw std::invalid_argument("stage3_capacity: dnn size must be > 0");
  }
  const std::int64_t round_cost = static_cast<std::int64_t>(num_edges) * dnn_bytes;
  return wireline <= 0 ? 0 : wireline / round_cost;
}

long long stage1_capacity(double alloc_wireless_mb, double alloc_wireline_mb,
                          double sample_size_mb) {
  return stage1_capacity_bytes(mb_to_bytes(alloc_wireless_mb),
                               mb_to_bytes(alloc_wireline_mb),
                               mb_to_bytes(sample_size_mb));
}

long long stage2_capacity(double alloc_wireless_mb, int group_size,
                          double dnn_size_mb) {
  return stage2_capacity_bytes(mb_to_bytes(alloc_wireless_mb), group_size,
                               mb_to_bytes(dnn_size_mb));
}

long long stage3_capacity(double alloc_wireline_mb, int num_edges,
                          double dnn_size_mb) {
  return stage3_capacity_bytes(mb_to_bytes(alloc_wireline_mb), num_edges,
                               mb_to_bytes(dnn_size_mb));
}

UsageLedger::UsageLedger(Allocation limits) : limits_(std::move(limits)) {}

void UsageLedger::record(const UsageEvent& event) {
  if (event.direction == Direction::kDownlink) {
    // Downlink is not the bottleneck and is metered at zero.
    used_[{event.task_id, event.stage}];
    return;
  }
  record_bytes(event.task_id, event.stage, event.medium, mb_to_bytes(event.mb));
}

void UsageLedger::record_bytes(int task_id, Stage stage, Medium medium,
                               std::int64_t bytes) {
  if (bytes < 0) throw std::invalid_argument("UsageLedger: negative bytes");
  const AllocationCell limit = limits_.cell(task_id, stage);
  auto& cell = used_[{task_id, stage}];
  const std::int64_t limit_bytes =
      medium == Medium::kWireless ? limit.wireless_bytes : limit.wireline_bytes;
  std::int64_t& used =
      medium == Medium::kWireless ? cell.wireless_bytes : cell.wireline_bytes;
  if (used + bytes > limit_bytes) {
    throw std::runtime_error(
        "allocation exhausted: task " + std::to_string(task_id) + " stage " +
        to_string(stage) + " " + to_string(medium));
  }
  used += bytes;
}

std::int64_t UsageLedger::used_bytes(int task_id, Stage stage,
                                     Medium medium) const {
  auto it = used_.find({task_id, stage});
  if (it == used_.end()) return 0;
  return medium == Medium::kWireless ? it->second.wireless_bytes
                                     : it->second.wireline_bytes;
}

std::int64_t UsageLedger::total_used_bytes(Medium medium) const {
  std::int64_t total = 0;
  for (const auto& [key, cell] : used_) {
    total += medium == Medium::kWireless ? cell.wireless_bytes
                                         : cell.wireline_bytes;
  }
  return total;
}

std::vector<LedgerRow> UsageLedger::rows() const {
  std::vector<LedgerRow> out;
  for (const auto& [key, cell] : used_) {
    out.push_back({key.task_id, key.stage, bytes_to_mb(cell.wireless_bytes),
                   bytes_to_mb(cell.wireline_bytes)});
  }
  return out;
}

UsageLedger account_usage(const Allocation& limits,
                          const std::vector<UsageEvent>& events) {
  UsageLedger ledger(limits);
  for (const auto& event : events) ledger.record(event);
  return ledger;
}

namespace {
using nlohmann::json;

json rows_json(const std::map<AllocationKey, AllocationCell>& cells) {
  json rows = json::array();
  for (const auto& [key, cell] : cells) {
    rows.push_back({{"task", key.task_id},
                    {"stage", to_string(key.stage)},
                    {"wireless_mb", bytes_to_mb(cell.wireless_bytes)},
                    {"wireline_mb", bytes_to_mb(cell.wireline_bytes)}});
  }
  return rows;
}

std::string rows_csv(const std::map<AllocationKey, AllocationCell>& cells) {
  std::ostringstream out;
  out << "task,stage,wireless_mb,wireline_mb\n";
  for (const auto& [key, cell] : cells) {
    out << key.task_id << ',' << to_string(key.stage) << ','
        << fmt_double(bytes_to_mb(cell.wireless_bytes)) << ','
        << fmt_double(bytes_to_mb(cell.wireline_bytes)) << '\n';
  }
  return out.str();
}
}  // namespace

std::string to_json(const Allocation& alloc, const std::string& config_hash) {
  json j;
  if (!config_hash.empty()) j["config_hash"] = config_hash;
  j["rows"] = rows_json(alloc.cells());
  return j.dump(2) + "\n";
}

Allocation allocation_from_json(const std::string& text) {
  const json j = json::parse(text);
  Allocation alloc;
  for (const auto& row : j.at("rows")) {
    alloc.add(row.at("task").get<int>(),
              stage_from_string(row.at("stage").get<std::string>()),
              row.at("wireless_mb").get<double>(),
              row.at("wireline_mb").get<double>());
  }
  return alloc;
}

std::string to_csv(const Allocation& alloc) { return rows_csv(alloc.cells()); }

std::string to_json(const UsageLedger& ledger) {
  json j;
  json rows = json::array();
  for (const auto& row : ledger.rows()) {
    rows.push_back({{"task", row.task_id},
                    {"stage", to_string(row.stage)},
                    {"wireless_mb", row.wireless_mb},
                    {"wireline_mb", row.wireline_mb}});
  }
  j["rows"] = rows;
  return j.dump(2) + "\n";
}

std::string to_csv(const UsageLedger& ledger) {
  std::ostringstream out;
  out << "task,stage,wireless_mb,wireline_mb\n";
  for (const auto& row : ledger.rows()) {
    out << row.task_id << ',' << to_string(row.stage) << ','
        << fmt_double(row.wireless_mb) << ',' << fmt_double(row.wireline_mb)
        << '\n';
  }
  return out.str();
}

}  // namespace vecfl::netmodel
