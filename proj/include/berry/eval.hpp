#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "berry/env.hpp"
#include "berry/faults.hpp"
#include "berry/qnet.hpp"
#include "berry/sysmodel.hpp"

namespace berry {

inline constexpr const char* kVersion = "berry-sim 0.1.0";

struct MapMetrics {
  std::size_t episodes = 0;
  std::size_t successes = 0;
  std::size_t collisions = 0;
  std::size_t timeouts = 0;
  double success_rate = 0.0;
  double success_path_sum = 0.0;  // meters, successful episodes only
  double path_sum = 0.0;          // meters, all episodes

  double mean_success_path() const { return successes ? success_path_sum / static_cast<double>(successes) : 0.0; }
  double mean_path() const { return episodes ? path_sum / static_cast<double>(episodes) : 0.0; }
  bool operator==(const MapMetrics&) const = default;
};

struct EvalOptions {
  FaultModel fault_model;
  double activation_p = 0.0;  // 0 disables activation-memory faults
  std::uint64_t activation_seed = 0;
};

/// Seed of the e-th evaluation episode; shared by every map and voltage of a
/// campaign so fault maps are compared on identical starts.
std::uint64_t eval_episode_seed(std::uint64_t campaign_seed, std::size_t episode);

/// Greedy rollouts of `net` corrupted once by `fault_map`, one episode per
/// seed.
MapMetrics evaluate_policy(const QNetwork& net, std::shared_ptr<const GridWorld> world, const FaultMap& fault_map,
                           std::span<const std::uint64_t> episode_seeds, const EvalOptions& opts = {});

/// Greedy rollouts of an already corrupted network.
MapMetrics evaluate_network(const QNetwork& corrupted, std::shared_ptr<const GridWorld> world,
                            std::span<const std::uint64_t> episode_seeds, const ActivationTransform* hook = nullptr);

struct CampaignConfig {
  std::vector<double> voltages = bundled_voltage_grid();
  std::size_t maps_per_voltage = 50;
  std::size_t episodes_per_map = 20;
  FaultPattern pattern = FaultPattern::sampled;
  double zero_to_one_bias = 0.5;  // column_aligned only
  double col_concentration = 8.0;  // column_aligned only
  std::optional<FaultMap> profiled_map;
  bool activation_faults = false;
  FaultModel fault_model;
  std::uint64_t seed = 1;
  std::vector<std::uint64_t> env_seeds;  // overrides the derived episode seeds, cycled
  std::size_t jobs = 1;
  std::string config_hash;  // caller-provided digest of the effective config

  void validate(const VoltageCurve& curve) const;
  std::vector<std::uint64_t> episode_seeds() const;
};

std::uint64_t campaign_map_seed(std::uint64_t campaign_seed, std::size_t voltage_index, std::size_t map_index);

/// Fault map for one (voltage, map index) cell of a campaign.
FaultMap campaign_fault_map(const CampaignConfig& cfg, const MemoryLayout& layout, double p, std::size_t voltage_index,
                            std::size_t map_index);

struct QofRow {
  double v_norm = 1.0;
  double ber = 0.0;
  double energy_scale = 1.0;
  double success_rate = 0.0;
  double success_stderr = 0.0;
  double flight_distance = 0.0;
  double flight_time = 0.0;
  double flight_energy = 0.0;
  double missions = 0.0;
  std::size_t maps = 0;
  std::size_t episodes = 0;
  bool operator==(const QofRow&) const = default;
};

struct QofReport {
  std::vector<QofRow> rows;  // descending v_norm
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string platform;
  std::string version = kVersion;
  std::string policy_digest;
  bool operator==(const QofReport&) const = default;
};

struct CampaignResult {
  QofReport report;
  // per_map[v][m] in voltage and map index order.
  std::vector<std::vector<MapMetrics>> per_map;
};

CampaignResult run_campaign(const CampaignConfig& cfg, const QNetwork& net, std::shared_ptr<const GridWorld> world,
                            const UavPlatform& platform, const VoltageCurve& curve);

/// Mission distance used for a voltage row: mean successful path length,
/// falling back to the mean over all episodes when nothing succeeded.
double row_flight_distance(const std::vector<MapMetrics>& maps);

struct DeltaRow {
  double v_norm = 1.0;
  double success_delta_pp = 0.0;     // b - a, percentage points
  double energy_delta_pct = 0.0;     // b vs a at the same voltage
  double missions_delta_pct = 0.0;   // b vs a at the same voltage
  double energy_vs_ref_pct = 0.0;    // b vs a's reference (highest-voltage) row
  double missions_vs_ref_pct = 0.0;  // b vs a's reference (highest-voltage) row
};

double percent_change(double from, double to);

/// Signed percentage deltas (negative energy = savings). Throws UsageError if
/// the voltage grids differ.
std::vector<DeltaRow> compare_reports(const QofReport& a, const QofReport& b);

std::string report_to_csv(const QofReport& r);
std::string report_to_json(const QofReport& r);
QofReport report_from_json(const std::string& text);
QofReport load_report(const std::filesystem::path& path);
std::string deltas_to_csv(const std::vector<DeltaRow>& d);
std::string deltas_to_text(const std::vector<DeltaRow>& d);

/// 64-bit FNV-1a, hex encoded.
std::string fnv1a_hex(const std::string& data);

}  // namespace berry
