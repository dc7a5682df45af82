#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "berry/env.hpp"
#include "berry/eval.hpp"
#include "berry/faults.hpp"
#include "berry/rl.hpp"
#include "berry/sysmodel.hpp"

namespace berry {

const char* pattern_name(FaultPattern p);  // random | column_aligned | profiled
FaultPattern pattern_from_string(const std::string& s);

struct EnvSection {
  EnvConfig env = [] {
    EnvConfig e;
    e.random_start = true;
    e.rewards = {1.0, -1.0, -0.01, 0.01};  // the env's reward structure at 1/100 scale
    return e;
  }();
  std::uint64_t map_seed = 7;
  std::string map_file;  // overrides generation when set
  bool operator==(const EnvSection&) const = default;
};

struct TrainSection {
  std::string mode = "classical";
  double p = 0.005;
  std::size_t episodes = 500;
  std::size_t batch = 32;
  double gamma = 0.99;
  double alpha = 1e-3;
  std::size_t target_period = 500;
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  double epsilon_decay_fraction = 0.5;
  std::size_t buffer_capacity = 50000;
  std::size_t learning_starts = 0;
  std::vector<std::size_t> hidden = {64, 64};
  std::optional<std::uint64_t> seed;  // falls back to the global seed
  bool operator==(const TrainSection&) const = default;
};

struct FaultsSection {
  std::string semantics = "stuck_at";
  double stuck_one_prob = 0.5;
  bool include_biases = true;
  std::size_t cols = 64;
  std::string curve_file;  // bundled curve when empty
  std::string map_file;    // on-device training map / profiled campaign map
  bool operator==(const FaultsSection&) const = default;
};

struct PlatformSection {
  std::string preset = "crazyflie";
  std::string file;  // overrides the preset when set
  bool operator==(const PlatformSection&) const = default;
};

struct CampaignSection {
  std::vector<double> voltages = bundled_voltage_grid();
  std::size_t maps_per_voltage = 50;
  std::size_t episodes_per_map = 20;
  std::string pattern = "random";
  double zero_to_one_bias = 0.5;
  double col_concentration = 8.0;
  bool activation_faults = false;
  std::vector<std::uint64_t> env_seeds;
  std::optional<std::uint64_t> seed;  // falls back to the global seed
  std::size_t jobs = 1;
  bool operator==(const CampaignSection&) const = default;
};

struct IoSection {
  std::string output_dir = "out";
  std::string checkpoint;  // default <output_dir>/policy.ckpt
  bool operator==(const IoSection&) const = default;
};

struct RunConfig {
  std::uint64_t seed = 1;
  EnvSection env;
  TrainSection train;
  FaultsSection faults;
  PlatformSection platform;
  CampaignSection campaign;
  IoSection io;
  bool operator==(const RunConfig&) const = default;

  std::uint64_t train_seed() const { return train.seed.value_or(seed); }
  std::uint64_t campaign_seed() const { return campaign.seed.value_or(seed); }
  std::filesystem::path checkpoint_path() const;
};

/// `section.key=value` (or `seed=value`); value is parsed as YAML.
using Override = std::pair<std::string, std::string>;

/// Parses YAML text. Missing keys keep their defaults; unknown keys and bad
/// values raise ConfigError with "<source>:<line>:" prefixes. When the text
/// sets no top-level seed, BERRY_SIM_SEED is used if present. Overrides win
/// over file values.
RunConfig parse_run_config(const std::string& text, const std::string& source = "<config>",
                           const std::vector<Override>& overrides = {});
/// Relative input paths (maps, curve, platform) resolve against the file's
/// directory; output paths stay relative to the working directory.
RunConfig load_run_config(const std::filesystem::path& path, const std::vector<Override>& overrides = {});

/// Effective config as YAML with every key spelled out.
std::string serialize_run_config(const RunConfig& cfg);

/// Digest of the result-affecting parts of the config (io and jobs excluded).
std::string config_hash(const RunConfig& cfg);

// Builders for the module-level configs. Paths are read here.
EnvConfig env_config(const RunConfig& cfg);
std::shared_ptr<const GridWorld> build_world(const RunConfig& cfg);
FaultModel fault_model(const RunConfig& cfg);
VoltageCurve load_curve(const RunConfig& cfg);
UavPlatform load_platform_config(const RunConfig& cfg);
TrainConfig train_config(const RunConfig& cfg);
CampaignConfig campaign_config(const RunConfig& cfg);

/// Checks that every input path named by the config exists.
void validate_paths(const RunConfig& cfg, bool need_checkpoint);

}  // namespace berry
