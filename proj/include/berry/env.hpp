#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace berry {

struct Cell {
  int x = 0;
  int y = 0;
  bool operator==(const Cell&) const = default;
};

enum class DensityProfile { empty, sparse, medium, dense };

const char* to_string(DensityProfile d);
DensityProfile density_profile_from_string(const std::string& s);
/// Fraction of cells turned into obstacles: 0, 0.08, 0.15, 0.25.
double obstacle_density(DensityProfile d);

enum class ActionVariant { grid25, compass8 };

const char* to_string(ActionVariant a);
ActionVariant action_variant_from_string(const std::string& s);

struct Displacement {
  int dx = 0;
  int dy = 0;
  bool operator==(const Displacement&) const = default;
};

/// grid25: index = (dy + 2) * 5 + (dx + 2), so index 12 is the null move.
/// compass8: E, NE, N, NW, W, SW, S, SE with y growing downwards.
class ActionSet {
 public:
  explicit ActionSet(ActionVariant variant = ActionVariant::grid25);
  ActionVariant variant() const { return variant_; }
  std::size_t size() const { return moves_.size(); }
  Displacement operator[](std::size_t index) const { return moves_.at(index); }
  const std::vector<Displacement>& moves() const { return moves_; }

 private:
  ActionVariant variant_;
  std::vector<Displacement> moves_;
};

struct RewardConfig {
  double goal = 100.0;
  double collision = -100.0;
  double step = -1.0;
  double shaping = 1.0;  // lambda for the potential-based distance term
  bool operator==(const RewardConfig&) const = default;
};

struct EnvConfig {
  int width = 20;
  int height = 20;
  double cell_size = 1.0;  // meters per cell
  DensityProfile density = DensityProfile::medium;
  std::optional<Cell> start;  // default (1, 1)
  std::optional<Cell> goal;   // default (width - 2, height - 2)
  int patch = 5;              // odd side length of the occupancy window
  ActionVariant actions = ActionVariant::grid25;
  RewardConfig rewards;
  int max_steps_factor = 4;  // episode cap = factor x BFS steps from the start
  bool random_start = false;  // reset(seed) draws the start among reachable cells
  int min_start_steps = 3;
  int max_attempts = 100;
  bool operator==(const EnvConfig&) const = default;
};

/// Immutable obstacle map with precomputed BFS step distances to the goal.
class GridWorld {
 public:
  GridWorld(EnvConfig config, std::vector<std::uint8_t> obstacles);

  const EnvConfig& config() const { return config_; }
  int width() const { return config_.width; }
  int height() const { return config_.height; }
  Cell start() const { return start_; }
  Cell goal() const { return goal_; }
  const ActionSet& actions() const { return actions_; }

  bool in_bounds(Cell c) const { return c.x >= 0 && c.y >= 0 && c.x < width() && c.y < height(); }
  bool blocked(Cell c) const;  // obstacle or out of bounds
  std::size_t obstacle_count() const;
  const std::vector<std::uint8_t>& obstacles() const { return obstacles_; }

  /// Cells the agent passes through moving from `from` by `d`, excluding
  /// `from` and including the landing cell.
  std::vector<Cell> swept_cells(Cell from, Displacement d) const;
  bool move_blocked(Cell from, Displacement d) const;

  /// Fewest actions from `c` to the goal, or -1 when unreachable.
  int steps_to_goal(Cell c) const;
  /// Cells with a finite path to the goal at least `min_steps` long.
  const std::vector<Cell>& start_candidates() const { return start_candidates_; }

  double diagonal() const;
  std::size_t observation_size() const;

  std::string to_text() const;
  bool operator==(const GridWorld& o) const { return config_ == o.config_ && obstacles_ == o.obstacles_; }

 private:
  std::size_t index(Cell c) const { return static_cast<std::size_t>(c.y) * width() + c.x; }
  void compute_distances();

  EnvConfig config_;
  std::vector<std::uint8_t> obstacles_;
  Cell start_;
  Cell goal_;
  ActionSet actions_;
  std::vector<int> dist_;
  std::vector<Cell> start_candidates_;
};

/// Rejection-samples obstacles at the profile density until the start can
/// reach the goal. Deterministic in (config, seed).
std::shared_ptr<const GridWorld> make_env(const EnvConfig& config, std::uint64_t seed);

/// Map text: '.' free, '#' obstacle, 'S' start, 'G' goal; one row per line.
std::shared_ptr<const GridWorld> parse_map(const std::string& text, EnvConfig config = {});
std::shared_ptr<const GridWorld> load_map(const std::filesystem::path& path, EnvConfig config = {});

using Observation = std::vector<float>;

enum class TerminalKind { none, goal, collision, timeout };
const char* to_string(TerminalKind k);

struct StepOutcome {
  Observation observation;
  double reward = 0.0;
  bool done = false;
  TerminalKind terminal = TerminalKind::none;
  double path_length_delta = 0.0;
};

/// Mutable episode cursor over a shared map.
class Episode {
 public:
  explicit Episode(std::shared_ptr<const GridWorld> world);

  /// Fixed start, or a seeded draw among start candidates when the map's
  /// config enables random starts.
  Observation reset(std::optional<std::uint64_t> episode_seed = std::nullopt);
  StepOutcome step(std::size_t action);

  Observation observe() const;
  Cell position() const { return pos_; }
  Cell episode_start() const { return start_; }
  int steps_taken() const { return steps_; }
  int max_steps() const { return max_steps_; }
  bool done() const { return done_; }
  const GridWorld& world() const { return *world_; }

 private:
  double distance_to_goal(Cell c) const;

  std::shared_ptr<const GridWorld> world_;
  Cell pos_;
  Cell start_;
  int steps_ = 0;
  int max_steps_ = 0;
  bool done_ = true;
};

}  // namespace berry
