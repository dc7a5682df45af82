#include "berry/env.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <sstream>

#include "berry/error.hpp"
#include "berry/rng.hpp"

namespace berry {

const char* to_string(DensityProfile d) {
  switch (d) {
    case DensityProfile::empty:
      return "empty";
    case DensityProfile::sparse:
      return "sparse";
    case DensityProfile::medium:
      return "medium";
    case DensityProfile::dense:
      return "dense";
  }
  return "?";
}

DensityProfile density_profile_from_string(const std::string& s) {
  if (s == "empty") return DensityProfile::empty;
  if (s == "sparse") return DensityProfile::sparse;
  if (s == "medium") return DensityProfile::medium;
  if (s == "dense") return DensityProfile::dense;
  throw ConfigError("unknown density profile '" + s + "' (expected empty, sparse, medium or dense)");
}

double obstacle_density(DensityProfile d) {
  switch (d) {
    case DensityProfile::empty:
      return 0.0;
    case DensityProfile::sparse:
      return 0.08;
    case DensityProfile::medium:
      return 0.15;
    case DensityProfile::dense:
      return 0.25;
  }
  return 0.0;
}

const char* to_string(ActionVariant a) { return a == ActionVariant::grid25 ? "grid25" : "compass8"; }

ActionVariant action_variant_from_string(const std::string& s) {
  if (s == "grid25") return ActionVariant::grid25;
  if (s == "compass8") return ActionVariant::compass8;
  throw ConfigError("unknown action set '" + s + "' (expected grid25 or compass8)");
}

ActionSet::ActionSet(ActionVariant variant) : variant_(variant) {
  if (variant == ActionVariant::grid25) {
    for (int dy = -2; dy <= 2; ++dy)
      for (int dx = -2; dx <= 2; ++dx) moves_.push_back({dx, dy});
  } else {
    moves_ = {{1, 0}, {1, -1}, {0, -1}, {-1, -1}, {-1, 0}, {-1, 1}, {0, 1}, {1, 1}};
  }
}

const char* to_string(TerminalKind k) {
  switch (k) {
    case TerminalKind::none:
      return "none";
    case TerminalKind::goal:
      return "goal";
    case TerminalKind::collision:
      return "collision";
    case TerminalKind::timeout:
      return "timeout";
  }
  return "?";
}

namespace {

Cell default_start(const EnvConfig& c) { return c.start.value_or(Cell{1, 1}); }
Cell default_goal(const EnvConfig& c) { return c.goal.value_or(Cell{c.width - 2, c.height - 2}); }

void validate(const EnvConfig& c) {
  if (c.width < 5 || c.height < 5) throw ConfigError("environment must be at least 5x5 cells");
  if (!(c.cell_size > 0.0)) throw ConfigError("cell_size must be positive");
  if (c.patch < 1 || c.patch % 2 == 0) throw ConfigError("observation patch must be a positive odd number");
  if (c.max_steps_factor < 1) throw ConfigError("max_steps_factor must be >= 1");
  if (c.min_start_steps < 1) throw ConfigError("min_start_steps must be >= 1");
  if (c.max_attempts < 1) throw ConfigError("max_attempts must be >= 1");
  const Cell s = default_start(c), g = default_goal(c);
  auto inside = [&](Cell x) { return x.x >= 0 && x.y >= 0 && x.x < c.width && x.y < c.height; };
  if (!inside(s) || !inside(g)) throw ConfigError("start and goal must lie inside the map");
  if (s == g) throw ConfigError("start and goal must differ");
}

}  // namespace

GridWorld::GridWorld(EnvConfig config, std::vector<std::uint8_t> obstacles)
    : config_(std::move(config)), obstacles_(std::move(obstacles)), actions_(config_.actions) {
  validate(config_);
  if (obstacles_.size() != static_cast<std::size_t>(width()) * height())
    throw ConfigError("obstacle grid does not match map dimensions");
  start_ = default_start(config_);
  goal_ = default_goal(config_);
  config_.start = start_;
  config_.goal = goal_;
  if (obstacles_[index(start_)] || obstacles_[index(goal_)])
    throw ConfigError("start and goal cells must be free");
  compute_distances();
  if (steps_to_goal(start_) < 0) throw GenerationError("no collision-free path from start to goal");
}

bool GridWorld::blocked(Cell c) const { return !in_bounds(c) || obstacles_[index(c)] != 0; }

std::size_t GridWorld::obstacle_count() const {
  return static_cast<std::size_t>(std::count(obstacles_.begin(), obstacles_.end(), std::uint8_t{1}));
}

std::vector<Cell> GridWorld::swept_cells(Cell from, Displacement d) const {
  std::vector<Cell> cells;
  const int n = std::max(std::abs(d.dx), std::abs(d.dy));
  for (int k = 1; k <= n; ++k) {
    // Rounding the absolute coordinate (not the offset) keeps the swept set
    // identical for a move and its reverse.
    const double t = static_cast<double>(k) / n;
    const Cell c{static_cast<int>(std::floor(from.x + t * d.dx + 0.5)),
                 static_cast<int>(std::floor(from.y + t * d.dy + 0.5))};
    if (cells.empty() || !(cells.back() == c)) cells.push_back(c);
  }
  return cells;
}

bool GridWorld::move_blocked(Cell from, Displacement d) const {
  for (const auto& c : swept_cells(from, d))
    if (blocked(c)) return true;
  return false;
}

void GridWorld::compute_distances() {
  dist_.assign(obstacles_.size(), -1);
  std::deque<Cell> queue{goal_};
  dist_[index(goal_)] = 0;
  while (!queue.empty()) {
    const Cell c = queue.front();
    queue.pop_front();
    for (const auto& m : actions_.moves()) {
      if (m.dx == 0 && m.dy == 0) continue;
      const Cell n{c.x + m.dx, c.y + m.dy};
      if (!in_bounds(n) || dist_[index(n)] >= 0) continue;
      if (move_blocked(c, m)) continue;
      dist_[index(n)] = dist_[index(c)] + 1;
      queue.push_back(n);
    }
  }
  start_candidates_.clear();
  for (int y = 0; y < height(); ++y)
    for (int x = 0; x < width(); ++x) {
      const int d = dist_[index({x, y})];
      if (d >= config_.min_start_steps) start_candidates_.push_back({x, y});
    }
}

int GridWorld::steps_to_goal(Cell c) const { return in_bounds(c) ? dist_[index(c)] : -1; }

double GridWorld::diagonal() const {
  return config_.cell_size * std::hypot(static_cast<double>(width() - 1), static_cast<double>(height() - 1));
}

std::size_t GridWorld::observation_size() const {
  return static_cast<std::size_t>(config_.patch) * config_.patch + 3;
}

std::string GridWorld::to_text() const {
  std::string out;
  for (int y = 0; y < height(); ++y) {
    for (int x = 0; x < width(); ++x) {
      const Cell c{x, y};
      out += c == start_ ? 'S' : c == goal_ ? 'G' : obstacles_[index(c)] ? '#' : '.';
    }
    out += '\n';
  }
  return out;
}

std::shared_ptr<const GridWorld> make_env(const EnvConfig& config, std::uint64_t seed) {
  validate(config);
  const double density = obstacle_density(config.density);
  const Cell s = default_start(config), g = default_goal(config);
  const auto n = static_cast<std::size_t>(config.width) * config.height;
  for (int attempt = 0; attempt < config.max_attempts; ++attempt) {
    Rng rng(derive_seed(seed, {0xE4FULL, static_cast<std::uint64_t>(attempt)}));
    std::vector<std::uint8_t> obstacles(n, 0);
    for (std::size_t i = 0; i < n; ++i) obstacles[i] = rng.bernoulli(density) ? 1 : 0;
    obstacles[static_cast<std::size_t>(s.y) * config.width + s.x] = 0;
    obstacles[static_cast<std::size_t>(g.y) * config.width + g.x] = 0;
    try {
      return std::make_shared<const GridWorld>(config, std::move(obstacles));
    } catch (const GenerationError&) {
      continue;
    }
  }
  throw GenerationError("no solvable map after " + std::to_string(config.max_attempts) + " attempts");
}

std::shared_ptr<const GridWorld> parse_map(const std::string& text, EnvConfig config) {
  std::vector<std::string> rows;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == ';') continue;
    rows.push_back(line);
  }
  if (rows.empty()) throw ConfigError("map file is empty");
  const int w = static_cast<int>(rows.front().size());
  const int h = static_cast<int>(rows.size());
  std::optional<Cell> start, goal;
  std::vector<std::uint8_t> obstacles(static_cast<std::size_t>(w) * h, 0);
  for (int y = 0; y < h; ++y) {
    if (static_cast<int>(rows[y].size()) != w)
      throw ConfigError("map row " + std::to_string(y + 1) + " has a different width");
    for (int x = 0; x < w; ++x) {
      const char ch = rows[y][x];
      switch (ch) {
        case '.':
          break;
        case '#':
          obstacles[static_cast<std::size_t>(y) * w + x] = 1;
          break;
        case 'S':
          if (start) throw ConfigError("map has more than one start");
          start = Cell{x, y};
          break;
        case 'G':
          if (goal) throw ConfigError("map has more than one goal");
          goal = Cell{x, y};
          break;
        default:
          throw ConfigError("map row " + std::to_string(y + 1) + ": unexpected character '" + std::string(1, ch) + "'");
      }
    }
  }
  if (!start || !goal) throw ConfigError("map needs exactly one S and one G");
  config.width = w;
  config.height = h;
  config.start = start;
  config.goal = goal;
  return std::make_shared<const GridWorld>(config, std::move(obstacles));
}

std::shared_ptr<const GridWorld> load_map(const std::filesystem::path& path, EnvConfig config) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open map file " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_map(ss.str(), std::move(config));
}

Episode::Episode(std::shared_ptr<const GridWorld> world) : world_(std::move(world)) {
  if (!world_) throw UsageError("episode needs a map");
  pos_ = start_ = world_->start();
}

Observation Episode::reset(std::optional<std::uint64_t> episode_seed) {
  start_ = world_->start();
  if (world_->config().random_start && episode_seed) {
    const auto& cands = world_->start_candidates();
    if (!cands.empty()) {
      Rng rng(derive_seed(*episode_seed, {0x57A27ULL}));
      start_ = cands[rng.below(cands.size())];
    }
  }
  pos_ = start_;
  steps_ = 0;
  done_ = false;
  max_steps_ = world_->config().max_steps_factor * std::max(1, world_->steps_to_goal(start_));
  return observe();
}

double Episode::distance_to_goal(Cell c) const {
  const Cell g = world_->goal();
  return world_->config().cell_size * std::hypot(static_cast<double>(g.x - c.x), static_cast<double>(g.y - c.y));
}

Observation Episode::observe() const {
  const auto& cfg = world_->config();
  Observation obs;
  obs.reserve(world_->observation_size());
  const int r = cfg.patch / 2;
  for (int dy = -r; dy <= r; ++dy)
    for (int dx = -r; dx <= r; ++dx) obs.push_back(world_->blocked({pos_.x + dx, pos_.y + dy}) ? 1.0f : 0.0f);
  const Cell g = world_->goal();
  const double vx = g.x - pos_.x, vy = g.y - pos_.y;
  const double norm = std::hypot(vx, vy);
  obs.push_back(norm > 0 ? static_cast<float>(vx / norm) : 0.0f);
  obs.push_back(norm > 0 ? static_cast<float>(vy / norm) : 0.0f);
  obs.push_back(static_cast<float>(distance_to_goal(pos_) / world_->diagonal()));
  return obs;
}

StepOutcome Episode::step(std::size_t action) {
  if (done_) throw UsageError("step() on a finished episode; call reset() first");
  const auto& actions = world_->actions();
  if (action >= actions.size()) throw UsageError("action index " + std::to_string(action) + " out of range");
  const auto& cfg = world_->config();
  const auto& rw = cfg.rewards;
  const Displacement d = actions[action];

  StepOutcome out;
  ++steps_;
  out.reward = rw.step;
  if (world_->move_blocked(pos_, d)) {
    out.reward += rw.collision;
    out.terminal = TerminalKind::collision;
  } else {
    const double before = distance_to_goal(pos_);
    pos_ = {pos_.x + d.dx, pos_.y + d.dy};
    const double after = distance_to_goal(pos_);
    out.reward += rw.shaping * (before - after) / cfg.cell_size;
    out.path_length_delta = cfg.cell_size * std::hypot(static_cast<double>(d.dx), static_cast<double>(d.dy));
    if (pos_ == world_->goal()) {
      out.reward += rw.goal;
      out.terminal = TerminalKind::goal;
    } else if (steps_ >= max_steps_) {
      out.terminal = TerminalKind::timeout;
    }
  }
  out.done = out.terminal != TerminalKind::none;
  done_ = out.done;
  out.observation = observe();
  return out;
}

}  // namespace berry
