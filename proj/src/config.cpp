#include "berry/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "berry/error.hpp"

namespace berry {

const char* pattern_name(FaultPattern p) {
  switch (p) {
    case FaultPattern::sampled:
      return "random";
    case FaultPattern::column_aligned:
      return "column_aligned";
    case FaultPattern::profiled:
      return "profiled";
  }
  return "?";
}

FaultPattern pattern_from_string(const std::string& s) {
  if (s == "random") return FaultPattern::sampled;
  if (s == "column_aligned") return FaultPattern::column_aligned;
  if (s == "profiled") return FaultPattern::profiled;
  throw ConfigError("unknown fault pattern '" + s + "' (expected random, column_aligned or profiled)");
}

std::filesystem::path RunConfig::checkpoint_path() const {
  if (!io.checkpoint.empty()) return io.checkpoint;
  return std::filesystem::path(io.output_dir) / "policy.ckpt";
}

namespace {

class Reader {
 public:
  explicit Reader(std::string source) : source_(std::move(source)) {}

  [[noreturn]] void fail(const YAML::Node& n, const std::string& msg) const {
    const auto mark = n.Mark();
    if (mark.line >= 0) throw ConfigError(source_ + ":" + std::to_string(mark.line + 1) + ": " + msg);
    throw ConfigError(source_ + ": " + msg);
  }

  double real(const YAML::Node& n, const std::string& key) const {
    if (!n.IsScalar()) fail(n, key + ": expected a number");
    try {
      return n.as<double>();
    } catch (const YAML::Exception&) {
      fail(n, key + ": expected a number, got '" + n.Scalar() + "'");
    }
  }

  std::uint64_t u64(const YAML::Node& n, const std::string& key) const {
    if (!n.IsScalar()) fail(n, key + ": expected a non-negative integer");
    const std::string& s = n.Scalar();
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
      fail(n, key + ": expected a non-negative integer, got '" + s + "'");
    return v;
  }

  std::size_t count(const YAML::Node& n, const std::string& key, std::size_t min = 0) const {
    const auto v = u64(n, key);
    if (v < min) fail(n, key + ": must be >= " + std::to_string(min));
    return static_cast<std::size_t>(v);
  }

  int integer(const YAML::Node& n, const std::string& key) const {
    if (!n.IsScalar()) fail(n, key + ": expected an integer");
    const std::string& s = n.Scalar();
    int v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
      fail(n, key + ": expected an integer, got '" + s + "'");
    return v;
  }

  bool boolean(const YAML::Node& n, const std::string& key) const {
    if (!n.IsScalar()) fail(n, key + ": expected true or false");
    try {
      return n.as<bool>();
    } catch (const YAML::Exception&) {
      fail(n, key + ": expected true or false, got '" + n.Scalar() + "'");
    }
  }

  std::string str(const YAML::Node& n, const std::string& key) const {
    if (n.IsNull()) return "";
    if (!n.IsScalar()) fail(n, key + ": expected a string");
    return n.Scalar();
  }

  template <class F>
  auto choice(const YAML::Node& n, const std::string& key, F&& parse) const {
    const auto s = str(n, key);
    try {
      parse(s);
    } catch (const ConfigError& e) {
      fail(n, key + ": " + e.what());
    }
    return s;
  }

  double probability(const YAML::Node& n, const std::string& key) const {
    const double v = real(n, key);
    if (!(v >= 0.0 && v <= 1.0)) fail(n, key + ": must lie in [0, 1]");
    return v;
  }

  double positive(const YAML::Node& n, const std::string& key) const {
    const double v = real(n, key);
    if (!(v > 0.0)) fail(n, key + ": must be positive");
    return v;
  }

  template <class T, class F>
  std::vector<T> list(const YAML::Node& n, const std::string& key, F&& item) const {
    if (!n.IsSequence()) fail(n, key + ": expected a list");
    std::vector<T> out;
    for (const auto& e : n) out.push_back(item(e, key));
    return out;
  }

  std::optional<Cell> cell(const YAML::Node& n, const std::string& key) const {
    if (n.IsNull()) return std::nullopt;
    if (!n.IsSequence() || n.size() != 2) fail(n, key + ": expected [x, y]");
    return Cell{integer(n[0], key), integer(n[1], key)};
  }

  using Handler = std::function<void(const YAML::Node&)>;

  void section(const YAML::Node& n, const std::string& name, const std::map<std::string, Handler>& handlers) const {
    if (n.IsNull()) return;
    if (!n.IsMap()) fail(n, "section '" + name + "' must be a mapping");
    for (const auto& kv : n) {
      const auto key = kv.first.as<std::string>();
      const auto it = handlers.find(key);
      if (it == handlers.end()) {
        const auto where = name.empty() ? "at top level" : "in section '" + name + "'";
        fail(kv.first, "unknown key '" + key + "' " + where);
      }
      it->second(kv.second);
    }
  }

 private:
  std::string source_;
};

void apply_override(YAML::Node& root, const Override& ov) {
  const auto& [path, value] = ov;
  YAML::Node parsed;
  try {
    parsed = YAML::Load(value);
  } catch (const YAML::Exception& e) {
    throw ConfigError("override " + path + ": " + e.what());
  }
  std::vector<std::string> parts;
  std::stringstream ss(path);
  for (std::string part; std::getline(ss, part, '.');) {
    if (part.empty()) throw ConfigError("malformed override key '" + path + "'");
    parts.push_back(part);
  }
  if (parts.empty() || path.back() == '.') throw ConfigError("malformed override key '" + path + "'");
  YAML::Node node = root;
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    YAML::Node child = node[parts[i]];
    node.reset(child);
  }
  node[parts.back()] = parsed;
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, ptr);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

}  // namespace

RunConfig parse_run_config(const std::string& text, const std::string& source, const std::vector<Override>& overrides) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError(source + ":" + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
  if (root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
  if (!root.IsMap()) throw ConfigError(source + ": top level must be a mapping");
  for (const auto& ov : overrides) apply_override(root, ov);

  RunConfig cfg;
  if (!root["seed"]) {
    if (const char* env = std::getenv("BERRY_SIM_SEED")) {
      std::uint64_t v = 0;
      const std::string s(env);
      const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
        throw ConfigError("BERRY_SIM_SEED must be a non-negative integer, got '" + s + "'");
      cfg.seed = v;
    }
  }

  const Reader r(source);
  auto& env = cfg.env;
  auto& rw = env.env.rewards;
  auto& tr = cfg.train;
  auto& fa = cfg.faults;
  auto& pl = cfg.platform;
  auto& ca = cfg.campaign;
  auto& io = cfg.io;

  using H = Reader::Handler;
  auto count_item = [&](const YAML::Node& n, const std::string& k) { return r.count(n, k, 1); };
  auto u64_item = [&](const YAML::Node& n, const std::string& k) { return r.u64(n, k); };
  auto voltage_item = [&](const YAML::Node& n, const std::string& k) { return r.positive(n, k); };

  const std::map<std::string, H> rewards{
      {"goal", [&](const YAML::Node& n) { rw.goal = r.real(n, "env.rewards.goal"); }},
      {"collision", [&](const YAML::Node& n) { rw.collision = r.real(n, "env.rewards.collision"); }},
      {"step", [&](const YAML::Node& n) { rw.step = r.real(n, "env.rewards.step"); }},
      {"shaping", [&](const YAML::Node& n) { rw.shaping = r.real(n, "env.rewards.shaping"); }},
  };

  const std::map<std::string, H> env_keys{
      {"width", [&](const YAML::Node& n) { env.env.width = static_cast<int>(r.count(n, "env.width", 2)); }},
      {"height", [&](const YAML::Node& n) { env.env.height = static_cast<int>(r.count(n, "env.height", 2)); }},
      {"cell_size", [&](const YAML::Node& n) { env.env.cell_size = r.positive(n, "env.cell_size"); }},
      {"density",
       [&](const YAML::Node& n) {
         env.env.density = density_profile_from_string(
             r.choice(n, "env.density", [](const std::string& s) { density_profile_from_string(s); }));
       }},
      {"start", [&](const YAML::Node& n) { env.env.start = r.cell(n, "env.start"); }},
      {"goal", [&](const YAML::Node& n) { env.env.goal = r.cell(n, "env.goal"); }},
      {"patch",
       [&](const YAML::Node& n) {
         const auto v = r.count(n, "env.patch", 1);
         if (v % 2 == 0) r.fail(n, "env.patch: must be odd");
         env.env.patch = static_cast<int>(v);
       }},
      {"actions",
       [&](const YAML::Node& n) {
         env.env.actions = action_variant_from_string(
             r.choice(n, "env.actions", [](const std::string& s) { action_variant_from_string(s); }));
       }},
      {"rewards", [&](const YAML::Node& n) { r.section(n, "env.rewards", rewards); }},
      {"max_steps_factor",
       [&](const YAML::Node& n) { env.env.max_steps_factor = static_cast<int>(r.count(n, "env.max_steps_factor", 1)); }},
      {"random_start", [&](const YAML::Node& n) { env.env.random_start = r.boolean(n, "env.random_start"); }},
      {"min_start_steps",
       [&](const YAML::Node& n) { env.env.min_start_steps = static_cast<int>(r.count(n, "env.min_start_steps")); }},
      {"max_attempts",
       [&](const YAML::Node& n) { env.env.max_attempts = static_cast<int>(r.count(n, "env.max_attempts", 1)); }},
      {"map_seed", [&](const YAML::Node& n) { env.map_seed = r.u64(n, "env.map_seed"); }},
      {"map_file", [&](const YAML::Node& n) { env.map_file = r.str(n, "env.map_file"); }},
  };

  const std::map<std::string, H> train_keys{
      {"mode",
       [&](const YAML::Node& n) {
         tr.mode = r.choice(n, "train.mode", [](const std::string& s) { train_mode_from_string(s); });
       }},
      {"p", [&](const YAML::Node& n) { tr.p = r.probability(n, "train.p"); }},
      {"episodes", [&](const YAML::Node& n) { tr.episodes = r.count(n, "train.episodes", 1); }},
      {"batch", [&](const YAML::Node& n) { tr.batch = r.count(n, "train.batch", 1); }},
      {"gamma",
       [&](const YAML::Node& n) {
         tr.gamma = r.real(n, "train.gamma");
         if (!(tr.gamma > 0.0 && tr.gamma < 1.0)) r.fail(n, "train.gamma: must lie in (0, 1)");
       }},
      {"alpha", [&](const YAML::Node& n) { tr.alpha = r.positive(n, "train.alpha"); }},
      {"target_period", [&](const YAML::Node& n) { tr.target_period = r.count(n, "train.target_period", 1); }},
      {"epsilon_start", [&](const YAML::Node& n) { tr.epsilon_start = r.probability(n, "train.epsilon_start"); }},
      {"epsilon_end", [&](const YAML::Node& n) { tr.epsilon_end = r.probability(n, "train.epsilon_end"); }},
      {"epsilon_decay_fraction",
       [&](const YAML::Node& n) {
         tr.epsilon_decay_fraction = r.real(n, "train.epsilon_decay_fraction");
         if (!(tr.epsilon_decay_fraction > 0.0 && tr.epsilon_decay_fraction <= 1.0))
           r.fail(n, "train.epsilon_decay_fraction: must lie in (0, 1]");
       }},
      {"buffer_capacity", [&](const YAML::Node& n) { tr.buffer_capacity = r.count(n, "train.buffer_capacity", 1); }},
      {"learning_starts", [&](const YAML::Node& n) { tr.learning_starts = r.count(n, "train.learning_starts"); }},
      {"hidden",
       [&](const YAML::Node& n) { tr.hidden = r.list<std::size_t>(n, "train.hidden", count_item); }},
      {"seed",
       [&](const YAML::Node& n) {
         if (n.IsNull())
           tr.seed.reset();
         else
           tr.seed = r.u64(n, "train.seed");
       }},
  };

  const std::map<std::string, H> fault_keys{
      {"semantics",
       [&](const YAML::Node& n) {
         fa.semantics =
             r.choice(n, "faults.semantics", [](const std::string& s) { fault_semantics_from_string(s); });
       }},
      {"stuck_one_prob", [&](const YAML::Node& n) { fa.stuck_one_prob = r.probability(n, "faults.stuck_one_prob"); }},
      {"include_biases", [&](const YAML::Node& n) { fa.include_biases = r.boolean(n, "faults.include_biases"); }},
      {"cols", [&](const YAML::Node& n) { fa.cols = r.count(n, "faults.cols", 1); }},
      {"curve_file", [&](const YAML::Node& n) { fa.curve_file = r.str(n, "faults.curve_file"); }},
      {"map_file", [&](const YAML::Node& n) { fa.map_file = r.str(n, "faults.map_file"); }},
  };

  const std::map<std::string, H> platform_keys{
      {"preset",
       [&](const YAML::Node& n) {
         pl.preset = r.choice(n, "platform.preset", [](const std::string& s) {
           try {
             platform_preset(s);
           } catch (const Error& e) {
             throw ConfigError(e.what());
           }
         });
       }},
      {"file", [&](const YAML::Node& n) { pl.file = r.str(n, "platform.file"); }},
  };

  const std::map<std::string, H> campaign_keys{
      {"voltages",
       [&](const YAML::Node& n) {
         ca.voltages = r.list<double>(n, "campaign.voltages", voltage_item);
         if (ca.voltages.empty()) r.fail(n, "campaign.voltages: must not be empty");
       }},
      {"maps_per_voltage", [&](const YAML::Node& n) { ca.maps_per_voltage = r.count(n, "campaign.maps_per_voltage", 1); }},
      {"episodes_per_map", [&](const YAML::Node& n) { ca.episodes_per_map = r.count(n, "campaign.episodes_per_map", 1); }},
      {"pattern",
       [&](const YAML::Node& n) {
         ca.pattern = r.choice(n, "campaign.pattern", [](const std::string& s) { pattern_from_string(s); });
       }},
      {"zero_to_one_bias",
       [&](const YAML::Node& n) { ca.zero_to_one_bias = r.probability(n, "campaign.zero_to_one_bias"); }},
      {"col_concentration",
       [&](const YAML::Node& n) {
         ca.col_concentration = r.real(n, "campaign.col_concentration");
         if (!(ca.col_concentration >= 1.0)) r.fail(n, "campaign.col_concentration: must be >= 1");
       }},
      {"activation_faults",
       [&](const YAML::Node& n) { ca.activation_faults = r.boolean(n, "campaign.activation_faults"); }},
      {"env_seeds",
       [&](const YAML::Node& n) { ca.env_seeds = r.list<std::uint64_t>(n, "campaign.env_seeds", u64_item); }},
      {"seed",
       [&](const YAML::Node& n) {
         if (n.IsNull())
           ca.seed.reset();
         else
           ca.seed = r.u64(n, "campaign.seed");
       }},
      {"jobs", [&](const YAML::Node& n) { ca.jobs = r.count(n, "campaign.jobs", 1); }},
  };

  const std::map<std::string, H> io_keys{
      {"output_dir",
       [&](const YAML::Node& n) {
         io.output_dir = r.str(n, "io.output_dir");
         if (io.output_dir.empty()) r.fail(n, "io.output_dir: must not be empty");
       }},
      {"checkpoint", [&](const YAML::Node& n) { io.checkpoint = r.str(n, "io.checkpoint"); }},
  };

  const std::map<std::string, H> top{
      {"seed", [&](const YAML::Node& n) { cfg.seed = r.u64(n, "seed"); }},
      {"env", [&](const YAML::Node& n) { r.section(n, "env", env_keys); }},
      {"train", [&](const YAML::Node& n) { r.section(n, "train", train_keys); }},
      {"faults", [&](const YAML::Node& n) { r.section(n, "faults", fault_keys); }},
      {"platform", [&](const YAML::Node& n) { r.section(n, "platform", platform_keys); }},
      {"campaign", [&](const YAML::Node& n) { r.section(n, "campaign", campaign_keys); }},
      {"io", [&](const YAML::Node& n) { r.section(n, "io", io_keys); }},
  };
  r.section(root, "", top);
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path, const std::vector<Override>& overrides) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  auto cfg = parse_run_config(ss.str(), path.string(), overrides);
  // Input paths are relative to the config file.
  const auto base = std::filesystem::absolute(path).parent_path();
  for (auto* p : {&cfg.env.map_file, &cfg.faults.curve_file, &cfg.faults.map_file, &cfg.platform.file})
    if (!p->empty() && std::filesystem::path(*p).is_relative()) *p = (base / *p).lexically_normal().string();
  return cfg;
}

std::string serialize_run_config(const RunConfig& c) {
  YAML::Emitter out;
  auto dbl = [](double v) { return format_double(v); };
  auto cell = [&](const std::optional<Cell>& p) {
    if (!p) {
      out << YAML::Null;
      return;
    }
    out << YAML::Flow << YAML::BeginSeq << p->x << p->y << YAML::EndSeq;
  };
  const auto& e = c.env.env;

  out << YAML::BeginMap;
  out << YAML::Key << "seed" << YAML::Value << c.seed;

  out << YAML::Key << "env" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "width" << YAML::Value << e.width;
  out << YAML::Key << "height" << YAML::Value << e.height;
  out << YAML::Key << "cell_size" << YAML::Value << dbl(e.cell_size);
  out << YAML::Key << "density" << YAML::Value << to_string(e.density);
  out << YAML::Key << "start" << YAML::Value;
  cell(e.start);
  out << YAML::Key << "goal" << YAML::Value;
  cell(e.goal);
  out << YAML::Key << "patch" << YAML::Value << e.patch;
  out << YAML::Key << "actions" << YAML::Value << to_string(e.actions);
  out << YAML::Key << "rewards" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "goal" << YAML::Value << dbl(e.rewards.goal);
  out << YAML::Key << "collision" << YAML::Value << dbl(e.rewards.collision);
  out << YAML::Key << "step" << YAML::Value << dbl(e.rewards.step);
  out << YAML::Key << "shaping" << YAML::Value << dbl(e.rewards.shaping);
  out << YAML::EndMap;
  out << YAML::Key << "max_steps_factor" << YAML::Value << e.max_steps_factor;
  out << YAML::Key << "random_start" << YAML::Value << e.random_start;
  out << YAML::Key << "min_start_steps" << YAML::Value << e.min_start_steps;
  out << YAML::Key << "max_attempts" << YAML::Value << e.max_attempts;
  out << YAML::Key << "map_seed" << YAML::Value << c.env.map_seed;
  out << YAML::Key << "map_file" << YAML::Value << c.env.map_file;
  out << YAML::EndMap;

  const auto& t = c.train;
  out << YAML::Key << "train" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "mode" << YAML::Value << t.mode;
  out << YAML::Key << "p" << YAML::Value << dbl(t.p);
  out << YAML::Key << "episodes" << YAML::Value << t.episodes;
  out << YAML::Key << "batch" << YAML::Value << t.batch;
  out << YAML::Key << "gamma" << YAML::Value << dbl(t.gamma);
  out << YAML::Key << "alpha" << YAML::Value << dbl(t.alpha);
  out << YAML::Key << "target_period" << YAML::Value << t.target_period;
  out << YAML::Key << "epsilon_start" << YAML::Value << dbl(t.epsilon_start);
  out << YAML::Key << "epsilon_end" << YAML::Value << dbl(t.epsilon_end);
  out << YAML::Key << "epsilon_decay_fraction" << YAML::Value << dbl(t.epsilon_decay_fraction);
  out << YAML::Key << "buffer_capacity" << YAML::Value << t.buffer_capacity;
  out << YAML::Key << "learning_starts" << YAML::Value << t.learning_starts;
  out << YAML::Key << "hidden" << YAML::Value << YAML::Flow << YAML::BeginSeq;
  for (auto h : t.hidden) out << h;
  out << YAML::EndSeq;
  out << YAML::Key << "seed" << YAML::Value;
  if (t.seed)
    out << *t.seed;
  else
    out << YAML::Null;
  out << YAML::EndMap;

  const auto& f = c.faults;
  out << YAML::Key << "faults" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "semantics" << YAML::Value << f.semantics;
  out << YAML::Key << "stuck_one_prob" << YAML::Value << dbl(f.stuck_one_prob);
  out << YAML::Key << "include_biases" << YAML::Value << f.include_biases;
  out << YAML::Key << "cols" << YAML::Value << f.cols;
  out << YAML::Key << "curve_file" << YAML::Value << f.curve_file;
  out << YAML::Key << "map_file" << YAML::Value << f.map_file;
  out << YAML::EndMap;

  out << YAML::Key << "platform" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "preset" << YAML::Value << c.platform.preset;
  out << YAML::Key << "file" << YAML::Value << c.platform.file;
  out << YAML::EndMap;

  const auto& a = c.campaign;
  out << YAML::Key << "campaign" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "voltages" << YAML::Value << YAML::Flow << YAML::BeginSeq;
  for (double v : a.voltages) out << dbl(v);
  out << YAML::EndSeq;
  out << YAML::Key << "maps_per_voltage" << YAML::Value << a.maps_per_voltage;
  out << YAML::Key << "episodes_per_map" << YAML::Value << a.episodes_per_map;
  out << YAML::Key << "pattern" << YAML::Value << a.pattern;
  out << YAML::Key << "zero_to_one_bias" << YAML::Value << dbl(a.zero_to_one_bias);
  out << YAML::Key << "col_concentration" << YAML::Value << dbl(a.col_concentration);
  out << YAML::Key << "activation_faults" << YAML::Value << a.activation_faults;
  out << YAML::Key << "env_seeds" << YAML::Value << YAML::Flow << YAML::BeginSeq;
  for (auto s : a.env_seeds) out << s;
  out << YAML::EndSeq;
  out << YAML::Key << "seed" << YAML::Value;
  if (a.seed)
    out << *a.seed;
  else
    out << YAML::Null;
  out << YAML::Key << "jobs" << YAML::Value << a.jobs;
  out << YAML::EndMap;

  out << YAML::Key << "io" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "output_dir" << YAML::Value << c.io.output_dir;
  out << YAML::Key << "checkpoint" << YAML::Value << c.io.checkpoint;
  out << YAML::EndMap;

  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

std::string config_hash(const RunConfig& cfg) {
  RunConfig c = cfg;
  c.io = IoSection{};
  c.campaign.jobs = 1;
  return fnv1a_hex(serialize_run_config(c));
}

EnvConfig env_config(const RunConfig& cfg) { return cfg.env.env; }

std::shared_ptr<const GridWorld> build_world(const RunConfig& cfg) {
  if (!cfg.env.map_file.empty()) return load_map(cfg.env.map_file, cfg.env.env);
  return make_env(cfg.env.env, cfg.env.map_seed);
}

FaultModel fault_model(const RunConfig& cfg) {
  FaultModel m;
  m.semantics = fault_semantics_from_string(cfg.faults.semantics);
  m.stuck_one_prob = cfg.faults.stuck_one_prob;
  m.include_biases = cfg.faults.include_biases;
  m.cols = cfg.faults.cols;
  return m;
}

VoltageCurve load_curve(const RunConfig& cfg) {
  if (cfg.faults.curve_file.empty()) return VoltageCurve::bundled();
  return VoltageCurve::from_csv(cfg.faults.curve_file);
}

UavPlatform load_platform_config(const RunConfig& cfg) {
  if (!cfg.platform.file.empty()) return load_platform(cfg.platform.file);
  return platform_preset(cfg.platform.preset);
}

TrainConfig train_config(const RunConfig& cfg) {
  TrainConfig t;
  const auto& s = cfg.train;
  t.mode = train_mode_from_string(s.mode);
  t.p = s.p;
  t.episodes = s.episodes;
  t.batch = s.batch;
  t.gamma = s.gamma;
  t.alpha = s.alpha;
  t.target_period = s.target_period;
  t.epsilon_start = s.epsilon_start;
  t.epsilon_end = s.epsilon_end;
  t.epsilon_decay_fraction = s.epsilon_decay_fraction;
  t.buffer_capacity = s.buffer_capacity;
  t.learning_starts = s.learning_starts;
  t.hidden = s.hidden;
  t.seed = cfg.train_seed();
  t.fault_model = fault_model(cfg);
  if (t.mode == TrainMode::berry_ondevice) {
    if (cfg.faults.map_file.empty()) throw ConfigError("train.mode berry_ondevice requires faults.map_file");
    t.fault_map = read_fault_map(cfg.faults.map_file);
  }
  t.validate();
  return t;
}

CampaignConfig campaign_config(const RunConfig& cfg) {
  CampaignConfig c;
  const auto& s = cfg.campaign;
  c.voltages = s.voltages;
  c.maps_per_voltage = s.maps_per_voltage;
  c.episodes_per_map = s.episodes_per_map;
  c.pattern = pattern_from_string(s.pattern);
  c.zero_to_one_bias = s.zero_to_one_bias;
  c.col_concentration = s.col_concentration;
  c.activation_faults = s.activation_faults;
  c.fault_model = fault_model(cfg);
  c.seed = cfg.campaign_seed();
  c.env_seeds = s.env_seeds;
  c.jobs = s.jobs;
  c.config_hash = config_hash(cfg);
  if (c.pattern == FaultPattern::profiled) {
    if (cfg.faults.map_file.empty()) throw ConfigError("campaign.pattern profiled requires faults.map_file");
    c.profiled_map = read_fault_map(cfg.faults.map_file);
  }
  return c;
}

void validate_paths(const RunConfig& cfg, bool need_checkpoint) {
  auto check = [](const std::string& key, const std::string& path) {
    if (!path.empty() && !std::filesystem::is_regular_file(path))
      throw ConfigError(key + ": no such file '" + path + "'");
  };
  check("env.map_file", cfg.env.map_file);
  check("faults.curve_file", cfg.faults.curve_file);
  check("faults.map_file", cfg.faults.map_file);
  check("platform.file", cfg.platform.file);
  if (need_checkpoint) {
    const auto ckpt = cfg.checkpoint_path();
    if (!std::filesystem::is_regular_file(ckpt)) throw ConfigError("checkpoint not found: '" + ckpt.string() + "'");
  }
}

}  // namespace berry
