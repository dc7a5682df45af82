#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "berry/config.hpp"
#include "berry/error.hpp"
#include "doctest.h"

using namespace berry;

namespace {

std::string error_of(const std::string& text, const std::vector<Override>& ov = {}) {
  try {
    parse_run_config(text, "cfg.yaml", ov);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

struct SeedEnv {
  explicit SeedEnv(const char* v) {
    if (v)
      setenv("BERRY_SIM_SEED", v, 1);
    else
      unsetenv("BERRY_SIM_SEED");
  }
  ~SeedEnv() { unsetenv("BERRY_SIM_SEED"); }
};

}  // namespace

TEST_CASE("empty text gives defaults") {
  SeedEnv env(nullptr);
  const auto c = parse_run_config("");
  CHECK(c == RunConfig{});
  CHECK(c.train.hidden == std::vector<std::size_t>{64, 64});
  CHECK(c.campaign.voltages == bundled_voltage_grid());
  CHECK(c.checkpoint_path() == std::filesystem::path("out/policy.ckpt"));
}

TEST_CASE("file values are read") {
  SeedEnv env(nullptr);
  const auto c = parse_run_config(R"(
seed: 42
env:
  density: dense
  start: [2, 3]
  rewards: {goal: 1.0, collision: -1.0, step: -0.01, shaping: 0.01}
  map_seed: 9
train:
  mode: berry_offline
  p: 0.005
  hidden: [128, 64]
  seed: 7
campaign:
  voltages: [1.0, 0.77]
  pattern: column_aligned
  env_seeds: [3, 4]
  jobs: 2
io:
  output_dir: results
)");
  CHECK(c.seed == 42);
  CHECK(c.env.env.density == DensityProfile::dense);
  CHECK(c.env.env.start == Cell{2, 3});
  CHECK(c.env.env.rewards.step == -0.01);
  CHECK(c.train.mode == "berry_offline");
  CHECK(c.train.hidden == std::vector<std::size_t>{128, 64});
  CHECK(c.train_seed() == 7);
  CHECK(c.campaign_seed() == 42);
  CHECK(c.campaign.voltages == std::vector<double>{1.0, 0.77});
  CHECK(c.campaign.env_seeds == std::vector<std::uint64_t>{3, 4});
  CHECK(c.checkpoint_path() == std::filesystem::path("results/policy.ckpt"));
  CHECK(campaign_config(c).pattern == FaultPattern::column_aligned);
  CHECK(train_config(c).mode == TrainMode::berry_offline);
  CHECK(train_config(c).seed == 7);
}

TEST_CASE("unknown keys are rejected with a line number") {
  const auto e = error_of("seed: 1\ntrain:\n  episodes: 10\n  epochs: 3\n");
  CHECK(e.find("cfg.yaml:4:") == 0);
  CHECK(e.find("unknown key 'epochs' in section 'train'") != std::string::npos);
  CHECK(error_of("bogus: 1\n").find("unknown key 'bogus' at top level") != std::string::npos);
  CHECK(error_of("env:\n  rewards:\n    bonus: 2\n").find("cfg.yaml:3:") == 0);
}

TEST_CASE("bad values are rejected with a line number") {
  CHECK(error_of("train:\n  gamma: lots\n").find("cfg.yaml:2:") == 0);
  CHECK(error_of("train:\n  episodes: -3\n").find("cfg.yaml:2:") == 0);
  CHECK(error_of("train:\n  p: 2\n").find("[0, 1]") != std::string::npos);
  CHECK(error_of("train:\n  mode: robust\n").find("cfg.yaml:2:") == 0);
  CHECK(error_of("env:\n  density: thick\n").find("cfg.yaml:2:") == 0);
  CHECK(error_of("campaign:\n  pattern: rows\n").find("cfg.yaml:2:") == 0);
  CHECK(error_of("env:\n  start: [1]\n").find("cfg.yaml:2:") == 0);
  CHECK(error_of("train: [1, 2]\n").find("must be a mapping") != std::string::npos);
  CHECK(error_of("- 1\n- 2\n").find("top level must be a mapping") != std::string::npos);
  CHECK(error_of("train:\n  episodes: [1\n").find("cfg.yaml:") == 0);
}

TEST_CASE("overrides win over file values") {
  SeedEnv env(nullptr);
  const auto c = parse_run_config("train:\n  episodes: 10\n", "cfg.yaml",
                                  {{"train.episodes", "25"}, {"seed", "9"}, {"campaign.voltages", "[1.0, 0.7]"}});
  CHECK(c.train.episodes == 25);
  CHECK(c.seed == 9);
  CHECK(c.campaign.voltages == std::vector<double>{1.0, 0.7});
  CHECK(error_of("", {{"train.epochs", "1"}}).find("unknown key 'epochs'") != std::string::npos);
  CHECK(error_of("", {{"train..x", "1"}}).find("malformed override") != std::string::npos);
  CHECK(error_of("", {{"train.", "1"}}).find("malformed override") != std::string::npos);
}

TEST_CASE("BERRY_SIM_SEED is the fallback seed") {
  {
    SeedEnv env("77");
    CHECK(parse_run_config("").seed == 77);
    CHECK(parse_run_config("seed: 3\n").seed == 3);
    CHECK(parse_run_config("", "x", {{"seed", "4"}}).seed == 4);
  }
  {
    SeedEnv env("nope");
    CHECK_THROWS_AS(parse_run_config(""), ConfigError);
  }
}

TEST_CASE("serialize then parse is lossless") {
  SeedEnv env(nullptr);
  RunConfig c;
  c.seed = 123456789012345ULL;
  c.env.env.start = Cell{2, 2};
  c.env.env.rewards = {1.0, -1.0, -0.01, 0.01};
  c.env.env.cell_size = 0.1 + 0.2;  // not exactly representable in short decimal
  c.train.alpha = 1.0 / 3.0;
  c.train.seed = 5;
  c.train.hidden = {7};
  c.campaign.voltages = {1.0, 0.77, 0.7300000000000001};
  c.campaign.env_seeds = {1, 2, 3};
  c.faults.include_biases = false;
  c.io.output_dir = "some dir/out";
  const auto text = serialize_run_config(c);
  const auto back = parse_run_config(text);
  CHECK(back == c);
  CHECK(serialize_run_config(back) == text);
  CHECK(parse_run_config(serialize_run_config(RunConfig{})) == RunConfig{});
}

TEST_CASE("config hash ignores io and jobs") {
  RunConfig a;
  RunConfig b = a;
  b.io.output_dir = "elsewhere";
  b.io.checkpoint = "x.ckpt";
  b.campaign.jobs = 8;
  CHECK(config_hash(a) == config_hash(b));
  b.campaign.maps_per_voltage = 3;
  CHECK(config_hash(a) != config_hash(b));
  CHECK(config_hash(a).size() == 16);
}

TEST_CASE("builders and path validation") {
  const auto dir = std::filesystem::temp_directory_path() / "berry_config_test";
  std::filesystem::create_directories(dir);
  SeedEnv env(nullptr);
  RunConfig c;
  c.env.env.random_start = false;
  CHECK(*build_world(c) == *make_env(c.env.env, c.env.map_seed));

  {
    std::ofstream(dir / "m.txt") << "S....\n.....\n..#..\n.....\n....G\n";
  }
  c.env.map_file = (dir / "m.txt").string();
  CHECK(build_world(c)->width() == 5);
  CHECK_NOTHROW(validate_paths(c, false));
  CHECK_THROWS_AS(validate_paths(c, true), ConfigError);
  c.io.checkpoint = (dir / "m.txt").string();
  CHECK_NOTHROW(validate_paths(c, true));
  c.platform.file = (dir / "missing.txt").string();
  CHECK_THROWS_AS(validate_paths(c, false), ConfigError);
  c.platform.file.clear();

  CHECK(load_platform_config(c) == crazyflie_platform());
  c.platform.preset = "tello";
  CHECK(load_platform_config(c).name == "tello");
  CHECK(load_curve(c) == VoltageCurve::bundled());
  c.faults.semantics = "bit_flip";
  CHECK(fault_model(c).semantics == FaultSemantics::bit_flip);

  c.train.mode = "berry_ondevice";
  CHECK_THROWS_AS(train_config(c), ConfigError);
  c.campaign.pattern = "profiled";
  CHECK_THROWS_AS(campaign_config(c), ConfigError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("load_run_config reads files") {
  const auto dir = std::filesystem::temp_directory_path() / "berry_config_load";
  std::filesystem::create_directories(dir);
  {
    std::ofstream(dir / "c.yaml") << "seed: 5\ntrain:\n  nope: 1\n";
  }
  try {
    load_run_config(dir / "c.yaml");
    FAIL("expected an error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find((dir / "c.yaml").string() + ":3:") == 0);
  }
  CHECK_THROWS_AS(load_run_config(dir / "missing.yaml"), ConfigError);
  std::filesystem::remove_all(dir);
}
