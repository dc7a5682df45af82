#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "berry/checkpoint.hpp"
#include "berry/config.hpp"
#include "berry/error.hpp"
#include "berry/eval.hpp"
#include "berry/faults.hpp"
#include "berry/rl.hpp"

namespace fs = std::filesystem;
using namespace berry;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUser = 2;
constexpr int kExitNumerical = 3;

struct Common {
  std::string config;
  std::vector<std::string> sets;
  std::vector<Override> flags;  // applied after --set so flags win
};

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw ConfigError("cannot write " + path.string());
}

RunConfig resolve(const Common& c) {
  std::vector<Override> ov;
  for (const auto& s : c.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + s + "'");
    ov.emplace_back(s.substr(0, eq), s.substr(eq + 1));
  }
  ov.insert(ov.end(), c.flags.begin(), c.flags.end());
  if (c.config.empty()) return parse_run_config("", "<defaults>", ov);
  return load_run_config(c.config, ov);
}

// Registers an option that becomes a config override when given.
template <class T>
void flag(CLI::App* app, Common& c, const std::string& name, const std::string& key, const std::string& help) {
  app->add_option_function<T>(
      name, [&c, key](const T& v) {
        std::ostringstream s;
        s.precision(17);
        s << v;
        c.flags.emplace_back(key, s.str());
      },
      help);
}

fs::path out_dir(const RunConfig& cfg) { return fs::path(cfg.io.output_dir); }

int cmd_train(const RunConfig& cfg) {
  validate_paths(cfg, false);
  const auto tc = train_config(cfg);
  tc.validate();
  const auto world = build_world(cfg);
  const auto dir = out_dir(cfg);
  fs::create_directories(dir);
  write_text(dir / "train_config.yaml", serialize_run_config(cfg));

  const std::size_t every = std::max<std::size_t>(1, tc.episodes / 10);
  std::size_t goals = 0;
  std::size_t seen = 0;
  auto on_episode = [&](const EpisodeLog& e) {
    goals += e.outcome == TerminalKind::goal;
    if (++seen == every) {
      std::fprintf(stderr, "episode %zu/%zu  step %llu  goal rate %.2f  loss %.4g/%.4g\n", e.episode + 1, tc.episodes,
                   static_cast<unsigned long long>(e.step), static_cast<double>(goals) / static_cast<double>(seen),
                   e.loss_clean, e.loss_perturbed);
      goals = seen = 0;
    }
  };
  auto result = berry_train(world, tc, std::nullopt, on_episode);

  Checkpoint ckpt{std::move(result.net), tc.seed, result.log.total_steps};
  const auto ckpt_path = cfg.checkpoint_path();
  if (ckpt_path.has_parent_path()) fs::create_directories(ckpt_path.parent_path());
  save_checkpoint(ckpt_path, ckpt);
  write_text(dir / "train_log.csv", result.log.to_csv());
  std::printf("mode %s  episodes %zu  steps %llu  updates %llu\n", to_string(tc.mode), tc.episodes,
              static_cast<unsigned long long>(result.log.total_steps),
              static_cast<unsigned long long>(result.log.updates));
  std::printf("checkpoint %s\n", ckpt_path.string().c_str());
  return kExitOk;
}

int cmd_sweep(const RunConfig& cfg) {
  validate_paths(cfg, true);
  const auto ckpt = load_checkpoint(cfg.checkpoint_path());
  const auto world = build_world(cfg);
  auto cc = campaign_config(cfg);
  const auto hash = config_hash(cfg);
  cc.config_hash = hash;
  const auto curve = load_curve(cfg);
  const auto platform = load_platform_config(cfg);
  const auto result = run_campaign(cc, ckpt.net, world, platform, curve);

  const auto dir = out_dir(cfg);
  const auto stem = "report-" + hash + "-" + result.report.policy_digest.substr(0, 8);
  write_text(dir / (stem + ".yaml"), serialize_run_config(cfg));
  write_text(dir / (stem + ".csv"), report_to_csv(result.report));
  write_text(dir / (stem + ".json"), report_to_json(result.report));

  std::printf("%-7s %-10s %-8s %-8s %-9s %-9s %-9s %-8s\n", "v_norm", "ber", "sr", "stderr", "dist_m", "time_s",
              "energy_J", "missions");
  for (const auto& r : result.report.rows)
    std::printf("%-7.2f %-10.3g %-8.3f %-8.3f %-9.2f %-9.2f %-9.2f %-8.2f\n", r.v_norm, r.ber, r.success_rate,
                r.success_stderr, r.flight_distance, r.flight_time, r.flight_energy, r.missions);
  std::printf("report %s\n", (dir / (stem + ".json")).string().c_str());
  return kExitOk;
}

int cmd_report(const RunConfig& cfg, const std::vector<std::string>& paths, const std::string& csv_name) {
  if (paths.size() < 2) throw UsageError("report needs a baseline and at least one other report");
  const auto base = load_report(paths.front());
  std::string csv;
  for (std::size_t i = 1; i < paths.size(); ++i) {
    const auto deltas = compare_reports(base, load_report(paths[i]));
    std::printf("%s vs %s\n%s", paths[i].c_str(), paths.front().c_str(), deltas_to_text(deltas).c_str());
    auto part = deltas_to_csv(deltas);
    if (i > 1) part.erase(0, part.find('\n') + 1);  // one header
    csv += part;
  }
  const auto path = out_dir(cfg) / csv_name;
  write_text(path, csv);
  std::printf("csv %s\n", path.string().c_str());
  return kExitOk;
}

int cmd_faultmap_sample(const RunConfig& cfg, const std::string& name, double p, double voltage) {
  const auto model = fault_model(cfg);
  QNetwork net;
  if (fs::exists(cfg.checkpoint_path())) {
    net = load_checkpoint(cfg.checkpoint_path()).net;
  } else {
    const auto world = build_world(cfg);
    net = init_network(network_arch(*world, cfg.train.hidden), cfg.train_seed());
  }
  const auto layout = MemoryLayout::for_network(net, model.cols, model.quant());
  if (voltage > 0.0) p = ber_at_voltage(load_curve(cfg), voltage);
  if (p < 0.0 || p > 1.0) throw UsageError("faultmap sample needs --p in [0, 1] or --voltage");
  const auto seed = derive_seed(cfg.seed, {0xFA17});
  FaultMap map;
  if (cfg.campaign.pattern == "column_aligned")
    map = column_aligned_map(layout, p, cfg.campaign.zero_to_one_bias, cfg.campaign.col_concentration, seed);
  else if (cfg.campaign.pattern == "random")
    map = sample_fault_map(layout, p, seed, cfg.faults.stuck_one_prob);
  else
    throw ConfigError("faultmap sample supports pattern random or column_aligned");
  const auto path = out_dir(cfg) / name;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_fault_map(path, map);
  std::printf("wrote %s  rows %zu  cols %zu  faults %zu\n", path.string().c_str(), map.rows, map.cols,
              map.entries.size());
  return kExitOk;
}

int cmd_faultmap_inspect(const std::string& file) {
  const auto map = read_fault_map(file);
  const auto s = summarize(map);
  std::printf("rows %zu\ncols %zu\nfaults %llu\ntotal_bits %llu\nempirical_rate %.6g\nstuck_one_fraction %.4f\n"
              "faulty_columns %zu\n",
              map.rows, map.cols, static_cast<unsigned long long>(s.count),
              static_cast<unsigned long long>(s.total_bits), s.empirical_rate, s.stuck_one_fraction,
              s.faulty_columns);
  std::printf("column histogram:");
  for (std::size_t c = 0; c < s.column_histogram.size(); ++c)
    if (s.column_histogram[c]) std::printf(" %zu:%llu", c, static_cast<unsigned long long>(s.column_histogram[c]));
  std::printf("\n");
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Error-aware RL under low-voltage SRAM bit errors"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  app.fallthrough();
  Common common;
  app.add_option("-c,--config", common.config, "YAML run config")->check(CLI::ExistingFile);
  app.add_option("--set", common.sets, "override, section.key=value (repeatable)");
  flag<std::uint64_t>(&app, common, "--seed", "seed", "global seed");
  flag<std::string>(&app, common, "--out-dir", "io.output_dir", "output directory");
  flag<std::string>(&app, common, "--checkpoint", "io.checkpoint", "checkpoint path");

  auto* train = app.add_subcommand("train", "train a policy and write a checkpoint");
  flag<std::string>(train, common, "--mode", "train.mode", "classical | berry_offline | berry_ondevice");
  flag<double>(train, common, "--p", "train.p", "training bit error rate");
  flag<std::size_t>(train, common, "--episodes", "train.episodes", "training episodes");
  flag<std::string>(train, common, "--fault-map", "faults.map_file", "fault map for on-device training");

  auto* sweep = app.add_subcommand("sweep", "evaluate a checkpoint across voltages");
  flag<std::size_t>(sweep, common, "--jobs", "campaign.jobs", "evaluation threads");
  flag<std::size_t>(sweep, common, "--maps", "campaign.maps_per_voltage", "fault maps per voltage");
  flag<std::string>(sweep, common, "--pattern", "campaign.pattern", "random | column_aligned | profiled");

  auto* report = app.add_subcommand("report", "compare reports against the first one");
  std::vector<std::string> report_paths;
  std::string csv_name = "compare.csv";
  report->add_option("reports", report_paths, "report JSON files, baseline first")->required()->check(CLI::ExistingFile);
  report->add_option("--csv", csv_name, "CSV name under the output directory");

  auto* faultmap = app.add_subcommand("faultmap", "sample or inspect fault maps");
  faultmap->require_subcommand(1);
  faultmap->fallthrough();
  auto* fm_sample = faultmap->add_subcommand("sample", "write a fault map sized for the configured network");
  std::string fm_name = "faultmap.txt";
  double fm_p = -1.0;
  double fm_voltage = 0.0;
  fm_sample->add_option("--out", fm_name, "file name under the output directory");
  fm_sample->add_option("--p", fm_p, "bit error rate");
  fm_sample->add_option("--voltage", fm_voltage, "normalized voltage; rate from the curve");
  flag<std::string>(fm_sample, common, "--pattern", "campaign.pattern", "random | column_aligned");
  auto* fm_inspect = faultmap->add_subcommand("inspect", "summarize a fault map file");
  std::string fm_file;
  fm_inspect->add_option("file", fm_file, "fault map file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUser;
  }

  try {
    if (fm_inspect->parsed()) return cmd_faultmap_inspect(fm_file);
    const auto cfg = resolve(common);
    if (train->parsed()) return cmd_train(cfg);
    if (sweep->parsed()) return cmd_sweep(cfg);
    if (report->parsed()) return cmd_report(cfg, report_paths, csv_name);
    if (fm_sample->parsed()) return cmd_faultmap_sample(cfg, fm_name, fm_p, fm_voltage);
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUser;
  }
  return kExitUser;
}
