#include "berry/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <thread>

#include "json.hpp"

#include "berry/error.hpp"
#include "berry/rng.hpp"

namespace berry {

std::uint64_t eval_episode_seed(std::uint64_t campaign_seed, std::size_t episode) {
  return derive_seed(campaign_seed, {0xE915ULL, episode});
}

MapMetrics evaluate_network(const QNetwork& corrupted, std::shared_ptr<const GridWorld> world,
                            std::span<const std::uint64_t> episode_seeds, const ActivationTransform* hook) {
  if (episode_seeds.empty()) throw UsageError("evaluation needs at least one episode");
  if (corrupted.input_size() != world->observation_size() || corrupted.output_size() != world->actions().size())
    throw IntegrityError("policy arch does not match the environment");
  MapMetrics m;
  Episode ep(world);
  for (const auto seed : episode_seeds) {
    Observation obs = ep.reset(seed);
    double path = 0.0;
    TerminalKind kind = TerminalKind::none;
    while (!ep.done()) {
      const auto q = forward(corrupted, obs, hook);
      auto out = ep.step(argmax_lowest(q));
      path += out.path_length_delta;
      kind = out.terminal;
      obs = std::move(out.observation);
    }
    ++m.episodes;
    m.path_sum += path;
    switch (kind) {
      case TerminalKind::goal:
        ++m.successes;
        m.success_path_sum += path;
        break;
      case TerminalKind::collision:
        ++m.collisions;
        break;
      default:
        ++m.timeouts;
        break;
    }
  }
  m.success_rate = static_cast<double>(m.successes) / static_cast<double>(m.episodes);
  return m;
}

MapMetrics evaluate_policy(const QNetwork& net, std::shared_ptr<const GridWorld> world, const FaultMap& fault_map,
                           std::span<const std::uint64_t> episode_seeds, const EvalOptions& opts) {
  const QNetwork corrupted = berr(net, fault_map, opts.fault_model);
  if (opts.activation_p > 0.0) {
    const auto injector =
        ActivationFaultInjector::for_network(net, opts.activation_p, opts.activation_seed, opts.fault_model);
    return evaluate_network(corrupted, std::move(world), episode_seeds, &injector);
  }
  return evaluate_network(corrupted, std::move(world), episode_seeds, nullptr);
}

void CampaignConfig::validate(const VoltageCurve& curve) const {
  if (maps_per_voltage < 1) throw ConfigError("maps_per_voltage must be >= 1");
  if (episodes_per_map < 1) throw ConfigError("episodes_per_map must be >= 1");
  if (voltages.empty()) throw ConfigError("campaign needs at least one voltage");
  if (jobs < 1) throw ConfigError("jobs must be >= 1");
  const double lo = curve.points().back().v_norm;
  for (double v : voltages) {
    if (!(v > 0.0)) throw ConfigError("campaign voltages must be positive");
    if (v < lo) throw ConfigError("campaign voltage below the curve's lowest knot");
  }
  if (pattern == FaultPattern::profiled && !profiled_map) throw ConfigError("profiled pattern needs a fault map file");
}

std::vector<std::uint64_t> CampaignConfig::episode_seeds() const {
  std::vector<std::uint64_t> seeds(episodes_per_map);
  for (std::size_t e = 0; e < episodes_per_map; ++e)
    seeds[e] = env_seeds.empty() ? eval_episode_seed(seed, e) : env_seeds[e % env_seeds.size()];
  return seeds;
}

std::uint64_t campaign_map_seed(std::uint64_t campaign_seed, std::size_t voltage_index, std::size_t map_index) {
  return derive_seed(campaign_seed, {0x3A9ULL, voltage_index, map_index});
}

FaultMap campaign_fault_map(const CampaignConfig& cfg, const MemoryLayout& layout, double p, std::size_t voltage_index,
                            std::size_t map_index) {
  const auto seed = campaign_map_seed(cfg.seed, voltage_index, map_index);
  switch (cfg.pattern) {
    case FaultPattern::sampled:
      return sample_fault_map(layout, p, seed, cfg.fault_model.stuck_one_prob);
    case FaultPattern::column_aligned:
      return column_aligned_map(layout, p, cfg.zero_to_one_bias, cfg.col_concentration, seed);
    case FaultPattern::profiled:
      return *cfg.profiled_map;
  }
  return {};
}

double row_flight_distance(const std::vector<MapMetrics>& maps) {
  double success_path = 0.0, path = 0.0;
  std::size_t successes = 0, episodes = 0;
  for (const auto& m : maps) {
    success_path += m.success_path_sum;
    successes += m.successes;
    path += m.path_sum;
    episodes += m.episodes;
  }
  if (successes) return success_path / static_cast<double>(successes);
  return episodes ? path / static_cast<double>(episodes) : 0.0;
}

CampaignResult run_campaign(const CampaignConfig& cfg, const QNetwork& net, std::shared_ptr<const GridWorld> world,
                            const UavPlatform& platform, const VoltageCurve& curve) {
  cfg.validate(curve);
  if (net.input_size() != world->observation_size() || net.output_size() != world->actions().size())
    throw IntegrityError("checkpoint arch does not match the environment");

  std::vector<double> voltages = cfg.voltages;
  std::sort(voltages.begin(), voltages.end(), std::greater<>());
  const auto layout = cfg.fault_model.layout_for(net);
  const auto seeds = cfg.episode_seeds();

  CampaignResult result;
  result.per_map.assign(voltages.size(), std::vector<MapMetrics>(cfg.maps_per_voltage));

  struct Job {
    std::size_t v, m;
  };
  std::vector<Job> jobs;
  for (std::size_t v = 0; v < voltages.size(); ++v)
    for (std::size_t m = 0; m < cfg.maps_per_voltage; ++m) jobs.push_back({v, m});

  auto run_job = [&](const Job& job) {
    const double p = cfg.pattern == FaultPattern::profiled ? cfg.profiled_map->source.p
                                                            : ber_at_voltage(curve, voltages[job.v]);
    const auto map = campaign_fault_map(cfg, layout, p, job.v, job.m);
    EvalOptions opts;
    opts.fault_model = cfg.fault_model;
    if (cfg.activation_faults) {
      opts.activation_p = p;
      opts.activation_seed = derive_seed(campaign_map_seed(cfg.seed, job.v, job.m), {0xAC7ULL});
    }
    result.per_map[job.v][job.m] = evaluate_policy(net, world, map, seeds, opts);
  };

  const std::size_t workers = std::min(cfg.jobs, jobs.size());
  if (workers <= 1) {
    for (const auto& j : jobs) run_job(j);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < jobs.size(); i += workers) run_job(jobs[i]);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  auto& report = result.report;
  report.seed = cfg.seed;
  report.config_hash = cfg.config_hash;
  report.platform = platform.name;
  {
    std::string bytes;
    for (const auto& l : net.layers()) {
      bytes.append(reinterpret_cast<const char*>(l.weights.data()), l.weights.size() * sizeof(float));
      bytes.append(reinterpret_cast<const char*>(l.biases.data()), l.biases.size() * sizeof(float));
    }
    report.policy_digest = fnv1a_hex(bytes);
  }

  for (std::size_t v = 0; v < voltages.size(); ++v) {
    const auto& maps = result.per_map[v];
    QofRow row;
    row.v_norm = voltages[v];
    row.ber = cfg.pattern == FaultPattern::profiled ? cfg.profiled_map->source.p : ber_at_voltage(curve, row.v_norm);
    row.energy_scale = energy_scale_at_voltage(curve, row.v_norm);
    row.maps = maps.size();
    double sr_sum = 0.0;
    std::size_t successes = 0, episodes = 0;
    for (const auto& m : maps) {
      sr_sum += m.success_rate;
      successes += m.successes;
      episodes += m.episodes;
    }
    row.episodes = episodes;
    row.success_rate = sr_sum / static_cast<double>(maps.size());
    if (episodes > 1) {
      // Per-episode Bernoulli outcomes: sample variance = n/(n-1) * q(1-q).
      const double n = static_cast<double>(episodes);
      const double q = static_cast<double>(successes) / n;
      const double var = n / (n - 1.0) * q * (1.0 - q);
      row.success_stderr = std::sqrt(var) / std::sqrt(n);
    }
    row.flight_distance = row_flight_distance(maps);
    if (row.flight_distance > 0.0) {
      const auto qof = quality_of_flight(platform, curve, row.v_norm, row.success_rate, row.flight_distance);
      row.flight_time = qof.flight_time;
      row.flight_energy = qof.flight_energy;
      row.missions = qof.missions;
    }
    report.rows.push_back(row);
  }
  return result;
}

double percent_change(double from, double to) {
  if (from == 0.0) return to == 0.0 ? 0.0 : std::copysign(HUGE_VAL, to);
  return 100.0 * (to - from) / from;
}

std::vector<DeltaRow> compare_reports(const QofReport& a, const QofReport& b) {
  if (a.rows.size() != b.rows.size()) throw UsageError("reports have different voltage grids");
  for (std::size_t i = 0; i < a.rows.size(); ++i)
    if (std::fabs(a.rows[i].v_norm - b.rows[i].v_norm) > 1e-12)
      throw UsageError("reports have different voltage grids");
  std::vector<DeltaRow> out;
  if (a.rows.empty()) return out;
  const QofRow& ref = a.rows.front();
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    const auto& ra = a.rows[i];
    const auto& rb = b.rows[i];
    DeltaRow d;
    d.v_norm = ra.v_norm;
    d.success_delta_pp = 100.0 * (rb.success_rate - ra.success_rate);
    d.energy_delta_pct = percent_change(ra.flight_energy, rb.flight_energy);
    d.missions_delta_pct = percent_change(ra.missions, rb.missions);
    d.energy_vs_ref_pct = percent_change(ref.flight_energy, rb.flight_energy);
    d.missions_vs_ref_pct = percent_change(ref.missions, rb.missions);
    out.push_back(d);
  }
  return out;
}

namespace {

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string fixed(double v, int precision) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

}  // namespace

std::string report_to_csv(const QofReport& r) {
  std::string out =
      "v_norm,ber,energy_scale,success_rate,success_stderr,flight_distance_m,flight_time_s,flight_energy_j,missions,"
      "maps,episodes\n";
  for (const auto& row : r.rows) {
    out += num(row.v_norm) + ',' + num(row.ber) + ',' + num(row.energy_scale) + ',' + num(row.success_rate) + ',' +
           num(row.success_stderr) + ',' + num(row.flight_distance) + ',' + num(row.flight_time) + ',' +
           num(row.flight_energy) + ',' + num(row.missions) + ',' + std::to_string(row.maps) + ',' +
           std::to_string(row.episodes) + '\n';
  }
  return out;
}

std::string report_to_json(const QofReport& r) {
  nlohmann::ordered_json j;
  j["version"] = r.version;
  j["config_hash"] = r.config_hash;
  j["seed"] = r.seed;
  j["platform"] = r.platform;
  j["policy_digest"] = r.policy_digest;
  auto& rows = j["rows"] = nlohmann::ordered_json::array();
  for (const auto& row : r.rows) {
    rows.push_back({{"v_norm", row.v_norm},
                    {"ber", row.ber},
                    {"energy_scale", row.energy_scale},
                    {"success_rate", row.success_rate},
                    {"success_stderr", row.success_stderr},
                    {"flight_distance_m", row.flight_distance},
                    {"flight_time_s", row.flight_time},
                    {"flight_energy_j", row.flight_energy},
                    {"missions", row.missions},
                    {"maps", row.maps},
                    {"episodes", row.episodes}});
  }
  return j.dump(2) + "\n";
}

QofReport report_from_json(const std::string& text) {
  QofReport r;
  try {
    const auto j = nlohmann::json::parse(text);
    r.version = j.at("version").get<std::string>();
    r.config_hash = j.at("config_hash").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.platform = j.at("platform").get<std::string>();
    r.policy_digest = j.value("policy_digest", "");
    for (const auto& row : j.at("rows")) {
      QofRow q;
      q.v_norm = row.at("v_norm").get<double>();
      q.ber = row.at("ber").get<double>();
      q.energy_scale = row.at("energy_scale").get<double>();
      q.success_rate = row.at("success_rate").get<double>();
      q.success_stderr = row.at("success_stderr").get<double>();
      q.flight_distance = row.at("flight_distance_m").get<double>();
      q.flight_time = row.at("flight_time_s").get<double>();
      q.flight_energy = row.at("flight_energy_j").get<double>();
      q.missions = row.at("missions").get<double>();
      q.maps = row.at("maps").get<std::size_t>();
      q.episodes = row.at("episodes").get<std::size_t>();
      r.rows.push_back(q);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed report JSON: ") + e.what());
  }
  return r;
}

QofReport load_report(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open report " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return report_from_json(ss.str());
}

std::string deltas_to_csv(const std::vector<DeltaRow>& d) {
  std::string out = "v_norm,success_delta_pp,energy_delta_pct,missions_delta_pct,energy_vs_ref_pct,missions_vs_ref_pct\n";
  for (const auto& r : d) {
    out += num(r.v_norm) + ',' + num(r.success_delta_pp) + ',' + num(r.energy_delta_pct) + ',' +
           num(r.missions_delta_pct) + ',' + num(r.energy_vs_ref_pct) + ',' + num(r.missions_vs_ref_pct) + '\n';
  }
  return out;
}

std::string deltas_to_text(const std::vector<DeltaRow>& d) {
  std::ostringstream os;
  os << std::left << std::setw(8) << "v_norm" << std::right << std::setw(12) << "dSR(pp)" << std::setw(12)
     << "dE(%)" << std::setw(12) << "dN(%)" << std::setw(14) << "E vs ref(%)" << std::setw(14) << "N vs ref(%)"
     << '\n';
  for (const auto& r : d) {
    os << std::left << std::setw(8) << fixed(r.v_norm, 2) << std::right << std::setw(12)
       << fixed(r.success_delta_pp, 2) << std::setw(12) << fixed(r.energy_delta_pct, 2) << std::setw(12)
       << fixed(r.missions_delta_pct, 2) << std::setw(14) << fixed(r.energy_vs_ref_pct, 2) << std::setw(14)
       << fixed(r.missions_vs_ref_pct, 2) << '\n';
  }
  return os.str();
}

std::string fnv1a_hex(const std::string& data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace berry
