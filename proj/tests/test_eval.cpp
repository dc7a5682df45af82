#include <cmath>
#include <set>

#include "berry/error.hpp"
#include "berry/eval.hpp"
#include "berry/rl.hpp"
#include "doctest.h"

using namespace berry;

namespace {

std::shared_ptr<const GridWorld> open_world() {
  EnvConfig ec;
  ec.width = ec.height = 8;
  ec.density = DensityProfile::sparse;
  ec.random_start = true;
  ec.rewards = {1.0, -1.0, -0.01, 0.01};
  return make_env(ec, 2);
}

// A small trained policy shared by the campaign tests.
const QNetwork& trained() {
  static const QNetwork net = [] {
    TrainConfig cfg;
    cfg.episodes = 600;
    cfg.gamma = 0.9;
    cfg.hidden = {32};
    cfg.target_period = 200;
    cfg.seed = 3;
    return berry_train(open_world(), cfg).net;
  }();
  return net;
}

CampaignConfig small_campaign() {
  CampaignConfig c;
  c.voltages = {1.0, 0.77, 0.71};
  c.maps_per_voltage = 4;
  c.episodes_per_map = 6;
  c.seed = 5;
  return c;
}

std::vector<std::uint64_t> seeds(std::size_t n) {
  std::vector<std::uint64_t> s;
  for (std::size_t i = 0; i < n; ++i) s.push_back(eval_episode_seed(9, i));
  return s;
}

}  // namespace

TEST_CASE("empty fault map evaluates the quantized clean policy") {
  const auto world = open_world();
  const auto& net = trained();
  const auto layout = FaultModel{}.layout_for(net);
  const auto empty = sample_fault_map(layout, 0.0, 1);
  const auto s = seeds(20);
  const auto a = evaluate_policy(net, world, empty, s);
  const auto b = evaluate_network(dequantize_network(quantize_network(net, FaultModel{}.quant())), world, s);
  CHECK(a == b);
  CHECK(a.episodes == 20);
  CHECK(a.successes + a.collisions + a.timeouts == 20);
  CHECK(a.success_rate >= 0.8);
  CHECK(a.mean_success_path() > 0.0);
}

TEST_CASE("saturating corruption cannot beat the clean policy") {
  const auto world = open_world();
  const auto& net = trained();
  const auto layout = FaultModel{}.layout_for(net);
  const auto s = seeds(20);
  const auto clean = evaluate_policy(net, world, sample_fault_map(layout, 0.0, 1), s);
  const auto full = evaluate_policy(net, world, sample_fault_map(layout, 1.0, 1), s);
  CHECK(full.success_rate <= clean.success_rate);
}

TEST_CASE("evaluation is deterministic and validates its inputs") {
  const auto world = open_world();
  const auto& net = trained();
  const auto layout = FaultModel{}.layout_for(net);
  const auto map = sample_fault_map(layout, 0.01, 4);
  const auto s = seeds(10);
  CHECK(evaluate_policy(net, world, map, s) == evaluate_policy(net, world, map, s));
  CHECK_THROWS_AS(evaluate_policy(net, world, map, {}), UsageError);
  const auto other = init_network(std::vector<std::size_t>{10, 4, 25}, 1);
  CHECK_THROWS_AS(evaluate_network(other, world, s), IntegrityError);
}

TEST_CASE("activation faults are seeded and can only be added on top") {
  const auto world = open_world();
  const auto& net = trained();
  const auto layout = FaultModel{}.layout_for(net);
  const auto map = sample_fault_map(layout, 0.0, 4);
  const auto s = seeds(10);
  EvalOptions opts;
  opts.activation_p = 0.05;
  opts.activation_seed = 8;
  CHECK(evaluate_policy(net, world, map, s, opts) == evaluate_policy(net, world, map, s, opts));
  opts.activation_p = 0.0;
  CHECK(evaluate_policy(net, world, map, s, opts) == evaluate_policy(net, world, map, s));
}

TEST_CASE("campaign rows aggregate per-map results") {
  const auto world = open_world();
  const auto platform = crazyflie_platform();
  const auto curve = VoltageCurve::bundled();
  auto cfg = small_campaign();
  cfg.voltages = {0.71, 1.0, 0.77};  // unsorted on purpose
  const auto res = run_campaign(cfg, trained(), world, platform, curve);
  const auto& rows = res.report.rows;
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].v_norm == 1.0);
  CHECK(rows[1].v_norm == 0.77);
  CHECK(rows[2].v_norm == 0.71);
  for (std::size_t v = 0; v < rows.size(); ++v) {
    const auto& maps = res.per_map[v];
    double sum = 0.0;
    std::size_t succ = 0, eps = 0;
    for (const auto& m : maps) {
      sum += m.success_rate;
      succ += m.successes;
      eps += m.episodes;
    }
    CHECK(rows[v].success_rate == sum / maps.size());
    CHECK(rows[v].maps == cfg.maps_per_voltage);
    CHECK(rows[v].episodes == cfg.maps_per_voltage * cfg.episodes_per_map);
    const double n = static_cast<double>(eps), q = succ / n;
    CHECK(rows[v].success_stderr == doctest::Approx(std::sqrt(n / (n - 1) * q * (1 - q) / n)));
    CHECK(rows[v].ber == ber_at_voltage(curve, rows[v].v_norm));
    CHECK(rows[v].energy_scale == energy_scale_at_voltage(curve, rows[v].v_norm));
    CHECK(rows[v].flight_distance == doctest::Approx(row_flight_distance(maps)));
    if (rows[v].missions > 0)
      CHECK(rows[v].missions * rows[v].flight_energy ==
            doctest::Approx(rows[v].success_rate * platform.battery_energy_j).epsilon(1e-12));
  }
  CHECK(res.report.platform == "crazyflie");
  CHECK(res.report.policy_digest.size() == 16);
}

TEST_CASE("at zero BER the map count does not change the row") {
  const auto world = open_world();
  auto cfg = small_campaign();
  cfg.voltages = {1.0};
  cfg.maps_per_voltage = 1;
  const auto a = run_campaign(cfg, trained(), world, crazyflie_platform(), VoltageCurve::bundled()).report.rows[0];
  cfg.maps_per_voltage = 7;
  const auto b = run_campaign(cfg, trained(), world, crazyflie_platform(), VoltageCurve::bundled()).report.rows[0];
  CHECK(a.success_rate == doctest::Approx(b.success_rate).epsilon(1e-12));
  CHECK(a.flight_distance == doctest::Approx(b.flight_distance).epsilon(1e-12));
  CHECK(a.flight_energy == doctest::Approx(b.flight_energy).epsilon(1e-12));
  CHECK(a.missions == doctest::Approx(b.missions).epsilon(1e-12));

  // And it equals a direct clean evaluation.
  const auto clean = evaluate_policy(trained(), world, sample_fault_map(FaultModel{}.layout_for(trained()), 0.0, 1), cfg.episode_seeds());
  CHECK(a.success_rate == doctest::Approx(clean.success_rate).epsilon(1e-12));
}

TEST_CASE("parallel campaigns match the serial result") {
  const auto world = open_world();
  auto cfg = small_campaign();
  const auto serial = run_campaign(cfg, trained(), world, crazyflie_platform(), VoltageCurve::bundled());
  cfg.jobs = 3;
  const auto parallel = run_campaign(cfg, trained(), world, crazyflie_platform(), VoltageCurve::bundled());
  CHECK(serial.report == parallel.report);
  CHECK(report_to_csv(serial.report) == report_to_csv(parallel.report));
}

TEST_CASE("map seeds split per cell") {
  auto cfg = small_campaign();
  const auto layout = FaultModel{}.layout_for(trained());
  const auto a = campaign_fault_map(cfg, layout, 0.01, 1, 2);
  CHECK(campaign_fault_map(cfg, layout, 0.01, 1, 2) == a);
  CHECK_FALSE(campaign_fault_map(cfg, layout, 0.01, 1, 3) == a);
  CHECK_FALSE(campaign_fault_map(cfg, layout, 0.01, 2, 2) == a);
  CHECK(campaign_map_seed(5, 1, 2) != campaign_map_seed(5, 2, 1));

  // Growing M leaves the first maps' metrics untouched.
  const auto world = open_world();
  cfg.maps_per_voltage = 2;
  const auto r2 = run_campaign(cfg, trained(), world, crazyflie_platform(), VoltageCurve::bundled());
  cfg.maps_per_voltage = 3;
  const auto r3 = run_campaign(cfg, trained(), world, crazyflie_platform(), VoltageCurve::bundled());
  for (std::size_t v = 0; v < 3; ++v)
    for (std::size_t m = 0; m < 2; ++m) CHECK(r2.per_map[v][m] == r3.per_map[v][m]);
}

TEST_CASE("campaign patterns") {
  auto cfg = small_campaign();
  const auto layout = FaultModel{}.layout_for(trained());
  cfg.pattern = FaultPattern::column_aligned;
  const auto col = campaign_fault_map(cfg, layout, 0.01, 0, 0);
  std::set<std::uint64_t> cols;
  for (const auto& e : col.entries) cols.insert(e.address % col.cols);
  CHECK(cols.size() <= 8);
  cfg.pattern = FaultPattern::profiled;
  CHECK_THROWS_AS(cfg.validate(VoltageCurve::bundled()), ConfigError);
  cfg.profiled_map = sample_fault_map(layout, 0.003, 1);
  CHECK(campaign_fault_map(cfg, layout, 0.5, 0, 0) == *cfg.profiled_map);
}

TEST_CASE("env seed overrides cycle") {
  CampaignConfig c;
  c.episodes_per_map = 5;
  c.env_seeds = {10, 20};
  CHECK(c.episode_seeds() == std::vector<std::uint64_t>{10, 20, 10, 20, 10});
  c.env_seeds.clear();
  c.seed = 4;
  CHECK(c.episode_seeds()[3] == eval_episode_seed(4, 3));
}

TEST_CASE("campaign validation") {
  const auto curve = VoltageCurve::bundled();
  auto bad = [&](auto mutate) {
    CampaignConfig c;
    mutate(c);
    CHECK_THROWS_AS(c.validate(curve), ConfigError);
  };
  bad([](CampaignConfig& c) { c.maps_per_voltage = 0; });
  bad([](CampaignConfig& c) { c.episodes_per_map = 0; });
  bad([](CampaignConfig& c) { c.voltages.clear(); });
  bad([](CampaignConfig& c) { c.voltages = {0.5}; });
  bad([](CampaignConfig& c) { c.jobs = 0; });
  const auto world = open_world();
  const auto other = init_network(std::vector<std::size_t>{28, 4, 8}, 1);
  CHECK_THROWS_AS(run_campaign(small_campaign(), other, world, crazyflie_platform(), curve), IntegrityError);
}

TEST_CASE("compare_reports") {
  QofReport a, b;
  QofRow r1;
  r1.v_norm = 1.0;
  r1.success_rate = 0.884;
  r1.flight_energy = 53.19;
  r1.missions = 55.35;
  QofRow r2 = r1;
  r2.v_norm = 0.77;
  r2.flight_energy = 44.88;
  r2.missions = 65.59;
  a.rows = {r1, r2};
  for (const auto& d : compare_reports(a, a)) {
    CHECK(d.success_delta_pp == 0.0);
    CHECK(d.energy_delta_pct == 0.0);
    CHECK(d.missions_delta_pct == 0.0);
  }
  const auto d = compare_reports(a, a);
  CHECK(std::fabs(d[1].energy_vs_ref_pct - -15.62) < 0.01);
  CHECK(std::fabs(d[1].missions_vs_ref_pct - 18.51) < 0.01);
  CHECK(percent_change(53.19, 44.88) == doctest::Approx(100.0 * (44.88 - 53.19) / 53.19));

  b = a;
  b.rows[1].success_rate = 0.5;
  CHECK(compare_reports(a, b)[1].success_delta_pp == doctest::Approx(-38.4));
  b.rows[1].v_norm = 0.76;
  CHECK_THROWS_AS(compare_reports(a, b), UsageError);
  b.rows.pop_back();
  CHECK_THROWS_AS(compare_reports(a, b), UsageError);
  CHECK(deltas_to_csv(d).rfind("v_norm,success_delta_pp,", 0) == 0);
  CHECK(deltas_to_text(d).find("-15.62") != std::string::npos);
}

TEST_CASE("report serialization") {
  const auto world = open_world();
  auto cfg = small_campaign();
  cfg.config_hash = "abc123";
  const auto r = run_campaign(cfg, trained(), world, crazyflie_platform(), VoltageCurve::bundled()).report;
  const auto csv = report_to_csv(r);
  CHECK(csv.rfind(
            "v_norm,ber,energy_scale,success_rate,success_stderr,flight_distance_m,flight_time_s,flight_energy_j,"
            "missions,maps,episodes\n",
            0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
  const auto back = report_from_json(report_to_json(r));
  CHECK(back == r);
  CHECK(back.config_hash == "abc123");
  CHECK(back.version == kVersion);
  CHECK_THROWS_AS(report_from_json("{"), ConfigError);
  CHECK_THROWS_AS(report_from_json("{\"version\": 1}"), ConfigError);
  CHECK_THROWS_AS(load_report("/nonexistent/report.json"), ConfigError);
}

TEST_CASE("fnv1a reference values") {
  CHECK(fnv1a_hex("") == "cbf29ce484222325");
  CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
  CHECK(fnv1a_hex("foobar") == "85944171f73967e8");
}
