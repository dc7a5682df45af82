#include <cmath>
#include <set>

#include "berry/error.hpp"
#include "berry/faults.hpp"
#include "berry/rng.hpp"
#include "doctest.h"

using namespace berry;

namespace {

// Binomial band half-width in standard deviations.
bool within_sigma(double count, double n, double p, double k) {
  const double sigma = std::sqrt(n * p * (1.0 - p));
  return std::fabs(count - n * p) <= k * sigma;
}

std::vector<QuantizedLayer> sample_layers(std::uint64_t seed) {
  const auto net = init_network(std::vector<std::size_t>{6, 10, 4}, seed);
  return quantize_network(net);
}

}  // namespace

TEST_CASE("bundled curve reproduces its knots exactly") {
  const auto curve = VoltageCurve::bundled();
  CHECK(curve.points().size() == 14);
  for (const auto& pt : curve.points()) {
    CHECK(ber_at_voltage(curve, pt.v_norm) == pt.ber);
    CHECK(energy_scale_at_voltage(curve, pt.v_norm) == pt.energy_scale);
  }
}

TEST_CASE("curve values quoted in percent") {
  const auto curve = VoltageCurve::bundled();
  CHECK(ber_at_voltage(curve, 0.77) * 100.0 == doctest::Approx(2.47e-2));
  CHECK(ber_at_voltage(curve, 0.86) * 100.0 == doctest::Approx(1.96e-6));
  CHECK(ber_at_voltage(curve, 1.0) == 0.0);
  CHECK(ber_at_voltage(curve, 1.3) == 0.0);
  CHECK(energy_scale_at_voltage(curve, 0.77) == 3.43);
  CHECK(energy_scale_at_voltage(curve, 0.64) == 4.93);
  CHECK(energy_scale_at_voltage(curve, 1.0) == 1.0);
}

TEST_CASE("curve interpolation and clamping") {
  const auto curve = VoltageCurve::bundled();
  // Log-linear between non-zero knots: the midpoint is the geometric mean.
  CHECK(ber_at_voltage(curve, 0.765) == doctest::Approx(std::sqrt(2.47e-4 * 7.49e-4)).epsilon(1e-9));
  CHECK(energy_scale_at_voltage(curve, 0.765) == doctest::Approx((3.43 + 3.55) / 2));
  // Below the lowest knot both clamp.
  CHECK(ber_at_voltage(curve, 0.5) == 2.036e-1);
  CHECK(energy_scale_at_voltage(curve, 0.5) == 4.93);
  CHECK_THROWS_AS(ber_at_voltage(curve, 0.0), UsageError);
}

TEST_CASE("curve is monotone over a fine grid") {
  const auto curve = VoltageCurve::bundled();
  double prev_ber = -1.0, prev_scale = 0.0;
  for (int i = 0; i <= 1000; ++i) {
    const double v = 1.1 - 0.5 * i / 1000.0;  // descending
    const double b = ber_at_voltage(curve, v), s = energy_scale_at_voltage(curve, v);
    CHECK(b >= prev_ber);
    CHECK(s >= prev_scale);
    prev_ber = b;
    prev_scale = s;
  }
}

TEST_CASE("curve validation and CSV round trip") {
  CHECK_THROWS_AS(VoltageCurve({}), ConfigError);
  CHECK_THROWS_AS(VoltageCurve({{1.0, 0, 1}, {1.0, 0, 1}}), ConfigError);
  CHECK_THROWS_AS(VoltageCurve({{1.0, 0, 1}, {0.9, 0.1, 0.5}}), ConfigError);
  CHECK_THROWS_AS(VoltageCurve({{1.0, 0.1, 1}}), ConfigError);
  CHECK_THROWS_AS(VoltageCurve({{1.0, 0, 1}, {0.9, 0.2, 2}, {0.8, 0.1, 3}}), ConfigError);

  const auto curve = VoltageCurve::bundled();
  CHECK(VoltageCurve::from_csv_text(curve.to_csv()) == curve);
  CHECK_THROWS_AS(VoltageCurve::from_csv_text("v,b,e\n1,0,1\n"), ConfigError);
  CHECK_THROWS_AS(VoltageCurve::from_csv_text("v_norm,ber,energy_scale\n1,0\n"), ConfigError);
  CHECK_THROWS_AS(VoltageCurve::from_csv_text("v_norm,ber,energy_scale\n"), ConfigError);
}

TEST_CASE("memory layout addressing is injective and layer-major") {
  const auto layers = sample_layers(1);
  const auto layout = MemoryLayout::for_codes(layers, 64);
  CHECK(layout.total_bits() >= 8 * layout.code_count());
  std::set<std::uint64_t> seen;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    for (std::size_t c = 0; c < layers[l].codes.size(); ++c) {
      for (unsigned b = 0; b < 8; ++b) {
        const auto a = layout.address(l, c, b);
        CHECK(seen.insert(a).second);
        MemoryLayout::Location loc{};
        REQUIRE(layout.locate(a, loc));
        CHECK(loc.layer == l);
        CHECK(loc.code == c);
        CHECK(loc.bit == b);
      }
    }
  }
  CHECK(layout.address(0, 0, 0) == 0);
  CHECK(layout.address(1, 0, 0) == 8 * layers[0].codes.size());
  MemoryLayout::Location loc{};
  CHECK_THROWS_AS(layout.locate(layout.total_bits(), loc), IntegrityError);
}

TEST_CASE("sample_fault_map edge cases") {
  const MemoryLayout layout(100, 64);
  CHECK(sample_fault_map(layout, 0.0, 1).entries.empty());
  const auto full = sample_fault_map(layout, 1.0, 1, 1.0);
  CHECK(full.entries.size() == layout.total_bits());
  for (std::size_t i = 0; i < full.entries.size(); ++i) {
    CHECK(full.entries[i].address == i);
    CHECK(full.entries[i].stuck_value == 1);
  }
  CHECK_THROWS_AS(sample_fault_map(layout, -0.1, 1), ConfigError);
  CHECK_THROWS_AS(sample_fault_map(layout, 1.1, 1), ConfigError);
}

TEST_CASE("sample_fault_map is deterministic and seed-sensitive") {
  const MemoryLayout layout(200, 64);
  CHECK(sample_fault_map(layout, 0.01, 5) == sample_fault_map(layout, 0.01, 5));
  CHECK_FALSE(sample_fault_map(layout, 0.01, 5) == sample_fault_map(layout, 0.01, 6));
}

TEST_CASE("sample_fault_map rate lies in the binomial band") {
  const MemoryLayout layout(15625, 64);  // 10^6 bits
  REQUIRE(layout.total_bits() == 1000000);
  const auto map = sample_fault_map(layout, 0.005, 42);
  CHECK(map.entries.size() >= 4790);
  CHECK(map.entries.size() <= 5210);
  std::uint64_t prev = 0;
  bool first = true, sorted = true;
  for (const auto& e : map.entries) {
    if (!first && e.address <= prev) sorted = false;
    prev = e.address;
    first = false;
    CHECK(e.address < layout.total_bits());
  }
  CHECK(sorted);

  // Several seeds and rates, 4 sigma.
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    for (double p : {1e-4, 1e-3, 0.02, 0.3}) {
      const auto m = sample_fault_map(layout, p, seed);
      CHECK(within_sigma(static_cast<double>(m.entries.size()), 1e6, p, 4.0));
    }
  }
}

TEST_CASE("sample_fault_map stuck values and bit positions are unbiased") {
  const MemoryLayout layout(15625, 64);
  const auto map = sample_fault_map(layout, 0.02, 9);
  const double n = static_cast<double>(map.entries.size());
  double ones = 0;
  std::array<double, 8> per_bit{};
  for (const auto& e : map.entries) {
    ones += e.stuck_value;
    per_bit[e.address % 8] += 1;
  }
  CHECK(within_sigma(ones, n, 0.5, 4.0));
  // Chi-square over the 8 bit positions, 7 dof; 99.9% quantile is 24.32.
  double chi2 = 0;
  for (double c : per_bit) chi2 += (c - n / 8) * (c - n / 8) / (n / 8);
  CHECK(chi2 < 24.32);

  const auto biased = sample_fault_map(layout, 0.02, 9, 0.9);
  double biased_ones = 0;
  for (const auto& e : biased.entries) biased_ones += e.stuck_value;
  CHECK(within_sigma(biased_ones, static_cast<double>(biased.entries.size()), 0.9, 4.0));
}

TEST_CASE("column_aligned_map confines faults to the chosen columns") {
  const MemoryLayout layout(15625, 64);
  const auto map = column_aligned_map(layout, 0.01, 0.5, 8.0, 3);
  std::set<std::uint64_t> cols;
  for (const auto& e : map.entries) cols.insert(e.address % 64);
  CHECK(cols.size() == 8);
  CHECK(within_sigma(static_cast<double>(map.entries.size()), 1e6, 0.01, 3.0));
  const auto s = summarize(map);
  CHECK(s.faulty_columns == 8);

  CHECK(column_aligned_map(layout, 0.0, 0.5, 8.0, 3).entries.empty());
  CHECK_THROWS_AS(column_aligned_map(layout, 0.01, 1.5, 8.0, 3), ConfigError);
  CHECK_THROWS_AS(column_aligned_map(layout, 0.01, 0.5, 0.5, 3), ConfigError);
  CHECK_THROWS_AS(column_aligned_map(layout, 2.0, 0.5, 8.0, 3), ConfigError);
}

TEST_CASE("column_aligned_map with concentration 1 behaves like random sampling") {
  const MemoryLayout layout(15625, 64);
  const auto map = column_aligned_map(layout, 0.005, 0.5, 1.0, 11);
  CHECK(within_sigma(static_cast<double>(map.entries.size()), 1e6, 0.005, 4.0));
  std::set<std::uint64_t> cols;
  double ones = 0;
  for (const auto& e : map.entries) {
    cols.insert(e.address % 64);
    ones += e.stuck_value;
  }
  CHECK(cols.size() == 64);
  CHECK(within_sigma(ones, static_cast<double>(map.entries.size()), 0.5, 4.0));
}

TEST_CASE("column_aligned_map honours the 0-to-1 bias") {
  const MemoryLayout layout(15625, 64);
  const auto map = column_aligned_map(layout, 0.01, 0.8, 4.0, 2);
  double ones = 0;
  for (const auto& e : map.entries) ones += e.stuck_value;
  CHECK(within_sigma(ones, static_cast<double>(map.entries.size()), 0.8, 4.0));
}

TEST_CASE("apply_fault_map single-bit arithmetic") {
  QuantizedLayer q;
  q.in = 2;
  q.out = 1;
  q.codes = {0, 127, 5};
  q.scale = 1.0f;
  const std::vector<QuantizedLayer> layers{q};
  const MemoryLayout layout(1, 64, {3});
  FaultMap map;
  map.rows = 1;
  map.cols = 64;

  SUBCASE("empty map is the identity") { CHECK(apply_fault_map(layers, layout, map)[0] == q); }
  SUBCASE("stuck-at-1 on the sign bit of zero gives -128") {
    map.entries = {{7, 1}};
    CHECK(apply_fault_map(layers, layout, map)[0].codes[0] == -128);
  }
  SUBCASE("stuck-at-1 on a set bit leaves 127 unchanged") {
    map.entries = {{8, 1}};
    CHECK(apply_fault_map(layers, layout, map)[0].codes[1] == 127);
  }
  SUBCASE("stuck-at-0 clears a bit") {
    map.entries = {{16, 0}};
    CHECK(apply_fault_map(layers, layout, map)[0].codes[2] == 4);
  }
  SUBCASE("bit-flip semantics ignore the stuck value") {
    map.entries = {{8, 1}};
    CHECK(apply_fault_map(layers, layout, map, FaultSemantics::bit_flip)[0].codes[1] == 126);
  }
  SUBCASE("input is not mutated") {
    map.entries = {{7, 1}, {16, 0}};
    (void)apply_fault_map(layers, layout, map);
    CHECK(layers[0] == q);
  }
  SUBCASE("padding addresses are ignored, out-of-range ones rejected") {
    map.entries = {{40, 1}};
    CHECK(apply_fault_map(layers, layout, map)[0] == q);
    FaultMap big = map;
    big.rows = 2;
    big.entries = {{100, 1}};
    CHECK_THROWS_AS(apply_fault_map(layers, layout, big), IntegrityError);
  }
}

TEST_CASE("apply_fault_map persistence and locality") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto layers = sample_layers(seed);
    const auto layout = MemoryLayout::for_codes(layers, 64);
    for (auto sem : {FaultSemantics::stuck_at, FaultSemantics::bit_flip}) {
      const auto map = sample_fault_map(layout, 0.05, seed + 100);
      const auto once = apply_fault_map(layers, layout, map, sem);
      CHECK(apply_fault_map(layers, layout, map, sem) == once);
      if (sem == FaultSemantics::stuck_at) CHECK(apply_fault_map(once, layout, map, sem) == once);

      std::set<std::uint64_t> addrs;
      for (const auto& e : map.entries) addrs.insert(e.address);
      for (std::size_t l = 0; l < layers.size(); ++l) {
        CHECK(once[l].scale == layers[l].scale);
        for (std::size_t c = 0; c < layers[l].codes.size(); ++c) {
          const auto diff = static_cast<std::uint8_t>(static_cast<std::uint8_t>(layers[l].codes[c]) ^
                                                      static_cast<std::uint8_t>(once[l].codes[c]));
          for (unsigned b = 0; b < 8; ++b)
            if (diff & (1u << b)) CHECK(addrs.count(layout.address(l, c, b)) == 1);
        }
      }
    }
  }
}

TEST_CASE("berr with p = 0 is pure quantization noise") {
  const auto net = init_network(std::vector<std::size_t>{5, 7, 3}, 4);
  const auto out = berr(net, 0.0, 1);
  const auto q = quantize_network(net);
  for (std::size_t l = 0; l < net.layers().size(); ++l) {
    const auto& a = net.layers()[l];
    const auto& b = out.layers()[l];
    for (std::size_t k = 0; k < a.weights.size(); ++k)
      CHECK(std::fabs(a.weights[k] - b.weights[k]) <= q[l].scale / 2 * (1 + 1e-5));
  }
  CHECK(out == dequantize_network(q));
}

TEST_CASE("berr with a fixed map is persistent and leaves the source alone") {
  const auto net = init_network(std::vector<std::size_t>{5, 7, 3}, 4);
  const auto copy = net;
  const FaultModel model;
  const auto map = sample_fault_map(model.layout_for(net), 0.02, 8);
  const auto a = berr(net, map, model);
  const auto b = berr(net, map, model);
  CHECK(a == b);
  CHECK(net == copy);
  CHECK_FALSE(a == berr(net, 0.0, 0));
}

TEST_CASE("berr: one known flip changes exactly one parameter by the code delta") {
  const auto net = init_network(std::vector<std::size_t>{3, 4, 2}, 12);
  const FaultModel model;
  const auto layout = model.layout_for(net);
  const auto q = quantize_network(net);
  const std::size_t layer = 1, code = 3;
  const unsigned bit = 6;
  const auto old_code = static_cast<std::uint8_t>(q[layer].codes[code]);
  const std::uint8_t stuck = (old_code >> bit) & 1u ? 0 : 1;
  FaultMap map;
  map.rows = layout.rows();
  map.cols = layout.cols();
  map.entries = {{layout.address(layer, code, bit), stuck}};
  const auto clean = berr(net, FaultMap{layout.rows(), layout.cols(), {}, {}}, model);
  const auto hit = berr(net, map, model);

  const int new_code = static_cast<std::int8_t>(stuck ? (old_code | (1u << bit)) : (old_code & ~(1u << bit)));
  const double expected = (new_code - static_cast<int>(static_cast<std::int8_t>(old_code))) *
                          static_cast<double>(q[layer].scale);
  int changed = 0;
  for (std::size_t l = 0; l < net.layers().size(); ++l) {
    const auto& a = clean.layers()[l];
    const auto& b = hit.layers()[l];
    for (std::size_t k = 0; k < a.weights.size(); ++k) {
      if (a.weights[k] != b.weights[k]) {
        ++changed;
        CHECK(l == layer);
        CHECK(k == code);
        CHECK(b.weights[k] - a.weights[k] == doctest::Approx(expected).epsilon(1e-6));
      }
    }
    for (std::size_t k = 0; k < a.biases.size(); ++k) changed += a.biases[k] != b.biases[k];
  }
  CHECK(changed == 1);
}

TEST_CASE("berr rejects a map too small for the network") {
  const auto net = init_network(std::vector<std::size_t>{5, 7, 3}, 4);
  FaultMap tiny;
  tiny.rows = 1;
  tiny.cols = 8;
  CHECK_THROWS_AS(berr(net, tiny), IntegrityError);
}

TEST_CASE("biases can be kept out of fault exposure") {
  auto net = init_network(std::vector<std::size_t>{4, 4}, 1);
  for (auto& b : net.mutable_layers()[0].biases) b = 0.25f;
  FaultModel model;
  model.include_biases = false;
  const auto out = berr(net, 1.0, 3, model);
  for (float b : out.layers()[0].biases) CHECK(b == 0.25f);
}

TEST_CASE("activation fault injector") {
  const auto net = init_network(std::vector<std::size_t>{4, 6, 5, 2}, 3);
  const auto none = ActivationFaultInjector::for_network(net, 0.0, 1);
  CHECK(none.fault_count() == 0);
  const std::vector<float> s{0.1f, 0.2f, -0.3f, 0.4f};
  CHECK(forward(net, s, &none) == forward(net, s));

  const auto all = ActivationFaultInjector::for_network(net, 1.0, 1);
  CHECK(all.fault_count() == (6 + 5) * 8);
  const auto a = ActivationFaultInjector::for_network(net, 0.2, 9);
  const auto b = ActivationFaultInjector::for_network(net, 0.2, 9);
  CHECK(forward(net, s, &a) == forward(net, s, &b));
  std::vector<double> wrong(3, 1.0);
  CHECK_THROWS_AS(a.apply(0, wrong), ShapeError);
}

TEST_CASE("fault map files round trip") {
  const MemoryLayout layout(50, 64);
  auto map = sample_fault_map(layout, 0.02, 4);
  const auto text = format_fault_map(map);
  CHECK(parse_fault_map(text) == map);

  CHECK(parse_fault_map("# nothing\nrows=2\ncols=8\n").entries.empty());
  CHECK_THROWS_AS(parse_fault_map("rows=2\n1,1\n"), ConfigError);
  CHECK_THROWS_AS(parse_fault_map("rows=2\ncols=8\n3,2\n"), ConfigError);
  CHECK_THROWS_AS(parse_fault_map("rows=2\ncols=8\n5,1\n3,1\n"), ConfigError);
  CHECK_THROWS_AS(parse_fault_map("rows=2\ncols=8\n16,1\n"), ConfigError);
  CHECK_THROWS_AS(parse_fault_map("rows=2\ncols=8\nx,1\n"), ConfigError);
  CHECK_THROWS_AS(read_fault_map("/nonexistent/map.txt"), Error);
}

TEST_CASE("fault map summary") {
  FaultMap map;
  map.rows = 4;
  map.cols = 8;
  map.entries = {{1, 1}, {9, 0}, {12, 1}};
  const auto s = summarize(map);
  CHECK(s.count == 3);
  CHECK(s.total_bits == 32);
  CHECK(s.empirical_rate == doctest::Approx(3.0 / 32));
  CHECK(s.stuck_one_fraction == doctest::Approx(2.0 / 3));
  CHECK(s.faulty_columns == 2);
  CHECK(s.column_histogram[1] == 2);
  CHECK(s.column_histogram[4] == 1);
}
