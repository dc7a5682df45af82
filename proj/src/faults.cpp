#include "berry/faults.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "berry/error.hpp"
#include "berry/rng.hpp"

namespace berry {

// ---------------------------------------------------------------------------
// Curve
// ---------------------------------------------------------------------------

VoltageCurve::VoltageCurve(std::vector<CurvePoint> points) : points_(std::move(points)) {
  if (points_.empty()) throw ConfigError("voltage curve has no points");
  for (std::size_t i = 0; i < points_.size(); ++i) {
    const auto& pt = points_[i];
    if (!(pt.v_norm > 0.0) || !std::isfinite(pt.v_norm)) throw ConfigError("voltage curve: v_norm must be positive");
    if (!(pt.ber >= 0.0 && pt.ber <= 1.0)) throw ConfigError("voltage curve: ber must lie in [0, 1]");
    if (!(pt.energy_scale >= 1.0) || !std::isfinite(pt.energy_scale))
      throw ConfigError("voltage curve: energy_scale must be >= 1");
    if (pt.v_norm >= 1.0 && pt.ber != 0.0) throw ConfigError("voltage curve: ber must be 0 at or above V_min");
    if (i > 0) {
      const auto& prev = points_[i - 1];
      if (!(pt.v_norm < prev.v_norm)) throw ConfigError("voltage curve: v_norm must be strictly decreasing");
      if (pt.ber < prev.ber) throw ConfigError("voltage curve: ber must not decrease as voltage drops");
      if (pt.energy_scale < prev.energy_scale)
        throw ConfigError("voltage curve: energy_scale must not decrease as voltage drops");
    }
  }
}

VoltageCurve VoltageCurve::bundled() {
  // ber values are probabilities; the source table lists them in percent.
  return VoltageCurve({
      {1.00, 0.0, 1.00},
      {0.86, 1.96e-8, 2.77},
      {0.84, 1.38e-7, 2.87},
      {0.83, 8.23e-7, 2.97},
      {0.81, 4.22e-6, 3.07},
      {0.80, 1.87e-5, 3.18},
      {0.79, 7.25e-5, 3.30},
      {0.77, 2.47e-4, 3.43},
      {0.76, 7.49e-4, 3.55},
      {0.74, 2.03e-3, 3.69},
      {0.73, 4.98e-3, 3.84},
      {0.71, 1.11e-2, 3.99},
      {0.68, 5.80e-2, 4.42},
      {0.64, 2.036e-1, 4.93},
  });
}

std::vector<double> bundled_voltage_grid() {
  const auto curve = VoltageCurve::bundled();
  std::vector<double> grid;
  for (const auto& pt : curve.points()) grid.push_back(pt.v_norm);
  return grid;
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double parse_double(const std::string& s, const std::string& where) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ConfigError(where + ": not a number: '" + s + "'");
  return v;
}

std::uint64_t parse_u64(const std::string& s, const std::string& where) {
  std::uint64_t v = 0;
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ConfigError(where + ": not an unsigned integer: '" + s + "'");
  return v;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(line);
  while (std::getline(is, cur, sep)) out.push_back(trim(cur));
  return out;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

VoltageCurve VoltageCurve::from_csv_text(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  std::vector<CurvePoint> pts;
  bool header = false;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto where = "voltage curve line " + std::to_string(lineno);
    const auto cells = split(t, ',');
    if (!header) {
      if (cells != std::vector<std::string>{"v_norm", "ber", "energy_scale"})
        throw ConfigError(where + ": expected header 'v_norm,ber,energy_scale'");
      header = true;
      continue;
    }
    if (cells.size() != 3) throw ConfigError(where + ": expected 3 columns");
    pts.push_back({parse_double(cells[0], where), parse_double(cells[1], where), parse_double(cells[2], where)});
  }
  return VoltageCurve(std::move(pts));
}

VoltageCurve VoltageCurve::from_csv(const std::filesystem::path& path) { return from_csv_text(read_text(path)); }

std::string VoltageCurve::to_csv() const {
  auto num = [](double v) {
    char buf[32];
    return std::string(buf, std::to_chars(buf, buf + sizeof buf, v).ptr);
  };
  std::string out = "v_norm,ber,energy_scale\n";
  for (const auto& p : points_) out += num(p.v_norm) + ',' + num(p.ber) + ',' + num(p.energy_scale) + '\n';
  return out;
}

namespace {

// Index i such that points[i].v_norm >= v > points[i+1].v_norm, or a clamp.
template <typename Interp>
double curve_lookup(const VoltageCurve& curve, double v, Interp interp, double CurvePoint::*field) {
  if (!(v > 0.0)) throw UsageError("voltage must be positive");
  const auto& pts = curve.points();
  if (v >= pts.front().v_norm) return pts.front().*field;
  if (v <= pts.back().v_norm) return pts.back().*field;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const auto& hi = pts[i];
    const auto& lo = pts[i + 1];
    if (v == hi.v_norm) return hi.*field;
    if (v == lo.v_norm) return lo.*field;
    if (v < hi.v_norm && v > lo.v_norm) {
      const double t = (hi.v_norm - v) / (hi.v_norm - lo.v_norm);
      return interp(hi.*field, lo.*field, t);
    }
  }
  return pts.back().*field;
}

}  // namespace

double ber_at_voltage(const VoltageCurve& curve, double v_norm) {
  if (v_norm >= 1.0 && v_norm > 0.0) return 0.0;
  return curve_lookup(
      curve, v_norm,
      [](double a, double b, double t) {
        if (a > 0.0 && b > 0.0) return std::pow(10.0, std::log10(a) + t * (std::log10(b) - std::log10(a)));
        return a + t * (b - a);
      },
      &CurvePoint::ber);
}

double energy_scale_at_voltage(const VoltageCurve& curve, double v_norm) {
  return curve_lookup(
      curve, v_norm, [](double a, double b, double t) { return a + t * (b - a); }, &CurvePoint::energy_scale);
}

// ---------------------------------------------------------------------------
// Layout
// ---------------------------------------------------------------------------

MemoryLayout::MemoryLayout(std::size_t rows, std::size_t cols, std::vector<std::size_t> layer_code_counts)
    : rows_(rows), cols_(cols), layer_codes_(std::move(layer_code_counts)) {
  if (cols_ == 0 || rows_ == 0) throw ConfigError("memory layout needs at least one row and one column");
  layer_offsets_.reserve(layer_codes_.size());
  for (auto n : layer_codes_) {
    layer_offsets_.push_back(code_count_);
    code_count_ += n;
  }
  if (total_bits() < 8ULL * code_count_) throw ConfigError("memory layout is too small for the network's codes");
}

MemoryLayout MemoryLayout::for_codes(std::span<const QuantizedLayer> layers, std::size_t cols) {
  std::vector<std::size_t> counts;
  std::size_t total = 0;
  for (const auto& l : layers) {
    counts.push_back(l.codes.size());
    total += l.codes.size();
  }
  if (cols == 0) throw ConfigError("memory layout needs at least one column");
  const std::size_t rows = std::max<std::size_t>(1, (8 * total + cols - 1) / cols);
  return MemoryLayout(rows, cols, std::move(counts));
}

MemoryLayout MemoryLayout::for_network(const QNetwork& net, std::size_t cols, QuantOptions opts) {
  std::vector<std::size_t> counts;
  std::size_t total = 0;
  for (const auto& l : net.layers()) {
    const std::size_t n = l.weights.size() + (opts.include_biases ? l.biases.size() : 0);
    counts.push_back(n);
    total += n;
  }
  if (cols == 0) throw ConfigError("memory layout needs at least one column");
  const std::size_t rows = std::max<std::size_t>(1, (8 * total + cols - 1) / cols);
  return MemoryLayout(rows, cols, std::move(counts));
}

std::uint64_t MemoryLayout::address(std::size_t layer, std::size_t code, unsigned bit) const {
  if (layer >= layer_codes_.size() || code >= layer_codes_[layer] || bit >= 8)
    throw UsageError("memory layout: code position out of range");
  return 8ULL * (layer_offsets_[layer] + code) + bit;
}

bool MemoryLayout::locate(std::uint64_t address, Location& loc) const {
  if (address >= total_bits()) throw IntegrityError("fault address " + std::to_string(address) + " outside layout");
  const std::uint64_t code = address / 8;
  if (code >= code_count_) return false;
  // Offsets are ascending; find the last layer whose offset <= code.
  const auto it = std::upper_bound(layer_offsets_.begin(), layer_offsets_.end(), static_cast<std::size_t>(code));
  const std::size_t layer = static_cast<std::size_t>(it - layer_offsets_.begin()) - 1;
  loc = {layer, static_cast<std::size_t>(code) - layer_offsets_[layer], static_cast<unsigned>(address % 8)};
  return true;
}

// ---------------------------------------------------------------------------
// Map generation
// ---------------------------------------------------------------------------

namespace {

void check_probability(double p, const char* what) {
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(std::string(what) + " must lie in [0, 1]");
}

// Visits the indices of a Bernoulli(p) subset of [0, n) in increasing order.
template <typename Visit>
void bernoulli_subset(Rng& rng, std::uint64_t n, double p, Visit visit) {
  if (p <= 0.0 || n == 0) return;
  if (p >= 1.0) {
    for (std::uint64_t i = 0; i < n; ++i) visit(i);
    return;
  }
  std::uint64_t i = 0;
  while (true) {
    const std::uint64_t skip = rng.geometric(p);
    if (skip >= n - i) return;
    i += skip;
    visit(i);
    if (++i >= n) return;
  }
}

}  // namespace

FaultMap sample_fault_map(const MemoryLayout& layout, double p, std::uint64_t seed, double stuck_one_prob) {
  check_probability(p, "fault rate p");
  check_probability(stuck_one_prob, "stuck-at-1 probability");
  FaultMap map;
  map.rows = layout.rows();
  map.cols = layout.cols();
  map.source = {FaultPattern::sampled, p, stuck_one_prob, 1.0, seed, {}};
  Rng rng(derive_seed(seed, {0xFA17ULL}));
  Rng stuck_rng(derive_seed(seed, {0x57C4ULL}));
  bernoulli_subset(rng, layout.total_bits(), p, [&](std::uint64_t addr) {
    map.entries.push_back({addr, static_cast<std::uint8_t>(stuck_rng.bernoulli(stuck_one_prob) ? 1 : 0)});
  });
  return map;
}

FaultMap column_aligned_map(const MemoryLayout& layout, double p, double zero_to_one_bias, double col_concentration,
                            std::uint64_t seed) {
  check_probability(p, "fault rate p");
  check_probability(zero_to_one_bias, "0-to-1 bias");
  if (!(col_concentration >= 1.0) || !std::isfinite(col_concentration))
    throw ConfigError("column concentration must be >= 1");

  const std::size_t cols = layout.cols();
  const std::size_t chosen_count =
      std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(static_cast<double>(cols) / col_concentration)),
                              1, cols);

  Rng rng(derive_seed(seed, {0xC01AULL}));
  std::vector<std::size_t> columns(cols);
  std::iota(columns.begin(), columns.end(), 0);
  for (std::size_t i = 0; i < chosen_count; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(cols - i));
    std::swap(columns[i], columns[j]);
  }
  columns.resize(chosen_count);
  std::sort(columns.begin(), columns.end());

  const double in_column_p =
      std::min(1.0, p * static_cast<double>(cols) / static_cast<double>(chosen_count));

  FaultMap map;
  map.rows = layout.rows();
  map.cols = cols;
  map.source = {FaultPattern::column_aligned, p, zero_to_one_bias, col_concentration, seed, {}};
  Rng cell_rng(derive_seed(seed, {0xFA17ULL}));
  Rng stuck_rng(derive_seed(seed, {0x57C4ULL}));
  const std::uint64_t cells = static_cast<std::uint64_t>(layout.rows()) * chosen_count;
  bernoulli_subset(cell_rng, cells, in_column_p, [&](std::uint64_t i) {
    const std::uint64_t addr = (i / chosen_count) * cols + columns[i % chosen_count];
    map.entries.push_back({addr, static_cast<std::uint8_t>(stuck_rng.bernoulli(zero_to_one_bias) ? 1 : 0)});
  });
  return map;
}

const char* to_string(FaultSemantics s) { return s == FaultSemantics::stuck_at ? "stuck_at" : "bit_flip"; }

FaultSemantics fault_semantics_from_string(const std::string& s) {
  if (s == "stuck_at") return FaultSemantics::stuck_at;
  if (s == "bit_flip") return FaultSemantics::bit_flip;
  throw ConfigError("unknown fault semantics '" + s + "' (expected stuck_at or bit_flip)");
}

// ---------------------------------------------------------------------------
// Injection
// ---------------------------------------------------------------------------

namespace {

std::int8_t corrupt_code(std::int8_t code, unsigned bit, std::uint8_t stuck, FaultSemantics sem) {
  auto bits = static_cast<std::uint8_t>(code);
  const auto mask = static_cast<std::uint8_t>(1u << bit);
  if (sem == FaultSemantics::bit_flip) {
    bits ^= mask;
  } else if (stuck) {
    bits |= mask;
  } else {
    bits &= static_cast<std::uint8_t>(~mask);
  }
  return static_cast<std::int8_t>(bits);
}

}  // namespace

std::vector<QuantizedLayer> apply_fault_map(std::span<const QuantizedLayer> layers, const MemoryLayout& layout,
                                            const FaultMap& map, FaultSemantics semantics) {
  if (layout.layer_code_counts().size() != layers.size())
    throw IntegrityError("memory layout does not describe these layers");
  for (std::size_t i = 0; i < layers.size(); ++i)
    if (layout.layer_code_counts()[i] != layers[i].codes.size())
      throw IntegrityError("memory layout code count mismatch at layer " + std::to_string(i));

  std::vector<QuantizedLayer> out(layers.begin(), layers.end());
  MemoryLayout::Location loc{};
  for (const auto& e : map.entries) {
    if (!layout.locate(e.address, loc)) continue;  // padding bit past the last code
    auto& code = out[loc.layer].codes[loc.code];
    code = corrupt_code(code, loc.bit, e.stuck_value, semantics);
  }
  return out;
}

std::vector<QuantizedLayer> quantize_network(const QNetwork& net, QuantOptions opts) {
  std::vector<QuantizedLayer> q;
  q.reserve(net.layers().size());
  for (const auto& l : net.layers()) q.push_back(quantize_layer(l, opts));
  return q;
}

QNetwork dequantize_network(std::span<const QuantizedLayer> layers) {
  std::vector<DenseLayer> dense;
  dense.reserve(layers.size());
  for (const auto& q : layers) dense.push_back(dequantize_layer(q));
  return QNetwork(std::move(dense));
}

QNetwork berr(const QNetwork& net, const FaultMap& map, const FaultModel& model) {
  if (!net.all_finite()) throw NumericalError("cannot inject faults into a non-finite network");
  const auto q = quantize_network(net, model.quant());
  // The map fixes the array geometry; the network's codes must fit inside it.
  const auto needed = MemoryLayout::for_codes(q, map.cols ? map.cols : model.cols);
  if (map.rows < needed.rows())
    throw IntegrityError("fault map covers " + std::to_string(map.total_bits()) + " bits, network needs " +
                         std::to_string(8 * needed.code_count()));
  if (map.entries.empty()) return dequantize_network(q);
  const MemoryLayout layout(map.rows, map.cols, needed.layer_code_counts());
  const auto corrupted = apply_fault_map(q, layout, map, model.semantics);
  return dequantize_network(corrupted);
}

QNetwork berr(const QNetwork& net, double p, std::uint64_t seed, const FaultModel& model) {
  const auto layout = model.layout_for(net);
  const auto map = sample_fault_map(layout, p, seed, model.stuck_one_prob);
  return berr(net, map, model);
}

ActivationFaultInjector::ActivationFaultInjector(std::span<const std::size_t> hidden_widths, double p,
                                                 std::uint64_t seed, const FaultModel& model)
    : semantics_(model.semantics) {
  check_probability(p, "activation fault rate");
  for (std::size_t i = 0; i < hidden_widths.size(); ++i) {
    Region r{hidden_widths[i], {}};
    const std::uint64_t bits = 8ULL * r.width;
    Rng rng(derive_seed(seed, {0xAC7ULL, i}));
    Rng stuck_rng(derive_seed(seed, {0xAC8ULL, i}));
    bernoulli_subset(rng, bits, p, [&](std::uint64_t addr) {
      r.entries.push_back({addr, static_cast<std::uint8_t>(stuck_rng.bernoulli(model.stuck_one_prob) ? 1 : 0)});
    });
    regions_.push_back(std::move(r));
  }
}

ActivationFaultInjector ActivationFaultInjector::for_network(const QNetwork& net, double p, std::uint64_t seed,
                                                             const FaultModel& model) {
  std::vector<std::size_t> widths;
  const auto& ls = net.layers();
  for (std::size_t i = 0; i + 1 < ls.size(); ++i) widths.push_back(ls[i].out);
  return ActivationFaultInjector(widths, p, seed, model);
}

void ActivationFaultInjector::apply(std::size_t hidden_index, std::span<double> activations) const {
  if (hidden_index >= regions_.size()) return;
  const auto& region = regions_[hidden_index];
  if (activations.size() != region.width) throw ShapeError("activation width does not match injector region");
  if (region.entries.empty()) return;
  double max_abs = 0.0;
  for (double a : activations) max_abs = std::max(max_abs, std::fabs(a));
  const double scale = max_abs > 0.0 ? max_abs / 127.0 : 1.0;
  std::vector<std::int8_t> codes(activations.size());
  for (std::size_t i = 0; i < codes.size(); ++i) codes[i] = quantize_value(activations[i], scale);
  for (const auto& e : region.entries) {
    auto& c = codes[e.address / 8];
    c = corrupt_code(c, static_cast<unsigned>(e.address % 8), e.stuck_value, semantics_);
  }
  for (std::size_t i = 0; i < codes.size(); ++i) activations[i] = static_cast<double>(codes[i]) * scale;
}

std::size_t ActivationFaultInjector::fault_count() const {
  std::size_t n = 0;
  for (const auto& r : regions_) n += r.entries.size();
  return n;
}

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

std::string format_fault_map(const FaultMap& map) {
  std::ostringstream os;
  os << "# berry fault map: " << map.entries.size() << " faulty cells\n";
  os << "rows=" << map.rows << "\n";
  os << "cols=" << map.cols << "\n";
  for (const auto& e : map.entries) os << e.address << ',' << static_cast<int>(e.stuck_value) << '\n';
  return os.str();
}

FaultMap parse_fault_map(const std::string& text, const std::string& origin) {
  FaultMap map;
  map.source.pattern = FaultPattern::profiled;
  map.source.path = origin;
  bool have_rows = false, have_cols = false;
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto where = origin + ":" + std::to_string(lineno);
    if (t.rfind("rows=", 0) == 0) {
      map.rows = parse_u64(trim(t.substr(5)), where);
      have_rows = true;
      continue;
    }
    if (t.rfind("cols=", 0) == 0) {
      map.cols = parse_u64(trim(t.substr(5)), where);
      have_cols = true;
      continue;
    }
    if (!have_rows || !have_cols) throw ConfigError(where + ": rows= and cols= must precede fault entries");
    const auto cells = split(t, ',');
    if (cells.size() != 2) throw ConfigError(where + ": expected 'bit_address,stuck_value'");
    const auto addr = parse_u64(cells[0], where);
    const auto stuck = parse_u64(cells[1], where);
    if (stuck > 1) throw ConfigError(where + ": stuck value must be 0 or 1");
    if (addr >= map.total_bits()) throw ConfigError(where + ": address outside rows x cols");
    if (!map.entries.empty() && addr <= map.entries.back().address)
      throw ConfigError(where + ": addresses must be unique and ascending");
    map.entries.push_back({addr, static_cast<std::uint8_t>(stuck)});
  }
  if (!have_rows || !have_cols || map.rows == 0 || map.cols == 0)
    throw ConfigError(origin + ": missing rows= or cols= header");
  if (map.total_bits() > 0) map.source.p = static_cast<double>(map.entries.size()) / static_cast<double>(map.total_bits());
  return map;
}

void write_fault_map(const std::filesystem::path& path, const FaultMap& map) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw UsageError("cannot open fault map for writing: " + path.string());
  f << format_fault_map(map);
}

FaultMap read_fault_map(const std::filesystem::path& path) { return parse_fault_map(read_text(path), path.string()); }

FaultMapSummary summarize(const FaultMap& map) {
  FaultMapSummary s;
  s.count = map.entries.size();
  s.total_bits = map.total_bits();
  s.empirical_rate = s.total_bits ? static_cast<double>(s.count) / static_cast<double>(s.total_bits) : 0.0;
  s.column_histogram.assign(map.cols, 0);
  std::uint64_t ones = 0;
  for (const auto& e : map.entries) {
    if (map.cols) ++s.column_histogram[e.address % map.cols];
    ones += e.stuck_value;
  }
  s.stuck_one_fraction = s.count ? static_cast<double>(ones) / static_cast<double>(s.count) : 0.0;
  s.faulty_columns = static_cast<std::size_t>(
      std::count_if(s.column_histogram.begin(), s.column_histogram.end(), [](auto c) { return c > 0; }));
  return s;
}

}  // namespace berry
