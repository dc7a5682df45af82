#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "berry/qnet.hpp"

namespace berry {

// ---------------------------------------------------------------------------
// Voltage -> bit error rate -> energy curve
// ---------------------------------------------------------------------------

struct CurvePoint {
  double v_norm = 1.0;        // supply voltage relative to V_min
  double ber = 0.0;           // per-bit error probability (not percent)
  double energy_scale = 1.0;  // processing energy savings vs the 1 V reference
  bool operator==(const CurvePoint&) const = default;
};

/// Knots ordered by strictly decreasing voltage. BER is interpolated
/// log-linearly between non-zero knots (linearly when one end is zero) and
/// energy scale linearly; both clamp outside the knot range.
class VoltageCurve {
 public:
  explicit VoltageCurve(std::vector<CurvePoint> points);

  /// SRAM profile bundled with the project: 13 measured low-voltage knots
  /// plus the error-free reference knot at v_norm = 1.
  static VoltageCurve bundled();
  static VoltageCurve from_csv(const std::filesystem::path& path);
  static VoltageCurve from_csv_text(const std::string& text);
  std::string to_csv() const;

  const std::vector<CurvePoint>& points() const { return points_; }
  bool operator==(const VoltageCurve&) const = default;

 private:
  std::vector<CurvePoint> points_;
};

double ber_at_voltage(const VoltageCurve& curve, double v_norm);
double energy_scale_at_voltage(const VoltageCurve& curve, double v_norm);

/// Voltages of the bundled curve, descending, starting at the 1.0 reference.
std::vector<double> bundled_voltage_grid();

// ---------------------------------------------------------------------------
// Memory layout and fault maps
// ---------------------------------------------------------------------------

/// Linear placement of 8-bit codes in an SRAM array of `rows` x `cols` bits.
/// Codes are laid out layer-major (weights row-major, then biases); bit b of
/// code k lives at address 8k + b with bit 0 the LSB. Row r, column c is
/// address r * cols + c.
class MemoryLayout {
 public:
  MemoryLayout(std::size_t rows, std::size_t cols, std::vector<std::size_t> layer_code_counts = {});

  /// Smallest layout with `cols` columns holding every code of `layers`.
  static MemoryLayout for_codes(std::span<const QuantizedLayer> layers, std::size_t cols = 64);
  static MemoryLayout for_network(const QNetwork& net, std::size_t cols = 64, QuantOptions opts = {});

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::uint64_t total_bits() const { return static_cast<std::uint64_t>(rows_) * cols_; }
  std::size_t code_count() const { return code_count_; }
  const std::vector<std::size_t>& layer_code_counts() const { return layer_codes_; }

  std::uint64_t address(std::size_t layer, std::size_t code, unsigned bit) const;

  struct Location {
    std::size_t layer;
    std::size_t code;
    unsigned bit;
  };
  /// False when the address is inside the array but past the last code.
  bool locate(std::uint64_t address, Location& loc) const;

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<std::size_t> layer_codes_;
  std::vector<std::size_t> layer_offsets_;
  std::size_t code_count_ = 0;
};

struct FaultEntry {
  std::uint64_t address = 0;
  std::uint8_t stuck_value = 0;
  bool operator==(const FaultEntry&) const = default;
};

enum class FaultPattern { sampled, column_aligned, profiled };

struct FaultSource {
  FaultPattern pattern = FaultPattern::sampled;
  double p = 0.0;
  double stuck_one_prob = 0.5;
  double col_concentration = 1.0;
  std::uint64_t seed = 0;
  std::string path;
};

/// Persistent fault assignment. Entries are unique and sorted by address.
struct FaultMap {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<FaultEntry> entries;
  FaultSource source;

  std::uint64_t total_bits() const { return static_cast<std::uint64_t>(rows) * cols; }
  bool operator==(const FaultMap& o) const { return rows == o.rows && cols == o.cols && entries == o.entries; }
};

/// Each cell faulty independently with probability p; stuck value 1 with
/// probability `stuck_one_prob`.
FaultMap sample_fault_map(const MemoryLayout& layout, double p, std::uint64_t seed, double stuck_one_prob = 0.5);

/// Faults confined to a random subset of cols / col_concentration columns,
/// with the in-column rate raised so the global expected rate stays p.
FaultMap column_aligned_map(const MemoryLayout& layout, double p, double zero_to_one_bias,
                            double col_concentration, std::uint64_t seed);

enum class FaultSemantics {
  stuck_at,  // cell reads its stuck value
  bit_flip,  // cell reads the complement of what was written
};

const char* to_string(FaultSemantics s);
FaultSemantics fault_semantics_from_string(const std::string& s);

/// Pure: returns corrupted copies of `layers`. Throws IntegrityError when an
/// entry lies outside the layout or the layout does not describe `layers`.
std::vector<QuantizedLayer> apply_fault_map(std::span<const QuantizedLayer> layers, const MemoryLayout& layout,
                                            const FaultMap& map,
                                            FaultSemantics semantics = FaultSemantics::stuck_at);

std::vector<QuantizedLayer> quantize_network(const QNetwork& net, QuantOptions opts = {});
QNetwork dequantize_network(std::span<const QuantizedLayer> layers);

struct FaultModel {
  FaultSemantics semantics = FaultSemantics::stuck_at;
  double stuck_one_prob = 0.5;
  bool include_biases = true;
  std::size_t cols = 64;

  QuantOptions quant() const { return {include_biases}; }
  MemoryLayout layout_for(const QNetwork& net) const { return MemoryLayout::for_network(net, cols, quant()); }
};

/// BErr with a fixed (persistent) map: quantize, corrupt, dequantize.
QNetwork berr(const QNetwork& net, const FaultMap& map, const FaultModel& model = {});
/// BErr with a freshly sampled random map at rate p.
QNetwork berr(const QNetwork& net, double p, std::uint64_t seed, const FaultModel& model = {});

/// Persistent faults in the hidden activation buffers. Each hidden layer owns
/// a width x 8 bit region; activations are quantized per vector with the same
/// symmetric scheme as weights before the stuck bits are applied.
class ActivationFaultInjector : public ActivationTransform {
 public:
  ActivationFaultInjector(std::span<const std::size_t> hidden_widths, double p, std::uint64_t seed,
                          const FaultModel& model = {});
  static ActivationFaultInjector for_network(const QNetwork& net, double p, std::uint64_t seed,
                                             const FaultModel& model = {});

  void apply(std::size_t hidden_index, std::span<double> activations) const override;
  std::size_t fault_count() const;

 private:
  struct Region {
    std::size_t width;
    std::vector<FaultEntry> entries;  // addresses relative to the region
  };
  std::vector<Region> regions_;
  FaultSemantics semantics_;
};

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

std::string format_fault_map(const FaultMap& map);
FaultMap parse_fault_map(const std::string& text, const std::string& origin = "<string>");
void write_fault_map(const std::filesystem::path& path, const FaultMap& map);
FaultMap read_fault_map(const std::filesystem::path& path);

struct FaultMapSummary {
  std::uint64_t count = 0;
  std::uint64_t total_bits = 0;
  double empirical_rate = 0.0;
  double stuck_one_fraction = 0.0;
  std::size_t faulty_columns = 0;
  std::vector<std::uint64_t> column_histogram;
};

FaultMapSummary summarize(const FaultMap& map);

}  // namespace berry
