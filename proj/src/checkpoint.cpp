#include "berry/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "berry/error.hpp"

namespace berry {

namespace {

constexpr char kMagic[8] = {'B', 'E', 'R', 'R', 'Y', 'Q', 'N', '\0'};

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  static_assert(std::is_integral_v<T>);
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>((value >> (8 * i)) & 0xFF));
}

void put_f32(std::vector<std::uint8_t>& out, float v) { put_le(out, std::bit_cast<std::uint32_t>(v)); }

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  template <typename T>
  T get_le() {
    need(sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(bytes_[pos_ + i]) << (8 * i);
    pos_ += sizeof(T);
    return v;
  }
  float get_f32() { return std::bit_cast<float>(get_le<std::uint32_t>()); }

  void expect_magic() {
    need(sizeof(kMagic));
    if (std::memcmp(bytes_.data() + pos_, kMagic, sizeof(kMagic)) != 0)
      throw IntegrityError("checkpoint: bad magic");
    pos_ += sizeof(kMagic);
  }
  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw IntegrityError("checkpoint: truncated file");
  }
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put_le<std::uint32_t>(out, Checkpoint::kFormatVersion);
  const auto arch = ckpt.net.arch();
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(arch.size()));
  for (auto w : arch) put_le<std::uint32_t>(out, static_cast<std::uint32_t>(w));
  put_le<std::uint64_t>(out, ckpt.seed);
  put_le<std::uint64_t>(out, ckpt.step);
  for (const auto& l : ckpt.net.layers()) {
    for (float w : l.weights) put_f32(out, w);
    for (float b : l.biases) put_f32(out, b);
  }
  return out;
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  Reader in(bytes);
  in.expect_magic();
  const auto version = in.get_le<std::uint32_t>();
  if (version != Checkpoint::kFormatVersion)
    throw IntegrityError("checkpoint: unsupported format version " + std::to_string(version));
  const auto count = in.get_le<std::uint32_t>();
  if (count < 2 || count > 64) throw IntegrityError("checkpoint: implausible layer count");
  std::vector<std::size_t> arch(count);
  for (auto& w : arch) {
    w = in.get_le<std::uint32_t>();
    if (w == 0 || w > (1u << 20)) throw IntegrityError("checkpoint: implausible layer width");
  }
  Checkpoint ckpt;
  ckpt.seed = in.get_le<std::uint64_t>();
  ckpt.step = in.get_le<std::uint64_t>();
  std::vector<DenseLayer> layers;
  for (std::size_t i = 0; i + 1 < arch.size(); ++i) {
    DenseLayer l;
    l.in = arch[i];
    l.out = arch[i + 1];
    l.weights.resize(l.in * l.out);
    l.biases.resize(l.out);
    for (auto& w : l.weights) w = in.get_f32();
    for (auto& b : l.biases) b = in.get_f32();
    layers.push_back(std::move(l));
  }
  if (!in.at_end()) throw IntegrityError("checkpoint: trailing bytes after last layer");
  ckpt.net = QNetwork(std::move(layers));
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const auto bytes = encode_checkpoint(ckpt);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw UsageError("cannot open checkpoint for writing: " + path.string());
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw UsageError("failed writing checkpoint: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw UsageError("cannot open checkpoint: " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace berry
