#include <zlib.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "pinn/net.hpp"

namespace pinn::net {

namespace {

constexpr std::uint8_t kMagic[4] = {'P', 'I', 'N', 'N'};

class Writer {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  std::vector<std::uint8_t>& bytes() { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint8_t u8() {
    need(1);
    return bytes_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_++]) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) {
      throw ArchiveError(ArchiveError::Kind::kCorrupt, "weight archive is truncated");
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  crc = ::crc32(crc, bytes.data(), static_cast<uInt>(bytes.size()));
  return static_cast<std::uint32_t>(crc);
}

}  // namespace

std::vector<std::uint8_t> encode_archive(const MLPSpec& spec, const WeightStore& weights) {
  Writer w;
  for (std::uint8_t b : kMagic) w.u8(b);
  w.u32(kArchiveVersion);
  w.u32(static_cast<std::uint32_t>(spec.input_width));
  w.u32(static_cast<std::uint32_t>(spec.hidden_layers.size()));
  for (std::size_t width : spec.hidden_layers) w.u32(static_cast<std::uint32_t>(width));
  w.u8(static_cast<std::uint8_t>(spec.activation));
  w.u32(static_cast<std::uint32_t>(spec.output_width));
  w.u64(weights.seed);
  w.u64(weights.flat.size());
  for (double v : weights.flat) w.f64(v);
  const std::uint32_t crc = crc32_of(w.bytes());
  w.u32(crc);
  return std::move(w.bytes());
}

Archive decode_archive(std::span<const std::uint8_t> bytes) {
  using Kind = ArchiveError::Kind;
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw ArchiveError(Kind::kCorrupt, "not a weight archive (missing PINN magic bytes)");
  }
  Reader header(bytes.subspan(4));
  const std::uint32_t version = header.u32();
  if (version != kArchiveVersion) {
    throw ArchiveError(Kind::kVersionMismatch,
                       "weight archive format version " + std::to_string(version) +
                           " is not supported (supported versions: " +
                           std::to_string(kArchiveVersion) + ")");
  }
  if (bytes.size() < 12) throw ArchiveError(Kind::kCorrupt, "weight archive is truncated");
  const auto body = bytes.first(bytes.size() - 4);
  Reader trailer(bytes.last(4));
  if (trailer.u32() != crc32_of(body)) {
    throw ArchiveError(Kind::kCorrupt, "weight archive checksum mismatch (corrupt or truncated)");
  }

  Reader r(body.subspan(8));
  Archive out;
  out.spec.input_width = r.u32();
  const std::uint32_t hidden = r.u32();
  if (hidden > r.remaining() / 4) throw ArchiveError(Kind::kLayout, "implausible layer count");
  for (std::uint32_t i = 0; i < hidden; ++i) out.spec.hidden_layers.push_back(r.u32());
  const std::uint8_t activation = r.u8();
  if (activation > 1) throw ArchiveError(Kind::kLayout, "unknown activation code");
  out.spec.activation = static_cast<Activation>(activation);
  out.spec.output_width = r.u32();
  out.weights.seed = r.u64();
  const std::uint64_t count = r.u64();
  try {
    out.spec.validate();
  } catch (const Error& e) {
    throw ArchiveError(Kind::kLayout, std::string("archived network spec is invalid: ") + e.what());
  }
  if (count != parameter_count(out.spec)) {
    throw ArchiveError(Kind::kLayout, "archive holds " + std::to_string(count) +
                                          " weights but its network spec needs " +
                                          std::to_string(parameter_count(out.spec)));
  }
  if (r.remaining() != count * 8) {
    throw ArchiveError(Kind::kLayout, "archive weight block size does not match its count");
  }
  out.weights.flat.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    const double v = r.f64();
    if (!std::isfinite(v)) throw ArchiveError(Kind::kLayout, "archive holds a non-finite weight");
    out.weights.flat.push_back(v);
  }
  out.weights.layout = make_layout(out.spec);
  return out;
}

void save(const WeightStore& weights, const MLPSpec& spec, const std::filesystem::path& path) {
  if (weights.flat.size() != parameter_count(spec) || weights.layout != make_layout(spec)) {
    throw ArchiveError(ArchiveError::Kind::kLayout, "weights do not match the network spec");
  }
  const auto bytes = encode_archive(spec, weights);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ArchiveError(ArchiveError::Kind::kIo, "cannot open " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ArchiveError(ArchiveError::Kind::kIo, "cannot write " + path.string());
}

Archive load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArchiveError(ArchiveError::Kind::kIo, "cannot open " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
  return decode_archive(bytes);
}

}  // namespace pinn::net
