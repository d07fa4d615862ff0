#include "spad/channel.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <stdexcept>

#include "spad/rng.hpp"

namespace spad {

namespace {

constexpr std::array<std::uint32_t, 256> make_crc_table() {
  std::array<std::uint32_t, 256> table{};
  for (std::uint32_t i = 0; i < 256; ++i) {
    std::uint32_t c = i;
    for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
    table[i] = c;
  }
  return table;
}

constexpr auto kCrcTable = make_crc_table();

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
  }
}

template <typename T>
T get_le(std::span<const std::uint8_t> bytes, std::size_t at) {
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(T{bytes[at + i]} << (8 * i));
  return v;
}

float get_f32(std::span<const std::uint8_t> bytes, std::size_t at) {
  return std::bit_cast<float>(get_le<std::uint32_t>(bytes, at));
}

bool magic_at(std::span<const std::uint8_t> bytes, std::size_t at) {
  return std::equal(std::begin(kFrameMagic), std::end(kFrameMagic), bytes.begin() + at);
}

// Header checks shared by the one-shot and stream decoders. Requires at
// least kFrameHeaderSize bytes.
FrameError check_header(std::span<const std::uint8_t> bytes) {
  if (!magic_at(bytes, 0)) return FrameError::MagicMismatch;
  if (bytes[4] != kFrameVersion) return FrameError::VersionUnsupported;
  if (get_le<std::uint32_t>(bytes, 22) > kMaxFrameDim) return FrameError::LengthInvalid;
  return FrameError::None;
}

WireFrame parse_body(std::span<const std::uint8_t> bytes) {
  WireFrame f;
  f.flags = bytes[5];
  f.frame_id = get_le<std::uint64_t>(bytes, 6);
  f.timestamp_ms = get_le<std::uint64_t>(bytes, 14);
  const auto dim = get_le<std::uint32_t>(bytes, 22);
  f.sigma = get_f32(bytes, 26);
  f.scale = get_f32(bytes, 30);
  f.offset = get_f32(bytes, 34);
  f.payload.assign(bytes.begin() + kFrameHeaderSize, bytes.begin() + kFrameHeaderSize + dim);
  return f;
}

}  // namespace

FeatureEmbedding extract_embedding(const ForwardTrace& trace) { return trace.cls_embedding; }

FeatureEmbedding inject_noise(const FeatureEmbedding& e, const NoiseConfig& cfg) {
  if (!std::isfinite(cfg.sigma) || cfg.sigma < 0.0) {
    throw std::invalid_argument("noise sigma must be finite and >= 0");
  }
  FeatureEmbedding out = e;
  if (cfg.sigma == 0.0) return out;
  Rng rng(cfg.seed);
  for (auto& v : out) v += cfg.sigma * rng.normal();
  return out;
}

QuantizedEmbedding quantize(const FeatureEmbedding& e) {
  QuantizedEmbedding q;
  q.bytes.resize(e.size());
  if (e.empty()) return q;
  const auto [lo, hi] = std::minmax_element(e.begin(), e.end());
  q.offset = static_cast<float>(*lo);
  q.scale = *hi == *lo ? 1.0f : static_cast<float>((*hi - *lo) / 255.0);
  const double offset = q.offset, scale = q.scale;
  for (std::size_t i = 0; i < e.size(); ++i) {
    // std::round rounds half away from zero.
    const double r = std::round((e[i] - offset) / scale);
    q.bytes[i] = static_cast<std::uint8_t>(std::clamp(r, 0.0, 255.0));
  }
  return q;
}

FeatureEmbedding dequantize(float scale, float offset, std::span<const std::uint8_t> bytes) {
  FeatureEmbedding e(bytes.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    e[i] = static_cast<double>(offset) + static_cast<double>(scale) * bytes[i];
  }
  return e;
}

std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
  std::uint32_t c = 0xFFFFFFFFu;
  for (std::uint8_t b : bytes) c = kCrcTable[(c ^ b) & 0xFFu] ^ (c >> 8);
  return c ^ 0xFFFFFFFFu;
}

std::string_view to_string(FrameError e) {
  switch (e) {
    case FrameError::None: return "OK";
    case FrameError::MagicMismatch: return "MAGIC_MISMATCH";
    case FrameError::VersionUnsupported: return "VERSION_UNSUPPORTED";
    case FrameError::LengthInvalid: return "LENGTH_INVALID";
    case FrameError::CrcFail: return "CRC_FAIL";
  }
  return "UNKNOWN";
}

std::vector<std::uint8_t> encode_frame(const WireFrame& frame) {
  if (frame.payload.size() > kMaxFrameDim) throw std::invalid_argument("frame payload too large");
  std::vector<std::uint8_t> out;
  out.reserve(kFrameHeaderSize + frame.payload.size() + kFrameCrcSize);
  for (std::uint8_t b : kFrameMagic) out.push_back(b);
  out.push_back(kFrameVersion);
  out.push_back(frame.flags);
  put_le(out, frame.frame_id);
  put_le(out, frame.timestamp_ms);
  put_le(out, static_cast<std::uint32_t>(frame.payload.size()));
  put_le(out, std::bit_cast<std::uint32_t>(frame.sigma));
  put_le(out, std::bit_cast<std::uint32_t>(frame.scale));
  put_le(out, std::bit_cast<std::uint32_t>(frame.offset));
  for (std::uint8_t b : frame.payload) out.push_back(b);
  put_le(out, crc32(out));
  return out;
}

DecodeResult decode_frame(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kFrameHeaderSize + kFrameCrcSize) {
    if (bytes.size() >= 4 && !magic_at(bytes, 0)) return {std::nullopt, FrameError::MagicMismatch};
    return {std::nullopt, FrameError::LengthInvalid};
  }
  if (auto err = check_header(bytes); err != FrameError::None) return {std::nullopt, err};
  const auto dim = get_le<std::uint32_t>(bytes, 22);
  if (bytes.size() != kFrameHeaderSize + dim + kFrameCrcSize) {
    return {std::nullopt, FrameError::LengthInvalid};
  }
  const std::size_t body = kFrameHeaderSize + dim;
  if (crc32(bytes.first(body)) != get_le<std::uint32_t>(bytes, body)) {
    return {std::nullopt, FrameError::CrcFail};
  }
  return {parse_body(bytes), FrameError::None};
}

void StreamDecoder::feed(std::span<const std::uint8_t> bytes) {
  buf_.insert(buf_.end(), bytes.begin(), bytes.end());
}

void StreamDecoder::compact() {
  if (pos_ > 4096 && pos_ * 2 > buf_.size()) {
    buf_.erase(buf_.begin(), buf_.begin() + static_cast<std::ptrdiff_t>(pos_));
    pos_ = 0;
  }
}

std::optional<StreamDecoder::Item> StreamDecoder::next() {
  const std::span<const std::uint8_t> avail(buf_.data() + pos_, buf_.size() - pos_);
  if (avail.size() < 4) return std::nullopt;
  const std::uint64_t start = consumed_;
  if (!magic_at(avail, 0)) {
    // Resynchronize on the next magic marker; the skipped bytes form one error item.
    std::size_t skip = 1;
    while (skip + 4 <= avail.size() && !magic_at(avail, skip)) ++skip;
    if (skip + 4 > avail.size()) skip = avail.size() - 3;
    pos_ += skip;
    consumed_ += skip;
    compact();
    return Item{std::nullopt, FrameError::MagicMismatch, start};
  }
  if (avail.size() < kFrameHeaderSize) return std::nullopt;
  if (auto err = check_header(avail); err != FrameError::None) {
    // Drop the marker so the next call searches past it.
    pos_ += 4;
    consumed_ += 4;
    compact();
    return Item{std::nullopt, err, start};
  }
  const std::size_t total = kFrameHeaderSize + get_le<std::uint32_t>(avail, 22) + kFrameCrcSize;
  if (avail.size() < total) return std::nullopt;
  DecodeResult r = decode_frame(avail.first(total));
  pos_ += total;
  consumed_ += total;
  compact();
  return Item{std::move(r.frame), r.error, start};
}

std::optional<StreamDecoder::Item> StreamDecoder::finish() {
  if (pos_ >= buf_.size()) return std::nullopt;
  Item item{std::nullopt, FrameError::LengthInvalid, consumed_};
  consumed_ += buf_.size() - pos_;
  buf_.clear();
  pos_ = 0;
  return item;
}

}  // namespace spad
