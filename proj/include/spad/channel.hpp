#ifndef SPAD_CHANNEL_HPP
#define SPAD_CHANNEL_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "spad/vit.hpp"

namespace spad {

using FeatureEmbedding = std::vector<double>;

struct NoiseConfig {
  double sigma = 0.05;
  std::uint64_t seed = 0;
};

FeatureEmbedding extract_embedding(const ForwardTrace& trace);

// e + n with n_i ~ N(0, sigma^2) drawn in order from Rng(cfg.seed).
// Throws std::invalid_argument on negative or non-finite sigma.
FeatureEmbedding inject_noise(const FeatureEmbedding& e, const NoiseConfig& cfg);

struct QuantizedEmbedding {
  float scale = 1.0f;
  float offset = 0.0f;
  std::vector<std::uint8_t> bytes;
};

// 8-bit affine quantization. offset = min(e), scale = (max - min) / 255 (1 if
// constant); both are rounded to float32 first so edge and cloud dequantize
// identically. q_i = round_half_away((e_i - offset) / scale) clamped to [0, 255].
QuantizedEmbedding quantize(const FeatureEmbedding& e);
FeatureEmbedding dequantize(float scale, float offset, std::span<const std::uint8_t> bytes);
inline FeatureEmbedding dequantize(const QuantizedEmbedding& q) {
  return dequantize(q.scale, q.offset, q.bytes);
}

// CRC-32/IEEE: reflected polynomial 0xEDB88320, init and final xor 0xFFFFFFFF.
std::uint32_t crc32(std::span<const std::uint8_t> bytes);
inline std::uint32_t crc32(std::string_view s) {
  return crc32(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
}

inline constexpr std::uint8_t kFrameMagic[4] = {0x53, 0x50, 0x41, 0x44};  // "SPAD"
inline constexpr std::uint8_t kFrameVersion = 1;
inline constexpr std::uint8_t kFlagNoise = 0x01;
// magic 4, version 1, flags 1, frame_id 8, timestamp 8, dim 4, sigma/scale/offset 12
inline constexpr std::size_t kFrameHeaderSize = 38;
inline constexpr std::size_t kFrameCrcSize = 4;
// Upper bound on dim accepted by decoders; larger values are treated as corruption.
inline constexpr std::uint32_t kMaxFrameDim = 1u << 16;

struct WireFrame {
  std::uint8_t flags = 0;
  std::uint64_t frame_id = 0;
  std::uint64_t timestamp_ms = 0;
  float sigma = 0.0f;
  float scale = 1.0f;
  float offset = 0.0f;
  std::vector<std::uint8_t> payload;

  friend bool operator==(const WireFrame&, const WireFrame&) = default;
};

enum class FrameError {
  None,
  MagicMismatch,
  VersionUnsupported,
  LengthInvalid,
  CrcFail,
};

std::string_view to_string(FrameError e);

std::vector<std::uint8_t> encode_frame(const WireFrame& frame);

struct DecodeResult {
  std::optional<WireFrame> frame;
  FrameError error = FrameError::None;
  bool ok() const { return error == FrameError::None; }
};

// Decodes exactly one frame occupying all of `bytes`.
DecodeResult decode_frame(std::span<const std::uint8_t> bytes);

// Incremental decoder for a concatenated frame stream.
//
// Feed bytes as they arrive, then call next() until it returns nothing. On a
// magic mismatch the decoder skips ahead to the next "SPAD" marker; a frame
// that fails its CRC is consumed whole using its declared length. finish()
// reports a truncated trailing frame as LengthInvalid.
class StreamDecoder {
 public:
  struct Item {
    std::optional<WireFrame> frame;
    FrameError error = FrameError::None;
    std::uint64_t stream_offset = 0;  // byte offset of the item within the stream
  };

  void feed(std::span<const std::uint8_t> bytes);
  std::optional<Item> next();
  std::optional<Item> finish();

 private:
  std::vector<std::uint8_t> buf_;
  std::size_t pos_ = 0;
  std::uint64_t consumed_ = 0;
  void compact();
};

}  // namespace spad

#endif  // SPAD_CHANNEL_HPP
