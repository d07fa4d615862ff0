#ifndef SPAD_PIPELINE_HPP
#define SPAD_PIPELINE_HPP

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "spad/cloud.hpp"
#include "spad/experiment.hpp"

namespace spad {

// Ordered, reliable in-process byte stream between the edge and cloud agents.
class ByteChannel {
 public:
  void write(std::span<const std::uint8_t> bytes);
  void close();
  // Blocks until bytes are available or the channel is closed and drained;
  // returns an empty vector only in the latter case.
  std::vector<std::uint8_t> read(std::size_t max_bytes);

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::uint8_t> buf_;
  bool closed_ = false;
};

struct CloudModels {
  ProbeWeights behavior;
  ProbeWeights count;
};

// Fits the behavior and count probes on protected embeddings of the
// configured training dataset, or loads them when the config names files.
CloudModels prepare_cloud_models(const VitWeights& weights, const ExperimentConfig& cfg);

// Error record emitted in place of a report when a frame fails to decode.
std::string error_record_json(FrameError error, std::uint64_t stream_offset);

// Runs the edge agent (render, SPA-D, embed, noise, quantize, encode) and the
// cloud agent (decode, classify, report) on separate threads joined only by
// a ByteChannel. Returns one JSON line per frame in arrival order.
std::vector<std::string> simulate_pipeline(const ExperimentConfig& cfg, const VitWeights& weights,
                                           const CloudModels& models,
                                           std::size_t chunk_bytes = 29);

// The frame the edge agent emits for frame index k.
WireFrame edge_frame(const VitWeights& weights, const ExperimentConfig& cfg, std::uint64_t k);

}  // namespace spad

#endif  // SPAD_PIPELINE_HPP
