#include "spad/pipeline.hpp"

#include <algorithm>
#include <thread>

#include <json.hpp>

#include "spad/rng.hpp"
#include "spad/scene.hpp"

namespace spad {

void ByteChannel::write(std::span<const std::uint8_t> bytes) {
  {
    std::lock_guard lock(mu_);
    buf_.insert(buf_.end(), bytes.begin(), bytes.end());
  }
  cv_.notify_all();
}

void ByteChannel::close() {
  {
    std::lock_guard lock(mu_);
    closed_ = true;
  }
  cv_.notify_all();
}

std::vector<std::uint8_t> ByteChannel::read(std::size_t max_bytes) {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] { return !buf_.empty() || closed_; });
  const std::size_t n = std::min(max_bytes, buf_.size());
  std::vector<std::uint8_t> out(buf_.begin(), buf_.begin() + static_cast<std::ptrdiff_t>(n));
  buf_.erase(buf_.begin(), buf_.begin() + static_cast<std::ptrdiff_t>(n));
  return out;
}

CloudModels prepare_cloud_models(const VitWeights& weights, const ExperimentConfig& cfg) {
  if (!cfg.behavior_probe.empty() && !cfg.count_probe.empty()) {
    return {load_probe(cfg.behavior_probe), load_probe(cfg.count_probe)};
  }
  const auto scenes = generate_dataset(cfg.dataset_size, cfg.data_seed, cfg.psz_rect);
  std::vector<LabeledEmbedding> behavior, count;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const auto p = protect_scene(weights, scenes[i], cfg, derive_seed(cfg.noise.seed, i));
    behavior.push_back({p.received, static_cast<std::size_t>(scenes[i].labels.behavior)});
    count.push_back({p.received, scenes[i].labels.person_count});
  }
  return {train_probe(behavior, kBehaviorLabels, cfg.probe).probe,
          train_probe(count, kCountLabels, cfg.probe).probe};
}

std::string error_record_json(FrameError error, std::uint64_t stream_offset) {
  nlohmann::ordered_json j;
  j["error"] = std::string(to_string(error));
  j["stream_offset"] = stream_offset;
  return j.dump();
}

WireFrame edge_frame(const VitWeights& weights, const ExperimentConfig& cfg, std::uint64_t k) {
  // Simulator noise streams live in a separate seed space from the experiment's.
  const Scene scene = generate_scene(random_scene_spec(derive_seed(cfg.sim_seed, k), cfg.psz_rect));
  const ProtectedFeature p =
      protect_scene(weights, scene, cfg, derive_seed(cfg.noise.seed ^ cfg.sim_seed, k));
  WireFrame f;
  f.flags = cfg.noise.sigma > 0.0 ? kFlagNoise : 0;
  f.frame_id = k;
  f.timestamp_ms = k * cfg.frame_interval_ms;
  f.sigma = static_cast<float>(cfg.noise.sigma);
  f.scale = p.quantized.scale;
  f.offset = p.quantized.offset;
  f.payload = p.quantized.bytes;
  return f;
}

std::vector<std::string> simulate_pipeline(const ExperimentConfig& cfg, const VitWeights& weights,
                                           const CloudModels& models, std::size_t chunk_bytes) {
  ByteChannel channel;
  std::vector<std::string> lines;

  std::thread edge([&] {
    for (std::uint64_t k = 0; k < cfg.frames; ++k) {
      auto bytes = encode_frame(edge_frame(weights, cfg, k));
      if (cfg.corrupt_frame >= 0 && static_cast<std::uint64_t>(cfg.corrupt_frame) == k) {
        bytes[kFrameHeaderSize] ^= 0x10;  // one payload bit, in transit
      }
      for (std::size_t off = 0; off < bytes.size(); off += chunk_bytes) {
        const std::size_t n = std::min(chunk_bytes, bytes.size() - off);
        channel.write(std::span(bytes).subspan(off, n));
      }
    }
    channel.close();
  });

  std::thread cloud([&] {
    StreamDecoder decoder;
    auto emit = [&](const StreamDecoder::Item& item) {
      if (!item.frame) {
        lines.push_back(error_record_json(item.error, item.stream_offset));
        return;
      }
      const auto e = dequantize(item.frame->scale, item.frame->offset, item.frame->payload);
      lines.push_back(to_json(build_report(*item.frame, classify(models.behavior, e),
                                           classify(models.count, e))));
    };
    for (;;) {
      const auto chunk = channel.read(4096);
      if (chunk.empty()) break;
      decoder.feed(chunk);
      while (auto item = decoder.next()) emit(*item);
    }
    if (auto tail = decoder.finish()) emit(*tail);
  });

  edge.join();
  cloud.join();
  return lines;
}

}  // namespace spad
