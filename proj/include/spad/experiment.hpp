#ifndef SPAD_EXPERIMENT_HPP
#define SPAD_EXPERIMENT_HPP

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>

#include "spad/channel.hpp"
#include "spad/cloud.hpp"
#include "spad/optimizer.hpp"
#include "spad/psz.hpp"
#include "spad/scene.hpp"
#include "spad/vit.hpp"

namespace spad {

// Everything the experiment and the simulator need. Loaded from a flat
// key=value file; keys match the field names (see docs/FORMATS.md).
struct ExperimentConfig {
  std::size_t dataset_size = 200;
  std::uint64_t data_seed = 2024;
  std::uint64_t split_seed = 99;
  double train_fraction = 0.8;
  PixelRect psz_rect = kDefaultPszRect;
  double min_overlap = 0.0;
  SpadConfig spad;  // spad.seed is the backbone weight seed
  NoiseConfig noise;
  ProbeTrainConfig probe;
  double ridge = 1e-3;

  // Simulator settings.
  std::size_t frames = 20;
  std::uint64_t sim_seed = 11;
  std::uint64_t frame_interval_ms = 100;
  long long corrupt_frame = -1;  // flip one payload bit of this frame in transit
  std::string behavior_probe;    // optional probe files; trained on the fly when empty
  std::string count_probe;
  std::string weights;           // optional backbone weights file
};

// Applies key=value lines (blank lines and '#' comments ignored) onto cfg.
// Throws std::invalid_argument on unknown keys or unparsable values.
// Plain decimal or a fraction such as "16/255". Throws std::invalid_argument.
double parse_fraction(const std::string& text);

void apply_config(ExperimentConfig& cfg, std::istream& in);
ExperimentConfig load_config(const std::string& path);
std::map<std::string, std::string> config_echo(const ExperimentConfig& cfg);

// The backbone named by cfg: the weights file when set, else init_weights(seed).
VitWeights backbone_for(const ExperimentConfig& cfg);

struct PairedMetric {
  double clean = 0.0;
  double protected_ = 0.0;
};

struct MetricsReport {
  PairedMetric behavior_accuracy;
  PairedMetric identity_accuracy;
  PairedMetric count_accuracy;
  double psz_mass_before = 0.0;
  double psz_mass_after = 0.0;
  PairedMetric inversion_psnr;  // dB inside the PSZ, test split
  std::size_t train_size = 0;
  std::size_t test_size = 0;
  std::map<std::string, std::string> config;
};

std::string to_json(const MetricsReport& m);
MetricsReport metrics_from_json(const std::string& text);
// Plain-text table for terminals.
std::string render_table(const MetricsReport& m);

// Edge-side protection for one frame: SPA-D, embedding, Gaussian noise and
// the 8-bit wire quantization.
struct ProtectedFeature {
  QuantizedEmbedding quantized;
  FeatureEmbedding received;  // dequantized, as seen by the cloud
  double psz_mass_before = 0.0;
  double psz_mass_after = 0.0;
};

ProtectedFeature protect_scene(const VitWeights& weights, const Scene& scene,
                               const ExperimentConfig& cfg, std::uint64_t noise_seed);
// Same channel without SPA-D or noise.
FeatureEmbedding clean_feature(const VitWeights& weights, const Scene& scene);

// Generate, split 80/20, embed both pipelines, fit probes and ridge
// inverters per pipeline, evaluate on the test split.
MetricsReport run_experiment(const ExperimentConfig& cfg);

}  // namespace spad

#endif  // SPAD_EXPERIMENT_HPP
