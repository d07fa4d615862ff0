#ifndef SPAD_CLOUD_HPP
#define SPAD_CLOUD_HPP

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "spad/channel.hpp"
#include "spad/tensor.hpp"

namespace spad {

inline const std::vector<std::string> kBehaviorLabels = {"normal", "fall", "smoking", "conflict"};
inline const std::vector<std::string> kCountLabels = {"0", "1", "2", "3"};

struct LabeledEmbedding {
  FeatureEmbedding embedding;
  std::size_t label = 0;
};

// Multinomial logistic regression over embeddings.
struct ProbeWeights {
  std::vector<std::string> labels;
  Tensor weight;  // n_classes x dim
  std::vector<double> bias;

  std::size_t classes() const { return labels.size(); }
  std::size_t dim() const { return weight.empty() ? 0 : weight.dim(1); }
};

struct ProbeTrainConfig {
  double lr = 0.1;
  std::uint32_t epochs = 500;
};

struct ProbeFit {
  ProbeWeights probe;
  // Mean cross-entropy before each epoch's update, plus the final value.
  std::vector<double> loss_history;
};

// Full-batch gradient descent on mean cross-entropy from zero weights.
// Throws std::invalid_argument if fewer than two classes appear, a label is
// outside the vocabulary, or embedding lengths differ.
ProbeFit train_probe(std::span<const LabeledEmbedding> examples,
                     const std::vector<std::string>& labels, const ProbeTrainConfig& cfg = {});

std::vector<double> softmax(std::span<const double> logits);

// softmax(W e + b). Throws std::invalid_argument on dimension mismatch.
std::vector<double> classify(const ProbeWeights& probe, std::span<const double> e);

std::size_t argmax(std::span<const double> v);

double probe_accuracy(const ProbeWeights& probe, std::span<const LabeledEmbedding> examples);

// Flat binary: u32 n_classes, u32 dim, each label as u32 length + bytes,
// then weight (row-major) and bias as little-endian f64.
void write_probe(std::ostream& out, const ProbeWeights& probe);
ProbeWeights read_probe(std::istream& in);
void save_probe(const std::string& path, const ProbeWeights& probe);
ProbeWeights load_probe(const std::string& path);

struct BehaviorScore {
  std::string label;
  double confidence = 0.0;
};

struct RiskReport {
  std::uint64_t frame_id = 0;
  std::uint64_t timestamp_ms = 0;
  std::uint32_t person_count = 0;
  std::vector<BehaviorScore> behaviors;  // descending confidence
  bool alert = false;
};

// behavior_dist is over kBehaviorLabels, count_dist over 0..3 persons.
RiskReport build_report(const WireFrame& frame, std::span<const double> behavior_dist,
                        std::span<const double> count_dist);

// Single-line JSON with fields frame_id, timestamp_ms, person_count,
// behaviors [{label, confidence}], alert.
std::string to_json(const RiskReport& report);

}  // namespace spad

#endif  // SPAD_CLOUD_HPP
