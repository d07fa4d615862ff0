#include "spad/cloud.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>
#include <stdexcept>

#include <json.hpp>

namespace spad {

namespace {

void write_u32(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(b, 4);
}

std::uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw std::runtime_error("probe: truncated");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t{b[i]} << (8 * i);
  return v;
}

void write_f64(std::ostream& out, double d) {
  const auto bits = std::bit_cast<std::uint64_t>(d);
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xFF);
  out.write(b, 8);
}

double read_f64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw std::runtime_error("probe: truncated");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= std::uint64_t{b[i]} << (8 * i);
  return std::bit_cast<double>(bits);
}

std::vector<double> logits(const ProbeWeights& p, std::span<const double> e) {
  std::vector<double> z(p.classes());
  for (std::size_t c = 0; c < z.size(); ++c) {
    double s = p.bias[c];
    for (std::size_t j = 0; j < e.size(); ++j) s += p.weight(c, j) * e[j];
    z[c] = s;
  }
  return z;
}

double mean_cross_entropy(const ProbeWeights& p, std::span<const LabeledEmbedding> examples) {
  double loss = 0.0;
  for (const auto& ex : examples) {
    const auto z = logits(p, ex.embedding);
    const double mx = *std::max_element(z.begin(), z.end());
    double lse = 0.0;
    for (double v : z) lse += std::exp(v - mx);
    loss += mx + std::log(lse) - z[ex.label];
  }
  return loss / static_cast<double>(examples.size());
}

}  // namespace

std::vector<double> softmax(std::span<const double> z) {
  std::vector<double> p(z.begin(), z.end());
  if (p.empty()) return p;
  const double mx = *std::max_element(p.begin(), p.end());
  double sum = 0.0;
  for (auto& v : p) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (auto& v : p) v /= sum;
  return p;
}

std::size_t argmax(std::span<const double> v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

ProbeFit train_probe(std::span<const LabeledEmbedding> examples,
                     const std::vector<std::string>& labels, const ProbeTrainConfig& cfg) {
  if (examples.empty()) throw std::invalid_argument("train_probe: no examples");
  const std::size_t dim = examples.front().embedding.size();
  std::set<std::size_t> present;
  for (const auto& ex : examples) {
    if (ex.embedding.size() != dim) throw std::invalid_argument("train_probe: dimension mismatch");
    if (ex.label >= labels.size()) throw std::invalid_argument("train_probe: label out of range");
    present.insert(ex.label);
  }
  if (present.size() < 2) throw std::invalid_argument("train_probe: need at least two classes");

  const std::size_t k = labels.size();
  const double inv_n = 1.0 / static_cast<double>(examples.size());
  ProbeFit fit;
  fit.probe.labels = labels;
  fit.probe.weight = Tensor({k, dim});
  fit.probe.bias.assign(k, 0.0);
  fit.loss_history.reserve(cfg.epochs + 1);

  Tensor grad_w({k, dim});
  std::vector<double> grad_b(k);
  for (std::uint32_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    fit.loss_history.push_back(mean_cross_entropy(fit.probe, examples));
    std::fill(grad_w.data().begin(), grad_w.data().end(), 0.0);
    std::fill(grad_b.begin(), grad_b.end(), 0.0);
    for (const auto& ex : examples) {
      const auto p = softmax(logits(fit.probe, ex.embedding));
      for (std::size_t c = 0; c < k; ++c) {
        const double r = p[c] - (c == ex.label ? 1.0 : 0.0);
        grad_b[c] += r;
        for (std::size_t j = 0; j < dim; ++j) grad_w(c, j) += r * ex.embedding[j];
      }
    }
    for (std::size_t i = 0; i < grad_w.size(); ++i) fit.probe.weight[i] -= cfg.lr * inv_n * grad_w[i];
    for (std::size_t c = 0; c < k; ++c) fit.probe.bias[c] -= cfg.lr * inv_n * grad_b[c];
  }
  fit.loss_history.push_back(mean_cross_entropy(fit.probe, examples));
  return fit;
}

std::vector<double> classify(const ProbeWeights& probe, std::span<const double> e) {
  if (e.size() != probe.dim()) throw std::invalid_argument("classify: dimension mismatch");
  return softmax(logits(probe, e));
}

double probe_accuracy(const ProbeWeights& probe, std::span<const LabeledEmbedding> examples) {
  if (examples.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& ex : examples) hits += argmax(classify(probe, ex.embedding)) == ex.label;
  return static_cast<double>(hits) / static_cast<double>(examples.size());
}

void write_probe(std::ostream& out, const ProbeWeights& probe) {
  write_u32(out, static_cast<std::uint32_t>(probe.classes()));
  write_u32(out, static_cast<std::uint32_t>(probe.dim()));
  for (const auto& l : probe.labels) {
    write_u32(out, static_cast<std::uint32_t>(l.size()));
    out.write(l.data(), static_cast<std::streamsize>(l.size()));
  }
  for (double v : probe.weight.data()) write_f64(out, v);
  for (double v : probe.bias) write_f64(out, v);
}

ProbeWeights read_probe(std::istream& in) {
  ProbeWeights p;
  const std::uint32_t k = read_u32(in);
  const std::uint32_t dim = read_u32(in);
  if (k == 0 || dim == 0 || k > 4096 || dim > (1u << 20)) {
    throw std::runtime_error("probe: implausible header");
  }
  for (std::uint32_t i = 0; i < k; ++i) {
    const std::uint32_t len = read_u32(in);
    if (len > 1024) throw std::runtime_error("probe: label too long");
    std::string s(len, '\0');
    if (!in.read(s.data(), len)) throw std::runtime_error("probe: truncated");
    p.labels.push_back(std::move(s));
  }
  p.weight = Tensor({k, dim});
  for (auto& v : p.weight.data()) v = read_f64(in);
  p.bias.resize(k);
  for (auto& v : p.bias) v = read_f64(in);
  return p;
}

void save_probe(const std::string& path, const ProbeWeights& probe) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write probe file " + path);
  write_probe(out, probe);
}

ProbeWeights load_probe(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open probe file " + path);
  return read_probe(in);
}

RiskReport build_report(const WireFrame& frame, std::span<const double> behavior_dist,
                        std::span<const double> count_dist) {
  if (behavior_dist.size() != kBehaviorLabels.size() || count_dist.empty()) {
    throw std::invalid_argument("build_report: distribution size mismatch");
  }
  RiskReport r;
  r.frame_id = frame.frame_id;
  r.timestamp_ms = frame.timestamp_ms;
  r.person_count = static_cast<std::uint32_t>(argmax(count_dist));
  for (std::size_t i = 0; i < behavior_dist.size(); ++i) {
    r.behaviors.push_back({kBehaviorLabels[i], behavior_dist[i]});
  }
  std::stable_sort(r.behaviors.begin(), r.behaviors.end(),
                   [](const auto& a, const auto& b) { return a.confidence > b.confidence; });
  r.alert = r.behaviors.front().label != "normal";
  return r;
}

std::string to_json(const RiskReport& report) {
  nlohmann::ordered_json j;
  j["frame_id"] = report.frame_id;
  j["timestamp_ms"] = report.timestamp_ms;
  j["person_count"] = report.person_count;
  j["behaviors"] = nlohmann::ordered_json::array();
  for (const auto& b : report.behaviors) {
    j["behaviors"].push_back({{"label", b.label}, {"confidence", b.confidence}});
  }
  j["alert"] = report.alert;
  return j.dump();
}

}  // namespace spad
