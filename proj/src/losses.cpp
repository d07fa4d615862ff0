#include "spad/losses.hpp"

#include <cmath>

namespace spad {

namespace {

void check_psz(const ForwardTrace& trace, const PatchIndexSet& psz) {
  psz.validate(trace.tokens - 1);
}

}  // namespace

void LossWeights::validate() const {
  for (double w : {w_sem, w_att, w_val}) {
    if (!std::isfinite(w) || w < 0.0) {
      throw std::invalid_argument("loss weights must be finite and non-negative");
    }
  }
}

double attention_loss(const ForwardTrace& trace, const PatchIndexSet& psz) {
  check_psz(trace, psz);
  double sum = 0.0;
  for (std::size_t l = 0; l < trace.depth; ++l) {
    for (std::size_t h = 0; h < trace.heads; ++h) {
      for (std::size_t j : psz) {
        for (std::size_t i = 0; i < trace.tokens; ++i) sum += trace.attention(l, h, i, j + 1);
      }
    }
  }
  return sum;
}

double value_loss(const ForwardTrace& trace, const PatchIndexSet& psz) {
  check_psz(trace, psz);
  double sum = 0.0;
  for (std::size_t l = 0; l < trace.depth; ++l) {
    for (std::size_t h = 0; h < trace.heads; ++h) {
      for (std::size_t j : psz) {
        double sq = 0.0;
        for (std::size_t k = 0; k < trace.d_head; ++k) {
          const double v = trace.value(l, h, j + 1, k);
          sq += v * v;
        }
        sum += std::sqrt(sq);
      }
    }
  }
  return sum;
}

double semantic_loss(std::span<const double> e_ref, std::span<const double> e_safe) {
  if (e_ref.size() != e_safe.size()) {
    throw std::invalid_argument("semantic_loss: embedding length mismatch");
  }
  double dot = 0.0, nr = 0.0, ns = 0.0;
  for (std::size_t i = 0; i < e_ref.size(); ++i) {
    dot += e_ref[i] * e_safe[i];
    nr += e_ref[i] * e_ref[i];
    ns += e_safe[i] * e_safe[i];
  }
  nr = std::sqrt(nr);
  ns = std::sqrt(ns);
  if (nr < kMinEmbeddingNorm || ns < kMinEmbeddingNorm) {
    throw DegenerateEmbedding("semantic_loss: embedding norm below 1e-12");
  }
  const double cosine = std::clamp(dot / (nr * ns), -1.0, 1.0);
  return 1.0 - cosine;
}

LossBreakdown loss_breakdown(const ForwardTrace& trace, const PatchIndexSet& psz,
                             std::span<const double> e_ref, const LossWeights& w) {
  w.validate();
  LossBreakdown b;
  b.sem = semantic_loss(e_ref, trace.cls_embedding);
  b.att = attention_loss(trace, psz);
  b.val = value_loss(trace, psz);
  b.total = w.w_sem * b.sem + w.w_att * b.att + w.w_val * b.val;
  return b;
}

double total_loss(const ForwardTrace& trace, const PatchIndexSet& psz,
                  std::span<const double> e_ref, const LossWeights& w) {
  return loss_breakdown(trace, psz, e_ref, w).total;
}

}  // namespace spad
