#include "spad/gradient.hpp"

#include <cmath>
#include <stdexcept>

#include "spad/losses.hpp"
#include "vit_internal.hpp"

namespace spad {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

void validate_selector(const LossSelector& sel, const VitConfig& c) {
  std::visit(overloaded{
                 [&](const LossSelector::Attention& a) { a.psz.validate(c.patch_count()); },
                 [&](const LossSelector::Value& v) { v.psz.validate(c.patch_count()); },
                 [&](const LossSelector::Semantic& s) {
                   if (s.reference.size() != c.d_model) {
                     throw std::invalid_argument("semantic selector: reference length != d_model");
                   }
                 },
                 [&](const LossSelector::Weighted& w) {
                   for (const auto& e : w.terms) {
                     if (!std::isfinite(e.weight)) {
                       throw std::invalid_argument("weighted selector: non-finite weight");
                     }
                     validate_selector(e.selector, c);
                   }
                 },
             },
             sel.term);
}

// Accumulates weight * dL/d(trace) for the selector into grad.
void accumulate_taps(const LossSelector& sel, double weight, const ForwardTrace& trace,
                     detail::TraceGrad& grad) {
  const std::size_t T = trace.tokens, H = trace.heads, dh = trace.d_head;
  std::visit(
      overloaded{
          [&](const LossSelector::Attention& a) {
            for (std::size_t l = 0; l < trace.depth; ++l) {
              for (std::size_t h = 0; h < H; ++h) {
                for (std::size_t j : a.psz) {
                  for (std::size_t i = 0; i < T; ++i) {
                    grad.d_attn[((l * H + h) * T + i) * T + j + 1] += weight;
                  }
                }
              }
            }
          },
          [&](const LossSelector::Value& v) {
            for (std::size_t l = 0; l < trace.depth; ++l) {
              for (std::size_t h = 0; h < H; ++h) {
                for (std::size_t j : v.psz) {
                  double sq = 0.0;
                  for (std::size_t k = 0; k < dh; ++k) {
                    sq += trace.value(l, h, j + 1, k) * trace.value(l, h, j + 1, k);
                  }
                  const double norm = std::sqrt(sq);
                  // Subgradient 0 at the origin.
                  if (norm == 0.0) continue;
                  for (std::size_t k = 0; k < dh; ++k) {
                    grad.d_values[((l * H + h) * T + j + 1) * dh + k] +=
                        weight * trace.value(l, h, j + 1, k) / norm;
                  }
                }
              }
            }
          },
          [&](const LossSelector::Semantic& s) {
            const auto& e = trace.cls_embedding;
            double dot = 0.0, nr2 = 0.0, ns2 = 0.0;
            for (std::size_t i = 0; i < e.size(); ++i) {
              dot += s.reference[i] * e[i];
              nr2 += s.reference[i] * s.reference[i];
              ns2 += e[i] * e[i];
            }
            const double nr = std::sqrt(nr2), ns = std::sqrt(ns2);
            if (nr < kMinEmbeddingNorm || ns < kMinEmbeddingNorm) {
              throw DegenerateEmbedding("semantic selector: embedding norm below 1e-12");
            }
            // d/de [1 - dot / (nr ns)] = -(r / (nr ns) - dot e / (nr ns^3))
            for (std::size_t i = 0; i < e.size(); ++i) {
              grad.d_tokens(0, i) +=
                  weight * -(s.reference[i] / (nr * ns) - dot * e[i] / (nr * ns * ns2));
            }
          },
          [&](const LossSelector::Weighted& w) {
            for (const auto& entry : w.terms) {
              accumulate_taps(entry.selector, weight * entry.weight, trace, grad);
            }
          },
      },
      sel.term);
}

}  // namespace

LossSelector LossSelector::attention(PatchIndexSet psz) { return {Attention{std::move(psz)}}; }
LossSelector LossSelector::value(PatchIndexSet psz) { return {Value{std::move(psz)}}; }
LossSelector LossSelector::semantic(std::vector<double> reference) {
  return {Semantic{std::move(reference)}};
}
LossSelector LossSelector::weighted(std::vector<WeightedEntry> terms) {
  return {Weighted{std::move(terms)}};
}

double selector_loss(const ForwardTrace& trace, const LossSelector& sel) {
  return std::visit(
      overloaded{
          [&](const LossSelector::Attention& a) { return attention_loss(trace, a.psz); },
          [&](const LossSelector::Value& v) { return value_loss(trace, v.psz); },
          [&](const LossSelector::Semantic& s) {
            return semantic_loss(s.reference, trace.cls_embedding);
          },
          [&](const LossSelector::Weighted& w) {
            double sum = 0.0;
            for (const auto& e : w.terms) sum += e.weight * selector_loss(trace, e.selector);
            return sum;
          },
      },
      sel.term);
}

TracedGradient traced_input_gradient(const VitWeights& weights, const Tensor& image,
                                     const LossSelector& sel) {
  validate_selector(sel, weights.config);
  detail::ForwardCache cache;
  TracedGradient out;
  out.trace = detail::run_forward(weights, image, &cache);
  detail::TraceGrad grad = detail::zero_trace_grad(weights.config);
  accumulate_taps(sel, 1.0, out.trace, grad);
  out.gradient = detail::backward_to_image(weights, cache, grad);
  return out;
}

Tensor input_gradient(const VitWeights& weights, const Tensor& image, const LossSelector& sel) {
  return traced_input_gradient(weights, image, sel).gradient;
}

Tensor finite_diff_gradient(const VitWeights& weights, const Tensor& image, const LossSelector& sel,
                            double h) {
  validate_selector(sel, weights.config);
  Tensor grad(image.shape());
  Tensor probe = image;
  for (std::size_t i = 0; i < image.size(); ++i) {
    probe[i] = image[i] + h;
    const double plus = selector_loss(forward(weights, probe), sel);
    probe[i] = image[i] - h;
    const double minus = selector_loss(forward(weights, probe), sel);
    probe[i] = image[i];
    grad[i] = (plus - minus) / (2.0 * h);
  }
  return grad;
}

double max_relative_error(const Tensor& analytic, const Tensor& numeric) {
  if (!analytic.same_shape(numeric)) throw std::invalid_argument("max_relative_error: shape mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / (std::abs(numeric[i]) + 1e-8));
  }
  return worst;
}

}  // namespace spad
