#ifndef SPAD_VIT_INTERNAL_HPP
#define SPAD_VIT_INTERNAL_HPP

#include <vector>

#include "spad/tensor.hpp"
#include "spad/vit.hpp"

namespace spad::detail {

struct NormCache {
  Tensor xhat;  // normalized input, T x D
  std::vector<double> rstd;
};

struct LayerCache {
  Tensor input;  // residual stream entering the layer
  NormCache ln1;
  Tensor q, k, v;  // T x D, heads concatenated along columns
  Tensor attn;     // heads x T x T
  Tensor mixed;    // T x D, attention output before the projection
  Tensor resid;    // stream after the attention residual
  NormCache ln2;
  Tensor y2;      // LN2 output
  Tensor hidden;  // pre-GELU
  Tensor act;     // post-GELU
  Tensor y1;      // LN1 output
};

struct ForwardCache {
  Tensor patches;  // P x patch_dim
  std::vector<LayerCache> layers;
  Tensor final_in;
  NormCache final_norm;
};

// Upstream gradients injected at the traced quantities.
struct TraceGrad {
  Tensor d_attn;    // depth x heads x T x T
  Tensor d_values;  // depth x heads x T x d_head
  Tensor d_tokens;  // T x d_model on the final-norm output
};

TraceGrad zero_trace_grad(const VitConfig& config);

ForwardTrace run_forward(const VitWeights& weights, const Tensor& image, ForwardCache* cache);

// Reverse-mode pass from the trace taps back to the image pixels.
Tensor backward_to_image(const VitWeights& weights, const ForwardCache& cache,
                         const TraceGrad& grad);

}  // namespace spad::detail

#endif  // SPAD_VIT_INTERNAL_HPP
