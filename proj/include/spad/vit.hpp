#ifndef SPAD_VIT_HPP
#define SPAD_VIT_HPP

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "spad/tensor.hpp"

namespace spad {

struct VitConfig {
  std::uint32_t image_h = 16;
  std::uint32_t image_w = 16;
  std::uint32_t channels = 1;
  std::uint32_t patch = 4;
  std::uint32_t depth = 2;
  std::uint32_t heads = 2;
  std::uint32_t d_model = 16;
  std::uint32_t d_head = 8;
  std::uint32_t mlp_hidden = 32;

  // Throws std::invalid_argument on non-divisible patch size, zero dims, or
  // d_model != heads * d_head.
  void validate() const;

  std::size_t patch_count() const { return (image_h / patch) * (image_w / patch); }
  // Patch tokens plus the CLS token at internal index 0.
  std::size_t tokens() const { return patch_count() + 1; }
  std::size_t patch_dim() const { return std::size_t{patch} * patch * channels; }
  std::size_t pixels() const { return std::size_t{image_h} * image_w * channels; }
  std::vector<std::size_t> image_shape() const { return {image_h, image_w, channels}; }

  friend bool operator==(const VitConfig&, const VitConfig&) = default;
};

struct LayerWeights {
  Tensor ln1_scale, ln1_shift;
  Tensor wq, bq, wk, bk, wv, bv, wo, bo;
  Tensor ln2_scale, ln2_shift;
  Tensor w1, b1, w2, b2;
};

enum class ParamKind { Matrix, Bias, Positional, NormScale, NormShift };

// Pre-norm ViT parameters. Matrices are stored fan_in x fan_out so that a
// row vector maps as y = x W + b. The CLS token has no learned embedding: it
// enters as the zero vector plus positional row 0.
struct VitWeights {
  VitConfig config;
  Tensor patch_w, patch_b;
  Tensor pos;
  std::vector<LayerWeights> layers;
  Tensor final_scale, final_shift;

  // Visits every parameter tensor in the canonical order used by init,
  // save and load (see docs/FORMATS.md).
  void for_each_parameter(
      const std::function<void(std::string_view name, ParamKind kind, Tensor&)>& fn);
  void for_each_parameter(
      const std::function<void(std::string_view name, ParamKind kind, const Tensor&)>& fn) const;

  std::size_t parameter_count() const;
};

// Matrices and positional embeddings ~ N(0,1) / sqrt(fan_in) drawn from
// Rng(seed) in canonical order; biases and norm shifts 0, norm scales 1.
VitWeights init_weights(const VitConfig& config, std::uint64_t seed);

// Binary format: eight little-endian u32 (image_h, image_w, channels, patch,
// depth, heads, d_head, mlp_hidden) followed by every parameter as
// little-endian f64 in canonical order.
void write_weights(std::ostream& out, const VitWeights& weights);
VitWeights read_weights(std::istream& in);
void save_weights(const std::string& path, const VitWeights& weights);
VitWeights load_weights(const std::string& path);

// H x W x C image -> P x (patch*patch*C); patches row-major over the grid,
// pixels row-major (then channel) within each patch.
Tensor patchify(const Tensor& image, std::size_t patch);
// Inverse layout of patchify, used to scatter pixel gradients.
Tensor unpatchify(const Tensor& patches, const VitConfig& config);

struct ForwardTrace {
  std::size_t depth = 0, heads = 0, tokens = 0, d_head = 0;
  Tensor attn;    // depth x heads x T x T
  Tensor values;  // depth x heads x T x d_head
  std::vector<double> cls_embedding;
  Tensor token_outputs;  // T x d_model after the final norm

  double attention(std::size_t l, std::size_t h, std::size_t i, std::size_t j) const {
    return attn[((l * heads + h) * tokens + i) * tokens + j];
  }
  double value(std::size_t l, std::size_t h, std::size_t t, std::size_t k) const {
    return values[((l * heads + h) * tokens + t) * d_head + k];
  }

  friend bool operator==(const ForwardTrace&, const ForwardTrace&) = default;
};

// Throws std::invalid_argument if the image shape does not match the config.
ForwardTrace forward(const VitWeights& weights, const Tensor& image);

inline constexpr double kLayerNormEps = 1e-5;

// tanh-approximation GELU and its derivative.
double gelu(double x);
double gelu_grad(double x);

}  // namespace spad

#endif  // SPAD_VIT_HPP
