#ifndef SPAD_GRADIENT_HPP
#define SPAD_GRADIENT_HPP

#include <utility>
#include <variant>
#include <vector>

#include "spad/psz.hpp"
#include "spad/tensor.hpp"
#include "spad/vit.hpp"

namespace spad {

struct LossSelector;

struct WeightedEntry;

// Which scalar loss the backward pass differentiates.
struct LossSelector {
  struct Attention {
    PatchIndexSet psz;
  };
  struct Value {
    PatchIndexSet psz;
  };
  struct Semantic {
    std::vector<double> reference;
  };
  struct Weighted {
    std::vector<WeightedEntry> terms;
  };

  std::variant<Attention, Value, Semantic, Weighted> term;

  static LossSelector attention(PatchIndexSet psz);
  static LossSelector value(PatchIndexSet psz);
  static LossSelector semantic(std::vector<double> reference);
  static LossSelector weighted(std::vector<WeightedEntry> terms);
};

struct WeightedEntry {
  LossSelector selector;
  double weight = 1.0;
};

// Scalar value of the selected loss on a forward trace.
double selector_loss(const ForwardTrace& trace, const LossSelector& sel);

// Exact reverse-mode gradient of the selected loss with respect to every
// input pixel. Throws std::out_of_range on bad PSZ indices and
// std::invalid_argument on a reference embedding of the wrong length or a
// non-finite weight.
Tensor input_gradient(const VitWeights& weights, const Tensor& image, const LossSelector& sel);

struct TracedGradient {
  Tensor gradient;
  ForwardTrace trace;  // the forward pass the gradient was taken at
};

TracedGradient traced_input_gradient(const VitWeights& weights, const Tensor& image,
                                     const LossSelector& sel);

// Central differences (L(x + h e_i) - L(x - h e_i)) / 2h for every pixel.
Tensor finite_diff_gradient(const VitWeights& weights, const Tensor& image, const LossSelector& sel,
                            double h = 1e-5);

// max_i |analytic_i - numeric_i| / (|numeric_i| + 1e-8)
double max_relative_error(const Tensor& analytic, const Tensor& numeric);

}  // namespace spad

#endif  // SPAD_GRADIENT_HPP
