#ifndef SPAD_LOSSES_HPP
#define SPAD_LOSSES_HPP

#include <span>
#include <stdexcept>

#include "spad/psz.hpp"
#include "spad/vit.hpp"

namespace spad {

// Raised when an embedding norm is too small for cosine distance.
class DegenerateEmbedding : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

inline constexpr double kMinEmbeddingNorm = 1e-12;

struct LossWeights {
  double w_sem = 1.0;
  double w_att = 1.0;  // lambda
  double w_val = 0.5;  // lambda_v

  // Throws std::invalid_argument if any weight is negative or non-finite.
  void validate() const;
};

// Total attention mass flowing into the PSZ key columns, summed over every
// layer, head and query row (CLS included).
double attention_loss(const ForwardTrace& trace, const PatchIndexSet& psz);

// Sum over layers, heads and PSZ tokens of the value-row L2 norm.
double value_loss(const ForwardTrace& trace, const PatchIndexSet& psz);

// Cosine distance 1 - <a,b> / (|a||b|), in [0, 2].
double semantic_loss(std::span<const double> e_ref, std::span<const double> e_safe);

struct LossBreakdown {
  double total = 0.0;
  double sem = 0.0;
  double att = 0.0;
  double val = 0.0;
};

LossBreakdown loss_breakdown(const ForwardTrace& trace, const PatchIndexSet& psz,
                             std::span<const double> e_ref, const LossWeights& w);

// w_sem * L_sem + w_att * L_att + w_val * L_val; every term is minimized.
double total_loss(const ForwardTrace& trace, const PatchIndexSet& psz,
                  std::span<const double> e_ref, const LossWeights& w);

}  // namespace spad

#endif  // SPAD_LOSSES_HPP
