#ifndef SPAD_OPTIMIZER_HPP
#define SPAD_OPTIMIZER_HPP

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "spad/losses.hpp"
#include "spad/psz.hpp"
#include "spad/tensor.hpp"
#include "spad/vit.hpp"

namespace spad {

struct SpadConfig {
  double alpha = 1.0 / 255.0;
  double epsilon = 16.0 / 255.0;
  std::uint32_t iters = 100;
  LossWeights weights;
  // Seed of the backbone weights used by the CLI and experiment drivers.
  std::uint64_t seed = 7;

  void validate() const;
};

struct IterationRecord {
  LossBreakdown loss;
  double psz_mass_fraction = 0.0;
};

struct OptimTrace {
  // records[0] is the unperturbed state, records[t] the state after step t.
  std::vector<IterationRecord> records;
  Tensor delta;
};

// Elementwise -1 / 0 / +1.
Tensor sign(const Tensor& t);

struct StepResult {
  Tensor delta;
  Tensor x_safe;
};

// One sign-gradient descent step followed by projection onto the L-inf ball
// of radius epsilon and the [0, 1] image range. The returned delta is
// recomputed as x_safe - x after clamping.
StepResult spad_step(const Tensor& delta, const Tensor& grad, const SpadConfig& cfg,
                     const Tensor& x);

struct SpadResult {
  Tensor x_safe;
  OptimTrace trace;
};

// Runs cfg.iters steps from delta = 0. The reference embedding for the
// semantic term is the clean image's CLS embedding.
SpadResult spad_optimize(const VitWeights& weights, const Tensor& x, const PatchIndexSet& psz,
                         const SpadConfig& cfg);

// One CSV row per record: iter,L_total,L_sem,L_att,L_val,psz_mass_fraction
void write_trace_csv(std::ostream& out, const OptimTrace& trace);

}  // namespace spad

#endif  // SPAD_OPTIMIZER_HPP
