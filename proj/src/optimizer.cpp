#include "spad/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <stdexcept>

#include "spad/gradient.hpp"
#include "spad/metrics.hpp"

namespace spad {

void SpadConfig::validate() const {
  if (!(std::isfinite(alpha) && alpha >= 0.0)) throw std::invalid_argument("alpha must be >= 0");
  if (!(std::isfinite(epsilon) && epsilon >= 0.0)) {
    throw std::invalid_argument("epsilon must be >= 0");
  }
  weights.validate();
}

Tensor sign(const Tensor& t) {
  Tensor out(t.shape());
  for (std::size_t i = 0; i < t.size(); ++i) out[i] = (t[i] > 0.0) - (t[i] < 0.0);
  return out;
}

StepResult spad_step(const Tensor& delta, const Tensor& grad, const SpadConfig& cfg,
                     const Tensor& x) {
  if (!delta.same_shape(grad) || !delta.same_shape(x)) {
    throw std::invalid_argument("spad_step: shape mismatch");
  }
  StepResult r{Tensor(x.shape()), Tensor(x.shape())};
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double s = (grad[i] > 0.0) - (grad[i] < 0.0);
    double d = std::clamp(delta[i] - cfg.alpha * s, -cfg.epsilon, cfg.epsilon);
    double xs = std::clamp(x[i] + d, 0.0, 1.0);
    // Rounding in x + d can land one ulp outside the ball.
    while (std::abs(xs - x[i]) > cfg.epsilon) xs = std::nextafter(xs, x[i]);
    r.x_safe[i] = xs;
    r.delta[i] = xs - x[i];
  }
  return r;
}

SpadResult spad_optimize(const VitWeights& weights, const Tensor& x, const PatchIndexSet& psz,
                         const SpadConfig& cfg) {
  cfg.validate();
  psz.validate(weights.config.patch_count());
  const ForwardTrace clean = forward(weights, x);
  const std::vector<double>& reference = clean.cls_embedding;
  const LossSelector objective = LossSelector::weighted({
      {LossSelector::semantic(reference), cfg.weights.w_sem},
      {LossSelector::attention(psz), cfg.weights.w_att},
      {LossSelector::value(psz), cfg.weights.w_val},
  });

  SpadResult result{x, {}};
  Tensor delta(x.shape());
  result.trace.records.reserve(cfg.iters + 1);
  auto record = [&](const ForwardTrace& trace) {
    IterationRecord rec;
    rec.loss = loss_breakdown(trace, psz, reference, cfg.weights);
    rec.psz_mass_fraction = psz.empty() ? 0.0 : attention_mass_fraction(trace, psz);
    result.trace.records.push_back(rec);
  };
  for (std::uint32_t t = 0; t < cfg.iters; ++t) {
    const TracedGradient g = traced_input_gradient(weights, result.x_safe, objective);
    record(g.trace);
    StepResult step = spad_step(delta, g.gradient, cfg, x);
    delta = std::move(step.delta);
    result.x_safe = std::move(step.x_safe);
  }
  record(cfg.iters == 0 ? clean : forward(weights, result.x_safe));
  result.trace.delta = std::move(delta);
  return result;
}

void write_trace_csv(std::ostream& out, const OptimTrace& trace) {
  out << "iter,L_total,L_sem,L_att,L_val,psz_mass_fraction\n";
  out << std::setprecision(17);
  for (std::size_t i = 0; i < trace.records.size(); ++i) {
    const auto& r = trace.records[i];
    out << i << ',' << r.loss.total << ',' << r.loss.sem << ',' << r.loss.att << ',' << r.loss.val
        << ',' << r.psz_mass_fraction << '\n';
  }
}

}  // namespace spad
