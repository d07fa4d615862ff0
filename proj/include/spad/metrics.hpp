#ifndef SPAD_METRICS_HPP
#define SPAD_METRICS_HPP

#include "spad/psz.hpp"
#include "spad/tensor.hpp"
#include "spad/vit.hpp"

namespace spad {

inline constexpr double kPsnrCap = 99.0;

// 10 log10(1 / MSE) over the masked pixels, peak 1.0; 99.0 when MSE < 1e-10.
// Throws std::invalid_argument on an empty mask or mismatched shapes.
double psnr_region(const Tensor& a, const Tensor& b, const PixelMask& mask);

// attention_loss(trace, psz) / attention_loss(trace, all patches).
// Throws std::invalid_argument on an empty set.
double attention_mass_fraction(const ForwardTrace& trace, const PatchIndexSet& psz);

}  // namespace spad

#endif  // SPAD_METRICS_HPP
