#include "spad/metrics.hpp"

#include <cmath>
#include <stdexcept>

#include "spad/losses.hpp"

namespace spad {

double psnr_region(const Tensor& a, const Tensor& b, const PixelMask& mask) {
  if (!a.same_shape(b)) throw std::invalid_argument("psnr_region: shape mismatch");
  if (a.rank() < 2 || a.dim(0) != mask.height() || a.dim(1) != mask.width()) {
    throw std::invalid_argument("psnr_region: mask does not match image");
  }
  const std::size_t channels = a.size() / (mask.width() * mask.height());
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t y = 0; y < mask.height(); ++y) {
    for (std::size_t x = 0; x < mask.width(); ++x) {
      if (!mask.at(x, y)) continue;
      for (std::size_t c = 0; c < channels; ++c) {
        const std::size_t i = (y * mask.width() + x) * channels + c;
        sum += (a[i] - b[i]) * (a[i] - b[i]);
        ++n;
      }
    }
  }
  if (n == 0) throw std::invalid_argument("psnr_region: empty mask");
  const double mse = sum / static_cast<double>(n);
  if (mse < 1e-10) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

double attention_mass_fraction(const ForwardTrace& trace, const PatchIndexSet& psz) {
  if (psz.empty()) throw std::invalid_argument("attention_mass_fraction: empty PSZ");
  const double all = attention_loss(trace, PatchIndexSet::all(trace.tokens - 1));
  return attention_loss(trace, psz) / all;
}

}  // namespace spad
