#include "spad/inversion.hpp"

#include <cmath>

namespace spad {

Tensor InversionDecoder::reconstruct(std::span<const double> embedding) const {
  if (embedding.size() != weight.dim(1)) {
    throw std::invalid_argument("inversion: embedding length mismatch");
  }
  Tensor out(image_shape);
  for (std::size_t p = 0; p < weight.dim(0); ++p) {
    double s = 0.0;
    for (std::size_t j = 0; j < embedding.size(); ++j) s += weight(p, j) * embedding[j];
    out[p] = s;
  }
  return out;
}

Tensor cholesky_solve(Tensor a, Tensor b) {
  const std::size_t n = a.dim(0), m = b.dim(1);
  // Lower-triangular factor overwrites a.
  for (std::size_t j = 0; j < n; ++j) {
    double d = a(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= a(j, k) * a(j, k);
    if (!(d > 0.0)) throw SingularSystem("cholesky: matrix not positive definite");
    const double l = std::sqrt(d);
    a(j, j) = l;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= a(i, k) * a(j, k);
      a(i, j) = s / l;
    }
  }
  for (std::size_t c = 0; c < m; ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      double s = b(i, c);
      for (std::size_t k = 0; k < i; ++k) s -= a(i, k) * b(k, c);
      b(i, c) = s / a(i, i);
    }
    for (std::size_t i = n; i-- > 0;) {
      double s = b(i, c);
      for (std::size_t k = i + 1; k < n; ++k) s -= a(k, i) * b(k, c);
      b(i, c) = s / a(i, i);
    }
  }
  return b;
}

InversionDecoder train_inversion_decoder(std::span<const InversionPair> pairs, double ridge) {
  if (pairs.empty()) throw std::invalid_argument("inversion: no training pairs");
  const std::size_t d = pairs.front().embedding.size();
  const std::size_t pixels = pairs.front().image.size();
  for (const auto& p : pairs) {
    if (p.embedding.size() != d || p.image.size() != pixels) {
      throw std::invalid_argument("inversion: inconsistent pair dimensions");
    }
  }
  // Gram = X X^T + ridge I (d x d); rhs = X Y^T (d x pixels); W^T = Gram^-1 rhs.
  Tensor gram({d, d});
  Tensor rhs({d, pixels});
  for (const auto& p : pairs) {
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < d; ++j) gram(i, j) += p.embedding[i] * p.embedding[j];
      for (std::size_t q = 0; q < pixels; ++q) rhs(i, q) += p.embedding[i] * p.image[q];
    }
  }
  for (std::size_t i = 0; i < d; ++i) gram(i, i) += ridge;
  const Tensor wt = cholesky_solve(std::move(gram), std::move(rhs));

  InversionDecoder dec;
  dec.image_shape = pairs.front().image.shape();
  dec.weight = Tensor({pixels, d});
  for (std::size_t q = 0; q < pixels; ++q) {
    for (std::size_t i = 0; i < d; ++i) dec.weight(q, i) = wt(i, q);
  }
  return dec;
}

}  // namespace spad
