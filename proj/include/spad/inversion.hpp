#ifndef SPAD_INVERSION_HPP
#define SPAD_INVERSION_HPP

#include <span>
#include <stdexcept>
#include <vector>

#include "spad/channel.hpp"
#include "spad/tensor.hpp"

namespace spad {

class SingularSystem : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct InversionPair {
  FeatureEmbedding embedding;
  Tensor image;
};

// Linear attacker mapping an intercepted embedding back to pixels.
struct InversionDecoder {
  Tensor weight;  // pixels x d_model
  std::vector<std::size_t> image_shape;

  Tensor reconstruct(std::span<const double> embedding) const;
};

// Ridge solution W = Y X^T (X X^T + ridge I)^-1 with embeddings as the
// columns of X and flattened images as the columns of Y, solved by Cholesky
// on the regularized Gram matrix. Throws SingularSystem when the factorization
// meets a non-positive pivot.
InversionDecoder train_inversion_decoder(std::span<const InversionPair> pairs,
                                         double ridge = 1e-3);

// Solves A X = B in place for symmetric positive definite A (n x n) and
// B (n x m). Throws SingularSystem on a non-positive pivot.
Tensor cholesky_solve(Tensor a, Tensor b);

}  // namespace spad

#endif  // SPAD_INVERSION_HPP
