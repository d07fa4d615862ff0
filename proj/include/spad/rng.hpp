#ifndef SPAD_RNG_HPP
#define SPAD_RNG_HPP

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>

namespace spad {

// splitmix64: used only to expand a 64-bit seed into generator state.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next();

 private:
  std::uint64_t state_;
};

// xoshiro256++ seeded from four consecutive splitmix64 outputs.
class Xoshiro256pp {
 public:
  explicit Xoshiro256pp(std::uint64_t seed);
  std::uint64_t next();

 private:
  std::array<std::uint64_t, 4> s_{};
};

// The single pinned random source: xoshiro256++ stream, 53-bit uniforms,
// Box-Muller normals.
//
// Normals are produced in pairs. Each pair consumes two uniforms u1, u2 (in
// that order) and yields
//   z0 = sqrt(-2 ln(1 - u1)) * cos(2 pi u2)
//   z1 = sqrt(-2 ln(1 - u1)) * sin(2 pi u2)
// with z0 returned first and z1 cached for the next call.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_.next(); }
  // Uniform in [0, 1): (next >> 11) * 2^-53.
  double uniform();
  // floor(uniform() * n), n > 0.
  std::size_t index(std::size_t n);
  double normal();

 private:
  Xoshiro256pp gen_;
  std::optional<double> cached_normal_;
};

// Deterministic sub-seed for stream `index` under `seed`.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

}  // namespace spad

#endif  // SPAD_RNG_HPP
