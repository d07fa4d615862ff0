#ifndef SPAD_SCENE_HPP
#define SPAD_SCENE_HPP

#include <cstddef>
#include <cstdint>
#include <vector>

#include "spad/psz.hpp"
#include "spad/tensor.hpp"

namespace spad {

enum class Behavior : std::uint8_t { Normal = 0, Fall = 1, Smoking = 2, Conflict = 3 };

inline constexpr std::size_t kSceneSize = 16;
inline constexpr std::size_t kIdentityCount = 8;
inline constexpr std::size_t kMaxPersons = 3;
inline constexpr std::size_t kGlyphCell = 4;
inline constexpr double kBackground = 0.1;
inline constexpr double kGlyphIntensity = 0.8;
inline constexpr double kIdentityHigh = 0.9;
inline constexpr double kIdentityLow = 0.3;

// Default privacy zone: the top-centre "head" band.
inline constexpr PixelRect kDefaultPszRect{4, 0, 12, 4};

// 4x4 binary identity codes; bit (15 - (4 * row + col)) is the pixel at (row, col).
inline constexpr std::uint16_t kIdentityCodes[kIdentityCount] = {
    0x9669, 0x6996, 0xF00F, 0x0FF0, 0xCC33, 0x33CC, 0xA5A5, 0x5A5A};

struct SceneSpec {
  Behavior behavior = Behavior::Normal;
  std::uint32_t identity_id = 0;
  std::uint32_t person_count = 0;
  PixelRect psz_rect = kDefaultPszRect;
  std::uint64_t seed = 0;  // glyph placement

  // Throws std::invalid_argument on out-of-range fields, a rect outside the
  // image, or a non-normal behavior with zero persons.
  void validate() const;
};

struct SceneLabels {
  Behavior behavior = Behavior::Normal;
  std::uint32_t identity_id = 0;
  std::uint32_t person_count = 0;
};

struct Scene {
  Tensor image;  // 16 x 16 x 1, values in [0, 1]
  PixelMask mask;
  SceneLabels labels;
};

// Renders the background, the tiled identity texture inside psz_rect and one
// 4x4 behavior glyph per person in distinct patch-aligned cells that do not
// touch psz_rect. Throws std::invalid_argument if the scene spec is invalid or too
// few free cells remain.
Scene generate_scene(const SceneSpec& spec);

// Behavior uniform over the four labels; person count uniform over 0..3 for
// normal and 1..3 otherwise; identity uniform over 0..7.
SceneSpec random_scene_spec(std::uint64_t seed, const PixelRect& psz_rect = kDefaultPszRect);

// Scene i is rendered from random_scene_spec(derive_seed(seed, i)).
std::vector<Scene> generate_dataset(std::size_t n, std::uint64_t seed,
                                    const PixelRect& psz_rect = kDefaultPszRect);

}  // namespace spad

#endif  // SPAD_SCENE_HPP
