#include "spad/scene.hpp"

#include <stdexcept>
#include <utility>

#include "spad/rng.hpp"

namespace spad {

namespace {

// Glyph footprints on a 4x4 cell, '#' = lit.
constexpr const char* kGlyphs[4][4] = {
    {".##.", ".##.", ".##.", ".##."},  // normal: vertical bar
    {"....", "####", "####", "...."},  // fall: horizontal bar
    {"##.#", "##..", "##..", "##.."},  // smoking: bar + corner dot
    {".##.", "####", "####", ".##."},  // conflict: crossing bars
};

bool cell_touches(const PixelRect& r, std::size_t cx, std::size_t cy) {
  const std::size_t x0 = cx * kGlyphCell, y0 = cy * kGlyphCell;
  return x0 < r.x1 && r.x0 < x0 + kGlyphCell && y0 < r.y1 && r.y0 < y0 + kGlyphCell;
}

}  // namespace

void SceneSpec::validate() const {
  if (static_cast<unsigned>(behavior) > 3) throw std::invalid_argument("scene: bad behavior");
  if (identity_id >= kIdentityCount) throw std::invalid_argument("scene: identity out of range");
  if (person_count > kMaxPersons) throw std::invalid_argument("scene: person count out of range");
  if (person_count == 0 && behavior != Behavior::Normal) {
    throw std::invalid_argument("scene: an empty scene must be labelled normal");
  }
  if (psz_rect.x0 > psz_rect.x1 || psz_rect.y0 > psz_rect.y1 || psz_rect.x1 > kSceneSize ||
      psz_rect.y1 > kSceneSize) {
    throw std::invalid_argument("scene: psz_rect outside image");
  }
}

Scene generate_scene(const SceneSpec& spec) {
  spec.validate();
  Scene scene;
  scene.image = Tensor({kSceneSize, kSceneSize, 1}, kBackground);
  scene.mask = rect_to_mask(spec.psz_rect, kSceneSize, kSceneSize);
  scene.labels = {spec.behavior, spec.identity_id, spec.person_count};

  const std::uint16_t code = kIdentityCodes[spec.identity_id];
  for (std::size_t y = spec.psz_rect.y0; y < spec.psz_rect.y1; ++y) {
    for (std::size_t x = spec.psz_rect.x0; x < spec.psz_rect.x1; ++x) {
      const std::size_t r = (y - spec.psz_rect.y0) % 4, c = (x - spec.psz_rect.x0) % 4;
      const bool on = (code >> (15 - (4 * r + c))) & 1u;
      scene.image[y * kSceneSize + x] = on ? kIdentityHigh : kIdentityLow;
    }
  }

  std::vector<std::pair<std::size_t, std::size_t>> free_cells;
  const std::size_t grid = kSceneSize / kGlyphCell;
  for (std::size_t cy = 0; cy < grid; ++cy) {
    for (std::size_t cx = 0; cx < grid; ++cx) {
      if (!cell_touches(spec.psz_rect, cx, cy)) free_cells.emplace_back(cx, cy);
    }
  }
  if (free_cells.size() < spec.person_count) {
    throw std::invalid_argument("scene: not enough free cells for the requested persons");
  }
  // Partial Fisher-Yates: the first person_count cells are the placements.
  Rng rng(spec.seed);
  for (std::size_t i = 0; i < spec.person_count; ++i) {
    const std::size_t j = i + rng.index(free_cells.size() - i);
    std::swap(free_cells[i], free_cells[j]);
    const auto [cx, cy] = free_cells[i];
    const auto& glyph = kGlyphs[static_cast<std::size_t>(spec.behavior)];
    for (std::size_t r = 0; r < kGlyphCell; ++r) {
      for (std::size_t c = 0; c < kGlyphCell; ++c) {
        if (glyph[r][c] == '#') {
          scene.image[(cy * kGlyphCell + r) * kSceneSize + cx * kGlyphCell + c] = kGlyphIntensity;
        }
      }
    }
  }
  return scene;
}

SceneSpec random_scene_spec(std::uint64_t seed, const PixelRect& psz_rect) {
  Rng rng(seed);
  SceneSpec spec;
  spec.behavior = static_cast<Behavior>(rng.index(4));
  spec.person_count = static_cast<std::uint32_t>(
      spec.behavior == Behavior::Normal ? rng.index(kMaxPersons + 1) : 1 + rng.index(kMaxPersons));
  spec.identity_id = static_cast<std::uint32_t>(rng.index(kIdentityCount));
  spec.psz_rect = psz_rect;
  spec.seed = rng.next_u64();
  return spec;
}

std::vector<Scene> generate_dataset(std::size_t n, std::uint64_t seed, const PixelRect& psz_rect) {
  std::vector<Scene> scenes;
  scenes.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    scenes.push_back(generate_scene(random_scene_spec(derive_seed(seed, i), psz_rect)));
  }
  return scenes;
}

}  // namespace spad
