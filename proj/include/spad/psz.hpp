#ifndef SPAD_PSZ_HPP
#define SPAD_PSZ_HPP

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <iosfwd>
#include <string>
#include <vector>

namespace spad {

// Half-open pixel rectangle [x0, x1) x [y0, y1).
struct PixelRect {
  std::size_t x0 = 0, y0 = 0, x1 = 0, y1 = 0;

  bool contains(std::size_t x, std::size_t y) const {
    return x >= x0 && x < x1 && y >= y0 && y < y1;
  }
  std::size_t area() const { return (x1 - x0) * (y1 - y0); }
  friend bool operator==(const PixelRect&, const PixelRect&) = default;
};

// Pixel extent of a privacy-sensitive zone.
class PixelMask {
 public:
  PixelMask() = default;
  PixelMask(std::size_t width, std::size_t height);

  std::size_t width() const { return width_; }
  std::size_t height() const { return height_; }

  bool at(std::size_t x, std::size_t y) const { return bits_[y * width_ + x] != 0; }
  void set(std::size_t x, std::size_t y, bool on = true) { bits_[y * width_ + x] = on ? 1 : 0; }

  std::size_t count() const;
  bool subset_of(const PixelMask& other) const;
  PixelMask& operator|=(const PixelMask& other);

  friend bool operator==(const PixelMask&, const PixelMask&) = default;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<std::uint8_t> bits_;
};

// Sorted, deduplicated patch indices (0-based, CLS excluded).
class PatchIndexSet {
 public:
  PatchIndexSet() = default;
  PatchIndexSet(std::initializer_list<std::size_t> indices);
  explicit PatchIndexSet(std::vector<std::size_t> indices);

  static PatchIndexSet all(std::size_t patch_count);

  const std::vector<std::size_t>& indices() const { return indices_; }
  std::size_t size() const { return indices_.size(); }
  bool empty() const { return indices_.empty(); }
  bool contains(std::size_t index) const;
  bool subset_of(const PatchIndexSet& other) const;

  auto begin() const { return indices_.begin(); }
  auto end() const { return indices_.end(); }

  // Throws std::out_of_range unless every index < patch_count.
  void validate(std::size_t patch_count) const;

  friend bool operator==(const PatchIndexSet&, const PatchIndexSet&) = default;

 private:
  std::vector<std::size_t> indices_;
};

// Throws std::out_of_range unless 0 <= x0 <= x1 <= width and 0 <= y0 <= y1 <= height.
PixelMask rect_to_mask(const PixelRect& rect, std::size_t width, std::size_t height);

// Patch i (row-major over the patch grid) is included iff its covered-pixel
// fraction is strictly greater than min_overlap.
PatchIndexSet mask_to_patches(const PixelMask& mask, std::size_t patch, double min_overlap = 0.0);

// Text format: "W H" on the first line, then H lines of W '0'/'1' characters.
void write_mask(std::ostream& out, const PixelMask& mask);
PixelMask read_mask(std::istream& in);
PixelMask load_mask(const std::string& path);
void save_mask(const std::string& path, const PixelMask& mask);

}  // namespace spad

#endif  // SPAD_PSZ_HPP
