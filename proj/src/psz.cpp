#include "spad/psz.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace spad {

PixelMask::PixelMask(std::size_t width, std::size_t height)
    : width_(width), height_(height), bits_(width * height, 0) {}

std::size_t PixelMask::count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

bool PixelMask::subset_of(const PixelMask& other) const {
  if (width_ != other.width_ || height_ != other.height_) return false;
  for (std::size_t i = 0; i < bits_.size(); ++i) {
    if (bits_[i] && !other.bits_[i]) return false;
  }
  return true;
}

PixelMask& PixelMask::operator|=(const PixelMask& other) {
  if (width_ != other.width_ || height_ != other.height_) {
    throw std::invalid_argument("mask union: dimension mismatch");
  }
  for (std::size_t i = 0; i < bits_.size(); ++i) bits_[i] |= other.bits_[i];
  return *this;
}

PatchIndexSet::PatchIndexSet(std::initializer_list<std::size_t> indices)
    : PatchIndexSet(std::vector<std::size_t>(indices)) {}

PatchIndexSet::PatchIndexSet(std::vector<std::size_t> indices) : indices_(std::move(indices)) {
  std::sort(indices_.begin(), indices_.end());
  indices_.erase(std::unique(indices_.begin(), indices_.end()), indices_.end());
}

PatchIndexSet PatchIndexSet::all(std::size_t patch_count) {
  std::vector<std::size_t> v(patch_count);
  for (std::size_t i = 0; i < patch_count; ++i) v[i] = i;
  return PatchIndexSet(std::move(v));
}

bool PatchIndexSet::contains(std::size_t index) const {
  return std::binary_search(indices_.begin(), indices_.end(), index);
}

bool PatchIndexSet::subset_of(const PatchIndexSet& other) const {
  return std::includes(other.indices_.begin(), other.indices_.end(), indices_.begin(),
                       indices_.end());
}

void PatchIndexSet::validate(std::size_t patch_count) const {
  if (!indices_.empty() && indices_.back() >= patch_count) {
    throw std::out_of_range("patch index " + std::to_string(indices_.back()) +
                            " outside [0, " + std::to_string(patch_count) + ")");
  }
}

PixelMask rect_to_mask(const PixelRect& rect, std::size_t width, std::size_t height) {
  if (rect.x0 > rect.x1 || rect.y0 > rect.y1 || rect.x1 > width || rect.y1 > height) {
    throw std::out_of_range("rectangle outside image bounds");
  }
  PixelMask mask(width, height);
  for (std::size_t y = rect.y0; y < rect.y1; ++y) {
    for (std::size_t x = rect.x0; x < rect.x1; ++x) mask.set(x, y);
  }
  return mask;
}

PatchIndexSet mask_to_patches(const PixelMask& mask, std::size_t patch, double min_overlap) {
  if (patch == 0 || mask.width() % patch != 0 || mask.height() % patch != 0) {
    throw std::invalid_argument("mask dimensions not divisible by patch size");
  }
  if (!(min_overlap >= 0.0 && min_overlap <= 1.0)) {
    throw std::invalid_argument("min_overlap must lie in [0, 1]");
  }
  const std::size_t grid_w = mask.width() / patch;
  const std::size_t grid_h = mask.height() / patch;
  const double area = static_cast<double>(patch * patch);
  std::vector<std::size_t> out;
  for (std::size_t py = 0; py < grid_h; ++py) {
    for (std::size_t px = 0; px < grid_w; ++px) {
      std::size_t covered = 0;
      for (std::size_t y = py * patch; y < (py + 1) * patch; ++y) {
        for (std::size_t x = px * patch; x < (px + 1) * patch; ++x) covered += mask.at(x, y);
      }
      if (static_cast<double>(covered) / area > min_overlap) out.push_back(py * grid_w + px);
    }
  }
  return PatchIndexSet(std::move(out));
}

void write_mask(std::ostream& out, const PixelMask& mask) {
  out << mask.width() << ' ' << mask.height() << '\n';
  for (std::size_t y = 0; y < mask.height(); ++y) {
    for (std::size_t x = 0; x < mask.width(); ++x) out << (mask.at(x, y) ? '1' : '0');
    out << '\n';
  }
}

PixelMask read_mask(std::istream& in) {
  std::size_t width = 0, height = 0;
  if (!(in >> width >> height) || width == 0 || height == 0) {
    throw std::runtime_error("mask file: bad header");
  }
  PixelMask mask(width, height);
  for (std::size_t y = 0; y < height; ++y) {
    std::string line;
    if (!(in >> line) || line.size() != width) {
      throw std::runtime_error("mask file: row " + std::to_string(y) + " malformed");
    }
    for (std::size_t x = 0; x < width; ++x) {
      if (line[x] != '0' && line[x] != '1') throw std::runtime_error("mask file: bad character");
      mask.set(x, y, line[x] == '1');
    }
  }
  return mask;
}

PixelMask load_mask(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open mask file " + path);
  return read_mask(in);
}

void save_mask(const std::string& path, const PixelMask& mask) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write mask file " + path);
  write_mask(out, mask);
}

}  // namespace spad
