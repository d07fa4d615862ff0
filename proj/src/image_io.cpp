#include "spad/image_io.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace spad {

void write_image(std::ostream& out, const Tensor& image) {
  if (image.rank() != 3 || image.dim(2) != 1) {
    throw std::invalid_argument("write_image: expected a single-channel H x W x 1 image");
  }
  const std::size_t h = image.dim(0), w = image.dim(1);
  out << w << ' ' << h << '\n';
  out.precision(17);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) out << (x ? " " : "") << image[y * w + x];
    out << '\n';
  }
}

Tensor read_image(std::istream& in) {
  std::size_t w = 0, h = 0;
  if (!(in >> w >> h) || w == 0 || h == 0 || w > 4096 || h > 4096) {
    throw std::runtime_error("image file: bad header");
  }
  Tensor image({h, w, 1});
  for (auto& v : image.data()) {
    if (!(in >> v)) throw std::runtime_error("image file: truncated pixel data");
  }
  return image;
}

void save_image(const std::string& path, const Tensor& image) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write image file " + path);
  write_image(out, image);
}

Tensor load_image(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open image file " + path);
  return read_image(in);
}

}  // namespace spad
