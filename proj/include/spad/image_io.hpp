#ifndef SPAD_IMAGE_IO_HPP
#define SPAD_IMAGE_IO_HPP

#include <iosfwd>
#include <string>

#include "spad/tensor.hpp"

namespace spad {

// Grayscale text format: "W H" on the first line, then H lines of W
// space-separated floats. Images load as H x W x 1 tensors.
void write_image(std::ostream& out, const Tensor& image);
Tensor read_image(std::istream& in);
void save_image(const std::string& path, const Tensor& image);
Tensor load_image(const std::string& path);

}  // namespace spad

#endif  // SPAD_IMAGE_IO_HPP
