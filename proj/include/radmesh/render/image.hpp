#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "radmesh/error.hpp"
#include "radmesh/vec.hpp"

namespace radmesh::render {

/// Interleaved linear RGB image, row-major, top row first.
template <class T>
struct BasicImage {
  int width = 0;
  int height = 0;
  std::vector<T> rgb;

  BasicImage() = default;
  BasicImage(int w, int h, T fill = T(0))
      : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3, fill) {}

  std::size_t pixels() const { return static_cast<std::size_t>(width) * height; }
  std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }

  Vec3 at(int x, int y) const {
    const std::size_t i = index(x, y) * 3;
    return {double(rgb[i]), double(rgb[i + 1]), double(rgb[i + 2])};
  }
  void set(int x, int y, const Vec3& c) {
    const std::size_t i = index(x, y) * 3;
    rgb[i] = static_cast<T>(c.x);
    rgb[i + 1] = static_cast<T>(c.y);
    rgb[i + 2] = static_cast<T>(c.z);
  }

  template <class U>
  BasicImage<U> cast() const {
    BasicImage<U> out(width, height);
    for (std::size_t i = 0; i < rgb.size(); ++i) out.rgb[i] = static_cast<U>(rgb[i]);
    return out;
  }
};

/// Public image type: 32-bit float linear RGB.
using ImageBuffer = BasicImage<float>;
/// Double precision image used by the training path.
using ImageD = BasicImage<double>;

template <class A, class B>
void require_same_size(const BasicImage<A>& a, const BasicImage<B>& b) {
  if (a.width != b.width || a.height != b.height) {
    throw Error(ErrorCode::DimensionMismatch,
                std::to_string(a.width) + "x" + std::to_string(a.height) + " vs " +
                    std::to_string(b.width) + "x" + std::to_string(b.height));
  }
}

/// 8-bit sRGB-encoded PNG (values clamped to [0, 1]).
void write_png(const std::string& path, const ImageBuffer& image);
/// Reads an 8-bit or 16-bit RGB/RGBA/gray PNG and decodes sRGB to linear.
ImageBuffer read_png(const std::string& path);
/// Little-endian color PFM with 32-bit floats.
void write_pfm(const std::string& path, const ImageBuffer& image);
ImageBuffer read_pfm(const std::string& path);
/// Dispatches on the extension (.png or .pfm).
void write_image(const std::string& path, const ImageBuffer& image);
ImageBuffer read_image(const std::string& path);

double srgb_encode(double linear);
double srgb_decode(double encoded);

}  // namespace radmesh::render
