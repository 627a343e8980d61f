#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>

#include "radmesh/render/image.hpp"

namespace radmesh::render {

double srgb_encode(double v) {
  v = std::clamp(v, 0.0, 1.0);
  return v <= 0.0031308 ? 12.92 * v : 1.055 * std::pow(v, 1.0 / 2.4) - 0.055;
}

double srgb_decode(double v) {
  return v <= 0.04045 ? v / 12.92 : std::pow((v + 0.055) / 1.055, 2.4);
}

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

std::string extension(const std::string& path) {
  const auto dot = path.find_last_of('.');
  if (dot == std::string::npos) return {};
  std::string ext = path.substr(dot + 1);
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext;
}

}  // namespace

void write_png(const std::string& path, const ImageBuffer& image) {
  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) throw Error(ErrorCode::Io, "cannot open " + path + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::Io, "libpng initialisation failed");
  }
  std::vector<std::uint8_t> row(static_cast<std::size_t>(image.width) * 3);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::Io, "failed writing " + path);
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, image.width, image.height, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_set_sRGB(png, info, PNG_sRGB_INTENT_PERCEPTUAL);
  png_write_info(png, info);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width * 3; ++x) {
      const double v = srgb_encode(image.rgb[static_cast<std::size_t>(y) * image.width * 3 + x]);
      row[x] = static_cast<std::uint8_t>(std::lround(v * 255.0));
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

ImageBuffer read_png(const std::string& path) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) throw Error(ErrorCode::Io, "cannot open " + path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorCode::Io, "libpng initialisation failed");
  }
  ImageBuffer image;
  std::vector<std::uint8_t> row;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(ErrorCode::Format, "invalid PNG " + path);
  }
  png_init_io(png, file.get());
  png_read_info(png, info);
  png_set_expand(png);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_gray_to_rgb(png);
  png_read_update_info(png, info);
  const int w = static_cast<int>(png_get_image_width(png, info));
  const int h = static_cast<int>(png_get_image_height(png, info));
  image = ImageBuffer(w, h);
  row.resize(png_get_rowbytes(png, info));
  for (int y = 0; y < h; ++y) {
    png_read_row(png, row.data(), nullptr);
    for (int x = 0; x < w * 3; ++x) {
      image.rgb[static_cast<std::size_t>(y) * w * 3 + x] =
          static_cast<float>(srgb_decode(row[x] / 255.0));
    }
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return image;
}

void write_pfm(const std::string& path, const ImageBuffer& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot open " + path + " for writing");
  out << "PF\n" << image.width << ' ' << image.height << "\n-1.0\n";
  // PFM stores rows bottom to top
  for (int y = image.height - 1; y >= 0; --y) {
    out.write(reinterpret_cast<const char*>(image.rgb.data() +
                                            static_cast<std::size_t>(y) * image.width * 3),
              static_cast<std::streamsize>(sizeof(float) * image.width * 3));
  }
  if (!out) throw Error(ErrorCode::Io, "failed writing " + path);
}

ImageBuffer read_pfm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  std::string magic;
  int w = 0, h = 0;
  double scale = 0.0;
  in >> magic >> w >> h >> scale;
  in.get();
  if (magic != "PF" || w <= 0 || h <= 0 || scale == 0.0) {
    throw Error(ErrorCode::Format, "not a color PFM: " + path);
  }
  if (scale > 0.0) throw Error(ErrorCode::Format, "big-endian PFM is not supported: " + path);
  ImageBuffer image(w, h);
  for (int y = h - 1; y >= 0; --y) {
    in.read(reinterpret_cast<char*>(image.rgb.data() + static_cast<std::size_t>(y) * w * 3),
            static_cast<std::streamsize>(sizeof(float) * w * 3));
  }
  if (!in) throw Error(ErrorCode::Format, "truncated PFM: " + path);
  return image;
}

void write_image(const std::string& path, const ImageBuffer& image) {
  const std::string ext = extension(path);
  if (ext == "png") return write_png(path, image);
  if (ext == "pfm") return write_pfm(path, image);
  throw Error(ErrorCode::Format, "unsupported image extension: " + path);
}

ImageBuffer read_image(const std::string& path) {
  const std::string ext = extension(path);
  if (ext == "png") return read_png(path);
  if (ext == "pfm") return read_pfm(path);
  throw Error(ErrorCode::Format, "unsupported image extension: " + path);
}

}  // namespace radmesh::render
