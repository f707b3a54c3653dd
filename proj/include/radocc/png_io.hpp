#pragma once

#include <png.h>

#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "radocc/error.hpp"
#include "radocc/grid.hpp"

namespace radocc::png {

/// Grayscale image with 8 or 16 bit samples, row-major.
struct GrayImage {
  int width = 0;
  int height = 0;
  int bit_depth = 8;
  std::vector<std::uint16_t> pixels;

  std::uint16_t at(int r, int c) const {
    return pixels[static_cast<std::size_t>(r) * static_cast<std::size_t>(width) + static_cast<std::size_t>(c)];
  }
};

namespace detail {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace detail

inline void write_gray(const std::filesystem::path& path, const GrayImage& img) {
  if (img.bit_depth != 8 && img.bit_depth != 16) throw InvalidArgument("png: bit depth must be 8 or 16");
  if (img.pixels.size() != static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height))
    throw InvalidArgument("png: pixel buffer does not match shape");
  detail::FilePtr fp(std::fopen(path.string().c_str(), "wb"));
  if (!fp) throw std::runtime_error("png: cannot open " + path.string() + " for writing");

  png_structp png_ptr = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png_ptr) throw std::runtime_error("png: png_create_write_struct failed");
  png_infop info = png_create_info_struct(png_ptr);
  if (!info) {
    png_destroy_write_struct(&png_ptr, nullptr);
    throw std::runtime_error("png: png_create_info_struct failed");
  }

  std::vector<png_byte> row(static_cast<std::size_t>(img.width) * (img.bit_depth == 16 ? 2 : 1));

  if (setjmp(png_jmpbuf(png_ptr))) {
    png_destroy_write_struct(&png_ptr, &info);
    throw std::runtime_error("png: error while writing " + path.string());
  }
  png_init_io(png_ptr, fp.get());
  png_set_IHDR(png_ptr, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height),
               img.bit_depth, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  // Fixed zlib settings keep output byte-identical across runs.
  png_set_compression_level(png_ptr, 6);
  png_write_info(png_ptr, info);
  for (int r = 0; r < img.height; ++r) {
    for (int c = 0; c < img.width; ++c) {
      const std::uint16_t v = img.at(r, c);
      if (img.bit_depth == 16) {
        row[2 * static_cast<std::size_t>(c)] = static_cast<png_byte>(v >> 8);
        row[2 * static_cast<std::size_t>(c) + 1] = static_cast<png_byte>(v & 0xff);
      } else {
        row[static_cast<std::size_t>(c)] = static_cast<png_byte>(v);
      }
    }
    png_write_row(png_ptr, row.data());
  }
  png_write_end(png_ptr, nullptr);
  png_destroy_write_struct(&png_ptr, &info);
}

/// 8-bit RGB, `rgb` holds width * height * 3 bytes row-major.
inline void write_rgb(const std::filesystem::path& path, int width, int height, const std::vector<std::uint8_t>& rgb) {
  if (rgb.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3)
    throw InvalidArgument("png: RGB buffer does not match shape");
  detail::FilePtr fp(std::fopen(path.string().c_str(), "wb"));
  if (!fp) throw std::runtime_error("png: cannot open " + path.string() + " for writing");
  png_structp png_ptr = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png_ptr) throw std::runtime_error("png: png_create_write_struct failed");
  png_infop info = png_create_info_struct(png_ptr);
  if (!info) {
    png_destroy_write_struct(&png_ptr, nullptr);
    throw std::runtime_error("png: png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png_ptr))) {
    png_destroy_write_struct(&png_ptr, &info);
    throw std::runtime_error("png: error while writing " + path.string());
  }
  png_init_io(png_ptr, fp.get());
  png_set_IHDR(png_ptr, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_set_compression_level(png_ptr, 6);
  png_write_info(png_ptr, info);
  for (int r = 0; r < height; ++r)
    png_write_row(png_ptr, const_cast<png_bytep>(rgb.data() + static_cast<std::size_t>(r) * width * 3));
  png_write_end(png_ptr, nullptr);
  png_destroy_write_struct(&png_ptr, &info);
}

inline GrayImage read_gray(const std::filesystem::path& path) {
  detail::FilePtr fp(std::fopen(path.string().c_str(), "rb"));
  if (!fp) throw ParseError("png: cannot open " + path.string());
  png_byte sig[8];
  if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8))
    throw ParseError("png: " + path.string() + " is not a PNG file");

  png_structp png_ptr = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png_ptr) throw std::runtime_error("png: png_create_read_struct failed");
  png_infop info = png_create_info_struct(png_ptr);
  if (!info) {
    png_destroy_read_struct(&png_ptr, nullptr, nullptr);
    throw std::runtime_error("png: png_create_info_struct failed");
  }

  GrayImage img;
  std::vector<png_byte> row;
  if (setjmp(png_jmpbuf(png_ptr))) {
    png_destroy_read_struct(&png_ptr, &info, nullptr);
    throw ParseError("png: corrupt file " + path.string());
  }
  png_init_io(png_ptr, fp.get());
  png_set_sig_bytes(png_ptr, 8);
  png_read_info(png_ptr, info);
  const auto color = png_get_color_type(png_ptr, info);
  const int depth = png_get_bit_depth(png_ptr, info);
  if (color != PNG_COLOR_TYPE_GRAY || (depth != 8 && depth != 16)) {
    png_destroy_read_struct(&png_ptr, &info, nullptr);
    throw ParseError("png: " + path.string() + " is not 8/16-bit grayscale");
  }
  img.width = static_cast<int>(png_get_image_width(png_ptr, info));
  img.height = static_cast<int>(png_get_image_height(png_ptr, info));
  img.bit_depth = depth;
  img.pixels.resize(static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height));
  row.resize(png_get_rowbytes(png_ptr, info));
  for (int r = 0; r < img.height; ++r) {
    png_read_row(png_ptr, row.data(), nullptr);
    for (int c = 0; c < img.width; ++c) {
      const std::size_t i = static_cast<std::size_t>(r) * static_cast<std::size_t>(img.width) + static_cast<std::size_t>(c);
      if (depth == 16)
        img.pixels[i] = static_cast<std::uint16_t>((row[2 * static_cast<std::size_t>(c)] << 8) |
                                                   row[2 * static_cast<std::size_t>(c) + 1]);
      else
        img.pixels[i] = row[static_cast<std::size_t>(c)];
    }
  }
  png_read_end(png_ptr, nullptr);
  png_destroy_read_struct(&png_ptr, &info, nullptr);
  return img;
}

/// Quantizes [0,1] values to 16 bits.
inline GrayImage from_raster16(const Raster& r) {
  GrayImage img{r.cols(), r.rows(), 16, {}};
  img.pixels.resize(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) {
    const double v = std::clamp(static_cast<double>(r.data()[i]), 0.0, 1.0);
    img.pixels[i] = static_cast<std::uint16_t>(std::lround(v * 65535.0));
  }
  return img;
}

inline Raster to_raster(const GrayImage& img) {
  Raster r(img.height, img.width);
  const double scale = img.bit_depth == 16 ? 65535.0 : 255.0;
  for (std::size_t i = 0; i < img.pixels.size(); ++i)
    r.data()[i] = static_cast<float>(img.pixels[i] / scale);
  return r;
}

}  // namespace radocc::png
