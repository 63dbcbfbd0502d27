// Lossless 16-bit PNG image I/O (libpng), plus 8-bit grayscale masks.
#pragma once

#include <png.h>

#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include "sc3d/common.hpp"
#include "sc3d/image.hpp"

namespace sc3d::scene {

namespace detail {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace detail

inline void write_png16(const std::string& path, const Image& im) {
  detail::FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw format_error("cannot open for writing: " + path);
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw format_error("png write failed: " + path);
  }
  png_init_io(png, fp.get());
  const int h = im.height(), w = im.width();
  png_set_IHDR(png, info, w, h, 16, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_byte> row(static_cast<std::size_t>(w) * 6);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      auto put = [&](int k, double v) {
        const double c = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
        const auto q = static_cast<unsigned>(c * 65535.0 + 0.5);
        row[6 * x + 2 * k] = static_cast<png_byte>(q >> 8);
        row[6 * x + 2 * k + 1] = static_cast<png_byte>(q & 0xff);
      };
      put(0, im.r(y, x));
      put(1, im.g(y, x));
      put(2, im.b(y, x));
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

inline Image read_png16(const std::string& path) {
  detail::FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw format_error("cannot open: " + path);
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw format_error("png read failed: " + path);
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  const int w = png_get_image_width(png, info);
  const int h = png_get_image_height(png, info);
  if (png_get_color_type(png, info) != PNG_COLOR_TYPE_RGB ||
      png_get_bit_depth(png, info) != 16) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw format_error("expected 16-bit RGB png: " + path);
  }
  Image im(h, w);
  std::vector<png_byte> row(static_cast<std::size_t>(w) * 6);
  for (int y = 0; y < h; ++y) {
    png_read_row(png, row.data(), nullptr);
    for (int x = 0; x < w; ++x) {
      auto get = [&](int k) {
        const unsigned q = (static_cast<unsigned>(row[6 * x + 2 * k]) << 8) |
                           row[6 * x + 2 * k + 1];
        return q / 65535.0;
      };
      im.r(y, x) = get(0);
      im.g(y, x) = get(1);
      im.b(y, x) = get(2);
    }
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return im;
}

inline void write_png_mask(const std::string& path, const Mask2D& mask) {
  detail::FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw format_error("cannot open for writing: " + path);
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw format_error("png write failed: " + path);
  }
  png_init_io(png, fp.get());
  const int h = static_cast<int>(mask.rows()), w = static_cast<int>(mask.cols());
  png_set_IHDR(png, info, w, h, 8, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_byte> row(w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) row[x] = mask(y, x) ? 255 : 0;
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

inline Mask2D read_png_mask(const std::string& path) {
  detail::FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw format_error("cannot open: " + path);
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw format_error("png read failed: " + path);
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  const int w = png_get_image_width(png, info);
  const int h = png_get_image_height(png, info);
  if (png_get_color_type(png, info) != PNG_COLOR_TYPE_GRAY ||
      png_get_bit_depth(png, info) != 8) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw format_error("expected 8-bit gray png: " + path);
  }
  Mask2D mask(h, w);
  std::vector<png_byte> row(w);
  for (int y = 0; y < h; ++y) {
    png_read_row(png, row.data(), nullptr);
    for (int x = 0; x < w; ++x) mask(y, x) = row[x] >= 128 ? 1 : 0;
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return mask;
}

}  // namespace sc3d::scene
