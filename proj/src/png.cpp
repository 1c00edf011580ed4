// Copyright 2026 The DGDM Authors
// SPDX-License-Identifier: Apache-2.0

#include <png.h>

#include <cstdio>
#include <memory>
#include <stdexcept>

#include "dgdm/pipeline.hpp"

namespace dgdm {

void write_png_gray(const std::string& path, const std::vector<std::uint8_t>& pixels, std::int64_t width,
                    std::int64_t height) {
  if (width <= 0 || height <= 0 || pixels.size() != static_cast<std::size_t>(width * height))
    throw std::invalid_argument("write_png_gray: pixel buffer does not match the image size");
  std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.c_str(), "wb"), &std::fclose);
  if (!fp) throw std::runtime_error("cannot write " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw std::runtime_error("libpng: out of memory");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("libpng failed writing " + path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::int64_t r = 0; r < height; ++r)
    png_write_row(png, const_cast<png_bytep>(pixels.data() + r * width));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace dgdm
