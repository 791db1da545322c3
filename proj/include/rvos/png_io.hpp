// Copyright 2026 The rvoskit Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef RVOS_PNG_IO_HPP_
#define RVOS_PNG_IO_HPP_

// Palette PNG masks. Reads accept 8-bit (or packed) palette and grayscale
// images and treat any nonzero index/value as foreground. Writes a 256-entry
// gray palette with indices 0 and 255.

#include <png.h>

#include <csetjmp>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "rvos/error.hpp"
#include "rvos/mask.hpp"

namespace rvos {

namespace png_detail {

struct FileCloser {
  void operator()(std::FILE* f) const noexcept {
    if (f != nullptr) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

struct ErrorSink {
  std::jmp_buf jump;
  char message[256] = {0};
};

inline void on_error(png_structp png, png_const_charp msg) {
  auto* sink = static_cast<ErrorSink*>(png_get_error_ptr(png));
  std::snprintf(sink->message, sizeof(sink->message), "%s", msg);
  std::longjmp(sink->jump, 1);
}

inline void on_warning(png_structp, png_const_charp) {}

struct Decoded {
  png_uint_32 height = 0;
  png_uint_32 width = 0;
  int channels = 0;
  std::vector<png_byte> pixels;
  std::vector<png_bytep> rows;
};

// Returns false with `sink.message` set on libpng failure. Buffers live in
// `out` so no local with a destructor is live across setjmp.
inline bool decode(std::FILE* file, Decoded& out, ErrorSink& sink) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &sink, on_error, on_warning);
  if (png == nullptr) {
    std::snprintf(sink.message, sizeof(sink.message), "out of memory");
    return false;
  }
  png_infop info = png_create_info_struct(png);
  if (info == nullptr || setjmp(sink.jump) != 0) {
    png_destroy_read_struct(&png, &info, nullptr);
    if (sink.message[0] == 0) std::snprintf(sink.message, sizeof(sink.message), "out of memory");
    return false;
  }
  png_init_io(png, file);
  png_read_info(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (color != PNG_COLOR_TYPE_PALETTE && color != PNG_COLOR_TYPE_GRAY &&
      color != PNG_COLOR_TYPE_GRAY_ALPHA) {
    std::snprintf(sink.message, sizeof(sink.message),
                  "unsupported color type %d (need single-channel)", color);
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  if (depth < 8) png_set_packing(png);
  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);
  out.height = png_get_image_height(png, info);
  out.width = png_get_image_width(png, info);
  out.channels = png_get_channels(png, info);
  const png_size_t stride = png_get_rowbytes(png, info);
  out.pixels.resize(stride * out.height);
  out.rows.resize(out.height);
  for (png_uint_32 r = 0; r < out.height; ++r) out.rows[r] = out.pixels.data() + r * stride;
  png_read_image(png, out.rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

inline bool encode(std::FILE* file, const std::vector<png_byte>& pixels, png_uint_32 height,
                   png_uint_32 width, ErrorSink& sink) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &sink, on_error, on_warning);
  if (png == nullptr) {
    std::snprintf(sink.message, sizeof(sink.message), "out of memory");
    return false;
  }
  png_infop info = png_create_info_struct(png);
  if (info == nullptr || setjmp(sink.jump) != 0) {
    png_destroy_write_struct(&png, &info);
    if (sink.message[0] == 0) std::snprintf(sink.message, sizeof(sink.message), "out of memory");
    return false;
  }
  png_init_io(png, file);
  png_set_IHDR(png, info, width, height, 8, PNG_COLOR_TYPE_PALETTE, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_color palette[256];
  for (int i = 0; i < 256; ++i) {
    palette[i].red = palette[i].green = palette[i].blue = static_cast<png_byte>(i);
  }
  png_set_PLTE(png, info, palette, 256);
  png_write_info(png, info);
  for (png_uint_32 r = 0; r < height; ++r) {
    png_write_row(png, pixels.data() + static_cast<std::size_t>(r) * width);
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

}  // namespace png_detail

inline BinaryMask read_mask_png(const std::filesystem::path& path) {
  png_detail::FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) throw validation_error("cannot open mask file " + path.string());
  png_detail::Decoded decoded;
  png_detail::ErrorSink sink;
  if (!png_detail::decode(file.get(), decoded, sink)) {
    throw validation_error("cannot decode " + path.string() + ": " + sink.message);
  }
  if (decoded.height == 0 || decoded.width == 0) {
    throw validation_error("empty image " + path.string());
  }
  BinaryMask mask(decoded.height, decoded.width);
  const std::size_t stride = decoded.pixels.size() / decoded.height;
  for (std::size_t r = 0; r < decoded.height; ++r) {
    const png_byte* row = decoded.pixels.data() + r * stride;
    for (std::size_t c = 0; c < decoded.width; ++c) {
      if (row[c * static_cast<std::size_t>(decoded.channels)] != 0) mask.set(r, c, true);
    }
  }
  return mask;
}

// Writes to `path`, creating parent directories.
inline void write_mask_png(const std::filesystem::path& path, const BinaryMask& mask) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  if (ec) throw runtime_error("cannot create " + path.parent_path().string() + ": " + ec.message());
  std::vector<png_byte> pixels(mask.size());
  for (std::size_t i = 0; i < pixels.size(); ++i) pixels[i] = mask.test(i) ? 255 : 0;
  png_detail::FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) throw runtime_error("cannot open " + path.string() + " for writing");
  png_detail::ErrorSink sink;
  if (!png_detail::encode(file.get(), pixels, static_cast<png_uint_32>(mask.height()),
                          static_cast<png_uint_32>(mask.width()), sink)) {
    throw runtime_error("cannot encode " + path.string() + ": " + sink.message);
  }
  if (std::fflush(file.get()) != 0) throw runtime_error("write failed for " + path.string());
}

}  // namespace rvos

#endif  // RVOS_PNG_IO_HPP_
