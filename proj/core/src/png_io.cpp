// Copyright 2026 The supergbd Authors.
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

#include "supergbd/png_io.hpp"

#include <png.h>

#include <csetjmp>
#include <cstdio>
#include <memory>
#include <string>

#include "supergbd/error.hpp"

namespace supergbd {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f != nullptr) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

// libpng reports errors via longjmp; the handlers below stay in C-land and
// the caller converts the failure into an exception after setjmp returns.
bool decode(std::FILE* file, PngData& out, std::vector<png_byte>& raw, std::string& message) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (png == nullptr) {
    message = "png_create_read_struct failed";
    return false;
  }
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    message = "png_create_info_struct failed";
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    message = "corrupt or unsupported PNG data";
    return false;
  }
  png_init_io(png, file);
  png_read_info(png, info);

  const png_byte color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color & PNG_COLOR_MASK_ALPHA || png_get_valid(png, info, PNG_INFO_tRNS)) png_set_strip_alpha(png);
  if (depth == 16) png_set_swap(png);
  png_read_update_info(png, info);

  const int rows = static_cast<int>(png_get_image_height(png, info));
  const int cols = static_cast<int>(png_get_image_width(png, info));
  const int channels = png_get_channels(png, info);
  const int out_depth = png_get_bit_depth(png, info);
  const std::size_t row_bytes = png_get_rowbytes(png, info);
  raw.assign(row_bytes * rows, 0);
  std::vector<png_bytep> row_ptrs(rows);
  for (int r = 0; r < rows; ++r) row_ptrs[r] = raw.data() + row_bytes * r;
  png_read_image(png, row_ptrs.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  out.rows = rows;
  out.cols = cols;
  out.channels = channels;
  out.bit_depth = out_depth;
  return true;
}

bool encode(std::FILE* file, int rows, int cols, int channels, int bit_depth,
            const std::vector<png_bytep>& row_ptrs, std::string& message) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (png == nullptr) {
    message = "png_create_write_struct failed";
    return false;
  }
  png_infop info = png_create_info_struct(png);
  if (info == nullptr) {
    png_destroy_write_struct(&png, nullptr);
    message = "png_create_info_struct failed";
    return false;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    message = "PNG encoding failed";
    return false;
  }
  png_init_io(png, file);
  png_set_compression_level(png, 6);
  png_set_filter(png, PNG_FILTER_TYPE_BASE, PNG_FILTER_NONE | PNG_FILTER_SUB | PNG_FILTER_UP);
  png_set_IHDR(png, info, static_cast<png_uint_32>(cols), static_cast<png_uint_32>(rows), bit_depth,
               channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_BASE, PNG_FILTER_TYPE_BASE);
  png_write_info(png, info);
  if (bit_depth == 16) png_set_swap(png);
  png_write_image(png, const_cast<png_bytepp>(row_ptrs.data()));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

}  // namespace

PngData read_png(const std::filesystem::path& path) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) throw Error("cannot open PNG '" + path.string() + "'");
  png_byte signature[8];
  if (std::fread(signature, 1, 8, file.get()) != 8 || png_sig_cmp(signature, 0, 8) != 0) {
    throw Error("not a PNG file: '" + path.string() + "'");
  }
  std::rewind(file.get());

  PngData out;
  std::vector<png_byte> raw;
  std::string message;
  if (!decode(file.get(), out, raw, message)) {
    throw Error(message + ": '" + path.string() + "'");
  }
  const std::size_t count = static_cast<std::size_t>(out.rows) * out.cols * out.channels;
  out.samples.resize(count);
  if (out.bit_depth == 16) {
    for (std::size_t i = 0; i < count; ++i) {
      out.samples[i] = static_cast<std::uint16_t>(raw[2 * i] | (raw[2 * i + 1] << 8));
    }
  } else {
    for (std::size_t i = 0; i < count; ++i) out.samples[i] = raw[i];
  }
  return out;
}

void write_png(const std::filesystem::path& path, int rows, int cols, int channels, int bit_depth,
               std::span<const std::uint16_t> samples) {
  if (rows <= 0 || cols <= 0) throw InvalidInput("write_png: empty image");
  if (channels != 1 && channels != 3) throw InvalidInput("write_png: channels must be 1 or 3");
  if (bit_depth != 8 && bit_depth != 16) throw InvalidInput("write_png: bit depth must be 8 or 16");
  const std::size_t count = static_cast<std::size_t>(rows) * cols * channels;
  if (samples.size() != count) throw InvalidInput("write_png: sample count mismatch");

  const std::size_t bytes_per_sample = bit_depth / 8;
  std::vector<png_byte> raw(count * bytes_per_sample);
  for (std::size_t i = 0; i < count; ++i) {
    if (bit_depth == 16) {
      raw[2 * i] = static_cast<png_byte>(samples[i] & 0xFF);
      raw[2 * i + 1] = static_cast<png_byte>(samples[i] >> 8);
    } else {
      if (samples[i] > 255) throw InvalidInput("write_png: 8-bit sample out of range");
      raw[i] = static_cast<png_byte>(samples[i]);
    }
  }
  const std::size_t row_bytes = static_cast<std::size_t>(cols) * channels * bytes_per_sample;
  std::vector<png_bytep> row_ptrs(rows);
  for (int r = 0; r < rows; ++r) row_ptrs[r] = raw.data() + row_bytes * r;

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) throw Error("cannot write PNG '" + path.string() + "'");
  std::string message;
  if (!encode(file.get(), rows, cols, channels, bit_depth, row_ptrs, message)) {
    throw Error(message + ": '" + path.string() + "'");
  }
  if (std::fflush(file.get()) != 0) throw Error("write failed: '" + path.string() + "'");
}

}  // namespace supergbd
