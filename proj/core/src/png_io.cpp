// SPDX-License-Identifier: Apache-2.0
#include "asd/png_io.hpp"

#include <png.h>

#include <bit>
#include <csetjmp>
#include <cstdio>
#include <fstream>
#include <memory>
#include <string>
#include <system_error>

#include "asd/error.hpp"

namespace asd::io {

namespace fs = std::filesystem;

void write_file_atomic(const fs::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  }
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot rename " + tmp.string() + " to " + path.string());
  }
}

void write_file_atomic(const fs::path& path, std::string_view text) {
  write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::vector<std::uint8_t> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed: " + path.string());
  return bytes;
}

}  // namespace asd::io

namespace asd::png {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void on_png_error(png_structp png_ptr, png_const_charp msg) {
  auto* message = static_cast<std::string*>(png_get_error_ptr(png_ptr));
  if (message) *message = msg;
  png_longjmp(png_ptr, 1);
}

void on_png_warning(png_structp, png_const_charp) {}

void append_bytes(png_structp png_ptr, png_bytep data, png_size_t length) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png_ptr));
  out->insert(out->end(), data, data + length);
}

void flush_nothing(png_structp) {}

}  // namespace

Raster read(const std::filesystem::path& path, bool keep_indices) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) throw IoError("cannot open PNG " + path.string());

  png_byte signature[8];
  if (std::fread(signature, 1, 8, file.get()) != 8 || png_sig_cmp(signature, 0, 8) != 0) {
    throw IoError("not a PNG file: " + path.string());
  }

  std::string message;
  png_structp png_ptr = png_create_read_struct(PNG_LIBPNG_VER_STRING, &message, on_png_error, on_png_warning);
  if (!png_ptr) throw IoError("libpng init failed");
  png_infop info_ptr = png_create_info_struct(png_ptr);
  if (!info_ptr) {
    png_destroy_read_struct(&png_ptr, nullptr, nullptr);
    throw IoError("libpng init failed");
  }

  Raster raster;
  std::vector<png_byte> buffer;
  std::vector<png_bytep> rows;
  volatile bool depth_error = false;
  volatile int file_depth = 0;

  if (setjmp(png_jmpbuf(png_ptr))) {
    png_destroy_read_struct(&png_ptr, &info_ptr, nullptr);
    throw IoError("corrupt PNG " + path.string() + ": " + message);
  }

  png_init_io(png_ptr, file.get());
  png_set_sig_bytes(png_ptr, 8);
  png_read_info(png_ptr, info_ptr);

  const int color_type = png_get_color_type(png_ptr, info_ptr);
  file_depth = png_get_bit_depth(png_ptr, info_ptr);

  if (color_type == PNG_COLOR_TYPE_PALETTE) {
    if (keep_indices) {
      if (file_depth < 8) png_set_packing(png_ptr);
    } else {
      png_set_palette_to_rgb(png_ptr);
      if (png_get_valid(png_ptr, info_ptr, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png_ptr);
    }
    raster.bit_depth = 8;
  } else if (file_depth == 8 || file_depth == 16) {
    raster.bit_depth = file_depth;
    if (file_depth == 16 && std::endian::native == std::endian::little) png_set_swap(png_ptr);
  } else {
    depth_error = true;
  }

  if (!depth_error) {
    png_read_update_info(png_ptr, info_ptr);
    raster.height = png_get_image_height(png_ptr, info_ptr);
    raster.width = png_get_image_width(png_ptr, info_ptr);
    raster.channels = png_get_channels(png_ptr, info_ptr);
    const std::size_t row_bytes = png_get_rowbytes(png_ptr, info_ptr);
    buffer.resize(row_bytes * raster.height);
    rows.resize(raster.height);
    for (std::size_t r = 0; r < raster.height; ++r) rows[r] = buffer.data() + r * row_bytes;
    png_read_image(png_ptr, rows.data());
    png_read_end(png_ptr, nullptr);
  }
  png_destroy_read_struct(&png_ptr, &info_ptr, nullptr);

  if (depth_error) {
    throw ContractError("unsupported bit depth " + std::to_string(static_cast<int>(file_depth)) + " in " + path.string() +
                        " (expected 8 or 16)");
  }

  const std::size_t count = raster.height * raster.width * raster.channels;
  raster.samples.resize(count);
  const std::size_t row = raster.width * raster.channels;
  for (std::size_t r = 0; r < raster.height; ++r) {
    if (raster.bit_depth == 16) {
      std::copy_n(reinterpret_cast<const std::uint16_t*>(rows[r]), row, raster.samples.begin() + r * row);
    } else {
      std::copy_n(rows[r], row, raster.samples.begin() + r * row);
    }
  }
  return raster;
}

void write(const std::filesystem::path& path, const Raster& raster) {
  if (raster.bit_depth != 8 && raster.bit_depth != 16) {
    throw ContractError("PNG write: bit depth must be 8 or 16");
  }
  if (raster.channels < 1 || raster.channels > 4) throw ContractError("PNG write: 1 to 4 channels supported");
  if (raster.samples.size() != raster.height * raster.width * raster.channels) {
    throw ContractError("PNG write: sample count does not match shape");
  }
  static constexpr int kColorTypes[] = {PNG_COLOR_TYPE_GRAY, PNG_COLOR_TYPE_GRAY_ALPHA, PNG_COLOR_TYPE_RGB,
                                        PNG_COLOR_TYPE_RGB_ALPHA};

  std::string message;
  png_structp png_ptr = png_create_write_struct(PNG_LIBPNG_VER_STRING, &message, on_png_error, on_png_warning);
  if (!png_ptr) throw IoError("libpng init failed");
  png_infop info_ptr = png_create_info_struct(png_ptr);
  if (!info_ptr) {
    png_destroy_write_struct(&png_ptr, nullptr);
    throw IoError("libpng init failed");
  }

  const std::size_t bytes_per_sample = raster.bit_depth == 16 ? 2 : 1;
  const std::size_t row_bytes = raster.width * raster.channels * bytes_per_sample;
  std::vector<png_byte> buffer(row_bytes * raster.height);
  for (std::size_t n = 0; n < raster.samples.size(); ++n) {
    const std::uint16_t v = raster.samples[n];
    if (bytes_per_sample == 2) {
      buffer[2 * n] = static_cast<png_byte>(v >> 8);
      buffer[2 * n + 1] = static_cast<png_byte>(v & 0xff);
    } else {
      buffer[n] = static_cast<png_byte>(v);
    }
  }
  std::vector<png_bytep> rows(raster.height);
  for (std::size_t r = 0; r < raster.height; ++r) rows[r] = buffer.data() + r * row_bytes;

  std::vector<std::uint8_t> encoded;
  if (setjmp(png_jmpbuf(png_ptr))) {
    png_destroy_write_struct(&png_ptr, &info_ptr);
    throw IoError("PNG encode failed for " + path.string() + ": " + message);
  }
  png_set_write_fn(png_ptr, &encoded, append_bytes, flush_nothing);
  png_set_compression_level(png_ptr, 6);
  png_set_filter(png_ptr, PNG_FILTER_TYPE_BASE, PNG_FILTER_NONE);
  png_set_IHDR(png_ptr, info_ptr, static_cast<png_uint_32>(raster.width), static_cast<png_uint_32>(raster.height),
               raster.bit_depth, kColorTypes[raster.channels - 1], PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_BASE, PNG_FILTER_TYPE_BASE);
  png_write_info(png_ptr, info_ptr);
  png_write_image(png_ptr, rows.data());
  png_write_end(png_ptr, nullptr);
  png_destroy_write_struct(&png_ptr, &info_ptr);

  io::write_file_atomic(path, encoded);
}

}  // namespace asd::png
