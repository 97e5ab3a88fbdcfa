// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace asd::png {

/// Decoded PNG samples, row-major, channels innermost.
struct Raster {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  int bit_depth = 8;  ///< 8 or 16
  std::vector<std::uint16_t> samples;
};

/// Reads an 8- or 16-bit PNG. Palette images are returned as a single
/// channel of palette indices when keep_indices is set, else expanded to RGB(A).
/// Throws IoError on missing/corrupt files and ContractError on bit depths
/// other than 8 and 16.
Raster read(const std::filesystem::path& path, bool keep_indices = false);

/// Writes with pinned encoder settings (zlib level 6, no filters, no
/// timestamps) so identical rasters produce identical bytes. Atomic.
void write(const std::filesystem::path& path, const Raster& raster);

}  // namespace asd::png

namespace asd::io {

/// Writes bytes to a sibling temporary file and renames it over path.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_file_atomic(const std::filesystem::path& path, std::string_view text);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

}  // namespace asd::io
