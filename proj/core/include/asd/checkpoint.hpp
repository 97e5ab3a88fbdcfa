// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "asd/training.hpp"

/// Versioned checkpoint container:
///
///   "ASDC" | u32 format version | u64 header length | header text
///   u32 array count | per array: u32 name length, name, u32 rank,
///   u64 dims[rank], float64 values
///
/// All integers and reals are little-endian. The header is `key = value`
/// text carrying the format/encoder versions, the band count and the
/// training config echo.
namespace asd::training {

inline constexpr std::uint32_t kCheckpointFormatVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& checkpoint);
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

/// Atomic (temporary file + rename).
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace asd::training
