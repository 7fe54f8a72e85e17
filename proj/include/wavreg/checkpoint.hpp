#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "wavreg/model.hpp"

namespace wavreg {

// Layout, all integers little-endian:
//   "WWRN" | u32 version | u32 n + n bytes of model config text |
//   records until the last 4 bytes: u32 n + n name bytes | u32 rank | rank x u32 dims | f32 payload
//   | u32 CRC-32 of every preceding byte
// Records cover the parameters, then the batch-norm buffers.
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const Model& model);
// Throws FormatError with the byte offset of the first problem.
Model decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const Model& model, const std::filesystem::path& path);
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace wavreg
