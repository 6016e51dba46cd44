#pragma once

// Checkpoint file, little-endian, no padding:
//   magic "MUN1" | version u32 = 1 | tensor_count u32
//   per tensor: name_len u16 | name (UTF-8) | dtype u8 (0 = f32) | ndim u8 |
//               dims u32 x ndim | payload f32 x numel
// Tensors appear in parameter definition order, followed by one metadata
// record "meta.input_size" (dims [1]) holding the model's input size.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "miniseg/unet.hpp"

namespace miniseg {

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const UNet& model);
// Throws FormatError with the byte offset of the first bad field.
UNet decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const UNet& model, const std::filesystem::path& path);
UNet load_checkpoint(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace miniseg
