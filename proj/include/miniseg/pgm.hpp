#pragma once

// Binary greyscale netpbm (P5, maxval 255). Pixel value p maps to p / 255.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "miniseg/tensor.hpp"

namespace miniseg {

struct GrayImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> pixels;  // row-major
};

// Throws FormatError carrying the byte offset of the problem.
GrayImage parse_pgm(std::span<const std::uint8_t> bytes);
// Canonical form: "P5\n<w> <h>\n255\n" followed by the pixels.
std::vector<std::uint8_t> encode_pgm(const GrayImage& img);

// 1x1xHxW tensor, values p / 255.
Tensor to_tensor(const GrayImage& img);
// Rounds v * 255 to the nearest integer after clamping to [0, 1].
GrayImage from_tensor(const Tensor& t);

Tensor read_pgm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const Tensor& image);

}  // namespace miniseg
