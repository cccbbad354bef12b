#pragma once

#include "logan/tensor.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

namespace logan {

using Bytes = std::vector<std::uint8_t>;

// Single-channel 8-bit raster. For palette PNGs `pixels` holds indices.
struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;
};

using Rgb8 = std::array<std::uint8_t, 3>;

Bytes encode_png_rgb(const Image& image);
Bytes encode_png_gray(const GrayImage& image);
Bytes encode_png_indexed(const GrayImage& indices, std::span<const Rgb8> palette);

// Accepts 8-bit grayscale and 8-bit (or packed) palette PNGs.
GrayImage decode_png_gray(std::span<const std::uint8_t> png);

Bytes read_file(const std::filesystem::path& path);
// Writes to a sibling temporary file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_file_atomic(const std::filesystem::path& path, std::string_view text);

} // namespace logan
