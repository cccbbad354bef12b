#pragma once

#include "logan/generator.hpp"

#include <filesystem>
#include <span>
#include <vector>

namespace logan {

// Checkpoint adapter. A manifest (JSON) declares the layer specs and names
// little-endian float32 blobs, paths relative to the manifest:
//
//   {"format": "logan-checkpoint", "version": 1, "indexing": "conv-only",
//    "constant": "constant.f32",            C1 x H1 x W1
//    "rgb": "rgb.f32",                      3 x C_L weights, then 3 biases
//    "layers": [{"channels": C, "height": H, "width": W, "style_dim": D,
//                "style": "l01_style.f32",  2C x D affine, then 2C biases
//                "conv": "l01_conv.f32"}]}  C_next x C x 3 x 3, then C_next
//
// All matrices are row-major. Layer l of the manifest is the l-th
// style-modulated convolution of the source network.
GeneratorModel load_checkpoint(const std::filesystem::path& manifest);

// Writes `model` in the adapter format; returns the manifest path.
std::filesystem::path export_checkpoint(const GeneratorModel& model, const std::filesystem::path& directory);

std::vector<float> read_f32_blob(const std::filesystem::path& path);
void write_f32_blob(const std::filesystem::path& path, std::span<const float> values);

} // namespace logan
