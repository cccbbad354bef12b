#pragma once

#include "logan/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace logan {

// Shape of layer l: feature channels, native resolution, style dimension.
struct LayerSpec {
    int channels = 0;
    int height = 0;
    int width = 0;
    int style_dim = 0;

    bool operator==(const LayerSpec&) const = default;
};

struct ToyConfig {
    std::uint64_t seed = 0;
    int layer_count = 14;
    int channels = 16;
    int style_dim = 32;
    int max_resolution = 256;
    bool conv_bias = true;
};

struct CheckpointDescriptor {
    std::filesystem::path manifest;
};

using ModelConfig = std::variant<ToyConfig, CheckpointDescriptor>;

enum class BackboneKind { Toy, Checkpoint };

// Weights of one style-modulated layer. The affine map T sends w (D) to
// 2C values: rows [0,C) are the AdaIN scale, rows [C,2C) the bias.
struct LayerWeights {
    std::vector<float> style_matrix; // 2C x D, row-major
    std::vector<float> style_bias;   // 2C
    std::vector<float> conv_weight;  // C_out x C_in x 3 x 3
    std::vector<float> conv_bias;    // C_out
};

// Layer-wise generator G = G^(L) o ... o G^(1). Layer indices are 1-based;
// layer l is the l-th style-modulated convolution (toRGB is not counted).
// Immutable after construction.
class GeneratorModel {
public:
    // `specs` lists layers 1..L; the post-last-layer spec is derived.
    GeneratorModel(BackboneKind kind, std::vector<LayerSpec> specs, FeatureMap constant,
                   std::vector<LayerWeights> layers, std::vector<float> rgb_weight, std::vector<float> rgb_bias,
                   std::optional<std::uint64_t> seed = std::nullopt);

    BackboneKind kind() const { return kind_; }
    std::optional<std::uint64_t> seed() const { return seed_; }
    int layer_count() const { return static_cast<int>(specs_.size()) - 1; }

    // Valid for 1..L+1; layer L+1 describes the post-last-layer features.
    const LayerSpec& spec(int layer) const;
    int output_height() const { return specs_.back().height; }
    int output_width() const { return specs_.back().width; }

    const FeatureMap& constant_input() const { return constant_; }
    const LayerWeights& weights(int layer) const;
    const std::vector<float>& rgb_weight() const { return rgb_weight_; }
    const std::vector<float>& rgb_bias() const { return rgb_bias_; }

    StyleParams style_params(const LatentCode& code) const;

    // SHA-256 over every weight in a fixed order.
    const std::string& weight_digest() const { return digest_; }

private:
    BackboneKind kind_;
    std::vector<LayerSpec> specs_; // L+1 entries
    FeatureMap constant_;
    std::vector<LayerWeights> layers_;
    std::vector<float> rgb_weight_; // 3 x C_L
    std::vector<float> rgb_bias_;   // 3
    std::optional<std::uint64_t> seed_;
    std::string digest_;
};

inline constexpr double kAdaInEpsilon = 1e-8;

// Toy resolution schedule r(l) = min(4 * 2^floor((l-1)/2), max_resolution).
int toy_resolution(int layer, int max_resolution = 256);

GeneratorModel instantiate_model(const ModelConfig& config);

// AdaIN over every channel: normalize by (std + eps), then scale and shift.
FeatureMap apply_style(const FeatureMap& features, const StyleParams& style);
FeatureMap apply_style(const GeneratorModel& model, const FeatureMap& features, const LatentCode& code);

// Seeded 3x3 convolution, leaky ReLU, nearest upsampling to layer+1.
FeatureMap forward_layer(const GeneratorModel& model, const FeatureMap& styled, int layer);

Image render_rgb(const GeneratorModel& model, const FeatureMap& final_features);

// Unedited path; codes[l-1] drives layer l.
Image synthesize(const GeneratorModel& model, std::span<const LatentCode> codes);

// Pre-style features F^(1)..F^(upto) of the unedited path (index l-1).
std::vector<FeatureMap> trace_features(const GeneratorModel& model, std::span<const LatentCode> codes, int upto);

// One standard-normal D-vector from `seed`, repeated for every layer.
std::vector<LatentCode> sample_codes(const GeneratorModel& model, std::uint64_t seed);
LatentCode sample_code(const GeneratorModel& model, std::uint64_t seed, int layer);

void validate_codes(const GeneratorModel& model, std::span<const LatentCode> codes);

} // namespace logan
