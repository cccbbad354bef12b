#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace logan {

// Per-layer generator activations, channel-major (C x H x W).
struct FeatureMap {
    int layer = 0;
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<float> data;

    FeatureMap() = default;
    FeatureMap(int layer_, int channels_, int height_, int width_, float fill = 0.0f)
        : layer(layer_), channels(channels_), height(height_), width(width_),
          data(static_cast<std::size_t>(channels_) * height_ * width_, fill) {}

    std::size_t plane_size() const { return static_cast<std::size_t>(height) * width; }

    float& at(int c, int y, int x) { return data[(c * plane_size()) + static_cast<std::size_t>(y) * width + x]; }
    float at(int c, int y, int x) const { return data[(c * plane_size()) + static_cast<std::size_t>(y) * width + x]; }

    std::span<float> channel(int c) { return {data.data() + c * plane_size(), plane_size()}; }
    std::span<const float> channel(int c) const { return {data.data() + c * plane_size(), plane_size()}; }

    bool same_shape(const FeatureMap& other) const {
        return channels == other.channels && height == other.height && width == other.width;
    }

    bool operator==(const FeatureMap&) const = default;
};

// Style vector w for one layer.
struct LatentCode {
    int layer = 0;
    std::vector<double> values;

    bool operator==(const LatentCode&) const = default;
};

// Output of the affine map T for one layer.
struct StyleParams {
    int layer = 0;
    std::vector<float> scale;
    std::vector<float> bias;
};

// Planar RGB image with values in [0,1].
struct Image {
    int height = 0;
    int width = 0;
    std::vector<float> data; // 3 x H x W

    Image() = default;
    Image(int height_, int width_)
        : height(height_), width(width_), data(static_cast<std::size_t>(3) * height_ * width_, 0.0f) {}

    float& at(int k, int y, int x) { return data[(static_cast<std::size_t>(k) * height + y) * width + x]; }
    float at(int k, int y, int x) const { return data[(static_cast<std::size_t>(k) * height + y) * width + x]; }

    bool operator==(const Image&) const = default;
};

bool all_finite(std::span<const float> values);
bool all_finite(std::span<const double> values);

} // namespace logan
