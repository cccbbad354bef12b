#pragma once

#include "logan/priority_mask.hpp"
#include "logan/tensor.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace logan {

enum class BackgroundClass : std::uint8_t { Ceiling = 0, Wall = 1, Floor = 2 };

inline constexpr std::array<const char*, 3> kBackgroundClassNames{"ceiling", "wall", "floor"};

// Class-indexed label map; palette[i] names class id i.
struct SegmentationMap {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> labels;
    std::vector<std::string> palette;

    std::uint8_t at(int y, int x) const { return labels[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t& at(int y, int x) { return labels[static_cast<std::size_t>(y) * width + x]; }

    std::optional<std::uint8_t> class_id(const std::string& name) const;
    // Label of a ceiling/wall/floor pixel, nullopt for object classes.
    std::optional<BackgroundClass> background_class(std::uint8_t label) const;

    void validate() const;
    bool operator==(const SegmentationMap&) const = default;
};

struct PixelPoint {
    int x = 0;
    int y = 0;
    bool operator==(const PixelPoint&) const = default;
};

struct LayoutOptions {
    // (k_L, k_R) in dy/dx; fitted from the visible floor-wall boundary when unset.
    std::optional<std::pair<double, double>> fixed_slopes;
};

// Ceiling hull, key point and a two-segment floor boundary anchored on the
// left and right image borders. Coordinates are canonical pixels.
struct Layout {
    int height = 0;
    int width = 0;
    std::vector<PixelPoint> ceiling_hull; // counter-clockwise in image coordinates
    PixelPoint key_point;
    PixelPoint left_anchor;
    PixelPoint right_anchor;
    double slope_left = 0.0;
    double slope_right = 0.0;
    std::vector<std::array<double, 2>> floor_boundary; // left anchor, interior vertex, right anchor

    double boundary_y(double x) const;
    bool in_ceiling(double x, double y) const;
    BackgroundClass classify(double x, double y) const;
};

Layout parse_layout(const SegmentationMap& seg, const LayoutOptions& options = {});

// Three-class map (palette ceiling, wall, floor) sampled at pixel centers.
SegmentationMap rasterize_layout(const Layout& layout, int height, int width);

// Per-layer background features F_b and the layer-resolution region masks.
struct BackgroundFill {
    std::vector<FeatureMap> features;
    std::vector<std::array<LayerMask, 3>> regions;
    std::array<bool, 3> low_confidence{false, false, false};

    const FeatureMap& at_layer(int layer) const;
    bool any_low_confidence() const { return low_confidence[0] || low_confidence[1] || low_confidence[2]; }
};

// Per-class mean of visible background features, painted over each class's
// layout region. A class without visible pixels falls back to the mean of
// all visible background and is flagged low-confidence.
BackgroundFill build_background_fill(std::span<const FeatureMap> features, const SegmentationMap& seg,
                                     const Layout& layout);

// Union of all non-background (object) pixels.
RegionMask object_union_mask(const SegmentationMap& seg);

// 8-bit indexed PNG plus a sidecar JSON palette {"0": "ceiling", ...}
// stored next to it with the extension replaced by ".json".
SegmentationMap load_segmentation(const std::filesystem::path& png_path);
void save_segmentation(const SegmentationMap& seg, const std::filesystem::path& png_path);
std::filesystem::path palette_path_for(const std::filesystem::path& png_path);

} // namespace logan
