#pragma once

#include "logan/generator.hpp"

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace logan {

// Mask in [0,1] at some resolution (canonical unless stated otherwise).
struct RegionMask {
    int height = 0;
    int width = 0;
    std::vector<float> values;

    RegionMask() = default;
    RegionMask(int height_, int width_, float fill = 0.0f)
        : height(height_), width(width_), values(static_cast<std::size_t>(height_) * width_, fill) {}

    float& at(int y, int x) { return values[static_cast<std::size_t>(y) * width + x]; }
    float at(int y, int x) const { return values[static_cast<std::size_t>(y) * width + x]; }

    bool empty_support() const;
    bool is_binary() const;

    bool operator==(const RegionMask&) const = default;
};

// Effective mask at a layer's native feature resolution.
struct LayerMask : RegionMask {
    int layer = 0;

    LayerMask() = default;
    LayerMask(int layer_, int height_, int width_, float fill = 0.0f)
        : RegionMask(height_, width_, fill), layer(layer_) {}

    bool operator==(const LayerMask&) const = default;
};

struct PriorityAssignment {
    std::string object_id;
    int priority = 0;
};

// Two inputs with equal priority whose masks overlap.
struct PriorityTie {
    std::size_t first = 0;
    std::size_t second = 0;
};

// m_o * (1 - sum_{o' != o, p' > p} m_o')^+ for every input, in input order.
// Equal priorities never suppress each other; such overlaps are reported
// through `ties` when given.
std::vector<RegionMask> resolve_priority_masks(std::span<const std::pair<RegionMask, PriorityAssignment>> raw,
                                               std::vector<PriorityTie>* ties = nullptr);

// Same rule over borrowed masks; used by the layer loop.
std::vector<RegionMask> resolve_priority_masks(std::span<const RegionMask* const> masks, std::span<const int> priorities,
                                               std::vector<PriorityTie>* ties = nullptr);

// Area-average downsampling of a canonical mask to `layer`'s resolution.
LayerMask resample_mask(const RegionMask& mask, int layer, const GeneratorModel& model);

// Area-average to an arbitrary resolution (exact for any size ratio).
RegionMask area_resample(const RegionMask& mask, int height, int width);
RegionMask upsample_nearest(const RegionMask& mask, int height, int width);

// Default table: background 0, bed 1, window 2, picture 3, table 4, lamp 5.
PriorityAssignment assign_priority(const std::string& category, std::optional<int> override_priority = std::nullopt,
                                   std::string object_id = {});
std::optional<int> default_priority(const std::string& category);

// 8-bit grayscale PNG <-> mask; 0 -> 0.0, 255 -> 1.0, linear in between.
RegionMask mask_from_png(std::span<const std::uint8_t> png);
std::vector<std::uint8_t> mask_to_png(const RegionMask& mask);
// Rounds every value to the nearest k/255.
RegionMask quantize_mask(const RegionMask& mask);

} // namespace logan
