#pragma once

#include "logan/generator.hpp"
#include "logan/priority_mask.hpp"

#include <optional>

namespace logan {

// Editing region (F_o, m_o, w_o) hosted at one layer. Removal patches carry
// background-fill features and no style.
struct RegionPatch {
    FeatureMap features;
    LayerMask mask;
    std::optional<LatentCode> style;
};

// Content modulation: F * (1 - m) + F_o * m, per channel.
FeatureMap cmod(const FeatureMap& host, const RegionPatch& patch);

// Style modulation: A(F, w) * (1 - m) + A(F_o, w_o) * m.
FeatureMap smod(const FeatureMap& host, const LatentCode& global_style, const RegionPatch& patch,
                const GeneratorModel& model);

// In-place kernels shared with the layer loop. `blend_into` computes
// target * (1 - m) + source * m with exact identity at m = 0 and m = 1.
void blend_into(FeatureMap& target, const FeatureMap& source, const RegionMask& mask);

} // namespace logan
