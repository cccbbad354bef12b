#include "logan/modulation.hpp"

#include "logan/error.hpp"

namespace logan {

namespace {

void check_patch(const FeatureMap& host, const FeatureMap& features, const RegionMask& mask, const char* op) {
    if (!host.same_shape(features)) {
        contract_error(std::string(op) + ": patch features " + std::to_string(features.channels) + "x" +
                       std::to_string(features.height) + "x" + std::to_string(features.width) +
                       " do not match host " + std::to_string(host.channels) + "x" + std::to_string(host.height) +
                       "x" + std::to_string(host.width));
    }
    if (mask.height != host.height || mask.width != host.width) {
        contract_error(std::string(op) + ": mask resolution does not match host features");
    }
    for (float v : mask.values) {
        if (!(v >= 0.0f && v <= 1.0f)) contract_error(std::string(op) + ": mask value outside [0,1]");
    }
}

} // namespace

void blend_into(FeatureMap& target, const FeatureMap& source, const RegionMask& mask) {
    const std::size_t n = target.plane_size();
    for (int c = 0; c < target.channels; ++c) {
        auto dst = target.channel(c);
        const auto src = source.channel(c);
        for (std::size_t i = 0; i < n; ++i) {
            const float m = mask.values[i];
            if (m == 0.0f) continue;
            if (m == 1.0f) {
                dst[i] = src[i];
            } else {
                dst[i] = dst[i] * (1.0f - m) + src[i] * m;
            }
        }
    }
}

FeatureMap cmod(const FeatureMap& host, const RegionPatch& patch) {
    require(patch.mask.layer == 0 || patch.mask.layer == host.layer, "cmod: mask belongs to another layer");
    check_patch(host, patch.features, patch.mask, "cmod");
    FeatureMap out = host;
    blend_into(out, patch.features, patch.mask);
    return out;
}

FeatureMap smod(const FeatureMap& host, const LatentCode& global_style, const RegionPatch& patch,
                const GeneratorModel& model) {
    if (!patch.style) contract_error("smod: patch carries no style code");
    require(global_style.layer == host.layer && patch.style->layer == host.layer,
            "smod: style codes must belong to the host layer");
    require(patch.mask.layer == 0 || patch.mask.layer == host.layer, "smod: mask belongs to another layer");
    check_patch(host, patch.features, patch.mask, "smod");
    FeatureMap out = apply_style(model, host, global_style);
    const FeatureMap region = apply_style(model, patch.features, *patch.style);
    blend_into(out, region, patch.mask);
    return out;
}

} // namespace logan
