#include "logan/priority_mask.hpp"

#include "logan/error.hpp"
#include "logan/image_io.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace logan {

namespace {

void check_unit_range(const RegionMask& m, std::size_t index) {
    for (float v : m.values) {
        if (!(v >= 0.0f && v <= 1.0f)) {
            contract_error("mask " + std::to_string(index) + " has a value outside [0,1]");
        }
    }
}

// Overlap weights of output cells over input cells along one axis.
struct AxisWeights {
    std::vector<int> first;
    std::vector<std::vector<double>> weights;
};

AxisWeights axis_weights(int in, int out) {
    AxisWeights a;
    a.first.resize(static_cast<std::size_t>(out));
    a.weights.resize(static_cast<std::size_t>(out));
    for (int o = 0; o < out; ++o) {
        // Cell o covers input interval [o*in/out, (o+1)*in/out); work in units of 1/out.
        const long long lo = static_cast<long long>(o) * in;
        const long long hi = static_cast<long long>(o + 1) * in;
        const int i0 = static_cast<int>(lo / out);
        const int i1 = static_cast<int>((hi + out - 1) / out);
        a.first[static_cast<std::size_t>(o)] = i0;
        for (int i = i0; i < i1; ++i) {
            const long long cell_lo = std::max<long long>(lo, static_cast<long long>(i) * out);
            const long long cell_hi = std::min<long long>(hi, static_cast<long long>(i + 1) * out);
            a.weights[static_cast<std::size_t>(o)].push_back(static_cast<double>(cell_hi - cell_lo) /
                                                             static_cast<double>(in));
        }
    }
    return a;
}

const std::array<std::pair<const char*, int>, 6> kDefaultPriorities{{
    {"background", 0},
    {"bed", 1},
    {"window", 2},
    {"picture", 3},
    {"table", 4},
    {"lamp", 5},
}};

} // namespace

bool RegionMask::empty_support() const {
    return std::none_of(values.begin(), values.end(), [](float v) { return v > 0.0f; });
}

bool RegionMask::is_binary() const {
    return std::all_of(values.begin(), values.end(), [](float v) { return v == 0.0f || v == 1.0f; });
}

std::vector<RegionMask> resolve_priority_masks(std::span<const RegionMask* const> masks, std::span<const int> priorities,
                                               std::vector<PriorityTie>* ties) {
    require(!masks.empty(), "resolve_priority_masks: at least one mask required");
    require(masks.size() == priorities.size(), "resolve_priority_masks: one priority per mask required");
    const int h = masks[0]->height;
    const int w = masks[0]->width;
    for (std::size_t i = 0; i < masks.size(); ++i) {
        if (masks[i]->height != h || masks[i]->width != w ||
            masks[i]->values.size() != static_cast<std::size_t>(h) * w) {
            contract_error("resolve_priority_masks: mask " + std::to_string(i) + " resolution differs from mask 0");
        }
        check_unit_range(*masks[i], i);
    }
    const std::size_t n = static_cast<std::size_t>(h) * w;
    std::vector<RegionMask> out;
    out.reserve(masks.size());
    for (std::size_t o = 0; o < masks.size(); ++o) {
        RegionMask eff(h, w);
        for (std::size_t i = 0; i < n; ++i) {
            const float own = masks[o]->values[i];
            if (own == 0.0f) continue;
            double covered = 0.0;
            for (std::size_t q = 0; q < masks.size(); ++q) {
                if (q != o && priorities[q] > priorities[o]) covered += masks[q]->values[i];
            }
            const double keep = std::max(0.0, 1.0 - covered);
            eff.values[i] = static_cast<float>(own * keep);
        }
        out.push_back(std::move(eff));
    }
    if (ties != nullptr) {
        for (std::size_t a = 0; a < masks.size(); ++a) {
            for (std::size_t b = a + 1; b < masks.size(); ++b) {
                if (priorities[a] != priorities[b]) continue;
                for (std::size_t i = 0; i < n; ++i) {
                    if (masks[a]->values[i] > 0.0f && masks[b]->values[i] > 0.0f) {
                        ties->push_back({a, b});
                        break;
                    }
                }
            }
        }
    }
    return out;
}

std::vector<RegionMask> resolve_priority_masks(std::span<const std::pair<RegionMask, PriorityAssignment>> raw,
                                               std::vector<PriorityTie>* ties) {
    std::vector<const RegionMask*> masks;
    std::vector<int> priorities;
    for (const auto& [mask, assignment] : raw) {
        require(assignment.priority >= 0, "priority must be non-negative");
        masks.push_back(&mask);
        priorities.push_back(assignment.priority);
    }
    return resolve_priority_masks(std::span<const RegionMask* const>(masks), std::span<const int>(priorities), ties);
}

RegionMask area_resample(const RegionMask& mask, int height, int width) {
    require(height >= 1 && width >= 1, "area_resample: target size must be positive");
    require(mask.values.size() == static_cast<std::size_t>(mask.height) * mask.width, "area_resample: size mismatch");
    if (height == mask.height && width == mask.width) return mask;
    const AxisWeights ay = axis_weights(mask.height, height);
    const AxisWeights ax = axis_weights(mask.width, width);
    RegionMask out(height, width);
    for (int oy = 0; oy < height; ++oy) {
        const auto& wy = ay.weights[static_cast<std::size_t>(oy)];
        const int y0 = ay.first[static_cast<std::size_t>(oy)];
        for (int ox = 0; ox < width; ++ox) {
            const auto& wx = ax.weights[static_cast<std::size_t>(ox)];
            const int x0 = ax.first[static_cast<std::size_t>(ox)];
            double acc = 0.0;
            for (std::size_t j = 0; j < wy.size(); ++j) {
                double row = 0.0;
                for (std::size_t i = 0; i < wx.size(); ++i) {
                    row += wx[i] * mask.at(y0 + static_cast<int>(j), x0 + static_cast<int>(i));
                }
                acc += wy[j] * row;
            }
            out.at(oy, ox) = static_cast<float>(std::clamp(acc, 0.0, 1.0));
        }
    }
    return out;
}

RegionMask upsample_nearest(const RegionMask& mask, int height, int width) {
    require(height >= 1 && width >= 1, "upsample_nearest: target size must be positive");
    RegionMask out(height, width);
    for (int y = 0; y < height; ++y) {
        const int sy = static_cast<int>(static_cast<long long>(y) * mask.height / height);
        for (int x = 0; x < width; ++x) {
            const int sx = static_cast<int>(static_cast<long long>(x) * mask.width / width);
            out.at(y, x) = mask.at(sy, sx);
        }
    }
    return out;
}

LayerMask resample_mask(const RegionMask& mask, int layer, const GeneratorModel& model) {
    if (layer < 1 || layer > model.layer_count() + 1) {
        contract_error("resample_mask: layer " + std::to_string(layer) + " out of range");
    }
    if (mask.height != model.output_height() || mask.width != model.output_width()) {
        contract_error("resample_mask: mask is " + std::to_string(mask.height) + "x" + std::to_string(mask.width) +
                       ", canonical resolution is " + std::to_string(model.output_height()) + "x" +
                       std::to_string(model.output_width()));
    }
    check_unit_range(mask, 0);
    const auto& spec = model.spec(layer);
    LayerMask out;
    static_cast<RegionMask&>(out) = area_resample(mask, spec.height, spec.width);
    out.layer = layer;
    return out;
}

std::optional<int> default_priority(const std::string& category) {
    for (const auto& [name, p] : kDefaultPriorities) {
        if (category == name) return p;
    }
    return std::nullopt;
}

PriorityAssignment assign_priority(const std::string& category, std::optional<int> override_priority,
                                   std::string object_id) {
    if (override_priority) {
        require(*override_priority >= 0, "priority must be non-negative");
        return {std::move(object_id), *override_priority};
    }
    if (auto p = default_priority(category)) return {std::move(object_id), *p};
    throw Error(ErrorKind::Config, "no default priority for category \"" + category + "\"; supply an override");
}

RegionMask mask_from_png(std::span<const std::uint8_t> png) {
    const GrayImage g = decode_png_gray(png);
    RegionMask m(g.height, g.width);
    for (std::size_t i = 0; i < g.pixels.size(); ++i) m.values[i] = static_cast<float>(g.pixels[i]) / 255.0f;
    return m;
}

std::vector<std::uint8_t> mask_to_png(const RegionMask& mask) {
    GrayImage g{mask.width, mask.height, std::vector<std::uint8_t>(mask.values.size())};
    for (std::size_t i = 0; i < mask.values.size(); ++i) {
        g.pixels[i] = static_cast<std::uint8_t>(std::lround(std::clamp(mask.values[i], 0.0f, 1.0f) * 255.0f));
    }
    return encode_png_gray(g);
}

RegionMask quantize_mask(const RegionMask& mask) {
    RegionMask out = mask;
    for (auto& v : out.values) {
        v = static_cast<float>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f)) / 255.0f;
    }
    return out;
}

} // namespace logan
