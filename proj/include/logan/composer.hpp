#pragma once

#include "logan/edit_script.hpp"
#include "logan/layout.hpp"
#include "logan/modulation.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace logan {

// Where an action's content comes from. Keep actions leave the content in
// place and only contribute a region style.
enum class ContentSource { Asset, Fill, Keep };

struct LayerAction {
    std::size_t edit_index = 0;
    std::string object_id;
    int priority = 0;
    ContentSource source = ContentSource::Asset;
    FeatureMap features;           // unused for Keep
    LayerMask mask;                // raw, at the layer's resolution
    std::optional<LatentCode> style;

    bool operator==(const LayerAction&) const = default;
};

struct EditPlan {
    std::vector<LatentCode> codes;                  // per layer, global style overrides applied
    std::vector<std::vector<LayerAction>> schedule; // schedule[l-1], ascending priority
    std::vector<std::string> warnings;

    int layer_count() const { return static_cast<int>(schedule.size()); }
    const std::vector<LayerAction>& at(int layer) const;
};

// Derived artifacts shared by every compilation of one base image.
struct PlanInputs {
    std::span<const FeatureMap> base_features;  // F^(1)..F^(L) of the unedited base
    const SegmentationMap* segmentation = nullptr;
    const BackgroundFill* fill = nullptr;
};

EditPlan empty_plan(const GeneratorModel& model, std::vector<LatentCode> codes);

// Turns a parsed script into a layer schedule.
EditPlan compile_plan(const GeneratorModel& model, const ObjectBank& bank, const EditScript& script,
                      const PlanInputs& inputs);

// Lowest layer whose output can differ between the two plans; L+1 if none.
int first_divergent_layer(const EditPlan& a, const EditPlan& b);

struct Synthesis {
    Image image;
    std::vector<FeatureMap> inputs;   // inputs[l-1] = F^(l) entering layer l, l = 1..L+1
    std::vector<FeatureMap> contents; // contents[l-1] = layer-l features after content modulation
    std::vector<std::vector<std::string>> layer_warnings;
    std::vector<std::string> warnings; // plan warnings followed by per-layer ones
};

Synthesis execute_plan(const GeneratorModel& model, const EditPlan& plan);

// Recomputes layers start..L of `cache` in place; layers below are reused.
void execute_from(const GeneratorModel& model, const EditPlan& plan, Synthesis& cache, int start_layer);

} // namespace logan
