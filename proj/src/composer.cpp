#include "logan/composer.hpp"

#include "logan/error.hpp"

#include <algorithm>

namespace logan {

const std::vector<LayerAction>& EditPlan::at(int layer) const {
    require(layer >= 1 && layer <= layer_count(), "EditPlan: layer " + std::to_string(layer) + " out of range");
    return schedule[static_cast<std::size_t>(layer - 1)];
}

EditPlan empty_plan(const GeneratorModel& model, std::vector<LatentCode> codes) {
    validate_codes(model, codes);
    EditPlan plan;
    plan.codes = std::move(codes);
    plan.schedule.resize(static_cast<std::size_t>(model.layer_count()));
    return plan;
}

namespace {

class Compiler {
public:
    Compiler(const GeneratorModel& model, const ObjectBank& bank, const PlanInputs& inputs, EditPlan& plan)
        : model_(model), bank_(bank), inputs_(inputs), plan_(plan) {}

    void compile(std::size_t index, const EditOp& op) {
        index_ = index;
        switch (op.kind) {
        case EditKind::Remove: {
            const ObjectAsset placed = place(op, *op.layer);
            add_fill(*op.layer, placed.id, *op.priority, placed.placed_mask());
            break;
        }
        case EditKind::Insert: {
            const ObjectAsset placed = place(op, *op.layer);
            add_asset(*op.layer, placed, placed.placed_features(*op.layer), *op.priority, placed.code(*op.layer));
            if (op.layers) {
                for (int l = op.layers->first; l <= op.layers->last; ++l) {
                    if (l != *op.layer) add_keep(l, placed.id, *op.priority, placed.placed_mask(), placed.code(l));
                }
            }
            break;
        }
        case EditKind::Shift: {
            const ObjectAsset& asset = bank_.at(*op.object);
            add_fill(kRemovalLayer <= model_.layer_count() ? kRemovalLayer : *op.layer, asset.id, *op.priority,
                     asset.placed_mask());
            const ObjectAsset placed = place(op, *op.layer);
            add_asset(*op.layer, placed, placed.placed_features(*op.layer), *op.priority, placed.code(*op.layer));
            break;
        }
        case EditKind::Rotate: {
            ObjectAsset placed = place(op, *op.layer);
            const ObjectAsset& left = bank_.at((*op.path)[0]);
            const ObjectAsset& right = bank_.at((*op.path)[1]);
            std::vector<LatentCode> codes = placed.codes;
            for (int l = op.layers->first; l <= op.layers->last; ++l) {
                codes[static_cast<std::size_t>(l - 1)] = interpolate_code(left.code(l), right.code(l), *op.s, *op.steps);
            }
            auto traced = trace_features(model_, codes, *op.layer);
            placed.features[*op.layer] = std::move(traced[static_cast<std::size_t>(*op.layer - 1)]);
            placed.codes = codes;
            add_asset(*op.layer, placed, placed.placed_features(*op.layer), *op.priority, placed.code(*op.layer));
            break;
        }
        case EditKind::RestyleObject: {
            const ObjectAsset placed = place(op, op.layers->first);
            for (int l = op.layers->first; l <= op.layers->last; ++l) {
                add_keep(l, placed.id, *op.priority, placed.placed_mask(), style_code(op, l));
            }
            break;
        }
        case EditKind::GlobalStyle:
            for (int l = op.layers->first; l <= op.layers->last; ++l) {
                plan_.codes[static_cast<std::size_t>(l - 1)] = style_code(op, l);
            }
            break;
        case EditKind::ClearRoom: {
            if (inputs_.segmentation == nullptr) {
                throw ExecutionError(*op.layer, "", "clear_room requires a segmentation map");
            }
            const RegionMask mask = object_union_mask(*inputs_.segmentation);
            if (mask.height != model_.output_height() || mask.width != model_.output_width()) {
                throw ExecutionError(*op.layer, "", "segmentation resolution does not match the model output");
            }
            add_fill(*op.layer, "", *op.priority, mask);
            break;
        }
        }
    }

private:
    ObjectAsset place(const EditOp& op, int layer) const {
        const ObjectAsset& asset = bank_.at(*op.object);
        const auto [dx, dy] = op.position.value_or(std::array<int, 2>{0, 0});
        if (dx == 0 && dy == 0) return asset;
        try {
            return transform_asset(asset, dx, dy);
        } catch (const Error& e) {
            throw ExecutionError(layer, asset.id, e.what());
        }
    }

    LayerMask layer_mask(const RegionMask& canonical, int layer, const std::string& id) const {
        if (canonical.height != model_.output_height() || canonical.width != model_.output_width()) {
            throw ExecutionError(layer, id, "object mask is not at the model's output resolution");
        }
        return resample_mask(canonical, layer, model_);
    }

    LatentCode style_code(const EditOp& op, int layer) const {
        if (op.style_seed) return sample_code(model_, *op.style_seed, layer);
        return {layer, *op.style};
    }

    void push(int layer, LayerAction action) {
        plan_.schedule[static_cast<std::size_t>(layer - 1)].push_back(std::move(action));
    }

    void add_asset(int layer, const ObjectAsset& placed, FeatureMap features, int priority, const LatentCode& code) {
        const LayerSpec& spec = model_.spec(layer);
        if (features.channels != spec.channels || features.height != spec.height || features.width != spec.width) {
            throw ExecutionError(layer, placed.id, "object features do not match the layer shape");
        }
        LayerAction a;
        a.edit_index = index_;
        a.object_id = placed.id;
        a.priority = priority;
        a.source = ContentSource::Asset;
        a.features = std::move(features);
        a.mask = layer_mask(placed.placed_mask(), layer, placed.id);
        a.style = code;
        a.style->layer = layer;
        push(layer, std::move(a));
    }

    void add_keep(int layer, const std::string& id, int priority, const RegionMask& canonical, const LatentCode& code) {
        LayerAction a;
        a.edit_index = index_;
        a.object_id = id;
        a.priority = priority;
        a.source = ContentSource::Keep;
        a.mask = layer_mask(canonical, layer, id);
        a.style = code;
        a.style->layer = layer;
        push(layer, std::move(a));
    }

    void add_fill(int layer, const std::string& id, int priority, const RegionMask& canonical) {
        LayerAction a;
        a.edit_index = index_;
        a.object_id = id;
        a.priority = priority;
        a.source = ContentSource::Fill;
        a.mask = layer_mask(canonical, layer, id);
        if (inputs_.fill != nullptr) {
            a.features = inputs_.fill->at_layer(layer);
        } else {
            a.features = fallback_fill(layer, a.mask, id);
        }
        push(layer, std::move(a));
    }

    // Per-channel mean of the base content outside the region, weighted by (1 - m).
    FeatureMap fallback_fill(int layer, const LayerMask& mask, const std::string& id) {
        if (static_cast<int>(inputs_.base_features.size()) < layer) {
            throw ExecutionError(layer, id, "base features are not cached for this layer");
        }
        const FeatureMap& base = inputs_.base_features[static_cast<std::size_t>(layer - 1)];
        FeatureMap out(layer, base.channels, base.height, base.width);
        const std::size_t n = base.plane_size();
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) total += 1.0 - mask.values[i];
        const bool uniform = total <= 0.0;
        for (int c = 0; c < base.channels; ++c) {
            const auto src = base.channel(c);
            double sum = 0.0;
            for (std::size_t i = 0; i < n; ++i) sum += (uniform ? 1.0 : 1.0 - mask.values[i]) * src[i];
            const auto mean = static_cast<float>(sum / (uniform ? static_cast<double>(n) : total));
            std::fill(out.channel(c).begin(), out.channel(c).end(), mean);
        }
        plan_.warnings.push_back("low-confidence background fill at layer " + std::to_string(layer) +
                                 (id.empty() ? std::string() : " for \"" + id + "\"") + ": no segmentation map");
        return out;
    }

    const GeneratorModel& model_;
    const ObjectBank& bank_;
    const PlanInputs& inputs_;
    EditPlan& plan_;
    std::size_t index_ = 0;
};

} // namespace

EditPlan compile_plan(const GeneratorModel& model, const ObjectBank& bank, const EditScript& script,
                      const PlanInputs& inputs) {
    EditPlan plan = empty_plan(model, base_codes(model, script.base));
    if (inputs.fill != nullptr && inputs.fill->any_low_confidence()) {
        std::string classes;
        for (std::size_t k = 0; k < 3; ++k) {
            if (!inputs.fill->low_confidence[k]) continue;
            if (!classes.empty()) classes += ", ";
            classes += kBackgroundClassNames[k];
        }
        plan.warnings.push_back("low-confidence background fill for " + classes + ": no visible pixels");
    }
    Compiler compiler(model, bank, inputs, plan);
    for (std::size_t i = 0; i < script.edits.size(); ++i) compiler.compile(i, script.edits[i]);
    for (auto& layer : plan.schedule) {
        std::stable_sort(layer.begin(), layer.end(),
                         [](const LayerAction& a, const LayerAction& b) { return a.priority < b.priority; });
    }
    return plan;
}

int first_divergent_layer(const EditPlan& a, const EditPlan& b) {
    require(a.layer_count() == b.layer_count(), "first_divergent_layer: plans for different models");
    for (int l = 1; l <= a.layer_count(); ++l) {
        const auto i = static_cast<std::size_t>(l - 1);
        if (!(a.codes[i] == b.codes[i]) || !(a.schedule[i] == b.schedule[i])) return l;
    }
    return a.layer_count() + 1;
}

namespace {

FeatureMap run_layer(const GeneratorModel& model, const EditPlan& plan, int layer, const FeatureMap& input,
                     FeatureMap& content, std::vector<std::string>& warnings) {
    const auto& actions = plan.at(layer);
    const LatentCode& code = plan.codes[static_cast<std::size_t>(layer - 1)];
    content = input;
    if (actions.empty()) return apply_style(model, content, code);

    std::vector<const RegionMask*> raw;
    std::vector<int> priorities;
    for (const auto& a : actions) {
        raw.push_back(&a.mask);
        priorities.push_back(a.priority);
    }
    std::vector<PriorityTie> ties;
    std::vector<RegionMask> effective;
    try {
        effective = resolve_priority_masks(raw, priorities, &ties);
    } catch (const Error& e) {
        throw ExecutionError(layer, actions.front().object_id, e.what());
    }
    for (const auto& t : ties) {
        const auto& x = actions[t.first];
        const auto& y = actions[t.second];
        if (x.object_id == y.object_id) continue;
        warnings.push_back("layer " + std::to_string(layer) + ": \"" + x.object_id + "\" and \"" + y.object_id +
                           "\" overlap with equal priority " + std::to_string(x.priority));
    }

    for (std::size_t i = 0; i < actions.size(); ++i) {
        const auto& a = actions[i];
        if (a.source == ContentSource::Keep) continue;
        try {
            require(content.same_shape(a.features), "patch features do not match the layer shape");
            blend_into(content, a.features, effective[i]);
        } catch (const ExecutionError&) {
            throw;
        } catch (const Error& e) {
            throw ExecutionError(layer, a.object_id, e.what());
        }
    }

    FeatureMap styled = apply_style(model, content, code);
    for (std::size_t i = 0; i < actions.size(); ++i) {
        const auto& a = actions[i];
        if (!a.style) continue;
        try {
            const FeatureMap& source = a.source == ContentSource::Keep ? content : a.features;
            const FeatureMap region = apply_style(model, source, *a.style);
            blend_into(styled, region, effective[i]);
        } catch (const Error& e) {
            throw ExecutionError(layer, a.object_id, e.what());
        }
    }
    return styled;
}

} // namespace

void execute_from(const GeneratorModel& model, const EditPlan& plan, Synthesis& cache, int start_layer) {
    const int L = model.layer_count();
    require(plan.layer_count() == L, "execute_plan: plan was compiled for another model");
    validate_codes(model, plan.codes);
    if (start_layer < 1 || cache.inputs.size() != static_cast<std::size_t>(L + 1) ||
        cache.contents.size() != static_cast<std::size_t>(L)) {
        start_layer = 1;
        cache.inputs.assign(static_cast<std::size_t>(L + 1), FeatureMap{});
        cache.contents.assign(static_cast<std::size_t>(L), FeatureMap{});
        cache.layer_warnings.assign(static_cast<std::size_t>(L), {});
        cache.inputs[0] = model.constant_input();
    }
    if (start_layer == 1) cache.inputs[0] = model.constant_input();
    for (int l = start_layer; l <= L; ++l) {
        const auto i = static_cast<std::size_t>(l - 1);
        cache.layer_warnings[i].clear();
        const FeatureMap styled = run_layer(model, plan, l, cache.inputs[i], cache.contents[i], cache.layer_warnings[i]);
        cache.inputs[i + 1] = forward_layer(model, styled, l);
    }
    if (start_layer <= L || cache.image.data.empty()) cache.image = render_rgb(model, cache.inputs.back());
    cache.warnings = plan.warnings;
    for (const auto& w : cache.layer_warnings) cache.warnings.insert(cache.warnings.end(), w.begin(), w.end());
}

Synthesis execute_plan(const GeneratorModel& model, const EditPlan& plan) {
    Synthesis s;
    execute_from(model, plan, s, 1);
    return s;
}

} // namespace logan
