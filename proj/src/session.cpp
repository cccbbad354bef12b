#include "logan/session.hpp"

#include "logan/digest.hpp"
#include "logan/error.hpp"

namespace logan {

std::string log_digest(const std::string& model_id, const EditScript& script) {
    return sha256_hex(model_id + "\n" + serialize_edit_script(script));
}

Session::Session(std::string id, std::shared_ptr<const GeneratorModel> model, std::string model_id,
                 std::shared_ptr<const ObjectBank> bank, BaseSpec base)
    : id_(std::move(id)), model_(std::move(model)), model_id_(std::move(model_id)), bank_(std::move(bank)) {
    require(model_ != nullptr && bank_ != nullptr, "Session: model and bank are required");
    script_.base = std::move(base);
    const auto codes = base_codes(*model_, script_.base);
    base_features_ = trace_features(*model_, codes, model_->layer_count());
    if (script_.base.segmentation) {
        segmentation_ = load_segmentation(*script_.base.segmentation);
        if (segmentation_->height != model_->output_height() || segmentation_->width != model_->output_width()) {
            throw Error(ErrorKind::Config, "segmentation is " + std::to_string(segmentation_->height) + "x" +
                                               std::to_string(segmentation_->width) + " but the model renders " +
                                               std::to_string(model_->output_height()) + "x" +
                                               std::to_string(model_->output_width()));
        }
        layout_ = parse_layout(*segmentation_);
        fill_ = build_background_fill(base_features_, *segmentation_, *layout_);
    }
    plan_ = compile_plan(*model_, *bank_, script_, plan_inputs());
    synthesis_ = execute_plan(*model_, plan_);
}

PlanInputs Session::plan_inputs() const {
    PlanInputs in;
    in.base_features = base_features_;
    in.segmentation = segmentation_ ? &*segmentation_ : nullptr;
    in.fill = fill_ ? &*fill_ : nullptr;
    return in;
}

void Session::apply_locked(const EditOp& op) {
    EditScript next = script();
    next.edits.push_back(op);
    EditPlan plan = compile_plan(*model_, *bank_, next, plan_inputs());
    Synthesis synthesis;
    int start = 1;
    {
        std::shared_lock lock(state_mutex_);
        start = first_divergent_layer(plan_, plan);
        synthesis = synthesis_;
    }
    execute_from(*model_, plan, synthesis, start);
    std::unique_lock lock(state_mutex_);
    script_ = std::move(next);
    plan_ = std::move(plan);
    synthesis_ = std::move(synthesis);
}

void Session::apply(const EditOp& op) {
    std::lock_guard writer(edit_mutex_);
    apply_locked(op);
}

bool Session::try_apply(const EditOp& op) {
    std::unique_lock writer(edit_mutex_, std::try_to_lock);
    if (!writer.owns_lock()) return false;
    apply_locked(op);
    return true;
}

void Session::apply_all(const EditScript& script) {
    require(script.base == script_.base, "Session: script base differs from the session base");
    std::lock_guard writer(edit_mutex_);
    EditScript next = this->script();
    next.edits.insert(next.edits.end(), script.edits.begin(), script.edits.end());
    EditPlan plan = compile_plan(*model_, *bank_, next, plan_inputs());
    Synthesis synthesis = execute_plan(*model_, plan);
    std::unique_lock lock(state_mutex_);
    script_ = std::move(next);
    plan_ = std::move(plan);
    synthesis_ = std::move(synthesis);
}

void Session::apply_global_style(std::uint64_t style_seed, std::optional<LayerRange> range) {
    EditOp op;
    op.kind = EditKind::GlobalStyle;
    op.style_seed = style_seed;
    op.layers = range.value_or(recommended_style_range(model_->layer_count()));
    require(op.layers->first >= 1 && op.layers->last <= model_->layer_count() && op.layers->first <= op.layers->last,
            "apply_global_style: layer range outside [1,L]");
    apply(op);
}

void Session::apply_global_style(const std::vector<double>& code, std::optional<LayerRange> range) {
    EditOp op;
    op.kind = EditKind::GlobalStyle;
    op.style = code;
    op.layers = range.value_or(recommended_style_range(model_->layer_count()));
    require(op.layers->first >= 1 && op.layers->last <= model_->layer_count() && op.layers->first <= op.layers->last,
            "apply_global_style: layer range outside [1,L]");
    for (int l = op.layers->first; l <= op.layers->last; ++l) {
        require(static_cast<int>(code.size()) == model_->spec(l).style_dim,
                "apply_global_style: code dimension does not match layer " + std::to_string(l));
    }
    apply(op);
}

void Session::clear_room(std::optional<int> layer) {
    EditOp op;
    op.kind = EditKind::ClearRoom;
    op.layer = layer.value_or(std::min(kRemovalLayer, model_->layer_count()));
    op.priority = 0;
    apply(op);
}

ObjectAsset Session::extract(const RegionMask& mask, const std::string& category, std::span<const int> layers,
                             std::string object_id, std::optional<int> priority) const {
    std::shared_lock lock(state_mutex_);
    return extract_object(*model_, synthesis_.contents, plan_.codes, mask, category, layers, std::move(object_id), priority);
}

Image Session::image() const {
    std::shared_lock lock(state_mutex_);
    return synthesis_.image;
}

SessionSnapshot Session::snapshot() const {
    std::shared_lock lock(state_mutex_);
    return {synthesis_.image, script_, logan::log_digest(model_id_, script_), synthesis_.warnings};
}

FeatureMap Session::content(int layer) const {
    require(layer >= 1 && layer <= model_->layer_count(), "Session: layer out of range");
    std::shared_lock lock(state_mutex_);
    return synthesis_.contents[static_cast<std::size_t>(layer - 1)];
}

EditScript Session::script() const {
    std::shared_lock lock(state_mutex_);
    return script_;
}

std::size_t Session::log_size() const {
    std::shared_lock lock(state_mutex_);
    return script_.edits.size();
}

std::vector<std::string> Session::warnings() const {
    std::shared_lock lock(state_mutex_);
    return synthesis_.warnings;
}

std::string Session::log_digest() const { return logan::log_digest(model_id_, script()); }

Synthesis Session::replay() const {
    const EditScript s = script();
    return execute_plan(*model_, compile_plan(*model_, *bank_, s, plan_inputs()));
}

} // namespace logan
