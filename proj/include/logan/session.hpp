#pragma once

#include "logan/composer.hpp"

#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

namespace logan {

struct SessionSnapshot {
    Image image;
    EditScript script;
    std::string digest;
    std::vector<std::string> warnings;
};

// Editing state for one base image: the applied-edit log, derived layout
// artifacts and the per-layer feature cache that matches the log.
class Session {
public:
    Session(std::string id, std::shared_ptr<const GeneratorModel> model, std::string model_id,
            std::shared_ptr<const ObjectBank> bank, BaseSpec base);

    Session(const Session&) = delete;
    Session& operator=(const Session&) = delete;

    const std::string& id() const { return id_; }
    const std::string& model_id() const { return model_id_; }
    const GeneratorModel& model() const { return *model_; }
    const ObjectBank& bank() const { return *bank_; }
    ScriptContext context() const { return {*model_, *bank_}; }

    // Appends `op` and re-synthesizes from the lowest layer it affects.
    // On failure the session is left unchanged. Blocks while another edit runs.
    void apply(const EditOp& op);
    // As apply(), but returns false at once if another edit is in flight.
    bool try_apply(const EditOp& op);
    // Applies a whole script's edits in order (its base must match).
    void apply_all(const EditScript& script);

    void apply_global_style(std::uint64_t style_seed, std::optional<LayerRange> range = std::nullopt);
    void apply_global_style(const std::vector<double>& code, std::optional<LayerRange> range = std::nullopt);
    void clear_room(std::optional<int> layer = std::nullopt);

    // Snapshot of an object from the current content features.
    ObjectAsset extract(const RegionMask& mask, const std::string& category, std::span<const int> layers,
                        std::string object_id, std::optional<int> priority = std::nullopt) const;

    // Readers take a consistent snapshot; they never observe a half-applied edit.
    Image image() const;
    SessionSnapshot snapshot() const;
    FeatureMap content(int layer) const;
    EditScript script() const;
    std::size_t log_size() const;
    std::vector<std::string> warnings() const;
    std::string log_digest() const;
    const std::optional<Layout>& layout() const { return layout_; }
    const std::optional<SegmentationMap>& segmentation() const { return segmentation_; }
    const std::vector<FeatureMap>& base_features() const { return base_features_; }

    // Re-executes the log from scratch.
    Synthesis replay() const;

private:
    void apply_locked(const EditOp& op);
    PlanInputs plan_inputs() const;

    std::string id_;
    std::shared_ptr<const GeneratorModel> model_;
    std::string model_id_;
    std::shared_ptr<const ObjectBank> bank_;
    std::optional<SegmentationMap> segmentation_;
    std::optional<Layout> layout_;
    std::optional<BackgroundFill> fill_;
    std::vector<FeatureMap> base_features_;

    mutable std::shared_mutex state_mutex_;
    std::mutex edit_mutex_;
    EditScript script_;
    EditPlan plan_;
    Synthesis synthesis_;
};

std::string log_digest(const std::string& model_id, const EditScript& script);

} // namespace logan
