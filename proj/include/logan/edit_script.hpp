#pragma once

#include "logan/generator.hpp"
#include "logan/object_bank.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace logan {

enum class EditKind { Remove, Insert, Shift, Rotate, RestyleObject, GlobalStyle, ClearRoom };

const char* to_string(EditKind kind);
std::optional<EditKind> edit_kind_from_string(std::string_view name);

struct LayerRange {
    int first = 1;
    int last = 1;

    bool contains(int layer) const { return layer >= first && layer <= last; }
    bool operator==(const LayerRange&) const = default;
};

// One edit. Which fields apply depends on `kind`; after parsing every
// defaultable field of that kind is filled in.
struct EditOp {
    EditKind kind = EditKind::Remove;
    std::optional<std::string> object;
    std::optional<int> layer;
    std::optional<LayerRange> layers;
    std::optional<std::array<int, 2>> position; // (dx, dy) at canonical resolution
    std::optional<int> priority;
    std::optional<int> s;
    std::optional<int> steps;                         // "S"
    std::optional<std::uint64_t> style_seed;
    std::optional<std::vector<double>> style;         // explicit code, same for every layer in range
    std::optional<std::array<std::string, 2>> path;   // rotation endpoints (left, right) as asset ids

    bool operator==(const EditOp&) const = default;
};

struct BaseSpec {
    std::optional<std::uint64_t> seed;
    std::optional<std::vector<std::vector<double>>> codes; // one vector per layer
    std::optional<std::string> segmentation;               // PNG path, palette sidecar beside it

    bool operator==(const BaseSpec&) const = default;
};

struct EditScript {
    BaseSpec base;
    std::vector<EditOp> edits;

    bool operator==(const EditScript&) const = default;
};

struct ScriptContext {
    const GeneratorModel& model;
    const ObjectBank& bank;
};

inline constexpr int kRemovalLayer = 4;
inline constexpr int kInsertionLayer = 7;
inline constexpr int kRestyleFirstLayer = 8;
inline constexpr LayerRange kDefaultPoseLayers{3, 6};

// remove / clear_room -> 4; insert / shift / rotate -> 7; restyle -> 8 (first of 8..L).
int recommended_layer(EditKind kind, const std::string& category = {});
LayerRange recommended_style_range(int layer_count);

// Parses, validates and resolves defaults. Throws ParseError (with a JSON
// pointer) on schema violations and ReferenceError for unknown objects.
EditScript parse_edit_script(std::string_view text, const ScriptContext& context);
EditOp parse_edit_op(const nlohmann::json& value, const std::string& pointer, const ScriptContext& context);
BaseSpec parse_base(const nlohmann::json& value, const std::string& pointer, const GeneratorModel& model);

nlohmann::json to_json(const EditOp& op);
nlohmann::json to_json(const BaseSpec& base);
nlohmann::json to_json(const EditScript& script);
// Canonical text: sorted keys, two-space indent, trailing newline.
std::string serialize_edit_script(const EditScript& script);

// Layer codes described by a base spec.
std::vector<LatentCode> base_codes(const GeneratorModel& model, const BaseSpec& base);

} // namespace logan
