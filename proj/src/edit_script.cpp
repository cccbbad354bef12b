#include "logan/edit_script.hpp"

#include "logan/error.hpp"

#include <algorithm>
#include <array>
#include <set>

namespace logan {

namespace {

using nlohmann::json;

struct KindInfo {
    EditKind kind;
    const char* name;
    std::set<std::string> required;
    std::set<std::string> optional;
};

const std::vector<KindInfo>& kind_table() {
    static const std::vector<KindInfo> table{
        {EditKind::Remove, "remove", {"object"}, {"layer", "position", "priority"}},
        {EditKind::Insert, "insert", {"object"}, {"layer", "layers", "position", "priority"}},
        {EditKind::Shift, "shift", {"object", "position"}, {"layer", "priority"}},
        {EditKind::Rotate, "rotate", {"object", "path", "s", "S"}, {"layer", "layers", "position", "priority"}},
        {EditKind::RestyleObject, "restyle_object", {"object"}, {"layers", "position", "priority", "style_seed", "style"}},
        {EditKind::GlobalStyle, "global_style", {}, {"layers", "style_seed", "style"}},
        {EditKind::ClearRoom, "clear_room", {}, {"layer", "priority"}},
    };
    return table;
}

const KindInfo& info(EditKind kind) {
    for (const auto& k : kind_table()) {
        if (k.kind == kind) return k;
    }
    throw Error(ErrorKind::Contract, "unknown edit kind");
}

const std::set<std::string> kVocabulary{"op",       "object", "layer",      "layers", "position", "priority",
                                        "s",        "S",      "style_seed", "style",  "path"};

int get_int(const json& v, const std::string& pointer, const char* what) {
    if (!v.is_number_integer()) throw ParseError(pointer, std::string(what) + " must be an integer");
    const auto value = v.get<long long>();
    if (value < -1000000 || value > 1000000) throw ParseError(pointer, std::string(what) + " is out of range");
    return static_cast<int>(value);
}

void check_layer(int layer, int layer_count, const std::string& pointer) {
    if (layer < 1 || layer > layer_count) {
        throw ParseError(pointer, "layer " + std::to_string(layer) + " outside [1," + std::to_string(layer_count) + "]");
    }
}

} // namespace

const char* to_string(EditKind kind) { return info(kind).name; }

std::optional<EditKind> edit_kind_from_string(std::string_view name) {
    for (const auto& k : kind_table()) {
        if (name == k.name) return k.kind;
    }
    return std::nullopt;
}

int recommended_layer(EditKind kind, const std::string&) {
    switch (kind) {
    case EditKind::Remove:
    case EditKind::ClearRoom: return kRemovalLayer;
    case EditKind::Insert:
    case EditKind::Shift:
    case EditKind::Rotate: return kInsertionLayer;
    case EditKind::RestyleObject:
    case EditKind::GlobalStyle: return kRestyleFirstLayer;
    }
    return kInsertionLayer;
}

LayerRange recommended_style_range(int layer_count) {
    return {std::min(kRestyleFirstLayer, layer_count), layer_count};
}

EditOp parse_edit_op(const json& value, const std::string& pointer, const ScriptContext& context) {
    const int layer_count = context.model.layer_count();
    if (!value.is_object()) throw ParseError(pointer, "edit must be an object");
    if (!value.contains("op")) throw ParseError(pointer + "/op", "missing required field");
    if (!value["op"].is_string()) throw ParseError(pointer + "/op", "op must be a string");
    const auto kind = edit_kind_from_string(value["op"].get<std::string>());
    if (!kind) throw ParseError(pointer + "/op", "unknown op \"" + value["op"].get<std::string>() + "\"");
    const KindInfo& spec = info(*kind);

    for (const auto& [key, _] : value.items()) {
        const std::string at = pointer + "/" + key;
        if (!kVocabulary.contains(key)) throw ParseError(at, "unknown field");
        if (key != "op" && !spec.required.contains(key) && !spec.optional.contains(key)) {
            throw ParseError(at, std::string("field not valid for op ") + spec.name);
        }
    }
    for (const auto& key : spec.required) {
        if (!value.contains(key)) throw ParseError(pointer + "/" + key, "missing required field");
    }

    EditOp op;
    op.kind = *kind;
    if (value.contains("object")) {
        if (!value["object"].is_string()) throw ParseError(pointer + "/object", "object must be a string id");
        op.object = value["object"].get<std::string>();
    }
    if (value.contains("layer")) {
        op.layer = get_int(value["layer"], pointer + "/layer", "layer");
        check_layer(*op.layer, layer_count, pointer + "/layer");
    }
    if (value.contains("layers")) {
        const auto& l = value["layers"];
        if (!l.is_array() || l.size() != 2) throw ParseError(pointer + "/layers", "layers must be [first, last]");
        LayerRange r{get_int(l[0], pointer + "/layers/0", "layer"), get_int(l[1], pointer + "/layers/1", "layer")};
        check_layer(r.first, layer_count, pointer + "/layers/0");
        check_layer(r.last, layer_count, pointer + "/layers/1");
        if (r.first > r.last) throw ParseError(pointer + "/layers", "first layer exceeds last layer");
        op.layers = r;
    }
    if (value.contains("position")) {
        const auto& p = value["position"];
        if (!p.is_array() || p.size() != 2) throw ParseError(pointer + "/position", "position must be [dx, dy]");
        op.position = std::array<int, 2>{get_int(p[0], pointer + "/position/0", "dx"),
                                         get_int(p[1], pointer + "/position/1", "dy")};
    }
    if (value.contains("priority")) {
        op.priority = get_int(value["priority"], pointer + "/priority", "priority");
        if (*op.priority < 0) throw ParseError(pointer + "/priority", "priority must be non-negative");
    }
    if (value.contains("S")) {
        op.steps = get_int(value["S"], pointer + "/S", "S");
        if (*op.steps < 1) throw ParseError(pointer + "/S", "S must be at least 1");
    }
    if (value.contains("s")) {
        op.s = get_int(value["s"], pointer + "/s", "s");
        if (*op.s < 0 || (op.steps && *op.s > *op.steps)) throw ParseError(pointer + "/s", "s must lie in [0,S]");
    }
    if (value.contains("style_seed")) {
        const auto& v = value["style_seed"];
        if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
            throw ParseError(pointer + "/style_seed", "style_seed must be a non-negative integer");
        }
        op.style_seed = v.get<std::uint64_t>();
    }
    if (value.contains("style")) {
        const auto& v = value["style"];
        if (!v.is_array()) throw ParseError(pointer + "/style", "style must be an array of numbers");
        std::vector<double> code;
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (!v[i].is_number()) throw ParseError(pointer + "/style/" + std::to_string(i), "must be a number");
            code.push_back(v[i].get<double>());
        }
        op.style = std::move(code);
    }
    if (value.contains("path")) {
        const auto& p = value["path"];
        if (!p.is_array() || p.size() != 2 || !p[0].is_string() || !p[1].is_string()) {
            throw ParseError(pointer + "/path", "path must be [left_object, right_object]");
        }
        op.path = std::array<std::string, 2>{p[0].get<std::string>(), p[1].get<std::string>()};
    }
    const bool styled_kind = op.kind == EditKind::RestyleObject || op.kind == EditKind::GlobalStyle;
    if (styled_kind && op.style_seed.has_value() == op.style.has_value()) {
        throw ParseError(pointer, "exactly one of style_seed and style is required");
    }

    // Resolve references and defaults.
    const ObjectAsset* asset = nullptr;
    if (op.object) {
        asset = context.bank.find(*op.object);
        if (asset == nullptr) throw ReferenceError(*op.object, "unknown object \"" + *op.object + "\"");
        if (static_cast<int>(asset->codes.size()) != layer_count) {
            throw ParseError(pointer + "/object", "object \"" + *op.object + "\" was extracted from a model with " +
                                                      std::to_string(asset->codes.size()) + " layers");
        }
    }
    if (op.path) {
        for (std::size_t i = 0; i < 2; ++i) {
            const auto* end = context.bank.find((*op.path)[i]);
            if (end == nullptr) throw ReferenceError((*op.path)[i], "unknown object \"" + (*op.path)[i] + "\"");
            if (static_cast<int>(end->codes.size()) != layer_count) {
                throw ParseError(pointer + "/path/" + std::to_string(i), "path endpoint has codes for another model");
            }
        }
    }
    const std::string category = asset != nullptr ? asset->category : std::string{};
    switch (op.kind) {
    case EditKind::Remove:
    case EditKind::Insert:
    case EditKind::Shift:
    case EditKind::Rotate:
    case EditKind::ClearRoom:
        if (!op.layer) op.layer = std::min(recommended_layer(op.kind, category), layer_count);
        break;
    default: break;
    }
    if (op.kind == EditKind::Rotate && !op.layers) {
        op.layers = LayerRange{std::min(kDefaultPoseLayers.first, layer_count), std::min(kDefaultPoseLayers.last, layer_count)};
    }
    if (styled_kind && !op.layers) op.layers = recommended_style_range(layer_count);
    if (asset != nullptr) {
        if (!op.priority) op.priority = asset->priority;
        if (!op.position) op.position = std::array<int, 2>{0, 0};
    } else if (op.kind == EditKind::ClearRoom && !op.priority) {
        op.priority = 0;
    }
    if ((op.kind == EditKind::Insert || op.kind == EditKind::Shift) && !asset->features.contains(*op.layer)) {
        throw ParseError(pointer + "/layer", "object \"" + *op.object + "\" stores no features for layer " +
                                                 std::to_string(*op.layer));
    }
    if (op.style) {
        for (int l = op.layers->first; l <= op.layers->last; ++l) {
            if (static_cast<int>(op.style->size()) != context.model.spec(l).style_dim) {
                throw ParseError(pointer + "/style", "style code dimension does not match layer " + std::to_string(l));
            }
        }
    }
    return op;
}

BaseSpec parse_base(const json& value, const std::string& pointer, const GeneratorModel& model) {
    if (!value.is_object()) throw ParseError(pointer, "base must be an object");
    for (const auto& [key, _] : value.items()) {
        if (key != "seed" && key != "codes" && key != "segmentation") throw ParseError(pointer + "/" + key, "unknown field");
    }
    BaseSpec base;
    if (value.contains("seed")) {
        const auto& v = value["seed"];
        if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
            throw ParseError(pointer + "/seed", "seed must be a non-negative integer");
        }
        base.seed = v.get<std::uint64_t>();
    }
    if (value.contains("codes")) {
        const auto& v = value["codes"];
        if (!v.is_array() || static_cast<int>(v.size()) != model.layer_count()) {
            throw ParseError(pointer + "/codes", "codes must hold one vector per layer (" +
                                                     std::to_string(model.layer_count()) + ")");
        }
        std::vector<std::vector<double>> codes;
        for (std::size_t l = 0; l < v.size(); ++l) {
            const std::string at = pointer + "/codes/" + std::to_string(l);
            if (!v[l].is_array() || static_cast<int>(v[l].size()) != model.spec(static_cast<int>(l) + 1).style_dim) {
                throw ParseError(at, "code dimension does not match the model");
            }
            std::vector<double> code;
            for (const auto& x : v[l]) {
                if (!x.is_number()) throw ParseError(at, "codes must be numbers");
                code.push_back(x.get<double>());
            }
            codes.push_back(std::move(code));
        }
        base.codes = std::move(codes);
    }
    if (base.seed.has_value() == base.codes.has_value()) throw ParseError(pointer, "exactly one of seed and codes is required");
    if (value.contains("segmentation")) {
        if (!value["segmentation"].is_string()) throw ParseError(pointer + "/segmentation", "must be a path string");
        base.segmentation = value["segmentation"].get<std::string>();
    }
    return base;
}

EditScript parse_edit_script(std::string_view text, const ScriptContext& context) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError("", std::string("invalid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw ParseError("", "script must be a JSON object");
    for (const auto& [key, _] : doc.items()) {
        if (key != "base" && key != "edits") throw ParseError("/" + key, "unknown field");
    }
    if (!doc.contains("base")) throw ParseError("/base", "missing required field");
    EditScript script;
    script.base = parse_base(doc["base"], "/base", context.model);
    if (doc.contains("edits")) {
        if (!doc["edits"].is_array()) throw ParseError("/edits", "edits must be an array");
        for (std::size_t i = 0; i < doc["edits"].size(); ++i) {
            script.edits.push_back(parse_edit_op(doc["edits"][i], "/edits/" + std::to_string(i), context));
        }
    }
    return script;
}

json to_json(const EditOp& op) {
    json j;
    j["op"] = to_string(op.kind);
    if (op.object) j["object"] = *op.object;
    if (op.layer) j["layer"] = *op.layer;
    if (op.layers) j["layers"] = {op.layers->first, op.layers->last};
    if (op.position) j["position"] = {(*op.position)[0], (*op.position)[1]};
    if (op.priority) j["priority"] = *op.priority;
    if (op.s) j["s"] = *op.s;
    if (op.steps) j["S"] = *op.steps;
    if (op.style_seed) j["style_seed"] = *op.style_seed;
    if (op.style) j["style"] = *op.style;
    if (op.path) j["path"] = {(*op.path)[0], (*op.path)[1]};
    return j;
}

json to_json(const BaseSpec& base) {
    json j = json::object();
    if (base.seed) j["seed"] = *base.seed;
    if (base.codes) j["codes"] = *base.codes;
    if (base.segmentation) j["segmentation"] = *base.segmentation;
    return j;
}

json to_json(const EditScript& script) {
    json edits = json::array();
    for (const auto& op : script.edits) edits.push_back(to_json(op));
    return {{"base", to_json(script.base)}, {"edits", edits}};
}

std::string serialize_edit_script(const EditScript& script) { return to_json(script).dump(2) + "\n"; }

std::vector<LatentCode> base_codes(const GeneratorModel& model, const BaseSpec& base) {
    if (base.seed) return sample_codes(model, *base.seed);
    require(base.codes.has_value(), "base spec names neither seed nor codes");
    std::vector<LatentCode> codes;
    for (std::size_t l = 0; l < base.codes->size(); ++l) codes.push_back({static_cast<int>(l) + 1, (*base.codes)[l]});
    validate_codes(model, codes);
    return codes;
}

} // namespace logan
