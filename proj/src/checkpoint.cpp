#include "logan/checkpoint.hpp"

#include "logan/error.hpp"
#include "logan/image_io.hpp"

#include <json.hpp>

#include <bit>
#include <cstring>
#include <fstream>

namespace logan {

namespace {

using nlohmann::json;

[[noreturn]] void format_error(const std::string& message) {
    throw Error(ErrorKind::AdapterFormat, "checkpoint: " + message);
}

int positive_int(const json& obj, const char* key, const std::string& where) {
    if (!obj.contains(key) || !obj.at(key).is_number_integer() || obj.at(key).get<long long>() < 1) {
        format_error(where + "." + key + " must be a positive integer");
    }
    return obj.at(key).get<int>();
}

std::string blob_name(const json& obj, const char* key, const std::string& where) {
    if (!obj.contains(key) || !obj.at(key).is_string()) format_error(where + "." + key + " must be a path string");
    return obj.at(key).get<std::string>();
}

std::vector<float> read_sized(const std::filesystem::path& path, std::size_t expected, const std::string& what) {
    std::vector<float> values;
    try {
        values = read_f32_blob(path);
    } catch (const Error& e) {
        format_error("cannot read " + what + " blob: " + e.what());
    }
    if (values.size() != expected) {
        format_error(what + " blob " + path.filename().string() + " holds " + std::to_string(values.size()) +
                     " floats, expected " + std::to_string(expected));
    }
    return values;
}

} // namespace

std::vector<float> read_f32_blob(const std::filesystem::path& path) {
    const Bytes bytes = read_file(path);
    if (bytes.size() % 4 != 0) throw Error(ErrorKind::Io, path.string() + " is not a whole number of float32 values");
    std::vector<float> out(bytes.size() / 4);
    for (std::size_t i = 0; i < out.size(); ++i) {
        std::uint32_t bits = static_cast<std::uint32_t>(bytes[4 * i]) | (static_cast<std::uint32_t>(bytes[4 * i + 1]) << 8) |
                             (static_cast<std::uint32_t>(bytes[4 * i + 2]) << 16) |
                             (static_cast<std::uint32_t>(bytes[4 * i + 3]) << 24);
        out[i] = std::bit_cast<float>(bits);
    }
    return out;
}

void write_f32_blob(const std::filesystem::path& path, std::span<const float> values) {
    Bytes bytes(values.size() * 4);
    for (std::size_t i = 0; i < values.size(); ++i) {
        const auto bits = std::bit_cast<std::uint32_t>(values[i]);
        for (int b = 0; b < 4; ++b) bytes[4 * i + b] = static_cast<std::uint8_t>(bits >> (8 * b));
    }
    write_file_atomic(path, bytes);
}

GeneratorModel load_checkpoint(const std::filesystem::path& manifest_path) {
    json manifest;
    try {
        const Bytes raw = read_file(manifest_path);
        manifest = json::parse(raw.begin(), raw.end());
    } catch (const json::exception& e) {
        format_error("manifest is not valid JSON: " + std::string(e.what()));
    } catch (const Error& e) {
        format_error(e.what());
    }
    if (!manifest.is_object() || manifest.value("format", "") != "logan-checkpoint") {
        format_error("manifest format must be \"logan-checkpoint\"");
    }
    if (!manifest.contains("version") || manifest["version"] != 1) format_error("unsupported manifest version");
    if (manifest.contains("indexing") && manifest["indexing"] != "conv-only") {
        format_error("unsupported layer indexing " + manifest["indexing"].dump());
    }
    if (!manifest.contains("layers") || !manifest["layers"].is_array()) format_error("missing layers array");
    const auto base = manifest_path.parent_path();

    std::vector<LayerSpec> specs;
    for (std::size_t i = 0; i < manifest["layers"].size(); ++i) {
        const auto& entry = manifest["layers"][i];
        const std::string where = "layers[" + std::to_string(i) + "]";
        if (!entry.is_object()) format_error(where + " must be an object");
        specs.push_back({positive_int(entry, "channels", where), positive_int(entry, "height", where),
                         positive_int(entry, "width", where), positive_int(entry, "style_dim", where)});
    }
    if (specs.size() < 2) throw Error(ErrorKind::Config, "checkpoint: at least 2 layers required");

    FeatureMap constant(1, specs[0].channels, specs[0].height, specs[0].width);
    constant.data = read_sized(base / blob_name(manifest, "constant", "manifest"), constant.data.size(), "constant");

    std::vector<LayerWeights> layers;
    for (std::size_t i = 0; i < specs.size(); ++i) {
        const auto& entry = manifest["layers"][i];
        const std::string where = "layers[" + std::to_string(i) + "]";
        const auto& s = specs[i];
        const int next_c = i + 1 < specs.size() ? specs[i + 1].channels : s.channels;
        const std::size_t style_n = static_cast<std::size_t>(2 * s.channels) * s.style_dim;
        auto style = read_sized(base / blob_name(entry, "style", where), style_n + 2 * s.channels, where + ".style");
        const std::size_t conv_n = static_cast<std::size_t>(next_c) * s.channels * 9;
        auto conv = read_sized(base / blob_name(entry, "conv", where), conv_n + next_c, where + ".conv");
        LayerWeights w;
        w.style_matrix.assign(style.begin(), style.begin() + static_cast<std::ptrdiff_t>(style_n));
        w.style_bias.assign(style.begin() + static_cast<std::ptrdiff_t>(style_n), style.end());
        w.conv_weight.assign(conv.begin(), conv.begin() + static_cast<std::ptrdiff_t>(conv_n));
        w.conv_bias.assign(conv.begin() + static_cast<std::ptrdiff_t>(conv_n), conv.end());
        layers.push_back(std::move(w));
    }
    const int last_c = specs.back().channels;
    auto rgb = read_sized(base / blob_name(manifest, "rgb", "manifest"), static_cast<std::size_t>(3) * last_c + 3, "rgb");
    std::vector<float> rgb_weight(rgb.begin(), rgb.begin() + 3 * last_c);
    std::vector<float> rgb_bias(rgb.begin() + 3 * last_c, rgb.end());
    try {
        return GeneratorModel(BackboneKind::Checkpoint, std::move(specs), std::move(constant), std::move(layers),
                              std::move(rgb_weight), std::move(rgb_bias));
    } catch (const Error& e) {
        format_error(e.what());
    }
}

std::filesystem::path export_checkpoint(const GeneratorModel& model, const std::filesystem::path& directory) {
    std::filesystem::create_directories(directory);
    json manifest;
    manifest["format"] = "logan-checkpoint";
    manifest["version"] = 1;
    manifest["indexing"] = "conv-only";
    manifest["constant"] = "constant.f32";
    manifest["rgb"] = "rgb.f32";
    write_f32_blob(directory / "constant.f32", model.constant_input().data);
    std::vector<float> rgb = model.rgb_weight();
    rgb.insert(rgb.end(), model.rgb_bias().begin(), model.rgb_bias().end());
    write_f32_blob(directory / "rgb.f32", rgb);
    manifest["layers"] = json::array();
    for (int l = 1; l <= model.layer_count(); ++l) {
        const auto& s = model.spec(l);
        const auto& w = model.weights(l);
        char stem[32];
        std::snprintf(stem, sizeof(stem), "l%02d", l);
        std::vector<float> style = w.style_matrix;
        style.insert(style.end(), w.style_bias.begin(), w.style_bias.end());
        std::vector<float> conv = w.conv_weight;
        conv.insert(conv.end(), w.conv_bias.begin(), w.conv_bias.end());
        write_f32_blob(directory / (std::string(stem) + "_style.f32"), style);
        write_f32_blob(directory / (std::string(stem) + "_conv.f32"), conv);
        manifest["layers"].push_back({{"channels", s.channels},
                                      {"height", s.height},
                                      {"width", s.width},
                                      {"style_dim", s.style_dim},
                                      {"style", std::string(stem) + "_style.f32"},
                                      {"conv", std::string(stem) + "_conv.f32"}});
    }
    const auto path = directory / "manifest.json";
    write_file_atomic(path, manifest.dump(2) + "\n");
    return path;
}

} // namespace logan
