#include "logan/object_bank.hpp"

#include "logan/digest.hpp"
#include "logan/error.hpp"
#include "logan/image_io.hpp"
#include "random.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <set>

namespace logan {

namespace {

using nlohmann::json;

bool valid_id(const std::string& id) {
    if (id.empty() || id.size() > 128 || id == "." || id == "..") return false;
    return std::all_of(id.begin(), id.end(), [](char ch) {
        return (ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z') || (ch >= '0' && ch <= '9') || ch == '_' ||
               ch == '-' || ch == '.';
    });
}

int scaled_offset(int offset, int layer_extent, int canonical_extent) {
    return static_cast<int>(std::lround(static_cast<double>(offset) * layer_extent / canonical_extent));
}

Bytes f64_bytes(std::span<const double> values) {
    Bytes bytes(values.size() * 8);
    for (std::size_t i = 0; i < values.size(); ++i) {
        const auto bits = std::bit_cast<std::uint64_t>(values[i]);
        for (int b = 0; b < 8; ++b) bytes[8 * i + b] = static_cast<std::uint8_t>(bits >> (8 * b));
    }
    return bytes;
}

Bytes f32_bytes(std::span<const float> values) {
    Bytes bytes(values.size() * 4);
    for (std::size_t i = 0; i < values.size(); ++i) {
        const auto bits = std::bit_cast<std::uint32_t>(values[i]);
        for (int b = 0; b < 4; ++b) bytes[4 * i + b] = static_cast<std::uint8_t>(bits >> (8 * b));
    }
    return bytes;
}

std::string digest_of(const Bytes& bytes) { return sha256_hex(std::as_bytes(std::span<const std::uint8_t>(bytes))); }

double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
    return acc;
}

} // namespace

std::optional<BoundingBox> mask_bounds(const RegionMask& mask) {
    std::optional<BoundingBox> box;
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            if (mask.at(y, x) <= 0.0f) continue;
            if (!box) {
                box = BoundingBox{x, y, x, y};
            } else {
                box->x0 = std::min(box->x0, x);
                box->y0 = std::min(box->y0, y);
                box->x1 = std::max(box->x1, x);
                box->y1 = std::max(box->y1, y);
            }
        }
    }
    return box;
}

std::vector<int> ObjectAsset::layers() const {
    std::vector<int> out;
    for (const auto& [layer, _] : features) out.push_back(layer);
    return out;
}

BoundingBox ObjectAsset::bbox() const {
    auto box = mask_bounds(mask);
    if (!box) return {};
    return {box->x0 + offset_x, box->y0 + offset_y, box->x1 + offset_x, box->y1 + offset_y};
}

RegionMask ObjectAsset::placed_mask() const {
    if (offset_x == 0 && offset_y == 0) return mask;
    RegionMask out(mask.height, mask.width);
    for (int y = 0; y < mask.height; ++y) {
        const int sy = y - offset_y;
        if (sy < 0 || sy >= mask.height) continue;
        for (int x = 0; x < mask.width; ++x) {
            const int sx = x - offset_x;
            if (sx >= 0 && sx < mask.width) out.at(y, x) = mask.at(sy, sx);
        }
    }
    return out;
}

FeatureMap ObjectAsset::placed_features(int layer) const {
    const auto it = features.find(layer);
    if (it == features.end()) {
        contract_error("asset \"" + id + "\" stores no features for layer " + std::to_string(layer));
    }
    const FeatureMap& src = it->second;
    const int sx = scaled_offset(offset_x, src.width, mask.width);
    const int sy = scaled_offset(offset_y, src.height, mask.height);
    if (sx == 0 && sy == 0) return src;
    FeatureMap out(src.layer, src.channels, src.height, src.width);
    for (int c = 0; c < src.channels; ++c) {
        for (int y = 0; y < src.height; ++y) {
            const int from_y = y - sy;
            if (from_y < 0 || from_y >= src.height) continue;
            for (int x = 0; x < src.width; ++x) {
                const int from_x = x - sx;
                if (from_x >= 0 && from_x < src.width) out.at(c, y, x) = src.at(c, from_y, from_x);
            }
        }
    }
    return out;
}

const LatentCode& ObjectAsset::code(int layer) const {
    if (layer < 1 || layer > static_cast<int>(codes.size())) {
        contract_error("asset \"" + id + "\" has no code for layer " + std::to_string(layer));
    }
    return codes[static_cast<std::size_t>(layer - 1)];
}

bool same_content(const ObjectAsset& a, const ObjectAsset& b) {
    return a.category == b.category && a.priority == b.priority && a.mask == b.mask && a.offset_x == b.offset_x &&
           a.offset_y == b.offset_y && a.features == b.features && a.codes == b.codes;
}

ObjectAsset transform_asset(const ObjectAsset& asset, int dx, int dy) {
    const auto box = mask_bounds(asset.mask);
    require(box.has_value(), "transform_asset: asset \"" + asset.id + "\" has an empty mask");
    const int x0 = box->x0 + asset.offset_x + dx;
    const int x1 = box->x1 + asset.offset_x + dx;
    const int y0 = box->y0 + asset.offset_y + dy;
    const int y1 = box->y1 + asset.offset_y + dy;
    if (x0 < 0 || y0 < 0 || x1 >= asset.mask.width || y1 >= asset.mask.height) {
        contract_error("transform_asset: bounding box [" + std::to_string(x0) + "," + std::to_string(y0) + "]-[" +
                       std::to_string(x1) + "," + std::to_string(y1) + "] leaves the " +
                       std::to_string(asset.mask.width) + "x" + std::to_string(asset.mask.height) + " frame");
    }
    ObjectAsset out = asset;
    out.offset_x += dx;
    out.offset_y += dy;
    return out;
}

ObjectAsset extract_object(const GeneratorModel& model, std::span<const FeatureMap> layer_features,
                           std::span<const LatentCode> codes, const RegionMask& mask, const std::string& category,
                           std::span<const int> layers, std::string id, std::optional<int> priority_override) {
    require(!layer_features.empty(), "extract_object: no cached features");
    require(mask.height == model.output_height() && mask.width == model.output_width(),
            "extract_object: mask must be at canonical resolution " + std::to_string(model.output_height()) + "x" +
                std::to_string(model.output_width()));
    require(static_cast<int>(codes.size()) == model.layer_count(), "extract_object: one code per layer required");
    require(!mask.empty_support(), "extract_object: mask is empty");
    require(!layers.empty(), "extract_object: at least one layer required");

    ObjectAsset asset;
    asset.id = std::move(id);
    asset.category = category;
    asset.priority = assign_priority(category, priority_override).priority;
    asset.mask = quantize_mask(mask);
    require(!asset.mask.empty_support(), "extract_object: mask is empty after 8-bit quantization");
    for (int layer : layers) {
        if (layer < 1 || layer > static_cast<int>(layer_features.size())) {
            contract_error("extract_object: layer " + std::to_string(layer) + " is not cached");
        }
        const FeatureMap& f = layer_features[static_cast<std::size_t>(layer - 1)];
        require(f.layer == layer, "extract_object: cached features are out of order");
        asset.features[layer] = f;
    }
    asset.codes.assign(codes.begin(), codes.end());
    return asset;
}

void ObjectBank::add(ObjectAsset asset) {
    require(valid_id(asset.id), "object id \"" + asset.id + "\" must match [A-Za-z0-9_.-]+");
    require(!assets_.contains(asset.id), "object id \"" + asset.id + "\" already in bank");
    require(mask_bounds(asset.mask).has_value(), "object \"" + asset.id + "\" has an empty mask");
    const auto id = asset.id;
    assets_.emplace(id, std::move(asset));
}

bool ObjectBank::remove(const std::string& id) { return assets_.erase(id) > 0; }

const ObjectAsset* ObjectBank::find(const std::string& id) const {
    const auto it = assets_.find(id);
    return it == assets_.end() ? nullptr : &it->second;
}

const ObjectAsset& ObjectBank::at(const std::string& id) const {
    const auto* a = find(id);
    if (a == nullptr) throw ReferenceError(id, "unknown object \"" + id + "\"");
    return *a;
}

std::vector<const ObjectAsset*> ObjectBank::by_category(const std::string& category) const {
    std::vector<const ObjectAsset*> out;
    for (const auto& [_, a] : assets_) {
        if (a.category == category) out.push_back(&a);
    }
    return out;
}

void persist_bank(const ObjectBank& bank, const std::filesystem::path& directory) {
    std::filesystem::create_directories(directory);
    json manifest;
    manifest["format"] = "logan-bank";
    manifest["version"] = kBankVersion;
    manifest["assets"] = json::array();
    std::set<std::string> referenced;

    const auto write_blob = [&](const std::string& id, const std::string& ext, const Bytes& bytes) {
        const std::string digest = digest_of(bytes);
        const std::string name = id + "-" + digest.substr(0, 16) + ext;
        write_file_atomic(directory / name, bytes);
        referenced.insert(name);
        return json{{"file", name}, {"sha256", digest}};
    };

    for (const auto& [id, a] : bank.assets()) {
        std::vector<float> feature_values;
        json layers = json::array();
        for (const auto& [layer, f] : a.features) {
            layers.push_back({layer, f.channels, f.height, f.width});
            feature_values.insert(feature_values.end(), f.data.begin(), f.data.end());
        }
        std::vector<double> code_values;
        json dims = json::array();
        for (const auto& c : a.codes) {
            dims.push_back(c.values.size());
            code_values.insert(code_values.end(), c.values.begin(), c.values.end());
        }
        json features = write_blob(id, ".f32", f32_bytes(feature_values));
        features["layers"] = layers;
        json codes = write_blob(id, ".f64", f64_bytes(code_values));
        codes["dims"] = dims;
        json mask = write_blob(id, ".mask.png", mask_to_png(a.mask));
        mask["height"] = a.mask.height;
        mask["width"] = a.mask.width;
        const auto box = a.bbox();
        manifest["assets"].push_back({{"id", id},
                                      {"category", a.category},
                                      {"priority", a.priority},
                                      {"offset", {a.offset_x, a.offset_y}},
                                      {"bbox", {box.x0, box.y0, box.x1, box.y1}},
                                      {"features", features},
                                      {"codes", codes},
                                      {"mask", mask}});
    }
    write_file_atomic(directory / "manifest.json", manifest.dump(2) + "\n");

    for (const auto& entry : std::filesystem::directory_iterator(directory)) {
        const std::string name = entry.path().filename().string();
        const bool ours = name.ends_with(".f32") || name.ends_with(".f64") || name.ends_with(".mask.png");
        if (entry.is_regular_file() && ours && !referenced.contains(name)) std::filesystem::remove(entry.path());
    }
}

ObjectBank load_bank(const std::filesystem::path& directory) {
    json manifest;
    try {
        const Bytes raw = read_file(directory / "manifest.json");
        manifest = json::parse(raw.begin(), raw.end());
    } catch (const json::exception& e) {
        throw CorruptionError("", "bank manifest is not valid JSON: " + std::string(e.what()));
    }
    if (!manifest.is_object() || manifest.value("format", "") != "logan-bank") {
        throw CorruptionError("", "bank manifest has the wrong format tag");
    }
    if (!manifest.contains("version") || manifest["version"] != kBankVersion) {
        throw Error(ErrorKind::Version, "unsupported bank manifest version " +
                                            (manifest.contains("version") ? manifest["version"].dump() : "(none)"));
    }
    ObjectBank bank;
    for (const auto& entry : manifest.at("assets")) {
        const std::string id = entry.value("id", "");
        const auto load_verified = [&](const json& ref) {
            Bytes bytes;
            try {
                bytes = read_file(directory / ref.at("file").get<std::string>());
            } catch (const Error&) {
                throw CorruptionError(id, "asset \"" + id + "\": blob " + ref.at("file").get<std::string>() + " is missing");
            }
            if (digest_of(bytes) != ref.at("sha256").get<std::string>()) {
                throw CorruptionError(id, "asset \"" + id + "\": digest mismatch in " + ref.at("file").get<std::string>());
            }
            return bytes;
        };
        try {
            ObjectAsset a;
            a.id = id;
            a.category = entry.at("category").get<std::string>();
            a.priority = entry.at("priority").get<int>();
            a.offset_x = entry.at("offset").at(0).get<int>();
            a.offset_y = entry.at("offset").at(1).get<int>();

            const Bytes mask_bytes = load_verified(entry.at("mask"));
            a.mask = mask_from_png(mask_bytes);

            const Bytes feature_bytes = load_verified(entry.at("features"));
            std::size_t offset = 0;
            for (const auto& l : entry.at("features").at("layers")) {
                FeatureMap f(l.at(0).get<int>(), l.at(1).get<int>(), l.at(2).get<int>(), l.at(3).get<int>());
                const std::size_t n = f.data.size();
                if ((offset + n) * 4 > feature_bytes.size()) throw CorruptionError(id, "asset \"" + id + "\": feature blob too short");
                for (std::size_t i = 0; i < n; ++i) {
                    const std::size_t p = (offset + i) * 4;
                    const std::uint32_t bits = static_cast<std::uint32_t>(feature_bytes[p]) |
                                               (static_cast<std::uint32_t>(feature_bytes[p + 1]) << 8) |
                                               (static_cast<std::uint32_t>(feature_bytes[p + 2]) << 16) |
                                               (static_cast<std::uint32_t>(feature_bytes[p + 3]) << 24);
                    f.data[i] = std::bit_cast<float>(bits);
                }
                offset += n;
                const int layer = f.layer;
                a.features.emplace(layer, std::move(f));
            }
            if (offset * 4 != feature_bytes.size()) throw CorruptionError(id, "asset \"" + id + "\": feature blob size mismatch");

            const Bytes code_bytes = load_verified(entry.at("codes"));
            std::size_t cursor = 0;
            int layer = 1;
            for (const auto& d : entry.at("codes").at("dims")) {
                LatentCode c{layer++, std::vector<double>(d.get<std::size_t>())};
                if ((cursor + c.values.size()) * 8 > code_bytes.size()) throw CorruptionError(id, "asset \"" + id + "\": code blob too short");
                for (auto& v : c.values) {
                    std::uint64_t bits = 0;
                    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(code_bytes[cursor * 8 + b]) << (8 * b);
                    v = std::bit_cast<double>(bits);
                    ++cursor;
                }
                a.codes.push_back(std::move(c));
            }
            if (cursor * 8 != code_bytes.size()) throw CorruptionError(id, "asset \"" + id + "\": code blob size mismatch");
            bank.add(std::move(a));
        } catch (const json::exception& e) {
            throw CorruptionError(id, "asset \"" + id + "\": malformed manifest entry: " + e.what());
        }
    }
    return bank;
}

std::vector<double> pose_vector(const ObjectAsset& asset, int sample_height, int sample_width) {
    const RegionMask small = area_resample(asset.placed_mask(), sample_height, sample_width);
    return {small.values.begin(), small.values.end()};
}

PoseClusterModel cluster_poses(std::span<const ObjectAsset* const> assets, int clusters, std::pair<int, int> sample_dims,
                               std::uint64_t seed) {
    require(clusters >= 2, "cluster_poses: at least 2 clusters required");
    require(static_cast<int>(assets.size()) >= clusters,
            "cluster_poses: " + std::to_string(assets.size()) + " assets cannot form " + std::to_string(clusters) +
                " clusters");
    require(sample_dims.first >= 1 && sample_dims.second >= 1, "cluster_poses: sample dims must be positive");
    const std::string category = assets.front()->category;
    for (const auto* a : assets) {
        require(a->category == category, "cluster_poses: assets must share one category");
    }

    // Input order must not matter: work on assets sorted by id.
    std::vector<const ObjectAsset*> sorted(assets.begin(), assets.end());
    std::sort(sorted.begin(), sorted.end(), [](const auto* a, const auto* b) { return a->id < b->id; });
    const std::size_t n = sorted.size();
    const auto k = static_cast<std::size_t>(clusters);
    std::vector<std::vector<double>> points;
    for (const auto* a : sorted) points.push_back(pose_vector(*a, sample_dims.first, sample_dims.second));

    detail::NormalSource rng(seed);
    std::vector<std::vector<double>> centers;
    const auto first = std::min(n - 1, static_cast<std::size_t>(rng.uniform() * static_cast<double>(n)));
    centers.push_back(points[first]);
    std::vector<double> d2(n);
    while (centers.size() < k) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& c : centers) best = std::min(best, squared_distance(points[i], c));
            d2[i] = best;
            total += best;
        }
        std::size_t pick = n;
        if (total > 0.0) {
            const double target = rng.uniform() * total;
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                acc += d2[i];
                if (d2[i] > 0.0 && acc >= target) {
                    pick = i;
                    break;
                }
            }
            if (pick == n) {
                for (std::size_t i = n; i > 0; --i) {
                    if (d2[i - 1] > 0.0) {
                        pick = i - 1;
                        break;
                    }
                }
            }
        }
        if (pick == n) {
            contract_error("cluster_poses: fewer than " + std::to_string(clusters) + " distinct pose vectors");
        }
        centers.push_back(points[pick]);
    }

    std::vector<int> assignment(n, 0);
    double inertia = std::numeric_limits<double>::infinity();
    int iterations = 0;
    for (; iterations < 300; ++iterations) {
        double current = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            int best = 0;
            double best_d = squared_distance(points[i], centers[0]);
            for (std::size_t c = 1; c < k; ++c) {
                const double d = squared_distance(points[i], centers[c]);
                if (d < best_d) {
                    best_d = d;
                    best = static_cast<int>(c);
                }
            }
            assignment[i] = best;
            current += best_d;
        }
        for (std::size_t c = 0; c < k; ++c) {
            std::vector<double> sum(points[0].size(), 0.0);
            std::size_t count = 0;
            for (std::size_t i = 0; i < n; ++i) {
                if (assignment[i] != static_cast<int>(c)) continue;
                for (std::size_t j = 0; j < sum.size(); ++j) sum[j] += points[i][j];
                ++count;
            }
            if (count == 0) continue;
            for (auto& v : sum) v /= static_cast<double>(count);
            centers[c] = std::move(sum);
        }
        const bool converged = std::isfinite(inertia) &&
                               (inertia == 0.0 ? current == 0.0 : std::abs(inertia - current) / inertia < 1e-6);
        inertia = current;
        if (converged) {
            ++iterations;
            break;
        }
    }
    // Inertia against the final centers.
    inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        int best = 0;
        double best_d = squared_distance(points[i], centers[0]);
        for (std::size_t c = 1; c < k; ++c) {
            const double d = squared_distance(points[i], centers[c]);
            if (d < best_d) {
                best_d = d;
                best = static_cast<int>(c);
            }
        }
        assignment[i] = best;
        inertia += best_d;
    }

    std::vector<std::size_t> order(k);
    for (std::size_t c = 0; c < k; ++c) order[c] = c;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return centers[a] < centers[b]; });
    std::vector<int> rank(k);
    for (std::size_t r = 0; r < k; ++r) rank[order[r]] = static_cast<int>(r);

    PoseClusterModel model;
    model.category = category;
    model.sample_height = sample_dims.first;
    model.sample_width = sample_dims.second;
    model.inertia = inertia;
    model.iterations = iterations;
    for (std::size_t r = 0; r < k; ++r) model.centers.push_back(centers[order[r]]);
    for (std::size_t i = 0; i < n; ++i) model.assignments[sorted[i]->id] = rank[static_cast<std::size_t>(assignment[i])];
    for (std::size_t r = 0; r < k; ++r) {
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; ++i) {
            const double d = squared_distance(points[i], model.centers[r]);
            if (d < best_d) {
                best_d = d;
                best = i;
            }
        }
        model.representatives.push_back(sorted[best]->id);
        model.representative_codes.push_back(sorted[best]->codes);
    }
    for (std::size_t a = 0; a < k; ++a) {
        for (std::size_t b = a + 1; b < k; ++b) {
            if (model.centers[a] == model.centers[b]) {
                throw Error(ErrorKind::Numeric, "cluster_poses: centers " + std::to_string(a) + " and " +
                                                    std::to_string(b) + " coincide");
            }
        }
    }
    return model;
}

LatentCode interpolate_code(const LatentCode& left, const LatentCode& right, int s, int steps) {
    require(steps >= 1, "interpolation needs S >= 1");
    require(s >= 0 && s <= steps, "interpolation step s must lie in [0,S]");
    require(left.layer == right.layer && left.values.size() == right.values.size(),
            "interpolation endpoints must share layer and dimension");
    if (s == 0) return left;
    if (s == steps) return right;
    const double t = static_cast<double>(s) / static_cast<double>(steps);
    LatentCode out{left.layer, std::vector<double>(left.values.size())};
    for (std::size_t i = 0; i < out.values.size(); ++i) {
        out.values[i] = left.values[i] + t * (right.values[i] - left.values[i]);
    }
    return out;
}

std::vector<LatentCode> interpolate_codes(std::span<const LatentCode> left, std::span<const LatentCode> right, int s,
                                          int steps) {
    require(left.size() == right.size(), "interpolation endpoints must cover the same layers");
    std::vector<LatentCode> out;
    for (std::size_t i = 0; i < left.size(); ++i) out.push_back(interpolate_code(left[i], right[i], s, steps));
    return out;
}

RotationPath rotation_path(int left_center, int right_center, int steps, const PoseClusterModel& model) {
    const int m = static_cast<int>(model.representative_codes.size());
    if (left_center < 0 || left_center >= m || right_center < 0 || right_center >= m) {
        contract_error("rotation_path: center index outside [0," + std::to_string(m) + ")");
    }
    require(steps >= 1, "rotation_path: S must be at least 1");
    const auto& wl = model.representative_codes[static_cast<std::size_t>(left_center)];
    const auto& wr = model.representative_codes[static_cast<std::size_t>(right_center)];
    RotationPath path;
    path.steps = steps;
    for (int s = 0; s <= steps; ++s) path.codes.push_back(interpolate_codes(wl, wr, s, steps));
    return path;
}

} // namespace logan
