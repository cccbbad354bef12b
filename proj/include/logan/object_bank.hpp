#pragma once

#include "logan/generator.hpp"
#include "logan/priority_mask.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace logan {

// Inclusive pixel rectangle at canonical resolution.
struct BoundingBox {
    int x0 = 0;
    int y0 = 0;
    int x1 = -1;
    int y1 = -1;

    bool operator==(const BoundingBox&) const = default;
};

std::optional<BoundingBox> mask_bounds(const RegionMask& mask);

// A transplantable object. Features and mask are kept as extracted; the
// placement offset (dx, dy) is applied on access.
struct ObjectAsset {
    std::string id;
    std::string category;
    int priority = 0;
    RegionMask mask;                     // canonical resolution, raw
    int offset_x = 0;
    int offset_y = 0;
    std::map<int, FeatureMap> features;  // layer -> full-frame F_o^(l)
    std::vector<LatentCode> codes;       // source codes w_o for layers 1..L

    std::vector<int> layers() const;
    BoundingBox bbox() const;
    RegionMask placed_mask() const;
    // Features shifted by round(dx * W_l / W), zero-filled where vacated.
    FeatureMap placed_features(int layer) const;
    const LatentCode& code(int layer) const;

    bool operator==(const ObjectAsset&) const = default;
};

// Equal in every field except id.
bool same_content(const ObjectAsset& a, const ObjectAsset& b);

// Shift an asset by whole canonical pixels; the placed bounding box must stay inside the frame.
ObjectAsset transform_asset(const ObjectAsset& asset, int dx, int dy);

// Snapshot of an object from cached per-layer features (index l-1) and the
// codes that produced them. The mask is quantized to 8-bit levels.
ObjectAsset extract_object(const GeneratorModel& model, std::span<const FeatureMap> layer_features,
                           std::span<const LatentCode> codes, const RegionMask& mask, const std::string& category,
                           std::span<const int> layers, std::string id, std::optional<int> priority_override = std::nullopt);

class ObjectBank {
public:
    void add(ObjectAsset asset);
    bool remove(const std::string& id);
    const ObjectAsset* find(const std::string& id) const;
    const ObjectAsset& at(const std::string& id) const;

    std::size_t size() const { return assets_.size(); }
    bool empty() const { return assets_.empty(); }
    const std::map<std::string, ObjectAsset>& assets() const { return assets_; }
    std::vector<const ObjectAsset*> by_category(const std::string& category) const;

    bool operator==(const ObjectBank&) const = default;

private:
    std::map<std::string, ObjectAsset> assets_;
};

inline constexpr int kBankVersion = 1;

// Directory layout: manifest.json plus per-asset blobs
//   <id>-<digest>.f32       features of every stored layer, ascending layer order
//   <id>-<digest>.f64       source codes, layers 1..L
//   <id>-<digest>.mask.png  canonical mask
// The manifest is replaced atomically after all blobs are written.
void persist_bank(const ObjectBank& bank, const std::filesystem::path& directory);
ObjectBank load_bank(const std::filesystem::path& directory);

struct PoseClusterModel {
    std::string category;
    int sample_height = 32;
    int sample_width = 32;
    std::vector<std::vector<double>> centers; // sorted lexicographically
    std::vector<std::string> representatives; // nearest asset per center
    std::vector<std::vector<LatentCode>> representative_codes;
    std::map<std::string, int> assignments;    // asset id -> center index
    double inertia = 0.0;
    int iterations = 0;
};

// Flattened, area-downsampled placed mask.
std::vector<double> pose_vector(const ObjectAsset& asset, int sample_height, int sample_width);

// k-means++ seeding from `seed`, then Lloyd iterations until the relative
// inertia change drops below 1e-6 or 300 iterations.
PoseClusterModel cluster_poses(std::span<const ObjectAsset* const> assets, int clusters,
                               std::pair<int, int> sample_dims = {32, 32}, std::uint64_t seed = 0);

struct RotationPath {
    int steps = 1;
    std::vector<std::vector<LatentCode>> codes; // codes[s], s = 0..S
};

// w_l + (s/S)(w_r - w_l); s = 0 and s = S return the endpoints exactly.
LatentCode interpolate_code(const LatentCode& left, const LatentCode& right, int s, int steps);
std::vector<LatentCode> interpolate_codes(std::span<const LatentCode> left, std::span<const LatentCode> right, int s,
                                          int steps);

RotationPath rotation_path(int left_center, int right_center, int steps, const PoseClusterModel& model);

} // namespace logan
