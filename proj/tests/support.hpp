#pragma once

#include "logan/composer.hpp"
#include "logan/image_io.hpp"
#include "logan/layout.hpp"
#include "logan/object_bank.hpp"

#include <filesystem>
#include <random>
#include <vector>

namespace logan::test {

struct TempDir {
    std::filesystem::path path;
    TempDir();
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
};

GeneratorModel small_model(std::uint64_t seed, int layers = 4, int channels = 6, int style_dim = 8,
                           int max_resolution = 16);

FeatureMap random_features(std::mt19937_64& rng, int layer, int channels, int height, int width, double scale = 1.0,
                           double offset = 0.0);
LatentCode random_code(std::mt19937_64& rng, int layer, int dim);

// Affine style map evaluated straight from the weight matrices.
std::vector<double> oracle_style(const GeneratorModel& model, const LatentCode& code);
// Per-channel (x - mean) / (std + 1e-8) * scale + bias in double precision.
std::vector<double> oracle_adain(const FeatureMap& f, const std::vector<double>& scale, const std::vector<double>& bias);

// Owner index per pixel by painting binary masks in ascending priority; -1 if none.
std::vector<int> painter_owner(const std::vector<RegionMask>& masks, const std::vector<int>& priorities);

RegionMask block_mask(int height, int width, int y0, int x0, int y1, int x1);

double max_abs_diff(std::span<const float> a, std::span<const float> b);

// Procedural room: ceiling below a two-segment roof line, floor above a
// V-shaped boundary through two border anchors, wall elsewhere.
struct RoomParams {
    int height = 256;
    int width = 256;
    double ceil_left = 0, ceil_right = 0, apex_x = 0, apex_y = 0;
    int floor_left = 0, floor_right = 0;
    double vertex_x = 0, vertex_y = 0;
};

RoomParams random_room(std::mt19937_64& rng, int height = 256, int width = 256);
std::uint8_t room_label(const RoomParams& p, int x, int y); // 0 ceiling, 1 wall, 2 floor
SegmentationMap room_segmentation(const RoomParams& p);
// Adds a rectangular object class ("bed") over the map.
void paint_object(SegmentationMap& seg, int y0, int x0, int y1, int x1, const std::string& name = "bed");

ObjectBank bank_from_session_base(const GeneratorModel& model, std::uint64_t seed, const RegionMask& mask,
                                  const std::string& category, std::span<const int> layers, const std::string& id);

} // namespace logan::test
