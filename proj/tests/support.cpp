#include "support.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <unistd.h>

namespace logan::test {

TempDir::TempDir() {
    static std::atomic<int> counter{0};
    path = std::filesystem::temp_directory_path() /
           ("logan-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
}

TempDir::~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
}

GeneratorModel small_model(std::uint64_t seed, int layers, int channels, int style_dim, int max_resolution) {
    ToyConfig c;
    c.seed = seed;
    c.layer_count = layers;
    c.channels = channels;
    c.style_dim = style_dim;
    c.max_resolution = max_resolution;
    return instantiate_model(c);
}

FeatureMap random_features(std::mt19937_64& rng, int layer, int channels, int height, int width, double scale,
                           double offset) {
    std::normal_distribution<double> n(0.0, 1.0);
    FeatureMap f(layer, channels, height, width);
    for (auto& v : f.data) v = static_cast<float>(offset + scale * n(rng));
    return f;
}

LatentCode random_code(std::mt19937_64& rng, int layer, int dim) {
    std::normal_distribution<double> n(0.0, 1.0);
    LatentCode c{layer, std::vector<double>(static_cast<std::size_t>(dim))};
    for (auto& v : c.values) v = n(rng);
    return c;
}

std::vector<double> oracle_style(const GeneratorModel& model, const LatentCode& code) {
    const auto& w = model.weights(code.layer);
    const int d = static_cast<int>(code.values.size());
    const int rows = static_cast<int>(w.style_bias.size());
    std::vector<double> out(static_cast<std::size_t>(rows));
    for (int r = 0; r < rows; ++r) {
        double acc = w.style_bias[r];
        for (int k = 0; k < d; ++k) acc += double(w.style_matrix[static_cast<std::size_t>(r) * d + k]) * code.values[k];
        out[r] = acc;
    }
    return out;
}

std::vector<double> oracle_adain(const FeatureMap& f, const std::vector<double>& scale, const std::vector<double>& bias) {
    std::vector<double> out(f.data.size());
    const std::size_t n = f.plane_size();
    for (int c = 0; c < f.channels; ++c) {
        double mean = 0;
        for (std::size_t i = 0; i < n; ++i) mean += f.data[c * n + i];
        mean /= double(n);
        double var = 0;
        for (std::size_t i = 0; i < n; ++i) var += (f.data[c * n + i] - mean) * (f.data[c * n + i] - mean);
        const double sd = std::sqrt(var / double(n));
        for (std::size_t i = 0; i < n; ++i) out[c * n + i] = (f.data[c * n + i] - mean) / (sd + 1e-8) * scale[c] + bias[c];
    }
    return out;
}

std::vector<int> painter_owner(const std::vector<RegionMask>& masks, const std::vector<int>& priorities) {
    std::vector<std::size_t> order(masks.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return priorities[a] < priorities[b]; });
    std::vector<int> owner(masks.front().values.size(), -1);
    for (auto i : order) {
        for (std::size_t p = 0; p < owner.size(); ++p) {
            if (masks[i].values[p] > 0.5f) owner[p] = static_cast<int>(i);
        }
    }
    return owner;
}

RegionMask block_mask(int height, int width, int y0, int x0, int y1, int x1) {
    RegionMask m(height, width);
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) m.at(y, x) = 1.0f;
    return m;
}

double max_abs_diff(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size()) return INFINITY;
    double worst = 0;
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(double(a[i]) - double(b[i])));
    return worst;
}

RoomParams random_room(std::mt19937_64& rng, int height, int width) {
    auto u = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
    RoomParams p;
    p.height = height;
    p.width = width;
    const double h = height;
    const double w = width;
    p.apex_x = u(0.3, 0.7) * (w - 1);
    p.apex_y = u(0.18, 0.3) * h;
    p.ceil_left = u(0.0, 0.12) * h;
    p.ceil_right = u(0.0, 0.12) * h;
    p.floor_left = static_cast<int>(std::lround(u(0.75, 0.97) * (h - 1)));
    p.floor_right = static_cast<int>(std::lround(u(0.75, 0.97) * (h - 1)));
    p.vertex_x = std::clamp(p.apex_x + u(-0.1, 0.1) * w, 0.2 * w, 0.8 * w);
    p.vertex_y = u(0.55, 0.68) * h;
    return p;
}

std::uint8_t room_label(const RoomParams& p, int x, int y) {
    const double w1 = p.width - 1;
    const double roof_l = p.ceil_left + (p.apex_y - p.ceil_left) * x / p.apex_x;
    const double roof_r = p.ceil_right + (p.apex_y - p.ceil_right) * (w1 - x) / (w1 - p.apex_x);
    if (y <= std::min(roof_l, roof_r)) return 0;
    const double kl = (p.vertex_y - p.floor_left) / p.vertex_x;
    const double kr = (p.floor_right - p.vertex_y) / (w1 - p.vertex_x);
    const double floor_l = p.floor_left + kl * x;
    const double floor_r = p.floor_right + kr * (x - w1);
    if (y >= std::max(floor_l, floor_r)) return 2;
    return 1;
}

SegmentationMap room_segmentation(const RoomParams& p) {
    SegmentationMap seg;
    seg.height = p.height;
    seg.width = p.width;
    seg.palette = {"ceiling", "wall", "floor"};
    seg.labels.resize(static_cast<std::size_t>(p.height) * p.width);
    for (int y = 0; y < p.height; ++y)
        for (int x = 0; x < p.width; ++x) seg.at(y, x) = room_label(p, x, y);
    return seg;
}

void paint_object(SegmentationMap& seg, int y0, int x0, int y1, int x1, const std::string& name) {
    auto id = seg.class_id(name);
    if (!id) {
        seg.palette.push_back(name);
        id = static_cast<std::uint8_t>(seg.palette.size() - 1);
    }
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) seg.at(y, x) = *id;
}

ObjectBank bank_from_session_base(const GeneratorModel& model, std::uint64_t seed, const RegionMask& mask,
                                  const std::string& category, std::span<const int> layers, const std::string& id) {
    const auto codes = sample_codes(model, seed);
    const auto features = trace_features(model, codes, model.layer_count());
    ObjectBank bank;
    bank.add(extract_object(model, features, codes, mask, category, layers, id));
    return bank;
}

} // namespace logan::test
