#include "logan/layout.hpp"

#include "logan/error.hpp"
#include "logan/image_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>

namespace logan {

namespace {

constexpr double kGeomEps = 1e-9;

long long cross(const PixelPoint& o, const PixelPoint& a, const PixelPoint& b) {
    return static_cast<long long>(a.x - o.x) * (b.y - o.y) - static_cast<long long>(a.y - o.y) * (b.x - o.x);
}

// Andrew's monotone chain; collinear points are dropped.
std::vector<PixelPoint> convex_hull(std::vector<PixelPoint> pts) {
    std::sort(pts.begin(), pts.end(), [](const PixelPoint& a, const PixelPoint& b) {
        return a.x != b.x ? a.x < b.x : a.y < b.y;
    });
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    if (pts.size() <= 2) return pts;
    std::vector<PixelPoint> hull(2 * pts.size());
    std::size_t k = 0;
    for (const auto& p : pts) {
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
        hull[k++] = p;
    }
    for (std::size_t i = pts.size() - 1, t = k + 1; i > 0; --i) {
        const auto& p = pts[i - 1];
        while (k >= t && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
        hull[k++] = p;
    }
    hull.resize(k - 1);
    return hull;
}

// Least-squares slope of a line forced through an anchor, from prefix sums.
struct SlopeSums {
    double sxx = 0.0;
    double sxy = 0.0;
    double syy = 0.0;

    double slope() const { return sxx > 0.0 ? sxy / sxx : 0.0; }
    double residual() const { return sxx > 0.0 ? syy - sxy * sxy / sxx : syy; }
};

std::pair<double, double> fit_slopes(const SegmentationMap& seg, std::uint8_t floor_id, std::uint8_t wall_id,
                                     const PixelPoint& left, const PixelPoint& right) {
    std::vector<PixelPoint> boundary;
    for (int x = 1; x + 1 < seg.width; ++x) {
        for (int y = 0; y < seg.height; ++y) {
            if (seg.at(y, x) != floor_id) continue;
            if (y > 0 && seg.at(y - 1, x) == wall_id) boundary.push_back({x, y});
            break;
        }
    }
    const std::size_t n = boundary.size();
    if (n == 0) return {0.0, 0.0};
    // Left fits use points [0, t), right fits [t, n); pick t with least total residual.
    std::vector<SlopeSums> prefix(n + 1);
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = boundary[i].x - left.x;
        const double dy = boundary[i].y - left.y;
        prefix[i + 1] = {prefix[i].sxx + dx * dx, prefix[i].sxy + dx * dy, prefix[i].syy + dy * dy};
    }
    std::vector<SlopeSums> suffix(n + 1);
    for (std::size_t i = n; i > 0; --i) {
        const double dx = boundary[i - 1].x - right.x;
        const double dy = boundary[i - 1].y - right.y;
        suffix[i - 1] = {suffix[i].sxx + dx * dx, suffix[i].sxy + dx * dy, suffix[i].syy + dy * dy};
    }
    std::size_t best = 0;
    double best_cost = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t <= n; ++t) {
        const double cost = prefix[t].residual() + suffix[t].residual();
        if (cost < best_cost - 1e-9) {
            best_cost = cost;
            best = t;
        }
    }
    return {prefix[best].slope(), suffix[best].slope()};
}

} // namespace

std::optional<std::uint8_t> SegmentationMap::class_id(const std::string& name) const {
    for (std::size_t i = 0; i < palette.size(); ++i) {
        if (palette[i] == name) return static_cast<std::uint8_t>(i);
    }
    return std::nullopt;
}

std::optional<BackgroundClass> SegmentationMap::background_class(std::uint8_t label) const {
    if (label >= palette.size()) return std::nullopt;
    for (std::size_t k = 0; k < kBackgroundClassNames.size(); ++k) {
        if (palette[label] == kBackgroundClassNames[k]) return static_cast<BackgroundClass>(k);
    }
    return std::nullopt;
}

void SegmentationMap::validate() const {
    require(height > 0 && width > 0, "segmentation: empty map");
    require(labels.size() == static_cast<std::size_t>(height) * width, "segmentation: label buffer size mismatch");
    require(!palette.empty() && palette.size() <= 256, "segmentation: palette must hold 1..256 classes");
    for (auto l : labels) require(l < palette.size(), "segmentation: label outside the declared palette");
}

double Layout::boundary_y(double x) const {
    const double left = left_anchor.y + slope_left * (x - left_anchor.x);
    const double right = right_anchor.y + slope_right * (x - right_anchor.x);
    if (x <= left_anchor.x) return left;
    if (x >= right_anchor.x) return right;
    const double vertex_x = floor_boundary.size() == 3 ? floor_boundary[1][0] : key_point.x;
    return x <= vertex_x ? left : right;
}

bool Layout::in_ceiling(double x, double y) const {
    if (ceiling_hull.empty()) return false;
    double xmin = ceiling_hull[0].x;
    double xmax = xmin;
    for (const auto& p : ceiling_hull) {
        xmin = std::min<double>(xmin, p.x);
        xmax = std::max<double>(xmax, p.x);
    }
    if (x < xmin - kGeomEps || x > xmax + kGeomEps) return false;
    double env = -std::numeric_limits<double>::infinity();
    const std::size_t n = ceiling_hull.size();
    for (std::size_t i = 0; i < n; ++i) {
        const auto& a = ceiling_hull[i];
        const auto& b = ceiling_hull[(i + 1) % n];
        const double lo = std::min(a.x, b.x);
        const double hi = std::max(a.x, b.x);
        if (x < lo - kGeomEps || x > hi + kGeomEps) continue;
        if (a.x == b.x) {
            env = std::max<double>(env, std::max(a.y, b.y));
        } else {
            const double t = std::clamp((x - a.x) / static_cast<double>(b.x - a.x), 0.0, 1.0);
            env = std::max(env, a.y + t * (b.y - a.y));
        }
    }
    return y <= env + kGeomEps;
}

BackgroundClass Layout::classify(double x, double y) const {
    if (in_ceiling(x, y)) return BackgroundClass::Ceiling;
    if (y >= boundary_y(x) - kGeomEps) return BackgroundClass::Floor;
    return BackgroundClass::Wall;
}

Layout parse_layout(const SegmentationMap& seg, const LayoutOptions& options) {
    seg.validate();
    const auto ceiling_id = seg.class_id("ceiling");
    const auto wall_id = seg.class_id("wall");
    const auto floor_id = seg.class_id("floor");

    std::vector<PixelPoint> ceiling;
    if (ceiling_id) {
        for (int y = 0; y < seg.height; ++y) {
            for (int x = 0; x < seg.width; ++x) {
                if (seg.at(y, x) == *ceiling_id) ceiling.push_back({x, y});
            }
        }
    }
    if (ceiling.empty()) throw LayoutIncompleteError("ceiling", "layout: no ceiling pixels in segmentation");

    const auto topmost_floor = [&](int x) -> std::optional<int> {
        if (!floor_id) return std::nullopt;
        for (int y = 0; y < seg.height; ++y) {
            if (seg.at(y, x) == *floor_id) return y;
        }
        return std::nullopt;
    };
    const auto left_y = topmost_floor(0);
    if (!left_y) throw LayoutIncompleteError("floor-left", "layout: no floor pixel on the left border column");
    const auto right_y = topmost_floor(seg.width - 1);
    if (!right_y) throw LayoutIncompleteError("floor-right", "layout: no floor pixel on the right border column");

    Layout layout;
    layout.height = seg.height;
    layout.width = seg.width;
    layout.ceiling_hull = convex_hull(std::move(ceiling));
    layout.key_point = layout.ceiling_hull.front();
    for (const auto& p : layout.ceiling_hull) {
        const auto& k = layout.key_point;
        const long long dp = std::llabs(2LL * p.x - seg.width);
        const long long dk = std::llabs(2LL * k.x - seg.width);
        if (p.y > k.y || (p.y == k.y && (dp < dk || (dp == dk && p.x < k.x)))) layout.key_point = p;
    }
    layout.left_anchor = {0, *left_y};
    layout.right_anchor = {seg.width - 1, *right_y};
    if (options.fixed_slopes) {
        std::tie(layout.slope_left, layout.slope_right) = *options.fixed_slopes;
    } else {
        const std::uint8_t wall = wall_id.value_or(static_cast<std::uint8_t>(seg.palette.size()));
        std::tie(layout.slope_left, layout.slope_right) =
            fit_slopes(seg, *floor_id, wall, layout.left_anchor, layout.right_anchor);
    }

    const double kl = layout.slope_left;
    const double kr = layout.slope_right;
    const double xl = layout.left_anchor.x;
    const double yl = layout.left_anchor.y;
    const double xr = layout.right_anchor.x;
    const double yr = layout.right_anchor.y;
    double vx = layout.key_point.x;
    if (std::abs(kl - kr) > 1e-12) vx = (yr - yl - kr * xr + kl * xl) / (kl - kr);
    vx = std::clamp(vx, xl, xr);
    const double vy = vx < xr ? yl + kl * (vx - xl) : yr;
    layout.floor_boundary = {{xl, yl}, {vx, vy}, {xr, yr}};
    return layout;
}

SegmentationMap rasterize_layout(const Layout& layout, int height, int width) {
    require(height >= 1 && width >= 1, "rasterize_layout: resolution must be positive");
    SegmentationMap out;
    out.height = height;
    out.width = width;
    out.palette = {"ceiling", "wall", "floor"};
    out.labels.resize(static_cast<std::size_t>(height) * width);
    const double sx = static_cast<double>(layout.width) / width;
    const double sy = static_cast<double>(layout.height) / height;
    for (int y = 0; y < height; ++y) {
        const double cy = (y + 0.5) * sy - 0.5;
        for (int x = 0; x < width; ++x) {
            const double cx = (x + 0.5) * sx - 0.5;
            out.at(y, x) = static_cast<std::uint8_t>(layout.classify(cx, cy));
        }
    }
    return out;
}

const FeatureMap& BackgroundFill::at_layer(int layer) const {
    for (const auto& f : features) {
        if (f.layer == layer) return f;
    }
    contract_error("background fill has no features for layer " + std::to_string(layer));
}

BackgroundFill build_background_fill(std::span<const FeatureMap> features, const SegmentationMap& seg,
                                     const Layout& layout) {
    seg.validate();
    require(seg.height == layout.height && seg.width == layout.width,
            "build_background_fill: segmentation and layout resolutions differ");
    const SegmentationMap canonical = rasterize_layout(layout, seg.height, seg.width);

    std::array<RegionMask, 3> visible;
    RegionMask any_visible(seg.height, seg.width);
    std::array<bool, 3> has_visible{false, false, false};
    for (auto& v : visible) v = RegionMask(seg.height, seg.width);
    for (std::size_t i = 0; i < seg.labels.size(); ++i) {
        const auto cls = seg.background_class(seg.labels[i]);
        if (!cls || static_cast<std::uint8_t>(*cls) != canonical.labels[i]) continue;
        const auto k = static_cast<std::size_t>(*cls);
        visible[k].values[i] = 1.0f;
        any_visible.values[i] = 1.0f;
        has_visible[k] = true;
    }
    if (!has_visible[0] && !has_visible[1] && !has_visible[2]) {
        throw Error(ErrorKind::Execution, "build_background_fill: no visible background pixels");
    }

    BackgroundFill fill;
    for (std::size_t k = 0; k < 3; ++k) fill.low_confidence[k] = !has_visible[k];

    for (const auto& f : features) {
        const auto mean_under = [&](const RegionMask& canonical_weights) {
            const RegionMask w = area_resample(canonical_weights, f.height, f.width);
            std::vector<double> mean(static_cast<std::size_t>(f.channels), 0.0);
            double total = 0.0;
            for (float v : w.values) total += v;
            for (int c = 0; c < f.channels; ++c) {
                const auto ch = f.channel(c);
                double acc = 0.0;
                for (std::size_t i = 0; i < ch.size(); ++i) acc += static_cast<double>(w.values[i]) * ch[i];
                mean[static_cast<std::size_t>(c)] = total > 0.0 ? acc / total : 0.0;
            }
            return mean;
        };
        const auto global = mean_under(any_visible);
        const SegmentationMap regions = rasterize_layout(layout, f.height, f.width);
        FeatureMap painted(f.layer, f.channels, f.height, f.width);
        std::array<LayerMask, 3> region_masks;
        for (std::size_t k = 0; k < 3; ++k) {
            region_masks[k] = LayerMask(f.layer, f.height, f.width);
            const auto mean = has_visible[k] ? mean_under(visible[k]) : global;
            for (std::size_t i = 0; i < regions.labels.size(); ++i) {
                if (regions.labels[i] != k) continue;
                region_masks[k].values[i] = 1.0f;
                for (int c = 0; c < f.channels; ++c) {
                    painted.channel(c)[i] = static_cast<float>(mean[static_cast<std::size_t>(c)]);
                }
            }
        }
        fill.features.push_back(std::move(painted));
        fill.regions.push_back(std::move(region_masks));
    }
    return fill;
}

RegionMask object_union_mask(const SegmentationMap& seg) {
    seg.validate();
    RegionMask m(seg.height, seg.width);
    for (std::size_t i = 0; i < seg.labels.size(); ++i) {
        if (!seg.background_class(seg.labels[i])) m.values[i] = 1.0f;
    }
    return m;
}

std::filesystem::path palette_path_for(const std::filesystem::path& png_path) {
    auto p = png_path;
    p.replace_extension(".json");
    return p;
}

SegmentationMap load_segmentation(const std::filesystem::path& png_path) {
    const GrayImage g = decode_png_gray(read_file(png_path));
    nlohmann::json palette_json;
    try {
        const Bytes raw = read_file(palette_path_for(png_path));
        palette_json = nlohmann::json::parse(raw.begin(), raw.end());
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Io, "segmentation palette is not valid JSON: " + std::string(e.what()));
    }
    if (!palette_json.is_object()) throw Error(ErrorKind::Io, "segmentation palette must map index to class name");
    SegmentationMap seg;
    seg.height = g.height;
    seg.width = g.width;
    seg.labels = g.pixels;
    for (const auto& [key, value] : palette_json.items()) {
        char* end = nullptr;
        const long idx = std::strtol(key.c_str(), &end, 10);
        if (end == key.c_str() || *end != '\0' || idx < 0 || idx > 255 || !value.is_string()) {
            throw Error(ErrorKind::Io, "segmentation palette entry \"" + key + "\" is malformed");
        }
        if (seg.palette.size() <= static_cast<std::size_t>(idx)) seg.palette.resize(static_cast<std::size_t>(idx) + 1);
        seg.palette[static_cast<std::size_t>(idx)] = value.get<std::string>();
    }
    try {
        seg.validate();
    } catch (const Error& e) {
        throw Error(ErrorKind::Io, std::string("segmentation map invalid: ") + e.what());
    }
    return seg;
}

void save_segmentation(const SegmentationMap& seg, const std::filesystem::path& png_path) {
    seg.validate();
    std::vector<Rgb8> colors;
    for (std::size_t i = 0; i < seg.palette.size(); ++i) {
        const auto v = static_cast<std::uint8_t>(37 * i + 40);
        colors.push_back({v, static_cast<std::uint8_t>(255 - v), static_cast<std::uint8_t>(97 * i)});
    }
    write_file_atomic(png_path, encode_png_indexed(GrayImage{seg.width, seg.height, seg.labels}, colors));
    nlohmann::json palette = nlohmann::json::object();
    for (std::size_t i = 0; i < seg.palette.size(); ++i) palette[std::to_string(i)] = seg.palette[i];
    write_file_atomic(palette_path_for(png_path), palette.dump(2) + "\n");
}

} // namespace logan
