#include "support.hpp"

#include "logan/checkpoint.hpp"
#include "logan/edit_script.hpp"
#include "logan/error.hpp"
#include "logan/service.hpp"
#include "logan/session.hpp"

#include <httplib.h>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <sys/wait.h>
#include <thread>

using namespace logan;
using namespace logan::test;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

struct Check {
    Outcome& out;
    void operator()(bool ok, const std::string& what) {
        if (!ok && out.pass) {
            out.pass = false;
            out.detail = what;
        }
    }
};

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(LOGAN_CLI) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string read_text(const fs::path& p) {
    const Bytes b = read_file(p);
    return {b.begin(), b.end()};
}

void write_text(const fs::path& p, const std::string& text) { write_file_atomic(p, text); }

// 1
Outcome operator_identities() {
    Outcome out;
    Check check{out};
    const GeneratorModel model = small_model(11, 6, 6, 8, 32);
    std::mt19937_64 rng(101);
    double worst = 0.0;
    for (int i = 0; i < 200; ++i) {
        const int layer = 1 + static_cast<int>(rng() % 6);
        const LayerSpec& s = model.spec(layer);
        const FeatureMap f = random_features(rng, layer, s.channels, s.height, s.width, 2.0, 0.5);
        const FeatureMap fo = random_features(rng, layer, s.channels, s.height, s.width, 1.5, -0.3);
        const LatentCode w = random_code(rng, layer, s.style_dim);
        const LatentCode wo = random_code(rng, layer, s.style_dim);
        RegionPatch zero{fo, LayerMask(layer, s.height, s.width, 0.0f), wo};
        RegionPatch one{fo, LayerMask(layer, s.height, s.width, 1.0f), wo};
        check(cmod(f, zero) == f, "CMod(m=0) != F at instance " + std::to_string(i));
        check(cmod(f, one) == fo, "CMod(m=1) != F_o at instance " + std::to_string(i));
        const FeatureMap got = smod(f, w, zero, model);
        const auto st = oracle_style(model, w);
        const std::vector<double> scale(st.begin(), st.begin() + s.channels);
        const std::vector<double> bias(st.begin() + s.channels, st.end());
        const auto want = oracle_adain(f, scale, bias);
        for (std::size_t k = 0; k < want.size(); ++k) worst = std::max(worst, std::abs(got.data[k] - want[k]));
    }
    check(worst <= 1e-6, "SMod(m=0) deviates from global AdaIN by " + fmt(worst));
    if (out.pass) out.detail = "200 instances, SMod max-abs " + fmt(worst);
    return out;
}

// 2
Outcome priority_oracle() {
    Outcome out;
    Check check{out};
    std::mt19937_64 rng(202);
    double worst_sum = 0.0;
    for (int t = 0; t < 1000 && out.pass; ++t) {
        const int n = 1 + static_cast<int>(rng() % 5);
        std::vector<int> pool{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
        std::shuffle(pool.begin(), pool.end(), rng);
        std::vector<RegionMask> masks;
        std::vector<int> priorities;
        std::vector<std::pair<RegionMask, PriorityAssignment>> raw;
        for (int i = 0; i < n; ++i) {
            const int y0 = static_cast<int>(rng() % 12), x0 = static_cast<int>(rng() % 12);
            const int y1 = y0 + 1 + static_cast<int>(rng() % (16 - y0)), x1 = x0 + 1 + static_cast<int>(rng() % (16 - x0));
            RegionMask m = block_mask(16, 16, y0, x0, y1, x1);
            for (auto& v : m.values) {
                if (rng() % 10 == 0) v = 1.0f - v;
            }
            masks.push_back(m);
            priorities.push_back(pool[static_cast<std::size_t>(i)]);
            raw.push_back({m, {"o" + std::to_string(i), pool[static_cast<std::size_t>(i)]}});
        }
        const auto eff = resolve_priority_masks(raw);
        const auto owner = painter_owner(masks, priorities);
        for (std::size_t p = 0; p < owner.size(); ++p) {
            int got = -1;
            double sum = 0.0;
            for (int i = 0; i < n; ++i) {
                const float v = eff[static_cast<std::size_t>(i)].values[p];
                sum += v;
                if (v != 0.0f && v != 1.0f) check(false, "non-binary effective mask in instance " + std::to_string(t));
                if (v == 1.0f) got = got == -1 ? i : -2;
            }
            worst_sum = std::max(worst_sum, sum);
            check(got == owner[p], "ownership differs from painter at instance " + std::to_string(t) + " pixel " +
                                       std::to_string(p));
        }
    }
    // Soft masks: coverage bound only.
    for (int t = 0; t < 1000 && out.pass; ++t) {
        const int n = 1 + static_cast<int>(rng() % 5);
        std::vector<std::pair<RegionMask, PriorityAssignment>> raw;
        std::uniform_real_distribution<float> u(0.0f, 1.0f);
        for (int i = 0; i < n; ++i) {
            RegionMask m(16, 16);
            for (auto& v : m.values) v = u(rng);
            raw.push_back({m, {"o" + std::to_string(i), i}});
        }
        const auto eff = resolve_priority_masks(raw);
        for (std::size_t p = 0; p < 256; ++p) {
            double sum = 0.0;
            for (const auto& e : eff) sum += e.values[p];
            worst_sum = std::max(worst_sum, sum);
        }
    }
    check(worst_sum <= 1.0 + 1e-6, "coverage sum reached " + fmt(worst_sum));
    if (out.pass) out.detail = "1000 binary instances match painter; max coverage " + fmt(worst_sum);
    return out;
}

// 3
Outcome adain_statistics() {
    Outcome out;
    Check check{out};
    std::mt19937_64 rng(303);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst_mean = 0.0, worst_std = 0.0;
    int tested = 0;
    while (tested < 500) {
        const int h = 2 + static_cast<int>(rng() % 31), w = 2 + static_cast<int>(rng() % 31);
        const double sigma = std::pow(10.0, -3.0 + 4.0 * u(rng));
        const FeatureMap f = random_features(rng, 1, 1, h, w, sigma, -10.0 + 20.0 * u(rng));
        double mean = 0.0, var = 0.0;
        for (float v : f.data) mean += v;
        mean /= f.data.size();
        for (float v : f.data) var += (v - mean) * (v - mean);
        if (std::sqrt(var / f.data.size()) < 1e-3) continue;
        ++tested;
        const FeatureMap g = apply_style(f, StyleParams{1, {1.0f}, {0.0f}});
        double m = 0.0, s = 0.0;
        for (float v : g.data) m += v;
        m /= g.data.size();
        for (float v : g.data) s += (v - m) * (v - m);
        s = std::sqrt(s / g.data.size());
        worst_mean = std::max(worst_mean, std::abs(m));
        worst_std = std::max(worst_std, std::abs(s - 1.0));
    }
    check(worst_mean <= 1e-5, "|mean| reached " + fmt(worst_mean));
    check(worst_std <= 1e-4, "|std-1| reached " + fmt(worst_std));
    if (out.pass) out.detail = "500 channels, |mean| " + fmt(worst_mean) + ", |std-1| " + fmt(worst_std);
    return out;
}

// 4
Outcome interpolation_exactness() {
    Outcome out;
    Check check{out};
    std::mt19937_64 rng(404);
    double worst_step = 0.0, worst_mid = 0.0;
    for (int t = 0; t < 200; ++t) {
        const int dim = 8 + static_cast<int>(rng() % 57);
        const int steps = 1 + static_cast<int>(rng() % 12);
        const LatentCode l = random_code(rng, 3, dim);
        LatentCode r = random_code(rng, 3, dim);
        for (auto& v : r.values) v *= 1.0 + 10.0 * (rng() % 2);
        check(interpolate_code(l, r, 0, steps) == l, "s=0 is not bit-equal to w_l");
        check(interpolate_code(l, r, steps, steps) == r, "s=S is not bit-equal to w_r");
        std::vector<LatentCode> path;
        for (int s = 0; s <= steps; ++s) path.push_back(interpolate_code(l, r, s, steps));
        for (int s = 1; s < steps; ++s) {
            for (int k = 0; k < dim; ++k) {
                const double d0 = path[1].values[k] - path[0].values[k];
                const double d = path[s + 1].values[k] - path[s].values[k];
                worst_step = std::max(worst_step, std::abs(d - d0));
            }
        }
        const LatentCode mid = interpolate_code(l, r, 1, 2);
        for (int k = 0; k < dim; ++k) {
            worst_mid = std::max(worst_mid, std::abs(mid.values[k] - 0.5 * (l.values[k] + r.values[k])));
        }
    }
    // Through a cluster model's representatives.
    PoseClusterModel m;
    m.representative_codes = {{random_code(rng, 1, 16), random_code(rng, 2, 16)},
                              {random_code(rng, 1, 16), random_code(rng, 2, 16)}};
    m.representatives = {"a", "b"};
    const RotationPath path = rotation_path(0, 1, 5, m);
    check(path.codes.front() == m.representative_codes[0] && path.codes.back() == m.representative_codes[1],
          "rotation path endpoints differ from representatives");
    check(worst_step <= 1e-9, "successive differences vary by " + fmt(worst_step));
    check(worst_mid <= 1e-9, "S=2 midpoint off by " + fmt(worst_mid));
    if (out.pass) out.detail = "step spread " + fmt(worst_step) + ", midpoint " + fmt(worst_mid);
    return out;
}

// 5
Outcome layer_loop_fidelity() {
    Outcome out;
    Check check{out};
    double worst = 0.0, weakest_removal = INFINITY;
    std::mt19937_64 rng(505);
    for (std::uint64_t seed = 1; seed <= 5 && out.pass; ++seed) {
        const GeneratorModel model = instantiate_model(ToyConfig{.seed = seed});
        const auto codes = sample_codes(model, 100 + seed);
        const Image plain = synthesize(model, codes);
        check(execute_plan(model, empty_plan(model, codes)).image == plain,
              "empty schedule differs from synthesize for toy(" + std::to_string(seed) + ")");

        const int by = static_cast<int>(rng() % 5), bx = static_cast<int>(rng() % 5);
        const int bh = 2 + static_cast<int>(rng() % 3), bw = 2 + static_cast<int>(rng() % 3);
        const RegionMask mask = block_mask(256, 256, 32 * by, 32 * bx, 32 * (by + bh), 32 * (bx + bw));
        const auto features = trace_features(model, codes, model.layer_count());
        ObjectBank bank;
        const std::array<int, 1> layers{4};
        bank.add(extract_object(model, features, codes, mask, "bed", layers, "obj"));
        const ScriptContext ctx{model, bank};
        const PlanInputs inputs{features, nullptr, nullptr};
        const std::string base = "{\"base\":{\"seed\":" + std::to_string(100 + seed) + "},\"edits\":[";
        const EditScript removal = parse_edit_script(base + R"({"op":"remove","object":"obj","layer":4}]})", ctx);
        const EditScript round_trip = parse_edit_script(
            base + R"({"op":"remove","object":"obj","layer":4},{"op":"insert","object":"obj","layer":4}]})", ctx);
        const Image removed = execute_plan(model, compile_plan(model, bank, removal, inputs)).image;
        const Image restored = execute_plan(model, compile_plan(model, bank, round_trip, inputs)).image;
        worst = std::max(worst, max_abs_diff(restored.data, plain.data));
        weakest_removal = std::min(weakest_removal, max_abs_diff(removed.data, plain.data));
    }
    check(worst <= 1e-6, "remove+reinsert deviates by " + fmt(worst));
    check(weakest_removal > 1e-3, "removal alone left the image unchanged");
    if (out.pass) {
        out.detail = "toy seeds 1-5, round-trip max-abs " + fmt(worst) + ", removal alone moves " + fmt(weakest_removal);
    }
    return out;
}

// 6
Outcome layout_parser() {
    Outcome out;
    Check check{out};
    std::mt19937_64 rng(606);
    int worst_key = 0;
    double worst_agreement = 1.0;
    for (int t = 0; t < 100 && out.pass; ++t) {
        const RoomParams room = random_room(rng);
        const SegmentationMap seg = room_segmentation(room);
        const Layout layout = parse_layout(seg);
        check(layout.left_anchor == PixelPoint{0, room.floor_left} &&
                  layout.right_anchor == PixelPoint{255, room.floor_right},
              "anchors differ from the generated room in map " + std::to_string(t));
        const SegmentationMap raster = rasterize_layout(layout, 256, 256);
        const Layout again = parse_layout(raster);
        const int dk = std::max(std::abs(again.key_point.x - layout.key_point.x),
                                std::abs(again.key_point.y - layout.key_point.y));
        worst_key = std::max(worst_key, dk);
        check(dk <= 1, "key point moved " + std::to_string(dk) + " px in map " + std::to_string(t));
        check(again.left_anchor == layout.left_anchor && again.right_anchor == layout.right_anchor,
              "anchors changed on re-parse in map " + std::to_string(t));
        std::size_t agree = 0;
        for (int y = 0; y < 256; ++y)
            for (int x = 0; x < 256; ++x) agree += raster.at(y, x) == room_label(room, x, y);
        worst_agreement = std::min(worst_agreement, agree / 65536.0);

        for (int size : {256, 4}) {
            const SegmentationMap r = rasterize_layout(layout, size, size);
            std::array<std::size_t, 3> counts{};
            const double scale = 256.0 / size;
            for (int y = 0; y < size; ++y) {
                for (int x = 0; x < size; ++x) {
                    const double cx = (x + 0.5) * scale - 0.5, cy = (y + 0.5) * scale - 0.5;
                    const bool ceiling = layout.in_ceiling(cx, cy);
                    const bool floor = !ceiling && cy >= layout.boundary_y(cx) - 1e-9;
                    const bool wall = !ceiling && !floor;
                    const int members = int(ceiling) + int(floor) + int(wall);
                    const int expected = ceiling ? 0 : floor ? 2 : 1;
                    check(members == 1 && r.at(y, x) == expected,
                          "partition broken at " + std::to_string(size) + "^2 pixel " + std::to_string(x) + "," +
                              std::to_string(y));
                    if (r.at(y, x) < 3) ++counts[r.at(y, x)];
                }
            }
            check(counts[0] + counts[1] + counts[2] == static_cast<std::size_t>(size) * size,
                  "labels outside {ceiling, wall, floor}");
        }
    }
    if (out.pass) {
        out.detail = "100 rooms, key point drift <= " + std::to_string(worst_key) + " px, anchors exact, raster/truth agreement >= " +
                     fmt(worst_agreement);
    }
    return out;
}

// 7
// Solid left-half and right-half masks with jittered edges.
std::vector<ObjectAsset> pose_families(std::mt19937_64& rng) {
    std::vector<ObjectAsset> assets;
    for (int family = 0; family < 2; ++family) {
        for (int i = 0; i < 12; ++i) {
            const int split = 26 + static_cast<int>(rng() % 13);
            const int y0 = static_cast<int>(rng() % 12), y1 = 52 + static_cast<int>(rng() % 13);
            ObjectAsset a;
            a.id = std::string(family == 0 ? "left_" : "right_") + std::to_string(i);
            a.category = "bed";
            a.mask = family == 0 ? block_mask(64, 64, y0, 0, y1, split) : block_mask(64, 64, y0, split, y1, 64);
            assets.push_back(a);
        }
    }
    return assets;
}

Outcome pose_clustering() {
    Outcome out;
    Check check{out};
    std::mt19937_64 rng(707);
    const auto assets = pose_families(rng);
    std::vector<const ObjectAsset*> ptrs;
    for (const auto& a : assets) ptrs.push_back(&a);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const PoseClusterModel m = cluster_poses(ptrs, 2, {16, 16}, seed * 7919 + 1);
        const int left = m.assignments.at("left_0");
        const int right = m.assignments.at("right_0");
        check(left != right, "families share a cluster under seed " + std::to_string(seed));
        for (const auto& a : assets) {
            const int want = a.id.starts_with("left_") ? left : right;
            check(m.assignments.at(a.id) == want, a.id + " misassigned under seed " + std::to_string(seed));
        }
    }
    const PoseClusterModel first = cluster_poses(ptrs, 2, {16, 16}, 42);
    std::vector<const ObjectAsset*> shuffled = ptrs;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    const PoseClusterModel second = cluster_poses(shuffled, 2, {16, 16}, 42);
    check(first.centers == second.centers && first.assignments == second.assignments,
          "fixed-seed clustering is not deterministic");
    if (out.pass) out.detail = "24 masks, 10 seeds separate perfectly; fixed-seed centers identical";
    return out;
}

// Small 14-layer model and a bank for script-level checks.
struct ScriptFixture {
    TempDir dir;
    GeneratorModel model = small_model(21, 14, 4, 8, 64);
    ObjectBank bank;
    fs::path manifest;
    fs::path bank_dir;

    ScriptFixture() {
        const auto codes = sample_codes(model, 5);
        const auto features = trace_features(model, codes, model.layer_count());
        const std::vector<int> layers{4, 6, 7, 8, 10, 13};
        bank.add(extract_object(model, features, codes, block_mask(64, 64, 32, 16, 56, 48), "bed", layers, "bed_031"));
        bank.add(extract_object(model, features, codes, block_mask(64, 64, 4, 40, 24, 60), "window", layers, "window_2"));
        manifest = export_checkpoint(model, dir.path / "model");
        bank_dir = dir.path / "bank";
        persist_bank(bank, bank_dir);
    }
};

// 8
Outcome layer_defaults() {
    Outcome out;
    Check check{out};
    ScriptFixture fx;
    const ScriptContext ctx{fx.model, fx.bank};
    const EditScript s = parse_edit_script(R"({"base":{"seed":3},"edits":[
        {"op":"remove","object":"bed_031"},
        {"op":"insert","object":"window_2"},
        {"op":"insert","object":"window_2","layer":10},
        {"op":"remove","object":"bed_031","layer":6},
        {"op":"clear_room"}]})",
                                           ctx);
    check(s.edits[0].layer == 4, "remove resolved to layer " + std::to_string(s.edits[0].layer.value_or(-1)));
    check(s.edits[1].layer == 7, "insert resolved to layer " + std::to_string(s.edits[1].layer.value_or(-1)));
    check(s.edits[2].layer == 10 && s.edits[3].layer == 6, "per-op layer override ignored");
    check(s.edits[4].layer == 4, "clear_room did not inherit the removal layer");
    check(recommended_layer(EditKind::Remove, "bed") == 4 && recommended_layer(EditKind::Insert, "window") == 7 &&
              recommended_layer(EditKind::ClearRoom) == 4,
          "recommended_layer table");

    const fs::path script = fx.dir.path / "sweep.json";
    write_text(script, R"({"base":{"seed":3},"edits":[{"op":"remove","object":"bed_031"},)"
                       R"({"op":"insert","object":"window_2","position":[-8,4]}]})");
    const fs::path png = fx.dir.path / "out" / "sweep.png";
    const std::vector<int> sweep{4, 7, 10, 13};
    const int rc = run_cli("run " + script.string() + " --model " + fx.manifest.string() + " --bank " +
                           fx.bank_dir.string() + " --out " + png.string() + " --dump-layers 4,7,10,13");
    check(rc == 0, "sweep exited with " + std::to_string(rc));
    std::vector<Bytes> outputs;
    for (const auto& entry : fs::directory_iterator(png.parent_path())) {
        const auto name = entry.path().filename().string();
        if (name.starts_with("sweep.L")) outputs.push_back(read_file(entry.path()));
    }
    check(outputs.size() == sweep.size(), "sweep wrote " + std::to_string(outputs.size()) + " layer outputs");
    if (out.pass) {
        auto model = std::make_shared<const GeneratorModel>(fx.model);
        auto bank = std::make_shared<const ObjectBank>(fx.bank);
        for (int layer : sweep) {
            const fs::path file = png.parent_path() / ("sweep.L" + std::to_string(layer) + ".png");
            check(fs::exists(file), file.filename().string() + " missing");
            if (!out.pass) break;
            json doc = json::parse(read_text(script));
            for (auto& op : doc["edits"]) op["layer"] = layer;
            Session session("x", model, "m", bank, BaseSpec{.seed = 3});
            session.apply_all(parse_edit_script(doc.dump(), ScriptContext{*model, *bank}));
            check(read_file(file) == encode_png_rgb(session.image()),
                  file.filename().string() + " differs from a direct run at layer " + std::to_string(layer));
        }
        std::sort(outputs.begin(), outputs.end());
        check(std::adjacent_find(outputs.begin(), outputs.end()) == outputs.end(), "sweep outputs are not distinct");
    }
    if (out.pass) out.detail = "remove->4, insert->7, clear_room->4, overrides kept; sweep wrote L4/L7/L10/L13";
    return out;
}

// 9
Outcome persistence_round_trips() {
    Outcome out;
    Check check{out};
    ScriptFixture fx;
    std::mt19937_64 rng(909);
    // Soft mask, offset, and extra layers.
    {
        const auto codes = sample_codes(fx.model, 77);
        const auto features = trace_features(fx.model, codes, fx.model.layer_count());
        RegionMask soft(64, 64);
        std::uniform_real_distribution<float> u(0.0f, 1.0f);
        for (int y = 10; y < 30; ++y)
            for (int x = 5; x < 25; ++x) soft.at(y, x) = u(rng);
        const std::vector<int> layers{1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14};
        fx.bank.add(transform_asset(extract_object(fx.model, features, codes, soft, "lamp", layers, "lamp_7", 9), 3, -2));
    }
    const fs::path a = fx.dir.path / "bank_a";
    const fs::path b = fx.dir.path / "bank_b";
    persist_bank(fx.bank, a);
    const ObjectBank loaded = load_bank(a);
    check(loaded == fx.bank, "bank changed across save/load");
    persist_bank(loaded, b);
    check(read_file(a / "manifest.json") == read_file(b / "manifest.json"), "re-saved manifest differs");

    const ScriptContext ctx{fx.model, fx.bank};
    const std::string text = R"({"base":{"seed":12345678901234},"edits":[
        {"op":"remove","object":"bed_031","priority":3},
        {"op":"insert","object":"window_2","position":[4,-3],"layers":[7,9]},
        {"op":"shift","object":"bed_031","position":[-8,0]},
        {"op":"rotate","object":"bed_031","path":["bed_031","window_2"],"s":2,"S":5},
        {"op":"restyle_object","object":"lamp_7","style_seed":18446744073709551615},
        {"op":"global_style","style":[0.1,-2.5e10,1e-300,3.141592653589793,0,-0.0,7,1e300],"layers":[9,14]},
        {"op":"clear_room","layer":5}]})";
    const EditScript first = parse_edit_script(text, ctx);
    const std::string canonical = serialize_edit_script(first);
    const EditScript second = parse_edit_script(canonical, ctx);
    check(first == second, "parse(serialize(script)) != script");
    check(serialize_edit_script(second) == canonical, "serialization is not a fixed point");

    // CLI exit codes.
    persist_bank(fx.bank, fx.bank_dir);
    const std::string common = " --model " + fx.manifest.string() + " --bank " + fx.bank_dir.string() + " --out " +
                               (fx.dir.path / "cli.png").string();
    const auto script = [&](const std::string& name, const std::string& body) {
        const fs::path p = fx.dir.path / name;
        write_text(p, body);
        return p.string();
    };
    struct Case {
        std::string name;
        std::string args;
        int expected;
    };
    const std::vector<Case> cases{
        {"valid script", script("ok.json", R"({"base":{"seed":1},"edits":[{"op":"remove","object":"bed_031"}]})") + common, 0},
        {"malformed JSON", script("bad.json", R"({"base":{"seed":1},"edits":[)") + common, 2},
        {"unknown op", script("op.json", R"({"base":{"seed":1},"edits":[{"op":"teleport"}]})") + common, 2},
        {"unknown field", script("field.json", R"({"base":{"seed":1},"edits":[{"op":"remove","object":"bed_031","size":2}]})") + common, 2},
        {"unknown object", script("ref.json", R"({"base":{"seed":1},"edits":[{"op":"insert","object":"sofa_9"}]})") + common, 2},
        {"out-of-frame shift", script("frame.json", R"({"base":{"seed":1},"edits":[{"op":"shift","object":"bed_031","position":[40,0]}]})") + common, 3},
        {"missing model", fx.dir.path.string() + "/ok.json --model " + (fx.dir.path / "nope.json").string() + " --bank " +
                              fx.bank_dir.string() + " --out " + (fx.dir.path / "cli.png").string(), 3},
    };
    for (const auto& c : cases) {
        const int rc = run_cli("run " + c.args);
        check(rc == c.expected, c.name + " exited " + std::to_string(rc) + ", expected " + std::to_string(c.expected));
    }
    // Corrupt a blob: execution failure.
    for (const auto& entry : fs::directory_iterator(fx.bank_dir)) {
        if (entry.path().extension() == ".f32") {
            std::ofstream(entry.path(), std::ios::binary | std::ios::app) << "x";
            break;
        }
    }
    const int rc = run_cli("run " + fx.dir.path.string() + "/ok.json" + common);
    check(rc == 3, "corrupted bank exited " + std::to_string(rc));
    if (out.pass) out.detail = "bank bitwise equal, script fixed point, exit codes 0/2/3 on 8 cases";
    return out;
}

// 10
struct Http {
    httplib::Client client;
    explicit Http(int port) : client("127.0.0.1", port) { client.set_read_timeout(120, 0); }

    std::pair<int, std::string> post(const std::string& path, const json& body) {
        auto res = client.Post(path, body.dump(), "application/json");
        return res ? std::pair{res->status, res->body} : std::pair{-1, std::string()};
    }
    std::pair<int, std::string> get(const std::string& path) {
        auto res = client.Get(path);
        return res ? std::pair{res->status, res->body} : std::pair{-1, std::string()};
    }
};

Outcome service_contract() {
    Outcome out;
    Check check{out};
    TempDir dir;
    const GeneratorModel model = instantiate_model(ToyConfig{.seed = 1});
    {
        const auto codes = sample_codes(model, 9);
        const auto features = trace_features(model, codes, model.layer_count());
        ObjectBank bank;
        const std::vector<int> layers{4, 7};
        bank.add(extract_object(model, features, codes, block_mask(256, 256, 128, 64, 192, 160), "bed", layers, "bed_1"));
        bank.add(extract_object(model, features, codes, block_mask(256, 256, 32, 160, 96, 224), "picture", layers, "pic_1"));
        persist_bank(bank, dir.path / "bank");
    }
    ServiceConfig config;
    config.port = 0;
    config.bank_directory = dir.path / "bank";
    config.edit_hold = std::chrono::milliseconds(400);
    EditService service(config);
    const int port = service.start();
    Http http(port);

    const json ops = json::array({{{"op", "remove"}, {"object", "bed_1"}},
                                  {{"op", "insert"}, {"object", "pic_1"}, {"position", {-32, 16}}}});
    auto created = http.post("/sessions", {{"model", "toy:1"}, {"seed", 3}});
    check(created.first == 201, "create returned " + std::to_string(created.first));
    const std::string id = created.first == 201 ? json::parse(created.second)["id"].get<std::string>() : "";
    for (const auto& op : ops) {
        const auto r = http.post("/sessions/" + id + "/edits", op);
        check(r.first == 200, "edit returned " + std::to_string(r.first) + " " + r.second);
    }
    const auto render = http.get("/sessions/" + id + "/render");
    check(render.first == 200, "render returned " + std::to_string(render.first));

    const fs::path script = dir.path / "flow.json";
    write_text(script, json{{"base", {{"seed", 3}}}, {"edits", ops}}.dump());
    const fs::path png = dir.path / "flow.png";
    const int rc = run_cli("run " + script.string() + " --model toy:1 --bank " + (dir.path / "bank").string() +
                           " --out " + png.string());
    check(rc == 0, "CLI exited " + std::to_string(rc));
    if (rc == 0) {
        const Bytes cli = read_file(png);
        check(std::string(cli.begin(), cli.end()) == render.second, "service render differs from CLI output");
    }

    // Two simultaneous writers on one session.
    std::array<int, 2> statuses{};
    {
        std::vector<std::thread> writers;
        for (int i = 0; i < 2; ++i) {
            writers.emplace_back([&, i] {
                Http c(port);
                statuses[static_cast<std::size_t>(i)] =
                    c.post("/sessions/" + id + "/edits", {{"op", "global_style"}, {"style_seed", 40 + i}}).first;
            });
        }
        for (auto& t : writers) t.join();
    }
    std::sort(statuses.begin(), statuses.end());
    check(statuses == std::array<int, 2>{200, 409},
          "concurrent edits returned " + std::to_string(statuses[0]) + "/" + std::to_string(statuses[1]));

    // Interleaved sessions versus serial replays.
    auto make = [&](int seed) {
        auto r = http.post("/sessions", {{"model", "toy:1"}, {"seed", seed}});
        return r.first == 201 ? json::parse(r.second)["id"].get<std::string>() : std::string("missing");
    };
    const json a_ops = json::array({{{"op", "remove"}, {"object", "pic_1"}}, {{"op", "global_style"}, {"style_seed", 8}}});
    const json b_ops = json::array({{{"op", "shift"}, {"object", "bed_1"}, {"position", {32, 0}}},
                                    {{"op", "restyle_object"}, {"object", "bed_1"}, {"style_seed", 2}}});
    const std::string a = make(5), b = make(6);
    std::vector<std::thread> workers;
    std::array<std::vector<int>, 2> codes;
    workers.emplace_back([&] {
        Http c(port);
        for (const auto& op : a_ops) codes[0].push_back(c.post("/sessions/" + a + "/edits", op).first);
    });
    workers.emplace_back([&] {
        Http c(port);
        for (const auto& op : b_ops) codes[1].push_back(c.post("/sessions/" + b + "/edits", op).first);
    });
    for (auto& t : workers) t.join();
    check(codes[0] == std::vector<int>{200, 200} && codes[1] == std::vector<int>{200, 200},
          "interleaved edits were rejected");
    const auto serial = [&](int seed, const json& log) {
        const std::string s = make(seed);
        for (const auto& op : log) http.post("/sessions/" + s + "/edits", op);
        return http.get("/sessions/" + s + "/render").second;
    };
    check(http.get("/sessions/" + a + "/render").second == serial(5, a_ops), "session A differs from its serial replay");
    check(http.get("/sessions/" + b + "/render").second == serial(6, b_ops), "session B differs from its serial replay");
    service.stop();
    if (out.pass) out.detail = "service PNG == CLI PNG, concurrent writers 200/409, interleaved == serial";
    return out;
}

} // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"operator identities", operator_identities},
        {"priority masks vs painter oracle", priority_oracle},
        {"AdaIN statistics", adain_statistics},
        {"latent interpolation exactness", interpolation_exactness},
        {"layer-loop fidelity", layer_loop_fidelity},
        {"layout parser", layout_parser},
        {"pose clustering", pose_clustering},
        {"layer recommendation defaults", layer_defaults},
        {"persistence and script round-trips", persistence_round_trips},
        {"service contract", service_contract},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        failures += o.pass ? 0 : 1;
        std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << (i + 1) << " " << criteria[i].first << ": "
                  << o.detail << " (" << fmt(secs) << " s)" << std::endl;
    }
    return failures == 0 ? 0 : 1;
}
