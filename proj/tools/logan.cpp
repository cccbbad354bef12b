#include "logan/checkpoint.hpp"
#include "logan/composer.hpp"
#include "logan/error.hpp"
#include "logan/image_io.hpp"
#include "logan/service.hpp"
#include "logan/session.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <csignal>
#include <filesystem>
#include <iostream>
#include <memory>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace logan;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitParse = 2;
constexpr int kExitExecution = 3;

// A failure in user-supplied script content (exit 2).
struct ScriptFailure {
    std::string message;
};

std::shared_ptr<const GeneratorModel> load_model(const std::string& spec) {
    if (spec.starts_with("toy:")) {
        std::uint64_t seed = 0;
        try {
            std::size_t used = 0;
            seed = std::stoull(spec.substr(4), &used);
            if (used != spec.size() - 4) throw std::invalid_argument(spec);
        } catch (const std::exception&) {
            throw Error(ErrorKind::Config, "bad toy model \"" + spec + "\", expected toy:<seed>");
        }
        return std::make_shared<const GeneratorModel>(instantiate_model(ToyConfig{.seed = seed}));
    }
    return std::make_shared<const GeneratorModel>(load_checkpoint(spec));
}

std::shared_ptr<const ObjectBank> load_bank_or_empty(const std::string& dir) {
    if (dir.empty()) return std::make_shared<const ObjectBank>();
    return std::make_shared<const ObjectBank>(load_bank(dir));
}

std::vector<int> parse_layer_list(const std::string& text) {
    std::vector<int> layers;
    std::stringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        try {
            std::size_t used = 0;
            layers.push_back(std::stoi(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ScriptFailure{"bad layer list \"" + text + "\""};
        }
    }
    if (layers.empty()) throw ScriptFailure{"empty layer list"};
    return layers;
}

EditScript parse_script_text(const std::string& text, const ScriptContext& ctx) {
    try {
        return parse_edit_script(text, ctx);
    } catch (const ParseError& e) {
        throw ScriptFailure{e.what()};
    } catch (const ReferenceError& e) {
        throw ScriptFailure{e.what()};
    }
}

void write_png(const fs::path& path, const Image& image) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    write_file_atomic(path, encode_png_rgb(image));
}

Image render_script(const std::shared_ptr<const GeneratorModel>& model, const std::string& model_id,
                    const std::shared_ptr<const ObjectBank>& bank, const EditScript& script) {
    Session session("cli", model, model_id, bank, script.base);
    session.apply_all(script);
    for (const auto& w : session.warnings()) std::cerr << "warning: " << w << "\n";
    return session.image();
}

fs::path layer_output(const fs::path& out, int layer) {
    return out.parent_path() / (out.stem().string() + ".L" + std::to_string(layer) + out.extension().string());
}

int cmd_run(const std::string& script_path, const std::string& model_spec, const std::string& bank_dir,
            const std::string& out, const std::string& dump_layers, std::optional<std::uint64_t> seed) {
    const Bytes raw = read_file(script_path);
    const std::string text(raw.begin(), raw.end());
    const auto model = load_model(model_spec);
    const auto bank = load_bank_or_empty(bank_dir);
    const ScriptContext ctx{*model, *bank};
    EditScript script = parse_script_text(text, ctx);
    if (seed) {
        script.base.seed = seed;
        script.base.codes.reset();
    }
    std::vector<int> sweep;
    if (!dump_layers.empty()) sweep = parse_layer_list(dump_layers);

    // Validate every sweep variant before rendering anything.
    std::vector<std::pair<int, EditScript>> variants;
    for (int layer : sweep) {
        json doc = to_json(script);
        for (auto& op : doc["edits"]) {
            if (op.contains("layer")) op["layer"] = layer;
        }
        variants.emplace_back(layer, parse_script_text(doc.dump(), ctx));
    }

    write_png(out, render_script(model, model_spec, bank, script));
    std::cout << out << "\n";
    for (const auto& [layer, variant] : variants) {
        const fs::path path = layer_output(out, layer);
        write_png(path, render_script(model, model_spec, bank, variant));
        std::cout << path.string() << "\n";
    }
    return kExitOk;
}

RegionMask block_mask(int height, int width, int y0, int x0, int y1, int x1) {
    RegionMask m(height, width);
    for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) m.at(y, x) = 1.0f;
    }
    return m;
}

Image strip(const std::vector<Image>& images) {
    constexpr int gap = 4;
    int width = 0;
    int height = 0;
    for (const auto& im : images) {
        width += im.width;
        height = std::max(height, im.height);
    }
    width += gap * (static_cast<int>(images.size()) - 1);
    Image out(height, width);
    std::fill(out.data.begin(), out.data.end(), 1.0f);
    int x0 = 0;
    for (const auto& im : images) {
        for (int k = 0; k < 3; ++k) {
            for (int y = 0; y < im.height; ++y) {
                for (int x = 0; x < im.width; ++x) out.at(k, y, x0 + x) = im.at(k, y, x);
            }
        }
        x0 += im.width + gap;
    }
    return out;
}

int cmd_figures(const std::string& dir, const std::string& model_spec, std::uint64_t seed) {
    const auto model = load_model(model_spec);
    const int H = model->output_height();
    const int W = model->output_width();
    const int L = model->layer_count();
    const fs::path root(dir);
    fs::create_directories(root);
    json index = json::object();

    std::vector<int> all_layers(static_cast<std::size_t>(L));
    for (int l = 1; l <= L; ++l) all_layers[static_cast<std::size_t>(l - 1)] = l;
    const RegionMask bed = block_mask(H, W, H * 9 / 16, W / 4, H * 7 / 8, W * 3 / 4);

    auto bank = std::make_shared<ObjectBank>();
    {
        Session host("fig", model, model_spec, bank, BaseSpec{.seed = seed});
        bank->add(host.extract(bed, "bed", all_layers, "host_bed"));
        for (std::uint64_t k = 1; k <= 3; ++k) {
            Session donor("fig", model, model_spec, bank, BaseSpec{.seed = seed + k});
            bank->add(donor.extract(bed, "bed", all_layers, "bed_" + std::to_string(k)));
        }
    }

    auto sweep = [&](const std::string& name, EditOp op, const std::vector<int>& layers) {
        std::vector<Image> frames;
        json files = json::array();
        Session base("fig", model, model_spec, bank, BaseSpec{.seed = seed});
        frames.push_back(base.image());
        write_png(root / (name + "_base.png"), base.image());
        files.push_back(name + "_base.png");
        for (int layer : layers) {
            if (layer > L) continue;
            op.layer = layer;
            Session s("fig", model, model_spec, bank, BaseSpec{.seed = seed});
            s.apply(op);
            const std::string file = name + "_L" + std::to_string(layer) + ".png";
            write_png(root / file, s.image());
            frames.push_back(s.image());
            files.push_back(file);
        }
        write_png(root / (name + ".png"), strip(frames));
        index[name] = {{"strip", name + ".png"}, {"frames", files}};
    };

    EditOp remove{.kind = EditKind::Remove, .object = "host_bed", .position = std::array<int, 2>{0, 0}, .priority = 1};
    sweep("removal", remove, {4, 6, 8, 10});
    EditOp insert{.kind = EditKind::Insert, .object = "bed_1", .position = std::array<int, 2>{0, 0}, .priority = 1};
    sweep("insertion", insert, {4, 7, 10, 13});

    std::vector<Image> rotation;
    json rotation_files = json::array();
    constexpr int steps = 4;
    for (int s = 0; s <= steps; ++s) {
        EditOp rotate{.kind = EditKind::Rotate,
                      .object = "bed_2",
                      .layer = std::min(kInsertionLayer, L),
                      .layers = LayerRange{std::min(kDefaultPoseLayers.first, L), std::min(kDefaultPoseLayers.last, L)},
                      .position = std::array<int, 2>{0, 0},
                      .priority = 1,
                      .s = s,
                      .steps = steps,
                      .path = std::array<std::string, 2>{"bed_2", "bed_3"}};
        Session session("fig", model, model_spec, bank, BaseSpec{.seed = seed});
        session.apply(rotate);
        const std::string file = "rotation_s" + std::to_string(s) + ".png";
        write_png(root / file, session.image());
        rotation.push_back(session.image());
        rotation_files.push_back(file);
    }
    write_png(root / "rotation.png", strip(rotation));
    index["rotation"] = {{"strip", "rotation.png"}, {"frames", rotation_files}};
    write_file_atomic(root / "index.json", index.dump(2) + "\n");
    std::cout << (root / "index.json").string() << "\n";
    return kExitOk;
}

int cmd_extract(const std::string& model_spec, std::uint64_t seed, const std::string& mask_path,
                const std::string& category, const std::string& id, const std::string& layers_text,
                const std::string& bank_dir, std::optional<int> priority) {
    const auto model = load_model(model_spec);
    ObjectBank bank;
    if (fs::exists(fs::path(bank_dir) / "manifest.json")) bank = load_bank(bank_dir);
    const std::vector<int> layers = parse_layer_list(layers_text);
    const RegionMask mask = mask_from_png(read_file(mask_path));
    auto shared = std::make_shared<const ObjectBank>(bank);
    Session session("cli", model, model_spec, shared, BaseSpec{.seed = seed});
    bank.add(session.extract(mask, category, layers, id, priority));
    persist_bank(bank, bank_dir);
    std::cout << id << "\n";
    return kExitOk;
}

int cmd_cluster(const std::string& bank_dir, const std::string& category, int clusters, std::uint64_t seed,
                int sample) {
    const ObjectBank bank = load_bank(bank_dir);
    const auto assets = bank.by_category(category);
    const PoseClusterModel m = cluster_poses(assets, clusters, {sample, sample}, seed);
    json out = {{"category", m.category},
                {"representatives", m.representatives},
                {"assignments", m.assignments},
                {"inertia", m.inertia},
                {"iterations", m.iterations}};
    std::cout << out.dump(2) << "\n";
    return kExitOk;
}

EditService* g_service = nullptr;

int cmd_serve(const std::string& bind, const std::string& model, const std::string& bank, std::size_t max_sessions) {
    ServiceConfig config;
    if (!model.empty()) config.model_manifest = model;
    if (!bank.empty()) config.bank_directory = bank;
    config = service_config_from_env(config);
    if (!bind.empty()) {
        const auto colon = bind.rfind(':');
        if (colon == std::string::npos) throw Error(ErrorKind::Config, "--bind expects host:port");
        config.host = bind.substr(0, colon);
        config.port = std::stoi(bind.substr(colon + 1));
    }
    if (max_sessions > 0) config.max_sessions = max_sessions;
    EditService service(config);
    const int port = service.bind();
    std::cerr << "listening on " << config.host << ":" << port << "\n";
    g_service = &service;
    std::signal(SIGINT, [](int) {
        if (g_service) g_service->stop();
    });
    std::signal(SIGTERM, [](int) {
        if (g_service) g_service->stop();
    });
    service.listen();
    g_service = nullptr;
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Local editing of style-based generator images"};
    app.require_subcommand(1);

    std::string script, model = "toy:0", bank, out, dump_layers;
    std::optional<std::uint64_t> run_seed;
    auto* run = app.add_subcommand("run", "Execute an edit script and write the rendered PNG");
    run->add_option("script", script, "Edit script (JSON)")->required();
    run->add_option("--model", model, "Checkpoint manifest or toy:<seed>");
    run->add_option("--bank", bank, "Object bank directory");
    run->add_option("--out", out, "Output PNG")->required();
    run->add_option("--dump-layers", dump_layers, "Re-render with every edit layer set to each of a,b,c");
    run->add_option("--seed", run_seed, "Override the base seed");

    std::string fig_dir, fig_model = "toy:1";
    std::uint64_t fig_seed = 1;
    auto* figures = app.add_subcommand("figures", "Regenerate layer-sweep and rotation grids");
    figures->add_option("dir", fig_dir, "Output directory")->required();
    figures->add_option("--model", fig_model, "Checkpoint manifest or toy:<seed>");
    figures->add_option("--seed", fig_seed, "Base seed");

    std::string ex_model = "toy:0", ex_mask, ex_category, ex_id, ex_layers = "4,7", ex_bank;
    std::uint64_t ex_seed = 0;
    std::optional<int> ex_priority;
    auto* extract = app.add_subcommand("extract", "Extract an object into a bank");
    extract->add_option("--model", ex_model, "Checkpoint manifest or toy:<seed>");
    extract->add_option("--seed", ex_seed, "Base seed");
    extract->add_option("--mask", ex_mask, "Grayscale mask PNG at output resolution")->required();
    extract->add_option("--category", ex_category, "Object category")->required();
    extract->add_option("--id", ex_id, "Object id")->required();
    extract->add_option("--layers", ex_layers, "Layers whose features are stored");
    extract->add_option("--bank", ex_bank, "Bank directory (created if missing)")->required();
    extract->add_option("--priority", ex_priority, "Priority override");

    std::string cl_bank, cl_category;
    int cl_clusters = 2, cl_sample = 32;
    std::uint64_t cl_seed = 0;
    auto* cluster = app.add_subcommand("cluster", "Cluster a category's masks into poses");
    cluster->add_option("--bank", cl_bank, "Bank directory")->required();
    cluster->add_option("--category", cl_category, "Category")->required();
    cluster->add_option("--clusters", cl_clusters, "Number of clusters");
    cluster->add_option("--seed", cl_seed, "Seeding RNG seed");
    cluster->add_option("--sample", cl_sample, "Mask sample size");

    std::string sv_bind, sv_model, sv_bank;
    std::size_t sv_max = 0;
    auto* serve = app.add_subcommand("serve", "Run the HTTP edit service");
    serve->add_option("--bind", sv_bind, "host:port (env LOGAN_BIND)");
    serve->add_option("--model", sv_model, "Checkpoint manifest registered as \"default\" (env LOGAN_MODEL)");
    serve->add_option("--bank", sv_bank, "Object bank directory (env LOGAN_BANK)");
    serve->add_option("--max-sessions", sv_max, "Session limit (env LOGAN_MAX_SESSIONS)");

    std::string et_out;
    std::uint64_t et_seed = 0;
    auto* export_toy = app.add_subcommand("export-toy", "Write a toy model in checkpoint format");
    export_toy->add_option("--seed", et_seed, "Toy seed");
    export_toy->add_option("--out", et_out, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitParse;
    }

    try {
        if (*run) return cmd_run(script, model, bank, out, dump_layers, run_seed);
        if (*figures) return cmd_figures(fig_dir, fig_model, fig_seed);
        if (*extract) return cmd_extract(ex_model, ex_seed, ex_mask, ex_category, ex_id, ex_layers, ex_bank, ex_priority);
        if (*cluster) return cmd_cluster(cl_bank, cl_category, cl_clusters, cl_seed, cl_sample);
        if (*serve) return cmd_serve(sv_bind, sv_model, sv_bank, sv_max);
        if (*export_toy) {
            const auto m = instantiate_model(ToyConfig{.seed = et_seed});
            std::cout << export_checkpoint(m, et_out).string() << "\n";
            return kExitOk;
        }
    } catch (const ScriptFailure& e) {
        std::cerr << "error: " << e.message << "\n";
        return kExitParse;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitExecution;
    }
    return kExitOk;
}
