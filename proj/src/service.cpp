#include "logan/service.hpp"

#include "logan/checkpoint.hpp"
#include "logan/error.hpp"
#include "logan/image_io.hpp"
#include "logan/session.hpp"

#include <httplib.h>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <thread>

namespace logan {

using nlohmann::json;

ServiceConfig service_config_from_env(ServiceConfig config) {
    if (const char* bind = std::getenv("LOGAN_BIND")) {
        const std::string value = bind;
        const auto colon = value.rfind(':');
        if (colon == std::string::npos) throw Error(ErrorKind::Config, "LOGAN_BIND must be host:port");
        config.host = value.substr(0, colon);
        config.port = std::stoi(value.substr(colon + 1));
    }
    if (const char* model = std::getenv("LOGAN_MODEL"); model && !config.model_manifest) config.model_manifest = model;
    if (const char* bank = std::getenv("LOGAN_BANK"); bank && !config.bank_directory) config.bank_directory = bank;
    if (const char* max = std::getenv("LOGAN_MAX_SESSIONS")) config.max_sessions = std::stoul(max);
    return config;
}

namespace {

struct HttpError {
    int status;
    std::string code;
    std::string message;
    json extra = json::object();
};

struct SessionEntry {
    std::unique_ptr<Session> session;
    std::mutex writer;
    std::atomic<bool> writing{false};
};

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, const HttpError& e) {
    json err = {{"code", e.code}, {"message", e.message}};
    err.update(e.extra);
    send_json(res, e.status, {{"error", err}});
}

std::optional<std::uint64_t> parse_toy_seed(const std::string& model) {
    if (!model.starts_with("toy:")) return std::nullopt;
    const std::string digits = model.substr(4);
    if (digits.empty() || digits.size() > 20 || !std::all_of(digits.begin(), digits.end(), ::isdigit)) {
        return std::nullopt;
    }
    try {
        return std::stoull(digits);
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

json layout_json(const Layout& layout) {
    json hull = json::array();
    for (const auto& p : layout.ceiling_hull) hull.push_back({p.x, p.y});
    json boundary = json::array();
    for (const auto& p : layout.floor_boundary) boundary.push_back({p[0], p[1]});
    return {{"height", layout.height},
            {"width", layout.width},
            {"ceiling_hull", hull},
            {"key_point", {layout.key_point.x, layout.key_point.y}},
            {"left_anchor", {layout.left_anchor.x, layout.left_anchor.y}},
            {"right_anchor", {layout.right_anchor.x, layout.right_anchor.y}},
            {"slopes", {layout.slope_left, layout.slope_right}},
            {"floor_boundary", boundary}};
}

// Channel mean of a feature map, min-max scaled to 8-bit gray.
Bytes feature_heatmap(const FeatureMap& f) {
    std::vector<double> mean(f.plane_size(), 0.0);
    for (int c = 0; c < f.channels; ++c) {
        const auto ch = f.channel(c);
        for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += ch[i];
    }
    for (auto& v : mean) v /= f.channels;
    const auto [lo, hi] = std::minmax_element(mean.begin(), mean.end());
    const double range = *hi - *lo;
    GrayImage g{f.width, f.height, std::vector<std::uint8_t>(mean.size(), 0)};
    for (std::size_t i = 0; i < mean.size(); ++i) {
        const double t = range > 0.0 ? (mean[i] - *lo) / range : 0.0;
        g.pixels[i] = static_cast<std::uint8_t>(std::lround(t * 255.0));
    }
    return encode_png_gray(g);
}

std::string quoted(const std::string& tag) { return "\"" + tag + "\""; }

} // namespace

struct EditService::Impl {
    ServiceConfig config;
    httplib::Server server;
    std::thread thread;
    int port = -1;

    std::shared_ptr<const ObjectBank> bank;
    std::mutex models_mutex;
    std::map<std::string, std::shared_ptr<const GeneratorModel>> models;

    std::mutex sessions_mutex;
    std::map<std::string, std::shared_ptr<SessionEntry>> sessions;
    std::size_t reserved = 0;
    std::uint64_t next_id = 1;

    explicit Impl(ServiceConfig c) : config(std::move(c)) {
        if (config.bank_directory) {
            bank = std::make_shared<const ObjectBank>(load_bank(*config.bank_directory));
        } else {
            bank = std::make_shared<const ObjectBank>();
        }
        if (config.model_manifest) {
            models["default"] = std::make_shared<const GeneratorModel>(load_checkpoint(*config.model_manifest));
        }
        routes();
    }

    std::shared_ptr<const GeneratorModel> model(const std::string& id) {
        std::lock_guard lock(models_mutex);
        if (auto it = models.find(id); it != models.end()) return it->second;
        const auto seed = parse_toy_seed(id);
        if (!seed) return nullptr;
        auto m = std::make_shared<const GeneratorModel>(instantiate_model(ToyConfig{.seed = *seed}));
        models[id] = m;
        return m;
    }

    std::shared_ptr<SessionEntry> entry(const std::string& id) {
        std::lock_guard lock(sessions_mutex);
        auto it = sessions.find(id);
        if (it == sessions.end()) throw HttpError{404, "unknown_session", "no session \"" + id + "\""};
        return it->second;
    }

    json resource(const std::string& id, SessionEntry& e) {
        const SessionSnapshot snap = e.session->snapshot();
        json log = json::array();
        for (const auto& op : snap.script.edits) log.push_back(to_json(op));
        return {{"id", id},
                {"status", e.writing ? "rendering" : "ready"},
                {"model", e.session->model_id()},
                {"base", to_json(snap.script.base)},
                {"log", log},
                {"digest", snap.digest},
                {"warnings", snap.warnings},
                {"links",
                 {{"self", "/sessions/" + id},
                  {"render", "/sessions/" + id + "/render"},
                  {"layout", "/sessions/" + id + "/layout"},
                  {"edits", "/sessions/" + id + "/edits"}}}};
    }

    static json parse_body(const httplib::Request& req) {
        try {
            return json::parse(req.body);
        } catch (const json::parse_error& e) {
            throw HttpError{400, "bad_request", std::string("malformed JSON body: ") + e.what()};
        }
    }

    void create_session(const httplib::Request& req, httplib::Response& res) {
        const json body = parse_body(req);
        if (!body.is_object()) throw HttpError{400, "bad_request", "body must be a JSON object"};
        if (!body.contains("model") || !body["model"].is_string()) {
            throw HttpError{400, "bad_request", "field \"model\" (string) is required"};
        }
        const std::string model_id = body["model"].get<std::string>();
        json base = body;
        base.erase("model");
        auto m = model(model_id);
        if (!m) throw HttpError{404, "unknown_model", "model \"" + model_id + "\" is not registered"};
        BaseSpec spec;
        try {
            spec = parse_base(base, "", *m);
        } catch (const ParseError& e) {
            throw HttpError{400, "bad_request", e.what(), {{"pointer", e.pointer()}}};
        }

        std::string id;
        {
            std::lock_guard lock(sessions_mutex);
            if (sessions.size() + reserved >= config.max_sessions) {
                throw HttpError{503, "session_limit",
                                "session limit of " + std::to_string(config.max_sessions) + " reached"};
            }
            ++reserved;
            char buf[32];
            std::snprintf(buf, sizeof buf, "s%06llu", static_cast<unsigned long long>(next_id++));
            id = buf;
        }
        auto e = std::make_shared<SessionEntry>();
        try {
            e->session = std::make_unique<Session>(id, m, model_id, bank, spec);
        } catch (...) {
            std::lock_guard lock(sessions_mutex);
            --reserved;
            throw;
        }
        {
            std::lock_guard lock(sessions_mutex);
            --reserved;
            sessions[id] = e;
        }
        res.set_header("Location", "/sessions/" + id);
        send_json(res, 201, resource(id, *e));
    }

    void apply_edit(const std::string& id, const httplib::Request& req, httplib::Response& res) {
        auto e = entry(id);
        const json body = parse_body(req);
        std::unique_lock writer(e->writer, std::try_to_lock);
        if (!writer.owns_lock()) throw HttpError{409, "conflict", "another edit on session \"" + id + "\" is in flight"};
        e->writing = true;
        struct Reset {
            std::atomic<bool>& flag;
            ~Reset() { flag = false; }
        } reset{e->writing};
        EditOp op;
        try {
            op = parse_edit_op(body, "", e->session->context());
        } catch (const ParseError& err) {
            throw HttpError{422, "invalid_op", err.what(), {{"pointer", err.pointer()}}};
        } catch (const ReferenceError& err) {
            throw HttpError{422, "unknown_object", err.what(), {{"object", err.object_id()}}};
        }
        if (config.edit_hold.count() > 0) std::this_thread::sleep_for(config.edit_hold);
        try {
            e->session->apply(op);
        } catch (const ExecutionError& err) {
            json extra = {{"layer", err.layer()}};
            if (!err.object_id().empty()) extra["object"] = err.object_id();
            throw HttpError{422, "execution_failed", err.what(), extra};
        } catch (const Error& err) {
            throw HttpError{422, "execution_failed", err.what()};
        }
        send_json(res, 200, resource(id, *e));
    }

    void render(const std::string& id, const httplib::Request& req, httplib::Response& res) {
        auto e = entry(id);
        if (req.has_param("layer")) {
            const std::string text = req.get_param_value("layer");
            int layer = 0;
            try {
                std::size_t used = 0;
                layer = std::stoi(text, &used);
                if (used != text.size()) throw std::invalid_argument(text);
            } catch (const std::exception&) {
                throw HttpError{422, "bad_layer", "layer must be an integer"};
            }
            const int L = e->session->model().layer_count();
            if (layer < 1 || layer > L) {
                throw HttpError{422, "bad_layer", "layer " + text + " outside [1," + std::to_string(L) + "]"};
            }
            const std::string digest = e->session->log_digest();
            const FeatureMap f = e->session->content(layer);
            res.set_header("ETag", quoted(digest + "-L" + std::to_string(layer)));
            const Bytes png = feature_heatmap(f);
            res.set_content(std::string(png.begin(), png.end()), "image/png");
            return;
        }
        const SessionSnapshot snap = e->session->snapshot();
        const std::string tag = quoted(snap.digest);
        res.set_header("ETag", tag);
        if (req.get_header_value("If-None-Match") == tag) {
            res.status = 304;
            return;
        }
        const Bytes png = encode_png_rgb(snap.image);
        res.set_content(std::string(png.begin(), png.end()), "image/png");
    }

    void layout(const std::string& id, const httplib::Request& req, httplib::Response& res) {
        auto e = entry(id);
        const auto& l = e->session->layout();
        if (!l) throw HttpError{404, "no_layout", "session \"" + id + "\" was created without a segmentation map"};
        if (req.get_param_value("format") == "png") {
            const SegmentationMap seg = rasterize_layout(*l, l->height, l->width);
            const std::array<Rgb8, 3> palette{Rgb8{120, 160, 220}, Rgb8{220, 210, 180}, Rgb8{140, 100, 70}};
            const Bytes png = encode_png_indexed(GrayImage{seg.width, seg.height, seg.labels}, palette);
            res.set_content(std::string(png.begin(), png.end()), "image/png");
            return;
        }
        send_json(res, 200, layout_json(*l));
    }

    void objects(httplib::Response& res) {
        json list = json::array();
        for (const auto& [id, a] : bank->assets()) {
            const BoundingBox b = a.bbox();
            list.push_back({{"id", id},
                            {"category", a.category},
                            {"priority", a.priority},
                            {"offset", {a.offset_x, a.offset_y}},
                            {"bbox", {b.x0, b.y0, b.x1, b.y1}},
                            {"layers", a.layers()},
                            {"thumbnail", "/objects/" + id + "/thumbnail"}});
        }
        send_json(res, 200, {{"objects", list}});
    }

    void thumbnail(const std::string& id, httplib::Response& res) {
        const auto* a = bank->find(id);
        if (a == nullptr) throw HttpError{404, "unknown_object", "no object \"" + id + "\"", {{"object", id}}};
        const Bytes png = mask_to_png(a->placed_mask());
        res.set_content(std::string(png.begin(), png.end()), "image/png");
    }

    template <typename F>
    httplib::Server::Handler guarded(F f) {
        return [f](const httplib::Request& req, httplib::Response& res) {
            try {
                f(req, res);
            } catch (const HttpError& e) {
                send_error(res, e);
            } catch (const LayoutIncompleteError& e) {
                send_error(res, {422, "layout_incomplete", e.what(), {{"component", e.component()}}});
            } catch (const Error& e) {
                const bool input = e.kind() == ErrorKind::Config || e.kind() == ErrorKind::Io ||
                                   e.kind() == ErrorKind::Parse || e.kind() == ErrorKind::Contract;
                send_error(res, {input ? 400 : 500, input ? "bad_request" : "internal", e.what()});
            } catch (const std::exception& e) {
                send_error(res, {500, "internal", e.what()});
            }
        };
    }

    void routes() {
        server.Get("/healthz", guarded([](const httplib::Request&, httplib::Response& res) {
                       send_json(res, 200, {{"status", "ok"}});
                   }));
        server.Post("/sessions", guarded([this](const httplib::Request& req, httplib::Response& res) {
                        create_session(req, res);
                    }));
        server.Get(R"(/sessions/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
                       const std::string id = req.matches[1];
                       auto e = entry(id);
                       send_json(res, 200, resource(id, *e));
                   }));
        server.Post(R"(/sessions/([^/]+)/edits)",
                    guarded([this](const httplib::Request& req, httplib::Response& res) {
                        apply_edit(req.matches[1], req, res);
                    }));
        server.Get(R"(/sessions/([^/]+)/render)", guarded([this](const httplib::Request& req, httplib::Response& res) {
                       render(req.matches[1], req, res);
                   }));
        server.Get(R"(/sessions/([^/]+)/layout)", guarded([this](const httplib::Request& req, httplib::Response& res) {
                       layout(req.matches[1], req, res);
                   }));
        server.Get("/objects", guarded([this](const httplib::Request&, httplib::Response& res) { objects(res); }));
        server.Get(R"(/objects/([^/]+)/thumbnail)",
                   guarded([this](const httplib::Request& req, httplib::Response& res) {
                       thumbnail(req.matches[1], res);
                   }));
        server.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
            if (!res.body.empty()) return;
            if (res.status == 404) {
                send_error(res, {404, "not_found", "no route for " + req.method + " " + req.path});
            } else if (res.status == 405) {
                send_error(res, {405, "method_not_allowed", "method not allowed"});
            }
        });
    }
};

EditService::EditService(ServiceConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {}

EditService::~EditService() { stop(); }

int EditService::bind() {
    if (impl_->port >= 0) return impl_->port;
    if (impl_->config.port == 0) {
        impl_->port = impl_->server.bind_to_any_port(impl_->config.host);
    } else if (impl_->server.bind_to_port(impl_->config.host, impl_->config.port)) {
        impl_->port = impl_->config.port;
    }
    if (impl_->port < 0) {
        throw Error(ErrorKind::Io, "cannot bind " + impl_->config.host + ":" + std::to_string(impl_->config.port));
    }
    return impl_->port;
}

void EditService::listen() {
    bind();
    impl_->server.listen_after_bind();
}

int EditService::start() {
    const int p = bind();
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return p;
}

void EditService::stop() {
    if (!impl_) return;
    impl_->server.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

int EditService::port() const { return impl_->port; }

} // namespace logan
