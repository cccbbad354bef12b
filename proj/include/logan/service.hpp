#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

namespace logan {

struct ServiceConfig {
    std::string host = "127.0.0.1";
    int port = 8080; // 0 picks a free port
    std::optional<std::filesystem::path> model_manifest; // registered as model "default"
    std::optional<std::filesystem::path> bank_directory;
    std::size_t max_sessions = 64;
    // Extra time an edit holds its session's writer lock; for contention tests.
    std::chrono::milliseconds edit_hold{0};
};

// Overrides unset fields from LOGAN_BIND (host:port), LOGAN_MODEL,
// LOGAN_BANK and LOGAN_MAX_SESSIONS.
ServiceConfig service_config_from_env(ServiceConfig config);

// REST facade over sessions, the object bank and rendering.
//   POST /sessions                      {"model", "seed" | "codes", "segmentation"?} -> 201
//   GET  /sessions/{id}
//   POST /sessions/{id}/edits           one edit op
//   GET  /sessions/{id}/render[?layer=] PNG, ETag = log digest
//   GET  /sessions/{id}/layout[?format=png]
//   GET  /objects
//   GET  /objects/{id}/thumbnail
//   GET  /healthz
// Errors: {"error": {"code", "message", ...}}.
class EditService {
public:
    explicit EditService(ServiceConfig config);
    ~EditService();
    EditService(const EditService&) = delete;
    EditService& operator=(const EditService&) = delete;

    // Binds the listening socket and returns the port.
    int bind();
    // Serves until stop(); bind() is called first if needed.
    void listen();
    // listen() on a background thread; returns once the socket accepts.
    int start();
    void stop();

    int port() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace logan
