#ifndef VCCNET_SERVICE_HPP
#define VCCNET_SERVICE_HPP

// Trajectory ingestion service.
//
// Store layout under the root directory:
//   index.jsonl                      one {"session_id", "image_id", "request_sha256"} line per stored session
//   sessions/<id>/request.json       the accepted request, canonical JSON (never rewritten)
//   sessions/<id>/derived.json       stay points and map shape
//   sessions/<id>/soft.vcca          derived soft attention
//   sessions/<id>/hard.vcca          derived hard attention
//   sessions/<id>/label.json         {"label": n}, written once
// A session directory is assembled under a temporary name and renamed into
// place, so readers see either a complete record or none.
//
// Routes (JSON bodies; errors are {"error": {"code", "message"}}):
//   POST /sessions                         ingest {session_id, image_id, trajectory, label?}
//   GET  /sessions/{id}                    stored record with derived stay points
//   GET  /sessions/{id}/soft | /hard       VCCA bytes
//   POST /sessions/{id}/label              {"label": n}; a second, different label is a conflict
//   GET  /overlay/{image_id}/{session_id}  PNG, base image blended with the soft map
//   GET  /images/{image_id}                PNG of <images>/<image_id>.png or .vcca
//   GET  /health                           {"status": "ok", "sessions": n}

#include "vccnet/trace.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace vccnet {

struct SessionRecord {
    std::string session_id;
    std::string image_id;
    Trajectory trajectory;
    std::optional<int> label;
};

/// Throws Error(Validation) naming the offending field or point index.
SessionRecord session_from_json(const nlohmann::json& j);
nlohmann::json session_to_json(const SessionRecord& record);

/// Letters, digits, '-', '_' and '.', 1 to 128 characters, not starting with '.'.
bool valid_identifier(const std::string& id);

struct ProcessingParams {
    RenderParams render;
    double hard_threshold = kDefaultHardThreshold;
    /// Per-source fixation settings; unset entries use I2MCParams::defaults_for.
    std::map<TraceSource, I2MCParams> fixation;

    I2MCParams fixation_for(TraceSource source) const;
};

struct IngestResponse {
    nlohmann::json body;
    bool created = false;
};

class SessionStore {
public:
    explicit SessionStore(std::filesystem::path root, ProcessingParams params = {});

    /// Validates, derives attention and persists. Re-sending an identical
    /// request returns the original response; a different request under a
    /// stored session_id throws Error(Conflict).
    IngestResponse ingest(const nlohmann::json& request);

    std::optional<nlohmann::json> get(const std::string& session_id) const;
    std::optional<Grid> soft_map(const std::string& session_id) const;
    std::optional<Grid> hard_map(const std::string& session_id) const;
    std::optional<std::string> image_of(const std::string& session_id) const;

    /// Throws Error(NotFound) for unknown sessions, Error(Conflict) when a
    /// different label is already stored.
    nlohmann::json set_label(const std::string& session_id, int label);

    std::size_t size() const;
    const std::filesystem::path& root() const { return root_; }

private:
    std::filesystem::path session_dir(const std::string& id) const;
    std::shared_ptr<std::mutex> lock_for(const std::string& id);
    nlohmann::json response_for(const std::string& id, const std::string& image_id, std::size_t stays) const;

    std::filesystem::path root_;
    ProcessingParams params_;
    mutable std::mutex registry_mutex_;
    std::map<std::string, std::shared_ptr<std::mutex>> session_locks_;
    std::mutex index_mutex_;
};

struct HttpRequest {
    std::string method;
    std::string path;
    std::string body;
};

struct HttpResponse {
    int status = 200;
    std::string content_type = "application/json";
    std::string body;
};

/// Transport-independent request handling shared by the HTTP server and tests.
class ServiceRouter {
public:
    ServiceRouter(SessionStore& store, std::filesystem::path image_dir);

    HttpResponse handle(const HttpRequest& request);

    /// Base image by id as a [0, 1] grid; nullopt when absent.
    std::optional<Grid> load_image(const std::string& image_id) const;

private:
    SessionStore& store_;
    std::filesystem::path image_dir_;
};

HttpResponse error_response(int status, ErrorCode code, const std::string& message);

/// Blocking HTTP front end over a router.
class HttpService {
public:
    explicit HttpService(ServiceRouter& router);
    ~HttpService();
    HttpService(const HttpService&) = delete;
    HttpService& operator=(const HttpService&) = delete;

    /// Binds; port 0 picks a free port. Returns the bound port.
    int bind(const std::string& host, int port);
    /// Serves until stop(); call after bind().
    void run();
    void stop();
    bool running() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace vccnet

#endif  // VCCNET_SERVICE_HPP
