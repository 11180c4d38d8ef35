#include "vccnet/service.hpp"

#include "vccnet/imaging.hpp"
#include "vccnet/manifest.hpp"

#include <atomic>
#include <fstream>
#include <sstream>
#include <thread>

namespace vccnet {

namespace fs = std::filesystem;

bool valid_identifier(const std::string& id) {
    if (id.empty() || id.size() > 128 || id.front() == '.') return false;
    for (char c : id) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' ||
                        c == '_' || c == '.';
        if (!ok) return false;
    }
    return true;
}

SessionRecord session_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw Error(ErrorCode::Validation, "session must be a JSON object");
    SessionRecord rec;
    for (const char* key : {"session_id", "image_id"}) {
        if (!j.contains(key) || !j.at(key).is_string()) {
            throw Error(ErrorCode::Validation, std::string(key) + ": required string");
        }
        if (!valid_identifier(j.at(key).get<std::string>())) {
            throw Error(ErrorCode::Validation, std::string(key) + ": only [A-Za-z0-9._-], 1-128 chars, no leading '.'");
        }
    }
    rec.session_id = j.at("session_id").get<std::string>();
    rec.image_id = j.at("image_id").get<std::string>();
    if (!j.contains("trajectory")) throw Error(ErrorCode::Validation, "trajectory: required object");
    try {
        rec.trajectory = trajectory_from_json(j.at("trajectory"));
    } catch (const Error& e) {
        throw Error(e.code(), std::string("trajectory.") + e.what());
    }
    if (rec.trajectory.image_id != rec.image_id) {
        throw Error(ErrorCode::Validation, "trajectory.image_id: does not match image_id");
    }
    if (j.contains("label") && !j.at("label").is_null()) {
        if (!j.at("label").is_number_integer() || j.at("label").get<int>() < 0) {
            throw Error(ErrorCode::Validation, "label: must be a non-negative integer");
        }
        rec.label = j.at("label").get<int>();
    }
    return rec;
}

nlohmann::json session_to_json(const SessionRecord& record) {
    nlohmann::json j{{"session_id", record.session_id},
                     {"image_id", record.image_id},
                     {"trajectory", trajectory_to_json(record.trajectory)}};
    if (record.label) j["label"] = *record.label;
    return j;
}

I2MCParams ProcessingParams::fixation_for(TraceSource source) const {
    const auto it = fixation.find(source);
    return it != fixation.end() ? it->second : I2MCParams::defaults_for(source);
}

namespace {

nlohmann::json read_json(const fs::path& p) {
    const auto bytes = read_file_bytes(p);
    return nlohmann::json::parse(bytes.begin(), bytes.end());
}

std::optional<nlohmann::json> read_json_if(const fs::path& p) {
    std::error_code ec;
    if (!fs::exists(p, ec)) return std::nullopt;
    return read_json(p);
}

std::string unique_suffix() {
    static std::atomic<unsigned long> counter{0};
    std::ostringstream s;
    s << std::this_thread::get_id() << '-' << counter.fetch_add(1);
    return s.str();
}

void write_atomically(const fs::path& target, const std::string& text) {
    fs::path tmp = target;
    tmp += ".tmp-" + unique_suffix();
    write_file_text(tmp, text);
    fs::rename(tmp, target);
}

nlohmann::json stays_to_json(const StayPointSet& stays) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& s : stays.points) {
        arr.push_back({{"x", s.x}, {"y", s.y}, {"duration_ms", s.duration_ms}, {"onset_ms", s.onset_ms}});
    }
    return arr;
}

}  // namespace

SessionStore::SessionStore(fs::path root, ProcessingParams params) : root_(std::move(root)), params_(std::move(params)) {
    std::error_code ec;
    fs::create_directories(root_ / "sessions", ec);
    if (ec) throw Error(ErrorCode::Io, "store: cannot create " + (root_ / "sessions").string() + ": " + ec.message());
}

fs::path SessionStore::session_dir(const std::string& id) const { return root_ / "sessions" / id; }

std::shared_ptr<std::mutex> SessionStore::lock_for(const std::string& id) {
    std::lock_guard<std::mutex> guard(registry_mutex_);
    auto& slot = session_locks_[id];
    if (!slot) slot = std::make_shared<std::mutex>();
    return slot;
}

nlohmann::json SessionStore::response_for(const std::string& id, const std::string& image_id,
                                          std::size_t stays) const {
    return {{"session_id", id},
            {"image_id", image_id},
            {"stay_points", stays},
            {"soft_map", "/sessions/" + id + "/soft"},
            {"hard_map", "/sessions/" + id + "/hard"},
            {"overlay", "/overlay/" + image_id + "/" + id}};
}

IngestResponse SessionStore::ingest(const nlohmann::json& request) {
    const SessionRecord rec = session_from_json(request);
    const std::string canonical = request.dump();
    const auto mutex = lock_for(rec.session_id);
    std::lock_guard<std::mutex> guard(*mutex);

    const fs::path dir = session_dir(rec.session_id);
    std::error_code ec;
    if (fs::exists(dir, ec)) {
        const auto stored = read_file_bytes(dir / "request.json");
        if (std::string(stored.begin(), stored.end()) != canonical) {
            throw Error(ErrorCode::Conflict,
                        "session_id \"" + rec.session_id + "\" is already stored with a different payload");
        }
        const nlohmann::json derived = read_json(dir / "derived.json");
        return {response_for(rec.session_id, rec.image_id, derived.at("stay_points").size()), false};
    }

    const StayPointSet stays = extract_stay_points(rec.trajectory, params_.fixation_for(rec.trajectory.source));
    AttentionMap soft = render_soft_attention(stays, rec.trajectory.height, rec.trajectory.width, params_.render);
    soft.image_id = rec.image_id;
    const AttentionMap hard = threshold_hard(soft, params_.hard_threshold);

    const fs::path staging = root_ / "sessions" / ("." + rec.session_id + ".tmp-" + unique_suffix());
    fs::create_directories(staging);
    try {
        write_file_text(staging / "request.json", canonical);
        const nlohmann::json derived{{"stay_points", stays_to_json(stays)},
                                     {"source", trace_source_name(stays.source)},
                                     {"height", rec.trajectory.height},
                                     {"width", rec.trajectory.width},
                                     {"render", {{"radius_px", params_.render.radius_px}, {"sigma_px", params_.render.sigma_px}}},
                                     {"hard_threshold", params_.hard_threshold}};
        write_file_text(staging / "derived.json", derived.dump(2) + "\n");
        write_grid(staging / "soft.vcca", soft.grid);
        write_grid(staging / "hard.vcca", hard.grid);
        if (rec.label) write_file_text(staging / "label.json", nlohmann::json{{"label", *rec.label}}.dump() + "\n");
        fs::rename(staging, dir);
    } catch (...) {
        fs::remove_all(staging, ec);
        throw;
    }
    {
        std::lock_guard<std::mutex> index_guard(index_mutex_);
        std::ofstream index(root_ / "index.jsonl", std::ios::app | std::ios::binary);
        index << nlohmann::json{{"session_id", rec.session_id},
                                {"image_id", rec.image_id},
                                {"request_sha256", sha256_hex({canonical.begin(), canonical.end()})}}
                     .dump()
              << '\n';
        if (!index) throw Error(ErrorCode::Io, "store: cannot append to index.jsonl");
    }
    return {response_for(rec.session_id, rec.image_id, stays.points.size()), true};
}

std::optional<nlohmann::json> SessionStore::get(const std::string& session_id) const {
    if (!valid_identifier(session_id)) return std::nullopt;
    const fs::path dir = session_dir(session_id);
    const auto request = read_json_if(dir / "request.json");
    if (!request) return std::nullopt;
    const nlohmann::json derived = read_json(dir / "derived.json");
    const auto label = read_json_if(dir / "label.json");
    const std::string image_id = request->at("image_id").get<std::string>();
    nlohmann::json out = response_for(session_id, image_id, derived.at("stay_points").size());
    out["trajectory"] = request->at("trajectory");
    out["label"] = label ? label->at("label") : nlohmann::json(nullptr);
    out["stay_points"] = derived.at("stay_points");
    out["derived_soft"] = {{"kind", "soft"},
                           {"path", "/sessions/" + session_id + "/soft"},
                           {"height", derived.at("height")},
                           {"width", derived.at("width")}};
    return out;
}

std::optional<Grid> SessionStore::soft_map(const std::string& session_id) const {
    if (!valid_identifier(session_id)) return std::nullopt;
    const fs::path p = session_dir(session_id) / "soft.vcca";
    std::error_code ec;
    if (!fs::exists(p, ec)) return std::nullopt;
    return read_grid(p);
}

std::optional<Grid> SessionStore::hard_map(const std::string& session_id) const {
    if (!valid_identifier(session_id)) return std::nullopt;
    const fs::path p = session_dir(session_id) / "hard.vcca";
    std::error_code ec;
    if (!fs::exists(p, ec)) return std::nullopt;
    return read_grid(p);
}

std::optional<std::string> SessionStore::image_of(const std::string& session_id) const {
    if (!valid_identifier(session_id)) return std::nullopt;
    const auto request = read_json_if(session_dir(session_id) / "request.json");
    if (!request) return std::nullopt;
    return request->at("image_id").get<std::string>();
}

nlohmann::json SessionStore::set_label(const std::string& session_id, int label) {
    if (label < 0) throw Error(ErrorCode::Validation, "label: must be a non-negative integer");
    if (!valid_identifier(session_id)) throw Error(ErrorCode::NotFound, "unknown session \"" + session_id + "\"");
    const auto mutex = lock_for(session_id);
    std::lock_guard<std::mutex> guard(*mutex);
    const fs::path dir = session_dir(session_id);
    std::error_code ec;
    if (!fs::exists(dir / "request.json", ec)) {
        throw Error(ErrorCode::NotFound, "unknown session \"" + session_id + "\"");
    }
    if (const auto existing = read_json_if(dir / "label.json")) {
        if (existing->at("label").get<int>() != label) {
            throw Error(ErrorCode::Conflict, "session \"" + session_id + "\" already has label " +
                                                 std::to_string(existing->at("label").get<int>()));
        }
    } else {
        write_atomically(dir / "label.json", nlohmann::json{{"label", label}}.dump() + "\n");
    }
    return {{"session_id", session_id}, {"label", label}};
}

std::size_t SessionStore::size() const {
    std::size_t n = 0;
    for (const auto& entry : fs::directory_iterator(root_ / "sessions")) {
        const std::string name = entry.path().filename().string();
        if (entry.is_directory() && valid_identifier(name)) ++n;
    }
    return n;
}

HttpResponse error_response(int status, ErrorCode code, const std::string& message) {
    return {status, "application/json",
            nlohmann::json{{"error", {{"code", error_code_name(code)}, {"message", message}}}}.dump()};
}

ServiceRouter::ServiceRouter(SessionStore& store, fs::path image_dir)
    : store_(store), image_dir_(std::move(image_dir)) {}

std::optional<Grid> ServiceRouter::load_image(const std::string& image_id) const {
    if (!valid_identifier(image_id) || image_dir_.empty()) return std::nullopt;
    std::error_code ec;
    const fs::path png = image_dir_ / (image_id + ".png");
    if (fs::exists(png, ec)) return decode_png_grid(read_file_bytes(png));
    const fs::path grid = image_dir_ / (image_id + ".vcca");
    if (fs::exists(grid, ec)) return read_grid(grid).cwiseMax(0.0).cwiseMin(1.0).eval();
    return std::nullopt;
}

namespace {

std::vector<std::string> split_path(const std::string& path) {
    std::vector<std::string> parts;
    std::string cur;
    const std::string clean = path.substr(0, path.find('?'));
    for (char c : clean) {
        if (c == '/') {
            if (!cur.empty()) parts.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) parts.push_back(std::move(cur));
    return parts;
}

int status_for(ErrorCode code) {
    switch (code) {
        case ErrorCode::NotFound: return 404;
        case ErrorCode::Conflict: return 409;
        case ErrorCode::Io:
        case ErrorCode::DivergenceDetected: return 500;
        default: return 400;
    }
}

HttpResponse json_ok(const nlohmann::json& body, int status = 200) { return {status, "application/json", body.dump()}; }

HttpResponse bytes_ok(const std::vector<std::uint8_t>& bytes, const char* type) {
    return {200, type, std::string(bytes.begin(), bytes.end())};
}

/// Nearest-neighbour resize used when a map's viewport differs from the image.
Grid resize_nearest(const Grid& g, Eigen::Index h, Eigen::Index w) {
    if (g.rows() == h && g.cols() == w) return g;
    Grid out(h, w);
    for (Eigen::Index y = 0; y < h; ++y) {
        for (Eigen::Index x = 0; x < w; ++x) {
            out(y, x) = g(y * g.rows() / h, x * g.cols() / w);
        }
    }
    return out;
}

}  // namespace

HttpResponse ServiceRouter::handle(const HttpRequest& req) {
    const auto parts = split_path(req.path);
    try {
        if (req.method == "GET" && parts.size() == 1 && parts[0] == "health") {
            return json_ok({{"status", "ok"}, {"sessions", store_.size()}});
        }
        if (req.method == "POST" && parts.size() == 1 && parts[0] == "sessions") {
            nlohmann::json body;
            try {
                body = nlohmann::json::parse(req.body);
            } catch (const nlohmann::json::exception& e) {
                return error_response(400, ErrorCode::Validation, std::string("body is not valid JSON: ") + e.what());
            }
            return json_ok(store_.ingest(body).body);
        }
        if (parts.size() >= 2 && parts[0] == "sessions") {
            const std::string& id = parts[1];
            if (req.method == "GET" && parts.size() == 2) {
                if (auto rec = store_.get(id)) return json_ok(*rec);
                return error_response(404, ErrorCode::NotFound, "unknown session \"" + id + "\"");
            }
            if (req.method == "GET" && parts.size() == 3 && (parts[2] == "soft" || parts[2] == "hard")) {
                const auto map = parts[2] == "soft" ? store_.soft_map(id) : store_.hard_map(id);
                if (!map) return error_response(404, ErrorCode::NotFound, "unknown session \"" + id + "\"");
                return bytes_ok(encode_grid(*map), "application/octet-stream");
            }
            if (req.method == "POST" && parts.size() == 3 && parts[2] == "label") {
                nlohmann::json body;
                try {
                    body = nlohmann::json::parse(req.body);
                } catch (const nlohmann::json::exception& e) {
                    return error_response(400, ErrorCode::Validation, std::string("body is not valid JSON: ") + e.what());
                }
                if (!body.is_object() || !body.contains("label") || !body.at("label").is_number_integer()) {
                    return error_response(400, ErrorCode::Validation, "label: required integer");
                }
                return json_ok(store_.set_label(id, body.at("label").get<int>()));
            }
        }
        if (req.method == "GET" && parts.size() == 3 && parts[0] == "overlay") {
            const auto image = load_image(parts[1]);
            if (!image) return error_response(404, ErrorCode::NotFound, "unknown image \"" + parts[1] + "\"");
            const auto soft = store_.soft_map(parts[2]);
            if (!soft) return error_response(404, ErrorCode::NotFound, "unknown session \"" + parts[2] + "\"");
            const Grid map = resize_nearest(*soft, image->rows(), image->cols());
            return bytes_ok(encode_png(overlay_attention(*image, map)), "image/png");
        }
        if (req.method == "GET" && parts.size() == 2 && parts[0] == "images") {
            const auto image = load_image(parts[1]);
            if (!image) return error_response(404, ErrorCode::NotFound, "unknown image \"" + parts[1] + "\"");
            return bytes_ok(encode_png(grid_to_gray8(*image)), "image/png");
        }
        return error_response(404, ErrorCode::NotFound, "no route for " + req.method + " " + req.path);
    } catch (const Error& e) {
        return error_response(status_for(e.code()), e.code(), e.what());
    } catch (const std::exception& e) {
        return error_response(500, ErrorCode::Io, e.what());
    }
}

}  // namespace vccnet
