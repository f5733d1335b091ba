#include "shapefind/service.h"

#include "shapefind/binary_io.h"
#include "shapefind/error.h"
#include "shapefind/image.h"
#include "shapefind/thumbnail.h"

#include "httplib.h"

#include <thread>

namespace shapefind {

using nlohmann::json;
using nlohmann::ordered_json;

ordered_json ApiError::to_json() const {
    return {{"code", code}, {"message", message}, {"http_status", http_status}};
}

const std::vector<std::string>& api_error_codes() {
    static const std::vector<std::string> codes = {
        "invalid_json",    "invalid_request",   "empty_query",    "model_not_found", "mesh_unavailable",
        "not_found",       "invalid_image",     "payload_too_large", "provider_error", "labels_unavailable",
        "overloaded",      "timeout",           "internal_error",
    };
    return codes;
}

ApiError api_error_from(const Error& e) {
    std::string msg = e.what();
    switch (e.kind()) {
    case ErrorKind::Parse:
    case ErrorKind::InvalidArgument:
    case ErrorKind::Degenerate:
        if (msg.starts_with("empty query")) return {"empty_query", msg, 400};
        return {"invalid_request", msg, 400};
    case ErrorKind::NotFound: return {"model_not_found", msg, 404};
    case ErrorKind::Provider: return {"provider_error", msg, 502};
    case ErrorKind::Timeout: return {"timeout", msg, 504};
    default: return {"internal_error", msg, 500};
    }
}

ApiResponse error_response(const ApiError& e) { return {e.http_status, "application/json", e.to_json().dump()}; }

namespace {

ApiResponse json_response(const ordered_json& j) { return {200, "application/json", j.dump()}; }

std::string model_url(const std::string& id) { return "/models/" + id; }

json parse_body(const std::string& body) {
    try {
        return json::parse(body);
    } catch (const json::exception& e) {
        throw ApiError{"invalid_json", std::string("request body is not valid JSON: ") + e.what(), 400};
    }
}

int int_or(const json& j, const char* key, int fallback) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_number_integer()) throw Error(ErrorKind::InvalidArgument, std::string(key) + " must be an integer");
    return j[key].get<int>();
}

} // namespace

ordered_json sketch_result_json(const SketchResult& r, const ArtifactRecord& record) {
    return {{"id", r.id},
            {"rank", r.rank},
            {"score",
             {{"overlap", r.score.overlap_voxels},
              {"sketch_norm", r.score.sketch_norm},
              {"model_norm", r.score.model_norm},
              {"avg", r.score.avg}}},
            {"suggested_scale", r.suggested_scale},
            {"name", record.name},
            {"thumbnail_url", model_url(r.id) + "/thumbnail"}};
}

ordered_json text_result_json(const TextResult& r, const ArtifactRecord& record) {
    return {{"id", r.id},
            {"rank", r.rank},
            {"score", {{"text_score", r.text_score}}},
            {"name", record.name},
            {"thumbnail_url", model_url(r.id) + "/thumbnail"}};
}

ordered_json sketch_search_json(const SketchSearch& s, const IndexBundle& bundle, int limit, int offset) {
    ordered_json items = ordered_json::array();
    for (const auto& r : s.results) items.push_back(sketch_result_json(r, *bundle.find(r.id)));
    return {{"results", items}, {"total", s.total}, {"limit", limit}, {"offset", offset},
            {"sketch_extents_mm", s.sketch_extents_mm}};
}

ordered_json text_search_json(const std::vector<TextResult>& results, const IndexBundle& bundle, int limit, int offset) {
    ordered_json items = ordered_json::array();
    for (const auto& r : results) items.push_back(text_result_json(r, *bundle.find(r.id)));
    return {{"results", items}, {"limit", limit}, {"offset", offset}};
}

ordered_json public_record_json(const ArtifactRecord& r) {
    auto full = record_to_json(r);
    ordered_json j;
    for (const char* key : {"id", "name", "description", "tags", "category", "attribution", "mesh_stats"})
        j[key] = full[key];
    if (r.spatial)
        j["spatial"] = {{"oabb_extents_mm", r.spatial->oabb_extents_mm},
                        {"ratios", {r.spatial->r1, r.spatial->r2}},
                        {"flat", r.spatial->flat}};
    else
        j["spatial"] = nullptr;
    j["mesh_url"] = r.mesh_file.empty() ? ordered_json(nullptr) : ordered_json(model_url(r.id) + "/mesh");
    j["thumbnail_url"] = model_url(r.id) + "/thumbnail";
    return j;
}

// ---------------------------------------------------------------- service

class Service::Slot {
public:
    explicit Slot(const Service& s) : s_(s) {
        std::unique_lock lock(s_.slots_mutex_);
        if (!s_.slots_cv_.wait_for(lock, s_.config_.request_timeout, [&] { return s_.slots_in_use_ < s_.slot_limit_; }))
            throw ApiError{"overloaded", "too many concurrent requests", 503};
        ++s_.slots_in_use_;
    }
    ~Slot() {
        {
            std::lock_guard lock(s_.slots_mutex_);
            --s_.slots_in_use_;
        }
        s_.slots_cv_.notify_one();
    }

private:
    const Service& s_;
};

Service::Service(std::shared_ptr<const IndexBundle> bundle, ServiceConfig config)
    : bundle_(std::move(bundle)), config_(std::move(config)) {
    if (!bundle_) throw Error(ErrorKind::Config, "service needs an index bundle");
    slot_limit_ = config_.max_concurrency ? config_.max_concurrency : std::max(1u, std::thread::hardware_concurrency());
}

Service::~Service() { stop(); }

ApiResponse Service::guarded(const std::function<ApiResponse()>& fn) const {
    try {
        return fn();
    } catch (const ApiError& e) {
        return error_response(e);
    } catch (const Error& e) {
        return error_response(api_error_from(e));
    } catch (const std::exception& e) {
        return error_response({"internal_error", e.what(), 500});
    }
}

ApiResponse Service::search_text(const std::string& body) const {
    return guarded([&] {
        auto j = parse_body(body);
        if (!j.is_object() || !j.contains("term") || !j["term"].is_string())
            throw ApiError{"invalid_request", "body must be an object with a string \"term\"", 400};
        int limit = int_or(j, "limit", kDefaultLimit);
        int offset = int_or(j, "offset", 0);
        Slot slot(*this);
        auto results = shapefind::search_text(*bundle_, j["term"].get<std::string>(), limit, offset);
        auto out = text_search_json(results, *bundle_, limit, offset);
        out["total"] = bundle_->text.match(j["term"].get<std::string>()).size();
        return json_response(out);
    });
}

ApiResponse Service::search_sketch(const std::string& body) const {
    return guarded([&] {
        auto q = sketch_from_json(parse_body(body));
        Slot slot(*this);
        auto config = config_.query;
        config.deadline = std::chrono::steady_clock::now() + config_.request_timeout;
        auto s = shapefind::search_sketch(q, *bundle_, config);
        return json_response(sketch_search_json(s, *bundle_, q.limit, q.offset));
    });
}

ApiResponse Service::model(const std::string& id) const {
    return guarded([&] {
        const auto* r = bundle_->find(id);
        if (!r) throw ApiError{"model_not_found", "no model with id " + id, 404};
        return json_response(public_record_json(*r));
    });
}

ApiResponse Service::model_mesh(const std::string& id) const {
    return guarded([&] {
        const auto* r = bundle_->find(id);
        if (!r) throw ApiError{"model_not_found", "no model with id " + id, 404};
        if (r->mesh_file.empty()) throw ApiError{"mesh_unavailable", "model " + id + " has no mesh file", 404};
        auto bytes = read_file(bundle_->root / r->mesh_file);
        std::string type = r->mesh_file.ends_with(".obj") ? "model/obj" : "model/stl";
        return ApiResponse{200, type, std::string(bytes.begin(), bytes.end())};
    });
}

ApiResponse Service::model_thumbnail(const std::string& id) const {
    return guarded([&] {
        const auto* r = bundle_->find(id);
        if (!r) throw ApiError{"model_not_found", "no model with id " + id, 404};
        std::vector<std::uint8_t> png;
        if (r->thumbnail_file) {
            png = read_file(bundle_->root / *r->thumbnail_file);
        } else {
            const auto* grid = bundle_->voxel(id);
            png = render_thumbnail(grid ? *grid : VoxelGrid{});
        }
        return ApiResponse{200, "image/png", std::string(png.begin(), png.end())};
    });
}

ApiResponse Service::labels(std::span<const std::uint8_t> image) const {
    return guarded([&] {
        if (!config_.labels) throw ApiError{"labels_unavailable", "no label provider configured", 503};
        try {
            decode_image(image);
        } catch (const Error& e) {
            throw ApiError{"invalid_image", e.what(), 415};
        }
        Slot slot(*this);
        auto guesses = config_.labels->extract(image);
        ordered_json items = ordered_json::array();
        for (const auto& g : guesses) items.push_back({{"term", g.term}, {"confidence", g.confidence}});
        return json_response({{"labels", items}});
    });
}

ApiResponse Service::healthz() const {
    return guarded([&] {
        return json_response({{"status", "ok"},
                              {"models", bundle_->catalog.size()},
                              {"build_info", ordered_json::parse(build_info_to_json(bundle_->build_info))}});
    });
}

// ---------------------------------------------------------------- HTTP

namespace {

void send(httplib::Response& res, const ApiResponse& r) {
    res.status = r.status;
    res.set_content(r.body, r.content_type);
}

} // namespace

void Service::install_routes() {
    auto& s = *server_;
    if (config_.cors_origin) {
        std::string origin = *config_.cors_origin;
        s.set_default_headers({{"Access-Control-Allow-Origin", origin},
                               {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                               {"Access-Control-Allow-Headers", "Content-Type"},
                               {"Vary", "Origin"}});
        s.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
    }
    s.set_payload_max_length(64ull << 20);
    s.set_read_timeout(std::chrono::duration_cast<std::chrono::seconds>(config_.request_timeout).count());
    s.set_write_timeout(std::chrono::duration_cast<std::chrono::seconds>(config_.request_timeout).count());

    s.Post("/search/text", [this](const httplib::Request& req, httplib::Response& res) { send(res, search_text(req.body)); });
    s.Post("/search/sketch",
           [this](const httplib::Request& req, httplib::Response& res) { send(res, search_sketch(req.body)); });
    s.Get(R"(/models/([^/]+))",
          [this](const httplib::Request& req, httplib::Response& res) { send(res, model(req.matches[1])); });
    s.Get(R"(/models/([^/]+)/mesh)",
          [this](const httplib::Request& req, httplib::Response& res) { send(res, model_mesh(req.matches[1])); });
    s.Get(R"(/models/([^/]+)/thumbnail)",
          [this](const httplib::Request& req, httplib::Response& res) { send(res, model_thumbnail(req.matches[1])); });
    s.Post("/labels", [this](const httplib::Request& req, httplib::Response& res) {
        std::string data;
        if (req.is_multipart_form_data()) {
            if (!req.has_file("image")) {
                send(res, error_response({"invalid_request", "multipart field \"image\" is required", 400}));
                return;
            }
            data = req.get_file_value("image").content;
        } else {
            data = req.body;
        }
        send(res, labels({reinterpret_cast<const std::uint8_t*>(data.data()), data.size()}));
    });
    s.Get("/healthz", [this](const httplib::Request&, httplib::Response& res) { send(res, healthz()); });

    s.set_error_handler([](const httplib::Request&, httplib::Response& res) {
        if (!res.body.empty()) return;
        ApiError e{"not_found", "no such endpoint", 404};
        if (res.status == 413) e = {"payload_too_large", "request body too large", 413};
        else if (res.status == 400) e = {"invalid_request", "malformed HTTP request", 400};
        else if (res.status != 404) e = {"internal_error", "HTTP status " + std::to_string(res.status), res.status};
        res.status = e.http_status;
        res.set_content(e.to_json().dump(), "application/json");
    });
    s.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr) {
        ApiError e{"internal_error", "unhandled server error", 500};
        res.status = 500;
        res.set_content(e.to_json().dump(), "application/json");
    });
}

int Service::bind() {
    if (server_) return port_.load();
    server_ = std::make_unique<httplib::Server>();
    unsigned workers = slot_limit_ + 4;
    server_->new_task_queue = [workers] { return new httplib::ThreadPool(workers); };
    // SO_REUSEADDR only: a second server on an occupied port must fail
    server_->set_socket_options([](socket_t sock) {
        int yes = 1;
        setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof(yes));
    });
    install_routes();
    int port = config_.port == 0 ? server_->bind_to_any_port(config_.host) : (server_->bind_to_port(config_.host, config_.port) ? config_.port : -1);
    if (port < 0) {
        server_.reset();
        throw Error(ErrorKind::Io, "cannot listen on " + config_.host + ":" + std::to_string(config_.port));
    }
    port_ = port;
    return port;
}

void Service::listen() {
    bind();
    if (!server_->listen_after_bind()) throw Error(ErrorKind::Io, "server stopped unexpectedly");
}

void Service::stop() {
    if (server_) server_->stop();
}

bool Service::running() const { return server_ && server_->is_running(); }

} // namespace shapefind
