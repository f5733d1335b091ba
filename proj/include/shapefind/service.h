#pragma once

#include "shapefind/catalog.h"
#include "shapefind/error.h"
#include "shapefind/labels.h"
#include "shapefind/query.h"

#include "json.hpp"

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

namespace httplib {
class Server;
}

namespace shapefind {

/// Error envelope of every non-2xx response. Codes come from the closed
/// set returned by api_error_codes().
struct ApiError {
    std::string code;
    std::string message;
    int http_status = 500;

    nlohmann::ordered_json to_json() const;
};

const std::vector<std::string>& api_error_codes();

/// Maps a library error onto the API envelope.
ApiError api_error_from(const Error& e);

struct ServiceConfig {
    std::string host = "0.0.0.0";
    int port = 8080;  // 0 picks a free port
    std::optional<std::string> cors_origin;
    unsigned max_concurrency = 0;  // 0: logical cores
    std::chrono::milliseconds request_timeout = std::chrono::seconds(120);
    QueryConfig query;
    std::shared_ptr<const LabelProvider> labels;  // null: POST /labels answers 503
};

struct ApiResponse {
    int status = 200;
    std::string content_type = "application/json";
    std::string body;
};

/// Result item JSON shared by the service and `search-sketch --json`.
nlohmann::ordered_json sketch_result_json(const SketchResult& r, const ArtifactRecord& record);
nlohmann::ordered_json text_result_json(const TextResult& r, const ArtifactRecord& record);
nlohmann::ordered_json sketch_search_json(const SketchSearch& s, const IndexBundle& bundle, int limit, int offset);
nlohmann::ordered_json text_search_json(const std::vector<TextResult>& results, const IndexBundle& bundle, int limit,
                                        int offset);
/// Public view of a record: internal file references are replaced by URLs.
nlohmann::ordered_json public_record_json(const ArtifactRecord& record);

/// The REST service. Handlers are usable in-process; listen() serves them
/// over HTTP until stop() is called.
class Service {
public:
    Service(std::shared_ptr<const IndexBundle> bundle, ServiceConfig config);
    ~Service();
    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    ApiResponse search_text(const std::string& body) const;
    ApiResponse search_sketch(const std::string& body) const;
    ApiResponse model(const std::string& id) const;
    ApiResponse model_mesh(const std::string& id) const;
    ApiResponse model_thumbnail(const std::string& id) const;
    ApiResponse labels(std::span<const std::uint8_t> image) const;
    ApiResponse healthz() const;

    /// Binds and serves; blocks until stop(). Throws Io when binding fails.
    void listen();
    /// Binds now so that bound_port() is known, then serves on listen().
    int bind();
    int bound_port() const { return port_.load(); }
    /// Stops accepting and waits for in-flight requests.
    void stop();
    bool running() const;

    const IndexBundle& bundle() const { return *bundle_; }

private:
    class Slot;
    ApiResponse guarded(const std::function<ApiResponse()>& fn) const;
    void install_routes();

    std::shared_ptr<const IndexBundle> bundle_;
    ServiceConfig config_;
    std::unique_ptr<httplib::Server> server_;
    std::atomic<int> port_{-1};
    mutable std::mutex slots_mutex_;
    mutable std::condition_variable slots_cv_;
    mutable unsigned slots_in_use_ = 0;
    unsigned slot_limit_ = 1;
};

ApiResponse error_response(const ApiError& e);

} // namespace shapefind
