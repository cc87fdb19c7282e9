#pragma once

#include "topoembed/baselines.hpp"
#include "topoembed/evaluation.hpp"
#include "topoembed/raster.hpp"

#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace httplib {
class Server;
}

namespace topoembed {

struct ServiceConfig {
    std::filesystem::path checkpoint;
    std::filesystem::path index;
    std::filesystem::path raster;
    std::filesystem::path probes;  // optional
    std::string host = "127.0.0.1";
    int port = 8080;
    std::size_t max_batch = 64;
    std::vector<std::string> cors_origins;
    double area_cap_deg2 = 0.25;
};

/// Immutable artifacts shared by all request handlers.
struct ServiceArtifacts {
    EmbeddingModelHandle model;
    EmbeddingIndex index;
    std::shared_ptr<const ElevationRaster> raster;
    ProbeSet probes;
};

ServiceArtifacts load_service_artifacts(const ServiceConfig& config);

struct HttpResult {
    int status = 200;
    std::string body;
    std::string content_type = "application/json";
};

/// Request handling is a pure function of the loaded artifacts and the
/// request; handlers may run concurrently.
class RetrievalService {
public:
    explicit RetrievalService(ServiceConfig config);
    ~RetrievalService();

    RetrievalService(const RetrievalService&) = delete;
    RetrievalService& operator=(const RetrievalService&) = delete;

    /// Installs artifacts; /health reports 503 until this happens.
    void set_artifacts(ServiceArtifacts artifacts);
    /// Loads artifacts from the configured paths.
    void load();
    bool ready() const noexcept { return ready_.load(); }

    HttpResult health() const;
    HttpResult embed(const std::string& body) const;
    HttpResult retrieve(const std::string& body) const;
    HttpResult grid_classify(const std::map<std::string, std::string>& query) const;

    /// Binds and serves until stop(); returns false if binding fails.
    /// When `load_in_background` is set the socket accepts requests (503)
    /// while artifacts load.
    bool listen(bool load_in_background = true);
    /// Binds to an ephemeral port and returns it (-1 on failure); serve with listen_bound().
    int bind_ephemeral();
    bool listen_bound();
    void stop();
    void wait_until_listening() const;

    const ServiceConfig& config() const noexcept { return config_; }
    std::optional<std::string> allowed_origin(const std::string& origin) const;

private:
    void install_routes();

    ServiceConfig config_;
    std::shared_ptr<const ServiceArtifacts> artifacts_;
    std::atomic<bool> ready_{false};
    std::unique_ptr<httplib::Server> server_;
    std::string load_error_;
    std::atomic<bool> load_failed_{false};
};

} // namespace topoembed
