#include "topoembed/service.hpp"

#include "topoembed/error.hpp"
#include "topoembed/geotiff.hpp"
#include "topoembed/patch.hpp"
#include "topoembed/util.hpp"

#include "httplib.h"
#include "json.hpp"

#include <cmath>
#include <thread>

namespace topoembed {

namespace {

using Json = nlohmann::ordered_json;

HttpResult json_result(int status, const Json& body) { return {status, body.dump()}; }

HttpResult error_result(int status, const std::string& message) {
    return json_result(status, Json{{"error", message}});
}

int status_for(const Error& e) {
    switch (e.kind()) {
    case ErrorKind::Boundary:
    case ErrorKind::DataQuality:
    case ErrorKind::Capacity: return 422;
    case ErrorKind::Domain:
    case ErrorKind::Contract: return 400;
    default: return 500;
    }
}

std::optional<double> number_field(const Json& obj, const char* key) {
    if (!obj.is_object() || !obj.contains(key) || !obj.at(key).is_number()) {
        return std::nullopt;
    }
    const double v = obj.at(key).get<double>();
    return std::isfinite(v) ? std::optional(v) : std::nullopt;
}

std::optional<Json> parse_body(const std::string& body) {
    try {
        return Json::parse(body);
    } catch (const nlohmann::json::exception&) {
        return std::nullopt;
    }
}

std::optional<double> parse_number(const std::string& text) {
    try {
        std::size_t used = 0;
        const double v = std::stod(text, &used);
        if (used != text.size() || !std::isfinite(v)) {
            return std::nullopt;
        }
        return v;
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

} // namespace

ServiceArtifacts load_service_artifacts(const ServiceConfig& config) {
    ServiceArtifacts a{EmbeddingModelHandle::load(config.checkpoint.string()), EmbeddingIndex::load(config.index),
                       std::make_shared<const ElevationRaster>(read_geotiff(config.raster)), {}};
    if (!config.probes.empty()) {
        a.probes = load_probes(config.probes);
    }
    return a;
}

RetrievalService::RetrievalService(ServiceConfig config) : config_(std::move(config)) {
    require(config_.port >= 0 && config_.port <= 65535, ErrorKind::Domain, "invalid port");
    require(config_.max_batch >= 1, ErrorKind::Domain, "max_batch must be at least 1");
    require(config_.area_cap_deg2 > 0.0, ErrorKind::Domain, "area cap must be positive");
}

RetrievalService::~RetrievalService() { stop(); }

void RetrievalService::set_artifacts(ServiceArtifacts artifacts) {
    require(artifacts.raster != nullptr, ErrorKind::Contract, "service needs a raster");
    artifacts_ = std::make_shared<const ServiceArtifacts>(std::move(artifacts));
    ready_.store(true);
}

void RetrievalService::load() { set_artifacts(load_service_artifacts(config_)); }

HttpResult RetrievalService::health() const {
    if (!ready_.load()) {
        Json body{{"status", "loading"}};
        if (load_failed_.load()) {
            body = Json{{"status", "error"}, {"error", load_error_}};
        }
        return json_result(503, body);
    }
    const auto b = artifacts_->raster->center_bounds();
    return json_result(200, Json{{"status", "ok"},
                                 {"checkpoint_hash", artifacts_->model.checkpoint_hash()},
                                 {"index_size", artifacts_->index.size()},
                                 {"model", artifacts_->model.name()},
                                 {"scale", artifacts_->index.scale()},
                                 {"classes", artifacts_->probes.class_names()},
                                 {"bounds", {b.min_lon, b.min_lat, b.max_lon, b.max_lat}}});
}

HttpResult RetrievalService::embed(const std::string& body) const {
    if (!ready_.load()) {
        return error_result(503, "model not loaded");
    }
    const auto doc = parse_body(body);
    if (!doc) {
        return error_result(400, "body is not valid JSON");
    }
    const auto lon = number_field(*doc, "lon");
    const auto lat = number_field(*doc, "lat");
    const auto scale = number_field(*doc, "scale_m_per_px");
    if (!lon || !lat || !scale) {
        return error_result(400, "expected numeric lon, lat and scale_m_per_px");
    }
    if (!is_valid_coordinate(*lon, *lat)) {
        return error_result(400, "coordinate out of range");
    }
    if (*scale <= 0.0) {
        return error_result(400, "scale_m_per_px must be positive");
    }
    try {
        const auto spec = ScaleSpec::from_resolution(*scale, kPatchHalfExtent);
        const auto patch = normalize_patch(extract_patch(*artifacts_->raster, {*lon, *lat}, spec));
        return json_result(200, Json{{"embedding", artifacts_->model.embed_one(patch.values)}});
    } catch (const Error& e) {
        return error_result(status_for(e), e.what());
    }
}

HttpResult RetrievalService::retrieve(const std::string& body) const {
    if (!ready_.load()) {
        return error_result(503, "model not loaded");
    }
    const auto doc = parse_body(body);
    if (!doc || !doc->is_object()) {
        return error_result(400, "body is not a JSON object");
    }
    if (!doc->contains("points") || !doc->at("points").is_array()) {
        return error_result(400, "expected a points array");
    }
    if (!doc->contains("k") || !doc->at("k").is_number_integer() || doc->at("k").get<long long>() < 0) {
        return error_result(400, "k must be a non-negative integer");
    }
    const auto& pts = doc->at("points");
    if (pts.empty()) {
        return error_result(400, "points must not be empty");
    }
    if (pts.size() > config_.max_batch) {
        return error_result(400, "at most " + std::to_string(config_.max_batch) + " points per request");
    }
    std::vector<GeoCoordinate> queries;
    for (const auto& p : pts) {
        const auto lon = number_field(p, "lon");
        const auto lat = number_field(p, "lat");
        if (!lon || !lat || !is_valid_coordinate(*lon, *lat)) {
            return error_result(400, "each point needs a valid numeric lon and lat");
        }
        queries.push_back({*lon, *lat});
    }
    const auto k = static_cast<std::size_t>(doc->at("k").get<long long>());
    if (k > artifacts_->index.size()) {
        return error_result(422, "k=" + std::to_string(k) + " exceeds index size " +
                                     std::to_string(artifacts_->index.size()));
    }
    try {
        Json neighbors = Json::array();
        if (k > 0) {
            for (const auto& n :
                 knn_retrieve(artifacts_->index, artifacts_->model, *artifacts_->raster, queries, k)) {
                neighbors.push_back(Json{{"lon", n.coord.lon}, {"lat", n.coord.lat}, {"distance", n.distance}});
            }
        }
        return json_result(200, Json{{"neighbors", neighbors}});
    } catch (const Error& e) {
        return error_result(status_for(e), e.what());
    }
}

HttpResult RetrievalService::grid_classify(const std::map<std::string, std::string>& query) const {
    if (!ready_.load()) {
        return error_result(503, "model not loaded");
    }
    const auto get = [&](const char* key) -> std::optional<std::string> {
        auto it = query.find(key);
        return it == query.end() ? std::nullopt : std::optional(it->second);
    };
    const auto bbox_text = get("bbox");
    const auto scale_text = get("scale");
    const auto cls = get("class");
    if (!bbox_text || !scale_text || !cls) {
        return error_result(400, "bbox, scale and class are required");
    }
    const auto parts = split(*bbox_text, ',');
    std::vector<double> v;
    for (const auto& p : parts) {
        if (auto x = parse_number(trim(p))) {
            v.push_back(*x);
        }
    }
    const auto scale = parse_number(*scale_text);
    if (parts.size() != 4 || v.size() != 4 || !scale || *scale <= 0.0) {
        return error_result(400, "bbox must be min_lon,min_lat,max_lon,max_lat and scale positive");
    }
    if (!is_valid_coordinate(v[0], v[1]) || !is_valid_coordinate(v[2], v[3]) || v[0] >= v[2] || v[1] >= v[3]) {
        return error_result(400, "bbox is not a valid lon/lat rectangle");
    }
    if (artifacts_->probes.find(*cls, *scale) == nullptr) {
        return error_result(422, "unknown class '" + *cls + "'");
    }
    const double area = (v[2] - v[0]) * (v[3] - v[1]);
    if (area > config_.area_cap_deg2) {
        return error_result(413, "bbox area " + format_double(area) + " deg^2 exceeds cap " +
                                     format_double(config_.area_cap_deg2));
    }
    try {
        GridConfig grid;
        grid.scales = {*scale};
        grid.classes = {*cls};
        const auto maps = topoembed::grid_classify(AOIPolygon::from_bbox({v[0], v[1], v[2], v[3]}),
                                                   artifacts_->model, artifacts_->probes, *artifacts_->raster, grid);
        return {200, to_geojson(maps), "application/geo+json"};
    } catch (const Error& e) {
        return error_result(status_for(e), e.what());
    }
}

std::optional<std::string> RetrievalService::allowed_origin(const std::string& origin) const {
    for (const auto& o : config_.cors_origins) {
        if (o == "*" || o == origin) {
            return o == "*" && origin.empty() ? std::string("*") : origin;
        }
    }
    return std::nullopt;
}

void RetrievalService::install_routes() {
    server_ = std::make_unique<httplib::Server>();
    auto& srv = *server_;
    const auto send = [this](const httplib::Request& req, httplib::Response& res, const HttpResult& r) {
        res.status = r.status;
        res.set_content(r.body, r.content_type);
        if (auto origin = allowed_origin(req.get_header_value("Origin"))) {
            res.set_header("Access-Control-Allow-Origin", *origin);
            res.set_header("Vary", "Origin");
        }
    };
    srv.Get("/health", [this, send](const httplib::Request& req, httplib::Response& res) { send(req, res, health()); });
    srv.Post("/embed",
             [this, send](const httplib::Request& req, httplib::Response& res) { send(req, res, embed(req.body)); });
    srv.Post("/retrieve",
             [this, send](const httplib::Request& req, httplib::Response& res) { send(req, res, retrieve(req.body)); });
    srv.Get("/grid-classify", [this, send](const httplib::Request& req, httplib::Response& res) {
        std::map<std::string, std::string> q;
        for (const auto& [k, v] : req.params) {
            q.emplace(k, v);
        }
        send(req, res, grid_classify(q));
    });
    srv.Options(R"(/.*)", [this](const httplib::Request& req, httplib::Response& res) {
        res.status = 204;
        if (auto origin = allowed_origin(req.get_header_value("Origin"))) {
            res.set_header("Access-Control-Allow-Origin", *origin);
            res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
            res.set_header("Access-Control-Allow-Headers", "Content-Type");
            res.set_header("Vary", "Origin");
        }
    });
}

bool RetrievalService::listen(bool load_in_background) {
    install_routes();
    std::jthread loader;
    if (!ready_.load()) {
        auto work = [this] {
            try {
                load();
            } catch (const std::exception& e) {
                load_error_ = e.what();
                load_failed_.store(true);
            }
        };
        if (load_in_background) {
            loader = std::jthread(work);
        } else {
            work();
        }
    }
    return server_->listen(config_.host, config_.port);
}

int RetrievalService::bind_ephemeral() {
    install_routes();
    return server_->bind_to_any_port(config_.host);
}

bool RetrievalService::listen_bound() { return server_ && server_->listen_after_bind(); }

void RetrievalService::stop() {
    if (server_) {
        server_->stop();
    }
}

void RetrievalService::wait_until_listening() const {
    if (server_) {
        server_->wait_until_ready();
    }
}

} // namespace topoembed
