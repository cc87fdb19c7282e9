#include "support.hpp"

#include "topoembed/labels.hpp"
#include "topoembed/overpass.hpp"

#include "httplib.h"

#include <atomic>
#include <thread>

using namespace topoembed;

namespace {

const AOIPolygon kRegion = AOIPolygon::from_wkt("POLYGON ((7 47, 8 47, 8 48, 7 48, 7 47))");

const char* kResponse = R"({"elements":[
    {"type":"node","id":1,"lat":47.5,"lon":7.5},
    {"type":"way","id":2,"center":{"lat":47.25,"lon":7.75}},
    {"type":"node","id":3,"lat":47.5,"lon":7.5},
    {"type":"node","id":4,"lat":49.0,"lon":7.5},
    {"type":"relation","id":5}
]})";

/// Local stand-in for the query endpoint; fails the first `failures` calls.
struct MockEndpoint {
    httplib::Server server;
    std::thread thread;
    int port = 0;
    std::atomic<int> calls{0};
    std::atomic<int> failures{0};
    std::string last_query;

    MockEndpoint() {
        server.Post("/api/interpreter", [this](const httplib::Request& req, httplib::Response& res) {
            const int n = ++calls;
            last_query = req.get_param_value("data");
            if (n <= failures.load()) {
                res.status = 504;
                return;
            }
            res.set_content(kResponse, "application/json");
        });
        port = server.bind_to_any_port("127.0.0.1");
        thread = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }
    ~MockEndpoint() {
        server.stop();
        thread.join();
    }
    std::string url() const { return "http://127.0.0.1:" + std::to_string(port) + "/api/interpreter"; }
};

} // namespace

TEST_SUITE("overpass") {

TEST_CASE("query text restricts nodes and ways to the polygon") {
    OverpassClient client({});
    const auto q = client.build_query(known_class_tag("peak"), kRegion);
    CHECK(q.find("node[\"natural\"=\"peak\"](poly:\"") != std::string::npos);
    CHECK(q.find("way[\"natural\"=\"peak\"]") != std::string::npos);
    CHECK(q.find("47 7 47 8 48 8 48 7") != std::string::npos);  // lat lon pairs
    CHECK(q.find("out center;") != std::string::npos);
    CHECK(testing::error_kind_of([&] { client.build_query(ClassTag{"x", "bad"}, kRegion); }) == ErrorKind::Domain);
}

TEST_CASE("response parsing keeps nodes and way centers") {
    const auto c = parse_overpass_json(kResponse);
    REQUIRE(c.size() == 4);
    CHECK(c[1] == GeoCoordinate{7.75, 47.25});
    CHECK(parse_overpass_json("{}").empty());
    CHECK(testing::error_kind_of([] { parse_overpass_json("<html>"); }) == ErrorKind::Network);
}

TEST_CASE("fetch retries transient failures and then serves from cache") {
    MockEndpoint mock;
    mock.failures = 1;
    const auto dir = testing::temp_dir("overpass-cache");
    OverpassOptions opts;
    opts.endpoint = mock.url();
    opts.cache_dir = dir;
    opts.date = "2024-01-01";
    OverpassClient client(opts);
    const auto coords = client.fetch(known_class_tag("peak"), kRegion);
    CHECK(coords.size() == 4);
    CHECK(client.last_attempts() == 2);
    CHECK(mock.calls == 2);
    CHECK(mock.last_query.find("natural") != std::string::npos);
    CHECK(std::filesystem::exists(client.cache_path(known_class_tag("peak"), kRegion)));

    const auto cached = client.fetch(known_class_tag("peak"), kRegion);
    CHECK(cached == coords);
    CHECK(client.last_attempts() == 0);
    CHECK(mock.calls == 2);

    // different date, different cache entry
    opts.date = "2024-01-02";
    CHECK(OverpassClient(opts).cache_path(known_class_tag("peak"), kRegion) !=
          client.cache_path(known_class_tag("peak"), kRegion));

    // load_class_coords canonicalizes: in-region, deduplicated
    OverpassOptions fresh = opts;
    fresh.cache_dir = testing::temp_dir("overpass-cache-2");
    OverpassClient second(fresh);
    const auto canon = load_class_coords(mock.url(), known_class_tag("peak"), kRegion, &second);
    CHECK(canon.size() == 2);
}

TEST_CASE("unreachable endpoint is a network error after the retry budget") {
    MockEndpoint mock;
    mock.failures = 100;
    OverpassOptions opts;
    opts.endpoint = mock.url();
    opts.cache_dir = testing::temp_dir("overpass-fail");
    opts.max_retries = 2;
    OverpassClient client(opts);
    try {
        client.fetch(known_class_tag("cliff"), kRegion);
        FAIL("expected a network error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Network);
        CHECK(std::string(e.what()).find("after 2 attempts") != std::string::npos);
    }
    CHECK(mock.calls == 2);
}

} // TEST_SUITE
