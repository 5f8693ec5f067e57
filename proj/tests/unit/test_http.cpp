#include "doctest.h"

#include <thread>

#include <httplib.h>

#include "fsteer/http_api.hpp"
#include "fsteer/image_io.hpp"
#include "support/fixtures.hpp"

using namespace fsteer;
using nlohmann::json;

namespace {

class Server {
public:
    Server() : svc_(fixture::toy(), fixture::service_config(tmp_.path())) {
        register_routes(server_, svc_);
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~Server() {
        server_.stop();
        thread_.join();
    }

    httplib::Client client() const {
        httplib::Client c("127.0.0.1", port_);
        c.set_read_timeout(30, 0);
        return c;
    }
    SessionService& service() { return svc_; }

private:
    fixture::TempDir tmp_{"http"};
    SessionService svc_;
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

json post(httplib::Client& c, const std::string& path, const json& body, int expect) {
    auto res = c.Post(path, body.dump(), "application/json");
    REQUIRE(res);
    CHECK_MESSAGE(res->status == expect, res->body);
    return json::parse(res->body);
}

} // namespace

TEST_CASE("http: health and session lifecycle") {
    Server s;
    auto c = s.client();
    auto res = c.Get("/v1/health");
    REQUIRE(res);
    CHECK(res->status == 200);
    CHECK(json::parse(res->body).at("model_hash") == fixture::toy()->model_hash());

    const auto created = post(c, "/v1/sessions", json::object(), 201);
    const std::string id = created.at("session_id");
    CHECK(created.at("test_images").size() == 4);

    const auto page = post(c, "/v1/sessions/" + id + "/gallery", {{"count", 6}, {"page_seed", 1}}, 200);
    REQUIRE(page.at("entries").size() == 6);
    const auto thumb = page.at("entries")[0].at("thumbnail");
    CHECK(thumb.at("height") == 8);
    CHECK_FALSE(thumb.at("ppm_base64").get<std::string>().empty());

    res = c.Get("/v1/sessions/missing");
    REQUIRE(res);
    CHECK(res->status == 404);
}

TEST_CASE("http: workflow matches the service") {
    Server s;
    auto c = s.client();
    const std::string id = post(c, "/v1/sessions", json::object(), 201).at("session_id");
    const std::string base = "/v1/sessions/" + id;

    auto err = post(c, base + "/test", json::object(), 400);
    CHECK(err.at("error") == "select at least one positive example");

    CHECK(post(c, base + "/exemplars", {{"seed", 3}, {"polarity", "positive"}}, 201).at("id") == "ex-3");
    post(c, base + "/exemplars", {{"seed", 4}, {"polarity", "negative"}}, 201);
    post(c, base + "/exemplars", {{"seed", 4}, {"polarity", "negative"}}, 409);
    post(c, base + "/exemplars", {{"polarity", "negative"}}, 400);
    const auto w = post(c, base + "/exemplars/ex-3/weight", {{"delta_steps", 2}}, 200);
    CHECK(w.at("weight") == 2.0);
    CHECK(w.at("clamped") == false);

    const auto tested = post(c, base + "/test", json::object(), 200);
    const auto st = s.service().session(id);
    const auto d = s.service().current_direction(st);
    REQUIRE(tested.at("images").size() == 4);
    const auto g = fixture::toy();
    const auto expect = g->render_with_direction(g->latent(st.test_images[0].seed), *d, 1.0);
    CHECK(tested.at("images")[0].at("ppm_base64") == image_to_json(expect).at("ppm_base64"));

    const auto seed = st.test_images[0].seed;
    const auto mask = post(c, base + "/masks",
                           {{"test_seed", seed}, {"stroke", {{"polyline", {{1.0, 1.0}, {3.0, 6.0}}}, {"radius", 1.5}}}},
                           201);
    CHECK(mask.at("id") == "m1");
    CHECK(post(c, base + "/masks/m1/cycle", json::object(), 200).at("mode") == "preserve");
    post(c, base + "/masks/m7/cycle", json::object(), 404);
    CHECK(post(c, base + "/apply", json::object(), 200).at("images")[2].at("masked") == true);

    post(c, base + "/test-images", {{"seed", 999}}, 201);
    auto res = c.Put(base + "/test-images/999/strength", json{{"strength", 0.5}}.dump(), "application/json");
    REQUIRE(res);
    CHECK(res->status == 200);
    res = c.Delete(base + "/test-images/999");
    REQUIRE(res);
    CHECK(res->status == 200);
    res = c.Delete(base + "/test-images/abc");
    REQUIRE(res);
    CHECK(res->status == 400);
    res = c.Delete(base + "/exemplars/ex-4");
    REQUIRE(res);
    CHECK(res->status == 200);

    post(c, base + "/save", {{"name", "mine"}}, 201);
    post(c, base + "/save", {{"name", "mine"}}, 409);
    res = c.Get("/v1/directions");
    REQUIRE(res);
    CHECK(json::parse(res->body).at("directions").size() == 1);
    res = c.Get("/v1/directions/mine");
    REQUIRE(res);
    CHECK(res->status == 200);
    CHECK(json::parse(res->body).at("values") == json(s.service().load_direction("mine").values));
    res = c.Get("/v1/directions/other");
    REQUIRE(res);
    CHECK(res->status == 404);

    res = c.Get(base + "/log");
    REQUIRE(res);
    const auto log = json::parse(res->body);
    CHECK(log.at("actions").size() == s.service().session(id).log.size());
    const auto replayed = s.service().replay(log);
    CHECK(s.service().current_direction(replayed)->values ==
          s.service().current_direction(s.service().session(id))->values);

    res = c.Post(base + "/exemplars", "{not json", "application/json");
    REQUIRE(res);
    CHECK(res->status == 400);
}
