#include "doctest.h"

#include <random>

#include "fsteer/direction_io.hpp"
#include "fsteer/error.hpp"
#include "support/fixtures.hpp"

using namespace fsteer;

namespace {

DirectionVector awkward_direction(const LayoutPtr& L) {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> v(L->total_dims());
    for (double& x : v) x = u(rng) / 3.0;
    v[0] = 0.1 + 0.2;
    v[1] = 5e-324;
    auto d = DirectionVector::make(L, v, "glasses");
    d.provenance.push_back({ActionKind::compose, {{"note", "x"}}, 12});
    return d;
}

} // namespace

TEST_CASE("direction record round trips bit-exactly") {
    const auto g = fixture::toy();
    const auto d = awkward_direction(g->layout());
    const auto j = direction_to_json(d, g->model_hash());
    CHECK(j.at("format_version") == kDirectionFormatVersion);
    const auto back = direction_from_json(nlohmann::json::parse(j.dump()), g->layout(), g->model_hash());
    CHECK(back.values == d.values);
    CHECK(back.name == "glasses");
    CHECK(back.provenance == d.provenance);
}

TEST_CASE("direction record refuses other models and layouts") {
    const auto g = fixture::toy();
    const auto j = direction_to_json(awkward_direction(g->layout()), g->model_hash());
    CHECK_THROWS_AS(direction_from_json(j, g->layout(), std::string(64, 'a')), StructuralError);
    auto other = std::make_shared<const FilterLayout>(std::vector<LayerSpec>{{"a", 20, 1, 1}});
    CHECK_THROWS_AS(direction_from_json(j, other, g->model_hash()), StructuralError);
}

TEST_CASE("direction files") {
    fixture::TempDir tmp("dirio");
    const auto g = fixture::toy();
    const auto d = awkward_direction(g->layout());
    write_direction_file(tmp / "d.json", d, g->model_hash());
    CHECK(read_direction_file(tmp / "d.json", g->layout(), g->model_hash()).values == d.values);
    CHECK_THROWS(read_direction_file(tmp / "missing.json", g->layout(), g->model_hash()));
}

TEST_CASE("direction store") {
    fixture::TempDir tmp("store");
    const auto g = fixture::toy();
    DirectionStore store(tmp.path());
    const auto d = awkward_direction(g->layout());
    store.save(d, "first", g->model_hash());
    store.save(scale(d, 2.0), "second", g->model_hash());
    CHECK_THROWS_AS(store.save(d, "first", g->model_hash()), ConflictError);
    CHECK_THROWS_AS(store.save(d, "../evil", g->model_hash()), ArgumentError);

    const auto list = store.list();
    REQUIRE(list.size() == 2);
    CHECK(list[0].name == "first");
    CHECK(list[1].name == "second");

    DirectionStore reopened(tmp.path());
    CHECK(reopened.load("first", g->layout(), g->model_hash()).values == d.values);
    CHECK_THROWS_AS(reopened.load("nope", g->layout(), g->model_hash()), NotFoundError);
    CHECK_THROWS_AS(reopened.load("first", g->layout(), std::string(64, 'b')), StructuralError);
}
