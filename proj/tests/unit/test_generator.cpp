#include "doctest.h"

#include <cmath>

#include "fsteer/error.hpp"
#include "fsteer/generator.hpp"
#include "fsteer/toy_generator.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace fsteer;

namespace {

DirectionVector unit_on(const LayoutPtr& L, const std::string& layer, int filter, double v = 1.0) {
    auto d = DirectionVector::zero(L);
    d.values[L->offset(L->index_of(layer)) + filter] = v;
    return d;
}

} // namespace

TEST_CASE("toy layout") {
    const auto g = fixture::toy();
    const auto& L = *g->layout();
    CHECK(L.layer_count() == 3);
    CHECK(L.total_dims() == 20);
    CHECK(g->latent_dim() == 8);
    CHECK(g->resolution().height == 16);
    CHECK(g->model_hash().size() == 64);
}

TEST_CASE("sampling is deterministic per seed") {
    const auto g = fixture::toy();
    const auto a = g->sample(42), b = g->sample(42), c = g->sample(43);
    CHECK(a.image.same_pixels(b.image));
    CHECK(a.bundle == b.bundle);
    CHECK_FALSE(a.image.same_pixels(c.image));
    CHECK(a.image.source_seed == 42);
}

TEST_CASE("latent codes look standard normal") {
    double sum = 0.0, sq = 0.0;
    const int n = 20000;
    const auto z = sample_latent(1234, n);
    for (double v : z.values) {
        sum += v;
        sq += v * v;
    }
    CHECK(std::abs(sum / n) < 0.03);
    CHECK(std::abs(sq / n - 1.0) < 0.05);
}

TEST_CASE("toy forward pass matches the pointwise formula") {
    const auto g = fixture::toy();
    const auto& p = g->params();
    for (std::int64_t seed : {0, 1, 17, 99}) {
        const auto z = g->latent(seed);
        CHECK(oracle::max_abs_diff(g->sample(seed).image.pixels, oracle::image(p, z.values, {})) < 1e-12);
        std::vector<double> off(20);
        for (std::size_t i = 0; i < off.size(); ++i) off[i] = 0.05 * std::sin(static_cast<double>(i + seed));
        auto d = DirectionVector::make(g->layout(), off);
        const double n = d.norm();
        std::vector<double> scaled(off.size());
        for (std::size_t i = 0; i < off.size(); ++i) scaled[i] = 2.0 * off[i] / n;
        CHECK(oracle::max_abs_diff(g->render_with_direction(z, d, 2.0).pixels, oracle::image(p, z.values, scaled)) <
              1e-12);
    }
}

TEST_CASE("zero strength reproduces the reference") {
    const auto g = fixture::toy();
    const auto d = unit_on(g->layout(), "conv1", 3);
    for (std::int64_t seed = 0; seed < 10; ++seed) {
        const auto s = g->sample(seed);
        const auto img = g->render_with_direction(s.latent, d, 0.0);
        CHECK(img.same_pixels(s.image));
        REQUIRE(img.applied_direction);
        CHECK(img.applied_direction->strength == 0.0);
    }
}

TEST_CASE("zero direction renders unedited with a warning") {
    const auto g = fixture::toy();
    const auto s = g->sample(5);
    const auto img = g->render_with_direction(s.latent, DirectionVector::zero(g->layout()), 3.0);
    CHECK(img.same_pixels(s.image));
    REQUIRE(img.warnings.size() == 1);
}

TEST_CASE("un-normalized directions are normalized first") {
    const auto g = fixture::toy();
    const auto z = g->latent(8);
    auto d = DirectionVector::make(g->layout(), std::vector<double>(20, 0.0));
    for (std::size_t i = 0; i < 20; ++i) d.values[i] = static_cast<double>(i % 5) - 2.0;
    const auto unit = normalize(d);
    const auto a = g->render_with_direction(z, d, 1.5);
    const auto b = g->render_with_direction(z, unit, 1.5);
    const auto c = g->render_with_direction(z, scale(d, 7.0), 1.5);
    CHECK(oracle::max_abs_diff(a.pixels, b.pixels) < 1e-12);
    CHECK(oracle::max_abs_diff(a.pixels, c.pixels) < 1e-12);
    CHECK(a.warnings.size() == 1);
    CHECK(b.warnings.empty());
}

TEST_CASE("edits stay inside the edited filter's support") {
    const auto g = fixture::toy();
    const auto s = g->sample(3);
    for (const auto& r : toy::support_table()) {
        const auto img = g->render_with_direction(s.latent, unit_on(g->layout(), r.layer_id, r.filter), 0.8);
        bool changed_inside = false;
        for (int y = 0; y < 16; ++y) {
            for (int x = 0; x < 16; ++x) {
                for (int c = 0; c < 3; ++c) {
                    const bool diff = img.at(y, x, c) != s.image.at(y, x, c);
                    if (!r.contains(y, x)) CHECK_FALSE(diff);
                    changed_inside = changed_inside || diff;
                }
            }
        }
        CHECK(changed_inside);
    }
}

TEST_CASE("toy supports tile every layer") {
    for (const char* layer : {"conv0", "conv1", "conv2"}) {
        int covered = 0;
        for (const auto& r : toy::support_table()) {
            if (r.layer_id == layer) covered += r.area();
        }
        CHECK(covered == 256);
    }
    CHECK(toy::support("conv2", 4).y0 == 8);
    CHECK(toy::support("conv2", 4).x1 == 4);
    CHECK_THROWS_AS(toy::support("conv9", 0), ArgumentError);
}

TEST_CASE("unhooked layers receive no offsets") {
    auto g = toy::make_generator();
    const auto z = g->latent(2);
    const auto d = unit_on(g->layout(), "conv0", 1);
    const auto edited = g->render_with_direction(z, d, 1.0);
    g->set_unhooked_layers({"conv0"});
    CHECK_FALSE(g->is_hooked(0));
    const auto blocked = g->render_with_direction(z, d, 1.0);
    CHECK(blocked.same_pixels(g->sample(2).image));
    CHECK_FALSE(edited.same_pixels(blocked));
    CHECK_THROWS_AS(g->set_unhooked_layers({"nope"}), StructuralError);
}

TEST_CASE("render rejects foreign directions and bad strengths") {
    const auto g = fixture::toy();
    auto other = std::make_shared<const FilterLayout>(std::vector<LayerSpec>{{"a", 20, 1, 1}});
    const auto z = g->latent(1);
    CHECK_THROWS_AS(g->render_with_direction(z, DirectionVector::make(other, std::vector<double>(20, 1.0)), 1.0),
                    StructuralError);
    CHECK_THROWS_AS(g->render_with_direction(z, unit_on(g->layout(), "conv0", 0), INFINITY), NumericError);
    LatentCode bad;
    bad.values = {1.0};
    CHECK_THROWS_AS(g->render_with_direction(bad, unit_on(g->layout(), "conv0", 0), 1.0), StructuralError);
}

TEST_CASE("render_traced exposes the edited activations") {
    const auto g = fixture::toy();
    const auto z = g->latent(4);
    const auto base = g->sample(4).bundle;
    const auto fr = g->render_traced(z, unit_on(g->layout(), "conv2", 6), 0.5);
    // conv2 is the last layer: only filter 6's stored activations shift, by exactly the offset.
    for (int f = 0; f < 8; ++f) {
        for (int y = 0; y < 16; ++y) {
            for (int x = 0; x < 16; ++x) {
                const double delta = fr.bundle.at(2, f, y, x) - base.at(2, f, y, x);
                CHECK(delta == doctest::Approx(f == 6 ? 0.5 : 0.0).epsilon(1e-12));
            }
        }
    }
}
