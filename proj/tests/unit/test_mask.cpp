#include "doctest.h"

#include <cmath>
#include <random>

#include "fsteer/error.hpp"
#include "fsteer/mask.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace fsteer;

TEST_CASE("mode cycle has period three") {
    CHECK(next_mode(MaskMode::off) == MaskMode::preserve);
    CHECK(next_mode(MaskMode::preserve) == MaskMode::discard);
    CHECK(next_mode(MaskMode::discard) == MaskMode::off);
    for (auto m : {MaskMode::off, MaskMode::preserve, MaskMode::discard}) {
        CHECK(next_mode(next_mode(next_mode(m))) == m);
        CHECK(mask_mode_from_string(to_string(m)) == m);
    }
    CHECK_THROWS_AS(mask_mode_from_string("green"), ArgumentError);
}

TEST_CASE("stroke rasterization matches pixel-centre distances") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> coord(-2.0, 18.0), rad(0.3, 4.0);
    for (int t = 0; t < 100; ++t) {
        Stroke s;
        s.radius = rad(rng);
        const int pts = 1 + t % 4;
        for (int i = 0; i < pts; ++i) s.polyline.push_back({coord(rng), coord(rng)});
        std::vector<std::uint8_t> expect(256, 0);
        for (int y = 0; y < 16; ++y) {
            for (int x = 0; x < 16; ++x) {
                const double cx = x + 0.5, cy = y + 0.5;
                bool hit = false;
                const std::size_t segs = pts == 1 ? 1 : s.polyline.size() - 1;
                for (std::size_t k = 0; k < segs && !hit; ++k) {
                    const auto a = s.polyline[k];
                    const auto b = pts == 1 ? a : s.polyline[k + 1];
                    const double dx = b.x - a.x, dy = b.y - a.y, len2 = dx * dx + dy * dy;
                    double tt = len2 > 0 ? ((cx - a.x) * dx + (cy - a.y) * dy) / len2 : 0.0;
                    tt = std::min(1.0, std::max(0.0, tt));
                    const double qx = a.x + tt * dx - cx, qy = a.y + tt * dy - cy;
                    hit = std::hypot(qx, qy) <= s.radius;
                }
                expect[y * 16 + x] = hit ? 1 : 0;
            }
        }
        bool any = false;
        for (auto e : expect) any = any || e;
        if (!any) {
            CHECK_THROWS_AS(rasterize_stroke("m", s, {16, 16}, 0), ArgumentError);
            continue;
        }
        const auto m = rasterize_stroke("m", s, {16, 16}, 0);
        CHECK(m.grid == expect);
        CHECK(m.mode == MaskMode::off);
    }
}

TEST_CASE("stroke validation") {
    CHECK_THROWS_AS(rasterize_stroke("m", Stroke{{}, 2.0}, {16, 16}, 0), ArgumentError);
    CHECK_THROWS_AS(rasterize_stroke("m", Stroke{{{1, 1}}, -1.0}, {16, 16}, 0), ArgumentError);
    CHECK_THROWS_AS(rasterize_stroke("m", Stroke{{{100, 100}}, 1.0}, {16, 16}, 0), ArgumentError);
}

TEST_CASE("mask wire format round trip") {
    std::mt19937_64 rng(8);
    for (int t = 0; t < 50; ++t) {
        auto m = oracle::random_mask(rng, 1 + t % 13, 1 + t % 7, 0.4);
        m.mode = t % 2 ? MaskMode::preserve : MaskMode::discard;
        m.created_from = t;
        const auto back = mask_from_wire(nlohmann::json::parse(mask_to_wire(m).dump()));
        CHECK(back.grid == m.grid);
        CHECK(back.mode == m.mode);
        CHECK(back.created_from == t);
    }
    const auto stroked = rasterize_stroke("s", Stroke{{{2, 2}, {9, 5}}, 1.5}, {16, 16}, 3);
    const auto back = mask_from_wire(mask_to_wire(stroked));
    REQUIRE(back.stroke);
    CHECK(back.stroke->radius == 1.5);
    CHECK(back.stroke->polyline.size() == 2);
}

TEST_CASE("mask wire format rejects bad runs") {
    nlohmann::json j = {{"id", "m"}, {"resolution", {4, 4}}, {"rows", {{1, {{3, 2}}}}}};
    CHECK_THROWS_AS(mask_from_wire(j), ArgumentError);
    j["rows"] = nlohmann::json::array();
    CHECK_THROWS_AS(mask_from_wire(j), ArgumentError);
}

TEST_CASE("downscale matches the geometric overlap oracle") {
    std::mt19937_64 rng(12);
    std::uniform_int_distribution<int> side(1, 24);
    for (int t = 0; t < 200; ++t) {
        const auto m = oracle::random_mask(rng, side(rng), side(rng), 0.3);
        const int h = side(rng), w = side(rng);
        CHECK(oracle::max_abs_diff(downscale_mask(m, h, w), oracle::downscale(m, h, w)) < 1e-9);
    }
}

TEST_CASE("downscale conserves covered area") {
    std::mt19937_64 rng(13);
    const auto m = oracle::random_mask(rng, 16, 16, 0.5);
    for (int s : {1, 3, 4, 7, 16, 21}) {
        const auto cells = downscale_mask(m, s, s);
        double total = 0.0;
        for (double c : cells) total += c;
        CHECK(total / (s * s) == doctest::Approx(static_cast<double>(m.set_count()) / 256.0).epsilon(1e-12));
    }
}

TEST_CASE("importance matches the brute-force oracle") {
    std::mt19937_64 rng(14);
    std::uniform_int_distribution<int> side(2, 20);
    for (int t = 0; t < 200; ++t) {
        const auto L = fixture::random_layout(rng);
        const auto b = fixture::random_bundle(rng, L);
        const auto m = oracle::random_mask(rng, side(rng), side(rng), 0.3);
        const auto imp = filter_importance(m, b);
        CHECK(oracle::max_abs_diff(imp.scores, oracle::importance(m, b, kImportanceEpsilon)) < 1e-9);
        for (double s : imp.scores) {
            CHECK(s >= 0.0);
            CHECK(s <= 1.0);
        }
    }
}

TEST_CASE("importance over several bundles averages raw overlaps") {
    std::mt19937_64 rng(15);
    const auto L = fixture::random_layout(rng);
    std::vector<FeatureMapBundle> bs{fixture::random_bundle(rng, L), fixture::random_bundle(rng, L)};
    const auto m = oracle::random_mask(rng, 10, 10, 0.4);
    const auto imp = filter_importance(m, std::span<const FeatureMapBundle>(bs));
    const auto r0 = raw_overlap(m, bs[0]), r1 = raw_overlap(m, bs[1]);
    for (std::size_t l = 0; l < L->layer_count(); ++l) {
        double mx = 0.0;
        for (int f = 0; f < L->layer(l).filter_count; ++f) {
            const auto k = L->offset(l) + f;
            mx = std::max(mx, 0.5 * (r0[k] + r1[k]));
        }
        for (int f = 0; f < L->layer(l).filter_count; ++f) {
            const auto k = L->offset(l) + f;
            CHECK(imp.scores[k] == doctest::Approx(mx > 0 ? 0.5 * (r0[k] + r1[k]) / mx : 0.0).epsilon(1e-12));
        }
    }
    CHECK_THROWS_AS(filter_importance(m, std::span<const FeatureMapBundle>()), ArgumentError);
}

TEST_CASE("a full mask gives every active filter top importance") {
    const auto g = fixture::toy();
    const auto m = Mask::make("all", {16, 16}, std::vector<std::uint8_t>(256, 1), MaskMode::preserve, 0);
    const auto imp = filter_importance(m, g->sample(1).bundle);
    for (double s : imp.scores) CHECK(s == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("apply_mask_modes multiplies by s or 1 - s then normalizes") {
    std::mt19937_64 rng(16);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 50; ++t) {
        const auto L = fixture::random_layout(rng);
        auto d = normalize(DirectionVector::make(L, fixture::random_vector(rng, L).values));
        std::vector<ActiveMask> masks;
        for (int k = 0; k < 1 + t % 3; ++k) {
            MaskImportance imp{"m" + std::to_string(k), {}, kImportanceEpsilon};
            for (std::size_t i = 0; i < L->total_dims(); ++i) imp.scores.push_back(u(rng));
            masks.push_back({imp, k % 2 ? MaskMode::discard : MaskMode::preserve});
        }
        std::vector<double> expect = d.values;
        for (const auto& m : masks) {
            for (std::size_t i = 0; i < expect.size(); ++i) {
                expect[i] *= m.mode == MaskMode::preserve ? m.importance.scores[i] : 1.0 - m.importance.scores[i];
            }
        }
        double n = 0.0;
        for (double v : expect) n += v * v;
        n = std::sqrt(n);
        for (double& v : expect) v /= n;
        const auto out = apply_mask_modes(d, masks);
        CHECK(oracle::max_abs_diff(out.values, expect) < 1e-12);
        CHECK(out.provenance.size() == d.provenance.size() + masks.size());
    }
}

TEST_CASE("property: stronger discard importance shrinks that component") {
    auto L = std::make_shared<const FilterLayout>(std::vector<LayerSpec>{{"a", 3, 1, 1}});
    const auto d = normalize(DirectionVector::make(L, {1.0, 1.0, 1.0}));
    double prev_disc = 2.0, prev_pres = -1.0;
    for (double s : {0.0, 0.2, 0.4, 0.6, 0.8, 0.95}) {
        const std::vector<ActiveMask> disc{{{"m", {s, 0.0, 0.0}, kImportanceEpsilon}, MaskMode::discard}};
        const std::vector<ActiveMask> pres{{{"m", {s, 1.0, 1.0}, kImportanceEpsilon}, MaskMode::preserve}};
        const double a = std::abs(apply_mask_modes(d, disc).values[0]);
        const double b = std::abs(apply_mask_modes(d, pres).values[0]);
        CHECK(a < prev_disc);
        CHECK(b > prev_pres);
        prev_disc = a;
        prev_pres = b;
    }
}

TEST_CASE("apply_mask_modes edge cases") {
    auto L = std::make_shared<const FilterLayout>(std::vector<LayerSpec>{{"a", 2, 1, 1}});
    const auto d = normalize(DirectionVector::make(L, {1.0, 1.0}));
    CHECK(apply_mask_modes(d, {}).values == d.values);
    const std::vector<ActiveMask> all{{{"m", {1.0, 1.0}, kImportanceEpsilon}, MaskMode::discard}};
    CHECK_THROWS_AS(apply_mask_modes(d, all), NumericError);
    const std::vector<ActiveMask> wrong{{{"m", {1.0}, kImportanceEpsilon}, MaskMode::discard}};
    CHECK_THROWS_AS(apply_mask_modes(d, wrong), StructuralError);
}
