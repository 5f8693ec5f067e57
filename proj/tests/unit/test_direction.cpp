#include "doctest.h"

#include <cmath>
#include <random>

#include "fsteer/direction.hpp"
#include "fsteer/error.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace fsteer;

namespace {

Exemplar ex(const std::string& id, const FilterVector& v, Polarity p, std::optional<double> w = std::nullopt) {
    return Exemplar::make(id, 0, v, p, w, WeightConfig{0.5, 0.25, 10.0});
}

} // namespace

TEST_CASE("extract_filter_vector matches per-map means") {
    std::mt19937_64 rng(11);
    for (int t = 0; t < 50; ++t) {
        const auto L = fixture::random_layout(rng);
        const auto b = fixture::random_bundle(rng, L);
        const auto v = extract_filter_vector(b);
        CHECK(oracle::max_abs_diff(v.values, oracle::spatial_means(b)) < 1e-12);
    }
}

TEST_CASE("extract_filter_vector refuses a foreign layout") {
    std::mt19937_64 rng(1);
    auto a = std::make_shared<const FilterLayout>(std::vector<LayerSpec>{{"a", 2, 2, 2}});
    auto b = std::make_shared<const FilterLayout>(std::vector<LayerSpec>{{"a", 3, 2, 2}});
    CHECK_THROWS_AS(extract_filter_vector(fixture::random_bundle(rng, a), b), StructuralError);
}

TEST_CASE("exemplar weights") {
    auto L = std::make_shared<const FilterLayout>(std::vector<LayerSpec>{{"a", 1, 1, 1}});
    const auto v = FilterVector::make(L, {1.0});
    CHECK(Exemplar::make("p", 0, v, Polarity::positive).weight == 1.0);
    CHECK(Exemplar::make("n", 0, v, Polarity::negative).weight == -1.0);
    CHECK_THROWS_AS(Exemplar::make("p", 0, v, Polarity::positive, -1.0), ArgumentError);
    CHECK_THROWS_AS(Exemplar::make("p", 0, v, Polarity::positive, 11.0), ArgumentError);
    CHECK_THROWS_AS(Exemplar::make("p", 0, v, Polarity::positive, 0.1), ArgumentError);
}

TEST_CASE("exemplar set routing and duplicates") {
    auto L = std::make_shared<const FilterLayout>(std::vector<LayerSpec>{{"a", 1, 1, 1}});
    const auto v = FilterVector::make(L, {1.0});
    ExemplarSet s;
    s.add(ex("a", v, Polarity::positive));
    s.add(ex("b", v, Polarity::negative));
    CHECK(s.positives.size() == 1);
    CHECK(s.negatives.size() == 1);
    CHECK_THROWS_AS(s.add(ex("a", v, Polarity::negative)), ConflictError);
    CHECK(s.remove("a"));
    CHECK_FALSE(s.remove("a"));
    CHECK(s.find("b") != nullptr);
}

TEST_CASE("compose matches the weighted-sum oracle") {
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> count(1, 5);
    std::uniform_real_distribution<double> wd(0.5, 10.0);
    for (int t = 0; t < 100; ++t) {
        const auto L = fixture::random_layout(rng);
        ExemplarSet s;
        const int np = count(rng), nn = t % 3 == 0 ? 0 : count(rng);
        for (int i = 0; i < np; ++i) s.add(ex("p" + std::to_string(i), fixture::random_vector(rng, L), Polarity::positive, wd(rng)));
        for (int i = 0; i < nn; ++i) s.add(ex("n" + std::to_string(i), fixture::random_vector(rng, L), Polarity::negative, -wd(rng)));
        const auto avg = fixture::random_vector(rng, L);
        const auto d = compose_direction(s, avg);
        CHECK(oracle::max_abs_diff(d.values, oracle::compose(s, &avg.values)) < 1e-12);
        CHECK_FALSE(d.normalized);
        REQUIRE(d.provenance.size() == 1);
        CHECK(d.provenance[0].kind == ActionKind::compose);
    }
}

TEST_CASE("compose errors") {
    auto L = std::make_shared<const FilterLayout>(std::vector<LayerSpec>{{"a", 2, 1, 1}});
    const auto v = FilterVector::make(L, {1.0, 2.0});
    ExemplarSet s;
    CHECK_THROWS_AS(compose_direction(s, v), StateError);
    s.add(ex("n", v, Polarity::negative));
    CHECK_THROWS_WITH_AS(compose_direction(s, v), "select at least one positive example", StateError);
    ExemplarSet only_pos;
    only_pos.add(ex("p", v, Polarity::positive));
    CHECK_THROWS_AS(compose_direction(only_pos, std::nullopt), StateError);
}

TEST_CASE("property: identical positive and negative sets cancel") {
    std::mt19937_64 rng(9);
    for (int t = 0; t < 50; ++t) {
        const auto L = fixture::random_layout(rng);
        ExemplarSet s;
        for (int i = 0; i < 3; ++i) {
            const auto v = fixture::random_vector(rng, L);
            s.add(ex("p" + std::to_string(i), v, Polarity::positive));
            s.add(ex("n" + std::to_string(i), v, Polarity::negative));
        }
        CHECK(compose_direction(s, std::nullopt).norm() < 1e-9);
    }
}

TEST_CASE("property: uniform weight scaling leaves the direction unchanged") {
    std::mt19937_64 rng(21);
    const auto L = fixture::random_layout(rng);
    ExemplarSet a, b;
    for (int i = 0; i < 4; ++i) {
        const auto v = fixture::random_vector(rng, L);
        const double w = 0.5 + i;
        a.add(ex("p" + std::to_string(i), v, Polarity::positive, w));
        b.add(ex("p" + std::to_string(i), v, Polarity::positive, 2.0 * w));
    }
    const auto avg = fixture::random_vector(rng, L);
    CHECK(oracle::max_abs_diff(compose_direction(a, avg).values, compose_direction(b, avg).values) < 1e-12);
}

TEST_CASE("property: raising a positive weight moves the direction toward that exemplar") {
    std::mt19937_64 rng(33);
    for (int t = 0; t < 30; ++t) {
        const auto L = fixture::random_layout(rng);
        const auto avg = fixture::random_vector(rng, L);
        std::vector<FilterVector> vs;
        for (int i = 0; i < 3; ++i) vs.push_back(fixture::random_vector(rng, L));
        std::vector<double> target(avg.values.size());
        for (std::size_t k = 0; k < target.size(); ++k) target[k] = vs[0].values[k] - avg.values[k];
        double prev = -2.0;
        for (double w : {0.5, 1.0, 2.0, 5.0, 10.0}) {
            ExemplarSet s;
            s.add(ex("a", vs[0], Polarity::positive, w));
            s.add(ex("b", vs[1], Polarity::positive));
            s.add(ex("c", vs[2], Polarity::positive));
            const double c = cosine_similarity(compose_direction(s, avg).values, target);
            CHECK(c >= prev - 1e-12);
            prev = c;
        }
    }
}

TEST_CASE("property: linearity of the composed direction in exemplar vectors") {
    std::mt19937_64 rng(77);
    const auto L = fixture::random_layout(rng);
    const auto p = fixture::random_vector(rng, L), q = fixture::random_vector(rng, L);
    const auto n = fixture::random_vector(rng, L);
    ExemplarSet s1, s2;
    s1.add(ex("p", p, Polarity::positive));
    s1.add(ex("n", n, Polarity::negative));
    s2.add(ex("q", q, Polarity::positive));
    s2.add(ex("n", n, Polarity::negative));
    ExemplarSet both;
    both.add(ex("p", p, Polarity::positive));
    both.add(ex("q", q, Polarity::positive));
    both.add(ex("n", n, Polarity::negative));
    const auto d1 = compose_direction(s1, std::nullopt), d2 = compose_direction(s2, std::nullopt);
    const auto d = compose_direction(both, std::nullopt);
    for (std::size_t k = 0; k < d.values.size(); ++k) {
        CHECK(d.values[k] == doctest::Approx(0.5 * (d1.values[k] + d2.values[k])).epsilon(1e-12));
    }
}

TEST_CASE("adjust_weight clamps and keeps sign") {
    auto L = std::make_shared<const FilterLayout>(std::vector<LayerSpec>{{"a", 1, 1, 1}});
    const auto v = FilterVector::make(L, {1.0});
    const WeightConfig cfg;
    auto e = Exemplar::make("n", 0, v, Polarity::negative);
    auto r = adjust_weight(e, 3, cfg);
    CHECK(r.exemplar.weight == -2.5);
    CHECK_FALSE(r.clamped);
    r = adjust_weight(e, -10, cfg);
    CHECK(r.exemplar.weight == -0.5);
    CHECK(r.clamped);
    r = adjust_weight(Exemplar::make("p", 0, v, Polarity::positive), 100, cfg);
    CHECK(r.exemplar.weight == 10.0);
    CHECK(r.clamped);
}

TEST_CASE("normalize, scale, add") {
    auto L = std::make_shared<const FilterLayout>(std::vector<LayerSpec>{{"a", 2, 1, 1}});
    auto d = DirectionVector::make(L, {3.0, 4.0});
    const auto n = normalize(d);
    CHECK(n.values[0] == doctest::Approx(0.6));
    CHECK(n.normalized);
    CHECK(n.norm() == doctest::Approx(1.0).epsilon(1e-15));
    CHECK_THROWS_AS(normalize(DirectionVector::zero(L)), NumericError);
    CHECK(scale(d, 2.0).values[1] == 8.0);
    CHECK(add(d, d).values[0] == 6.0);
    auto other = std::make_shared<const FilterLayout>(std::vector<LayerSpec>{{"b", 2, 1, 1}});
    CHECK_THROWS_AS(add(d, DirectionVector::make(other, {1.0, 1.0})), StructuralError);
}

TEST_CASE("cosine similarity") {
    const std::vector<double> a{1.0, 0.0}, b{0.0, 2.0}, c{-3.0, 0.0};
    CHECK(cosine_similarity(a, b) == 0.0);
    CHECK(cosine_similarity(a, c) == -1.0);
    CHECK(cosine_similarity(a, a) == 1.0);
}
