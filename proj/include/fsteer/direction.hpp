#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fsteer/action.hpp"
#include "fsteer/filter_space.hpp"

namespace fsteer {

// An editing direction in filter space: one scalar per filter.
struct DirectionVector {
    LayoutPtr layout;
    std::vector<double> values;
    std::string name;
    bool normalized = false;
    Provenance provenance;

    // Validates length and finiteness.
    static DirectionVector make(LayoutPtr layout, std::vector<double> values, std::string name = {});
    static DirectionVector zero(LayoutPtr layout, std::string name = {});

    double norm() const;
};

enum class Polarity { positive, negative };

std::string_view to_string(Polarity p);
Polarity polarity_from_string(std::string_view s);

struct WeightConfig {
    double step = 0.5;
    double min = 0.5;
    double max = 10.0;
};

struct Exemplar {
    std::string id;
    std::int64_t seed = 0;
    FilterVector filter_vector;
    Polarity polarity = Polarity::positive;
    // Signed: positive exemplars carry weight > 0, negative ones weight < 0.
    double weight = 1.0;

    // Default weight is +1 for positives and -1 for negatives.
    static Exemplar make(std::string id, std::int64_t seed, FilterVector fv, Polarity polarity,
                         std::optional<double> weight = std::nullopt, const WeightConfig& cfg = {});

    double magnitude() const { return weight < 0 ? -weight : weight; }
};

struct ExemplarSet {
    std::vector<Exemplar> positives;
    std::vector<Exemplar> negatives;

    // Routes by polarity; rejects duplicate ids and foreign layouts.
    void add(Exemplar e);
    bool remove(const std::string& id);
    const Exemplar* find(const std::string& id) const;
    Exemplar* find(const std::string& id);
    bool empty() const { return positives.empty() && negatives.empty(); }
};

// Spatial mean of each filter map, concatenated in layout order.
FilterVector extract_filter_vector(const FeatureMapBundle& bundle);
// As above, but first checks the bundle against an expected layout.
FilterVector extract_filter_vector(const FeatureMapBundle& bundle, const LayoutPtr& expected);

// wmean(positives) - wmean(negatives), or wmean(positives) - average when
// there are no negatives. Group means divide by the sum of weight magnitudes.
DirectionVector compose_direction(const ExemplarSet& set, const std::optional<FilterVector>& average);

struct WeightAdjustment {
    Exemplar exemplar;
    bool clamped = false;
};

// Moves |weight| by delta_steps * cfg.step within [cfg.min, cfg.max]; the sign never flips.
WeightAdjustment adjust_weight(const Exemplar& exemplar, int delta_steps, const WeightConfig& cfg = {});

DirectionVector normalize(const DirectionVector& d);
DirectionVector scale(const DirectionVector& d, double s);
DirectionVector add(const DirectionVector& a, const DirectionVector& b);

double dot(std::span<const double> a, std::span<const double> b);
double cosine_similarity(std::span<const double> a, std::span<const double> b);

} // namespace fsteer
