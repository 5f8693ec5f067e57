#include "fsteer/direction.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "fsteer/error.hpp"

namespace fsteer {

namespace {

void require_finite(std::span<const double> values, const char* what) {
    for (double v : values) {
        if (!std::isfinite(v)) {
            throw NumericError(fmt::format("{} contains a non-finite value", what));
        }
    }
}

// Accumulates sum(|w_i| * v_i) / sum(|w_i|) over one exemplar group.
std::vector<double> weighted_mean(const std::vector<Exemplar>& group, std::size_t dims) {
    std::vector<double> acc(dims, 0.0);
    double total = 0.0;
    for (const auto& e : group) {
        const double w = e.magnitude();
        total += w;
        for (std::size_t i = 0; i < dims; ++i) {
            acc[i] += w * e.filter_vector.values[i];
        }
    }
    for (double& v : acc) v /= total;
    return acc;
}

nlohmann::json describe_group(const std::vector<Exemplar>& group) {
    auto arr = nlohmann::json::array();
    for (const auto& e : group) {
        arr.push_back({{"id", e.id}, {"seed", e.seed}, {"weight", e.weight}});
    }
    return arr;
}

} // namespace

DirectionVector DirectionVector::make(LayoutPtr layout, std::vector<double> values, std::string name) {
    if (!layout) {
        throw StructuralError("direction without layout");
    }
    if (values.size() != layout->total_dims()) {
        throw StructuralError(fmt::format("direction has {} values, layout needs {}", values.size(),
                                          layout->total_dims()));
    }
    require_finite(values, "direction");
    DirectionVector d;
    d.layout = std::move(layout);
    d.values = std::move(values);
    d.name = std::move(name);
    return d;
}

DirectionVector DirectionVector::zero(LayoutPtr layout, std::string name) {
    const auto n = layout->total_dims();
    return make(std::move(layout), std::vector<double>(n, 0.0), std::move(name));
}

double DirectionVector::norm() const {
    return std::sqrt(dot(values, values));
}

std::string_view to_string(Polarity p) {
    return p == Polarity::positive ? "positive" : "negative";
}

Polarity polarity_from_string(std::string_view s) {
    if (s == "positive") return Polarity::positive;
    if (s == "negative") return Polarity::negative;
    throw ArgumentError(fmt::format("unknown polarity '{}'", s));
}

Exemplar Exemplar::make(std::string id, std::int64_t seed, FilterVector fv, Polarity polarity,
                        std::optional<double> weight, const WeightConfig& cfg) {
    const double sign = polarity == Polarity::positive ? 1.0 : -1.0;
    const double w = weight.value_or(sign);
    if (w * sign <= 0.0) {
        throw ArgumentError(fmt::format("exemplar '{}': weight {} does not match {} polarity", id, w,
                                        to_string(polarity)));
    }
    const double mag = std::abs(w);
    if (mag < cfg.min || mag > cfg.max) {
        throw ArgumentError(fmt::format("exemplar '{}': |weight| {} outside [{}, {}]", id, mag, cfg.min, cfg.max));
    }
    Exemplar e;
    e.id = std::move(id);
    e.seed = seed;
    e.filter_vector = std::move(fv);
    e.polarity = polarity;
    e.weight = w;
    return e;
}

void ExemplarSet::add(Exemplar e) {
    if (find(e.id) != nullptr) {
        throw ConflictError(fmt::format("exemplar '{}' already selected", e.id));
    }
    const Exemplar* any = !positives.empty() ? &positives.front() : (!negatives.empty() ? &negatives.front() : nullptr);
    if (any != nullptr) {
        require_same_layout(any->filter_vector.layout, e.filter_vector.layout, "exemplar " + e.id);
    }
    (e.polarity == Polarity::positive ? positives : negatives).push_back(std::move(e));
}

bool ExemplarSet::remove(const std::string& id) {
    for (auto* group : {&positives, &negatives}) {
        auto it = std::find_if(group->begin(), group->end(), [&](const Exemplar& e) { return e.id == id; });
        if (it != group->end()) {
            group->erase(it);
            return true;
        }
    }
    return false;
}

const Exemplar* ExemplarSet::find(const std::string& id) const {
    for (const auto* group : {&positives, &negatives}) {
        for (const auto& e : *group) {
            if (e.id == id) return &e;
        }
    }
    return nullptr;
}

Exemplar* ExemplarSet::find(const std::string& id) {
    return const_cast<Exemplar*>(std::as_const(*this).find(id));
}

FilterVector extract_filter_vector(const FeatureMapBundle& bundle) {
    const auto& layout = bundle.layout();
    if (!layout) {
        throw StructuralError("bundle has no layout");
    }
    std::vector<double> values;
    values.reserve(layout->total_dims());
    for (std::size_t l = 0; l < layout->layer_count(); ++l) {
        const auto& spec = layout->layer(l);
        const auto n = static_cast<double>(spec.plane_size());
        for (int f = 0; f < spec.filter_count; ++f) {
            double sum = 0.0;
            for (double a : bundle.plane(l, f)) sum += a;
            values.push_back(sum / n);
        }
    }
    return FilterVector::make(layout, std::move(values));
}

FilterVector extract_filter_vector(const FeatureMapBundle& bundle, const LayoutPtr& expected) {
    require_same_layout(expected, bundle.layout(), "feature map bundle");
    return extract_filter_vector(bundle);
}

DirectionVector compose_direction(const ExemplarSet& set, const std::optional<FilterVector>& average) {
    if (set.positives.empty()) {
        throw StateError("select at least one positive example");
    }
    if (set.negatives.empty() && !average) {
        throw StateError("no negative examples selected and no average vector available");
    }
    const auto& layout = set.positives.front().filter_vector.layout;
    for (const auto* group : {&set.positives, &set.negatives}) {
        for (const auto& e : *group) {
            require_same_layout(layout, e.filter_vector.layout, "exemplar " + e.id);
        }
    }
    const std::size_t dims = layout->total_dims();
    auto values = weighted_mean(set.positives, dims);
    std::vector<double> baseline;
    if (!set.negatives.empty()) {
        baseline = weighted_mean(set.negatives, dims);
    } else {
        require_same_layout(layout, average->layout, "average vector");
        baseline = average->values;
    }
    for (std::size_t i = 0; i < dims; ++i) {
        values[i] -= baseline[i];
    }
    auto d = DirectionVector::make(layout, std::move(values));
    d.provenance.push_back(DisentangleAction{
        ActionKind::compose,
        {{"positives", describe_group(set.positives)},
         {"negatives", describe_group(set.negatives)},
         {"baseline", set.negatives.empty() ? "average" : "negatives"}},
        0});
    return d;
}

WeightAdjustment adjust_weight(const Exemplar& exemplar, int delta_steps, const WeightConfig& cfg) {
    const double target = exemplar.magnitude() + delta_steps * cfg.step;
    const double mag = std::clamp(target, cfg.min, cfg.max);
    WeightAdjustment out{exemplar, mag != target};
    out.exemplar.weight = exemplar.polarity == Polarity::positive ? mag : -mag;
    return out;
}

DirectionVector normalize(const DirectionVector& d) {
    const double n = d.norm();
    if (!(n > 0.0) || !std::isfinite(n)) {
        throw NumericError("cannot normalize a zero-norm direction");
    }
    DirectionVector out = d;
    for (double& v : out.values) v /= n;
    out.normalized = true;
    return out;
}

DirectionVector scale(const DirectionVector& d, double s) {
    if (!std::isfinite(s)) {
        throw NumericError("scale factor is not finite");
    }
    DirectionVector out = d;
    for (double& v : out.values) v *= s;
    out.normalized = d.normalized && s == 1.0;
    return out;
}

DirectionVector add(const DirectionVector& a, const DirectionVector& b) {
    require_same_layout(a.layout, b.layout, "add");
    DirectionVector out = a;
    for (std::size_t i = 0; i < out.values.size(); ++i) {
        out.values[i] += b.values[i];
    }
    out.normalized = false;
    out.provenance.insert(out.provenance.end(), b.provenance.begin(), b.provenance.end());
    return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw StructuralError(fmt::format("dot product of lengths {} and {}", a.size(), b.size()));
    }
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    const double ab = dot(a, b);
    const double aa = dot(a, a);
    const double bb = dot(b, b);
    if (!(aa > 0.0) || !(bb > 0.0)) {
        throw NumericError("cosine similarity of a zero-norm vector");
    }
    return ab / std::sqrt(aa * bb);
}

} // namespace fsteer
