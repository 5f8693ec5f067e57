#include "fsteer/generator.hpp"

#include <cmath>

#include "fsteer/error.hpp"

namespace fsteer {

namespace {

// Directions within this distance of unit norm are used as-is.
constexpr double kUnitTolerance = 1e-12;

} // namespace

std::vector<std::string> direction_offsets(const DirectionVector& d, double strength,
                                           std::vector<double>& offsets) {
    std::vector<std::string> warnings;
    if (!std::isfinite(strength)) {
        throw NumericError("strength is not finite");
    }
    const double n = d.norm();
    if (n == 0.0) {
        warnings.emplace_back("zero direction: image rendered without edit");
        offsets.clear();
        return warnings;
    }
    offsets.resize(d.values.size());
    if (std::abs(n - 1.0) <= kUnitTolerance) {
        for (std::size_t i = 0; i < offsets.size(); ++i) offsets[i] = strength * d.values[i];
    } else {
        warnings.emplace_back("direction was not normalized; normalized before rendering");
        for (std::size_t i = 0; i < offsets.size(); ++i) offsets[i] = strength * (d.values[i] / n);
    }
    return warnings;
}

ForwardResult GeneratorAdapter::forward(const LatentCode& z, const std::vector<double>& offsets) const {
    if (static_cast<int>(z.values.size()) != latent_dim()) {
        throw StructuralError("latent code has " + std::to_string(z.values.size()) + " entries, model expects " +
                              std::to_string(latent_dim()));
    }
    std::lock_guard<std::mutex> lock(forward_mutex_);
    return forward_impl(z, offsets);
}

Sample GeneratorAdapter::sample(std::int64_t seed) const {
    auto z = latent(seed);
    auto fr = forward(z, {});
    fr.image.source_seed = seed;
    return Sample{std::move(z), std::move(fr.image), std::move(fr.bundle)};
}

ForwardResult GeneratorAdapter::render_traced(const LatentCode& z, const DirectionVector& d, double strength) const {
    require_same_layout(layout(), d.layout, "render_with_direction");
    std::vector<double> offsets;
    auto warnings = direction_offsets(d, strength, offsets);
    if (!offsets.empty() && !unhooked_.empty()) {
        const auto& lay = *layout();
        for (std::size_t l = 0; l < lay.layer_count(); ++l) {
            if (is_hooked(l)) continue;
            const auto begin = lay.offset(l);
            for (int f = 0; f < lay.layer(l).filter_count; ++f) offsets[begin + f] = 0.0;
        }
    }
    auto fr = forward(z, offsets);
    fr.image.source_seed = z.seed;
    fr.image.applied_direction = AppliedDirection{d.name, strength};
    fr.image.warnings = std::move(warnings);
    return fr;
}

GeneratedImage GeneratorAdapter::render_with_direction(const LatentCode& z, const DirectionVector& d,
                                                       double strength) const {
    return render_traced(z, d, strength).image;
}

void GeneratorAdapter::set_unhooked_layers(std::set<std::string> layer_ids) {
    for (const auto& id : layer_ids) {
        layout()->index_of(id);
    }
    unhooked_ = std::move(layer_ids);
}

bool GeneratorAdapter::is_hooked(std::size_t layer) const {
    return unhooked_.count(layout()->layer(layer).id) == 0;
}

} // namespace fsteer
