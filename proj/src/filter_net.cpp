#include "fsteer/filter_net.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <fmt/format.h>

#include "fsteer/error.hpp"
#include "fsteer/model_package.hpp"

namespace fsteer {

namespace {

void check_size(const std::vector<double>& v, std::size_t expected, const std::string& what) {
    if (v.size() != expected) {
        throw StructuralError(fmt::format("{} has {} values, expected {}", what, v.size(), expected));
    }
}

} // namespace

void FilterNetParams::validate() const {
    if (latent_dim <= 0) throw StructuralError("latent_dim must be positive");
    if (resolution.height <= 0 || resolution.width <= 0) throw StructuralError("resolution must be positive");
    if (layers.empty()) throw StructuralError("generator needs at least one layer");
    const auto n = static_cast<std::size_t>(latent_dim);
    std::size_t prev_filters = 0;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& layer = layers[l];
        const auto& s = layer.spec;
        const auto f = static_cast<std::size_t>(s.filter_count);
        check_size(layer.latent_proj, f * n, s.id + ".latent_proj");
        check_size(layer.spatial_bias, s.size(), s.id + ".spatial_bias");
        check_size(layer.support, s.size(), s.id + ".support");
        check_size(layer.amplitude, f, s.id + ".amplitude");
        check_size(layer.mix, l == 0 ? 0 : f * prev_filters, s.id + ".mix");
        prev_filters = f;
    }
    check_size(to_rgb, 3 * prev_filters, "to_rgb");
    layout(); // validates ids and dimensions
}

FilterLayout FilterNetParams::layout() const {
    std::vector<LayerSpec> specs;
    specs.reserve(layers.size());
    for (const auto& l : layers) specs.push_back(l.spec);
    return FilterLayout(std::move(specs));
}

LatentCode sample_latent(std::int64_t seed, int n) {
    std::mt19937_64 rng(static_cast<std::uint64_t>(seed));
    auto uniform = [&rng] {
        // (0, 1]: never feeds log(0)
        return (static_cast<double>(rng() >> 11) + 1.0) * 0x1.0p-53;
    };
    LatentCode z;
    z.seed = seed;
    z.values.reserve(static_cast<std::size_t>(n));
    while (static_cast<int>(z.values.size()) < n) {
        const double r = std::sqrt(-2.0 * std::log(uniform()));
        const double theta = 2.0 * std::numbers::pi * uniform();
        z.values.push_back(r * std::cos(theta));
        if (static_cast<int>(z.values.size()) < n) z.values.push_back(r * std::sin(theta));
    }
    return z;
}

FilterNetGenerator::FilterNetGenerator(FilterNetParams params, std::string model_hash)
    : params_(std::move(params)) {
    params_.validate();
    layout_ = std::make_shared<const FilterLayout>(params_.layout());
    model_hash_ = model_hash.empty() ? weights_hash(params_) : std::move(model_hash);
}

LatentCode FilterNetGenerator::latent(std::int64_t seed) const {
    return sample_latent(seed, params_.latent_dim);
}

ForwardResult FilterNetGenerator::forward_impl(const LatentCode& z, const std::vector<double>& offsets) const {
    const auto n = static_cast<std::size_t>(params_.latent_dim);
    FeatureMapBundle bundle(layout_);
    std::vector<double> prev; // gated activations of the previous layer
    const LayerSpec* prev_spec = nullptr;

    for (std::size_t l = 0; l < params_.layers.size(); ++l) {
        const auto& layer = params_.layers[l];
        const auto& s = layer.spec;
        const std::size_t base = layout_->offset(l);
        auto out = bundle.layer(l);
        std::vector<double> gated(s.size());

        for (int f = 0; f < s.filter_count; ++f) {
            double proj = 0.0;
            for (std::size_t i = 0; i < n; ++i) proj += layer.latent_proj[f * n + i] * z.values[i];
            const double amp = layer.amplitude[f];
            const double off = offsets.empty() ? 0.0 : offsets[base + f];

            for (int y = 0; y < s.height; ++y) {
                for (int x = 0; x < s.width; ++x) {
                    const std::size_t idx = (static_cast<std::size_t>(f) * s.height + y) * s.width + x;
                    double v = amp * std::tanh(proj + layer.spatial_bias[idx]);
                    if (prev_spec != nullptr) {
                        const int py = y * prev_spec->height / s.height;
                        const int px = x * prev_spec->width / s.width;
                        const std::size_t pf = static_cast<std::size_t>(prev_spec->filter_count);
                        for (std::size_t g = 0; g < pf; ++g) {
                            v += layer.mix[f * pf + g] *
                                 prev[(g * prev_spec->height + py) * prev_spec->width + px];
                        }
                    }
                    const double sup = layer.support[idx];
                    const double act = sup * v + off;
                    out[idx] = act;
                    gated[idx] = sup * act;
                }
            }
        }
        prev = std::move(gated);
        prev_spec = &s;
    }

    GeneratedImage img;
    img.height = params_.resolution.height;
    img.width = params_.resolution.width;
    img.pixels.resize(static_cast<std::size_t>(img.height) * img.width * 3);
    const std::size_t last_filters = static_cast<std::size_t>(prev_spec->filter_count);
    for (int y = 0; y < img.height; ++y) {
        const int sy = y * prev_spec->height / img.height;
        for (int x = 0; x < img.width; ++x) {
            const int sx = x * prev_spec->width / img.width;
            for (int c = 0; c < 3; ++c) {
                double v = params_.rgb_bias[c];
                for (std::size_t h = 0; h < last_filters; ++h) {
                    v += params_.to_rgb[c * last_filters + h] *
                         prev[(h * prev_spec->height + sy) * prev_spec->width + sx];
                }
                img.at(y, x, c) = std::clamp(v, 0.0, 1.0);
            }
        }
    }
    return ForwardResult{std::move(img), std::move(bundle)};
}

} // namespace fsteer
