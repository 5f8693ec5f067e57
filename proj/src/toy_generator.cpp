#include "fsteer/toy_generator.hpp"

#include <random>

#include "fsteer/error.hpp"

namespace fsteer::toy {

namespace {

struct LayerPlan {
    const char* id;
    int filters;
    int size;      // square feature map side
    int band_rows; // support tiling: rows of tiles
    int band_cols; // columns of tiles
    double amplitude;
};

// Layer 0 tiles the map into quadrants, layer 1 into 4x2 horizontal bands,
// layer 2 into 2x4 vertical bands.
constexpr LayerPlan kPlan[] = {
    {"conv0", 4, 4, 2, 2, 0.5},
    {"conv1", 8, 8, 4, 2, 0.4},
    {"conv2", 8, 16, 2, 4, 0.3},
};

// Columns: last-layer filters. Rows: R, G, B.
const std::vector<double> kColorMixing = {
    0.30, -0.05, -0.10, 0.25, 0.30, 0.05, 0.20, 0.15,  // R
    0.05, 0.30, 0.05, 0.20, -0.05, 0.25, -0.10, 0.15,  // G
    -0.10, 0.05, 0.30, -0.05, -0.10, 0.25, 0.25, 0.15, // B
};

SupportRegion region_of(const LayerPlan& p, int filter, int scale) {
    const int tile_h = p.size / p.band_rows;
    const int tile_w = p.size / p.band_cols;
    const int ty = filter / p.band_cols;
    const int tx = filter % p.band_cols;
    return SupportRegion{p.id, filter, ty * tile_h * scale, tx * tile_w * scale, (ty + 1) * tile_h * scale,
                         (tx + 1) * tile_w * scale};
}

} // namespace

FilterNetParams params() {
    std::mt19937_64 rng(kWeightSeed);
    auto uniform = [&rng](double lo, double hi) {
        return lo + (hi - lo) * static_cast<double>(rng() >> 11) * 0x1.0p-53;
    };

    FilterNetParams p;
    p.latent_dim = kLatentDim;
    p.resolution = {kResolution, kResolution};
    int prev_filters = 0;
    for (const auto& plan : kPlan) {
        FilterNetLayer layer;
        layer.spec = LayerSpec{plan.id, plan.filters, plan.size, plan.size};
        const std::size_t plane = layer.spec.plane_size();
        for (int f = 0; f < plan.filters; ++f) {
            for (int i = 0; i < kLatentDim; ++i) layer.latent_proj.push_back(uniform(-0.6, 0.6));
        }
        layer.spatial_bias.resize(plane * plan.filters);
        layer.support.assign(plane * plan.filters, 0.0);
        for (int f = 0; f < plan.filters; ++f) {
            const auto r = region_of(plan, f, 1);
            for (int y = 0; y < plan.size; ++y) {
                for (int x = 0; x < plan.size; ++x) {
                    const std::size_t idx = f * plane + static_cast<std::size_t>(y) * plan.size + x;
                    layer.spatial_bias[idx] = uniform(-0.5, 0.5);
                    if (r.contains(y, x)) layer.support[idx] = 1.0;
                }
            }
        }
        layer.amplitude.assign(static_cast<std::size_t>(plan.filters), plan.amplitude);
        if (prev_filters > 0) {
            for (int i = 0; i < plan.filters * prev_filters; ++i) layer.mix.push_back(uniform(-0.3, 0.3));
        }
        prev_filters = plan.filters;
        p.layers.push_back(std::move(layer));
    }
    p.to_rgb = kColorMixing;
    p.rgb_bias = {0.5, 0.5, 0.5};
    return p;
}

std::shared_ptr<FilterNetGenerator> make_generator() {
    return std::make_shared<FilterNetGenerator>(params());
}

std::vector<SupportRegion> support_table() {
    std::vector<SupportRegion> out;
    for (const auto& plan : kPlan) {
        const int scale = kResolution / plan.size;
        for (int f = 0; f < plan.filters; ++f) out.push_back(region_of(plan, f, scale));
    }
    return out;
}

const SupportRegion& support(const std::string& layer_id, int filter) {
    static const auto table = support_table();
    for (const auto& r : table) {
        if (r.layer_id == layer_id && r.filter == filter) return r;
    }
    throw ArgumentError("toy generator has no filter " + layer_id + "/" + std::to_string(filter));
}

nlohmann::json support_table_json() {
    auto arr = nlohmann::json::array();
    for (const auto& r : support_table()) {
        arr.push_back({{"layer", r.layer_id}, {"filter", r.filter}, {"y0", r.y0}, {"x0", r.x0}, {"y1", r.y1}, {"x1", r.x1}});
    }
    return arr;
}

const std::vector<double>& color_mixing() {
    return kColorMixing;
}

} // namespace fsteer::toy
