#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "fsteer/generator.hpp"

namespace fsteer {

// One layer of a gated pointwise generator. Filter f at position p computes
//   pre_f(p) = support_f(p) * (amplitude_f * tanh(<latent_proj_f, z> + spatial_bias_f(p))
//                              + sum_g mix[f][g] * prev_g(up(p)))
// where prev_g is the previous layer's gated activation, sampled by
// nearest-neighbour upsampling. Edits add a per-filter offset to pre_f, and
// the next layer consumes support_f * (pre_f + offset_f).
struct FilterNetLayer {
    LayerSpec spec;
    std::vector<double> latent_proj;  // filter_count x latent_dim
    std::vector<double> spatial_bias; // filter_count x height x width
    std::vector<double> support;      // filter_count x height x width
    std::vector<double> amplitude;    // filter_count
    std::vector<double> mix;          // filter_count x previous filter_count; empty for layer 0
};

struct FilterNetParams {
    int latent_dim = 0;
    Resolution resolution;
    std::vector<FilterNetLayer> layers;
    std::vector<double> to_rgb; // 3 x last filter_count
    std::array<double, 3> rgb_bias{0.0, 0.0, 0.0};

    // Throws StructuralError describing the first inconsistent tensor.
    void validate() const;
    FilterLayout layout() const;
};

// Standard-normal latent of length n, fully determined by the seed.
LatentCode sample_latent(std::int64_t seed, int n);

class FilterNetGenerator final : public GeneratorAdapter {
public:
    // model_hash defaults to the hash of the serialized weights.
    explicit FilterNetGenerator(FilterNetParams params, std::string model_hash = {});

    const LayoutPtr& layout() const override { return layout_; }
    int latent_dim() const override { return params_.latent_dim; }
    Resolution resolution() const override { return params_.resolution; }
    const std::string& model_hash() const override { return model_hash_; }
    LatentCode latent(std::int64_t seed) const override;

    const FilterNetParams& params() const { return params_; }

protected:
    ForwardResult forward_impl(const LatentCode& z, const std::vector<double>& offsets) const override;

private:
    FilterNetParams params_;
    LayoutPtr layout_;
    std::string model_hash_;
};

} // namespace fsteer
