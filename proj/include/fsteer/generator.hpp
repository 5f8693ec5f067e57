#pragma once

#include <cstdint>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "fsteer/direction.hpp"
#include "fsteer/filter_space.hpp"

namespace fsteer {

struct LatentCode {
    std::vector<double> values;
    std::int64_t seed = 0;
};

struct Resolution {
    int height = 0;
    int width = 0;

    bool operator==(const Resolution&) const = default;
};

struct AppliedDirection {
    std::string name;
    double strength = 0.0;
};

// H x W x 3, interleaved RGB, every channel in [0, 1].
struct GeneratedImage {
    int height = 0;
    int width = 0;
    std::vector<double> pixels;
    std::int64_t source_seed = 0;
    std::optional<AppliedDirection> applied_direction;
    std::vector<std::string> warnings;

    double at(int y, int x, int c) const { return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
    double& at(int y, int x, int c) { return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }

    bool same_pixels(const GeneratedImage& o) const {
        return height == o.height && width == o.width && pixels == o.pixels;
    }
};

struct Sample {
    LatentCode latent;
    GeneratedImage image;
    FeatureMapBundle bundle;
};

struct ForwardResult {
    GeneratedImage image;
    FeatureMapBundle bundle;
};

// Uniform interface to a convolutional generator. Forward passes on one
// instance are serialized; distinct instances are independent.
class GeneratorAdapter {
public:
    virtual ~GeneratorAdapter() = default;

    virtual const LayoutPtr& layout() const = 0;
    virtual int latent_dim() const = 0;
    virtual Resolution resolution() const = 0;
    virtual const std::string& model_hash() const = 0;

    // Deterministic per seed.
    virtual LatentCode latent(std::int64_t seed) const = 0;

    Sample sample(std::int64_t seed) const;

    // Applies strength * normalize(d) as a uniform additive offset on every
    // hooked filter map; downstream layers are recomputed from the edited maps.
    // A zero direction renders the unedited image with a warning attached.
    GeneratedImage render_with_direction(const LatentCode& z, const DirectionVector& d, double strength) const;
    ForwardResult render_traced(const LatentCode& z, const DirectionVector& d, double strength) const;

    // Layers excluded from editing. All layers are hooked by default.
    void set_unhooked_layers(std::set<std::string> layer_ids);
    bool is_hooked(std::size_t layer) const;

protected:
    // offsets: one value per filter (layout.total_dims()), or empty for no edit.
    virtual ForwardResult forward_impl(const LatentCode& z, const std::vector<double>& offsets) const = 0;

private:
    ForwardResult forward(const LatentCode& z, const std::vector<double>& offsets) const;

    mutable std::mutex forward_mutex_;
    std::set<std::string> unhooked_;
};

// Splits a direction into per-filter offsets at the given strength,
// normalizing first. Returns the warnings produced along the way.
std::vector<std::string> direction_offsets(const DirectionVector& d, double strength,
                                           std::vector<double>& offsets);

} // namespace fsteer
