#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace fsteer {

struct LayerSpec {
    std::string id;
    int filter_count = 0;
    int height = 0;
    int width = 0;

    std::size_t plane_size() const { return static_cast<std::size_t>(height) * width; }
    std::size_t size() const { return plane_size() * filter_count; }

    bool operator==(const LayerSpec&) const = default;
};

// Canonical per-filter coordinate system of a generator. One coordinate per
// convolutional filter, layers concatenated in declaration order.
class FilterLayout {
public:
    explicit FilterLayout(std::vector<LayerSpec> layers);

    const std::vector<LayerSpec>& layers() const { return layers_; }
    std::size_t layer_count() const { return layers_.size(); }
    const LayerSpec& layer(std::size_t i) const { return layers_.at(i); }

    std::size_t total_dims() const { return total_dims_; }
    // First coordinate of layer i in the concatenated vector.
    std::size_t offset(std::size_t i) const { return offsets_.at(i); }
    // Throws StructuralError for an unknown id.
    std::size_t index_of(const std::string& layer_id) const;

    // sha256 over the canonical textual form; stable across processes.
    const std::string& digest() const { return digest_; }

    nlohmann::json to_json() const;
    static FilterLayout from_json(const nlohmann::json& j);

    bool operator==(const FilterLayout& other) const { return layers_ == other.layers_; }

private:
    std::vector<LayerSpec> layers_;
    std::vector<std::size_t> offsets_;
    std::size_t total_dims_ = 0;
    std::string digest_;
};

using LayoutPtr = std::shared_ptr<const FilterLayout>;

bool same_layout(const LayoutPtr& a, const LayoutPtr& b);
// Throws StructuralError naming `what` when the layouts differ.
void require_same_layout(const LayoutPtr& a, const LayoutPtr& b, const std::string& what);

// Spatial means of every filter's activation map for one image.
struct FilterVector {
    LayoutPtr layout;
    std::vector<double> values;

    // Validates length and finiteness.
    static FilterVector make(LayoutPtr layout, std::vector<double> values);
};

// Per-layer activations (filter-major, then row, then column) of one forward pass.
class FeatureMapBundle {
public:
    FeatureMapBundle() = default;
    explicit FeatureMapBundle(LayoutPtr layout);
    FeatureMapBundle(LayoutPtr layout, std::vector<std::vector<double>> maps);

    const LayoutPtr& layout() const { return layout_; }
    std::size_t layer_count() const { return maps_.size(); }

    std::span<const double> layer(std::size_t i) const { return maps_.at(i); }
    std::span<double> layer(std::size_t i) { return maps_.at(i); }
    std::span<const double> plane(std::size_t layer, int filter) const;

    double at(std::size_t layer, int filter, int y, int x) const;
    double& at(std::size_t layer, int filter, int y, int x);

    bool operator==(const FeatureMapBundle& other) const { return maps_ == other.maps_; }

private:
    LayoutPtr layout_;
    std::vector<std::vector<double>> maps_;
};

} // namespace fsteer
