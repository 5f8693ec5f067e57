#include "fsteer/filter_space.hpp"

#include <cmath>
#include <set>

#include <fmt/format.h>

#include "fsteer/error.hpp"
#include "fsteer/hashing.hpp"

namespace fsteer {

FilterLayout::FilterLayout(std::vector<LayerSpec> layers) : layers_(std::move(layers)) {
    if (layers_.empty()) {
        throw StructuralError("filter layout needs at least one layer");
    }
    std::set<std::string> seen;
    std::string canonical;
    offsets_.reserve(layers_.size());
    for (const auto& l : layers_) {
        if (l.id.empty()) {
            throw StructuralError("layer id must not be empty");
        }
        if (!seen.insert(l.id).second) {
            throw StructuralError(fmt::format("duplicate layer id '{}'", l.id));
        }
        if (l.filter_count <= 0 || l.height <= 0 || l.width <= 0) {
            throw StructuralError(fmt::format("layer '{}' has non-positive dimensions", l.id));
        }
        offsets_.push_back(total_dims_);
        total_dims_ += static_cast<std::size_t>(l.filter_count);
        canonical += fmt::format("{}:{}:{}x{};", l.id, l.filter_count, l.height, l.width);
    }
    digest_ = sha256_hex(canonical);
}

std::size_t FilterLayout::index_of(const std::string& layer_id) const {
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        if (layers_[i].id == layer_id) return i;
    }
    throw StructuralError(fmt::format("unknown layer '{}'", layer_id));
}

nlohmann::json FilterLayout::to_json() const {
    auto arr = nlohmann::json::array();
    for (const auto& l : layers_) {
        arr.push_back({{"id", l.id}, {"filter_count", l.filter_count}, {"height", l.height}, {"width", l.width}});
    }
    return arr;
}

FilterLayout FilterLayout::from_json(const nlohmann::json& j) {
    if (!j.is_array()) {
        throw StructuralError("layer table must be an array");
    }
    std::vector<LayerSpec> layers;
    for (const auto& e : j) {
        LayerSpec l;
        l.id = e.at("id").get<std::string>();
        l.filter_count = e.at("filter_count").get<int>();
        l.height = e.at("height").get<int>();
        l.width = e.at("width").get<int>();
        layers.push_back(std::move(l));
    }
    return FilterLayout(std::move(layers));
}

bool same_layout(const LayoutPtr& a, const LayoutPtr& b) {
    if (a == b) return true;
    if (!a || !b) return false;
    return *a == *b;
}

void require_same_layout(const LayoutPtr& a, const LayoutPtr& b, const std::string& what) {
    if (same_layout(a, b)) return;
    if (!a || !b) {
        throw StructuralError(what + ": missing layout");
    }
    const auto n = std::min(a->layer_count(), b->layer_count());
    for (std::size_t i = 0; i < n; ++i) {
        if (!(a->layer(i) == b->layer(i))) {
            throw StructuralError(fmt::format("{}: layout mismatch at layer '{}' (expected '{}')", what,
                                              b->layer(i).id, a->layer(i).id));
        }
    }
    throw StructuralError(fmt::format("{}: layout mismatch, {} vs {} layers", what, a->layer_count(),
                                      b->layer_count()));
}

FilterVector FilterVector::make(LayoutPtr layout, std::vector<double> values) {
    if (!layout) {
        throw StructuralError("filter vector without layout");
    }
    if (values.size() != layout->total_dims()) {
        throw StructuralError(fmt::format("filter vector has {} values, layout needs {}", values.size(),
                                          layout->total_dims()));
    }
    for (double v : values) {
        if (!std::isfinite(v)) {
            throw NumericError("filter vector contains a non-finite value");
        }
    }
    return FilterVector{std::move(layout), std::move(values)};
}

FeatureMapBundle::FeatureMapBundle(LayoutPtr layout) : layout_(std::move(layout)) {
    maps_.reserve(layout_->layer_count());
    for (const auto& l : layout_->layers()) {
        maps_.emplace_back(l.size(), 0.0);
    }
}

FeatureMapBundle::FeatureMapBundle(LayoutPtr layout, std::vector<std::vector<double>> maps)
    : layout_(std::move(layout)), maps_(std::move(maps)) {
    if (maps_.size() != layout_->layer_count()) {
        throw StructuralError(fmt::format("bundle has {} layers, layout declares {}", maps_.size(),
                                          layout_->layer_count()));
    }
    for (std::size_t i = 0; i < maps_.size(); ++i) {
        if (maps_[i].size() != layout_->layer(i).size()) {
            throw StructuralError(fmt::format("bundle layer '{}' has {} values, expected {}",
                                              layout_->layer(i).id, maps_[i].size(),
                                              layout_->layer(i).size()));
        }
    }
}

std::span<const double> FeatureMapBundle::plane(std::size_t layer, int filter) const {
    const auto& spec = layout_->layer(layer);
    return std::span<const double>(maps_.at(layer)).subspan(spec.plane_size() * filter, spec.plane_size());
}

double FeatureMapBundle::at(std::size_t layer, int filter, int y, int x) const {
    const auto& spec = layout_->layer(layer);
    return maps_[layer][(static_cast<std::size_t>(filter) * spec.height + y) * spec.width + x];
}

double& FeatureMapBundle::at(std::size_t layer, int filter, int y, int x) {
    const auto& spec = layout_->layer(layer);
    return maps_[layer][(static_cast<std::size_t>(filter) * spec.height + y) * spec.width + x];
}

} // namespace fsteer
