#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "fsteer/direction.hpp"
#include "fsteer/generator.hpp"

namespace fsteer {

enum class MaskMode { off, preserve, discard };

std::string_view to_string(MaskMode m);
MaskMode mask_mode_from_string(std::string_view s);
// off -> preserve -> discard -> off
MaskMode next_mode(MaskMode m);

// Brush input in image pixel coordinates (x = column, y = row).
struct Stroke {
    struct Point {
        double x = 0.0;
        double y = 0.0;
    };
    std::vector<Point> polyline;
    double radius = 1.0;
};

struct Mask {
    std::string id;
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> grid; // row-major, 0 or 1
    MaskMode mode = MaskMode::off;
    std::int64_t created_from = 0;
    std::optional<Stroke> stroke;

    // Rejects empty masks and grids of the wrong size.
    static Mask make(std::string id, Resolution res, std::vector<std::uint8_t> grid, MaskMode mode,
                     std::int64_t created_from);

    bool at(int y, int x) const { return grid[static_cast<std::size_t>(y) * width + x] != 0; }
    std::size_t set_count() const;
};

// Round brush: a pixel is set when its centre lies within `radius` of the polyline.
Mask rasterize_stroke(std::string id, const Stroke& stroke, Resolution res, std::int64_t created_from);

// Wire format: id, mode, resolution, created_from, run-length-encoded rows
// ([row, [[start, length], ...]] for every row with set pixels), stroke.
nlohmann::json mask_to_wire(const Mask& m);
Mask mask_from_wire(const nlohmann::json& j);

// Area-average pooling: each cell holds the covered fraction of set pixels.
std::vector<double> downscale_mask(const Mask& mask, int height, int width);

struct MaskImportance {
    std::string mask_id;
    std::vector<double> scores; // one per filter, in [0, 1]
    double epsilon = 1e-8;
};

inline constexpr double kImportanceEpsilon = 1e-8;

// raw_f = sum |A_f| * m / (sum |A_f| + eps) with m the mask pooled to the
// layer's grid; scores are raw / max(raw) within each layer.
MaskImportance filter_importance(const Mask& mask, const FeatureMapBundle& bundle,
                                 double epsilon = kImportanceEpsilon);
// Averages raw overlaps over several images before per-layer normalization.
MaskImportance filter_importance(const Mask& mask, std::span<const FeatureMapBundle> bundles,
                                 double epsilon = kImportanceEpsilon);
// Pre-normalization overlaps for one bundle.
std::vector<double> raw_overlap(const Mask& mask, const FeatureMapBundle& bundle, double epsilon = kImportanceEpsilon);

struct ActiveMask {
    MaskImportance importance;
    MaskMode mode = MaskMode::preserve;
};

// d'_f = d_f * prod_preserve s_f * prod_discard (1 - s_f), then re-normalized.
// An empty list returns d unchanged.
DirectionVector apply_mask_modes(const DirectionVector& d, std::span<const ActiveMask> masks);

Mask cycle_mask_mode(const Mask& mask);

} // namespace fsteer
