#include "fsteer/mask.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "fsteer/error.hpp"

namespace fsteer {

std::string_view to_string(MaskMode m) {
    switch (m) {
    case MaskMode::off: return "off";
    case MaskMode::preserve: return "preserve";
    case MaskMode::discard: return "discard";
    }
    return "off";
}

MaskMode mask_mode_from_string(std::string_view s) {
    if (s == "off") return MaskMode::off;
    if (s == "preserve") return MaskMode::preserve;
    if (s == "discard") return MaskMode::discard;
    throw ArgumentError(fmt::format("unknown mask mode '{}'", s));
}

MaskMode next_mode(MaskMode m) {
    switch (m) {
    case MaskMode::off: return MaskMode::preserve;
    case MaskMode::preserve: return MaskMode::discard;
    case MaskMode::discard: return MaskMode::off;
    }
    return MaskMode::off;
}

Mask Mask::make(std::string id, Resolution res, std::vector<std::uint8_t> grid, MaskMode mode,
                std::int64_t created_from) {
    if (res.height <= 0 || res.width <= 0) {
        throw ArgumentError("mask resolution must be positive");
    }
    if (grid.size() != static_cast<std::size_t>(res.height) * res.width) {
        throw StructuralError(fmt::format("mask '{}' grid has {} cells, expected {}x{}", id, grid.size(), res.height,
                                          res.width));
    }
    for (auto& c : grid) c = c != 0 ? 1 : 0;
    if (std::none_of(grid.begin(), grid.end(), [](std::uint8_t c) { return c != 0; })) {
        throw ArgumentError(fmt::format("mask '{}' has no set pixels", id));
    }
    Mask m;
    m.id = std::move(id);
    m.height = res.height;
    m.width = res.width;
    m.grid = std::move(grid);
    m.mode = mode;
    m.created_from = created_from;
    return m;
}

std::size_t Mask::set_count() const {
    return static_cast<std::size_t>(std::count(grid.begin(), grid.end(), std::uint8_t{1}));
}

Mask rasterize_stroke(std::string id, const Stroke& stroke, Resolution res, std::int64_t created_from) {
    if (stroke.polyline.empty()) {
        throw ArgumentError("stroke has no points");
    }
    if (!(stroke.radius >= 0.0) || !std::isfinite(stroke.radius)) {
        throw ArgumentError("stroke radius must be a finite non-negative number");
    }
    const double r2 = stroke.radius * stroke.radius;
    std::vector<std::uint8_t> grid(static_cast<std::size_t>(res.height) * res.width, 0);

    auto dist2_to_segment = [](double px, double py, Stroke::Point a, Stroke::Point b) {
        const double dx = b.x - a.x;
        const double dy = b.y - a.y;
        const double len2 = dx * dx + dy * dy;
        double t = 0.0;
        if (len2 > 0.0) t = std::clamp(((px - a.x) * dx + (py - a.y) * dy) / len2, 0.0, 1.0);
        const double qx = a.x + t * dx - px;
        const double qy = a.y + t * dy - py;
        return qx * qx + qy * qy;
    };

    for (int y = 0; y < res.height; ++y) {
        for (int x = 0; x < res.width; ++x) {
            const double cx = x + 0.5;
            const double cy = y + 0.5;
            bool hit = false;
            if (stroke.polyline.size() == 1) {
                hit = dist2_to_segment(cx, cy, stroke.polyline[0], stroke.polyline[0]) <= r2;
            }
            for (std::size_t i = 1; !hit && i < stroke.polyline.size(); ++i) {
                hit = dist2_to_segment(cx, cy, stroke.polyline[i - 1], stroke.polyline[i]) <= r2;
            }
            if (hit) grid[static_cast<std::size_t>(y) * res.width + x] = 1;
        }
    }
    auto m = Mask::make(std::move(id), res, std::move(grid), MaskMode::off, created_from);
    m.stroke = stroke;
    return m;
}

nlohmann::json mask_to_wire(const Mask& m) {
    auto rows = nlohmann::json::array();
    for (int y = 0; y < m.height; ++y) {
        auto runs = nlohmann::json::array();
        int x = 0;
        while (x < m.width) {
            if (!m.at(y, x)) {
                ++x;
                continue;
            }
            const int start = x;
            while (x < m.width && m.at(y, x)) ++x;
            runs.push_back({start, x - start});
        }
        if (!runs.empty()) rows.push_back({y, std::move(runs)});
    }
    nlohmann::json j = {{"id", m.id},
                        {"mode", std::string(to_string(m.mode))},
                        {"resolution", {m.height, m.width}},
                        {"created_from", m.created_from},
                        {"rows", std::move(rows)}};
    if (m.stroke) {
        auto pts = nlohmann::json::array();
        for (const auto& p : m.stroke->polyline) pts.push_back({p.x, p.y});
        j["stroke"] = {{"polyline", std::move(pts)}, {"radius", m.stroke->radius}};
    }
    return j;
}

Mask mask_from_wire(const nlohmann::json& j) {
    try {
        const auto res = j.at("resolution").get<std::vector<int>>();
        if (res.size() != 2 || res[0] <= 0 || res[1] <= 0) {
            throw ArgumentError("mask resolution must be [height, width]");
        }
        std::vector<std::uint8_t> grid(static_cast<std::size_t>(res[0]) * res[1], 0);
        for (const auto& row : j.at("rows")) {
            const int y = row.at(0).get<int>();
            if (y < 0 || y >= res[0]) throw ArgumentError(fmt::format("mask row {} out of range", y));
            for (const auto& run : row.at(1)) {
                const int start = run.at(0).get<int>();
                const int len = run.at(1).get<int>();
                if (start < 0 || len <= 0 || start + len > res[1]) {
                    throw ArgumentError(fmt::format("mask run [{}, {}] out of range in row {}", start, len, y));
                }
                std::fill_n(grid.begin() + static_cast<std::ptrdiff_t>(y) * res[1] + start, len, 1);
            }
        }
        auto m = Mask::make(j.at("id").get<std::string>(), {res[0], res[1]}, std::move(grid),
                            mask_mode_from_string(j.value("mode", "off")), j.value("created_from", std::int64_t{0}));
        if (j.contains("stroke")) {
            Stroke s;
            s.radius = j.at("stroke").at("radius").get<double>();
            for (const auto& p : j.at("stroke").at("polyline")) {
                s.polyline.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
            }
            m.stroke = std::move(s);
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw ArgumentError(fmt::format("malformed mask: {}", e.what()));
    }
}

std::vector<double> downscale_mask(const Mask& mask, int height, int width) {
    if (height <= 0 || width <= 0) {
        throw ArgumentError(fmt::format("cannot pool a mask to {}x{}", height, width));
    }
    // Coordinates are scaled so both pixel and cell edges are integers:
    // pixel y spans [y*h, (y+1)*h), cell i spans [i*H, (i+1)*H).
    const std::int64_t H = mask.height;
    const std::int64_t W = mask.width;
    const std::int64_t h = height;
    const std::int64_t w = width;
    auto overlap = [](std::int64_t a0, std::int64_t a1, std::int64_t b0, std::int64_t b1) {
        return std::max<std::int64_t>(0, std::min(a1, b1) - std::max(a0, b0));
    };

    std::vector<double> out(static_cast<std::size_t>(height) * width, 0.0);
    const double cell_area = static_cast<double>(H * W);
    for (std::int64_t i = 0; i < h; ++i) {
        const std::int64_t y_lo = (i * H) / h;
        const std::int64_t y_hi = std::min(H, ((i + 1) * H + h - 1) / h);
        for (std::int64_t j = 0; j < w; ++j) {
            const std::int64_t x_lo = (j * W) / w;
            const std::int64_t x_hi = std::min(W, ((j + 1) * W + w - 1) / w);
            std::int64_t covered = 0;
            for (std::int64_t y = y_lo; y < y_hi; ++y) {
                const std::int64_t oy = overlap(y * h, (y + 1) * h, i * H, (i + 1) * H);
                if (oy == 0) continue;
                for (std::int64_t x = x_lo; x < x_hi; ++x) {
                    if (!mask.at(static_cast<int>(y), static_cast<int>(x))) continue;
                    covered += oy * overlap(x * w, (x + 1) * w, j * W, (j + 1) * W);
                }
            }
            out[static_cast<std::size_t>(i * w + j)] = static_cast<double>(covered) / cell_area;
        }
    }
    return out;
}

std::vector<double> raw_overlap(const Mask& mask, const FeatureMapBundle& bundle, double epsilon) {
    const auto& layout = bundle.layout();
    if (!layout) {
        throw StructuralError("bundle has no layout");
    }
    std::vector<double> raw;
    raw.reserve(layout->total_dims());
    for (std::size_t l = 0; l < layout->layer_count(); ++l) {
        const auto& spec = layout->layer(l);
        const auto pooled = downscale_mask(mask, spec.height, spec.width);
        for (int f = 0; f < spec.filter_count; ++f) {
            const auto plane = bundle.plane(l, f);
            double inside = 0.0;
            double total = 0.0;
            for (std::size_t p = 0; p < plane.size(); ++p) {
                const double a = std::abs(plane[p]);
                inside += a * pooled[p];
                total += a;
            }
            raw.push_back(inside / (total + epsilon));
        }
    }
    return raw;
}

namespace {

std::vector<double> normalize_per_layer(std::vector<double> raw, const FilterLayout& layout) {
    for (std::size_t l = 0; l < layout.layer_count(); ++l) {
        const auto begin = raw.begin() + static_cast<std::ptrdiff_t>(layout.offset(l));
        const auto end = begin + layout.layer(l).filter_count;
        const double mx = *std::max_element(begin, end);
        for (auto it = begin; it != end; ++it) {
            *it = mx > 0.0 ? *it / mx : 0.0;
        }
    }
    return raw;
}

void check_mask_resolution(const Mask& mask, const FeatureMapBundle& bundle) {
    if (!bundle.layout()) throw StructuralError("bundle has no layout");
    if (mask.grid.size() != static_cast<std::size_t>(mask.height) * mask.width) {
        throw StructuralError(fmt::format("mask '{}' grid does not match its resolution", mask.id));
    }
}

} // namespace

MaskImportance filter_importance(const Mask& mask, const FeatureMapBundle& bundle, double epsilon) {
    check_mask_resolution(mask, bundle);
    return MaskImportance{mask.id, normalize_per_layer(raw_overlap(mask, bundle, epsilon), *bundle.layout()), epsilon};
}

MaskImportance filter_importance(const Mask& mask, std::span<const FeatureMapBundle> bundles, double epsilon) {
    if (bundles.empty()) {
        throw ArgumentError("importance needs at least one feature map bundle");
    }
    std::vector<double> sum;
    for (const auto& b : bundles) {
        check_mask_resolution(mask, b);
        require_same_layout(bundles.front().layout(), b.layout(), "importance bundles");
        const auto raw = raw_overlap(mask, b, epsilon);
        if (sum.empty()) sum.assign(raw.size(), 0.0);
        for (std::size_t i = 0; i < raw.size(); ++i) sum[i] += raw[i];
    }
    for (double& v : sum) v /= static_cast<double>(bundles.size());
    return MaskImportance{mask.id, normalize_per_layer(std::move(sum), *bundles.front().layout()), epsilon};
}

DirectionVector apply_mask_modes(const DirectionVector& d, std::span<const ActiveMask> masks) {
    if (masks.empty()) return d;
    std::vector<double> factor(d.values.size(), 1.0);
    for (const auto& m : masks) {
        if (m.importance.scores.size() != d.values.size()) {
            throw StructuralError(fmt::format("importance of mask '{}' has {} scores, direction has {}",
                                              m.importance.mask_id, m.importance.scores.size(), d.values.size()));
        }
        if (m.mode == MaskMode::off) {
            throw ArgumentError(fmt::format("mask '{}' is off and must not be applied", m.importance.mask_id));
        }
        for (std::size_t f = 0; f < factor.size(); ++f) {
            const double s = m.importance.scores[f];
            factor[f] *= m.mode == MaskMode::preserve ? s : 1.0 - s;
        }
    }
    DirectionVector out = d;
    for (std::size_t f = 0; f < factor.size(); ++f) out.values[f] *= factor[f];
    out = normalize(out);
    for (const auto& m : masks) {
        out.provenance.push_back(DisentangleAction{
            ActionKind::mask_apply, {{"mask_id", m.importance.mask_id}, {"mode", std::string(to_string(m.mode))}}, 0});
    }
    return out;
}

Mask cycle_mask_mode(const Mask& mask) {
    Mask out = mask;
    out.mode = next_mode(mask.mode);
    return out;
}

} // namespace fsteer
