#pragma once

#include <memory>
#include <string>
#include <vector>

#include "json.hpp"

#include "fsteer/filter_net.hpp"

namespace fsteer::toy {

// Three layers (4 filters @4x4, 8 @8x8, 8 @16x16), 16x16 output, latent size 8.
// Filters in a layer have disjoint rectangular supports that tile the image,
// so an edit on any filter only changes pixels inside that filter's region.
inline constexpr int kLatentDim = 8;
inline constexpr int kResolution = 16;
inline constexpr std::uint64_t kWeightSeed = 0x5eedf11e;

// Half-open rectangle [y0, y1) x [x0, x1) in image pixels.
struct SupportRegion {
    std::string layer_id;
    int filter = 0;
    int y0 = 0;
    int x0 = 0;
    int y1 = 0;
    int x1 = 0;

    bool contains(int y, int x) const { return y >= y0 && y < y1 && x >= x0 && x < x1; }
    int area() const { return (y1 - y0) * (x1 - x0); }
};

FilterNetParams params();
std::shared_ptr<FilterNetGenerator> make_generator();

std::vector<SupportRegion> support_table();
const SupportRegion& support(const std::string& layer_id, int filter);
nlohmann::json support_table_json();

// The mixing matrix from the last layer's filters to RGB (3 x 8, row-major).
const std::vector<double>& color_mixing();

} // namespace fsteer::toy
