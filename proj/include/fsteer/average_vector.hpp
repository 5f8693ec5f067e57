#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>

#include "fsteer/filter_space.hpp"
#include "fsteer/generator.hpp"

namespace fsteer {

inline constexpr std::size_t kDefaultAverageSamples = 10000;

// splitmix64 step; used to derive independent per-sample seeds.
std::uint64_t splitmix64(std::uint64_t x);
std::int64_t derive_seed(std::uint64_t base, std::uint64_t index);

using BundleSampler = std::function<FeatureMapBundle(std::int64_t seed)>;

BundleSampler adapter_sampler(const GeneratorAdapter& adapter);

// Mean filter vector over n samples drawn at derive_seed(sampler_seed, i),
// accumulated as a running mean in index order.
FilterVector compute_average_vector(const BundleSampler& sampler, std::size_t n, std::uint64_t sampler_seed);

// On-disk cache keyed by (model hash, n, sampler seed).
class AverageVectorCache {
public:
    explicit AverageVectorCache(std::filesystem::path dir);

    std::filesystem::path path_for(const std::string& model_hash, std::size_t n, std::uint64_t seed) const;
    std::optional<FilterVector> lookup(const GeneratorAdapter& adapter, std::size_t n, std::uint64_t seed) const;
    FilterVector get_or_compute(const GeneratorAdapter& adapter, std::size_t n, std::uint64_t seed);

    // Number of cache misses served by this instance.
    std::size_t computations() const { return computations_; }

private:
    std::filesystem::path dir_;
    std::size_t computations_ = 0;
};

nlohmann::json filter_vector_to_json(const FilterVector& v, const std::string& model_hash);
FilterVector filter_vector_from_json(const nlohmann::json& j, const LayoutPtr& layout);

} // namespace fsteer
