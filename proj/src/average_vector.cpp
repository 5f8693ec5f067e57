#include "fsteer/average_vector.hpp"

#include <fstream>

#include <fmt/format.h>

#include "fsteer/direction.hpp"
#include "fsteer/error.hpp"

namespace fsteer {

namespace fs = std::filesystem;

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::int64_t derive_seed(std::uint64_t base, std::uint64_t index) {
    // keep seeds non-negative so they survive JSON and CLI round trips unchanged
    return static_cast<std::int64_t>(splitmix64(splitmix64(base) ^ index) >> 1);
}

BundleSampler adapter_sampler(const GeneratorAdapter& adapter) {
    return [&adapter](std::int64_t seed) { return adapter.sample(seed).bundle; };
}

FilterVector compute_average_vector(const BundleSampler& sampler, std::size_t n, std::uint64_t sampler_seed) {
    if (n == 0) {
        throw ArgumentError("average vector needs at least one sample");
    }
    std::vector<double> mean;
    LayoutPtr layout;
    for (std::size_t i = 0; i < n; ++i) {
        FilterVector v;
        try {
            const auto bundle = sampler(derive_seed(sampler_seed, i));
            v = layout ? extract_filter_vector(bundle, layout) : extract_filter_vector(bundle);
        } catch (const std::exception& e) {
            throw SampleError(i, e.what());
        }
        if (!layout) {
            layout = v.layout;
            mean = std::move(v.values);
            continue;
        }
        const double k = static_cast<double>(i + 1);
        for (std::size_t j = 0; j < mean.size(); ++j) {
            mean[j] += (v.values[j] - mean[j]) / k;
        }
    }
    return FilterVector::make(layout, std::move(mean));
}

nlohmann::json filter_vector_to_json(const FilterVector& v, const std::string& model_hash) {
    return {{"model_hash", model_hash}, {"layout_digest", v.layout->digest()}, {"values", v.values}};
}

FilterVector filter_vector_from_json(const nlohmann::json& j, const LayoutPtr& layout) {
    if (j.at("layout_digest").get<std::string>() != layout->digest()) {
        throw StructuralError("filter vector layout digest does not match the model");
    }
    return FilterVector::make(layout, j.at("values").get<std::vector<double>>());
}

AverageVectorCache::AverageVectorCache(fs::path dir) : dir_(std::move(dir)) {}

fs::path AverageVectorCache::path_for(const std::string& model_hash, std::size_t n, std::uint64_t seed) const {
    return dir_ / fmt::format("avg-{}-n{}-s{}.json", model_hash.substr(0, 16), n, seed);
}

std::optional<FilterVector> AverageVectorCache::lookup(const GeneratorAdapter& adapter, std::size_t n,
                                                       std::uint64_t seed) const {
    const auto p = path_for(adapter.model_hash(), n, seed);
    std::ifstream in(p);
    if (!in) return std::nullopt;
    try {
        const auto j = nlohmann::json::parse(in);
        if (j.at("model_hash").get<std::string>() != adapter.model_hash() || j.at("n").get<std::size_t>() != n ||
            j.at("seed").get<std::uint64_t>() != seed) {
            return std::nullopt;
        }
        return filter_vector_from_json(j, adapter.layout());
    } catch (const std::exception&) {
        // unreadable entries are recomputed
        return std::nullopt;
    }
}

FilterVector AverageVectorCache::get_or_compute(const GeneratorAdapter& adapter, std::size_t n, std::uint64_t seed) {
    if (auto hit = lookup(adapter, n, seed)) return *hit;
    auto v = compute_average_vector(adapter_sampler(adapter), n, seed);
    ++computations_;
    fs::create_directories(dir_);
    auto j = filter_vector_to_json(v, adapter.model_hash());
    j["n"] = n;
    j["seed"] = seed;
    const auto p = path_for(adapter.model_hash(), n, seed);
    const auto tmp = fs::path(p).concat(".tmp");
    {
        std::ofstream out(tmp, std::ios::trunc);
        out << j.dump() << "\n";
    }
    fs::rename(tmp, p);
    return v;
}

} // namespace fsteer
