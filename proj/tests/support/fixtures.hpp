#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <unistd.h>

#include "fsteer/config.hpp"
#include "fsteer/direction.hpp"
#include "fsteer/filter_space.hpp"
#include "fsteer/toy_generator.hpp"

namespace fixture {

namespace fs = std::filesystem;

// Directory removed on scope exit.
class TempDir {
public:
    explicit TempDir(const std::string& tag = "t") {
        static std::atomic<int> counter{0};
        path_ = fs::temp_directory_path() /
                ("fsteer-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& s) const { return path_ / s; }

private:
    fs::path path_;
};

inline std::shared_ptr<fsteer::FilterNetGenerator> toy() {
    static auto gen = fsteer::toy::make_generator();
    return gen;
}

inline fsteer::LayoutPtr random_layout(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> layers(1, 3), filters(1, 5), side(1, 9);
    std::vector<fsteer::LayerSpec> specs;
    const int n = layers(rng);
    for (int i = 0; i < n; ++i) specs.push_back({"l" + std::to_string(i), filters(rng), side(rng), side(rng)});
    return std::make_shared<const fsteer::FilterLayout>(std::move(specs));
}

inline fsteer::FeatureMapBundle random_bundle(std::mt19937_64& rng, const fsteer::LayoutPtr& layout) {
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    std::bernoulli_distribution zero(0.1);
    fsteer::FeatureMapBundle b(layout);
    for (std::size_t l = 0; l < layout->layer_count(); ++l) {
        for (double& v : b.layer(l)) v = zero(rng) ? 0.0 : u(rng);
    }
    return b;
}

inline fsteer::FilterVector random_vector(std::mt19937_64& rng, const fsteer::LayoutPtr& layout) {
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    std::vector<double> v(layout->total_dims());
    for (double& x : v) x = u(rng);
    return fsteer::FilterVector::make(layout, std::move(v));
}

// Service configuration rooted in a temp dir with a small average sample count.
inline fsteer::ServiceConfig service_config(const fs::path& root) {
    fsteer::ServiceConfig c;
    c.cache_dir = root / "cache";
    c.data_dir = root / "data";
    c.average_samples = 64;
    return c;
}

inline std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

} // namespace fixture
