#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>

#include "json.hpp"

#include "fsteer/direction.hpp"
#include "fsteer/generator.hpp"

namespace fsteer {

struct ServiceConfig {
    // "builtin:toy" or a model package directory.
    std::string model = "builtin:toy";
    std::string host = "127.0.0.1";
    int port = 8080;
    std::filesystem::path cache_dir = "fsteer-cache";
    std::filesystem::path data_dir = "fsteer-data";
    std::size_t average_samples = 10000;
    std::uint64_t average_seed = 0;
    int test_images = 4;
    std::uint64_t test_image_seed = 7;
    double default_strength = 1.0;
    int thumbnail_factor = 2;
    WeightConfig weights;
    std::string plugin_detector = "builtin:toy-saturation";
    std::string plugin_embedder = "builtin:toy-pooled-embedder";
    std::string plugin_classifier = "builtin:toy-region-classifier";

    static ServiceConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

// Reads `path` (JSON) when given, then applies FSTEER_* environment overrides:
// MODEL, HOST, PORT, CACHE_DIR, DATA_DIR, AVERAGE_SAMPLES, PLUGIN_DETECTOR,
// PLUGIN_EMBEDDER, PLUGIN_CLASSIFIER.
ServiceConfig load_config(const std::optional<std::filesystem::path>& path, const EnvLookup& env);
EnvLookup process_env();

// "builtin:toy" yields the synthetic generator; anything else is a package path.
std::shared_ptr<GeneratorAdapter> load_generator(const std::string& spec);

} // namespace fsteer
