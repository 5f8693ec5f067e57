#include "fsteer/config.hpp"

#include <cstdlib>
#include <fstream>

#include <fmt/format.h>

#include "fsteer/error.hpp"
#include "fsteer/model_package.hpp"
#include "fsteer/toy_generator.hpp"

namespace fsteer {

ServiceConfig ServiceConfig::from_json(const nlohmann::json& j) {
    ServiceConfig c;
    try {
        c.model = j.value("model", c.model);
        c.host = j.value("host", c.host);
        c.port = j.value("port", c.port);
        c.cache_dir = j.value("cache_dir", c.cache_dir.string());
        c.data_dir = j.value("data_dir", c.data_dir.string());
        c.average_samples = j.value("average_samples", c.average_samples);
        c.average_seed = j.value("average_seed", c.average_seed);
        c.test_images = j.value("test_images", c.test_images);
        c.test_image_seed = j.value("test_image_seed", c.test_image_seed);
        c.default_strength = j.value("default_strength", c.default_strength);
        c.thumbnail_factor = j.value("thumbnail_factor", c.thumbnail_factor);
        if (j.contains("weights")) {
            const auto& w = j.at("weights");
            c.weights.step = w.value("step", c.weights.step);
            c.weights.min = w.value("min", c.weights.min);
            c.weights.max = w.value("max", c.weights.max);
        }
        if (j.contains("plugins")) {
            const auto& p = j.at("plugins");
            c.plugin_detector = p.value("detector", c.plugin_detector);
            c.plugin_embedder = p.value("embedder", c.plugin_embedder);
            c.plugin_classifier = p.value("classifier", c.plugin_classifier);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ArgumentError(fmt::format("bad configuration: {}", e.what()));
    }
    if (c.average_samples == 0) throw ArgumentError("average_samples must be positive");
    if (c.test_images < 0) throw ArgumentError("test_images must not be negative");
    if (!(c.weights.min > 0.0) || c.weights.max < c.weights.min || !(c.weights.step > 0.0)) {
        throw ArgumentError("weights need 0 < min <= max and step > 0");
    }
    return c;
}

nlohmann::json ServiceConfig::to_json() const {
    return {{"model", model},
            {"host", host},
            {"port", port},
            {"cache_dir", cache_dir.string()},
            {"data_dir", data_dir.string()},
            {"average_samples", average_samples},
            {"average_seed", average_seed},
            {"test_images", test_images},
            {"test_image_seed", test_image_seed},
            {"default_strength", default_strength},
            {"thumbnail_factor", thumbnail_factor},
            {"weights", {{"step", weights.step}, {"min", weights.min}, {"max", weights.max}}},
            {"plugins", {{"detector", plugin_detector}, {"embedder", plugin_embedder}, {"classifier", plugin_classifier}}}};
}

EnvLookup process_env() {
    return [](const std::string& name) -> std::optional<std::string> {
        if (const char* v = std::getenv(name.c_str())) return std::string(v);
        return std::nullopt;
    };
}

ServiceConfig load_config(const std::optional<std::filesystem::path>& path, const EnvLookup& env) {
    nlohmann::json j = nlohmann::json::object();
    if (path) {
        std::ifstream in(*path);
        if (!in) throw NotFoundError(fmt::format("cannot open config {}", path->string()));
        try {
            j = nlohmann::json::parse(in);
        } catch (const nlohmann::json::parse_error&) {
            throw ArgumentError(fmt::format("config {} is not valid JSON", path->string()));
        }
    }
    auto set = [&](const char* var, auto apply) {
        if (auto v = env(var)) apply(*v);
    };
    set("FSTEER_MODEL", [&](const std::string& v) { j["model"] = v; });
    set("FSTEER_HOST", [&](const std::string& v) { j["host"] = v; });
    set("FSTEER_PORT", [&](const std::string& v) {
        try {
            j["port"] = std::stoi(v);
        } catch (const std::logic_error&) {
            throw ArgumentError("FSTEER_PORT is not a number");
        }
    });
    set("FSTEER_CACHE_DIR", [&](const std::string& v) { j["cache_dir"] = v; });
    set("FSTEER_DATA_DIR", [&](const std::string& v) { j["data_dir"] = v; });
    set("FSTEER_AVERAGE_SAMPLES", [&](const std::string& v) {
        try {
            j["average_samples"] = std::stoull(v);
        } catch (const std::logic_error&) {
            throw ArgumentError("FSTEER_AVERAGE_SAMPLES is not a number");
        }
    });
    set("FSTEER_PLUGIN_DETECTOR", [&](const std::string& v) { j["plugins"]["detector"] = v; });
    set("FSTEER_PLUGIN_EMBEDDER", [&](const std::string& v) { j["plugins"]["embedder"] = v; });
    set("FSTEER_PLUGIN_CLASSIFIER", [&](const std::string& v) { j["plugins"]["classifier"] = v; });
    return ServiceConfig::from_json(j);
}

std::shared_ptr<GeneratorAdapter> load_generator(const std::string& spec) {
    if (spec == "builtin:toy") return toy::make_generator();
    return load_model_package(spec);
}

} // namespace fsteer
