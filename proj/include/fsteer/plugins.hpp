#pragma once

#include <memory>
#include <string>
#include <vector>

#include "json.hpp"

#include "fsteer/eval.hpp"

namespace fsteer::plugins {

// Passes iff |applied strength| <= threshold. Reads the strength recorded in
// the image metadata, so it behaves analytically regardless of the pixels.
class StrengthThresholdDetector final : public DetectorInterface {
public:
    explicit StrengthThresholdDetector(double threshold) : threshold_(threshold) {}
    std::string id() const override { return "strength-threshold"; }
    bool detect(const GeneratedImage& image) const override;

private:
    double threshold_;
};

// Subject counts as present while at most `max_fraction` of the pixels have a
// saturated channel (exactly 0 or 1).
class SaturationDetector final : public DetectorInterface {
public:
    explicit SaturationDetector(double max_fraction = 0.10) : max_fraction_(max_fraction) {}
    std::string id() const override { return "toy-saturation"; }
    bool detect(const GeneratedImage& image) const override;

private:
    double max_fraction_;
};

// Average-pooled RGB over cell x cell blocks, flattened.
class PooledEmbedder final : public EmbeddingInterface {
public:
    PooledEmbedder(int resolution = 16, int cell = 4) : resolution_(resolution), cell_(cell) {}
    std::string id() const override { return "toy-pooled-embedder"; }
    std::size_t dimension() const override;
    std::vector<double> embed(const GeneratedImage& image) const override;

private:
    int resolution_;
    int cell_;
};

// Two binary attributes per last-layer region of the toy generator:
// region<i>_warm (mean R - B above 0.15) and region<i>_bright (mean channel above 0.7).
class RegionAttributeClassifier final : public AttributeClassifierInterface {
public:
    RegionAttributeClassifier();
    std::string id() const override { return "toy-region-classifier"; }
    const std::vector<std::string>& attribute_names() const override { return names_; }
    std::vector<bool> classify(const GeneratedImage& image) const override;

    static constexpr double kWarmThreshold = 0.15;
    static constexpr double kBrightThreshold = 0.7;

private:
    std::vector<std::string> names_;
};

// Result of running a child process to completion.
struct ProcessResult {
    int exit_code = -1;
    std::string stdout_text;
};

ProcessResult run_process(const std::vector<std::string>& argv, const std::vector<unsigned char>& stdin_bytes);

// External plugin protocol. `<cmd> capabilities` prints a JSON record
// {"id", "capability": "detect"|"embed"|"classify", "dimension"?, "attributes"?};
// `<cmd> run` reads one binary PPM image on stdin and prints one JSON result
// ({"present": bool} | {"embedding": [..]} | {"attributes": [bool, ..]}).
class ExternalPlugin {
public:
    explicit ExternalPlugin(std::string command);

    const nlohmann::json& capabilities() const { return caps_; }
    std::string id() const { return caps_.at("id").get<std::string>(); }
    nlohmann::json run(const GeneratedImage& image) const;

private:
    std::string command_;
    nlohmann::json caps_;
};

class ExternalDetector final : public DetectorInterface {
public:
    explicit ExternalDetector(std::string command);
    std::string id() const override { return plugin_.id(); }
    bool detect(const GeneratedImage& image) const override;

private:
    ExternalPlugin plugin_;
};

class ExternalEmbedder final : public EmbeddingInterface {
public:
    explicit ExternalEmbedder(std::string command);
    std::string id() const override { return plugin_.id(); }
    std::size_t dimension() const override { return dimension_; }
    std::vector<double> embed(const GeneratedImage& image) const override;

private:
    ExternalPlugin plugin_;
    std::size_t dimension_ = 0;
};

class ExternalClassifier final : public AttributeClassifierInterface {
public:
    explicit ExternalClassifier(std::string command);
    std::string id() const override { return plugin_.id(); }
    const std::vector<std::string>& attribute_names() const override { return names_; }
    std::vector<bool> classify(const GeneratedImage& image) const override;

private:
    ExternalPlugin plugin_;
    std::vector<std::string> names_;
};

// Specs: "builtin:<name>[:<arg>]" or a path to an executable speaking the
// external protocol. Builtins: strength-threshold:<t>, toy-saturation[:<frac>],
// toy-pooled-embedder, toy-region-classifier.
std::unique_ptr<DetectorInterface> make_detector(const std::string& spec);
std::unique_ptr<EmbeddingInterface> make_embedder(const std::string& spec);
std::unique_ptr<AttributeClassifierInterface> make_classifier(const std::string& spec);

// Resolves a target attribute given as an index or a name.
std::size_t resolve_attribute(const AttributeClassifierInterface& classifier, const std::string& target);

} // namespace fsteer::plugins
