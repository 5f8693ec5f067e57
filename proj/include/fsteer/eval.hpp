#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "fsteer/direction.hpp"
#include "fsteer/generator.hpp"

namespace fsteer {

// Plugins are deterministic per image. id() identifies the underlying model;
// evaluation refuses to use one model for both calibration and identity.
class DetectorInterface {
public:
    virtual ~DetectorInterface() = default;
    virtual std::string id() const = 0;
    // True while the subject is still present.
    virtual bool detect(const GeneratedImage& image) const = 0;
};

class EmbeddingInterface {
public:
    virtual ~EmbeddingInterface() = default;
    virtual std::string id() const = 0;
    virtual std::size_t dimension() const = 0;
    virtual std::vector<double> embed(const GeneratedImage& image) const = 0;
};

class AttributeClassifierInterface {
public:
    virtual ~AttributeClassifierInterface() = default;
    virtual std::string id() const = 0;
    virtual const std::vector<std::string>& attribute_names() const = 0;
    std::size_t attribute_count() const { return attribute_names().size(); }
    virtual std::vector<bool> classify(const GeneratedImage& image) const = 0;
};

struct CalibrationConfig {
    double initial = 0.1;
    double factor = 2.0;
    double cap = 64.0;
    double tolerance = 1e-2;
};

struct CalibrationResult {
    double lambda_min = 0.0;
    double lambda_max = 0.0;
    std::array<double, 6> strengths{};
    bool clamped_low = false;
    bool clamped_high = false;
    int calls_negative = 0;
    int calls_positive = 0;

    bool clamped() const { return clamped_low || clamped_high; }
};

using StrengthProbe = std::function<bool(double strength)>;

// Outward geometric search from +-initial until the probe fails (or cap is
// reached), then bisection to `tolerance` for the last passing strength on
// each side. The probe must pass at 0.
CalibrationResult calibrate(const StrengthProbe& probe, const CalibrationConfig& cfg = {});

CalibrationResult calibrate_strength(const GeneratorAdapter& adapter, const LatentCode& z, const DirectionVector& d,
                                     const DetectorInterface& detector, const CalibrationConfig& cfg = {});

// lambda_min + i * (lambda_max - lambda_min) / 5, with the last entry exactly lambda_max.
std::array<double, 6> even_strengths(double lambda_min, double lambda_max);

struct IdentityResult {
    double mean = 0.0;
    double std = 0.0;
    std::vector<double> per_image;
};

IdentityResult identity_similarity(const GeneratedImage& reference, std::span<const GeneratedImage> edited,
                                   const EmbeddingInterface& embedder);

enum class SuccessMode {
    present,          // target detected in the edited image
    newly_introduced, // target detected in the edited image and absent in the reference
};

struct AttributeDelta {
    bool success = false;
    double lost_pct = 0.0;
    double found_pct = 0.0;
    int lost = 0;
    int found = 0;
    int retained = 0;
    int never_present = 0;
};

// Percentages are out of all A attributes; the target is excluded from the counts.
AttributeDelta attribute_delta(const std::vector<bool>& reference, const std::vector<bool>& edited,
                               std::size_t target_index, SuccessMode mode = SuccessMode::present);
AttributeDelta attribute_delta(const GeneratedImage& reference, const GeneratedImage& edited,
                               const AttributeClassifierInterface& classifier, std::size_t target_index,
                               SuccessMode mode = SuccessMode::present);

struct EvalPlugins {
    const DetectorInterface& detector;
    const EmbeddingInterface& embedder;
    const AttributeClassifierInterface& classifier;
};

struct EvalOptions {
    std::size_t target_index = 0;
    CalibrationConfig calibration;
    SuccessMode success_mode = SuccessMode::present;
    // Permit the calibration detector and the identity embedder to share a model id.
    bool allow_same_model = false;
    unsigned threads = 1;
};

struct SeedMetrics {
    std::int64_t seed = 0;
    CalibrationResult calibration;
    std::vector<double> similarities;
    double identity_mean = 0.0;
    double identity_std = 0.0;
    double success_rate = 0.0; // percent of the six edited images
    double lost_pct = 0.0;
    double found_pct = 0.0;
};

struct SkippedSeed {
    std::int64_t seed = 0;
    std::string error;
};

struct Stat {
    double mean = 0.0;
    double std = 0.0;
};

struct MetricsReport {
    std::vector<SeedMetrics> per_seed; // sorted by seed
    std::vector<SkippedSeed> skipped;
    Stat identity;
    Stat success_rate;
    Stat lost_pct;
    Stat found_pct;
    std::size_t attribute_count = 0;
    std::size_t target_index = 0;
    std::string target_name;
    std::string direction_name;
    int snapshot_index = 0;
};

// Population mean and standard deviation.
Stat mean_std(std::span<const double> values);

MetricsReport evaluate_direction(const DirectionVector& d, std::span<const std::int64_t> seeds,
                                 const GeneratorAdapter& adapter, const EvalPlugins& plugins,
                                 const EvalOptions& options = {});

struct IterationDelta {
    int snapshot_index = 0;
    double identity_delta = 0.0;
    double success_delta = 0.0;
    double lost_delta = 0.0;
    double found_delta = 0.0;
    MetricsReport report;
};

// Evaluates each snapshot and reports its change relative to snapshot 0.
std::vector<IterationDelta> track_iterations(std::span<const DirectionVector> snapshots,
                                             std::span<const std::int64_t> seeds, const GeneratorAdapter& adapter,
                                             const EvalPlugins& plugins, const EvalOptions& options = {});

std::string report_to_csv(const MetricsReport& report);
std::string report_to_table(const MetricsReport& report);
std::string track_to_csv(std::span<const IterationDelta> series);
std::string track_to_table(std::span<const IterationDelta> series);

} // namespace fsteer
