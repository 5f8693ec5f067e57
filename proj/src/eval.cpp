#include "fsteer/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <optional>
#include <thread>

#include <fmt/format.h>

#include "fsteer/error.hpp"

namespace fsteer {

namespace {

struct SideResult {
    double bound = 0.0;
    bool clamped = false;
    int calls = 0;
};

SideResult search_side(const StrengthProbe& probe, double sign, const CalibrationConfig& cfg) {
    SideResult r;
    double lo = 0.0; // last passing magnitude
    double hi = 0.0; // first failing magnitude
    double mag = std::min(cfg.initial, cfg.cap);
    while (true) {
        ++r.calls;
        if (probe(sign * mag)) {
            lo = mag;
            if (mag >= cfg.cap) {
                r.bound = sign * cfg.cap;
                r.clamped = true;
                return r;
            }
            mag = std::min(mag * cfg.factor, cfg.cap);
        } else {
            hi = mag;
            break;
        }
    }
    while (hi - lo > cfg.tolerance) {
        const double mid = 0.5 * (lo + hi);
        ++r.calls;
        if (probe(sign * mid)) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    r.bound = sign * lo;
    return r;
}

std::string fmt_num(double v) {
    return fmt::format("{:.17g}", v);
}

std::string csv_escape(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c == '\n' ? ' ' : c;
    }
    return out + "\"";
}

SeedMetrics evaluate_seed(const DirectionVector& d, std::int64_t seed, const GeneratorAdapter& adapter,
                          const EvalPlugins& plugins, const EvalOptions& options) {
    SeedMetrics m;
    m.seed = seed;
    const auto sample = adapter.sample(seed);
    m.calibration = calibrate_strength(adapter, sample.latent, d, plugins.detector, options.calibration);

    std::vector<GeneratedImage> edited;
    edited.reserve(6);
    for (double s : m.calibration.strengths) {
        edited.push_back(adapter.render_with_direction(sample.latent, d, s));
    }
    auto id = identity_similarity(sample.image, edited, plugins.embedder);
    m.similarities = std::move(id.per_image);
    m.identity_mean = id.mean;
    m.identity_std = id.std;

    const auto ref_labels = plugins.classifier.classify(sample.image);
    double successes = 0.0;
    double lost = 0.0;
    double found = 0.0;
    for (const auto& e : edited) {
        const auto delta = attribute_delta(ref_labels, plugins.classifier.classify(e), options.target_index,
                                           options.success_mode);
        successes += delta.success ? 1.0 : 0.0;
        lost += delta.lost_pct;
        found += delta.found_pct;
    }
    const double n = static_cast<double>(edited.size());
    m.success_rate = 100.0 * successes / n;
    m.lost_pct = lost / n;
    m.found_pct = found / n;
    return m;
}

} // namespace

std::array<double, 6> even_strengths(double lambda_min, double lambda_max) {
    std::array<double, 6> s{};
    const double step = (lambda_max - lambda_min) / 5.0;
    for (int i = 0; i < 5; ++i) s[i] = lambda_min + i * step;
    s[5] = lambda_max;
    return s;
}

CalibrationResult calibrate(const StrengthProbe& probe, const CalibrationConfig& cfg) {
    if (!(cfg.initial > 0.0) || !(cfg.factor > 1.0) || !(cfg.cap >= cfg.initial) || !(cfg.tolerance > 0.0)) {
        throw ArgumentError("calibration needs initial > 0, factor > 1, cap >= initial and tolerance > 0");
    }
    if (!probe(0.0)) {
        throw InvalidReferenceError("detector rejects the unedited reference image");
    }
    const auto neg = search_side(probe, -1.0, cfg);
    const auto pos = search_side(probe, +1.0, cfg);
    if (!(neg.bound < pos.bound)) {
        throw InvalidReferenceError("detector fails at every non-zero strength");
    }
    CalibrationResult r;
    r.lambda_min = neg.bound;
    r.lambda_max = pos.bound;
    r.clamped_low = neg.clamped;
    r.clamped_high = pos.clamped;
    r.calls_negative = neg.calls;
    r.calls_positive = pos.calls;
    r.strengths = even_strengths(r.lambda_min, r.lambda_max);
    return r;
}

CalibrationResult calibrate_strength(const GeneratorAdapter& adapter, const LatentCode& z, const DirectionVector& d,
                                     const DetectorInterface& detector, const CalibrationConfig& cfg) {
    return calibrate([&](double s) { return detector.detect(adapter.render_with_direction(z, d, s)); }, cfg);
}

IdentityResult identity_similarity(const GeneratedImage& reference, std::span<const GeneratedImage> edited,
                                   const EmbeddingInterface& embedder) {
    if (edited.empty()) {
        throw ArgumentError("identity similarity needs at least one edited image");
    }
    const auto ref = embedder.embed(reference);
    if (!(dot(ref, ref) > 0.0)) {
        throw NumericError(fmt::format("zero-norm embedding for reference image (seed {})", reference.source_seed));
    }
    IdentityResult r;
    for (std::size_t i = 0; i < edited.size(); ++i) {
        const auto e = embedder.embed(edited[i]);
        if (e.size() != ref.size()) {
            throw StructuralError(fmt::format("embedding of edited image {} has dimension {}, reference has {}", i,
                                              e.size(), ref.size()));
        }
        if (!(dot(e, e) > 0.0)) {
            throw NumericError(fmt::format("zero-norm embedding for edited image {} (seed {})", i,
                                           edited[i].source_seed));
        }
        r.per_image.push_back(cosine_similarity(ref, e));
    }
    const auto st = mean_std(r.per_image);
    r.mean = st.mean;
    r.std = st.std;
    return r;
}

AttributeDelta attribute_delta(const std::vector<bool>& reference, const std::vector<bool>& edited,
                               std::size_t target_index, SuccessMode mode) {
    if (reference.size() != edited.size()) {
        throw StructuralError(fmt::format("attribute vectors of length {} and {}", reference.size(), edited.size()));
    }
    if (target_index >= reference.size()) {
        throw ArgumentError(fmt::format("target attribute {} out of range [0, {})", target_index, reference.size()));
    }
    AttributeDelta d;
    d.success = edited[target_index] && (mode == SuccessMode::present || !reference[target_index]);
    for (std::size_t a = 0; a < reference.size(); ++a) {
        if (a == target_index) continue;
        if (reference[a] && !edited[a]) {
            ++d.lost;
        } else if (!reference[a] && edited[a]) {
            ++d.found;
        } else if (reference[a]) {
            ++d.retained;
        } else {
            ++d.never_present;
        }
    }
    const double total = static_cast<double>(reference.size());
    d.lost_pct = 100.0 * d.lost / total;
    d.found_pct = 100.0 * d.found / total;
    return d;
}

AttributeDelta attribute_delta(const GeneratedImage& reference, const GeneratedImage& edited,
                               const AttributeClassifierInterface& classifier, std::size_t target_index,
                               SuccessMode mode) {
    if (target_index >= classifier.attribute_count()) {
        throw ArgumentError(fmt::format("target attribute {} out of range [0, {})", target_index,
                                        classifier.attribute_count()));
    }
    return attribute_delta(classifier.classify(reference), classifier.classify(edited), target_index, mode);
}

Stat mean_std(std::span<const double> values) {
    if (values.empty()) return {};
    const double n = static_cast<double>(values.size());
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    return {mean, std::sqrt(ss / n)};
}

MetricsReport evaluate_direction(const DirectionVector& d, std::span<const std::int64_t> seeds,
                                 const GeneratorAdapter& adapter, const EvalPlugins& plugins,
                                 const EvalOptions& options) {
    if (seeds.empty()) {
        throw ArgumentError("evaluation needs at least one seed");
    }
    if (!options.allow_same_model && plugins.detector.id() == plugins.embedder.id()) {
        throw ArgumentError(fmt::format("calibration detector and identity embedder share model '{}'; use distinct "
                                        "models or set the override",
                                        plugins.detector.id()));
    }
    if (options.target_index >= plugins.classifier.attribute_count()) {
        throw ArgumentError(fmt::format("target attribute {} out of range [0, {})", options.target_index,
                                        plugins.classifier.attribute_count()));
    }
    require_same_layout(adapter.layout(), d.layout, "evaluate_direction");

    std::vector<std::int64_t> order(seeds.begin(), seeds.end());
    std::stable_sort(order.begin(), order.end());

    std::vector<std::optional<SeedMetrics>> results(order.size());
    std::vector<std::string> errors(order.size());
    auto run_one = [&](std::size_t i) {
        try {
            results[i] = evaluate_seed(d, order[i], adapter, plugins, options);
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    };

    const unsigned workers = std::max(1u, std::min<unsigned>(options.threads, static_cast<unsigned>(order.size())));
    if (workers == 1) {
        for (std::size_t i = 0; i < order.size(); ++i) run_one(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < order.size(); i = next++) run_one(i);
            });
        }
        for (auto& t : pool) t.join();
    }

    MetricsReport report;
    report.attribute_count = plugins.classifier.attribute_count();
    report.target_index = options.target_index;
    report.target_name = plugins.classifier.attribute_names()[options.target_index];
    report.direction_name = d.name;
    for (std::size_t i = 0; i < order.size(); ++i) {
        if (results[i]) {
            report.per_seed.push_back(std::move(*results[i]));
        } else {
            report.skipped.push_back({order[i], errors[i]});
        }
    }
    std::vector<double> identity, success, lost, found;
    for (const auto& m : report.per_seed) {
        identity.push_back(m.identity_mean);
        success.push_back(m.success_rate);
        lost.push_back(m.lost_pct);
        found.push_back(m.found_pct);
    }
    report.identity = mean_std(identity);
    report.success_rate = mean_std(success);
    report.lost_pct = mean_std(lost);
    report.found_pct = mean_std(found);
    return report;
}

std::vector<IterationDelta> track_iterations(std::span<const DirectionVector> snapshots,
                                             std::span<const std::int64_t> seeds, const GeneratorAdapter& adapter,
                                             const EvalPlugins& plugins, const EvalOptions& options) {
    if (snapshots.size() < 2) {
        throw ArgumentError("tracking needs at least two snapshots");
    }
    std::vector<IterationDelta> out;
    out.reserve(snapshots.size());
    for (std::size_t i = 0; i < snapshots.size(); ++i) {
        IterationDelta row;
        row.snapshot_index = static_cast<int>(i);
        row.report = evaluate_direction(snapshots[i], seeds, adapter, plugins, options);
        row.report.snapshot_index = row.snapshot_index;
        if (i > 0) {
            const auto& base = out.front().report;
            row.identity_delta = row.report.identity.mean - base.identity.mean;
            row.success_delta = row.report.success_rate.mean - base.success_rate.mean;
            row.lost_delta = row.report.lost_pct.mean - base.lost_pct.mean;
            row.found_delta = row.report.found_pct.mean - base.found_pct.mean;
        }
        out.push_back(std::move(row));
    }
    return out;
}

std::string report_to_csv(const MetricsReport& report) {
    std::string out = fmt::format("# direction={},snapshot_index={},target_index={},target={},attributes={},seeds={},"
                                  "skipped={}\n",
                                  report.direction_name, report.snapshot_index, report.target_index, report.target_name,
                                  report.attribute_count, report.per_seed.size() + report.skipped.size(),
                                  report.skipped.size());
    out += "row,seed,lambda_min,lambda_max,clamped,identity_mean,identity_std,success_rate,lost_pct,found_pct,error\n";
    for (const auto& m : report.per_seed) {
        out += fmt::format("seed,{},{},{},{},{},{},{},{},{},\n", m.seed, fmt_num(m.calibration.lambda_min),
                           fmt_num(m.calibration.lambda_max), m.calibration.clamped() ? 1 : 0,
                           fmt_num(m.identity_mean), fmt_num(m.identity_std), fmt_num(m.success_rate),
                           fmt_num(m.lost_pct), fmt_num(m.found_pct));
    }
    for (const auto& s : report.skipped) {
        out += fmt::format("skipped,{},,,,,,,,,{}\n", s.seed, csv_escape(s.error));
    }
    out += fmt::format("mean,,,,,{},,{},{},{},\n", fmt_num(report.identity.mean), fmt_num(report.success_rate.mean),
                       fmt_num(report.lost_pct.mean), fmt_num(report.found_pct.mean));
    out += fmt::format("std,,,,,{},,{},{},{},\n", fmt_num(report.identity.std), fmt_num(report.success_rate.std),
                       fmt_num(report.lost_pct.std), fmt_num(report.found_pct.std));
    return out;
}

std::string report_to_table(const MetricsReport& report) {
    const std::string name = report.direction_name.empty() ? "(unnamed)" : report.direction_name;
    std::string out;
    out += fmt::format("Facial-identity style similarity and attribute changes, target '{}' ({} attributes)\n\n",
                       report.target_name, report.attribute_count);
    out += "| Direction | Identity similarity | Success (%) | Lost (%) | Found (%) |\n";
    out += "|---|---|---|---|---|\n";
    out += fmt::format("| {} | {:.2f} ± {:.2f} | {:.2f} | {:.2f} | {:.2f} |\n", name, report.identity.mean,
                       report.identity.std, report.success_rate.mean, report.lost_pct.mean, report.found_pct.mean);
    out += fmt::format("\nseeds evaluated: {}, skipped: {}\n", report.per_seed.size(), report.skipped.size());
    return out;
}

std::string track_to_csv(std::span<const IterationDelta> series) {
    std::string out = "snapshot,identity_mean,success_rate,lost_pct,found_pct,identity_delta,success_delta,lost_delta,"
                      "found_delta\n";
    for (const auto& r : series) {
        out += fmt::format("{},{},{},{},{},{},{},{},{}\n", r.snapshot_index, fmt_num(r.report.identity.mean),
                           fmt_num(r.report.success_rate.mean), fmt_num(r.report.lost_pct.mean),
                           fmt_num(r.report.found_pct.mean), fmt_num(r.identity_delta), fmt_num(r.success_delta),
                           fmt_num(r.lost_delta), fmt_num(r.found_delta));
    }
    return out;
}

std::string track_to_table(std::span<const IterationDelta> series) {
    std::string out = "Change relative to the first tested direction (negative lost/found = more disentangled)\n\n";
    out += "| Snapshot | Identity Δ | Success Δ (%) | Lost Δ (%) | Found Δ (%) |\n";
    out += "|---|---|---|---|---|\n";
    for (const auto& r : series) {
        out += fmt::format("| {} | {:+.3f} | {:+.2f} | {:+.2f} | {:+.2f} |\n", r.snapshot_index, r.identity_delta,
                           r.success_delta, r.lost_delta, r.found_delta);
    }
    return out;
}

} // namespace fsteer
