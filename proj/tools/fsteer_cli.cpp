#include <algorithm>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <httplib.h>

#include "CLI11.hpp"
#include "json.hpp"

#include "fsteer/average_vector.hpp"
#include "fsteer/config.hpp"
#include "fsteer/direction.hpp"
#include "fsteer/direction_io.hpp"
#include "fsteer/error.hpp"
#include "fsteer/eval.hpp"
#include "fsteer/hashing.hpp"
#include "fsteer/http_api.hpp"
#include "fsteer/image_io.hpp"
#include "fsteer/mask.hpp"
#include "fsteer/model_package.hpp"
#include "fsteer/plugins.hpp"
#include "fsteer/session.hpp"
#include "fsteer/toy_generator.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace fsteer;

namespace {

struct Common {
    std::optional<std::string> config_path;
    std::optional<std::string> model;
    std::string out = ".";
    std::int64_t seed = 0;
    std::size_t n = 0;
    double strength = 1.0;
    std::optional<std::string> detector, embedder, classifier;
    std::string target_attr;
    std::string direction;
    std::string manifest;
    std::vector<std::string> masks;
    std::vector<std::int64_t> seeds;
    std::optional<std::int64_t> bundle_seed;
    std::string snapshots;
    std::string name;
    unsigned threads = 1;
    bool allow_same_model = false;
    std::optional<int> port;
};

// Records produced files into <out>/manifest.json.
class Outputs {
public:
    Outputs(fs::path dir, std::string command) : dir_(std::move(dir)), command_(std::move(command)) {
        fs::create_directories(dir_);
    }

    fs::path path(const std::string& name) const { return dir_ / name; }

    void write(const std::string& name, const std::string& content) {
        std::ofstream out(path(name), std::ios::binary);
        out << content;
        if (!out) throw Error(fmt::format("cannot write {}", path(name).string()));
        add(name, content);
    }

    void write(const std::string& name, const std::vector<unsigned char>& bytes) {
        write(name, std::string(bytes.begin(), bytes.end()));
    }

    void add(const std::string& name, const std::string& content) {
        artifacts_.push_back({{"path", name}, {"sha256", sha256_hex(content)}, {"bytes", content.size()}});
    }

    void finish(const json& params) {
        json m = {{"command", command_}, {"parameters", params}, {"artifacts", artifacts_}};
        std::ofstream out(path("manifest.json"));
        out << m.dump(2) << "\n";
    }

private:
    fs::path dir_;
    std::string command_;
    json artifacts_ = json::array();
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw NotFoundError(fmt::format("cannot open {}", p.string()));
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

json read_json(const fs::path& p) {
    try {
        return json::parse(slurp(p));
    } catch (const json::parse_error&) {
        throw ArgumentError(fmt::format("{} is not valid JSON", p.string()));
    }
}

ServiceConfig config_for(const Common& c) {
    auto cfg = load_config(c.config_path ? std::optional<fs::path>(*c.config_path) : std::nullopt, process_env());
    if (c.model) cfg.model = *c.model;
    if (c.detector) cfg.plugin_detector = *c.detector;
    if (c.embedder) cfg.plugin_embedder = *c.embedder;
    if (c.classifier) cfg.plugin_classifier = *c.classifier;
    if (c.port) cfg.port = *c.port;
    return cfg;
}

std::string direction_text(const DirectionVector& d, const std::string& model_hash) {
    return direction_to_json(d, model_hash).dump(2) + "\n";
}

std::vector<std::int64_t> eval_seeds(const Common& c) {
    if (!c.seeds.empty()) return c.seeds;
    if (c.n == 0) throw ArgumentError("pass --seeds or --n");
    std::vector<std::int64_t> seeds;
    for (std::size_t i = 0; i < c.n; ++i) seeds.push_back(c.seed + static_cast<std::int64_t>(i));
    return seeds;
}

json seeds_json(const std::vector<std::int64_t>& seeds) { return json(seeds); }

int run_avg_vector(const Common& c) {
    const auto cfg = config_for(c);
    const auto gen = load_generator(cfg.model);
    const std::size_t n = c.n == 0 ? cfg.average_samples : c.n;
    AverageVectorCache cache(cfg.cache_dir);
    const auto avg = cache.get_or_compute(*gen, n, static_cast<std::uint64_t>(c.seed));
    Outputs out(c.out, "avg-vector");
    out.write("average.json", filter_vector_to_json(avg, gen->model_hash()).dump(2) + "\n");
    out.finish({{"model_hash", gen->model_hash()}, {"n", n}, {"seed", c.seed}, {"cached", cache.computations() == 0}});
    return 0;
}

int run_compose(const Common& c) {
    const auto cfg = config_for(c);
    const auto gen = load_generator(cfg.model);
    const auto m = read_json(c.manifest);
    if (m.contains("model_hash") && m.at("model_hash").get<std::string>() != gen->model_hash()) {
        throw StructuralError("exemplar manifest was written for a different model");
    }
    ExemplarSet set;
    for (const auto& row : m.at("exemplars")) {
        const auto seed = row.at("seed").get<std::int64_t>();
        const auto polarity = polarity_from_string(row.at("polarity").get<std::string>());
        std::optional<double> weight;
        if (row.contains("weight")) weight = row.at("weight").get<double>();
        const auto id = fmt::format("{}-{}", to_string(polarity), seed);
        set.add(Exemplar::make(id, seed, extract_filter_vector(gen->sample(seed).bundle, gen->layout()), polarity,
                               weight, cfg.weights));
    }
    std::optional<FilterVector> avg;
    if (set.negatives.empty()) {
        const std::size_t n = c.n == 0 ? cfg.average_samples : c.n;
        AverageVectorCache cache(cfg.cache_dir);
        avg = cache.get_or_compute(*gen, n, static_cast<std::uint64_t>(c.seed));
    }
    auto d = compose_direction(set, avg);
    d.name = m.value("name", c.name.empty() ? std::string("direction") : c.name);
    Outputs out(c.out, "compose");
    out.write("direction.json", direction_text(d, gen->model_hash()));
    out.finish({{"model_hash", gen->model_hash()}, {"manifest", c.manifest}, {"norm", d.norm()}});
    return 0;
}

int run_sample(const Common& c) {
    const auto gen = load_generator(config_for(c).model);
    Outputs out(c.out, "sample");
    out.write(fmt::format("sample-{}.ppm", c.seed), encode_ppm(gen->sample(c.seed).image));
    out.finish({{"model_hash", gen->model_hash()}, {"seed", c.seed}});
    return 0;
}

int run_edit(const Common& c) {
    const auto gen = load_generator(config_for(c).model);
    const auto d = read_direction_file(c.direction, gen->layout(), gen->model_hash());
    const auto img = gen->render_with_direction(gen->latent(c.seed), d, c.strength);
    for (const auto& w : img.warnings) std::cerr << "warning: " << w << "\n";
    Outputs out(c.out, "edit");
    out.write(fmt::format("edit-{}.ppm", c.seed), encode_ppm(img));
    out.finish({{"model_hash", gen->model_hash()}, {"seed", c.seed}, {"strength", c.strength}});
    return 0;
}

int run_mask_apply(const Common& c) {
    const auto gen = load_generator(config_for(c).model);
    auto d = read_direction_file(c.direction, gen->layout(), gen->model_hash());
    std::vector<ActiveMask> active;
    for (const auto& spec : c.masks) {
        // path[:mode]
        std::string path = spec;
        std::optional<MaskMode> mode;
        const auto colon = spec.rfind(':');
        if (colon != std::string::npos) {
            const auto tail = spec.substr(colon + 1);
            if (tail == "preserve" || tail == "discard" || tail == "off") {
                mode = mask_mode_from_string(tail);
                path = spec.substr(0, colon);
            }
        }
        auto mask = mask_from_wire(read_json(path));
        if (mode) mask.mode = *mode;
        if (mask.mode == MaskMode::off) continue;
        const auto source = c.bundle_seed.value_or(mask.created_from);
        active.push_back({filter_importance(mask, gen->sample(source).bundle), mask.mode});
    }
    if (d.norm() == 0.0) throw NumericError("cannot mask a zero direction");
    const auto masked = apply_mask_modes(normalize(d), active);
    Outputs out(c.out, "mask-apply");
    out.write("direction.json", direction_text(masked, gen->model_hash()));
    out.finish({{"model_hash", gen->model_hash()}, {"masks", c.masks}, {"active", active.size()}});
    return 0;
}

json calibration_json(const CalibrationResult& r) {
    return {{"lambda_min", r.lambda_min},
            {"lambda_max", r.lambda_max},
            {"strengths", r.strengths},
            {"clamped_low", r.clamped_low},
            {"clamped_high", r.clamped_high},
            {"calls_negative", r.calls_negative},
            {"calls_positive", r.calls_positive}};
}

int run_calibrate(const Common& c) {
    const auto cfg = config_for(c);
    const auto gen = load_generator(cfg.model);
    const auto d = read_direction_file(c.direction, gen->layout(), gen->model_hash());
    const auto detector = plugins::make_detector(cfg.plugin_detector);
    const auto r = calibrate_strength(*gen, gen->latent(c.seed), d, *detector);
    Outputs out(c.out, "calibrate");
    out.write("calibration.json", calibration_json(r).dump(2) + "\n");
    out.finish({{"model_hash", gen->model_hash()}, {"seed", c.seed}, {"detector", detector->id()}});
    return 0;
}

struct PluginSet {
    std::unique_ptr<DetectorInterface> detector;
    std::unique_ptr<EmbeddingInterface> embedder;
    std::unique_ptr<AttributeClassifierInterface> classifier;
};

PluginSet plugins_for(const ServiceConfig& cfg) {
    return {plugins::make_detector(cfg.plugin_detector), plugins::make_embedder(cfg.plugin_embedder),
            plugins::make_classifier(cfg.plugin_classifier)};
}

EvalOptions options_for(const Common& c, const AttributeClassifierInterface& classifier) {
    EvalOptions o;
    if (c.target_attr.empty()) throw ArgumentError("--target-attr is required");
    o.target_index = plugins::resolve_attribute(classifier, c.target_attr);
    o.threads = std::max(1u, c.threads);
    o.allow_same_model = c.allow_same_model;
    return o;
}

int run_evaluate(const Common& c) {
    const auto cfg = config_for(c);
    const auto gen = load_generator(cfg.model);
    const auto d = read_direction_file(c.direction, gen->layout(), gen->model_hash());
    const auto p = plugins_for(cfg);
    const auto seeds = eval_seeds(c);
    const auto report = evaluate_direction(d, seeds, *gen, {*p.detector, *p.embedder, *p.classifier},
                                           options_for(c, *p.classifier));
    Outputs out(c.out, "evaluate");
    out.write("report.csv", report_to_csv(report));
    out.write("report.txt", report_to_table(report));
    out.finish({{"model_hash", gen->model_hash()},
                {"seeds", seeds_json(seeds)},
                {"detector", p.detector->id()},
                {"embedder", p.embedder->id()},
                {"classifier", p.classifier->id()},
                {"target", c.target_attr},
                {"evaluated", report.per_seed.size()},
                {"skipped", report.skipped.size()}});
    return 0;
}

std::vector<DirectionVector> load_snapshots(const fs::path& src, const GeneratorAdapter& gen) {
    std::vector<DirectionVector> out;
    if (fs::is_directory(src)) {
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(src)) {
            const auto name = e.path().filename().string();
            if (e.is_regular_file() && name.size() > 5 && name.ends_with(".json") && name != "manifest.json") {
                files.push_back(e.path());
            }
        }
        std::sort(files.begin(), files.end());
        for (const auto& f : files) out.push_back(read_direction_file(f, gen.layout(), gen.model_hash()));
        return out;
    }
    // An exported session log: every action that produced a direction.
    const auto log = read_json(src);
    if (log.at("model_hash").get<std::string>() != gen.model_hash()) {
        throw StructuralError("session log was recorded against a different model");
    }
    for (const auto& a : log.at("actions")) {
        if (a.at("direction").is_null()) continue;
        auto d = DirectionVector::make(gen.layout(), a.at("direction").get<std::vector<double>>(),
                                       fmt::format("action-{}", a.value("index", out.size())));
        out.push_back(std::move(d));
    }
    return out;
}

int run_track(const Common& c) {
    const auto cfg = config_for(c);
    const auto gen = load_generator(cfg.model);
    const auto snaps = load_snapshots(c.snapshots, *gen);
    const auto p = plugins_for(cfg);
    const auto seeds = eval_seeds(c);
    const auto series = track_iterations(snaps, seeds, *gen, {*p.detector, *p.embedder, *p.classifier},
                                         options_for(c, *p.classifier));
    Outputs out(c.out, "track");
    out.write("track.csv", track_to_csv(series));
    out.write("track.txt", track_to_table(series));
    out.finish({{"model_hash", gen->model_hash()}, {"snapshots", snaps.size()}, {"seeds", seeds_json(seeds)}});
    return 0;
}

int run_serve(const Common& c) {
    const auto cfg = config_for(c);
    auto gen = load_generator(cfg.model);
    SessionService service(gen, cfg);
    httplib::Server server;
    register_routes(server, service);
    std::cerr << fmt::format("serving model {} on http://{}:{}/v1\n", gen->model_hash().substr(0, 16), cfg.host,
                             cfg.port);
    if (!server.listen(cfg.host, cfg.port)) throw Error(fmt::format("cannot bind {}:{}", cfg.host, cfg.port));
    return 0;
}

int run_export_model(const Common& c) {
    const auto gen = toy::make_generator();
    export_model_package(*gen, c.out, {{"support", toy::support_table_json()}});
    std::cout << fmt::format("wrote {} (model_hash {})\n", c.out, gen->model_hash());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"fsteer: filter-space editing directions for convolutional generators"};
    app.require_subcommand(1);
    Common c;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", c.config_path, "JSON configuration file");
        sub->add_option("--model", c.model, "model package directory or builtin:toy");
        sub->add_option("--out", c.out, "output directory");
    };
    auto plugin_flags = [&](CLI::App* sub) {
        sub->add_option("--plugin-detector", c.detector, "detector plugin (builtin:<name> or executable)");
        sub->add_option("--plugin-embedder", c.embedder, "embedding plugin");
        sub->add_option("--plugin-classifier", c.classifier, "attribute classifier plugin");
    };
    auto seed_list = [&](CLI::App* sub) {
        sub->add_option("--seed", c.seed, "first seed when --seeds is absent");
        sub->add_option("--n", c.n, "number of consecutive seeds");
        sub->add_option("--seeds", c.seeds, "explicit seed list")->delimiter(',');
        sub->add_option("--target-attr", c.target_attr, "target attribute name or index")->required();
        sub->add_option("--threads", c.threads, "worker threads");
        sub->add_flag("--allow-same-model", c.allow_same_model, "permit one model for detector and embedder");
    };

    auto* avg = app.add_subcommand("avg-vector", "mean filter vector over n samples");
    common(avg);
    avg->add_option("--n", c.n, "sample count (default from config)");
    avg->add_option("--seed", c.seed, "sampler seed");

    auto* compose = app.add_subcommand("compose", "exemplar manifest to direction file");
    common(compose);
    compose->add_option("manifest", c.manifest, "exemplar manifest (JSON)")->required();
    compose->add_option("--n", c.n, "average vector samples when there are no negatives");
    compose->add_option("--seed", c.seed, "average vector sampler seed");
    compose->add_option("--name", c.name, "direction name");

    auto* sample = app.add_subcommand("sample", "render an unedited image");
    common(sample);
    sample->add_option("--seed", c.seed, "latent seed")->required();

    auto* edit = app.add_subcommand("edit", "render one edited image");
    common(edit);
    edit->add_option("--direction", c.direction, "direction file")->required();
    edit->add_option("--seed", c.seed, "latent seed")->required();
    edit->add_option("--strength", c.strength, "edit strength");

    auto* mask_apply = app.add_subcommand("mask-apply", "apply preserve/discard masks to a direction");
    common(mask_apply);
    mask_apply->add_option("--direction", c.direction, "direction file")->required();
    mask_apply->add_option("--mask", c.masks, "mask file, optionally suffixed :preserve|:discard|:off")->required();
    mask_apply->add_option("--bundle-seed", c.bundle_seed, "seed whose activations give importance");

    auto* cal = app.add_subcommand("calibrate", "strength range for one seed");
    common(cal);
    plugin_flags(cal);
    cal->add_option("--direction", c.direction, "direction file")->required();
    cal->add_option("--seed", c.seed, "latent seed")->required();

    auto* evaluate = app.add_subcommand("evaluate", "metrics report for a direction");
    common(evaluate);
    plugin_flags(evaluate);
    evaluate->add_option("--direction", c.direction, "direction file")->required();
    seed_list(evaluate);

    auto* track = app.add_subcommand("track", "metric deltas over direction snapshots");
    common(track);
    plugin_flags(track);
    track->add_option("snapshots", c.snapshots, "directory of direction files or an exported session log")
        ->required();
    seed_list(track);

    auto* serve = app.add_subcommand("serve", "run the HTTP session service");
    common(serve);
    plugin_flags(serve);
    serve->add_option("--port", c.port, "listen port");

    auto* export_model = app.add_subcommand("export-model", "write the built-in toy generator as a model package");
    export_model->add_option("--out", c.out, "package directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*avg) return run_avg_vector(c);
        if (*compose) return run_compose(c);
        if (*sample) return run_sample(c);
        if (*edit) return run_edit(c);
        if (*mask_apply) return run_mask_apply(c);
        if (*cal) return run_calibrate(c);
        if (*evaluate) return run_evaluate(c);
        if (*track) return run_track(c);
        if (*serve) return run_serve(c);
        if (*export_model) return run_export_model(c);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
