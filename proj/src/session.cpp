#include "fsteer/session.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <random>

#include <fmt/format.h>

#include "fsteer/error.hpp"
#include "fsteer/hashing.hpp"
#include "fsteer/image_io.hpp"

namespace fsteer {

namespace fs = std::filesystem;

namespace {

std::int64_t now_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
}

std::string exemplar_id_for(std::int64_t seed) {
    return fmt::format("ex-{}", seed);
}

nlohmann::json stroke_to_json(const Stroke& s) {
    auto pts = nlohmann::json::array();
    for (const auto& p : s.polyline) pts.push_back({p.x, p.y});
    return {{"polyline", pts}, {"radius", s.radius}};
}

Stroke stroke_from_json(const nlohmann::json& j) {
    Stroke s;
    s.radius = j.at("radius").get<double>();
    for (const auto& p : j.at("polyline")) s.polyline.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    return s;
}

TestImage* find_test_image(Session& s, std::int64_t seed) {
    for (auto& t : s.test_images) {
        if (t.seed == seed) return &t;
    }
    return nullptr;
}

Mask* find_mask(Session& s, const std::string& id) {
    for (auto& m : s.masks) {
        if (m.id == id) return &m;
    }
    return nullptr;
}

} // namespace

bool Session::tested() const {
    return std::any_of(log.begin(), log.end(), [](const LogEntry& e) { return e.tested; });
}

nlohmann::json image_to_json(const GeneratedImage& image) {
    nlohmann::json j = {{"seed", image.source_seed},
                        {"height", image.height},
                        {"width", image.width},
                        {"ppm_base64", base64_encode(encode_ppm(image))},
                        {"warnings", image.warnings}};
    if (image.applied_direction) {
        j["applied_direction"] = {{"name", image.applied_direction->name},
                                  {"strength", image.applied_direction->strength}};
    }
    return j;
}

nlohmann::json session_to_json(const Session& s) {
    auto exemplars = nlohmann::json::array();
    for (const auto* group : {&s.exemplars.positives, &s.exemplars.negatives}) {
        for (const auto& e : *group) {
            exemplars.push_back(
                {{"id", e.id}, {"seed", e.seed}, {"polarity", std::string(to_string(e.polarity))}, {"weight", e.weight}});
        }
    }
    auto tests = nlohmann::json::array();
    for (const auto& t : s.test_images) tests.push_back({{"seed", t.seed}, {"strength", t.strength}});
    auto masks = nlohmann::json::array();
    for (const auto& m : s.masks) masks.push_back(mask_to_wire(m));
    return {{"session_id", s.id},
            {"model_hash", s.model_hash},
            {"exemplars", exemplars},
            {"test_images", tests},
            {"masks", masks},
            {"masks_applied", s.masks_applied},
            {"tested", s.tested()},
            {"log_length", s.log.size()}};
}

SessionService::SessionService(std::shared_ptr<GeneratorAdapter> adapter, ServiceConfig config)
    : adapter_(std::move(adapter)), config_(std::move(config)) {
    if (!adapter_) throw StateError("model not loaded");
    store_ = std::make_unique<DirectionStore>(config_.data_dir / "directions");
}

const FilterVector& SessionService::average_vector() const {
    std::lock_guard<std::mutex> lock(average_mutex_);
    if (!average_) {
        AverageVectorCache cache(config_.cache_dir);
        average_ = cache.get_or_compute(*adapter_, config_.average_samples, config_.average_seed);
    }
    return *average_;
}

Session SessionService::fresh_session(std::string id) const {
    Session s;
    s.id = std::move(id);
    s.model_hash = adapter_->model_hash();
    for (int i = 0; i < config_.test_images; ++i) {
        s.test_images.push_back({derive_seed(config_.test_image_seed, static_cast<std::uint64_t>(i)),
                                 config_.default_strength});
    }
    return s;
}

std::string SessionService::create_session() {
    std::lock_guard<std::mutex> lock(sessions_mutex_);
    std::random_device rd;
    const auto id = fmt::format("s{}-{:08x}", next_session_++, rd());
    auto slot = std::make_unique<Slot>();
    slot->state = fresh_session(id);
    sessions_.emplace(id, std::move(slot));
    return id;
}

SessionService::Slot& SessionService::slot(const std::string& id) const {
    std::lock_guard<std::mutex> lock(sessions_mutex_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw NotFoundError(fmt::format("no session '{}'", id));
    return *it->second;
}

template <typename F>
auto SessionService::with_session(const std::string& id, F&& f) {
    auto& sl = slot(id);
    std::lock_guard<std::mutex> lock(sl.mutex);
    return f(sl.state);
}

template <typename F>
auto SessionService::with_session(const std::string& id, F&& f) const {
    auto& sl = slot(id);
    std::lock_guard<std::mutex> lock(sl.mutex);
    return f(static_cast<const Session&>(sl.state));
}

Session SessionService::session(const std::string& id) const {
    return with_session(id, [](const Session& s) { return s; });
}

std::vector<GalleryEntry> SessionService::gallery(const std::string& id, int count, std::uint64_t page_seed) {
    if (count < 0 || count > 1024) throw ArgumentError("gallery count must be within [0, 1024]");
    return with_session(id, [&](Session& s) {
        std::vector<GalleryEntry> page;
        for (std::uint64_t k = 0; static_cast<int>(page.size()) < count; ++k) {
            const auto seed = derive_seed(page_seed, k);
            if (!s.served_seeds.insert(seed).second) continue;
            auto img = adapter_->sample(seed).image;
            page.push_back({exemplar_id_for(seed), seed, thumbnail(img, config_.thumbnail_factor)});
        }
        return page;
    });
}

std::vector<ActiveMask> SessionService::active_masks(const Session& s) const {
    std::vector<ActiveMask> out;
    for (const auto& m : s.masks) {
        if (m.mode == MaskMode::off) continue;
        const auto bundle = adapter_->sample(m.created_from).bundle;
        out.push_back({filter_importance(m, bundle), m.mode});
    }
    return out;
}

std::optional<DirectionVector> SessionService::unmasked_direction(const Session& s) const {
    if (s.exemplars.positives.empty()) return std::nullopt;
    std::optional<FilterVector> avg;
    if (s.exemplars.negatives.empty()) avg = average_vector();
    auto d = compose_direction(s.exemplars, avg);
    if (d.norm() > 0.0) d = normalize(d);
    return d;
}

std::optional<DirectionVector> SessionService::current_direction(const Session& s) const {
    auto d = unmasked_direction(s);
    if (!d || d->norm() == 0.0) return d;
    const auto masks = active_masks(s);
    if (masks.empty()) return d;
    return apply_mask_modes(*d, masks);
}

std::vector<RenderedTestImage> SessionService::render_tests(const Session& s) const {
    const auto plain = unmasked_direction(s);
    if (!plain) throw StateError("select at least one positive example");
    std::optional<DirectionVector> masked;
    std::set<std::int64_t> mask_sources;
    for (const auto& m : s.masks) {
        if (m.mode != MaskMode::off) mask_sources.insert(m.created_from);
    }
    if (!mask_sources.empty()) masked = current_direction(s);

    std::vector<RenderedTestImage> out;
    for (const auto& t : s.test_images) {
        const bool use_mask = masked && (s.masks_applied || mask_sources.count(t.seed) > 0);
        const auto& d = use_mask ? *masked : *plain;
        out.push_back({t.seed, t.strength, use_mask,
                       adapter_->render_with_direction(adapter_->latent(t.seed), d, t.strength)});
    }
    return out;
}

nlohmann::json SessionService::apply_action(Session& s, const DisentangleAction& a, bool replaying) const {
    const auto& p = a.payload;
    try {
        switch (a.kind) {
        case ActionKind::select: {
            const auto seed = p.at("seed").get<std::int64_t>();
            const auto polarity = polarity_from_string(p.at("polarity").get<std::string>());
            std::optional<double> weight;
            if (p.contains("weight") && !p.at("weight").is_null()) weight = p.at("weight").get<double>();
            auto fv = extract_filter_vector(adapter_->sample(seed).bundle, adapter_->layout());
            auto e = Exemplar::make(exemplar_id_for(seed), seed, std::move(fv), polarity, weight, config_.weights);
            s.exemplars.add(e);
            return {{"exemplar_id", e.id}, {"weight", e.weight}};
        }
        case ActionKind::deselect: {
            const auto eid = p.at("exemplar_id").get<std::string>();
            if (!s.exemplars.remove(eid)) throw NotFoundError(fmt::format("exemplar '{}' is not selected", eid));
            return nlohmann::json::object();
        }
        case ActionKind::weight_adjust: {
            const auto eid = p.at("exemplar_id").get<std::string>();
            Exemplar* e = s.exemplars.find(eid);
            if (e == nullptr) throw NotFoundError(fmt::format("exemplar '{}' is not selected", eid));
            auto adj = fsteer::adjust_weight(*e, p.at("delta_steps").get<int>(), config_.weights);
            *e = adj.exemplar;
            return {{"exemplar_id", eid}, {"weight", e->weight}, {"clamped", adj.clamped}};
        }
        case ActionKind::compose:
            if (s.exemplars.positives.empty()) throw StateError("select at least one positive example");
            return nlohmann::json::object();
        case ActionKind::mask_create: {
            const auto seed = p.at("test_seed").get<std::int64_t>();
            if (find_test_image(s, seed) == nullptr) {
                throw NotFoundError(fmt::format("seed {} is not a test image", seed));
            }
            const auto mask_id = fmt::format("m{}", s.next_mask);
            if (replaying && p.value("mask_id", mask_id) != mask_id) {
                throw StateError("replayed mask id diverges from the log");
            }
            auto m = rasterize_stroke(mask_id, stroke_from_json(p.at("stroke")), adapter_->resolution(), seed);
            ++s.next_mask;
            s.masks.push_back(m);
            return mask_to_wire(m);
        }
        case ActionKind::mask_cycle: {
            const auto mid = p.at("mask_id").get<std::string>();
            Mask* m = find_mask(s, mid);
            if (m == nullptr) throw NotFoundError(fmt::format("no mask '{}'", mid));
            *m = cycle_mask_mode(*m);
            return {{"mask_id", mid}, {"mode", std::string(to_string(m->mode))}};
        }
        case ActionKind::mask_apply:
            if (s.exemplars.positives.empty()) throw StateError("select at least one positive example");
            s.masks_applied = true;
            return nlohmann::json::object();
        case ActionKind::save:
            if (s.exemplars.positives.empty()) throw StateError("nothing to save: select at least one positive example");
            return nlohmann::json::object();
        case ActionKind::test_image_add: {
            const auto seed = p.at("seed").get<std::int64_t>();
            if (find_test_image(s, seed) != nullptr) throw ConflictError(fmt::format("seed {} is already a test image", seed));
            s.test_images.push_back({seed, p.value("strength", config_.default_strength)});
            return nlohmann::json::object();
        }
        case ActionKind::test_image_remove: {
            const auto seed = p.at("seed").get<std::int64_t>();
            auto it = std::find_if(s.test_images.begin(), s.test_images.end(),
                                   [&](const TestImage& t) { return t.seed == seed; });
            if (it == s.test_images.end()) throw NotFoundError(fmt::format("seed {} is not a test image", seed));
            s.test_images.erase(it);
            return nlohmann::json::object();
        }
        case ActionKind::strength_set: {
            const auto seed = p.at("seed").get<std::int64_t>();
            const double strength = p.at("strength").get<double>();
            if (!std::isfinite(strength)) throw ArgumentError("strength must be finite");
            TestImage* t = find_test_image(s, seed);
            if (t == nullptr) throw NotFoundError(fmt::format("seed {} is not a test image", seed));
            t->strength = strength;
            return nlohmann::json::object();
        }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ArgumentError(fmt::format("malformed {} payload: {}", to_string(a.kind), e.what()));
    }
    return nlohmann::json::object();
}

void SessionService::record(Session& s, DisentangleAction action, bool tested) const {
    LogEntry entry;
    entry.tested = tested;
    if (tested && !s.tested()) entry.label = "entangled";
    try {
        entry.direction = current_direction(s);
    } catch (const NumericError&) {
        // masks suppressed every component; no snapshot for this step
    }
    entry.action = std::move(action);

    if (!config_.data_dir.empty()) {
        const auto dir = config_.data_dir / "sessions";
        fs::create_directories(dir);
        std::ofstream out(dir / (s.id + ".jsonl"), std::ios::app);
        nlohmann::json line = entry.action.to_json();
        line["tested"] = entry.tested;
        line["label"] = entry.label;
        out << line.dump() << "\n";
        out.flush();
    }
    s.log.push_back(std::move(entry));
}

Exemplar SessionService::select(const std::string& id, std::int64_t seed, Polarity polarity,
                                std::optional<double> weight) {
    return with_session(id, [&](Session& s) {
        nlohmann::json payload = {{"seed", seed}, {"polarity", std::string(to_string(polarity))}};
        if (weight) payload["weight"] = *weight;
        DisentangleAction a{ActionKind::select, payload, now_ms()};
        apply_action(s, a, false);
        record(s, std::move(a), false);
        return *s.exemplars.find(exemplar_id_for(seed));
    });
}

void SessionService::deselect(const std::string& id, const std::string& exemplar_id) {
    with_session(id, [&](Session& s) {
        DisentangleAction a{ActionKind::deselect, {{"exemplar_id", exemplar_id}}, now_ms()};
        apply_action(s, a, false);
        record(s, std::move(a), false);
        return 0;
    });
}

WeightAdjustment SessionService::adjust_weight(const std::string& id, const std::string& exemplar_id,
                                               int delta_steps) {
    return with_session(id, [&](Session& s) {
        DisentangleAction a{ActionKind::weight_adjust, {{"exemplar_id", exemplar_id}, {"delta_steps", delta_steps}},
                            now_ms()};
        const auto result = apply_action(s, a, false);
        record(s, std::move(a), false);
        return WeightAdjustment{*s.exemplars.find(exemplar_id), result.at("clamped").get<bool>()};
    });
}

std::vector<RenderedTestImage> SessionService::test_direction(const std::string& id) {
    return with_session(id, [&](Session& s) {
        DisentangleAction a{ActionKind::compose, nlohmann::json::object(), now_ms()};
        apply_action(s, a, false);
        auto images = render_tests(s);
        record(s, std::move(a), true);
        return images;
    });
}

Mask SessionService::create_mask(const std::string& id, std::int64_t test_seed, const Stroke& stroke) {
    return with_session(id, [&](Session& s) {
        DisentangleAction a{ActionKind::mask_create,
                            {{"mask_id", fmt::format("m{}", s.next_mask)},
                             {"test_seed", test_seed},
                             {"stroke", stroke_to_json(stroke)}},
                            now_ms()};
        apply_action(s, a, false);
        record(s, std::move(a), false);
        return s.masks.back();
    });
}

Mask SessionService::cycle_mask(const std::string& id, const std::string& mask_id) {
    return with_session(id, [&](Session& s) {
        DisentangleAction a{ActionKind::mask_cycle, {{"mask_id", mask_id}}, now_ms()};
        apply_action(s, a, false);
        record(s, std::move(a), false);
        return *find_mask(s, mask_id);
    });
}

std::vector<RenderedTestImage> SessionService::apply_masks(const std::string& id) {
    return with_session(id, [&](Session& s) {
        DisentangleAction a{ActionKind::mask_apply, nlohmann::json::object(), now_ms()};
        apply_action(s, a, false);
        auto images = render_tests(s);
        record(s, std::move(a), false);
        return images;
    });
}

void SessionService::add_test_image(const std::string& id, std::int64_t seed, std::optional<double> strength) {
    with_session(id, [&](Session& s) {
        DisentangleAction a{ActionKind::test_image_add,
                            {{"seed", seed}, {"strength", strength.value_or(config_.default_strength)}}, now_ms()};
        apply_action(s, a, false);
        record(s, std::move(a), false);
        return 0;
    });
}

void SessionService::remove_test_image(const std::string& id, std::int64_t seed) {
    with_session(id, [&](Session& s) {
        DisentangleAction a{ActionKind::test_image_remove, {{"seed", seed}}, now_ms()};
        apply_action(s, a, false);
        record(s, std::move(a), false);
        return 0;
    });
}

void SessionService::set_strength(const std::string& id, std::int64_t seed, double strength) {
    with_session(id, [&](Session& s) {
        DisentangleAction a{ActionKind::strength_set, {{"seed", seed}, {"strength", strength}}, now_ms()};
        apply_action(s, a, false);
        record(s, std::move(a), false);
        return 0;
    });
}

StoredDirection SessionService::save_direction(const std::string& id, const std::string& name) {
    return with_session(id, [&](Session& s) {
        DisentangleAction a{ActionKind::save, {{"name", name}}, now_ms()};
        apply_action(s, a, false);
        auto d = current_direction(s);
        auto stored = store_->save(*d, name, adapter_->model_hash());
        record(s, std::move(a), false);
        return stored;
    });
}

std::vector<StoredDirection> SessionService::list_directions() const {
    return store_->list();
}

DirectionVector SessionService::load_direction(const std::string& name) const {
    return store_->load(name, adapter_->layout(), adapter_->model_hash());
}

nlohmann::json SessionService::export_log(const std::string& id) const {
    return with_session(id, [&](const Session& s) {
        auto actions = nlohmann::json::array();
        for (std::size_t i = 0; i < s.log.size(); ++i) {
            const auto& e = s.log[i];
            nlohmann::json j = e.action.to_json();
            j["index"] = i;
            j["tested"] = e.tested;
            j["label"] = e.label;
            j["direction"] = e.direction ? nlohmann::json(e.direction->values) : nlohmann::json(nullptr);
            actions.push_back(std::move(j));
        }
        return nlohmann::json{{"session_id", s.id},
                              {"model_hash", s.model_hash},
                              {"layout_digest", adapter_->layout()->digest()},
                              {"actions", actions}};
    });
}

Session SessionService::replay(const nlohmann::json& log) const {
    if (log.at("model_hash").get<std::string>() != adapter_->model_hash()) {
        throw StructuralError("session log was recorded against a different model");
    }
    Session s = fresh_session("replay");
    for (const auto& j : log.at("actions")) {
        auto a = DisentangleAction::from_json(j);
        apply_action(s, a, true);
        LogEntry entry;
        entry.tested = j.value("tested", false);
        entry.label = j.value("label", std::string());
        try {
            entry.direction = current_direction(s);
        } catch (const NumericError&) {
        }
        entry.action = std::move(a);
        s.log.push_back(std::move(entry));
    }
    return s;
}

} // namespace fsteer
