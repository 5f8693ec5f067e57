#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "fsteer/average_vector.hpp"
#include "fsteer/config.hpp"
#include "fsteer/direction.hpp"
#include "fsteer/direction_io.hpp"
#include "fsteer/generator.hpp"
#include "fsteer/mask.hpp"

namespace fsteer {

struct TestImage {
    std::int64_t seed = 0;
    double strength = 1.0;
};

struct LogEntry {
    DisentangleAction action;
    // Direction after the action, when one can be composed.
    std::optional<DirectionVector> direction;
    bool tested = false;
    std::string label; // "entangled" on the first test
};

struct GalleryEntry {
    std::string exemplar_id;
    std::int64_t seed = 0;
    GeneratedImage thumbnail;
};

struct RenderedTestImage {
    std::int64_t seed = 0;
    double strength = 0.0;
    bool masked = false;
    GeneratedImage image;
};

struct Session {
    std::string id;
    std::string model_hash;
    ExemplarSet exemplars;
    std::vector<TestImage> test_images;
    std::vector<Mask> masks;
    bool masks_applied = false;
    std::vector<LogEntry> log;
    std::set<std::int64_t> served_seeds;
    int next_mask = 1;

    bool tested() const;
};

// Engine-side state shared by all sessions: the generator, the cached
// average vector and the direction store.
class SessionService {
public:
    SessionService(std::shared_ptr<GeneratorAdapter> adapter, ServiceConfig config);

    const GeneratorAdapter& adapter() const { return *adapter_; }
    const ServiceConfig& config() const { return config_; }

    std::string create_session();
    // Snapshot copy of a session's state.
    Session session(const std::string& id) const;

    std::vector<GalleryEntry> gallery(const std::string& id, int count, std::uint64_t page_seed);

    Exemplar select(const std::string& id, std::int64_t seed, Polarity polarity,
                    std::optional<double> weight = std::nullopt);
    void deselect(const std::string& id, const std::string& exemplar_id);
    WeightAdjustment adjust_weight(const std::string& id, const std::string& exemplar_id, int delta_steps);

    std::vector<RenderedTestImage> test_direction(const std::string& id);

    Mask create_mask(const std::string& id, std::int64_t test_seed, const Stroke& stroke);
    Mask cycle_mask(const std::string& id, const std::string& mask_id);
    std::vector<RenderedTestImage> apply_masks(const std::string& id);

    void add_test_image(const std::string& id, std::int64_t seed, std::optional<double> strength = std::nullopt);
    void remove_test_image(const std::string& id, std::int64_t seed);
    void set_strength(const std::string& id, std::int64_t seed, double strength);

    StoredDirection save_direction(const std::string& id, const std::string& name);
    std::vector<StoredDirection> list_directions() const;
    DirectionVector load_direction(const std::string& name) const;

    nlohmann::json export_log(const std::string& id) const;
    // Applies a recorded action log to a fresh session and returns its state.
    Session replay(const nlohmann::json& log) const;

    // Composed direction with active masks applied and unit norm, if any.
    std::optional<DirectionVector> current_direction(const Session& s) const;
    std::optional<DirectionVector> unmasked_direction(const Session& s) const;

    // The average vector is computed once and cached on disk.
    const FilterVector& average_vector() const;

private:
    struct Slot {
        mutable std::mutex mutex;
        Session state;
    };

    Slot& slot(const std::string& id) const;
    Session fresh_session(std::string id) const;

    // Executes one action against a session; shared by live endpoints and replay.
    nlohmann::json apply_action(Session& s, const DisentangleAction& action, bool replaying) const;
    void record(Session& s, DisentangleAction action, bool tested) const;
    std::vector<RenderedTestImage> render_tests(const Session& s) const;
    std::vector<ActiveMask> active_masks(const Session& s) const;
    template <typename F>
    auto with_session(const std::string& id, F&& f);
    template <typename F>
    auto with_session(const std::string& id, F&& f) const;

    std::shared_ptr<GeneratorAdapter> adapter_;
    ServiceConfig config_;
    std::unique_ptr<DirectionStore> store_;

    mutable std::mutex average_mutex_;
    mutable std::optional<FilterVector> average_;

    mutable std::mutex sessions_mutex_;
    std::map<std::string, std::unique_ptr<Slot>> sessions_;
    std::uint64_t next_session_ = 1;
};

nlohmann::json image_to_json(const GeneratedImage& image);
nlohmann::json session_to_json(const Session& s);

} // namespace fsteer
