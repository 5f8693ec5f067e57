#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace fsteer {

enum class ActionKind {
    select,
    deselect,
    weight_adjust,
    compose,
    mask_create,
    mask_cycle,
    mask_apply,
    save,
    // Live-testing bookkeeping; recorded so the log replays a session completely.
    test_image_add,
    test_image_remove,
    strength_set,
};

std::string_view to_string(ActionKind kind);
ActionKind action_kind_from_string(std::string_view s);

// One user interaction. Engine operations record these with timestamp 0;
// the session layer stamps wall-clock milliseconds.
struct DisentangleAction {
    ActionKind kind = ActionKind::compose;
    nlohmann::json payload = nlohmann::json::object();
    std::int64_t timestamp_ms = 0;

    nlohmann::json to_json() const;
    static DisentangleAction from_json(const nlohmann::json& j);

    bool operator==(const DisentangleAction& other) const {
        return kind == other.kind && payload == other.payload && timestamp_ms == other.timestamp_ms;
    }
};

using Provenance = std::vector<DisentangleAction>;

} // namespace fsteer
