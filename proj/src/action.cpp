#include "fsteer/action.hpp"

#include <array>
#include <utility>

#include "fsteer/error.hpp"

namespace fsteer {

namespace {

constexpr std::array<std::pair<ActionKind, std::string_view>, 11> kNames{{
    {ActionKind::select, "select"},
    {ActionKind::deselect, "deselect"},
    {ActionKind::weight_adjust, "weight_adjust"},
    {ActionKind::compose, "compose"},
    {ActionKind::mask_create, "mask_create"},
    {ActionKind::mask_cycle, "mask_cycle"},
    {ActionKind::mask_apply, "mask_apply"},
    {ActionKind::save, "save"},
    {ActionKind::test_image_add, "test_image_add"},
    {ActionKind::test_image_remove, "test_image_remove"},
    {ActionKind::strength_set, "strength_set"},
}};

} // namespace

std::string_view to_string(ActionKind kind) {
    for (const auto& [k, name] : kNames) {
        if (k == kind) return name;
    }
    return "unknown";
}

ActionKind action_kind_from_string(std::string_view s) {
    for (const auto& [k, name] : kNames) {
        if (name == s) return k;
    }
    throw ArgumentError("unknown action kind '" + std::string(s) + "'");
}

nlohmann::json DisentangleAction::to_json() const {
    return {{"kind", std::string(to_string(kind))}, {"payload", payload}, {"timestamp_ms", timestamp_ms}};
}

DisentangleAction DisentangleAction::from_json(const nlohmann::json& j) {
    DisentangleAction a;
    a.kind = action_kind_from_string(j.at("kind").get<std::string>());
    a.payload = j.value("payload", nlohmann::json::object());
    a.timestamp_ms = j.value("timestamp_ms", std::int64_t{0});
    return a;
}

} // namespace fsteer
