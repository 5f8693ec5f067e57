#include "fsteer/direction_io.hpp"

#include <algorithm>
#include <fstream>

#include <fmt/format.h>

#include "fsteer/error.hpp"

namespace fsteer {

namespace fs = std::filesystem;

namespace {

nlohmann::json read_json(const fs::path& p) {
    std::ifstream in(p);
    if (!in) {
        throw NotFoundError(fmt::format("cannot open {}", p.string()));
    }
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error&) {
        throw LoadError(fmt::format("{} is not valid JSON", p.string()));
    }
}

void write_text_atomic(const fs::path& p, const std::string& text) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    const auto tmp = fs::path(p).concat(".tmp");
    {
        std::ofstream out(tmp, std::ios::trunc | std::ios::binary);
        if (!out) throw Error(fmt::format("cannot write {}", p.string()));
        out << text;
    }
    fs::rename(tmp, p);
}

bool valid_name(const std::string& name) {
    if (name.empty() || name.size() > 128) return false;
    return std::all_of(name.begin(), name.end(), [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
    }) && name.front() != '.';
}

} // namespace

nlohmann::json direction_to_json(const DirectionVector& d, const std::string& model_hash) {
    auto prov = nlohmann::json::array();
    for (const auto& a : d.provenance) prov.push_back(a.to_json());
    return {{"format_version", kDirectionFormatVersion},
            {"model_hash", model_hash},
            {"layout_digest", d.layout->digest()},
            {"name", d.name},
            {"normalized", d.normalized},
            {"values", d.values},
            {"provenance", std::move(prov)}};
}

DirectionVector direction_from_json(const nlohmann::json& j, const LayoutPtr& layout, const std::string& model_hash) {
    try {
        const int version = j.at("format_version").get<int>();
        if (version != kDirectionFormatVersion) {
            throw UnsupportedVersionError(fmt::format("direction format_version {} is not supported", version));
        }
        const auto hash = j.at("model_hash").get<std::string>();
        if (hash != model_hash) {
            throw StructuralError(
                fmt::format("direction was made for model {} but the loaded model is {}", hash, model_hash));
        }
        if (j.at("layout_digest").get<std::string>() != layout->digest()) {
            throw StructuralError("direction layout digest does not match the loaded model");
        }
        auto d = DirectionVector::make(layout, j.at("values").get<std::vector<double>>(), j.at("name").get<std::string>());
        d.normalized = j.at("normalized").get<bool>();
        for (const auto& a : j.at("provenance")) d.provenance.push_back(DisentangleAction::from_json(a));
        return d;
    } catch (const nlohmann::json::exception& e) {
        throw LoadError(fmt::format("malformed direction record: {}", e.what()));
    }
}

void write_direction_file(const fs::path& p, const DirectionVector& d, const std::string& model_hash) {
    write_text_atomic(p, direction_to_json(d, model_hash).dump(2) + "\n");
}

DirectionVector read_direction_file(const fs::path& p, const LayoutPtr& layout, const std::string& model_hash) {
    return direction_from_json(read_json(p), layout, model_hash);
}

DirectionStore::DirectionStore(fs::path dir) : dir_(std::move(dir)) {}

fs::path DirectionStore::file_for(const std::string& name) const {
    return dir_ / (name + ".direction.json");
}

std::vector<StoredDirection> DirectionStore::read_index() const {
    const auto p = dir_ / "index.json";
    if (!fs::exists(p)) return {};
    const auto doc = read_json(p);
    std::vector<StoredDirection> out;
    for (const auto& e : doc.at("directions")) {
        out.push_back({e.at("name").get<std::string>(), e.at("model_hash").get<std::string>(),
                       file_for(e.at("name").get<std::string>())});
    }
    return out;
}

void DirectionStore::write_index(const std::vector<StoredDirection>& index) const {
    auto arr = nlohmann::json::array();
    for (const auto& s : index) arr.push_back({{"name", s.name}, {"model_hash", s.model_hash}});
    write_text_atomic(dir_ / "index.json", nlohmann::json{{"directions", arr}}.dump(2) + "\n");
}

StoredDirection DirectionStore::save(const DirectionVector& d, const std::string& name, const std::string& model_hash) {
    if (!valid_name(name)) {
        throw ArgumentError(fmt::format("invalid direction name '{}'", name));
    }
    std::lock_guard<std::mutex> lock(mutex_);
    auto index = read_index();
    for (const auto& s : index) {
        if (s.name == name) throw ConflictError(fmt::format("a direction named '{}' already exists", name));
    }
    DirectionVector named = d;
    named.name = name;
    write_direction_file(file_for(name), named, model_hash);
    StoredDirection rec{name, model_hash, file_for(name)};
    index.push_back(rec);
    write_index(index);
    return rec;
}

std::vector<StoredDirection> DirectionStore::list() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return read_index();
}

DirectionVector DirectionStore::load(const std::string& name, const LayoutPtr& layout,
                                     const std::string& model_hash) const {
    std::lock_guard<std::mutex> lock(mutex_);
    for (const auto& s : read_index()) {
        if (s.name == name) return read_direction_file(s.path, layout, model_hash);
    }
    throw NotFoundError(fmt::format("no direction named '{}'", name));
}

} // namespace fsteer
