#pragma once

#include <filesystem>
#include <mutex>
#include <string>
#include <vector>

#include "json.hpp"

#include "fsteer/direction.hpp"

namespace fsteer {

inline constexpr int kDirectionFormatVersion = 1;

// Text record: format_version, model_hash, layout_digest, name, normalized,
// values (shortest round-trip decimals, so reloads are bit-exact), provenance.
nlohmann::json direction_to_json(const DirectionVector& d, const std::string& model_hash);
// Refuses records from another model or layout with StructuralError.
DirectionVector direction_from_json(const nlohmann::json& j, const LayoutPtr& layout, const std::string& model_hash);

void write_direction_file(const std::filesystem::path& p, const DirectionVector& d, const std::string& model_hash);
DirectionVector read_direction_file(const std::filesystem::path& p, const LayoutPtr& layout,
                                    const std::string& model_hash);

struct StoredDirection {
    std::string name;
    std::string model_hash;
    std::filesystem::path path;
};

// Named directions in one directory, listed in save order.
class DirectionStore {
public:
    explicit DirectionStore(std::filesystem::path dir);

    // Throws ConflictError when the name is taken.
    StoredDirection save(const DirectionVector& d, const std::string& name, const std::string& model_hash);
    std::vector<StoredDirection> list() const;
    DirectionVector load(const std::string& name, const LayoutPtr& layout, const std::string& model_hash) const;

private:
    std::vector<StoredDirection> read_index() const;
    void write_index(const std::vector<StoredDirection>& index) const;
    std::filesystem::path file_for(const std::string& name) const;

    std::filesystem::path dir_;
    mutable std::mutex mutex_;
};

} // namespace fsteer
