#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"

#include "fsteer/filter_net.hpp"

namespace fsteer {

inline constexpr int kModelPackageVersion = 1;
inline constexpr const char* kManifestFile = "manifest.json";
inline constexpr const char* kWeightsFile = "weights.safetensors";

struct Tensor {
    std::vector<std::int64_t> shape;
    std::vector<double> data;
};

using TensorMap = std::map<std::string, Tensor>;

// safetensors container: little-endian u64 header length, JSON header, F64 payload.
std::vector<unsigned char> encode_safetensors(const TensorMap& tensors);
TensorMap decode_safetensors(const std::vector<unsigned char>& bytes);

TensorMap to_tensors(const FilterNetParams& params);
// Rebuilds parameters for `layout` from named tensors; throws LoadError naming the tensor.
FilterNetParams from_tensors(const TensorMap& tensors, const FilterLayout& layout, int latent_dim,
                             Resolution resolution);

// sha256 of the serialized weights file.
std::string weights_hash(const FilterNetParams& params);

// Writes manifest.json + weights.safetensors. `extra` is merged into the manifest.
void export_model_package(const FilterNetGenerator& gen, const std::filesystem::path& dir,
                          const nlohmann::json& extra = nlohmann::json::object());

std::shared_ptr<FilterNetGenerator> load_model_package(const std::filesystem::path& dir);

// The manifest of a package, validated but without loading weights.
nlohmann::json read_manifest(const std::filesystem::path& dir);

} // namespace fsteer
