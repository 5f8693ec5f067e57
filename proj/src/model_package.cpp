#include "fsteer/model_package.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <set>

#include <fmt/format.h>

#include "fsteer/error.hpp"
#include "fsteer/hashing.hpp"

namespace fsteer {

static_assert(std::endian::native == std::endian::little, "safetensors payloads are little-endian");

namespace fs = std::filesystem;

namespace {

constexpr const char* kArchitecture = "gated-pointwise-v1";

std::vector<unsigned char> read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) {
        throw LoadError(fmt::format("cannot open {}", p.string()));
    }
    return std::vector<unsigned char>(std::istreambuf_iterator<char>(in), {});
}

void write_file(const fs::path& p, std::span<const unsigned char> bytes) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error(fmt::format("cannot write {}", p.string()));
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::size_t element_count(const std::vector<std::int64_t>& shape) {
    std::size_t n = 1;
    for (auto d : shape) {
        if (d < 0) throw LoadError("negative tensor dimension");
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

const Tensor& require_tensor(const TensorMap& t, const std::string& name, const std::vector<std::int64_t>& shape) {
    auto it = t.find(name);
    if (it == t.end()) {
        throw LoadError(fmt::format("weights: missing tensor '{}'", name));
    }
    if (it->second.shape != shape) {
        throw LoadError(fmt::format("weights: tensor '{}' has shape {}, manifest implies {}", name,
                                    nlohmann::json(it->second.shape).dump(), nlohmann::json(shape).dump()));
    }
    return it->second;
}

template <typename T>
T manifest_field(const nlohmann::json& m, const char* field) {
    if (!m.contains(field)) {
        throw LoadError(fmt::format("manifest: missing field '{}'", field));
    }
    try {
        return m.at(field).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw LoadError(fmt::format("manifest: field '{}' has the wrong type", field));
    }
}

} // namespace

std::vector<unsigned char> encode_safetensors(const TensorMap& tensors) {
    nlohmann::json header = nlohmann::json::object();
    std::size_t offset = 0;
    for (const auto& [name, t] : tensors) {
        if (element_count(t.shape) != t.data.size()) {
            throw StructuralError(fmt::format("tensor '{}' data does not match its shape", name));
        }
        const std::size_t bytes = t.data.size() * sizeof(double);
        header[name] = {{"dtype", "F64"}, {"shape", t.shape}, {"data_offsets", {offset, offset + bytes}}};
        offset += bytes;
    }
    std::string h = header.dump();
    // payload alignment
    while ((h.size() % 8) != 0) h.push_back(' ');

    std::vector<unsigned char> out(8 + h.size() + offset);
    const std::uint64_t hlen = h.size();
    std::memcpy(out.data(), &hlen, 8);
    std::memcpy(out.data() + 8, h.data(), h.size());
    std::size_t pos = 8 + h.size();
    for (const auto& [name, t] : tensors) {
        std::memcpy(out.data() + pos, t.data.data(), t.data.size() * sizeof(double));
        pos += t.data.size() * sizeof(double);
    }
    return out;
}

TensorMap decode_safetensors(const std::vector<unsigned char>& bytes) {
    if (bytes.size() < 8) {
        throw LoadError("weights: file too short");
    }
    std::uint64_t hlen = 0;
    std::memcpy(&hlen, bytes.data(), 8);
    if (hlen > bytes.size() - 8) {
        throw LoadError("weights: header length exceeds file size");
    }
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(bytes.begin() + 8, bytes.begin() + 8 + static_cast<std::ptrdiff_t>(hlen));
    } catch (const nlohmann::json::parse_error& e) {
        throw LoadError(fmt::format("weights: garbled header ({})", e.what()));
    }
    const std::size_t data_start = 8 + hlen;
    const std::size_t data_size = bytes.size() - data_start;
    TensorMap out;
    for (const auto& [name, meta] : header.items()) {
        if (name == "__metadata__") continue;
        if (meta.value("dtype", "") != "F64") {
            throw LoadError(fmt::format("weights: tensor '{}' is not F64", name));
        }
        Tensor t;
        t.shape = meta.at("shape").get<std::vector<std::int64_t>>();
        const auto offs = meta.at("data_offsets").get<std::vector<std::size_t>>();
        if (offs.size() != 2 || offs[0] > offs[1] || offs[1] > data_size) {
            throw LoadError(fmt::format("weights: tensor '{}' has bad data offsets", name));
        }
        const std::size_t count = element_count(t.shape);
        if (offs[1] - offs[0] != count * sizeof(double)) {
            throw LoadError(fmt::format("weights: tensor '{}' byte size does not match its shape", name));
        }
        t.data.resize(count);
        std::memcpy(t.data.data(), bytes.data() + data_start + offs[0], count * sizeof(double));
        out.emplace(name, std::move(t));
    }
    return out;
}

TensorMap to_tensors(const FilterNetParams& params) {
    TensorMap t;
    const std::int64_t n = params.latent_dim;
    std::int64_t prev = 0;
    for (const auto& layer : params.layers) {
        const auto& s = layer.spec;
        const std::int64_t f = s.filter_count;
        t[s.id + ".latent_proj"] = {{f, n}, layer.latent_proj};
        t[s.id + ".spatial_bias"] = {{f, s.height, s.width}, layer.spatial_bias};
        t[s.id + ".support"] = {{f, s.height, s.width}, layer.support};
        t[s.id + ".amplitude"] = {{f}, layer.amplitude};
        if (prev > 0) t[s.id + ".mix"] = {{f, prev}, layer.mix};
        prev = f;
    }
    t["to_rgb"] = {{3, prev}, params.to_rgb};
    t["rgb_bias"] = {{3}, {params.rgb_bias.begin(), params.rgb_bias.end()}};
    return t;
}

FilterNetParams from_tensors(const TensorMap& tensors, const FilterLayout& layout, int latent_dim,
                             Resolution resolution) {
    std::set<std::string> weight_layers;
    const std::string suffix = ".amplitude";
    for (const auto& [name, _] : tensors) {
        if (name.size() > suffix.size() && name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0) {
            weight_layers.insert(name.substr(0, name.size() - suffix.size()));
        }
    }
    if (weight_layers.size() != layout.layer_count()) {
        throw LoadError(fmt::format("layers: manifest declares {} layers, weights contain {}", layout.layer_count(),
                                    weight_layers.size()));
    }

    FilterNetParams p;
    p.latent_dim = latent_dim;
    p.resolution = resolution;
    std::int64_t prev = 0;
    for (const auto& s : layout.layers()) {
        const std::int64_t f = s.filter_count;
        FilterNetLayer layer;
        layer.spec = s;
        layer.latent_proj = require_tensor(tensors, s.id + ".latent_proj", {f, latent_dim}).data;
        layer.spatial_bias = require_tensor(tensors, s.id + ".spatial_bias", {f, s.height, s.width}).data;
        layer.support = require_tensor(tensors, s.id + ".support", {f, s.height, s.width}).data;
        layer.amplitude = require_tensor(tensors, s.id + ".amplitude", {f}).data;
        if (prev > 0) layer.mix = require_tensor(tensors, s.id + ".mix", {f, prev}).data;
        prev = f;
        p.layers.push_back(std::move(layer));
    }
    p.to_rgb = require_tensor(tensors, "to_rgb", {3, prev}).data;
    const auto& bias = require_tensor(tensors, "rgb_bias", {3}).data;
    std::copy(bias.begin(), bias.end(), p.rgb_bias.begin());
    return p;
}

std::string weights_hash(const FilterNetParams& params) {
    return sha256_hex(encode_safetensors(to_tensors(params)));
}

void export_model_package(const FilterNetGenerator& gen, const fs::path& dir, const nlohmann::json& extra) {
    fs::create_directories(dir);
    const auto bytes = encode_safetensors(to_tensors(gen.params()));
    write_file(dir / kWeightsFile, bytes);

    nlohmann::json m = extra.is_object() ? extra : nlohmann::json::object();
    m["format_version"] = kModelPackageVersion;
    m["architecture"] = kArchitecture;
    m["model_hash"] = gen.model_hash();
    m["latent_dim"] = gen.latent_dim();
    m["resolution"] = {gen.resolution().height, gen.resolution().width};
    m["layers"] = gen.layout()->to_json();
    m["weights"] = kWeightsFile;
    const auto text = m.dump(2) + "\n";
    write_file(dir / kManifestFile, std::span<const unsigned char>(
                                         reinterpret_cast<const unsigned char*>(text.data()), text.size()));
}

nlohmann::json read_manifest(const fs::path& dir) {
    const auto raw = read_file(dir / kManifestFile);
    nlohmann::json m;
    try {
        m = nlohmann::json::parse(raw.begin(), raw.end());
    } catch (const nlohmann::json::parse_error&) {
        throw LoadError("manifest: not valid JSON");
    }
    if (!m.is_object()) {
        throw LoadError("manifest: expected an object");
    }
    const int version = manifest_field<int>(m, "format_version");
    if (version != kModelPackageVersion) {
        throw UnsupportedVersionError(
            fmt::format("manifest: unsupported format_version {} (supported: {})", version, kModelPackageVersion));
    }
    const auto arch = manifest_field<std::string>(m, "architecture");
    if (arch != kArchitecture) {
        throw LoadError(fmt::format("manifest: unsupported architecture '{}'", arch));
    }
    manifest_field<std::string>(m, "model_hash");
    manifest_field<int>(m, "latent_dim");
    const auto res = manifest_field<std::vector<int>>(m, "resolution");
    if (res.size() != 2) {
        throw LoadError("manifest: field 'resolution' must be [height, width]");
    }
    if (!m.contains("layers")) {
        throw LoadError("manifest: missing field 'layers'");
    }
    return m;
}

std::shared_ptr<FilterNetGenerator> load_model_package(const fs::path& dir) {
    const auto m = read_manifest(dir);
    FilterLayout layout = [&] {
        try {
            return FilterLayout::from_json(m.at("layers"));
        } catch (const nlohmann::json::exception&) {
            throw LoadError("manifest: field 'layers' is malformed");
        } catch (const StructuralError& e) {
            throw LoadError(fmt::format("manifest: field 'layers': {}", e.what()));
        }
    }();
    const auto res = m.at("resolution").get<std::vector<int>>();
    const int latent_dim = m.at("latent_dim").get<int>();
    const auto weights_name = m.value("weights", std::string(kWeightsFile));
    const auto bytes = read_file(dir / weights_name);
    const auto hash = sha256_hex(bytes);
    if (hash != m.at("model_hash").get<std::string>()) {
        throw LoadError("manifest: field 'model_hash' does not match the weights file");
    }
    auto params = from_tensors(decode_safetensors(bytes), layout, latent_dim, Resolution{res[0], res[1]});
    try {
        return std::make_shared<FilterNetGenerator>(std::move(params), hash);
    } catch (const StructuralError& e) {
        throw LoadError(fmt::format("weights: {}", e.what()));
    }
}

} // namespace fsteer
