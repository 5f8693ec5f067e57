#include "fsteer/hashing.hpp"

#include <array>

#include <fmt/format.h>
#include <openssl/evp.h>
#include <openssl/sha.h>

namespace fsteer {

std::string sha256_hex(std::span<const unsigned char> data) {
    std::array<unsigned char, SHA256_DIGEST_LENGTH> md{};
    SHA256(data.data(), data.size(), md.data());
    std::string out;
    out.reserve(md.size() * 2);
    for (unsigned char b : md) {
        out += fmt::format("{:02x}", b);
    }
    return out;
}

std::string sha256_hex(std::string_view data) {
    return sha256_hex(std::span<const unsigned char>(
        reinterpret_cast<const unsigned char*>(data.data()), data.size()));
}

std::string base64_encode(std::span<const unsigned char> data) {
    std::string out(4 * ((data.size() + 2) / 3), '\0');
    const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), data.data(),
                                  static_cast<int>(data.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
}

} // namespace fsteer
