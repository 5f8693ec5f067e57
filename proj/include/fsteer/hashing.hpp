#pragma once

#include <span>
#include <string>
#include <string_view>

namespace fsteer {

std::string sha256_hex(std::string_view data);
std::string sha256_hex(std::span<const unsigned char> data);

std::string base64_encode(std::span<const unsigned char> data);

} // namespace fsteer
