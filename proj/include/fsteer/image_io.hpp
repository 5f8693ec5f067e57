#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "fsteer/generator.hpp"

namespace fsteer {

// Binary PPM (P6, maxval 255); channels quantized with round-half-up.
std::vector<unsigned char> encode_ppm(const GeneratedImage& image);
GeneratedImage decode_ppm(const std::vector<unsigned char>& bytes);

void write_ppm(const std::filesystem::path& p, const GeneratedImage& image);

// Area-average downscale by an integer factor (dimensions rounded down, at least 1).
GeneratedImage thumbnail(const GeneratedImage& image, int factor);

} // namespace fsteer
