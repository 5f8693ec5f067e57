#include "fsteer/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include <fmt/format.h>

#include "fsteer/error.hpp"

namespace fsteer {

std::vector<unsigned char> encode_ppm(const GeneratedImage& image) {
    const std::string header = fmt::format("P6\n{} {}\n255\n", image.width, image.height);
    std::vector<unsigned char> out(header.begin(), header.end());
    out.reserve(header.size() + image.pixels.size());
    for (double v : image.pixels) {
        out.push_back(static_cast<unsigned char>(std::floor(std::clamp(v, 0.0, 1.0) * 255.0 + 0.5)));
    }
    return out;
}

GeneratedImage decode_ppm(const std::vector<unsigned char>& bytes) {
    std::size_t pos = 0;
    auto next_token = [&]() {
        while (pos < bytes.size()) {
            if (bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else if (std::isspace(bytes[pos])) {
                ++pos;
            } else {
                break;
            }
        }
        std::string tok;
        while (pos < bytes.size() && !std::isspace(bytes[pos])) tok += static_cast<char>(bytes[pos++]);
        return tok;
    };
    if (next_token() != "P6") {
        throw ArgumentError("not a binary PPM image");
    }
    GeneratedImage img;
    try {
        img.width = std::stoi(next_token());
        img.height = std::stoi(next_token());
        if (std::stoi(next_token()) != 255) throw ArgumentError("only 8-bit PPM images are supported");
    } catch (const std::logic_error&) {
        throw ArgumentError("malformed PPM header");
    }
    ++pos; // single whitespace after maxval
    const std::size_t n = static_cast<std::size_t>(img.width) * img.height * 3;
    if (img.width <= 0 || img.height <= 0 || bytes.size() < pos + n) {
        throw ArgumentError("truncated PPM image");
    }
    img.pixels.resize(n);
    for (std::size_t i = 0; i < n; ++i) img.pixels[i] = bytes[pos + i] / 255.0;
    return img;
}

void write_ppm(const std::filesystem::path& p, const GeneratedImage& image) {
    const auto bytes = encode_ppm(image);
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(fmt::format("cannot write {}", p.string()));
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

GeneratedImage thumbnail(const GeneratedImage& image, int factor) {
    if (factor <= 0) throw ArgumentError("thumbnail factor must be positive");
    GeneratedImage t;
    t.height = std::max(1, image.height / factor);
    t.width = std::max(1, image.width / factor);
    t.source_seed = image.source_seed;
    t.applied_direction = image.applied_direction;
    t.pixels.assign(static_cast<std::size_t>(t.height) * t.width * 3, 0.0);
    for (int y = 0; y < t.height; ++y) {
        for (int x = 0; x < t.width; ++x) {
            for (int c = 0; c < 3; ++c) {
                double sum = 0.0;
                int count = 0;
                for (int dy = 0; dy < factor && y * factor + dy < image.height; ++dy) {
                    for (int dx = 0; dx < factor && x * factor + dx < image.width; ++dx) {
                        sum += image.at(y * factor + dy, x * factor + dx, c);
                        ++count;
                    }
                }
                t.at(y, x, c) = sum / count;
            }
        }
    }
    return t;
}

} // namespace fsteer
