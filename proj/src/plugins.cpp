#include "fsteer/plugins.hpp"

#include <cerrno>
#include <cmath>
#include <cstring>

#include <fcntl.h>
#include <poll.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <fmt/format.h>

#include "fsteer/error.hpp"
#include "fsteer/image_io.hpp"
#include "fsteer/toy_generator.hpp"

extern char** environ;

namespace fsteer::plugins {

bool StrengthThresholdDetector::detect(const GeneratedImage& image) const {
    if (!image.applied_direction) return true;
    return std::abs(image.applied_direction->strength) <= threshold_;
}

bool SaturationDetector::detect(const GeneratedImage& image) const {
    const std::size_t pixels = static_cast<std::size_t>(image.height) * image.width;
    std::size_t saturated = 0;
    for (std::size_t p = 0; p < pixels; ++p) {
        for (int c = 0; c < 3; ++c) {
            const double v = image.pixels[p * 3 + c];
            if (v <= 0.0 || v >= 1.0) {
                ++saturated;
                break;
            }
        }
    }
    return static_cast<double>(saturated) <= max_fraction_ * static_cast<double>(pixels);
}

std::size_t PooledEmbedder::dimension() const {
    const int cells = resolution_ / cell_;
    return static_cast<std::size_t>(cells) * cells * 3;
}

std::vector<double> PooledEmbedder::embed(const GeneratedImage& image) const {
    if (image.height != resolution_ || image.width != resolution_) {
        throw StructuralError(fmt::format("embedder expects {0}x{0} images, got {1}x{2}", resolution_, image.height,
                                          image.width));
    }
    const int cells = resolution_ / cell_;
    std::vector<double> out(dimension(), 0.0);
    for (int y = 0; y < resolution_; ++y) {
        for (int x = 0; x < resolution_; ++x) {
            const int cy = std::min(y / cell_, cells - 1);
            const int cx = std::min(x / cell_, cells - 1);
            for (int c = 0; c < 3; ++c) out[(static_cast<std::size_t>(cy) * cells + cx) * 3 + c] += image.at(y, x, c);
        }
    }
    const double area = static_cast<double>(cell_) * cell_;
    for (double& v : out) v /= area;
    return out;
}

RegionAttributeClassifier::RegionAttributeClassifier() {
    for (const auto& r : toy::support_table()) {
        if (r.layer_id != "conv2") continue;
        names_.push_back(fmt::format("region{}_warm", r.filter));
        names_.push_back(fmt::format("region{}_bright", r.filter));
    }
}

std::vector<bool> RegionAttributeClassifier::classify(const GeneratedImage& image) const {
    std::vector<bool> out;
    for (const auto& r : toy::support_table()) {
        if (r.layer_id != "conv2") continue;
        double warm = 0.0;
        double bright = 0.0;
        for (int y = r.y0; y < r.y1; ++y) {
            for (int x = r.x0; x < r.x1; ++x) {
                warm += image.at(y, x, 0) - image.at(y, x, 2);
                bright += (image.at(y, x, 0) + image.at(y, x, 1) + image.at(y, x, 2)) / 3.0;
            }
        }
        out.push_back(warm / r.area() > kWarmThreshold);
        out.push_back(bright / r.area() > kBrightThreshold);
    }
    return out;
}

ProcessResult run_process(const std::vector<std::string>& argv, const std::vector<unsigned char>& stdin_bytes) {
    if (argv.empty()) throw ArgumentError("empty plugin command");
    int in_pipe[2];
    int out_pipe[2];
    if (pipe(in_pipe) != 0) throw Error(fmt::format("pipe: {}", std::strerror(errno)));
    if (pipe(out_pipe) != 0) {
        close(in_pipe[0]);
        close(in_pipe[1]);
        throw Error(fmt::format("pipe: {}", std::strerror(errno)));
    }
    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_adddup2(&actions, in_pipe[0], STDIN_FILENO);
    posix_spawn_file_actions_adddup2(&actions, out_pipe[1], STDOUT_FILENO);
    for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1]}) posix_spawn_file_actions_addclose(&actions, fd);

    std::vector<char*> args;
    for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
    args.push_back(nullptr);

    pid_t pid = 0;
    const int rc = posix_spawnp(&pid, args[0], &actions, nullptr, args.data(), environ);
    posix_spawn_file_actions_destroy(&actions);
    close(in_pipe[0]);
    close(out_pipe[1]);
    if (rc != 0) {
        close(in_pipe[1]);
        close(out_pipe[0]);
        throw Error(fmt::format("cannot start plugin '{}': {}", argv[0], std::strerror(rc)));
    }

    // Interleave writing stdin and draining stdout so neither side blocks.
    ProcessResult result;
    std::size_t written = 0;
    int in_fd = in_pipe[1];
    if (stdin_bytes.empty()) {
        close(in_fd);
        in_fd = -1;
    } else {
        fcntl(in_fd, F_SETFL, fcntl(in_fd, F_GETFL) | O_NONBLOCK);
    }
    char buf[4096];
    bool out_open = true;
    while (out_open) {
        pollfd fds[2];
        int nfds = 0;
        fds[nfds++] = {out_pipe[0], POLLIN, 0};
        if (in_fd >= 0) fds[nfds++] = {in_fd, POLLOUT, 0};
        if (poll(fds, static_cast<nfds_t>(nfds), -1) < 0) {
            if (errno == EINTR) continue;
            break;
        }
        if (in_fd >= 0 && (fds[1].revents & (POLLOUT | POLLERR | POLLHUP))) {
            const ssize_t n = write(in_fd, stdin_bytes.data() + written, stdin_bytes.size() - written);
            if (n > 0) written += static_cast<std::size_t>(n);
            if (n < 0 && errno != EAGAIN) written = stdin_bytes.size();
            if (written >= stdin_bytes.size()) {
                close(in_fd);
                in_fd = -1;
            }
        }
        if (fds[0].revents & (POLLIN | POLLHUP | POLLERR)) {
            const ssize_t n = read(out_pipe[0], buf, sizeof(buf));
            if (n > 0) {
                result.stdout_text.append(buf, static_cast<std::size_t>(n));
            } else if (n == 0 || errno != EINTR) {
                out_open = false;
            }
        }
    }
    if (in_fd >= 0) close(in_fd);
    close(out_pipe[0]);
    int status = 0;
    while (waitpid(pid, &status, 0) < 0 && errno == EINTR) {
    }
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return result;
}

ExternalPlugin::ExternalPlugin(std::string command) : command_(std::move(command)) {
    const auto r = run_process({command_, "capabilities"}, {});
    if (r.exit_code != 0) {
        throw LoadError(fmt::format("plugin '{}' capabilities query exited with {}", command_, r.exit_code));
    }
    try {
        caps_ = nlohmann::json::parse(r.stdout_text);
        caps_.at("id").get<std::string>();
        caps_.at("capability").get<std::string>();
    } catch (const nlohmann::json::exception&) {
        throw LoadError(fmt::format("plugin '{}' returned malformed capabilities", command_));
    }
}

nlohmann::json ExternalPlugin::run(const GeneratedImage& image) const {
    const auto r = run_process({command_, "run"}, encode_ppm(image));
    if (r.exit_code != 0) {
        throw Error(fmt::format("plugin '{}' exited with {}", command_, r.exit_code));
    }
    try {
        return nlohmann::json::parse(r.stdout_text);
    } catch (const nlohmann::json::parse_error&) {
        throw Error(fmt::format("plugin '{}' returned malformed output", command_));
    }
}

namespace {

void require_capability(const ExternalPlugin& p, const char* cap) {
    if (p.capabilities().at("capability").get<std::string>() != cap) {
        throw ArgumentError(fmt::format("plugin '{}' does not provide '{}'", p.id(), cap));
    }
}

} // namespace

ExternalDetector::ExternalDetector(std::string command) : plugin_(std::move(command)) {
    require_capability(plugin_, "detect");
}

bool ExternalDetector::detect(const GeneratedImage& image) const {
    return plugin_.run(image).at("present").get<bool>();
}

ExternalEmbedder::ExternalEmbedder(std::string command) : plugin_(std::move(command)) {
    require_capability(plugin_, "embed");
    dimension_ = plugin_.capabilities().at("dimension").get<std::size_t>();
}

std::vector<double> ExternalEmbedder::embed(const GeneratedImage& image) const {
    auto v = plugin_.run(image).at("embedding").get<std::vector<double>>();
    if (v.size() != dimension_) {
        throw StructuralError(fmt::format("plugin '{}' returned {} values, declared {}", id(), v.size(), dimension_));
    }
    return v;
}

ExternalClassifier::ExternalClassifier(std::string command) : plugin_(std::move(command)) {
    require_capability(plugin_, "classify");
    names_ = plugin_.capabilities().at("attributes").get<std::vector<std::string>>();
}

std::vector<bool> ExternalClassifier::classify(const GeneratedImage& image) const {
    auto v = plugin_.run(image).at("attributes").get<std::vector<bool>>();
    if (v.size() != names_.size()) {
        throw StructuralError(fmt::format("plugin '{}' returned {} attributes, declared {}", id(), v.size(),
                                          names_.size()));
    }
    return v;
}

namespace {

struct BuiltinSpec {
    std::string name;
    std::string arg;
};

std::optional<BuiltinSpec> parse_builtin(const std::string& spec) {
    const std::string prefix = "builtin:";
    if (spec.rfind(prefix, 0) != 0) return std::nullopt;
    const auto rest = spec.substr(prefix.size());
    const auto colon = rest.find(':');
    if (colon == std::string::npos) return BuiltinSpec{rest, ""};
    return BuiltinSpec{rest.substr(0, colon), rest.substr(colon + 1)};
}

double parse_number(const std::string& s, const std::string& spec) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::logic_error&) {
        throw ArgumentError(fmt::format("bad numeric argument in plugin spec '{}'", spec));
    }
}

} // namespace

std::unique_ptr<DetectorInterface> make_detector(const std::string& spec) {
    if (auto b = parse_builtin(spec)) {
        if (b->name == "strength-threshold") {
            return std::make_unique<StrengthThresholdDetector>(b->arg.empty() ? 3.0 : parse_number(b->arg, spec));
        }
        if (b->name == "toy-saturation") {
            return std::make_unique<SaturationDetector>(b->arg.empty() ? 0.10 : parse_number(b->arg, spec));
        }
        throw ArgumentError(fmt::format("unknown builtin detector '{}'", b->name));
    }
    return std::make_unique<ExternalDetector>(spec);
}

std::unique_ptr<EmbeddingInterface> make_embedder(const std::string& spec) {
    if (auto b = parse_builtin(spec)) {
        if (b->name == "toy-pooled-embedder") return std::make_unique<PooledEmbedder>();
        throw ArgumentError(fmt::format("unknown builtin embedder '{}'", b->name));
    }
    return std::make_unique<ExternalEmbedder>(spec);
}

std::unique_ptr<AttributeClassifierInterface> make_classifier(const std::string& spec) {
    if (auto b = parse_builtin(spec)) {
        if (b->name == "toy-region-classifier") return std::make_unique<RegionAttributeClassifier>();
        throw ArgumentError(fmt::format("unknown builtin classifier '{}'", b->name));
    }
    return std::make_unique<ExternalClassifier>(spec);
}

std::size_t resolve_attribute(const AttributeClassifierInterface& classifier, const std::string& target) {
    const auto& names = classifier.attribute_names();
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (names[i] == target) return i;
    }
    try {
        std::size_t used = 0;
        const long idx = std::stol(target, &used);
        if (used == target.size() && idx >= 0 && static_cast<std::size_t>(idx) < names.size()) {
            return static_cast<std::size_t>(idx);
        }
    } catch (const std::logic_error&) {
    }
    throw ArgumentError(fmt::format("unknown target attribute '{}'", target));
}

} // namespace fsteer::plugins
