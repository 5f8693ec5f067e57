#include "doctest.h"

#include <fstream>

#include "fsteer/direction_io.hpp"
#include "fsteer/eval.hpp"
#include "fsteer/image_io.hpp"
#include "fsteer/mask.hpp"
#include "fsteer/plugins.hpp"
#include "support/fixtures.hpp"

using namespace fsteer;
using nlohmann::json;

namespace {

int cli(const std::string& args) {
    const std::string cmd = std::string(FSTEER_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

} // namespace

TEST_CASE("cli: compose with identical positives and negatives gives zeros") {
    fixture::TempDir tmp("cli");
    const auto g = fixture::toy();
    std::ofstream(tmp / "m.json") << json{{"model_hash", g->model_hash()},
                                          {"exemplars",
                                           {{{"seed", 5}, {"polarity", "positive"}},
                                            {{"seed", 5}, {"polarity", "negative"}}}}}
                                         .dump();
    REQUIRE(cli("compose " + (tmp / "m.json").string() + " --out " + (tmp / "o").string()) == 0);
    const auto d = read_direction_file(tmp / "o" / "direction.json", g->layout(), g->model_hash());
    for (double v : d.values) CHECK(v == 0.0);
    const auto manifest = json::parse(fixture::slurp(tmp / "o" / "manifest.json"));
    CHECK(manifest.at("artifacts")[0].at("path") == "direction.json");
}

TEST_CASE("cli: edit at zero strength equals a plain sample") {
    fixture::TempDir tmp("cli");
    const auto g = fixture::toy();
    auto d = DirectionVector::zero(g->layout());
    d.values[3] = 1.0;
    write_direction_file(tmp / "d.json", d, g->model_hash());
    REQUIRE(cli("sample --seed 12 --out " + (tmp / "s").string()) == 0);
    REQUIRE(cli("edit --seed 12 --strength 0 --direction " + (tmp / "d.json").string() + " --out " +
                (tmp / "e").string()) == 0);
    CHECK(fixture::slurp(tmp / "s" / "sample-12.ppm") == fixture::slurp(tmp / "e" / "edit-12.ppm"));
    CHECK(fixture::slurp(tmp / "s" / "sample-12.ppm") ==
          std::string(reinterpret_cast<const char*>(encode_ppm(g->sample(12).image).data()),
                      encode_ppm(g->sample(12).image).size()));
}

TEST_CASE("cli: evaluate matches the library and is repeatable") {
    fixture::TempDir tmp("cli");
    const auto g = fixture::toy();
    auto d = DirectionVector::zero(g->layout(), "warm");
    d.values[g->layout()->offset(2)] = 1.0;
    write_direction_file(tmp / "d.json", d, g->model_hash());
    const std::string common = "evaluate --direction " + (tmp / "d.json").string() +
                               " --seeds 3,1,2 --target-attr region0_warm --out ";
    REQUIRE(cli(common + (tmp / "a").string()) == 0);
    REQUIRE(cli(common + (tmp / "b").string() + " --threads 3") == 0);

    const plugins::SaturationDetector det;
    const plugins::PooledEmbedder emb;
    const plugins::RegionAttributeClassifier cls;
    const std::vector<std::int64_t> seeds{3, 1, 2};
    const auto report = evaluate_direction(d, seeds, *g, {det, emb, cls}, EvalOptions{});
    CHECK(fixture::slurp(tmp / "a" / "report.csv") == report_to_csv(report));
    CHECK(fixture::slurp(tmp / "a" / "report.csv") == fixture::slurp(tmp / "b" / "report.csv"));
}

TEST_CASE("cli: mask-apply, calibrate, track, avg-vector, export-model") {
    fixture::TempDir tmp("cli");
    const auto g = fixture::toy();
    auto d = DirectionVector::zero(g->layout(), "two");
    d.values[g->layout()->offset(2)] = 1.0;
    d.values[g->layout()->offset(2) + 4] = 1.0;
    write_direction_file(tmp / "d.json", d, g->model_hash());
    const auto& r = toy::support("conv2", 4);
    std::vector<std::uint8_t> grid(256, 0);
    for (int y = r.y0; y < r.y1; ++y)
        for (int x = r.x0; x < r.x1; ++x) grid[y * 16 + x] = 1;
    const auto mask = Mask::make("m", {16, 16}, grid, MaskMode::discard, 1);
    std::ofstream(tmp / "mask.json") << mask_to_wire(mask).dump();

    REQUIRE(cli("mask-apply --direction " + (tmp / "d.json").string() + " --mask " + (tmp / "mask.json").string() +
                " --out " + (tmp / "snaps").string()) == 0);
    const auto masked = read_direction_file(tmp / "snaps" / "direction.json", g->layout(), g->model_hash());
    CHECK(std::abs(masked.values[g->layout()->offset(2) + 4]) < 1e-6);
    CHECK(masked.values[g->layout()->offset(2)] == doctest::Approx(1.0).epsilon(1e-6));

    REQUIRE(cli("calibrate --direction " + (tmp / "d.json").string() +
                " --seed 1 --plugin-detector builtin:strength-threshold:3 --out " + (tmp / "cal").string()) == 0);
    const auto cal = json::parse(fixture::slurp(tmp / "cal" / "calibration.json"));
    CHECK(cal.at("lambda_max").get<double>() == doctest::Approx(3.0).epsilon(1e-2));

    fixture::fs::copy_file(tmp / "d.json", tmp / "snaps" / "a-first.json");
    fixture::fs::rename(tmp / "snaps" / "direction.json", tmp / "snaps" / "b-second.json");
    REQUIRE(cli("track " + (tmp / "snaps").string() + " --n 2 --seed 1 --target-attr region0_warm --out " +
                (tmp / "tr").string()) == 0);
    const auto csv = fixture::slurp(tmp / "tr" / "track.csv");
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);

    REQUIRE(cli("avg-vector --n 20 --seed 2 --config /dev/null --out " + (tmp / "avg").string()) != 0);
    std::ofstream(tmp / "cfg.json") << json{{"cache_dir", (tmp / "cache").string()}}.dump();
    REQUIRE(cli("avg-vector --n 20 --seed 2 --config " + (tmp / "cfg.json").string() + " --out " +
                (tmp / "avg").string()) == 0);
    CHECK(fixture::fs::exists(tmp / "avg" / "average.json"));

    REQUIRE(cli("export-model --out " + (tmp / "pkg").string()) == 0);
    REQUIRE(cli("sample --seed 4 --model " + (tmp / "pkg").string() + " --out " + (tmp / "ps").string()) == 0);
    CHECK(fixture::slurp(tmp / "ps" / "sample-4.ppm").size() > 0);
}

TEST_CASE("cli: errors exit nonzero") {
    fixture::TempDir tmp("cli");
    CHECK(cli("edit --seed 1 --direction " + (tmp / "missing.json").string()) != 0);
    CHECK(cli("evaluate --direction x --seeds 1") != 0);
    CHECK(cli("bogus") != 0);
    CHECK(cli("sample --seed 1 --model /nope --out " + (tmp / "o").string()) != 0);
}
