#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>

#include "config.hpp"
#include "manifest.hpp"
#include "svgplot.hpp"

using namespace tomopair;
namespace fs = std::filesystem;

namespace {

#ifndef TOMOPAIR_BIN
#define TOMOPAIR_BIN ""
#endif

int run_cli(const std::string& args) {
    std::string cmd = std::string(TOMOPAIR_BIN) + " " + args + " > /dev/null 2>&1";
    int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string tiny_config_json() {
    return R"({
      "version": 1,
      "seed": 5,
      "scheme": "t2t-df",
      "phantom": {"shape": [16, 32, 32], "membranes": 1, "filaments": 1, "blobs": 4,
                  "blob_radius": [1.5, 2.5]},
      "acquisition": {"tilt_max": 60.0, "tilt_step": 15.0, "frames_per_tilt": 2,
                      "dose_per_frame": 20.0},
      "pairing": {"patch_count": 24, "patch_size": [8, 8, 8]},
      "unet": {"base_channels": 2},
      "train": {"epochs": 1, "batch_size": 4},
      "detection": {"enabled": false}
    })";
}

nlohmann::json read_json_file(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    nlohmann::json doc;
    in >> doc;
    return doc;
}

} // namespace

TEST_CASE("config: defaults materialize and schemes gate the network rank") {
    PipelineConfig cfg = parse_config(R"({"version": 1})");
    CHECK(cfg.scheme == "t2t-df");
    CHECK(cfg.network().spatial_dims == 3);
    CHECK(cfg.network().base_channels == 8);
    CHECK(cfg.patch_count() == 1200);
    CHECK(cfg.patch_size() == std::vector<std::size_t>{64, 64, 64});

    PipelineConfig p2p = parse_config(R"({"version": 1, "scheme": "p2p-df"})");
    CHECK(p2p.network().spatial_dims == 2);
    CHECK(p2p.network().base_channels == 16);
    CHECK(p2p.patch_count() == 1000);
    CHECK(p2p.patch_size() == std::vector<std::size_t>{128, 128});
}

TEST_CASE("config: unknown keys rejected at every level") {
    CHECK_THROWS_AS(parse_config(R"({"version": 1, "bogus": 2})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"version": 1, "phantom": {"shap": [4,4,4]}})"),
                    ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"version": 1, "train": {"lr": 0.1}})"), ConfigError);
}

TEST_CASE("config: version and scheme validated") {
    CHECK_THROWS_AS(parse_config(R"({"version": 2})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({})"), ConfigError);
    CHECK_THROWS_AS(parse_config(R"({"version": 1, "scheme": "p2p-xxx"})"), ConfigError);
    CHECK_THROWS_AS(parse_config("not json"), ConfigError);
}

TEST_CASE("config: canonical serialization is deterministic and parseable") {
    PipelineConfig cfg = parse_config(tiny_config_json());
    std::string c1 = canonical_config(cfg);
    std::string c2 = canonical_config(parse_config(tiny_config_json()));
    CHECK(c1 == c2);
    CHECK(nlohmann::json::parse(c1).at("scheme") == "t2t-df");
}

TEST_CASE("manifest: fnv1a64 matches frozen reference values") {
    CHECK(fnv1a64("", 0) == 0xCBF29CE484222325ull);
    CHECK(fnv1a64_str("a") == 0xAF63DC4C8601EC8Cull);
    CHECK(fnv1a64_str("tomopair") == fnv1a64("tomopair", 8));
}

TEST_CASE("svg: line plot carries polylines, labels, and is deterministic") {
    PlotSeries s1{"alpha", {{0.0, 0.1}, {0.5, 0.8}, {1.0, 0.2}}};
    PlotSeries s2{"beta", {{0.0, 0.9}, {1.0, 0.4}}};
    std::string svg = render_line_plot("demo", "x", "y", {s1, s2});
    CHECK(svg.find("<svg") == 0);
    CHECK(svg.find("polyline") != std::string::npos);
    CHECK(svg.find("alpha") != std::string::npos);
    CHECK(svg.find("beta") != std::string::npos);
    CHECK(svg == render_line_plot("demo", "x", "y", {s1, s2}));
}

TEST_CASE("cli: pipeline runs, reruns byte-identically, respects --threads") {
    REQUIRE(fs::exists(TOMOPAIR_BIN));
    fs::path dir = fs::temp_directory_path() / "tomopair_cli_test";
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::ofstream(dir / "cfg.json") << tiny_config_json();

    std::string cfg = (dir / "cfg.json").string();
    int rc1 = run_cli("pipeline --config " + cfg + " --out-dir " + (dir / "r1").string() +
                      " --threads 1");
    int rc2 = run_cli("pipeline --config " + cfg + " --out-dir " + (dir / "r2").string() +
                      " --threads 2");
    REQUIRE(rc1 == 0);
    REQUIRE(rc2 == 0);

    nlohmann::json m1 = read_json_file((dir / "r1" / "run_manifest.json").string());
    nlohmann::json m2 = read_json_file((dir / "r2" / "run_manifest.json").string());
    CHECK(m1 == m2); // identical outputs, hashes, config hash; no timestamps

    fs::remove_all(dir);
}

TEST_CASE("cli: unknown scheme is a usage/config error with exit code 2") {
    REQUIRE(fs::exists(TOMOPAIR_BIN));
    CHECK(run_cli("pipeline --scheme nope") == 2);
    CHECK(run_cli("definitely-not-a-subcommand") == 2);
}

TEST_CASE("cli: missing inputs give a runtime error with exit code 1") {
    REQUIRE(fs::exists(TOMOPAIR_BIN));
    CHECK(run_cli("fsc --a /nonexistent_a.mrc --b /nonexistent_b.mrc --out-dir /tmp") == 1);
}
