#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "motkit/cli.hpp"
#include "motkit/formats.hpp"
#include "motkit/simworld.hpp"

using namespace motkit;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CliResult {
    int code = 0;
    std::string out;
    std::string err;
};

CliResult run_cli(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    CliResult result;
    result.code = cli::run(args, out, err);
    result.out = out.str();
    result.err = err.str();
    return result;
}

// Every test works under its own wiped directory.
fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "motkit_cli_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write_text(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    REQUIRE(out.good());
    out << content;
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::map<std::string, std::string> dir_contents(const fs::path& dir) {
    std::map<std::string, std::string> files;
    for (const auto& entry : fs::recursive_directory_iterator(dir))
        if (entry.is_regular_file())
            files[fs::relative(entry.path(), dir).string()] = read_text(entry.path());
    return files;
}

// The stderr contract: one JSON object per line with an error kind.
json parse_diagnostic(const std::string& err_text) {
    REQUIRE(!err_text.empty());
    const auto eol = err_text.find('\n');
    return json::parse(err_text.substr(0, eol));
}

fs::path write_benchmark_manifest(const fs::path& dir, int count, int frames = 40,
                                  std::uint64_t seed = 11) {
    const fs::path file = dir / "scenarios.json";
    const json doc{{"scenarios",
                    json::array({json{{"generate",
                                       json{{"seed", seed},
                                            {"count", count},
                                            {"params", json{{"num_frames", frames}}}}}}})}};
    write_text(file, doc.dump(2));
    return file;
}

// Static camera, no occluders, three agents that never overlap on screen.
fs::path write_clean_manifest(const fs::path& dir) {
    sim::ScenarioConfig cfg;
    cfg.name = "clean";
    cfg.seed = 5;
    cfg.num_frames = 20;
    cfg.image_size = {192, 108};
    const geom::CameraIntrinsics intr{110, 110, 96, 54};
    const geom::CameraPose pose = geom::pose_from_position_yaw({0, 0, 0}, 0.0);
    cfg.camera.assign(cfg.num_frames, {intr, pose});
    sim::AgentSpec car;
    car.id = 1;
    car.category = Category::Car;
    car.size3d = {1.8, 1.5, 4.2};
    car.waypoints = {{0, {-5.5, 0.4, 12}}, {19, {-4.5, 0.4, 12}}};
    sim::AgentSpec ped;
    ped.id = 2;
    ped.category = Category::Pedestrian;
    ped.size3d = {0.6, 1.7, 0.6};
    ped.waypoints = {{0, {0.0, 0.2, 8}}, {19, {0.3, 0.2, 8}}};
    sim::AgentSpec car2;
    car2.id = 3;
    car2.category = Category::Car;
    car2.size3d = {1.8, 1.5, 4.2};
    car2.waypoints = {{0, {5.8, 0.4, 16}}, {19, {5.2, 0.4, 16}}};
    cfg.agents = {car, ped, car2};

    const fs::path file = dir / "clean.json";
    const json doc{{"scenarios", json::array({json::parse(sim::scenario_to_json(cfg))})}};
    write_text(file, doc.dump(2));
    return file;
}

}  // namespace

TEST_CASE("cli: simulate writes a deterministic dataset") {
    const fs::path dir = fresh_dir("simulate");
    const fs::path manifest = write_benchmark_manifest(dir, 5);

    const auto r1 = run_cli({"simulate", "--scenarios", manifest.string(), "--out",
                             (dir / "a").string(), "--seed", "3"});
    REQUIRE(r1.code == 0);
    const auto r2 = run_cli({"simulate", "--scenarios", manifest.string(), "--out",
                             (dir / "b").string(), "--seed", "3"});
    REQUIRE(r2.code == 0);

    const auto a = dir_contents(dir / "a");
    const auto b = dir_contents(dir / "b");
    CHECK(a == b);
    CHECK(a.size() == 6);  // 5 sequence documents + manifest.json
    CHECK(a.count("manifest.json") == 1);

    SUBCASE("the manifest index lists every document in name order") {
        const json m = json::parse(a.at("manifest.json"));
        CHECK(m.at("schema") == "motkit-dataset/1");
        REQUIRE(m.at("sequences").size() == 5);
        std::string prev;
        for (const json& entry : m.at("sequences")) {
            const std::string name = entry.at("name").get<std::string>();
            CHECK(prev < name);
            prev = name;
            CHECK(a.count(entry.at("file").get<std::string>()) == 1);
        }
    }
    SUBCASE("parallel execution changes nothing") {
        const auto r4 = run_cli({"simulate", "--scenarios", manifest.string(), "--out",
                                 (dir / "p").string(), "--seed", "3", "--jobs", "4"});
        REQUIRE(r4.code == 0);
        CHECK(dir_contents(dir / "p") == a);
    }
}

TEST_CASE("cli: usage errors are reported as JSON on stderr") {
    const fs::path dir = fresh_dir("usage");
    SUBCASE("missing scenario file names the path") {
        const auto r = run_cli({"simulate", "--scenarios", (dir / "nope.json").string(),
                                "--out", (dir / "x").string()});
        CHECK(r.code == 1);
        const json diag = parse_diagnostic(r.err);
        CHECK(diag.at("error") == "usage");
        CHECK(diag.at("message").get<std::string>().find("nope.json") != std::string::npos);
    }
    SUBCASE("an unknown command fails") {
        CHECK(run_cli({"frobnicate"}).code == 1);
    }
    SUBCASE("an unknown label mode fails") {
        const auto r = run_cli({"label", "--dataset", dir.string(), "--out",
                                (dir / "x").string(), "--mode", "Wishful"});
        CHECK(r.code == 1);
        CHECK(parse_diagnostic(r.err).at("error") == "usage");
    }
    SUBCASE("help prints to stdout and succeeds") {
        const auto r = run_cli({"--help"});
        CHECK(r.code == 0);
        CHECK(r.out.find("simulate") != std::string::npos);
        const auto rs = run_cli({"track", "--help"});
        CHECK(rs.code == 0);
        CHECK(rs.out.find("--occlusion-mode") != std::string::npos);
    }
}

TEST_CASE("cli: stats reports and histogram bookkeeping") {
    const fs::path dir = fresh_dir("stats");
    const fs::path manifest = write_benchmark_manifest(dir, 4);
    REQUIRE(run_cli({"simulate", "--scenarios", manifest.string(), "--out",
                     (dir / "data").string()})
                .code == 0);

    const auto table = run_cli({"stats", "--dataset", (dir / "data").string()});
    REQUIRE(table.code == 0);
    CHECK(table.out.find("Car") != std::string::npos);
    CHECK(table.out.find("Pedestrian") != std::string::npos);
    CHECK(table.out.find("overall") != std::string::npos);

    const auto as_json = run_cli({"stats", "--dataset", (dir / "data").string(), "--json",
                                  "--out", (dir / "report").string()});
    REQUIRE(as_json.code == 0);
    const json doc = json::parse(as_json.out);
    CHECK(doc.at("schema") == "motkit-stats/1");
    CHECK(doc.at("vis_threshold") == 0.05);

    SUBCASE("bins sum to the track count, per class and overall") {
        auto check_bins = [](const json& stats) {
            int total = 0;
            for (const json& bin : stats.at("occlusion_histogram")) total += bin.get<int>();
            CHECK(total == stats.at("num_tracks").get<int>());
        };
        check_bins(doc.at("overall"));
        for (const auto& [name, stats] : doc.at("per_category").items()) {
            (void)name;
            check_bins(stats);
        }
    }
    SUBCASE("the written files match the printed reports") {
        CHECK(json::parse(read_text(dir / "report" / "stats.json")) == doc);
        const std::string csv = read_text(dir / "report" / "occlusion_histogram.csv");
        CHECK(csv.rfind("category,bin_low,bin_high,count\n", 0) == 0);
        // header + 10 bins for each class and the overall block
        CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 10 * (kNumCategories + 1));
    }
    SUBCASE("an empty dataset is a data error") {
        write_text(dir / "empty.json", R"({"scenarios": []})");
        REQUIRE(run_cli({"simulate", "--scenarios", (dir / "empty.json").string(), "--out",
                         (dir / "none").string()})
                    .code == 0);
        const auto r = run_cli({"stats", "--dataset", (dir / "none").string()});
        CHECK(r.code == 2);
        CHECK(parse_diagnostic(r.err).at("error") == "data");
    }
}

TEST_CASE("cli: label attaches supervision and is idempotent") {
    const fs::path dir = fresh_dir("label");
    const fs::path manifest = write_benchmark_manifest(dir, 3);
    REQUIRE(run_cli({"simulate", "--scenarios", manifest.string(), "--out",
                     (dir / "data").string()})
                .code == 0);

    REQUIRE(run_cli({"label", "--dataset", (dir / "data").string(), "--out",
                     (dir / "l1").string(), "--mode", "ConstV3D"})
                .code == 0);
    REQUIRE(run_cli({"label", "--dataset", (dir / "data").string(), "--out",
                     (dir / "l2").string(), "--mode", "ConstV3D"})
                .code == 0);
    const auto l1 = dir_contents(dir / "l1");
    CHECK(l1 == dir_contents(dir / "l2"));

    const json m = json::parse(l1.at("manifest.json"));
    for (const json& entry : m.at("sequences")) {
        const formats::SequenceDocument doc =
            formats::read_sequence(l1.at(entry.at("file").get<std::string>()));
        REQUIRE(doc.labels.has_value());
        CHECK(doc.labels->frames.size() == doc.sequence.frames.size());
    }

    SUBCASE("different modes leave different labels") {
        REQUIRE(run_cli({"label", "--dataset", (dir / "data").string(), "--out",
                         (dir / "lg").string(), "--mode", "AllGT"})
                    .code == 0);
        CHECK(dir_contents(dir / "lg") != l1);
    }
}

TEST_CASE("cli: track writes deterministic predictions and honors the mode") {
    const fs::path dir = fresh_dir("track");
    const fs::path manifest = write_benchmark_manifest(dir, 6);
    REQUIRE(run_cli({"simulate", "--scenarios", manifest.string(), "--out",
                     (dir / "data").string()})
                .code == 0);

    const auto r1 = run_cli({"track", "--dataset", (dir / "data").string(), "--out",
                             (dir / "p3d").string(), "--occlusion-mode", "ConstV3D"});
    REQUIRE(r1.code == 0);
    const auto r2 = run_cli({"track", "--dataset", (dir / "data").string(), "--out",
                             (dir / "p3d_again").string(), "--occlusion-mode", "ConstV3D",
                             "--jobs", "3"});
    REQUIRE(r2.code == 0);
    auto strip_manifest = [](std::map<std::string, std::string> files) {
        files.erase("manifest.json");  // names differ only through the directory
        return files;
    };
    CHECK(strip_manifest(dir_contents(dir / "p3d")) ==
          strip_manifest(dir_contents(dir / "p3d_again")));

    const auto rn = run_cli({"track", "--dataset", (dir / "data").string(), "--out",
                             (dir / "pnone").string(), "--occlusion-mode", "None"});
    REQUIRE(rn.code == 0);

    auto count_ids = [&](const fs::path& pred_dir) {
        int ids = 0;
        const json m = json::parse(read_text(pred_dir / "manifest.json"));
        CHECK(m.at("schema") == "motkit-predictions/1");
        for (const json& entry : m.at("sequences")) {
            std::set<int> seen;
            for (const auto& rec :
                 formats::parse_kitti(read_text(pred_dir / entry.at("file").get<std::string>())))
                seen.insert(rec.track_id);
            ids += static_cast<int>(seen.size());
        }
        return ids;
    };
    // Killing tracks at the first missed frame fragments identities, so the
    // mode without occlusion handling uses strictly more ids.
    CHECK(count_ids(dir / "pnone") > count_ids(dir / "p3d"));

    SUBCASE("mot output parses and is 1-based") {
        REQUIRE(run_cli({"track", "--dataset", (dir / "data").string(), "--out",
                         (dir / "pmot").string(), "--format", "mot"})
                    .code == 0);
        const json m = json::parse(read_text(dir / "pmot" / "manifest.json"));
        CHECK(m.at("format") == "mot");
        const auto records = formats::parse_mot(
            read_text(dir / "pmot" / m.at("sequences")[0].at("file").get<std::string>()));
        REQUIRE(!records.empty());
        for (const auto& rec : records) CHECK(rec.frame >= 1);
    }
    SUBCASE("config files are validated") {
        write_text(dir / "bad1.json", "{nope");
        CHECK(run_cli({"track", "--dataset", (dir / "data").string(), "--out",
                       (dir / "x").string(), "--config", (dir / "bad1.json").string()})
                  .code == 1);
        write_text(dir / "bad2.json", R"({"tracker": {"bogus_knob": 1}})");
        CHECK(run_cli({"track", "--dataset", (dir / "data").string(), "--out",
                       (dir / "x").string(), "--config", (dir / "bad2.json").string()})
                  .code == 1);
        write_text(dir / "bad3.json", R"({"tracker": {"score_threshold": 3.5}})");
        CHECK(run_cli({"track", "--dataset", (dir / "data").string(), "--out",
                       (dir / "x").string(), "--config", (dir / "bad3.json").string()})
                  .code == 1);
    }
    SUBCASE("flags override config file values") {
        write_text(dir / "cfg.json", R"({"tracker": {"occlusion_mode": "None"}})");
        REQUIRE(run_cli({"track", "--dataset", (dir / "data").string(), "--out",
                         (dir / "pcfg").string(), "--config", (dir / "cfg.json").string(),
                         "--occlusion-mode", "ConstV3D"})
                    .code == 0);
        CHECK(strip_manifest(dir_contents(dir / "pcfg")) ==
              strip_manifest(dir_contents(dir / "p3d")));
    }
}

TEST_CASE("cli: eval scores a clean pipeline perfectly") {
    const fs::path dir = fresh_dir("eval");
    const fs::path manifest = write_clean_manifest(dir);
    REQUIRE(run_cli({"simulate", "--scenarios", manifest.string(), "--out",
                     (dir / "data").string()})
                .code == 0);
    REQUIRE(run_cli({"track", "--dataset", (dir / "data").string(), "--out",
                     (dir / "preds").string()})
                .code == 0);

    const auto r = run_cli({"eval", "--pred", (dir / "preds").string(), "--gt",
                            (dir / "data").string(), "--json", "--out",
                            (dir / "report").string()});
    REQUIRE(r.code == 0);
    const json report = json::parse(r.out);
    CHECK(report.at("mean_ap") == 1.0);
    CHECK(report.at("overall").at("mota") == 1.0);
    CHECK(report.at("overall").at("idsw") == 0);
    CHECK(report.at("overall").at("fp") == 0);
    CHECK(report.at("overall").at("fn") == 0);
    CHECK(report.at("overall").at("idf1") == 1.0);
    CHECK(report.at("classes").contains("Car"));
    CHECK(report.at("classes").contains("Pedestrian"));

    SUBCASE("written report files match stdout") {
        CHECK(json::parse(read_text(dir / "report" / "report.json")) == report);
        const auto table = run_cli({"eval", "--pred", (dir / "preds").string(), "--gt",
                                    (dir / "data").string()});
        REQUIRE(table.code == 0);
        CHECK(read_text(dir / "report" / "report.txt") == table.out);
    }
    SUBCASE("mismatched sequence names are a data error") {
        const fs::path other = fresh_dir("eval_other");
        const fs::path bench = write_benchmark_manifest(other, 2);
        REQUIRE(run_cli({"simulate", "--scenarios", bench.string(), "--out",
                         (other / "data").string()})
                    .code == 0);
        const auto bad = run_cli({"eval", "--pred", (dir / "preds").string(), "--gt",
                                  (other / "data").string()});
        CHECK(bad.code == 2);
        CHECK(parse_diagnostic(bad.err).at("error") == "data");
    }
}

TEST_CASE("cli: ablate sweeps modes and rebirth") {
    const fs::path dir = fresh_dir("ablate");
    const fs::path manifest = write_benchmark_manifest(dir, 4);
    REQUIRE(run_cli({"simulate", "--scenarios", manifest.string(), "--out",
                     (dir / "data").string()})
                .code == 0);

    const auto r = run_cli({"ablate", "--dataset", (dir / "data").string(), "--json",
                            "--rebirth-window", "8", "--jobs", "4", "--out",
                            (dir / "abl").string()});
    REQUIRE(r.code == 0);
    const json doc = json::parse(r.out);
    CHECK(doc.at("schema") == "motkit-ablation/1");
    REQUIRE(doc.at("rows").size() == 6);
    const std::vector<std::pair<std::string, bool>> expected = {
        {"None", false},     {"None", true},     {"ConstV2D", false},
        {"ConstV2D", true},  {"ConstV3D", false}, {"ConstV3D", true}};
    for (std::size_t i = 0; i < expected.size(); ++i) {
        const json& row = doc.at("rows")[i];
        CHECK(row.at("occlusion_mode") == expected[i].first);
        CHECK(row.at("rebirth") == expected[i].second);
        const double map = row.at("map").get<double>();
        CHECK(map >= 0.0);
        CHECK(map <= 1.0);
    }

    SUBCASE("a single cell reproduces track + eval") {
        REQUIRE(run_cli({"track", "--dataset", (dir / "data").string(), "--out",
                         (dir / "pn").string(), "--occlusion-mode", "None"})
                    .code == 0);
        const auto ev = run_cli({"eval", "--pred", (dir / "pn").string(), "--gt",
                                 (dir / "data").string(), "--json"});
        REQUIRE(ev.code == 0);
        const json report = json::parse(ev.out);
        CHECK(report.at("mean_ap") == doc.at("rows")[0].at("map"));
    }
    SUBCASE("the table mirrors the JSON") {
        const std::string table = read_text(dir / "abl" / "ablation.txt");
        CHECK(table.find("mAP") != std::string::npos);
        CHECK(std::count(table.begin(), table.end(), '\n') == 7);  // header + 6 rows
        CHECK(json::parse(read_text(dir / "abl" / "ablation.json")) == doc);
    }
    SUBCASE("serial and parallel sweeps agree") {
        const auto serial = run_cli({"ablate", "--dataset", (dir / "data").string(),
                                     "--json", "--rebirth-window", "8", "--jobs", "1"});
        REQUIRE(serial.code == 0);
        CHECK(json::parse(serial.out) == doc);
    }
}

TEST_CASE("cli: the jobs default comes from the environment") {
    const fs::path dir = fresh_dir("jobs_env");
    const fs::path manifest = write_benchmark_manifest(dir, 2);
    setenv("MOTKIT_JOBS", "3", 1);
    const auto ok = run_cli({"simulate", "--scenarios", manifest.string(), "--out",
                             (dir / "a").string()});
    // A value that fails validation is ignored and the serial default applies.
    setenv("MOTKIT_JOBS", "broken", 1);
    const auto fallback = run_cli({"simulate", "--scenarios", manifest.string(), "--out",
                                   (dir / "b").string()});
    unsetenv("MOTKIT_JOBS");
    CHECK(ok.code == 0);
    CHECK(fallback.code == 0);
    CHECK(dir_contents(dir / "a") == dir_contents(dir / "b"));
}
