#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"
#include "motkit/rng.hpp"
#include "motkit/simworld.hpp"

using namespace motkit;
using namespace motkit::sim;

namespace {

ScenarioConfig basic_scene(int num_frames) {
    ScenarioConfig cfg;
    cfg.name = "basic";
    cfg.num_frames = num_frames;
    cfg.image_size = {100, 100};
    cfg.visibility_stride = 1;
    CameraFrame cam;
    cam.intrinsics = {50, 50, 50, 50};
    for (int f = 0; f < num_frames; ++f) cfg.camera.push_back(cam);

    AgentSpec agent;
    agent.id = 1;
    agent.category = Category::Car;
    agent.size3d = {2, 2, 2};
    agent.waypoints = {{0, {0, 0, 10}}, {num_frames - 1, {0.05 * (num_frames - 1), 0, 10}}};
    cfg.agents.push_back(agent);
    return cfg;
}

// Test-only per-pixel z-buffer. Evaluates the coverage predicate directly at
// every pixel instead of deriving covered index ranges.
std::vector<double> pixel_oracle(const std::vector<VisibilityInput>& inputs, const ImageSize& im) {
    auto covers = [](const VisibilityInput& b, int x, int y) {
        return x < b.right && x + 1 > b.left && y < b.bottom && y + 1 > b.top;
    };
    std::vector<int> winner(static_cast<std::size_t>(im.width) * im.height, -1);
    std::vector<double> depth(winner.size(), std::numeric_limits<double>::infinity());
    for (int y = 0; y < im.height; ++y)
        for (int x = 0; x < im.width; ++x)
            for (std::size_t i = 0; i < inputs.size(); ++i)
                if (covers(inputs[i], x, y) && inputs[i].depth < depth[y * im.width + x]) {
                    depth[y * im.width + x] = inputs[i].depth;
                    winner[y * im.width + x] = static_cast<int>(i);
                }

    std::vector<double> vis(inputs.size(), 0.0);
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        if (inputs[i].blocker_only) continue;
        long long total = 0;
        for (int x = -200; x < 400; ++x)
            for (int y = -200; y < 400; ++y)
                if (covers(inputs[i], x, y)) ++total;
        if (total == 0) continue;
        long long won = 0;
        for (std::size_t c = 0; c < winner.size(); ++c)
            if (winner[c] == static_cast<int>(i)) ++won;
        vis[i] = static_cast<double>(won) / static_cast<double>(total);
    }
    return vis;
}

Sequence handmade_sequence(const std::vector<std::vector<double>>& vis_by_track, int id_base) {
    Sequence seq;
    seq.name = "hand";
    seq.image_size = {64, 64};
    std::size_t frames = 0;
    for (const auto& v : vis_by_track) frames = std::max(frames, v.size());
    for (std::size_t f = 0; f < frames; ++f) {
        Frame frame;
        for (std::size_t t = 0; t < vis_by_track.size(); ++t) {
            if (f >= vis_by_track[t].size()) continue;
            AnnotatedObject obj;
            obj.id = id_base + static_cast<int>(t);
            obj.vis = vis_by_track[t][f];
            obj.category = Category::Car;
            frame.objects.push_back(obj);
        }
        seq.frames.push_back(frame);
    }
    return seq;
}

}  // namespace

TEST_CASE("position_at: piecewise-linear waypoints with stop intervals") {
    AgentSpec agent;
    agent.waypoints = {{0, {0, 0, 10}}, {10, {10, 0, 10}}};
    agent.stops = {{3, 6}};
    CHECK(agent.position_at(2).x == doctest::Approx(2.0));
    CHECK(agent.position_at(3).x == doctest::Approx(3.0));
    CHECK(agent.position_at(4).x == doctest::Approx(3.0));
    CHECK(agent.position_at(5).x == doctest::Approx(3.0));
    CHECK(agent.position_at(6).x == doctest::Approx(3.0));
    CHECK(agent.position_at(7).x == doctest::Approx(4.0));
    CHECK(agent.position_at(13).x == doctest::Approx(10.0));
    CHECK(agent.position_at(25).x == doctest::Approx(10.0));
    CHECK(agent.position_at(-5).x == doctest::Approx(0.0));
}

TEST_CASE("simulate: unobstructed agent is fully visible in every frame") {
    Sequence seq = simulate(basic_scene(20));
    REQUIRE(seq.frames.size() == 20);
    for (const Frame& frame : seq.frames) {
        REQUIRE(frame.objects.size() == 1);
        CHECK(frame.objects[0].vis == 1.0);
        CHECK_FALSE(frame.objects[0].out_of_frame);
        CHECK(frame.objects[0].id == 1);
    }
}

TEST_CASE("simulate: occluder spanning the projected extent forces vis 0") {
    ScenarioConfig cfg = basic_scene(20);
    cfg.occluders.push_back({{0.25, 0, 5}, {4, 4, 0.5}});
    Sequence seq = simulate(cfg);
    int fully_occluded = 0;
    for (const Frame& frame : seq.frames) {
        REQUIRE(frame.objects.size() == 1);
        if (frame.objects[0].vis == 0.0) ++fully_occluded;
    }
    CHECK(fully_occluded > 0);
}

TEST_CASE("simulate: same config twice gives identical output") {
    ScenarioConfig cfg = basic_scene(12);
    cfg.occluders.push_back({{0.5, 0.2, 6}, {1, 1, 0.5}});
    Sequence a = simulate(cfg);
    Sequence b = simulate(cfg);
    REQUIRE(a.frames.size() == b.frames.size());
    for (std::size_t f = 0; f < a.frames.size(); ++f) {
        REQUIRE(a.frames[f].objects.size() == b.frames[f].objects.size());
        for (std::size_t i = 0; i < a.frames[f].objects.size(); ++i) {
            const AnnotatedObject &x = a.frames[f].objects[i], &y = b.frames[f].objects[i];
            CHECK(x.p.u == y.p.u);
            CHECK(x.p.v == y.p.v);
            CHECK(x.s.width == y.s.width);
            CHECK(x.s.height == y.s.height);
            CHECK(x.vis == y.vis);
            CHECK(x.depth == y.depth);
        }
    }
}

TEST_CASE("simulate: a box fully outside the image is flagged, not dropped") {
    ScenarioConfig cfg = basic_scene(3);
    cfg.agents[0].waypoints = {{0, {-20, 0, 5}}, {2, {-20, 0, 5}}};
    Sequence seq = simulate(cfg);
    for (const Frame& frame : seq.frames) {
        REQUIRE(frame.objects.size() == 1);
        CHECK(frame.objects[0].out_of_frame);
        CHECK(frame.objects[0].vis == 0.0);
    }
}

TEST_CASE("simulate: rejects malformed configs") {
    ScenarioConfig cfg = basic_scene(5);
    cfg.num_frames = 1;
    cfg.camera.resize(1);
    CHECK_THROWS_AS(simulate(cfg), DataError);

    cfg = basic_scene(5);
    cfg.agents.push_back(cfg.agents[0]);  // duplicate id
    CHECK_THROWS_AS(simulate(cfg), DataError);

    cfg = basic_scene(5);
    cfg.agents[0].waypoints = {{0, {0, 0, 10}}, {0, {1, 0, 10}}};
    CHECK_THROWS_AS(simulate(cfg), DataError);

    cfg = basic_scene(5);
    cfg.camera[2].pose.rotation[0][0] = 3.0;
    CHECK_THROWS_AS(simulate(cfg), DataError);
}

TEST_CASE("compute_visibility: lone object fully inside the image") {
    ImageSize im{64, 64};
    std::vector<VisibilityInput> in = {{10, 10, 30, 26, 5.0, false}};
    CHECK(compute_visibility(in, im, 1)[0] == 1.0);
}

TEST_CASE("compute_visibility: full cover by an equal-footprint nearer box") {
    ImageSize im{64, 64};
    std::vector<VisibilityInput> in = {{10, 10, 30, 26, 4.0, false}, {10, 10, 30, 26, 9.0, false}};
    auto vis = compute_visibility(in, im, 1);
    CHECK(vis[0] == 1.0);
    CHECK(vis[1] == 0.0);
}

TEST_CASE("compute_visibility: exact half overlap at stride 1") {
    ImageSize im{64, 64};
    // B is 20 px wide; A covers B's left half exactly.
    std::vector<VisibilityInput> in = {{0, 10, 20, 30, 4.0, false}, {10, 10, 30, 30, 9.0, false}};
    auto vis = compute_visibility(in, im, 1);
    CHECK(vis[1] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("compute_visibility: depth ties go to the earlier input") {
    ImageSize im{32, 32};
    std::vector<VisibilityInput> in = {{4, 4, 12, 12, 5.0, false}, {4, 4, 12, 12, 5.0, false}};
    auto vis = compute_visibility(in, im, 1);
    CHECK(vis[0] == 1.0);
    CHECK(vis[1] == 0.0);
}

TEST_CASE("compute_visibility: agrees with a per-pixel reference on random scenes") {
    Rng rng(2024);
    ImageSize im{48, 40};
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<VisibilityInput> in;
        const int n = static_cast<int>(rng.uniform_int(1, 6));
        for (int i = 0; i < n; ++i) {
            double x0 = rng.uniform(-15, im.width + 5);
            double y0 = rng.uniform(-15, im.height + 5);
            VisibilityInput b;
            b.left = x0;
            b.top = y0;
            b.right = x0 + rng.uniform(0.5, 25);
            b.bottom = y0 + rng.uniform(0.5, 25);
            // small integer depths so exact ties occur
            b.depth = static_cast<double>(rng.uniform_int(1, 3));
            b.blocker_only = rng.bernoulli(0.2);
            in.push_back(b);
        }
        auto fast = compute_visibility(in, im, 1);
        auto slow = pixel_oracle(in, im);
        for (std::size_t i = 0; i < in.size(); ++i) CHECK(fast[i] == slow[i]);
    }
}

TEST_CASE("compute_visibility: growing an occluder never increases visibility") {
    Rng rng(515);
    ImageSize im{64, 64};
    for (int trial = 0; trial < 100; ++trial) {
        VisibilityInput target{20, 20, 44, 44, 10.0, false};
        double gx = rng.uniform(8, 40), gy = rng.uniform(8, 40);
        double last = 1.0;
        for (double grow = 0.0; grow < 30.0; grow += rng.uniform(1.0, 4.0)) {
            VisibilityInput occ{gx, gy, gx + 4 + grow, gy + 4 + grow, 5.0, true};
            auto vis = compute_visibility({target, occ}, im, 1);
            CHECK(vis[0] <= last + 1e-15);
            last = vis[0];
        }
    }
}

TEST_CASE("oracle_detector: zero noise reproduces visible ground truth exactly") {
    ScenarioConfig cfg = basic_scene(15);
    cfg.occluders.push_back({{0.25, 0, 5}, {4, 4, 0.5}});
    Sequence seq = simulate(cfg);
    DetectorNoiseConfig noise;
    noise.seed = 9;
    auto dets = oracle_detector(seq, noise);
    REQUIRE(dets.size() == seq.frames.size());

    geom::Point2 prev{0, 0};
    bool have_prev = false;
    for (std::size_t f = 0; f < dets.size(); ++f) {
        const auto& objs = seq.frames[f].objects;
        std::size_t expected = 0;
        for (const auto& obj : objs)
            if (obj.vis >= noise.drop_vis_threshold && obj.vis > 0.0) ++expected;
        REQUIRE(dets[f].size() == expected);
        for (const Detection& det : dets[f]) {
            const AnnotatedObject& obj = objs[0];
            CHECK(det.p.u == obj.p.u);
            CHECK(det.p.v == obj.p.v);
            CHECK(det.score == obj.vis);
            CHECK(det.vis_flag == obj.vis);
            REQUIRE(det.world_center.has_value());
            CHECK(det.world_center->x == obj.world_center.x);
            if (have_prev) {
                CHECK(det.d.u == obj.p.u - prev.u);
                CHECK(det.d.v == obj.p.v - prev.v);
            }
        }
        if (!objs.empty()) {
            prev = objs[0].p;
            have_prev = true;
        }
    }
}

TEST_CASE("oracle_detector: fully invisible objects are never emitted") {
    Sequence seq = handmade_sequence({{0.0, 0.0, 0.0}}, 1);
    DetectorNoiseConfig noise;
    noise.drop_vis_threshold = 0.0;
    auto dets = oracle_detector(seq, noise);
    for (const auto& frame : dets) CHECK(frame.empty());
}

TEST_CASE("oracle_detector: same seed, same stream") {
    ScenarioConfig cfg = basic_scene(15);
    Sequence seq = simulate(cfg);
    DetectorNoiseConfig noise;
    noise.seed = 1234;
    noise.center_sigma = 0.7;
    noise.score_epsilon = 0.2;
    noise.detect_prob_floor = 0.5;
    auto a = oracle_detector(seq, noise);
    auto b = oracle_detector(seq, noise);
    REQUIRE(a.size() == b.size());
    for (std::size_t f = 0; f < a.size(); ++f) {
        REQUIRE(a[f].size() == b[f].size());
        for (std::size_t i = 0; i < a[f].size(); ++i) {
            CHECK(a[f][i].p.u == b[f][i].p.u);
            CHECK(a[f][i].d.v == b[f][i].d.v);
            CHECK(a[f][i].score == b[f][i].score);
        }
    }
}

TEST_CASE("dataset_stats: always-visible track") {
    Sequence seq = handmade_sequence({{1.0, 1.0, 1.0, 1.0, 1.0}}, 1);
    StatsReport report = dataset_stats({seq});
    CHECK(report.overall.num_tracks == 1);
    CHECK(report.overall.avg_length == doctest::Approx(5.0));
    CHECK(report.overall.max_length == 5);
    CHECK(report.overall.occlusion_histogram[0] == 1);
    CHECK(report.overall.frac_occluded_ge_10pct == 0.0);
}

TEST_CASE("dataset_stats: occlusion ratio counts frames below 0.05") {
    std::vector<double> vis(10, 1.0);
    vis[2] = vis[3] = vis[4] = 0.01;
    Sequence seq = handmade_sequence({vis}, 7);
    StatsReport report = dataset_stats({seq});
    CHECK(report.overall.num_tracks == 1);
    CHECK(report.overall.occlusion_histogram[3] == 1);  // ratio 0.3
    CHECK(report.overall.frac_occluded_ge_10pct == 1.0);
}

TEST_CASE("dataset_stats: empty input is an error") {
    CHECK_THROWS_AS(dataset_stats({}), DataError);
}

TEST_CASE("scenario json: round trip preserves every field") {
    ScenarioConfig cfg = basic_scene(6);
    cfg.seed = 99;
    cfg.fps = 10.0;
    cfg.agents[0].stops = {{2, 4}};
    cfg.occluders.push_back({{1.5, -0.25, 6}, {2, 3, 0.5}});
    const std::string text = scenario_to_json(cfg);
    ScenarioConfig back = scenario_from_json(text);
    CHECK(back.name == cfg.name);
    CHECK(back.seed == cfg.seed);
    CHECK(back.num_frames == cfg.num_frames);
    CHECK(back.fps == cfg.fps);
    CHECK(back.visibility_stride == cfg.visibility_stride);
    REQUIRE(back.camera.size() == cfg.camera.size());
    for (std::size_t f = 0; f < cfg.camera.size(); ++f) {
        CHECK(back.camera[f].intrinsics.fx == cfg.camera[f].intrinsics.fx);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                CHECK(back.camera[f].pose.rotation[i][j] == cfg.camera[f].pose.rotation[i][j]);
        CHECK(back.camera[f].pose.translation.z == cfg.camera[f].pose.translation.z);
    }
    REQUIRE(back.agents.size() == 1);
    CHECK(back.agents[0].id == cfg.agents[0].id);
    CHECK(back.agents[0].size3d.z == cfg.agents[0].size3d.z);
    REQUIRE(back.agents[0].stops.size() == 1);
    CHECK(back.agents[0].stops[0].begin == 2);
    REQUIRE(back.occluders.size() == 1);
    CHECK(back.occluders[0].center.y == -0.25);
}

TEST_CASE("scenario json: parametric camera expands to per-frame poses") {
    const std::string text = R"({
        "name": "pan",
        "num_frames": 4,
        "image_size": [64, 48],
        "camera": {
            "intrinsics": [60, 60, 32, 24],
            "motion": {"position": [0, 0, 0], "velocity": [0, 0, 0.5],
                       "yaw": 0.0, "yaw_amplitude": 0.1, "yaw_period": 8.0}
        },
        "agents": [{"id": 1, "category": "Pedestrian", "size": [0.6, 1.7, 0.6],
                    "waypoints": [{"frame": 0, "position": [0, 0, 10]},
                                   {"frame": 3, "position": [1, 0, 10]}]}]
    })";
    ScenarioConfig cfg = scenario_from_json(text);
    REQUIRE(cfg.camera.size() == 4);
    CHECK(cfg.camera[0].pose.translation.z == 0.0);
    // frame 2: yaw = 0.1*sin(2*pi*2/8) = 0.1, position (0,0,1)
    CameraPose expected = geom::pose_from_position_yaw({0, 0, 1.0}, 0.1 * std::sin(3.14159265358979323846 / 2.0));
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            CHECK(cfg.camera[2].pose.rotation[i][j] == doctest::Approx(expected.rotation[i][j]).epsilon(1e-15));
    CHECK(cfg.agents[0].category == Category::Pedestrian);
}

TEST_CASE("scenario json: malformed documents raise DataError") {
    CHECK_THROWS_AS(scenario_from_json("{not json"), DataError);
    CHECK_THROWS_AS(scenario_from_json("{\"num_frames\": 2}"), DataError);
    CHECK_THROWS_AS(scenario_from_json(R"({"num_frames": 0, "image_size": [4, 4],
        "camera": {"frames": []}, "agents": []})"),
                    DataError);
}

TEST_CASE("manifest: inline scenarios and generator blocks expand deterministically") {
    ScenarioConfig cfg = basic_scene(4);
    const std::string inline_scenario = scenario_to_json(cfg);
    const std::string manifest = std::string("{\"scenarios\": [") + inline_scenario +
                                 ", {\"generate\": {\"seed\": 5, \"count\": 2, \"params\": "
                                 "{\"num_frames\": 40, \"min_agents\": 2, \"max_agents\": 3}}}]}";
    auto expanded = expand_manifest(manifest);
    REQUIRE(expanded.size() == 3);
    CHECK(expanded[0].name == "basic");
    CHECK(expanded[1].name == "bench000");
    CHECK(expanded[2].name == "bench001");
    CHECK(expanded[1].num_frames == 40);

    auto again = expand_manifest(manifest);
    CHECK(scenario_to_json(again[1]) == scenario_to_json(expanded[1]));
    CHECK(scenario_to_json(again[2]) == scenario_to_json(expanded[2]));
}

TEST_CASE("benchmark: generated scenes really contain long full occlusions") {
    BenchmarkParams params;
    params.num_frames = 60;
    auto configs = make_benchmark(11, 4, params);
    REQUIRE(configs.size() == 4);
    int occluded_tracks = 0, total_tracks = 0;
    for (const auto& cfg : configs) {
        Sequence seq = simulate(cfg);
        REQUIRE(static_cast<int>(seq.frames.size()) == params.num_frames);
        for (const AgentSpec& agent : cfg.agents) {
            ++total_tracks;
            int run = 0, longest = 0;
            for (const Frame& frame : seq.frames)
                for (const AnnotatedObject& obj : frame.objects)
                    if (obj.id == agent.id) {
                        run = obj.vis < 0.05 ? run + 1 : 0;
                        longest = std::max(longest, run);
                    }
            if (longest >= 6) ++occluded_tracks;
        }
    }
    CHECK(occluded_tracks * 10 >= total_tracks * 3);  // at least 30%
}
