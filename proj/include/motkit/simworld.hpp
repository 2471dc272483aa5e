#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "motkit/common.hpp"
#include "motkit/geometry.hpp"

namespace motkit::sim {

using geom::CameraIntrinsics;
using geom::CameraPose;
using geom::Point2;
using geom::Point3;

struct Waypoint {
    int frame = 0;
    Point3 position;
};

// Frozen-motion window [begin, end): the agent holds its position and its
// remaining waypoint schedule shifts by the stop length.
struct StopInterval {
    int begin = 0;
    int end = 0;
};

struct AgentSpec {
    int id = 0;
    Category category = Category::Car;
    Point3 size3d;  // (w, h, l) meters
    std::vector<Waypoint> waypoints;
    std::vector<StopInterval> stops;

    // World position at a frame, piecewise-linear between waypoints with
    // stop intervals pausing the schedule.
    Point3 position_at(int frame) const;
};

struct Occluder {
    Point3 center;
    Point3 size3d;  // (w, h, l) meters, axis aligned in world
    // Frames during which the occluder exists, inclusive; last_frame == -1
    // means until the end of the sequence.
    int first_frame = 0;
    int last_frame = -1;
};

struct CameraFrame {
    CameraIntrinsics intrinsics;
    CameraPose pose;
};

struct ScenarioConfig {
    std::string name = "scenario";
    std::uint64_t seed = 0;
    int num_frames = 0;
    double fps = 20.0;
    ImageSize image_size;
    std::vector<CameraFrame> camera;  // one per frame
    std::vector<AgentSpec> agents;
    std::vector<Occluder> occluders;
    int visibility_stride = 0;  // 0 -> default: max(1, image width / 8)

    void validate() const;  // throws DataError on unsatisfiable invariants
};

struct AnnotatedObject {
    Point2 p;             // amodal 2D box center, pixels
    Size2 s;              // amodal 2D box size, pixels
    int id = 0;
    double vis = 0.0;     // visible fraction of the amodal box, [0,1]
    Point3 world_center;  // 3D box center, world coordinates
    double depth = 0.0;   // camera-frame depth of the 3D center, meters
    bool out_of_frame = false;  // fully outside the image (vs occluded in view)
    Category category = Category::Car;
};

struct Frame {
    std::vector<AnnotatedObject> objects;
    CameraIntrinsics intrinsics;
    CameraPose pose;
};

struct Sequence {
    std::string name;
    std::uint64_t seed = 0;
    double fps = 20.0;
    ImageSize image_size;
    std::vector<Frame> frames;
};

struct Detection {
    Point2 p;
    Size2 s;
    double score = 0.0;
    Point2 d;  // displacement to the previous frame, pixels
    double vis_flag = 1.0;
    Category category = Category::Car;
    std::optional<Point3> world_center;  // present in oracle mode only
};

struct DetectorNoiseConfig {
    std::uint64_t seed = 1;
    double center_sigma = 0.0;    // Gaussian jitter on centers and displacements, pixels
    double score_epsilon = 0.0;   // score = vis*(1-eps) + eps*uniform
    double drop_vis_threshold = 0.05;  // below this the object is never emitted
    // detect_prob(vis) = prob_floor + (prob_ceil - prob_floor) * vis, clamped
    // to [0,1]; monotone non-decreasing whenever prob_ceil >= prob_floor.
    double detect_prob_floor = 1.0;
    double detect_prob_ceil = 1.0;
    bool with_world_centers = true;

    double detect_prob(double vis) const;
};

// Deterministic geometric simulation: agents follow their waypoints, amodal
// boxes are AABBs of the projected cuboid corners, visibility comes from a
// box-level z-buffer at the configured grid stride.
Sequence simulate(const ScenarioConfig& config);

struct ScreenBox {
    double left = 0.0, top = 0.0, right = 0.0, bottom = 0.0;  // pixels
    double center_depth = 0.0;                                // meters
};

// Amodal screen box of an axis-aligned world cuboid: AABB of its projected
// corners (corners behind the camera are skipped). Empty when the cuboid
// center does not project.
std::optional<ScreenBox> project_box(const CameraIntrinsics& intr, const CameraPose& pose,
                                     const Point3& center, const Point3& size3d);

struct VisibilityInput {
    double left = 0.0, top = 0.0, right = 0.0, bottom = 0.0;  // amodal box, pixels
    double depth = 0.0;
    bool blocker_only = false;  // occluders compete for cells but get no vis
};

// Per-object visible fraction: nearest-depth-wins rasterization on a
// stride-sized grid. Cells outside the image count toward an object's total
// footprint but can never be won, so truncation reduces vis like occlusion.
std::vector<double> compute_visibility(const std::vector<VisibilityInput>& inputs,
                                       const ImageSize& image, int grid_stride);

// Degrades ground truth into per-frame detections: visibility-dependent
// drops, center jitter, noisy scores. Seeded and deterministic.
std::vector<std::vector<Detection>> oracle_detector(const Sequence& sequence,
                                                    const DetectorNoiseConfig& noise);

struct CategoryStats {
    int num_tracks = 0;
    double avg_length = 0.0;
    int max_length = 0;
    std::vector<int> occlusion_histogram;  // bins over occlusion ratio [0,1]
    double frac_occluded_ge_10pct = 0.0;   // tracks fully occluded >= 10% of duration
};

struct StatsReport {
    static constexpr int kHistogramBins = 10;
    double occlusion_vis_threshold = 0.05;  // a frame counts as fully occluded below this
    std::vector<std::pair<Category, CategoryStats>> per_category;
    CategoryStats overall;
};

StatsReport dataset_stats(const std::vector<Sequence>& sequences,
                          double occlusion_vis_threshold = 0.05);

// --- scenario JSON ---

ScenarioConfig scenario_from_json(const std::string& json_text);
std::string scenario_to_json(const ScenarioConfig& config);

// Expands a manifest document (inline scenarios and/or generator blocks)
// into concrete configs. Schema documented in docs/formats.md.
std::vector<ScenarioConfig> expand_manifest(const std::string& json_text);

// --- benchmark generator ---

struct BenchmarkParams {
    int num_frames = 60;
    ImageSize image_size{192, 108};
    double focal = 110.0;
    int min_agents = 3;
    int max_agents = 5;
    double occluded_agent_fraction = 0.6;  // agents routed behind an occluder
    double fast_pan_fraction = 0.5;        // scenarios with strong camera-motion change
};

// Seeded urban-style scenes: moving cameras (sinusoidal yaw + translation),
// straight constant-velocity agents, static occluders sized to produce
// multi-frame full occlusions.
ScenarioConfig make_benchmark_scenario(std::uint64_t seed, int index, const BenchmarkParams& params);
std::vector<ScenarioConfig> make_benchmark(std::uint64_t seed, int count, const BenchmarkParams& params);

}  // namespace motkit::sim
