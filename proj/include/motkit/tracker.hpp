#pragma once

#include <optional>
#include <string>
#include <vector>

#include "motkit/common.hpp"
#include "motkit/geometry.hpp"
#include "motkit/simworld.hpp"

namespace motkit::track {

// What to do with a track nobody detected this frame: drop it immediately, or
// coast its center at constant velocity in the image plane or in world space
// until something matches it again.
enum class OcclusionMode { None, ConstV2D, ConstV3D };

const char* to_string(OcclusionMode mode);
OcclusionMode occlusion_mode_from_string(const std::string& s);

enum class RadiusRule { GeometricMean, MaxSide };

const char* to_string(RadiusRule rule);
RadiusRule radius_rule_from_string(const std::string& s);

// Gate for matching a detection to a track, derived from the track's last
// box size.
double matching_radius(const Size2& s, RadiusRule rule);

struct TrackerConfig {
    double score_threshold = 0.4;       // new tracks need a score above this
    double visibility_threshold = 0.15; // detections below are tracked but not emitted
    int max_occlusion_age = 16;         // frames a track may coast unmatched
    int rebirth_window = 0;             // post-hoc merge gap, 0 disables
    OcclusionMode occlusion_mode = OcclusionMode::ConstV3D;
    RadiusRule matching_radius_rule = RadiusRule::GeometricMean;
    bool rebirth_interpolate = false;   // fill merged gaps with linear boxes

    void validate() const;  // throws DataError
};

enum class PointSource { Detected, Hallucinated };

struct TrackPoint {
    int frame = 0;
    geom::Point2 center;
    Size2 size;
    double score = 0.0;
    PointSource source = PointSource::Detected;
};

enum class TrackStatus { Active, Occluded, Dead };

struct Track {
    int id = 0;
    Category category = Category::Car;
    std::vector<TrackPoint> history;  // one point per frame from birth to death
    TrackStatus status = TrackStatus::Active;
    int occlusion_age = 0;  // meaningful while Occluded
    geom::Point2 velocity2d;
    std::optional<geom::Point3> velocity3d;
    std::optional<geom::Point3> world_center;  // latest estimate, oracle mode
};

struct EmittedBox {
    int id = 0;
    geom::Point2 center;
    Size2 size;
    double score = 0.0;
    Category category = Category::Car;
};

struct FrameResult {
    int frame = 0;
    std::vector<EmittedBox> emitted;  // tracks confirmed by a visible detection
    std::vector<int> occluded_ids;    // tracks coasting this frame, for diagnostics
    bool used_2d_fallback = false;    // 3D coasting requested but unavailable
};

class OutOfOrderFrame : public DataError {
public:
    OutOfOrderFrame(int got, int expected)
        : DataError("frame " + std::to_string(got) + " presented out of order, expected " +
                    std::to_string(expected)) {}
};

// Per-detection outcome of one association round.
constexpr int kMatchNew = -1;      // starts a new track
constexpr int kMatchDropped = -2;  // unmatched and below the score threshold

struct PrevTrackState {
    int id = 0;
    geom::Point2 center;  // position the track claims for the previous frame
    Size2 size;
    Category category = Category::Car;
};

// Greedy displacement matching: detections in descending score order (ties by
// input position) each take the nearest unclaimed previous center of the same
// category within the matching radius of that track's box. Returns, per
// detection, the index into prev or one of the kMatch constants.
std::vector<int> associate(const std::vector<sim::Detection>& detections,
                           const std::vector<PrevTrackState>& prev,
                           const TrackerConfig& config);

// Online tracker over one sequence. Frames must be stepped consecutively;
// sequences are independent, so run one instance per sequence.
class Tracker {
public:
    explicit Tracker(const TrackerConfig& config);

    // Associates this frame's detections with live tracks, spawns and retires
    // tracks, and coasts occluded ones. The camera is only consulted for 3D
    // coasting; without it (or without 3D detections) ConstV3D quietly
    // degrades to ConstV2D and the result notes the fallback.
    FrameResult step(int frame_index, const std::vector<sim::Detection>& detections,
                     const std::optional<sim::CameraFrame>& camera = std::nullopt);

    const std::vector<Track>& tracks() const { return tracks_; }
    bool ever_fell_back_to_2d() const { return fell_back_; }

private:
    TrackerConfig config_;
    std::vector<Track> tracks_;
    int next_id_ = 1;
    int last_frame_ = 0;
    bool started_ = false;
    bool fell_back_ = false;
};

// Post-processing pass: when one track ends and another starts within
// rebirth_window frames and the newcomer's first box lies within the matching
// radius of the ended track's constant-velocity extrapolation, the two are
// merged under the older id. Candidate pairs are consumed greedily by
// smallest extrapolation error. Gap frames stay empty unless
// rebirth_interpolate asks for linearly interpolated boxes.
std::vector<FrameResult> track_rebirth(const std::vector<FrameResult>& stream,
                                       const TrackerConfig& config);

}  // namespace motkit::track
