#include "motkit/simworld.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "motkit/rng.hpp"

namespace motkit::sim {

Point3 AgentSpec::position_at(int frame) const {
    // Stopped frames before `frame` do not advance the waypoint schedule.
    int stopped_before = 0;
    for (const auto& s : stops) {
        if (frame >= s.end) {
            stopped_before += s.end - s.begin;
        } else if (frame > s.begin) {
            stopped_before += frame - s.begin;
        }
    }
    const double t = frame - stopped_before;

    if (t <= waypoints.front().frame) return waypoints.front().position;
    if (t >= waypoints.back().frame) return waypoints.back().position;
    for (std::size_t i = 0; i + 1 < waypoints.size(); ++i) {
        const Waypoint& a = waypoints[i];
        const Waypoint& b = waypoints[i + 1];
        if (t <= b.frame) {
            const double alpha = (t - a.frame) / static_cast<double>(b.frame - a.frame);
            return a.position + (b.position - a.position) * alpha;
        }
    }
    return waypoints.back().position;
}

void ScenarioConfig::validate() const {
    if (num_frames < 2) throw DataError("scenario '" + name + "': num_frames must be at least 2");
    if (fps <= 0.0) throw DataError("scenario '" + name + "': fps must be positive");
    if (image_size.width <= 0 || image_size.height <= 0)
        throw DataError("scenario '" + name + "': image size must be positive");
    if (visibility_stride < 0)
        throw DataError("scenario '" + name + "': visibility_stride must be non-negative");
    if (static_cast<int>(camera.size()) != num_frames)
        throw DataError("scenario '" + name + "': camera must have one entry per frame");
    for (const CameraFrame& cf : camera) {
        if (cf.intrinsics.fx <= 0.0 || cf.intrinsics.fy <= 0.0)
            throw DataError("scenario '" + name + "': focal lengths must be positive");
        if (!geom::is_valid_rotation(cf.pose.rotation))
            throw DataError("scenario '" + name + "': camera rotation is not orthonormal");
    }
    std::set<int> ids;
    for (const AgentSpec& agent : agents) {
        if (!ids.insert(agent.id).second)
            throw DataError("scenario '" + name + "': duplicate agent id " + std::to_string(agent.id));
        if (agent.waypoints.empty())
            throw DataError("scenario '" + name + "': agent " + std::to_string(agent.id) + " has no waypoints");
        for (std::size_t i = 0; i + 1 < agent.waypoints.size(); ++i) {
            if (agent.waypoints[i + 1].frame <= agent.waypoints[i].frame)
                throw DataError("scenario '" + name + "': agent " + std::to_string(agent.id) +
                                " waypoint frames must be strictly increasing");
        }
        if (agent.size3d.x <= 0.0 || agent.size3d.y <= 0.0 || agent.size3d.z <= 0.0)
            throw DataError("scenario '" + name + "': agent " + std::to_string(agent.id) +
                            " size must be positive");
        for (std::size_t i = 0; i < agent.stops.size(); ++i) {
            const StopInterval& s = agent.stops[i];
            if (s.begin < 0 || s.end <= s.begin)
                throw DataError("scenario '" + name + "': agent " + std::to_string(agent.id) +
                                " has an empty or negative stop interval");
            if (i > 0 && s.begin < agent.stops[i - 1].end)
                throw DataError("scenario '" + name + "': agent " + std::to_string(agent.id) +
                                " stop intervals must be sorted and disjoint");
        }
    }
    for (const Occluder& occ : occluders) {
        if (occ.size3d.x <= 0.0 || occ.size3d.y <= 0.0 || occ.size3d.z <= 0.0)
            throw DataError("scenario '" + name + "': occluder size must be positive");
        if (occ.first_frame < 0 || (occ.last_frame >= 0 && occ.last_frame < occ.first_frame))
            throw DataError("scenario '" + name + "': occluder active window is inverted");
    }
}

std::optional<ScreenBox> project_box(const CameraIntrinsics& intr, const CameraPose& pose,
                                     const Point3& center, const Point3& size3d) {
    auto center_proj = geom::project(intr, pose, center);
    if (!center_proj) return std::nullopt;

    ScreenBox box;
    box.center_depth = center_proj->depth;
    box.left = std::numeric_limits<double>::infinity();
    box.top = std::numeric_limits<double>::infinity();
    box.right = -std::numeric_limits<double>::infinity();
    box.bottom = -std::numeric_limits<double>::infinity();
    int projected = 0;
    for (int dx = -1; dx <= 1; dx += 2)
        for (int dy = -1; dy <= 1; dy += 2)
            for (int dz = -1; dz <= 1; dz += 2) {
                Point3 corner{center.x + dx * size3d.x / 2.0,
                              center.y + dy * size3d.y / 2.0,
                              center.z + dz * size3d.z / 2.0};
                auto proj = geom::project(intr, pose, corner);
                if (!proj) continue;
                box.left = std::min(box.left, proj->point.u);
                box.right = std::max(box.right, proj->point.u);
                box.top = std::min(box.top, proj->point.v);
                box.bottom = std::max(box.bottom, proj->point.v);
                ++projected;
            }
    if (projected == 0) return std::nullopt;
    return box;
}

namespace {

// Covered cell range of a half-open pixel interval [lo, hi) on a stride grid:
// cell i is covered when it overlaps the interval with positive length.
void cell_range(double lo, double hi, int stride, long long& first, long long& last) {
    first = static_cast<long long>(std::floor(lo / stride));
    if (static_cast<double>(first + 1) * stride <= lo) ++first;
    last = static_cast<long long>(std::ceil(hi / stride)) - 1;
    if (static_cast<double>(last) * stride >= hi) --last;
}

}  // namespace

std::vector<double> compute_visibility(const std::vector<VisibilityInput>& inputs,
                                       const ImageSize& image, int grid_stride) {
    const int st = grid_stride;
    const int ncx = (image.width + st - 1) / st;
    const int ncy = (image.height + st - 1) / st;
    std::vector<double> best_depth(static_cast<std::size_t>(ncx) * ncy,
                                   std::numeric_limits<double>::infinity());
    std::vector<int> winner(static_cast<std::size_t>(ncx) * ncy, -1);

    // Nearest depth wins each in-image cell; ties go to the earlier input.
    for (std::size_t idx = 0; idx < inputs.size(); ++idx) {
        const VisibilityInput& in = inputs[idx];
        if (in.right <= in.left || in.bottom <= in.top) continue;
        long long cx0, cx1, cy0, cy1;
        cell_range(in.left, in.right, st, cx0, cx1);
        cell_range(in.top, in.bottom, st, cy0, cy1);
        const long long ix0 = std::max<long long>(cx0, 0), ix1 = std::min<long long>(cx1, ncx - 1);
        const long long iy0 = std::max<long long>(cy0, 0), iy1 = std::min<long long>(cy1, ncy - 1);
        for (long long cy = iy0; cy <= iy1; ++cy)
            for (long long cx = ix0; cx <= ix1; ++cx) {
                const std::size_t cell = static_cast<std::size_t>(cy) * ncx + cx;
                if (in.depth < best_depth[cell]) {
                    best_depth[cell] = in.depth;
                    winner[cell] = static_cast<int>(idx);
                }
            }
    }

    std::vector<double> vis(inputs.size(), 0.0);
    for (std::size_t idx = 0; idx < inputs.size(); ++idx) {
        const VisibilityInput& in = inputs[idx];
        if (in.blocker_only) continue;
        if (in.right <= in.left || in.bottom <= in.top) continue;
        long long cx0, cx1, cy0, cy1;
        cell_range(in.left, in.right, st, cx0, cx1);
        cell_range(in.top, in.bottom, st, cy0, cy1);
        // Cells outside the image stay in the denominator but cannot be won,
        // so leaving the frame lowers visibility just like occlusion does.
        const long long total = (cx1 - cx0 + 1) * (cy1 - cy0 + 1);
        if (total <= 0) continue;
        const long long ix0 = std::max<long long>(cx0, 0), ix1 = std::min<long long>(cx1, ncx - 1);
        const long long iy0 = std::max<long long>(cy0, 0), iy1 = std::min<long long>(cy1, ncy - 1);
        long long won = 0;
        for (long long cy = iy0; cy <= iy1; ++cy)
            for (long long cx = ix0; cx <= ix1; ++cx)
                if (winner[static_cast<std::size_t>(cy) * ncx + cx] == static_cast<int>(idx)) ++won;
        vis[idx] = static_cast<double>(won) / static_cast<double>(total);
    }
    return vis;
}

Sequence simulate(const ScenarioConfig& config) {
    config.validate();
    Sequence out;
    out.name = config.name;
    out.seed = config.seed;
    out.fps = config.fps;
    out.image_size = config.image_size;
    out.frames.reserve(config.num_frames);

    const int stride = config.visibility_stride > 0 ? config.visibility_stride
                                                    : std::max(1, config.image_size.width / 8);
    const double W = config.image_size.width;
    const double H = config.image_size.height;

    for (int f = 0; f < config.num_frames; ++f) {
        const CameraFrame& cam = config.camera[f];
        Frame frame;
        frame.intrinsics = cam.intrinsics;
        frame.pose = cam.pose;

        std::vector<VisibilityInput> vis_inputs;
        for (const AgentSpec& agent : config.agents) {
            const Point3 center = agent.position_at(f);
            auto box = project_box(cam.intrinsics, cam.pose, center, agent.size3d);
            if (!box) continue;
            AnnotatedObject obj;
            obj.p = {(box->left + box->right) / 2.0, (box->top + box->bottom) / 2.0};
            obj.s = {box->right - box->left, box->bottom - box->top};
            obj.id = agent.id;
            obj.world_center = center;
            obj.depth = box->center_depth;
            obj.category = agent.category;
            obj.out_of_frame = box->right <= 0.0 || box->left >= W || box->bottom <= 0.0 || box->top >= H;
            frame.objects.push_back(obj);
            vis_inputs.push_back({box->left, box->top, box->right, box->bottom, box->center_depth, false});
        }
        for (const Occluder& occ : config.occluders) {
            if (f < occ.first_frame || (occ.last_frame >= 0 && f > occ.last_frame)) continue;
            auto box = project_box(cam.intrinsics, cam.pose, occ.center, occ.size3d);
            if (!box) continue;
            vis_inputs.push_back({box->left, box->top, box->right, box->bottom, box->center_depth, true});
        }

        const std::vector<double> vis = compute_visibility(vis_inputs, config.image_size, stride);
        for (std::size_t i = 0; i < frame.objects.size(); ++i) frame.objects[i].vis = vis[i];
        out.frames.push_back(std::move(frame));
    }
    return out;
}

double DetectorNoiseConfig::detect_prob(double vis) const {
    const double p = detect_prob_floor + (detect_prob_ceil - detect_prob_floor) * vis;
    return std::clamp(p, 0.0, 1.0);
}

std::vector<std::vector<Detection>> oracle_detector(const Sequence& sequence,
                                                    const DetectorNoiseConfig& noise) {
    Rng rng = Rng::stream(noise.seed, "detector");
    std::vector<std::vector<Detection>> out;
    out.reserve(sequence.frames.size());

    std::map<int, Point2> prev_center;
    for (const Frame& frame : sequence.frames) {
        std::map<int, Point2> cur_center;
        for (const AnnotatedObject& obj : frame.objects) cur_center[obj.id] = obj.p;

        std::vector<Detection> dets;
        for (const AnnotatedObject& obj : frame.objects) {
            if (obj.vis <= 0.0 || obj.vis < noise.drop_vis_threshold) continue;
            if (!rng.bernoulli(noise.detect_prob(obj.vis))) continue;
            Detection det;
            det.p = {obj.p.u + rng.normal(0.0, noise.center_sigma),
                     obj.p.v + rng.normal(0.0, noise.center_sigma)};
            Point2 gt_d{0.0, 0.0};
            if (auto it = prev_center.find(obj.id); it != prev_center.end())
                gt_d = obj.p - it->second;
            det.d = {gt_d.u + rng.normal(0.0, noise.center_sigma),
                     gt_d.v + rng.normal(0.0, noise.center_sigma)};
            det.s = obj.s;
            det.score = obj.vis * (1.0 - noise.score_epsilon) + noise.score_epsilon * rng.uniform();
            det.vis_flag = obj.vis;
            det.category = obj.category;
            if (noise.with_world_centers) det.world_center = obj.world_center;
            dets.push_back(det);
        }
        out.push_back(std::move(dets));
        prev_center = std::move(cur_center);
    }
    return out;
}

namespace {

struct TrackAcc {
    Category category = Category::Car;
    int length = 0;
    int occluded = 0;
};

CategoryStats summarize(const std::vector<const TrackAcc*>& tracks) {
    CategoryStats stats;
    stats.occlusion_histogram.assign(StatsReport::kHistogramBins, 0);
    stats.num_tracks = static_cast<int>(tracks.size());
    long long total_length = 0;
    int ge_10pct = 0;
    for (const TrackAcc* t : tracks) {
        total_length += t->length;
        stats.max_length = std::max(stats.max_length, t->length);
        // Integer arithmetic keeps the ratio bucketing exact.
        int bin = static_cast<int>((static_cast<long long>(t->occluded) * StatsReport::kHistogramBins) / t->length);
        bin = std::min(bin, StatsReport::kHistogramBins - 1);
        stats.occlusion_histogram[bin] += 1;
        if (10LL * t->occluded >= t->length) ++ge_10pct;
    }
    if (!tracks.empty()) {
        stats.avg_length = static_cast<double>(total_length) / static_cast<double>(tracks.size());
        stats.frac_occluded_ge_10pct = static_cast<double>(ge_10pct) / static_cast<double>(tracks.size());
    }
    return stats;
}

}  // namespace

StatsReport dataset_stats(const std::vector<Sequence>& sequences, double occlusion_vis_threshold) {
    if (sequences.empty()) throw DataError("dataset_stats: no sequences given");
    std::map<std::pair<int, int>, TrackAcc> tracks;
    for (std::size_t si = 0; si < sequences.size(); ++si) {
        for (const Frame& frame : sequences[si].frames) {
            for (const AnnotatedObject& obj : frame.objects) {
                TrackAcc& acc = tracks[{static_cast<int>(si), obj.id}];
                acc.category = obj.category;
                acc.length += 1;
                if (obj.vis < occlusion_vis_threshold) acc.occluded += 1;
            }
        }
    }

    StatsReport report;
    report.occlusion_vis_threshold = occlusion_vis_threshold;
    std::vector<const TrackAcc*> all;
    for (int c = 0; c < kNumCategories; ++c) {
        std::vector<const TrackAcc*> of_category;
        for (const auto& [key, acc] : tracks)
            if (static_cast<int>(acc.category) == c) of_category.push_back(&acc);
        report.per_category.emplace_back(static_cast<Category>(c), summarize(of_category));
        all.insert(all.end(), of_category.begin(), of_category.end());
    }
    report.overall = summarize(all);
    return report;
}

}  // namespace motkit::sim
