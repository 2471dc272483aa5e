#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "motkit/rng.hpp"
#include "motkit/simworld.hpp"

namespace motkit::sim {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Occlusion windows are placed inside [kWindowFirst, kWindowLast + kLenMax),
// and the camera yaw phase is aligned so the pan reverses direction near the
// middle of that range. A reversing fast pan makes linear image-space
// extrapolation overshoot, which is what separates the occlusion modes.
constexpr int kWindowFirst = 18;
constexpr int kWindowLast = 24;
constexpr int kLenMin = 10;
constexpr int kLenMax = 14;

struct AgentDraft {
    AgentSpec spec;
    bool designated = false;  // routed behind a purpose-built occluder
    int window_begin = 0;
    int window_len = 0;
    std::vector<geom::Point2> pixels;  // projected center per frame
};

bool trajectory_ok(const std::vector<CameraFrame>& cams, const Point3& p0, const Point3& vel,
                   const ImageSize& image, double min_depth, std::vector<geom::Point2>& pixels) {
    pixels.clear();
    pixels.reserve(cams.size());
    const double u_lo = 0.10 * image.width, u_hi = 0.90 * image.width;
    const double v_lo = 0.12 * image.height, v_hi = 0.88 * image.height;
    for (std::size_t f = 0; f < cams.size(); ++f) {
        const Point3 p = p0 + vel * static_cast<double>(f);
        auto proj = geom::project(cams[f].intrinsics, cams[f].pose, p);
        if (!proj) return false;
        if (proj->depth < min_depth || proj->depth > 40.0) return false;
        if (proj->point.u < u_lo || proj->point.u > u_hi) return false;
        if (proj->point.v < v_lo || proj->point.v > v_hi) return false;
        pixels.push_back(proj->point);
    }
    return true;
}

bool separated(const std::vector<geom::Point2>& a, const std::vector<geom::Point2>& b,
               double min_dist) {
    for (std::size_t f = 0; f < a.size(); ++f)
        if (geom::norm(a[f] - b[f]) < min_dist) return false;
    return true;
}

// A wall just in front of the agent, sized so that every sight line through
// the agent's (margin-expanded) screen box during the window is blocked.
Occluder build_occluder(const std::vector<CameraFrame>& cams, const AgentSpec& agent,
                        int window_begin, int window_len, double occluder_depth) {
    const double margin = 3.0;  // pixels
    Point3 lo{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
              std::numeric_limits<double>::infinity()};
    Point3 hi{-lo.x, -lo.y, -lo.z};
    for (int f = window_begin; f < window_begin + window_len; ++f) {
        const CameraFrame& cam = cams[f];
        auto box = project_box(cam.intrinsics, cam.pose, agent.position_at(f), agent.size3d);
        if (!box) continue;
        const double us[2] = {box->left - margin, box->right + margin};
        const double vs[2] = {box->top - margin, box->bottom + margin};
        for (double u : us)
            for (double v : vs) {
                const Point3 cam_pt{(u - cam.intrinsics.cx) / cam.intrinsics.fx * occluder_depth,
                                    (v - cam.intrinsics.cy) / cam.intrinsics.fy * occluder_depth,
                                    occluder_depth};
                const Point3 w = cam.pose.to_world(cam_pt);
                lo = {std::min(lo.x, w.x), std::min(lo.y, w.y), std::min(lo.z, w.z)};
                hi = {std::max(hi.x, w.x), std::max(hi.y, w.y), std::max(hi.z, w.z)};
            }
    }
    Occluder occ;
    occ.center = (lo + hi) * 0.5;
    occ.size3d = {hi.x - lo.x + 0.05, hi.y - lo.y + 0.05, std::max(hi.z - lo.z, 0.35)};
    // Limiting the occluder to the window keeps the blackout length equal to
    // the designed window instead of however long the agent needs to slide
    // out from behind the wall.
    occ.first_frame = window_begin;
    occ.last_frame = window_begin + window_len - 1;
    return occ;
}

struct Candidate {
    ScenarioConfig config;
    std::vector<AgentDraft> drafts;
};

Candidate build_candidate(std::uint64_t seed, int index, int attempt, const BenchmarkParams& params,
                          bool fast_pan) {
    Rng rng = Rng::stream(seed, "benchmark", (static_cast<std::uint64_t>(index) << 8) |
                                                 static_cast<std::uint64_t>(attempt));
    Candidate cand;
    ScenarioConfig& cfg = cand.config;
    char name[32];
    std::snprintf(name, sizeof(name), "bench%03d", index);
    cfg.name = name;
    cfg.seed = seed + static_cast<std::uint64_t>(index);
    cfg.num_frames = params.num_frames;
    cfg.fps = 20.0;
    cfg.image_size = params.image_size;
    cfg.visibility_stride = 1;

    const double W = params.image_size.width, H = params.image_size.height;
    CameraIntrinsics intr{params.focal, params.focal, W / 2.0, H / 2.0};

    // Camera: forward translation with a sinusoidal pan. The phase puts the
    // pan reversal near the occlusion windows.
    const Point3 cam_vel{rng.uniform(-0.02, 0.02), 0.0, rng.uniform(0.03, 0.07)};
    const double deg = kPi / 180.0;
    const double amplitude = fast_pan ? rng.uniform(11.5 * deg, 13.0 * deg)
                                      : rng.uniform(0.4 * deg, 1.0 * deg);
    const double direction = rng.bernoulli(0.5) ? 1.0 : -1.0;
    const double period = rng.uniform(36.0, 44.0);
    const double omega = 2.0 * kPi / period;
    const double mid = (kWindowFirst + kWindowLast + kLenMax) / 2.0;
    const double phase = kPi / 2.0 - omega * mid + rng.uniform(-0.15, 0.15);
    cfg.camera.reserve(cfg.num_frames);
    for (int f = 0; f < cfg.num_frames; ++f) {
        const double yaw = direction * amplitude * std::sin(omega * f + phase);
        CameraFrame cf;
        cf.intrinsics = intr;
        cf.pose = geom::pose_from_position_yaw(Point3{0, 0, 0} + cam_vel * static_cast<double>(f), yaw);
        cfg.camera.push_back(cf);
    }

    const int n_agents = rng.uniform_int(params.min_agents, params.max_agents);
    const int n_designated = static_cast<int>(
        std::ceil(params.occluded_agent_fraction * n_agents - 1e-9));

    for (int i = 0; i < n_agents; ++i) {
        AgentDraft draft;
        draft.designated = i < n_designated;
        AgentSpec& agent = draft.spec;
        agent.id = i + 1;
        // Designated agents are pedestrians: their small screen boxes give a
        // tight matching radius, so a drifting 2D extrapolation really misses.
        const bool pedestrian = draft.designated ? true : rng.bernoulli(0.5);
        agent.category = pedestrian ? Category::Pedestrian : Category::Car;
        if (pedestrian) {
            agent.size3d = {rng.uniform(0.55, 0.70), rng.uniform(1.6, 1.9), rng.uniform(0.55, 0.70)};
        } else {
            agent.size3d = {rng.uniform(1.7, 2.0), rng.uniform(1.4, 1.7), rng.uniform(3.8, 4.6)};
        }

        bool placed = false;
        for (int a = 0; a < 300 && !placed; ++a) {
            const double z0 = draft.designated ? rng.uniform(12.0, 18.0) : rng.uniform(8.0, 20.0);
            const double u0 = rng.uniform(0.18, 0.82) * W;
            const double v0 = rng.uniform(0.32, 0.68) * H;
            const Point3 cam_pt{(u0 - intr.cx) / intr.fx * z0, (v0 - intr.cy) / intr.fy * z0, z0};
            const Point3 p0 = cfg.camera[0].pose.to_world(cam_pt);
            const Point3 vel{rng.uniform(-0.05, 0.05), 0.0, rng.uniform(-0.04, 0.04)};
            const double min_depth = draft.designated ? 7.5 : 4.5;
            if (!trajectory_ok(cfg.camera, p0, vel, params.image_size, min_depth, draft.pixels))
                continue;
            const double min_sep = a < 200 ? 28.0 : 20.0;
            bool clear = true;
            for (const AgentDraft& other : cand.drafts)
                if (!separated(draft.pixels, other.pixels, min_sep)) {
                    clear = false;
                    break;
                }
            if (!clear) continue;
            agent.waypoints = {{0, p0}, {cfg.num_frames - 1, p0 + vel * (cfg.num_frames - 1.0)}};
            placed = true;
        }
        if (!placed) {
            // Ride along with the camera at a fixed bearing; yaw sway alone
            // cannot push this out of frame.
            const double u0 = (i % 2 == 0 ? 0.3 : 0.7) * W;
            const double z0 = 12.0;
            const Point3 cam_pt{(u0 - intr.cx) / intr.fx * z0, 0.0, z0};
            const Point3 p0 = cfg.camera[0].pose.to_world(cam_pt);
            agent.waypoints = {{0, p0}, {cfg.num_frames - 1, p0 + cam_vel * (cfg.num_frames - 1.0)}};
            trajectory_ok(cfg.camera, p0, cam_vel, params.image_size, 4.0, draft.pixels);
        }
        if (draft.designated) {
            draft.window_begin = rng.uniform_int(kWindowFirst, kWindowLast);
            draft.window_len = rng.uniform_int(kLenMin, kLenMax);
        }
        cand.drafts.push_back(std::move(draft));
    }

    for (const AgentDraft& draft : cand.drafts) {
        cfg.agents.push_back(draft.spec);
        if (draft.designated) {
            const double zo = rng.uniform(5.0, 6.5);
            cfg.occluders.push_back(
                build_occluder(cfg.camera, draft.spec, draft.window_begin, draft.window_len, zo));
        }
    }
    return cand;
}

// Occlusion pattern checks on the fully simulated scene. Every blackout must
// be recoverable (bounded length, clean sightings on both sides), and the
// designated agents must actually suffer one.
bool verify_candidate(const Candidate& cand) {
    const Sequence seq = simulate(cand.config);
    const int n_frames = cand.config.num_frames;

    for (const AgentDraft& draft : cand.drafts) {
        std::vector<double> vis;
        vis.reserve(n_frames);
        for (const Frame& frame : seq.frames) {
            bool found = false;
            for (const AnnotatedObject& obj : frame.objects)
                if (obj.id == draft.spec.id) {
                    vis.push_back(obj.vis);
                    found = true;
                    break;
                }
            if (!found) return false;
        }
        if (vis[0] < 0.4 || vis[1] < 0.4) return false;

        int longest_run = 0;
        int occluded_total = 0;
        int run = 0;
        for (int f = 0; f <= n_frames; ++f) {
            const bool dark = f < n_frames && vis[f] < 0.05;
            if (dark) {
                ++run;
                ++occluded_total;
                continue;
            }
            if (run > 0) {
                longest_run = std::max(longest_run, run);
                const int start = f - run;
                if (run > 15) return false;
                if (start < 4) return false;
                if (f + 2 >= n_frames) return false;
                if (vis[f] < 0.35 || vis[f + 1] < 0.35 || vis[f + 2] < 0.35) return false;
                run = 0;
            }
        }
        if (occluded_total > 24) return false;
        if (draft.designated && longest_run < 6) return false;
    }
    return true;
}

}  // namespace

ScenarioConfig make_benchmark_scenario(std::uint64_t seed, int index, const BenchmarkParams& params) {
    const bool fast_pan =
        std::floor((index + 1) * params.fast_pan_fraction) > std::floor(index * params.fast_pan_fraction);
    Candidate last;
    for (int attempt = 0; attempt < 24; ++attempt) {
        last = build_candidate(seed, index, attempt, params, fast_pan);
        if (verify_candidate(last)) return last.config;
    }
    return last.config;
}

std::vector<ScenarioConfig> make_benchmark(std::uint64_t seed, int count, const BenchmarkParams& params) {
    std::vector<ScenarioConfig> out;
    out.reserve(count);
    for (int i = 0; i < count; ++i) out.push_back(make_benchmark_scenario(seed, i, params));
    return out;
}

}  // namespace motkit::sim
