#include "motkit/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <set>

namespace motkit::track {

const char* to_string(OcclusionMode mode) {
    switch (mode) {
        case OcclusionMode::None: return "None";
        case OcclusionMode::ConstV2D: return "ConstV2D";
        case OcclusionMode::ConstV3D: return "ConstV3D";
    }
    return "None";
}

OcclusionMode occlusion_mode_from_string(const std::string& s) {
    if (s == "None") return OcclusionMode::None;
    if (s == "ConstV2D") return OcclusionMode::ConstV2D;
    if (s == "ConstV3D") return OcclusionMode::ConstV3D;
    throw DataError("unknown occlusion mode: " + s);
}

const char* to_string(RadiusRule rule) {
    switch (rule) {
        case RadiusRule::GeometricMean: return "GeometricMean";
        case RadiusRule::MaxSide: return "MaxSide";
    }
    return "GeometricMean";
}

RadiusRule radius_rule_from_string(const std::string& s) {
    if (s == "GeometricMean") return RadiusRule::GeometricMean;
    if (s == "MaxSide") return RadiusRule::MaxSide;
    throw DataError("unknown matching radius rule: " + s);
}

double matching_radius(const Size2& s, RadiusRule rule) {
    switch (rule) {
        case RadiusRule::GeometricMean: return std::sqrt(std::max(0.0, s.width * s.height));
        case RadiusRule::MaxSide: return std::max(s.width, s.height);
    }
    return 0.0;
}

void TrackerConfig::validate() const {
    if (score_threshold < 0.0 || score_threshold > 1.0 || visibility_threshold < 0.0 ||
        visibility_threshold > 1.0)
        throw DataError("tracker thresholds must lie in [0, 1]");
    if (max_occlusion_age < 0 || rebirth_window < 0)
        throw DataError("tracker ages must be non-negative");
}

std::vector<int> associate(const std::vector<sim::Detection>& detections,
                           const std::vector<PrevTrackState>& prev,
                           const TrackerConfig& config) {
    config.validate();
    std::vector<size_t> order(detections.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        return detections[a].score > detections[b].score;
    });

    std::vector<int> result(detections.size(), kMatchDropped);
    std::vector<char> taken(prev.size(), 0);
    for (size_t idx : order) {
        const sim::Detection& det = detections[idx];
        const geom::Point2 q = det.p - det.d;
        int best = -1;
        double best_d2 = std::numeric_limits<double>::infinity();
        for (size_t j = 0; j < prev.size(); ++j) {
            if (taken[j] || prev[j].category != det.category) continue;
            const double r = matching_radius(prev[j].size, config.matching_radius_rule);
            const geom::Point2 diff = q - prev[j].center;
            const double d2 = diff.u * diff.u + diff.v * diff.v;
            if (d2 <= r * r && d2 < best_d2) {
                best_d2 = d2;
                best = static_cast<int>(j);
            }
        }
        if (best >= 0) {
            result[idx] = best;
            taken[best] = 1;
        } else if (det.score > config.score_threshold) {
            result[idx] = kMatchNew;
        }
    }
    return result;
}

Tracker::Tracker(const TrackerConfig& config) : config_(config) { config_.validate(); }

FrameResult Tracker::step(int frame_index, const std::vector<sim::Detection>& detections,
                          const std::optional<sim::CameraFrame>& camera) {
    if (started_ && frame_index != last_frame_ + 1)
        throw OutOfOrderFrame(frame_index, last_frame_ + 1);
    started_ = true;
    last_frame_ = frame_index;

    std::vector<PrevTrackState> prev;
    std::vector<size_t> pool_track;
    for (size_t i = 0; i < tracks_.size(); ++i) {
        const Track& t = tracks_[i];
        if (t.status == TrackStatus::Dead) continue;
        prev.push_back({t.id, t.history.back().center, t.history.back().size, t.category});
        pool_track.push_back(i);
    }

    const std::vector<int> decision = associate(detections, prev, config_);

    FrameResult result;
    result.frame = frame_index;

    std::vector<char> matched(tracks_.size(), 0);
    for (size_t di = 0; di < detections.size(); ++di) {
        const sim::Detection& det = detections[di];
        Track* t = nullptr;
        if (decision[di] >= 0) {
            const size_t ti = pool_track[decision[di]];
            matched[ti] = 1;
            t = &tracks_[ti];
            t->velocity2d = det.p - t->history.back().center;
            if (det.world_center) {
                if (t->world_center) t->velocity3d = *det.world_center - *t->world_center;
                t->world_center = det.world_center;
            }
        } else if (decision[di] == kMatchNew) {
            Track fresh;
            fresh.id = next_id_++;
            fresh.category = det.category;
            // The displacement is the detection's own estimate of where it
            // came from, so it doubles as the initial velocity.
            fresh.velocity2d = det.d;
            fresh.world_center = det.world_center;
            tracks_.push_back(std::move(fresh));
            matched.push_back(1);
            t = &tracks_.back();
        } else {
            continue;
        }
        t->history.push_back({frame_index, det.p, det.s, det.score, PointSource::Detected});
        t->status = TrackStatus::Active;
        t->occlusion_age = 0;
        if (det.vis_flag >= config_.visibility_threshold)
            result.emitted.push_back({t->id, det.p, det.s, det.score, det.category});
    }

    for (size_t k = 0; k < pool_track.size(); ++k) {
        const size_t ti = pool_track[k];
        if (matched[ti]) continue;
        Track& t = tracks_[ti];
        if (config_.occlusion_mode == OcclusionMode::None) {
            t.status = TrackStatus::Dead;
            continue;
        }
        const int age = t.status == TrackStatus::Occluded ? t.occlusion_age + 1 : 1;
        if (age > config_.max_occlusion_age) {
            t.status = TrackStatus::Dead;
            continue;
        }
        t.status = TrackStatus::Occluded;
        t.occlusion_age = age;

        geom::Point2 next = t.history.back().center + t.velocity2d;
        if (config_.occlusion_mode == OcclusionMode::ConstV3D) {
            if (t.world_center && t.velocity3d && camera) {
                // Keep the world hypothesis moving even when it projects
                // nowhere; the camera may turn back toward it later.
                const geom::Point3 w = *t.world_center + *t.velocity3d;
                t.world_center = w;
                if (const auto proj = geom::project(camera->intrinsics, camera->pose, w))
                    next = proj->point;
            } else {
                result.used_2d_fallback = true;
                fell_back_ = true;
            }
        }
        const Size2 frozen = t.history.back().size;
        const double last_score = t.history.back().score;
        t.history.push_back({frame_index, next, frozen, last_score, PointSource::Hallucinated});
        result.occluded_ids.push_back(t.id);
    }

    return result;
}

std::vector<FrameResult> track_rebirth(const std::vector<FrameResult>& stream,
                                       const TrackerConfig& config) {
    config.validate();
    if (config.rebirth_window <= 0) return stream;

    struct Timeline {
        Category category = Category::Car;
        std::vector<std::pair<int, EmittedBox>> boxes;  // (frame, box) ascending
    };
    std::map<int, Timeline> by_id;
    for (const FrameResult& fr : stream) {
        for (const EmittedBox& b : fr.emitted) {
            Timeline& tl = by_id[b.id];
            tl.category = b.category;
            tl.boxes.emplace_back(fr.frame, b);
        }
    }
    for (auto& [id, tl] : by_id)
        std::sort(tl.boxes.begin(), tl.boxes.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });

    struct Candidate {
        double err;
        int ender, starter;
    };
    std::vector<Candidate> candidates;
    for (const auto& [ida, a] : by_id) {
        for (const auto& [idb, b] : by_id) {
            if (ida == idb || a.category != b.category) continue;
            const int end_frame = a.boxes.back().first;
            const int begin_frame = b.boxes.front().first;
            const int gap = begin_frame - end_frame;
            if (gap < 1 || gap > config.rebirth_window) continue;

            geom::Point2 v;
            if (a.boxes.size() >= 2) {
                const auto& [f0, b0] = a.boxes[a.boxes.size() - 2];
                const auto& [f1, b1] = a.boxes.back();
                v = (b1.center - b0.center) * (1.0 / static_cast<double>(f1 - f0));
            }
            const geom::Point2 predicted =
                geom::propagate_constant_velocity(a.boxes.back().second.center, v, gap);
            const geom::Point2 diff = predicted - b.boxes.front().second.center;
            const double err = std::hypot(diff.u, diff.v);
            if (err <= matching_radius(a.boxes.back().second.size, config.matching_radius_rule))
                candidates.push_back({err, ida, idb});
        }
    }
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& x, const Candidate& y) {
        if (x.err != y.err) return x.err < y.err;
        if (x.ender != y.ender) return x.ender < y.ender;
        return x.starter < y.starter;
    });

    // Each ended track adopts at most one successor and each started track at
    // most one predecessor; chains of merges are fine.
    std::set<int> end_used, begin_used;
    std::map<int, int> merged_into;
    for (const Candidate& c : candidates) {
        if (end_used.count(c.ender) || begin_used.count(c.starter)) continue;
        end_used.insert(c.ender);
        begin_used.insert(c.starter);
        merged_into[c.starter] = c.ender;
    }
    std::function<int(int)> root = [&](int id) {
        const auto it = merged_into.find(id);
        return it == merged_into.end() ? id : root(it->second);
    };

    std::vector<FrameResult> out = stream;
    for (FrameResult& fr : out)
        for (EmittedBox& b : fr.emitted) b.id = root(b.id);

    if (config.rebirth_interpolate) {
        std::map<int, FrameResult*> frame_of;
        for (FrameResult& fr : out) frame_of[fr.frame] = &fr;
        for (const auto& [starter, ender] : merged_into) {
            const auto& [fa, ba] = by_id[ender].boxes.back();
            const auto& [fb, bb] = by_id[starter].boxes.front();
            for (int f = fa + 1; f < fb; ++f) {
                const auto it = frame_of.find(f);
                if (it == frame_of.end()) continue;
                const double alpha = static_cast<double>(f - fa) / static_cast<double>(fb - fa);
                EmittedBox mid;
                mid.id = root(starter);
                mid.category = by_id[ender].category;
                mid.center = ba.center + (bb.center - ba.center) * alpha;
                mid.size = {ba.size.width + (bb.size.width - ba.size.width) * alpha,
                            ba.size.height + (bb.size.height - ba.size.height) * alpha};
                mid.score = ba.score + (bb.score - ba.score) * alpha;
                it->second->emitted.push_back(mid);
            }
        }
    }
    return out;
}

}  // namespace motkit::track
