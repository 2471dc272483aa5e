#include "motkit/pipeline.hpp"

#include <algorithm>
#include <map>
#include <string>

namespace motkit::pipeline {

TrackStream run_tracker(const sim::Sequence& sequence,
                        const std::vector<std::vector<sim::Detection>>& detections,
                        const track::TrackerConfig& config) {
    if (detections.size() != sequence.frames.size())
        throw DataError("run_tracker: detection stream does not cover the sequence");
    track::Tracker tracker(config);
    TrackStream stream;
    stream.reserve(detections.size());
    for (std::size_t f = 0; f < detections.size(); ++f) {
        const sim::CameraFrame camera{sequence.frames[f].intrinsics, sequence.frames[f].pose};
        stream.push_back(tracker.step(static_cast<int>(f), detections[f], camera));
    }
    if (config.rebirth_window > 0) return track::track_rebirth(stream, config);
    return stream;
}

metrics::TrackSet stream_to_tracks(const TrackStream& stream) {
    std::map<int, metrics::Track> by_id;
    std::map<int, double> score_sum;
    for (const track::FrameResult& fr : stream) {
        for (const track::EmittedBox& b : fr.emitted) {
            metrics::Track& t = by_id[b.id];
            t.id = b.id;
            t.category = b.category;
            t.boxes[fr.frame] = metrics::Box{
                b.center.u - b.size.width / 2, b.center.v - b.size.height / 2,
                b.center.u + b.size.width / 2, b.center.v + b.size.height / 2};
            score_sum[b.id] += b.score;
        }
    }
    metrics::TrackSet out;
    out.reserve(by_id.size());
    for (auto& [id, t] : by_id) {
        t.confidence = score_sum[id] / static_cast<double>(t.boxes.size());
        out.push_back(std::move(t));
    }
    return out;
}

metrics::TrackSet annotation_tracks(const sim::Sequence& sequence) {
    std::map<int, metrics::Track> by_id;
    for (std::size_t f = 0; f < sequence.frames.size(); ++f) {
        for (const sim::AnnotatedObject& obj : sequence.frames[f].objects) {
            metrics::Track& t = by_id[obj.id];
            t.id = obj.id;
            t.category = obj.category;
            t.boxes[static_cast<int>(f)] = metrics::Box{
                obj.p.u - obj.s.width / 2, obj.p.v - obj.s.height / 2,
                obj.p.u + obj.s.width / 2, obj.p.v + obj.s.height / 2};
        }
    }
    metrics::TrackSet out;
    out.reserve(by_id.size());
    for (auto& [id, t] : by_id) out.push_back(std::move(t));
    return out;
}

std::vector<formats::KittiTrackRecord> stream_to_kitti(const TrackStream& stream) {
    std::vector<formats::KittiTrackRecord> records;
    for (const track::FrameResult& fr : stream) {
        for (const track::EmittedBox& b : fr.emitted) {
            formats::KittiTrackRecord rec;
            rec.frame = fr.frame;
            rec.track_id = b.id;
            rec.type = to_string(b.category);
            rec.left = b.center.u - b.size.width / 2;
            rec.top = b.center.v - b.size.height / 2;
            rec.right = b.center.u + b.size.width / 2;
            rec.bottom = b.center.v + b.size.height / 2;
            rec.score = b.score;
            records.push_back(rec);
        }
    }
    return records;
}

std::vector<formats::MotRecord> stream_to_mot(const TrackStream& stream) {
    std::vector<formats::MotRecord> records;
    for (const track::FrameResult& fr : stream) {
        for (const track::EmittedBox& b : fr.emitted) {
            formats::MotRecord rec;
            rec.frame = fr.frame + 1;
            rec.id = b.id;
            rec.bb_left = b.center.u - b.size.width / 2;
            rec.bb_top = b.center.v - b.size.height / 2;
            rec.bb_width = b.size.width;
            rec.bb_height = b.size.height;
            rec.conf = b.score;
            records.push_back(rec);
        }
    }
    return records;
}

namespace {

struct TrackAcc {
    metrics::Track track;
    double conf_sum = 0.0;
    int conf_count = 0;
};

metrics::TrackSet finish(std::map<int, TrackAcc>& by_id) {
    metrics::TrackSet out;
    out.reserve(by_id.size());
    for (auto& [id, acc] : by_id) {
        if (acc.conf_count > 0)
            acc.track.confidence = acc.conf_sum / static_cast<double>(acc.conf_count);
        out.push_back(std::move(acc.track));
    }
    return out;
}

void add_box(std::map<int, TrackAcc>& by_id, int id, Category category, int frame,
             const metrics::Box& box) {
    TrackAcc& acc = by_id[id];
    if (acc.track.boxes.empty()) {
        acc.track.id = id;
        acc.track.category = category;
    } else if (acc.track.category != category) {
        throw DataError("track " + std::to_string(id) + " changes category");
    }
    if (!acc.track.boxes.emplace(frame, box).second)
        throw DataError("track " + std::to_string(id) + " has two boxes at frame " +
                        std::to_string(frame));
}

}  // namespace

metrics::TrackSet kitti_to_tracks(const std::vector<formats::KittiTrackRecord>& records) {
    std::map<int, TrackAcc> by_id;
    for (const formats::KittiTrackRecord& rec : records) {
        add_box(by_id, rec.track_id, category_from_string(rec.type), rec.frame,
                metrics::Box{rec.left, rec.top, rec.right, rec.bottom});
        if (rec.score) {
            by_id[rec.track_id].conf_sum += *rec.score;
            by_id[rec.track_id].conf_count += 1;
        }
    }
    return finish(by_id);
}

metrics::TrackSet mot_to_tracks(const std::vector<formats::MotRecord>& records) {
    std::map<int, TrackAcc> by_id;
    for (const formats::MotRecord& rec : records) {
        add_box(by_id, rec.id, Category::Pedestrian, rec.frame - 1,
                metrics::Box{rec.bb_left, rec.bb_top, rec.bb_left + rec.bb_width,
                             rec.bb_top + rec.bb_height});
        by_id[rec.id].conf_sum += rec.conf;
        by_id[rec.id].conf_count += 1;
    }
    return finish(by_id);
}

}  // namespace motkit::pipeline
