#pragma once

#include <vector>

#include "motkit/formats.hpp"
#include "motkit/metrics.hpp"
#include "motkit/simworld.hpp"
#include "motkit/tracker.hpp"

// Glue between the simulator, the tracker, the file formats and the metrics:
// everything needed to turn a sequence into prediction files and score them.
namespace motkit::pipeline {

using TrackStream = std::vector<track::FrameResult>;

// Feeds the per-frame detections through a tracker (with each frame's camera
// attached) and applies rebirth post-processing when the window is positive.
TrackStream run_tracker(const sim::Sequence& sequence,
                        const std::vector<std::vector<sim::Detection>>& detections,
                        const track::TrackerConfig& config);

// Emitted boxes regrouped per id; a track's confidence is its mean box score.
metrics::TrackSet stream_to_tracks(const TrackStream& stream);

// Ground-truth tracks from the amodal annotations, one per object id.
metrics::TrackSet annotation_tracks(const sim::Sequence& sequence);

std::vector<formats::KittiTrackRecord> stream_to_kitti(const TrackStream& stream);
std::vector<formats::MotRecord> stream_to_mot(const TrackStream& stream);

// Inverse direction, for scoring prediction files. Throws DataError on
// duplicate (id, frame) boxes or an id that changes category. MOT files
// carry no category, so every track comes back as Pedestrian.
metrics::TrackSet kitti_to_tracks(const std::vector<formats::KittiTrackRecord>& records);
metrics::TrackSet mot_to_tracks(const std::vector<formats::MotRecord>& records);

}  // namespace motkit::pipeline
