#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "motkit/common.hpp"

namespace motkit::metrics {

struct Box {
    double left = 0.0, top = 0.0, right = 0.0, bottom = 0.0;
};

double box_area(const Box& b);
double box_iou(const Box& a, const Box& b);

// One trajectory: per-frame boxes keyed by frame index. The confidence is
// meaningful on the prediction side only.
struct Track {
    int id = 0;
    Category category = Category::Car;
    double confidence = 1.0;
    std::map<int, Box> boxes;
};

using TrackSet = std::vector<Track>;

struct MetricConfig {
    double track_iou_threshold = 0.5;  // track-level match for AP
    double box_match_iou = 0.5;        // frame-level match for MOT/ID metrics
    double mt_threshold = 0.8;         // coverage at or above: mostly tracked
    double ml_threshold = 0.2;         // coverage at or below: mostly lost

    void validate() const;  // throws DataError
};

// Minimum-total-cost one-to-one assignment of rows to columns. Returns the
// column picked for each row (-1 when rows outnumber columns and the row is
// left out). Costs must be finite.
std::vector<int> hungarian(const std::vector<std::vector<double>>& cost);

// Temporal IoU of two trajectories: summed per-frame intersection over summed
// per-frame union, a missing box counting as empty.
double track_iou(const Track& a, const Track& b);

struct TrackApResult {
    std::array<double, kNumCategories> ap{};
    std::array<bool, kNumCategories> has_gt{};
    double mean_ap = 0.0;  // over categories with at least one GT track
};

TrackApResult track_ap(const TrackSet& pred, const TrackSet& gt, const MetricConfig& config);

struct ClearMotResult {
    long long fp = 0, fn = 0, idsw = 0, frag = 0;
    long long gt_boxes = 0, pred_boxes = 0, matches = 0;
    double iou_sum = 0.0;
    double mota = 0.0, motp = 0.0, moda = 0.0, smota = 0.0;
};

ClearMotResult clear_mot(const TrackSet& pred, const TrackSet& gt, const MetricConfig& config);

struct MtPtMlResult {
    long long mt = 0, pt = 0, ml = 0, num_tracks = 0;
    double mt_pct = 0.0, pt_pct = 0.0, ml_pct = 0.0;
};

MtPtMlResult mt_pt_ml(const TrackSet& pred, const TrackSet& gt, const MetricConfig& config);

struct IdScores {
    long long idtp = 0, idfp = 0, idfn = 0;
    double idf1 = 0.0, idp = 0.0, idr = 0.0;
};

IdScores idf1(const TrackSet& pred, const TrackSet& gt, const MetricConfig& config);

// Full per-class suite pooled over sequences. CLEAR/identity counters are
// summed across sequences; AP ranks all of a class's predictions together.
struct ClassReport {
    long long num_gt_tracks = 0;
    double track_ap = 0.0;
    ClearMotResult clear;
    MtPtMlResult coverage;
    IdScores id;
};

struct MetricsReport {
    std::array<ClassReport, kNumCategories> per_class;
    std::array<bool, kNumCategories> class_present{};  // has GT tracks or predictions
    ClassReport overall;                               // counters summed over classes
    double mean_ap = 0.0;
};

struct SequencePair {
    std::string name;
    TrackSet pred;
    TrackSet gt;
};

MetricsReport evaluate(const std::vector<SequencePair>& sequences, const MetricConfig& config);

std::string report_to_json(const MetricsReport& report);
std::string report_table(const MetricsReport& report);

}  // namespace motkit::metrics
