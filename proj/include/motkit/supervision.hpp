#pragma once

#include <optional>
#include <string>
#include <vector>

#include "motkit/common.hpp"
#include "motkit/geometry.hpp"
#include "motkit/simworld.hpp"

namespace motkit::supervision {

using geom::Point2;

// How occluded stretches of a track are labeled:
//   AllGT      every annotated box is a positive, regardless of visibility
//   FilteredGT visibility-classified statuses, annotated centers throughout
//   ConstV2D   occluded centers extrapolated linearly in the image plane
//   ConstV3D   occluded centers extrapolated linearly in world space and
//              projected through each frame's camera
enum class LabelMode { AllGT, FilteredGT, ConstV2D, ConstV3D };

const char* to_string(LabelMode mode);
LabelMode label_mode_from_string(const std::string& s);

struct SupervisionConfig {
    double t_vis = 0.05;   // below: fully occluded
    double t_occl = 0.15;  // above: visible; in between: soft transition
    LabelMode mode = LabelMode::ConstV3D;
    double invisible_loss_weight = 20.0;  // applied to occluded positives
    double lambda_off = 1.0;
    double lambda_s = 0.1;
    double lambda_d = 1.0;

    void validate() const;  // throws DataError
};

enum class Status { Positive, Ignore, Negative };
enum class Origin { Visible, OccludedPseudoGT };

// Target for the per-object visibility output. Soft-transition frames stay
// positives for localization but supervise visibility in neither direction.
enum class VisTarget { Occluded = 0, Visible = 1, Unsupervised = 2 };

struct FrameStatus {
    Status status = Status::Negative;
    Origin origin = Origin::Visible;
    VisTarget v_target = VisTarget::Unsupervised;
};

// Per-frame supervision status for one object's visibility history. A frame
// is visible above t_occl and fully occluded below t_vis; once the object has
// been visible on two consecutive frames, later sub-threshold frames become
// occluded positives instead of negatives.
std::vector<FrameStatus> classify_visibility(const std::vector<double>& vis,
                                             const SupervisionConfig& config);

struct LabelEntry {
    int id = 0;
    Category category = Category::Car;
    Status status = Status::Negative;
    Origin origin = Origin::Visible;
    VisTarget v_target = VisTarget::Unsupervised;
    Point2 center;
    Size2 size;
    std::optional<Point2> displacement;  // to the previous supervised frame
    double loss_weight = 1.0;
};

struct LabelSet {
    std::vector<std::vector<LabelEntry>> frames;
};

// Labels every track of the sequence under the configured mode, including
// constant-velocity pseudo-locations for occluded stretches. A hallucination
// whose center leaves the image (by more than half the frozen box) or falls
// behind the camera turns the rest of that stretch Negative; labeling resumes
// only once the object is plainly visible again.
LabelSet build_labels(const sim::Sequence& sequence, const SupervisionConfig& config);

// --- target map rendering ---

struct TargetMaps {
    int grid_w = 0;
    int grid_h = 0;
    int stride = 1;
    int num_classes = kNumCategories;
    std::vector<std::vector<double>> heatmap;  // per class, grid_w*grid_h, in [0,1]
    std::vector<double> visibility;            // single channel, in [0,1]
    std::vector<double> visibility_weight;     // per cell; 0 masks the cell out
    std::vector<double> center_mask;           // 0 = unsupervised, else loss weight
    std::vector<double> size_map;              // 2 channels, cell*2 + {0,1}, pixels
    std::vector<double> offset_map;            // 2 channels, sub-cell remainder
    std::vector<double> displacement_map;      // 2 channels, pixels
    std::vector<double> displacement_mask;     // 0 = unsupervised, else loss weight
};

// Minimum Gaussian radius so that a box jittered by the radius still overlaps
// the original by `min_overlap` (the usual three-case bound).
double gaussian_radius(double height, double width, double min_overlap = 0.7);

TargetMaps render_target_maps(const std::vector<LabelEntry>& frame_labels, const ImageSize& image,
                              int stride, int num_classes = kNumCategories);

// --- losses ---

// Penalty-reduced focal loss, exponents 2 and 4, normalized by the number of
// target==1 cells (at least 1). `positive_weights` scales the loss of
// positive cells; `cell_weights` scales every cell (0 drops it).
double focal_loss(const std::vector<double>& pred, const std::vector<double>& target,
                  const std::vector<double>* positive_weights = nullptr,
                  const std::vector<double>* cell_weights = nullptr);

// Mean over masked cells of the per-cell channel-mean absolute error, each
// cell scaled by its mask weight. Zero when the mask is empty.
double regression_l1(const std::vector<double>& pred, const std::vector<double>& target,
                     const std::vector<double>& cell_mask, int channels);

struct LossBreakdown {
    double l_p = 0.0;
    double l_v = 0.0;
    double l_off = 0.0;
    double l_s = 0.0;
    double l_d = 0.0;
};

// Mean over frames of l_p + l_v + lambda_off*l_off + lambda_s*l_s + lambda_d*l_d.
double total_loss(const std::vector<LossBreakdown>& frames, const SupervisionConfig& config);

// Sum of the synthetic-clip mean and the real-clip mean (real clips have
// length 2 in training, so the mean matches the 1/2-weighted sum).
double joint_loss(const std::vector<LossBreakdown>& synthetic,
                  const std::vector<LossBreakdown>& real, const SupervisionConfig& config);

// Sampling distribution over sequences: weight 1 + (occluded positive entry
// count), normalized to sum 1.
std::vector<double> occlusion_sampling_weights(const std::vector<LabelSet>& label_sets);

}  // namespace motkit::supervision
