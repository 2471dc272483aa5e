#include "motkit/supervision.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace motkit::supervision {

const char* to_string(LabelMode mode) {
    switch (mode) {
        case LabelMode::AllGT: return "AllGT";
        case LabelMode::FilteredGT: return "FilteredGT";
        case LabelMode::ConstV2D: return "ConstV2D";
        case LabelMode::ConstV3D: return "ConstV3D";
    }
    return "ConstV3D";
}

LabelMode label_mode_from_string(const std::string& s) {
    if (s == "AllGT") return LabelMode::AllGT;
    if (s == "FilteredGT") return LabelMode::FilteredGT;
    if (s == "ConstV2D") return LabelMode::ConstV2D;
    if (s == "ConstV3D") return LabelMode::ConstV3D;
    throw DataError("unknown label mode: " + s);
}

void SupervisionConfig::validate() const {
    if (!(0.0 <= t_vis && t_vis < t_occl && t_occl <= 1.0))
        throw DataError("supervision thresholds must satisfy 0 <= t_vis < t_occl <= 1");
    if (invisible_loss_weight <= 0.0 || lambda_off <= 0.0 || lambda_s <= 0.0 || lambda_d <= 0.0)
        throw DataError("supervision loss weights must be positive");
}

namespace {

enum class Bucket { Neg, Mid, Vis };

Bucket bucket_of(double vis, const SupervisionConfig& config) {
    if (vis < config.t_vis) return Bucket::Neg;
    if (vis > config.t_occl) return Bucket::Vis;
    return Bucket::Mid;  // threshold equality lands here
}

}  // namespace

std::vector<FrameStatus> classify_visibility(const std::vector<double>& vis,
                                             const SupervisionConfig& config) {
    config.validate();
    std::vector<FrameStatus> out(vis.size());
    bool warmed = false;
    int consecutive_visible = 0;
    for (std::size_t f = 0; f < vis.size(); ++f) {
        if (vis[f] < 0.0 || vis[f] > 1.0)
            throw DataError("visibility fractions must lie in [0,1]");
        const Bucket b = bucket_of(vis[f], config);
        FrameStatus& fs = out[f];
        switch (b) {
            case Bucket::Vis:
                fs = {Status::Positive, Origin::Visible, VisTarget::Visible};
                break;
            case Bucket::Neg:
                if (warmed) fs = {Status::Positive, Origin::OccludedPseudoGT, VisTarget::Occluded};
                else fs = {Status::Negative, Origin::Visible, VisTarget::Unsupervised};
                break;
            case Bucket::Mid:
                if (warmed) fs = {Status::Positive, Origin::Visible, VisTarget::Unsupervised};
                else fs = {Status::Ignore, Origin::Visible, VisTarget::Unsupervised};
                break;
        }
        // Warmup counts strictly earlier frames, so update after classifying.
        if (b == Bucket::Vis) {
            if (++consecutive_visible >= 2) warmed = true;
        } else {
            consecutive_visible = 0;
        }
    }
    return out;
}

namespace {

struct TrackView {
    Category category = Category::Car;
    std::vector<const sim::AnnotatedObject*> obj;  // per frame, null when absent
};

bool center_left_image(const Point2& center, const Size2& size, const ImageSize& image) {
    return center.u < -size.width / 2.0 || center.u > image.width + size.width / 2.0 ||
           center.v < -size.height / 2.0 || center.v > image.height + size.height / 2.0;
}

LabelEntry base_entry(int id, Category category) {
    LabelEntry e;
    e.id = id;
    e.category = category;
    return e;
}

}  // namespace

LabelSet build_labels(const sim::Sequence& sequence, const SupervisionConfig& config) {
    config.validate();
    const int n = static_cast<int>(sequence.frames.size());
    LabelSet out;
    out.frames.resize(n);

    std::vector<int> order;
    std::map<int, TrackView> tracks;
    for (int f = 0; f < n; ++f) {
        for (const sim::AnnotatedObject& obj : sequence.frames[f].objects) {
            auto [it, fresh] = tracks.try_emplace(obj.id);
            if (fresh) {
                order.push_back(obj.id);
                it->second.obj.assign(n, nullptr);
                it->second.category = obj.category;
            }
            it->second.obj[f] = &obj;
        }
    }

    for (int id : order) {
        const TrackView& track = tracks.at(id);
        std::vector<std::optional<LabelEntry>> entries(n);

        if (config.mode == LabelMode::AllGT) {
            for (int f = 0; f < n; ++f) {
                const sim::AnnotatedObject* o = track.obj[f];
                if (!o) continue;
                LabelEntry e = base_entry(id, track.category);
                e.status = Status::Positive;
                const Bucket b = bucket_of(o->vis, config);
                e.origin = b == Bucket::Neg ? Origin::OccludedPseudoGT : Origin::Visible;
                e.v_target = b == Bucket::Vis    ? VisTarget::Visible
                             : b == Bucket::Neg ? VisTarget::Occluded
                                                : VisTarget::Unsupervised;
                e.center = o->p;
                e.size = o->s;
                e.loss_weight = b == Bucket::Neg ? config.invisible_loss_weight : 1.0;
                entries[f] = e;
            }
        } else {
            std::vector<double> vis(n, 0.0);
            for (int f = 0; f < n; ++f)
                if (track.obj[f]) vis[f] = track.obj[f]->vis;
            const std::vector<FrameStatus> statuses = classify_visibility(vis, config);

            bool terminated = false;
            int run_onset = -1;
            geom::Point3 base3, velocity3;
            Point2 base2, velocity2;
            Size2 frozen_size;

            for (int f = 0; f < n; ++f) {
                const sim::AnnotatedObject* o = track.obj[f];
                const FrameStatus& fs = statuses[f];
                // Termination covers the rest of the lost stretch, not the
                // whole track: a frame where the object is plainly visible
                // again resumes normal labeling.
                if (terminated && fs.status == Status::Positive &&
                    fs.v_target == VisTarget::Visible)
                    terminated = false;
                const bool in_occlusion = !terminated && fs.status == Status::Positive &&
                                          fs.origin == Origin::OccludedPseudoGT;
                if (!in_occlusion) run_onset = -1;

                if (terminated) {
                    if (o) {
                        LabelEntry e = base_entry(id, track.category);
                        e.status = Status::Negative;
                        e.center = o->p;
                        e.size = o->s;
                        entries[f] = e;
                    }
                    continue;
                }

                if (fs.status == Status::Negative) {
                    if (o) {
                        LabelEntry e = base_entry(id, track.category);
                        e.status = Status::Negative;
                        e.center = o->p;
                        e.size = o->s;
                        entries[f] = e;
                    }
                    continue;
                }
                if (fs.status == Status::Ignore) {
                    if (!o) continue;  // padding for an absent frame, nothing to mark
                    LabelEntry e = base_entry(id, track.category);
                    e.status = Status::Ignore;
                    e.center = o->p;
                    e.size = o->s;
                    entries[f] = e;
                    continue;
                }

                if (fs.origin == Origin::Visible) {
                    if (!o) continue;
                    LabelEntry e = base_entry(id, track.category);
                    e.status = Status::Positive;
                    e.origin = Origin::Visible;
                    e.v_target = fs.v_target;
                    e.center = o->p;
                    e.size = o->s;
                    entries[f] = e;
                    continue;
                }

                // Occluded positive.
                auto terminate_here = [&] {
                    terminated = true;
                    if (o) {
                        LabelEntry e = base_entry(id, track.category);
                        e.status = Status::Negative;
                        e.center = o->p;
                        e.size = o->s;
                        entries[f] = e;
                    }
                };

                if (config.mode == LabelMode::FilteredGT) {
                    if (!o || center_left_image(o->p, o->s, sequence.image_size)) {
                        terminate_here();
                        continue;
                    }
                    LabelEntry e = base_entry(id, track.category);
                    e.status = Status::Positive;
                    e.origin = Origin::OccludedPseudoGT;
                    e.v_target = VisTarget::Occluded;
                    e.center = o->p;
                    e.size = o->s;
                    e.loss_weight = config.invisible_loss_weight;
                    entries[f] = e;
                    continue;
                }

                // Constant-velocity modes hallucinate the location. The
                // recurrence is anchored on the annotated positions of the two
                // frames before the occlusion began.
                if (run_onset < 0) {
                    const sim::AnnotatedObject* prev1 = f >= 1 ? track.obj[f - 1] : nullptr;
                    const sim::AnnotatedObject* prev2 = f >= 2 ? track.obj[f - 2] : nullptr;
                    if (!prev1 || !prev2) {
                        terminate_here();
                        continue;
                    }
                    run_onset = f;
                    frozen_size = prev1->s;
                    base3 = prev1->world_center;
                    velocity3 = geom::world_velocity(prev1->world_center, prev2->world_center);
                    base2 = prev1->p;
                    velocity2 = prev1->p - prev2->p;
                }
                const int steps = f - run_onset + 1;
                Point2 center;
                if (config.mode == LabelMode::ConstV3D) {
                    const geom::Point3 propagated =
                        geom::propagate_constant_velocity(base3, velocity3, steps);
                    const sim::Frame& frame = sequence.frames[f];
                    auto proj = geom::project(frame.intrinsics, frame.pose, propagated);
                    if (!proj) {
                        terminate_here();
                        continue;
                    }
                    center = proj->point;
                } else {
                    center = geom::propagate_constant_velocity(base2, velocity2, steps);
                }
                if (center_left_image(center, frozen_size, sequence.image_size)) {
                    terminate_here();
                    continue;
                }
                LabelEntry e = base_entry(id, track.category);
                e.status = Status::Positive;
                e.origin = Origin::OccludedPseudoGT;
                e.v_target = VisTarget::Occluded;
                e.center = center;
                e.size = frozen_size;
                e.loss_weight = config.invisible_loss_weight;
                entries[f] = e;
            }
        }

        for (int f = 1; f < n; ++f) {
            if (!entries[f] || entries[f]->status != Status::Positive) continue;
            if (!entries[f - 1] || entries[f - 1]->status != Status::Positive) continue;
            entries[f]->displacement = entries[f]->center - entries[f - 1]->center;
        }
        for (int f = 0; f < n; ++f)
            if (entries[f]) out.frames[f].push_back(*entries[f]);
    }
    return out;
}

double gaussian_radius(double height, double width, double min_overlap) {
    const double a1 = 1.0;
    const double b1 = height + width;
    const double c1 = width * height * (1.0 - min_overlap) / (1.0 + min_overlap);
    const double r1 = (b1 + std::sqrt(b1 * b1 - 4.0 * a1 * c1)) / 2.0;

    const double a2 = 4.0;
    const double b2 = 2.0 * (height + width);
    const double c2 = (1.0 - min_overlap) * width * height;
    const double r2 = (b2 + std::sqrt(b2 * b2 - 4.0 * a2 * c2)) / 2.0;

    const double a3 = 4.0 * min_overlap;
    const double b3 = -2.0 * min_overlap * (height + width);
    const double c3 = (min_overlap - 1.0) * width * height;
    const double r3 = (b3 + std::sqrt(b3 * b3 - 4.0 * a3 * c3)) / 2.0;

    return std::min({r1, r2, r3});
}

namespace {

void splat_gaussian(std::vector<double>& map, int grid_w, int grid_h, int cx, int cy, int radius) {
    const double sigma = (2.0 * radius + 1.0) / 6.0;
    const double denom = 2.0 * sigma * sigma;
    for (int dy = -radius; dy <= radius; ++dy) {
        const int y = cy + dy;
        if (y < 0 || y >= grid_h) continue;
        for (int dx = -radius; dx <= radius; ++dx) {
            const int x = cx + dx;
            if (x < 0 || x >= grid_w) continue;
            const double value = std::exp(-(dx * dx + dy * dy) / denom);
            double& cell = map[static_cast<std::size_t>(y) * grid_w + x];
            cell = std::max(cell, value);
        }
    }
}

}  // namespace

TargetMaps render_target_maps(const std::vector<LabelEntry>& frame_labels, const ImageSize& image,
                              int stride, int num_classes) {
    if (stride <= 0) throw DataError("render_target_maps: stride must be positive");
    if (image.width <= 0 || image.height <= 0)
        throw DataError("render_target_maps: image size must be positive");
    TargetMaps maps;
    maps.stride = stride;
    maps.num_classes = num_classes;
    maps.grid_w = (image.width + stride - 1) / stride;
    maps.grid_h = (image.height + stride - 1) / stride;
    const std::size_t cells = static_cast<std::size_t>(maps.grid_w) * maps.grid_h;
    maps.heatmap.assign(num_classes, std::vector<double>(cells, 0.0));
    maps.visibility.assign(cells, 0.0);
    maps.visibility_weight.assign(cells, 1.0);
    maps.center_mask.assign(cells, 0.0);
    maps.size_map.assign(cells * 2, 0.0);
    maps.offset_map.assign(cells * 2, 0.0);
    maps.displacement_map.assign(cells * 2, 0.0);
    maps.displacement_mask.assign(cells, 0.0);

    for (const LabelEntry& entry : frame_labels) {
        if (entry.status != Status::Positive) continue;
        const int cls = static_cast<int>(entry.category);
        if (cls < 0 || cls >= num_classes)
            throw DataError("render_target_maps: class index out of range");
        const double cx_f = entry.center.u / stride;
        const double cy_f = entry.center.v / stride;
        const int cx = std::clamp(static_cast<int>(std::floor(cx_f)), 0, maps.grid_w - 1);
        const int cy = std::clamp(static_cast<int>(std::floor(cy_f)), 0, maps.grid_h - 1);
        const std::size_t cell = static_cast<std::size_t>(cy) * maps.grid_w + cx;

        const int radius = std::max(
            0, static_cast<int>(gaussian_radius(entry.size.height / stride, entry.size.width / stride)));
        splat_gaussian(maps.heatmap[cls], maps.grid_w, maps.grid_h, cx, cy, radius);
        if (entry.v_target == VisTarget::Visible)
            splat_gaussian(maps.visibility, maps.grid_w, maps.grid_h, cx, cy, radius);
        else if (entry.v_target == VisTarget::Unsupervised)
            maps.visibility_weight[cell] = 0.0;

        maps.center_mask[cell] = std::max(maps.center_mask[cell], entry.loss_weight);
        maps.offset_map[cell * 2 + 0] = cx_f - cx;
        maps.offset_map[cell * 2 + 1] = cy_f - cy;
        maps.size_map[cell * 2 + 0] = entry.size.width;
        maps.size_map[cell * 2 + 1] = entry.size.height;
        if (entry.displacement) {
            maps.displacement_map[cell * 2 + 0] = entry.displacement->u;
            maps.displacement_map[cell * 2 + 1] = entry.displacement->v;
            maps.displacement_mask[cell] = std::max(maps.displacement_mask[cell], entry.loss_weight);
        }
    }
    return maps;
}

double focal_loss(const std::vector<double>& pred, const std::vector<double>& target,
                  const std::vector<double>* positive_weights,
                  const std::vector<double>* cell_weights) {
    if (pred.size() != target.size()) throw DataError("focal_loss: shape mismatch");
    if (positive_weights && positive_weights->size() != pred.size())
        throw DataError("focal_loss: positive_weights shape mismatch");
    if (cell_weights && cell_weights->size() != pred.size())
        throw DataError("focal_loss: cell_weights shape mismatch");

    double total = 0.0;
    long long positives = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double p = std::clamp(pred[i], 1e-12, 1.0 - 1e-12);
        const double w = cell_weights ? (*cell_weights)[i] : 1.0;
        if (target[i] == 1.0) {
            ++positives;
            const double wp = positive_weights ? (*positive_weights)[i] : 1.0;
            total -= w * wp * (1.0 - p) * (1.0 - p) * std::log(p);
        } else {
            const double down = std::pow(1.0 - target[i], 4.0);
            total -= w * down * p * p * std::log(1.0 - p);
        }
    }
    return total / static_cast<double>(std::max(1LL, positives));
}

double regression_l1(const std::vector<double>& pred, const std::vector<double>& target,
                     const std::vector<double>& cell_mask, int channels) {
    if (channels <= 0) throw DataError("regression_l1: channels must be positive");
    if (pred.size() != target.size() || pred.size() != cell_mask.size() * channels)
        throw DataError("regression_l1: shape mismatch");
    double total = 0.0;
    long long masked = 0;
    for (std::size_t cell = 0; cell < cell_mask.size(); ++cell) {
        if (cell_mask[cell] == 0.0) continue;
        ++masked;
        double err = 0.0;
        for (int c = 0; c < channels; ++c)
            err += std::fabs(pred[cell * channels + c] - target[cell * channels + c]);
        total += cell_mask[cell] * err / channels;
    }
    return masked > 0 ? total / static_cast<double>(masked) : 0.0;
}

double total_loss(const std::vector<LossBreakdown>& frames, const SupervisionConfig& config) {
    config.validate();
    if (frames.empty()) throw DataError("total_loss: no frames");
    double sum = 0.0;
    for (const LossBreakdown& f : frames)
        sum += f.l_p + f.l_v + config.lambda_off * f.l_off + config.lambda_s * f.l_s +
               config.lambda_d * f.l_d;
    return sum / static_cast<double>(frames.size());
}

double joint_loss(const std::vector<LossBreakdown>& synthetic,
                  const std::vector<LossBreakdown>& real, const SupervisionConfig& config) {
    double loss = total_loss(synthetic, config);
    if (!real.empty()) loss += total_loss(real, config);
    return loss;
}

std::vector<double> occlusion_sampling_weights(const std::vector<LabelSet>& label_sets) {
    if (label_sets.empty()) throw DataError("occlusion_sampling_weights: no sequences");
    std::vector<double> weights;
    weights.reserve(label_sets.size());
    double sum = 0.0;
    for (const LabelSet& labels : label_sets) {
        long long occluded = 0;
        for (const auto& frame : labels.frames)
            for (const LabelEntry& e : frame)
                if (e.status == Status::Positive && e.origin == Origin::OccludedPseudoGT) ++occluded;
        const double w = 1.0 + static_cast<double>(occluded);
        weights.push_back(w);
        sum += w;
    }
    for (double& w : weights) w /= sum;
    return weights;
}

}  // namespace motkit::supervision
