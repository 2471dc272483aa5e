#include "motkit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <set>

#include <json.hpp>

namespace motkit::metrics {

double box_area(const Box& b) {
    return std::max(0.0, b.right - b.left) * std::max(0.0, b.bottom - b.top);
}

double box_iou(const Box& a, const Box& b) {
    const double iw = std::min(a.right, b.right) - std::max(a.left, b.left);
    const double ih = std::min(a.bottom, b.bottom) - std::max(a.top, b.top);
    if (iw <= 0.0 || ih <= 0.0) return 0.0;
    const double inter = iw * ih;
    const double uni = box_area(a) + box_area(b) - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

void MetricConfig::validate() const {
    auto in_unit = [](double v) { return v > 0.0 && v < 1.0; };
    if (!in_unit(track_iou_threshold) || !in_unit(box_match_iou) ||
        !in_unit(mt_threshold) || !in_unit(ml_threshold))
        throw DataError("metric thresholds must lie strictly between 0 and 1");
    if (ml_threshold >= mt_threshold)
        throw DataError("mostly-lost threshold must be below the mostly-tracked one");
}

std::vector<int> hungarian(const std::vector<std::vector<double>>& cost) {
    const int rows = static_cast<int>(cost.size());
    if (rows == 0) return {};
    const int cols = static_cast<int>(cost[0].size());
    for (const auto& row : cost) {
        if (static_cast<int>(row.size()) != cols)
            throw DataError("hungarian: cost matrix rows have unequal lengths");
        for (double c : row)
            if (!std::isfinite(c)) throw DataError("hungarian: cost entries must be finite");
    }
    if (cols == 0) return std::vector<int>(rows, -1);
    if (rows > cols) {
        // Solve the transpose, then turn the column assignment back around.
        std::vector<std::vector<double>> t(cols, std::vector<double>(rows));
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < cols; ++j) t[j][i] = cost[i][j];
        const std::vector<int> col_to_row = hungarian(t);
        std::vector<int> row_to_col(rows, -1);
        for (int j = 0; j < cols; ++j)
            if (col_to_row[j] >= 0) row_to_col[col_to_row[j]] = j;
        return row_to_col;
    }

    // Shortest augmenting paths with row and column potentials. match[j] is
    // the 1-based row currently holding column j, 0 when free.
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(rows + 1, 0.0), v(cols + 1, 0.0);
    std::vector<int> match(cols + 1, 0), way(cols + 1, 0);
    for (int i = 1; i <= rows; ++i) {
        match[0] = i;
        int j0 = 0;
        std::vector<double> minv(cols + 1, inf);
        std::vector<char> used(cols + 1, 0);
        do {
            used[j0] = 1;
            const int i0 = match[j0];
            int j1 = 0;
            double delta = inf;
            for (int j = 1; j <= cols; ++j) {
                if (used[j]) continue;
                const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= cols; ++j) {
                if (used[j]) {
                    u[match[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (match[j0] != 0);
        do {
            const int j1 = way[j0];
            match[j0] = match[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<int> row_to_col(rows, -1);
    for (int j = 1; j <= cols; ++j)
        if (match[j] != 0) row_to_col[match[j] - 1] = j - 1;
    return row_to_col;
}

double track_iou(const Track& a, const Track& b) {
    double inter_sum = 0.0, union_sum = 0.0;
    auto ia = a.boxes.begin();
    auto ib = b.boxes.begin();
    while (ia != a.boxes.end() || ib != b.boxes.end()) {
        if (ib == b.boxes.end() || (ia != a.boxes.end() && ia->first < ib->first)) {
            union_sum += box_area(ia->second);
            ++ia;
        } else if (ia == a.boxes.end() || ib->first < ia->first) {
            union_sum += box_area(ib->second);
            ++ib;
        } else {
            const Box& x = ia->second;
            const Box& y = ib->second;
            const double iw = std::min(x.right, y.right) - std::max(x.left, y.left);
            const double ih = std::min(x.bottom, y.bottom) - std::max(x.top, y.top);
            const double inter = (iw > 0.0 && ih > 0.0) ? iw * ih : 0.0;
            inter_sum += inter;
            union_sum += box_area(x) + box_area(y) - inter;
            ++ia;
            ++ib;
        }
    }
    return union_sum > 0.0 ? inter_sum / union_sum : 0.0;
}

namespace {

// Invalid pairs cost kBig so the assignment first maximizes how many valid
// matches it makes. kTie nudges exact IoU ties toward the lower-indexed pair,
// which keeps the result reproducible across reorderings of equal options.
constexpr double kBig = 1e6;
constexpr double kTie = 1e-9;

struct FrameMatch {
    int gt = -1;
    int pred = -1;
    double iou = 0.0;
};

struct TraceFrame {
    std::vector<int> gts, preds;     // track indices present this frame
    std::vector<FrameMatch> matches; // sorted by gt index
};

struct MatchTrace {
    std::vector<TraceFrame> frames;  // in ascending frame order
    long long gt_boxes = 0, pred_boxes = 0;
};

// Frame-by-frame correspondence in the CLEAR style: a pair that matched last
// time keeps its match while the boxes still overlap enough, and whatever
// remains is assigned fresh by highest IoU.
MatchTrace trace_matches(const TrackSet& pred, const TrackSet& gt, const MetricConfig& cfg) {
    std::set<int> frame_set;
    for (const Track& t : gt)
        for (const auto& [f, b] : t.boxes) frame_set.insert(f);
    for (const Track& t : pred)
        for (const auto& [f, b] : t.boxes) frame_set.insert(f);

    MatchTrace trace;
    std::vector<int> last_match(gt.size(), -1);
    for (int f : frame_set) {
        TraceFrame tf;
        for (int gi = 0; gi < static_cast<int>(gt.size()); ++gi)
            if (gt[gi].boxes.count(f)) tf.gts.push_back(gi);
        for (int pi = 0; pi < static_cast<int>(pred.size()); ++pi)
            if (pred[pi].boxes.count(f)) tf.preds.push_back(pi);
        trace.gt_boxes += static_cast<long long>(tf.gts.size());
        trace.pred_boxes += static_cast<long long>(tf.preds.size());

        std::vector<char> pred_used(pred.size(), 0), gt_done(gt.size(), 0);
        for (int gi : tf.gts) {
            const int pi = last_match[gi];
            if (pi < 0 || pred_used[pi]) continue;
            auto it = pred[pi].boxes.find(f);
            if (it == pred[pi].boxes.end()) continue;
            const double iou = box_iou(gt[gi].boxes.at(f), it->second);
            if (iou >= cfg.box_match_iou) {
                tf.matches.push_back({gi, pi, iou});
                pred_used[pi] = 1;
                gt_done[gi] = 1;
            }
        }

        std::vector<int> pool_g, pool_p;
        for (int gi : tf.gts)
            if (!gt_done[gi]) pool_g.push_back(gi);
        for (int pi : tf.preds)
            if (!pred_used[pi]) pool_p.push_back(pi);
        if (!pool_g.empty() && !pool_p.empty()) {
            const int np = static_cast<int>(pool_p.size());
            std::vector<std::vector<double>> cost(pool_g.size(), std::vector<double>(np));
            std::vector<std::vector<double>> ious(pool_g.size(), std::vector<double>(np));
            for (int r = 0; r < static_cast<int>(pool_g.size()); ++r) {
                for (int c = 0; c < np; ++c) {
                    const double iou =
                        box_iou(gt[pool_g[r]].boxes.at(f), pred[pool_p[c]].boxes.at(f));
                    ious[r][c] = iou;
                    cost[r][c] = iou >= cfg.box_match_iou
                                     ? (1.0 - iou) + kTie * (r * (np + 1) + c)
                                     : kBig;
                }
            }
            const std::vector<int> asg = hungarian(cost);
            for (int r = 0; r < static_cast<int>(asg.size()); ++r) {
                const int c = asg[r];
                if (c >= 0 && ious[r][c] >= cfg.box_match_iou)
                    tf.matches.push_back({pool_g[r], pool_p[c], ious[r][c]});
            }
        }

        std::sort(tf.matches.begin(), tf.matches.end(),
                  [](const FrameMatch& a, const FrameMatch& b) { return a.gt < b.gt; });
        for (const FrameMatch& m : tf.matches) last_match[m.gt] = m.pred;
        trace.frames.push_back(std::move(tf));
    }
    return trace;
}

void finalize_clear(ClearMotResult& r) {
    const double denom = static_cast<double>(std::max<long long>(1, r.gt_boxes));
    r.mota = 1.0 - static_cast<double>(r.fp + r.fn + r.idsw) / denom;
    r.moda = 1.0 - static_cast<double>(r.fp + r.fn) / denom;
    r.smota = 1.0 - (static_cast<double>(r.fp + r.fn + r.idsw) +
                     (static_cast<double>(r.matches) - r.iou_sum)) /
                        denom;
    r.motp = r.matches > 0 ? r.iou_sum / static_cast<double>(r.matches) : 0.0;
}

void finalize_coverage(MtPtMlResult& r) {
    if (r.num_tracks > 0) {
        r.mt_pct = 100.0 * static_cast<double>(r.mt) / static_cast<double>(r.num_tracks);
        r.pt_pct = 100.0 * static_cast<double>(r.pt) / static_cast<double>(r.num_tracks);
        r.ml_pct = 100.0 * static_cast<double>(r.ml) / static_cast<double>(r.num_tracks);
    } else {
        r.mt_pct = r.pt_pct = r.ml_pct = 0.0;
    }
}

// An empty side makes the usual ratios vacuous; report them as perfect only
// when the other side is empty too.
void finalize_id(IdScores& r) {
    const long long total_pred = r.idtp + r.idfp;
    const long long total_gt = r.idtp + r.idfn;
    r.idp = total_pred > 0 ? static_cast<double>(r.idtp) / static_cast<double>(total_pred)
                           : (total_gt == 0 ? 1.0 : 0.0);
    r.idr = total_gt > 0 ? static_cast<double>(r.idtp) / static_cast<double>(total_gt)
                         : (total_pred == 0 ? 1.0 : 0.0);
    r.idf1 = total_gt + total_pred > 0
                 ? 2.0 * static_cast<double>(r.idtp) / static_cast<double>(total_gt + total_pred)
                 : 1.0;
}

struct PooledTrack {
    const Track* t;
    int seq;
};

// Average precision for one class, predictions possibly pooled from several
// sequences. Each prediction, taken in confidence order, counts as a true
// positive exactly when it can enlarge a maximum matching against the ground
// truth tracks, so every prefix of the ranking is matched optimally.
double class_ap(std::vector<PooledTrack> preds, const std::vector<PooledTrack>& gts,
                const MetricConfig& cfg) {
    if (gts.empty() || preds.empty()) return 0.0;
    std::stable_sort(preds.begin(), preds.end(), [](const PooledTrack& a, const PooledTrack& b) {
        return a.t->confidence > b.t->confidence;
    });
    const int np = static_cast<int>(preds.size());
    const int ng = static_cast<int>(gts.size());

    std::vector<std::vector<int>> adj(np);
    for (int i = 0; i < np; ++i)
        for (int j = 0; j < ng; ++j)
            if (preds[i].seq == gts[j].seq &&
                track_iou(*preds[i].t, *gts[j].t) >= cfg.track_iou_threshold)
                adj[i].push_back(j);

    std::vector<int> owner(ng, -1);
    std::vector<char> seen(ng, 0);
    std::function<bool(int)> augment = [&](int p) -> bool {
        for (int g : adj[p]) {
            if (seen[g]) continue;
            seen[g] = 1;
            if (owner[g] < 0 || augment(owner[g])) {
                owner[g] = p;
                return true;
            }
        }
        return false;
    };

    std::vector<double> precision(np), recall(np);
    int matched = 0;
    for (int k = 0; k < np; ++k) {
        std::fill(seen.begin(), seen.end(), 0);
        if (augment(k)) ++matched;
        precision[k] = static_cast<double>(matched) / static_cast<double>(k + 1);
        recall[k] = static_cast<double>(matched) / static_cast<double>(ng);
    }

    // Area under the staircase, using at each recall level the best precision
    // achieved at that recall or beyond.
    double ap = 0.0, best = 0.0;
    for (int k = np - 1; k >= 0; --k) {
        best = std::max(best, precision[k]);
        const double r_prev = k > 0 ? recall[k - 1] : 0.0;
        ap += (recall[k] - r_prev) * best;
    }
    return ap;
}

std::vector<PooledTrack> pooled_of_class(const TrackSet& set, Category cat, int seq) {
    std::vector<PooledTrack> out;
    for (const Track& t : set)
        if (t.category == cat) out.push_back({&t, seq});
    return out;
}

TrackSet filter_class(const TrackSet& set, Category cat) {
    TrackSet out;
    for (const Track& t : set)
        if (t.category == cat) out.push_back(t);
    return out;
}

}  // namespace

TrackApResult track_ap(const TrackSet& pred, const TrackSet& gt, const MetricConfig& config) {
    config.validate();
    TrackApResult result;
    double sum = 0.0;
    int classes = 0;
    for (int c = 0; c < kNumCategories; ++c) {
        const Category cat = static_cast<Category>(c);
        const auto preds = pooled_of_class(pred, cat, 0);
        const auto gts = pooled_of_class(gt, cat, 0);
        result.has_gt[c] = !gts.empty();
        result.ap[c] = class_ap(preds, gts, config);
        if (result.has_gt[c]) {
            sum += result.ap[c];
            ++classes;
        }
    }
    result.mean_ap = classes > 0 ? sum / classes : 0.0;
    return result;
}

ClearMotResult clear_mot(const TrackSet& pred, const TrackSet& gt, const MetricConfig& config) {
    config.validate();
    const MatchTrace trace = trace_matches(pred, gt, config);

    ClearMotResult r;
    r.gt_boxes = trace.gt_boxes;
    r.pred_boxes = trace.pred_boxes;
    for (const TraceFrame& tf : trace.frames) {
        r.matches += static_cast<long long>(tf.matches.size());
        r.fp += static_cast<long long>(tf.preds.size() - tf.matches.size());
        r.fn += static_cast<long long>(tf.gts.size() - tf.matches.size());
        for (const FrameMatch& m : tf.matches) r.iou_sum += m.iou;
    }

    // Walk each ground truth's match history: a change of partner is an
    // identity switch, a resumption of coverage after a hole a fragmentation.
    std::vector<int> last(gt.size(), -1);
    std::vector<char> ever(gt.size(), 0), in_gap(gt.size(), 0);
    for (const TraceFrame& tf : trace.frames) {
        std::vector<int> match_of;
        match_of.assign(gt.size(), -1);
        for (const FrameMatch& m : tf.matches) match_of[m.gt] = m.pred;
        for (int gi : tf.gts) {
            const int pi = match_of[gi];
            if (pi >= 0) {
                if (last[gi] >= 0 && last[gi] != pi) ++r.idsw;
                if (ever[gi] && in_gap[gi]) ++r.frag;
                last[gi] = pi;
                ever[gi] = 1;
                in_gap[gi] = 0;
            } else if (ever[gi]) {
                in_gap[gi] = 1;
            }
        }
    }

    finalize_clear(r);
    return r;
}

MtPtMlResult mt_pt_ml(const TrackSet& pred, const TrackSet& gt, const MetricConfig& config) {
    config.validate();
    const MatchTrace trace = trace_matches(pred, gt, config);

    std::vector<long long> present(gt.size(), 0), covered(gt.size(), 0);
    for (const TraceFrame& tf : trace.frames) {
        for (int gi : tf.gts) ++present[gi];
        for (const FrameMatch& m : tf.matches) ++covered[m.gt];
    }

    MtPtMlResult r;
    for (size_t gi = 0; gi < gt.size(); ++gi) {
        if (present[gi] == 0) continue;
        ++r.num_tracks;
        const double coverage =
            static_cast<double>(covered[gi]) / static_cast<double>(present[gi]);
        if (coverage >= config.mt_threshold)
            ++r.mt;
        else if (coverage <= config.ml_threshold)
            ++r.ml;
        else
            ++r.pt;
    }
    finalize_coverage(r);
    return r;
}

IdScores idf1(const TrackSet& pred, const TrackSet& gt, const MetricConfig& config) {
    config.validate();

    long long total_gt = 0, total_pred = 0;
    for (const Track& t : gt) total_gt += static_cast<long long>(t.boxes.size());
    for (const Track& t : pred) total_pred += static_cast<long long>(t.boxes.size());

    // One global identity assignment: pairing a prediction with a ground
    // truth credits every frame where their boxes overlap enough.
    long long idtp = 0;
    if (!gt.empty() && !pred.empty()) {
        std::vector<std::vector<long long>> overlap(gt.size(),
                                                    std::vector<long long>(pred.size(), 0));
        for (size_t gi = 0; gi < gt.size(); ++gi) {
            for (size_t pi = 0; pi < pred.size(); ++pi) {
                for (const auto& [f, gb] : gt[gi].boxes) {
                    auto it = pred[pi].boxes.find(f);
                    if (it != pred[pi].boxes.end() &&
                        box_iou(gb, it->second) >= config.box_match_iou)
                        ++overlap[gi][pi];
                }
            }
        }
        std::vector<std::vector<double>> cost(gt.size(), std::vector<double>(pred.size()));
        for (size_t gi = 0; gi < gt.size(); ++gi)
            for (size_t pi = 0; pi < pred.size(); ++pi)
                cost[gi][pi] = -static_cast<double>(overlap[gi][pi]);
        const std::vector<int> asg = hungarian(cost);
        for (size_t gi = 0; gi < asg.size(); ++gi)
            if (asg[gi] >= 0) idtp += overlap[gi][asg[gi]];
    }

    IdScores r;
    r.idtp = idtp;
    r.idfp = total_pred - idtp;
    r.idfn = total_gt - idtp;
    finalize_id(r);
    return r;
}

MetricsReport evaluate(const std::vector<SequencePair>& sequences, const MetricConfig& config) {
    config.validate();
    MetricsReport rep;
    double ap_sum = 0.0;
    int ap_classes = 0;

    for (int c = 0; c < kNumCategories; ++c) {
        const Category cat = static_cast<Category>(c);
        ClassReport& cr = rep.per_class[c];

        std::vector<TrackSet> fpred(sequences.size()), fgt(sequences.size());
        std::vector<PooledTrack> ap_preds, ap_gts;
        for (size_t s = 0; s < sequences.size(); ++s) {
            fpred[s] = filter_class(sequences[s].pred, cat);
            fgt[s] = filter_class(sequences[s].gt, cat);
            const int seq = static_cast<int>(s);
            for (const Track& t : fpred[s]) ap_preds.push_back({&t, seq});
            for (const Track& t : fgt[s]) ap_gts.push_back({&t, seq});
            cr.num_gt_tracks += static_cast<long long>(fgt[s].size());
        }

        for (size_t s = 0; s < sequences.size(); ++s) {
            const ClearMotResult cm = clear_mot(fpred[s], fgt[s], config);
            cr.clear.fp += cm.fp;
            cr.clear.fn += cm.fn;
            cr.clear.idsw += cm.idsw;
            cr.clear.frag += cm.frag;
            cr.clear.gt_boxes += cm.gt_boxes;
            cr.clear.pred_boxes += cm.pred_boxes;
            cr.clear.matches += cm.matches;
            cr.clear.iou_sum += cm.iou_sum;

            const MtPtMlResult cov = mt_pt_ml(fpred[s], fgt[s], config);
            cr.coverage.mt += cov.mt;
            cr.coverage.pt += cov.pt;
            cr.coverage.ml += cov.ml;
            cr.coverage.num_tracks += cov.num_tracks;

            const IdScores ids = idf1(fpred[s], fgt[s], config);
            cr.id.idtp += ids.idtp;
            cr.id.idfp += ids.idfp;
            cr.id.idfn += ids.idfn;
        }
        finalize_clear(cr.clear);
        finalize_coverage(cr.coverage);
        finalize_id(cr.id);

        cr.track_ap = class_ap(ap_preds, ap_gts, config);
        rep.class_present[c] = !ap_gts.empty() || !ap_preds.empty();
        if (!ap_gts.empty()) {
            ap_sum += cr.track_ap;
            ++ap_classes;
        }
    }
    rep.mean_ap = ap_classes > 0 ? ap_sum / ap_classes : 0.0;

    ClassReport& all = rep.overall;
    for (int c = 0; c < kNumCategories; ++c) {
        const ClassReport& cr = rep.per_class[c];
        all.num_gt_tracks += cr.num_gt_tracks;
        all.clear.fp += cr.clear.fp;
        all.clear.fn += cr.clear.fn;
        all.clear.idsw += cr.clear.idsw;
        all.clear.frag += cr.clear.frag;
        all.clear.gt_boxes += cr.clear.gt_boxes;
        all.clear.pred_boxes += cr.clear.pred_boxes;
        all.clear.matches += cr.clear.matches;
        all.clear.iou_sum += cr.clear.iou_sum;
        all.coverage.mt += cr.coverage.mt;
        all.coverage.pt += cr.coverage.pt;
        all.coverage.ml += cr.coverage.ml;
        all.coverage.num_tracks += cr.coverage.num_tracks;
        all.id.idtp += cr.id.idtp;
        all.id.idfp += cr.id.idfp;
        all.id.idfn += cr.id.idfn;
    }
    finalize_clear(all.clear);
    finalize_coverage(all.coverage);
    finalize_id(all.id);
    all.track_ap = rep.mean_ap;

    return rep;
}

namespace {

nlohmann::json class_json(const ClassReport& c) {
    nlohmann::json j;
    j["num_gt_tracks"] = c.num_gt_tracks;
    j["track_ap"] = c.track_ap;
    j["mota"] = c.clear.mota;
    j["motp"] = c.clear.motp;
    j["moda"] = c.clear.moda;
    j["smota"] = c.clear.smota;
    j["fp"] = c.clear.fp;
    j["fn"] = c.clear.fn;
    j["idsw"] = c.clear.idsw;
    j["frag"] = c.clear.frag;
    j["gt_boxes"] = c.clear.gt_boxes;
    j["pred_boxes"] = c.clear.pred_boxes;
    j["mt"] = c.coverage.mt;
    j["pt"] = c.coverage.pt;
    j["ml"] = c.coverage.ml;
    j["mt_pct"] = c.coverage.mt_pct;
    j["pt_pct"] = c.coverage.pt_pct;
    j["ml_pct"] = c.coverage.ml_pct;
    j["idf1"] = c.id.idf1;
    j["idp"] = c.id.idp;
    j["idr"] = c.id.idr;
    j["idtp"] = c.id.idtp;
    j["idfp"] = c.id.idfp;
    j["idfn"] = c.id.idfn;
    return j;
}

std::string fixed(double v, int prec) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", prec, v);
    return buf;
}

}  // namespace

std::string report_to_json(const MetricsReport& report) {
    nlohmann::json j;
    j["classes"] = nlohmann::json::object();
    for (int c = 0; c < kNumCategories; ++c)
        if (report.class_present[c])
            j["classes"][to_string(static_cast<Category>(c))] = class_json(report.per_class[c]);
    j["overall"] = class_json(report.overall);
    j["mean_ap"] = report.mean_ap;
    return j.dump(2);
}

std::string report_table(const MetricsReport& report) {
    const std::vector<std::string> header = {"class", "gt", "ap",   "mota", "motp", "moda",
                                             "smota", "fp", "fn",   "idsw", "frag", "mt%",
                                             "pt%",   "ml%", "idf1", "idp",  "idr"};
    std::vector<std::vector<std::string>> rows;
    auto add_row = [&rows](const std::string& name, const ClassReport& c) {
        rows.push_back({name, std::to_string(c.num_gt_tracks), fixed(c.track_ap, 4),
                        fixed(c.clear.mota, 4), fixed(c.clear.motp, 4), fixed(c.clear.moda, 4),
                        fixed(c.clear.smota, 4), std::to_string(c.clear.fp),
                        std::to_string(c.clear.fn), std::to_string(c.clear.idsw),
                        std::to_string(c.clear.frag), fixed(c.coverage.mt_pct, 2),
                        fixed(c.coverage.pt_pct, 2), fixed(c.coverage.ml_pct, 2),
                        fixed(c.id.idf1, 4), fixed(c.id.idp, 4), fixed(c.id.idr, 4)});
    };
    for (int c = 0; c < kNumCategories; ++c)
        if (report.class_present[c])
            add_row(to_string(static_cast<Category>(c)), report.per_class[c]);
    add_row("overall", report.overall);

    std::vector<size_t> width(header.size());
    for (size_t i = 0; i < header.size(); ++i) width[i] = header[i].size();
    for (const auto& row : rows)
        for (size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());

    std::string out;
    auto emit = [&](const std::vector<std::string>& cells) {
        for (size_t i = 0; i < cells.size(); ++i) {
            if (i > 0) out += "  ";
            // Left-align the name column, right-align the numbers.
            const size_t pad = width[i] - cells[i].size();
            if (i == 0) {
                out += cells[i];
                out.append(pad, ' ');
            } else {
                out.append(pad, ' ');
                out += cells[i];
            }
        }
        out += '\n';
    };
    emit(header);
    for (const auto& row : rows) emit(row);
    return out;
}

}  // namespace motkit::metrics
