#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <vector>

#include "olrl/core.hpp"
#include "olrl/segment.hpp"
#include "olrl/tree.hpp"
#include "olrl/zernike.hpp"

namespace olrl {

struct TrackWeights {
    double w0 = 1.0;   // displacement
    double w1 = 1.0;   // shape
    double w2 = 0.5;   // displacement * shape
    double w3 = 0.2;   // permanence (frames unseen)
    double w4 = 0.5;   // size ratio
    double w5 = 0.1;   // motion likelihood
    double t_e = 2.0;  // match threshold
    double eps_motion = 1e-3;
    // Zernike magnitudes are floored here before the log. At 64x64 most
    // components of body-sized masks are raster noise; below this floor the
    // shape term rejects true continuations of moving bodies more often than
    // it separates distinct ones.
    double zern_floor = 1.5;

    void validate() const {
        for (double w : {w0, w1, w2, w3, w4, w5})
            if (w < 0.0) throw ConfigError("tracking weights must be >= 0");
        if (t_e <= 0.0) throw ConfigError("t_e must be > 0");
        if (!(eps_motion > 0.0 && eps_motion < 1.0))
            throw ConfigError("eps_motion must be in (0, 1)");
        if (zern_floor <= 0.0) throw ConfigError("zern_floor must be > 0");
    }
};

using TrackFeatureVec = std::array<double, 6>;

struct TrackFeatures {
    double disp = 0.0;
    double shape = 0.0;
    double disp_shape = 0.0;
    double perm = 0.0;
    double size = 0.0;
    double motion = 0.0;

    TrackFeatureVec values() const { return {disp, shape, disp_shape, perm, size, motion}; }

    double error(const TrackWeights& w) const {
        return w.w0 * disp + w.w1 * shape + w.w2 * disp_shape + w.w3 * perm + w.w4 * size +
               w.w5 * motion;
    }
};

struct TrackletEntry {
    int t = 0;
    SegmentMask seg;
    ZernikeDescriptor zern{};
};

struct Tracklet {
    int id = -1;
    std::vector<TrackletEntry> entries;
    int first_t = -1;
    int last_seen = -1;
    int moves_count = 0;
    int stays_count = 0;
    std::vector<std::pair<TrackFeatureVec, int>> negative_match_log;

    const TrackletEntry& last() const {
        if (entries.empty()) throw UsageError("tracklet has no entries");
        return entries.back();
    }

    void append(int t, SegmentMask seg, ZernikeDescriptor zern) {
        if (!entries.empty()) {
            if (t <= last_seen) throw UsageError("tracklet entries must advance in time");
            if (seg.median == entries.back().seg.median)
                ++stays_count;
            else
                ++moves_count;
        } else {
            first_t = t;
        }
        entries.push_back({t, std::move(seg), zern});
        last_seen = t;
    }

    // Entry index at exactly time t, or -1.
    int entry_at(int t) const {
        auto it = std::lower_bound(entries.begin(), entries.end(), t,
                                   [](const TrackletEntry& e, int tt) { return e.t < tt; });
        if (it == entries.end() || it->t != t) return -1;
        return int(it - entries.begin());
    }
};

namespace detail {

inline double median_distance(const SegmentMask& a, const SegmentMask& b) {
    return (a.median - b.median).norm();
}

// Beta(1,1) posterior predictive of the observed moved/stayed outcome.
inline double motion_probability(bool moved, int moves, int stays) {
    double denom = double(moves + stays + 2);
    return moved ? (moves + 1) / denom : (stays + 1) / denom;
}

struct TrackSide {
    const TrackletEntry* prev;
    int last_seen;
    int moves;
    int stays;
};

inline TrackFeatures features_impl(const TrackSide& l, const SegmentMask& seg,
                                   const ZernikeDescriptor& seg_z, int t_now,
                                   const TrackWeights& w,
                                   const std::vector<const SegmentMask*>& neighbors) {
    TrackFeatures f;
    double diag = std::hypot(double(seg.mask.width()), double(seg.mask.height()));
    for (const SegmentMask* n : neighbors) {
        if (n == &seg) continue;
        f.disp += std::abs(median_distance(seg, *n) - median_distance(l.prev->seg, *n)) / diag;
    }
    for (int i = 0; i < kZernikeCount; ++i) {
        f.shape += std::abs(std::log(std::max(l.prev->zern[size_t(i)], w.zern_floor)) -
                            std::log(std::max(seg_z[size_t(i)], w.zern_floor)));
    }
    f.disp_shape = f.disp * f.shape;
    f.perm = double(t_now - l.last_seen - 1);
    double a = double(l.prev->seg.pixel_count), b = double(seg.pixel_count);
    f.size = std::max(a / b, b / a) - 1.0;
    bool moved = !(seg.median == l.prev->seg.median);
    f.motion = -std::log(std::max(motion_probability(moved, l.moves, l.stays), w.eps_motion));
    return f;
}

}  // namespace detail

// The six-feature ensemble comparing a tracklet's latest entry against a
// candidate segment at t_now. Neighbor segments anchor the relative
// displacement term; distances are measured between segment medians and
// normalized by the frame diagonal.
inline TrackFeatures tracking_features(const Tracklet& tracklet, const SegmentMask& seg,
                                       const ZernikeDescriptor& seg_z, int t_now,
                                       const TrackWeights& weights,
                                       const std::vector<const SegmentMask*>& neighbors) {
    if (tracklet.entries.empty()) throw UsageError("tracking_features on empty tracklet");
    detail::TrackSide side{&tracklet.last(), tracklet.last_seen, tracklet.moves_count,
                           tracklet.stays_count};
    return detail::features_impl(side, seg, seg_z, t_now, weights, neighbors);
}

inline double tracking_error(const Tracklet& tracklet, const SegmentMask& seg, int t_now,
                             const TrackWeights& weights,
                             const std::vector<SegmentMask>& neighbors) {
    std::vector<const SegmentMask*> ptrs;
    ptrs.reserve(neighbors.size());
    for (const SegmentMask& n : neighbors) ptrs.push_back(&n);
    return tracking_features(tracklet, seg, zernike_descriptor(seg), t_now, weights, ptrs)
        .error(weights);
}

// Per-tracklet learned refinement: predicts 1 - P(same object) from the six
// ensemble features.
struct TrackClassifier {
    std::optional<DecisionTree> tree;

    // 1 - P(same object).
    double score(const TrackFeatureVec& f) const {
        if (!tree) return 0.5;
        return tree->predict_dist(std::vector<double>(f.begin(), f.end()))[1];
    }

    // Same prediction on the error scale used by match: -log P(same).
    double error_score(const TrackFeatureVec& f) const {
        return -std::log(std::max(1.0 - score(f), 1e-6));
    }
};

// Trains the per-tracklet classifier on logged negatives (label 1) plus
// positives promoted by accepted merges (label 0). Negatives that exactly
// repeat a promoted feature vector are dropped as superseded. Stays constant
// until both classes are represented: a tree fit on mismatches alone would
// brand every candidate — including true continuations — as different.
inline TrackClassifier fit_track_classifier(const Tracklet& tracklet,
                                            const std::vector<TrackFeatureVec>& promoted) {
    Dataset d(6);
    for (const TrackFeatureVec& f : promoted) d.add_row(f, 0.0);
    size_t negatives = 0;
    for (const auto& [f, label] : tracklet.negative_match_log) {
        bool superseded = false;
        for (const TrackFeatureVec& p : promoted) {
            if (p == f) {
                superseded = true;
                break;
            }
        }
        if (!superseded) {
            d.add_row(f, double(label));
            ++negatives;
        }
    }
    if (d.rows() < 10 || promoted.empty() || negatives == 0) return {};
    TrackClassifier c;
    c.tree = DecisionTree::fit_classifier(d, 2, depth_for_rows(d.rows()), 5);
    return c;
}

// Greedy assignment over an error matrix: repeatedly accept the globally
// lowest error <= t_e, ties broken by (lower row, lower column), removing
// both parties. Returns (row, col) pairs.
inline std::vector<std::pair<int, int>> greedy_assign(const std::vector<std::vector<double>>& err,
                                                      double t_e) {
    struct Cell {
        double e;
        int r;
        int c;
    };
    std::vector<Cell> cells;
    for (int r = 0; r < int(err.size()); ++r)
        for (int c = 0; c < int(err[size_t(r)].size()); ++c) {
            double e = err[size_t(r)][size_t(c)];
            if (e <= t_e) cells.push_back({e, r, c});
        }
    std::sort(cells.begin(), cells.end(), [](const Cell& a, const Cell& b) {
        if (a.e != b.e) return a.e < b.e;
        if (a.r != b.r) return a.r < b.r;
        return a.c < b.c;
    });
    size_t max_cols = 0;
    for (const auto& row : err) max_cols = std::max(max_cols, row.size());
    std::vector<char> row_used(err.size(), 0);
    std::vector<char> col_used(max_cols, 0);
    std::vector<std::pair<int, int>> out;
    for (const Cell& cell : cells) {
        if (row_used[size_t(cell.r)] || col_used[size_t(cell.c)]) continue;
        row_used[size_t(cell.r)] = 1;
        col_used[size_t(cell.c)] = 1;
        out.emplace_back(cell.r, cell.c);
    }
    return out;
}

struct MatchResult {
    std::vector<std::pair<int, int>> assignments;  // (tracklet id, segment index)
    std::vector<int> new_tracklet_ids;
};

// One data-association step: scores every live tracklet against every
// segment, greedily assigns below threshold, appends matches, spawns new
// tracklets for unmatched segments, and logs non-assigned candidate pairs
// as negatives for the learned refinement.
inline MatchResult match(std::vector<Tracklet>& tracklets,
                         const std::vector<SegmentMask>& segments, int t_now,
                         const TrackWeights& weights,
                         const std::map<int, TrackClassifier>* learned = nullptr) {
    weights.validate();
    std::vector<ZernikeDescriptor> seg_z(segments.size());
    std::vector<const SegmentMask*> all_segs(segments.size());
    for (size_t j = 0; j < segments.size(); ++j) {
        seg_z[j] = zernike_descriptor(segments[j]);
        all_segs[j] = &segments[j];
    }

    // Candidate tracklets: anything whose permanence cost alone cannot
    // already exceed the threshold.
    std::vector<int> cand;
    for (int i = 0; i < int(tracklets.size()); ++i) {
        const Tracklet& l = tracklets[size_t(i)];
        if (l.entries.empty()) continue;
        if (l.last_seen >= t_now) throw UsageError("match called with non-advancing t_now");
        double perm = double(t_now - l.last_seen - 1);
        if (weights.w3 * perm > weights.t_e) continue;
        cand.push_back(i);
    }

    std::vector<std::vector<double>> err(cand.size(),
                                         std::vector<double>(segments.size(), 0.0));
    std::vector<std::vector<TrackFeatureVec>> feats(
        cand.size(), std::vector<TrackFeatureVec>(segments.size()));
    for (size_t r = 0; r < cand.size(); ++r) {
        Tracklet& l = tracklets[size_t(cand[r])];
        const TrackClassifier* cls = nullptr;
        if (learned) {
            auto it = learned->find(l.id);
            if (it != learned->end()) cls = &it->second;
        }
        for (size_t j = 0; j < segments.size(); ++j) {
            std::vector<const SegmentMask*> neighbors;
            neighbors.reserve(segments.size() - 1);
            for (size_t k = 0; k < segments.size(); ++k)
                if (k != j) neighbors.push_back(all_segs[k]);
            TrackFeatures f =
                tracking_features(l, segments[j], seg_z[j], t_now, weights, neighbors);
            feats[r][j] = f.values();
            double e = f.error(weights);
            if (cls) e = std::max(e, cls->error_score(feats[r][j]));
            err[r][j] = e;
        }
    }

    auto pairs = greedy_assign(err, weights.t_e);
    std::vector<char> seg_taken(segments.size(), 0);
    std::vector<int> assigned_col(cand.size(), -1);
    MatchResult res;
    for (auto [r, j] : pairs) {
        Tracklet& l = tracklets[size_t(cand[size_t(r)])];
        l.append(t_now, segments[size_t(j)], seg_z[size_t(j)]);
        res.assignments.emplace_back(l.id, j);
        seg_taken[size_t(j)] = 1;
        assigned_col[size_t(r)] = j;
    }
    // Everything scored but not assigned is a negative example.
    for (size_t r = 0; r < cand.size(); ++r) {
        Tracklet& l = tracklets[size_t(cand[r])];
        for (size_t j = 0; j < segments.size(); ++j)
            if (int(j) != assigned_col[r]) l.negative_match_log.emplace_back(feats[r][j], 1);
    }
    int next_id = 0;
    for (const Tracklet& l : tracklets) next_id = std::max(next_id, l.id + 1);
    for (size_t j = 0; j < segments.size(); ++j) {
        if (seg_taken[j]) continue;
        Tracklet l;
        l.id = next_id++;
        l.append(t_now, segments[j], seg_z[j]);
        res.new_tracklet_ids.push_back(l.id);
        tracklets.push_back(std::move(l));
    }
    return res;
}

struct TrackerConfig {
    double seg_scale = 1000.0;
    double seg_sigma = 0.0;
    int seg_min_size = 10;
    TrackWeights weights;

    void validate() const {
        if (seg_scale <= 0.0) throw ConfigError("seg_scale must be > 0");
        if (seg_sigma < 0.0) throw ConfigError("seg_sigma must be >= 0");
        if (seg_min_size < 1) throw ConfigError("seg_min_size must be >= 1");
        weights.validate();
    }
};

// Online tracker: segments each frame, associates segments with live
// tracklets, and maintains per-tracklet match classifiers refined by
// merge-promoted positives.
class Tracker {
  public:
    explicit Tracker(TrackerConfig cfg = {}) : cfg_(cfg) { cfg_.validate(); }

    // Processes the frame at time t; returns the tracklet id owning each
    // segment, in segment order.
    std::vector<int> observe(const Frame& frame, int t) {
        std::vector<SegmentMask> segs =
            segment(frame, cfg_.seg_scale, cfg_.seg_sigma, cfg_.seg_min_size);
        MatchResult res = match(tracklets_, segs, t, cfg_.weights, &classifiers_);
        std::vector<int> owner(segs.size(), -1);
        for (auto [id, j] : res.assignments) owner[size_t(j)] = id;
        size_t next_new = 0;
        for (size_t j = 0; j < segs.size(); ++j)
            if (owner[j] < 0) owner[j] = res.new_tracklet_ids[next_new++];
        return owner;
    }

    // Records an accepted merge (earlier ends before later begins) as a
    // positive example for the earlier tracklet's classifier: the feature
    // vector of the handoff, evaluated against the segments present at the
    // later tracklet's first frame.
    TrackFeatureVec promote_pair(int earlier_id, int later_id) {
        const Tracklet& a = tracklet(earlier_id);
        const Tracklet& b = tracklet(later_id);
        if (a.last_seen >= b.first_t) throw UsageError("promote_pair: tracklets overlap in time");
        std::vector<const SegmentMask*> neighbors;
        for (const Tracklet& l : tracklets_) {
            if (l.id == later_id) continue;
            int k = l.entry_at(b.first_t);
            if (k >= 0) neighbors.push_back(&l.entries[size_t(k)].seg);
        }
        detail::TrackSide side{&a.last(), a.last_seen, a.moves_count, a.stays_count};
        TrackFeatures f = detail::features_impl(side, b.entries.front().seg,
                                                b.entries.front().zern, b.first_t, cfg_.weights,
                                                neighbors);
        promoted_[earlier_id].push_back(f.values());
        return f.values();
    }

    void refit_classifiers() {
        classifiers_.clear();
        for (const Tracklet& l : tracklets_) {
            auto it = promoted_.find(l.id);
            static const std::vector<TrackFeatureVec> kNone;
            TrackClassifier c =
                fit_track_classifier(l, it == promoted_.end() ? kNone : it->second);
            if (c.tree) classifiers_[l.id] = std::move(c);
        }
    }

    const std::vector<Tracklet>& tracklets() const { return tracklets_; }
    const Tracklet& tracklet(int id) const {
        for (const Tracklet& l : tracklets_)
            if (l.id == id) return l;
        throw UsageError("unknown tracklet id");
    }
    const TrackerConfig& config() const { return cfg_; }
    const std::map<int, TrackClassifier>& classifiers() const { return classifiers_; }
    const std::map<int, std::vector<TrackFeatureVec>>& promoted() const { return promoted_; }

  private:
    TrackerConfig cfg_;
    std::vector<Tracklet> tracklets_;
    std::map<int, TrackClassifier> classifiers_;
    std::map<int, std::vector<TrackFeatureVec>> promoted_;
};

}  // namespace olrl
