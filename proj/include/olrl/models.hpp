#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "olrl/core.hpp"
#include "olrl/objstate.hpp"
#include "olrl/tree.hpp"

namespace olrl {

// The discrete velocity support shared by dynamics models and the state
// extractor's clamp.
struct VelocityGrid {
    std::vector<int> values;

    static VelocityGrid standard() {
        VelocityGrid g;
        for (int v = -30; v <= 30; ++v) g.values.push_back(v);
        return g;
    }

    void validate() const {
        if (values.empty()) throw ConfigError("velocity grid must be nonempty");
        for (size_t i = 1; i < values.size(); ++i)
            if (values[i] <= values[i - 1])
                throw ConfigError("velocity grid must be strictly increasing");
        if (!std::binary_search(values.begin(), values.end(), 0))
            throw ConfigError("velocity grid must contain 0");
    }

    int size() const { return int(values.size()); }
    double value(int bin) const { return double(values[size_t(bin)]); }

    // Clamp to the support, then nearest bin; lower bin wins ties.
    int bin_of(double v) const {
        if (v <= values.front()) return 0;
        if (v >= values.back()) return size() - 1;
        auto it = std::lower_bound(values.begin(), values.end(), v);
        int hi = int(it - values.begin());
        int lo = hi - 1;
        if (values[size_t(hi)] == v) return hi;
        double d_lo = v - values[size_t(lo)], d_hi = values[size_t(hi)] - v;
        return d_lo <= d_hi ? lo : hi;
    }
};

namespace detail {

// Dynamics feature vector for track k: own kinematics (missing velocity /
// acceleration zero-filled), the action one-hot, relative position to the
// nearest present other track (zero when alone), and contact flags with
// every other track in ascending id order.
inline std::vector<double> dynamics_features(const ObjectState& s, Action a, int k,
                                             int n_tracks) {
    std::vector<double> f;
    f.reserve(size_t(13 + n_tracks - 1));
    Vec2 p = s.pos_of(k);
    Vec2 v = s.has_vel[size_t(k)] ? s.vel[size_t(k)] : Vec2{};
    Vec2 acc = s.has_acc[size_t(k)] ? s.acc[size_t(k)] : Vec2{};
    f.insert(f.end(), {p.x, p.y, v.x, v.y, acc.x, acc.y});
    for (int i = 0; i < kNumActions; ++i) f.push_back(i == int(a) ? 1.0 : 0.0);
    int nearest = -1;
    double best = 0.0;
    for (int j = 0; j < n_tracks; ++j) {
        if (j == k || !s.present[size_t(j)]) continue;
        double d = (s.pos[size_t(j)] - p).norm();
        if (nearest < 0 || d < best) {
            nearest = j;
            best = d;
        }
    }
    if (nearest >= 0) {
        f.push_back(s.pos[size_t(nearest)].x - p.x);
        f.push_back(s.pos[size_t(nearest)].y - p.y);
    } else {
        f.push_back(0.0);
        f.push_back(0.0);
    }
    for (int j = 0; j < n_tracks; ++j) {
        if (j == k) continue;
        bool c = s.present[size_t(j)] && s.contact_at(std::min(j, k), std::max(j, k));
        f.push_back(c ? 1.0 : 0.0);
    }
    return f;
}

inline double expected_abs_error(const std::vector<double>& dist, int target_bin,
                                 const VelocityGrid& grid) {
    double e = 0.0;
    double target = grid.value(target_bin);
    for (size_t b = 0; b < dist.size(); ++b) e += dist[b] * std::abs(grid.value(int(b)) - target);
    return e;
}

// Seeded shuffled index split: first `train` indices train, rest validate.
inline std::vector<int> shuffled_indices(int n, Rng& rng) {
    std::vector<int> idx(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) idx[size_t(i)] = i;
    for (int i = n - 1; i > 0; --i)
        std::swap(idx[size_t(i)], idx[size_t(rng.uniform_int(i + 1))]);
    return idx;
}

}  // namespace detail

// One probabilistic velocity predictor for a (track, dimension) slot:
// either a decision tree over velocity bins or its marginal fallback,
// chosen by validation expected absolute error.
struct TrackDimModel {
    std::optional<DecisionTree> tree;  // engaged only when it beat the marginal
    std::vector<double> marginal;      // empirical train distribution over bins
    double val_tree = 0.0;             // validation expected abs errors
    double val_marginal = 0.0;
    int rows = 0;

    const std::vector<double>& predict(const std::vector<double>& features) const {
        if (tree) return tree->predict_dist(features);
        return marginal;
    }
};

struct DynamicsModel {
    int n_tracks = 0;
    VelocityGrid grid;
    std::vector<TrackDimModel> models;  // index = track * 2 + dim

    const TrackDimModel& at(int track, int dim) const {
        return models[size_t(track) * 2 + size_t(dim)];
    }

    void check_state(const ObjectState& s) const {
        if (s.n_tracks < n_tracks)
            throw UsageError("state has fewer tracks than the dynamics model");
    }

    std::vector<double> features(const ObjectState& s, Action a, int k) const {
        check_state(s);
        return detail::dynamics_features(s, a, k, n_tracks);
    }

    // Distributions over grid bins for both dimensions of one track.
    std::array<std::vector<double>, 2> predict(const ObjectState& s, Action a, int k) const {
        std::vector<double> f = features(s, a, k);
        return {at(k, 0).predict(f), at(k, 1).predict(f)};
    }
};

// Per (track, dim): gather (features, next-velocity-bin) rows, split 80:20
// by seeded shuffle, fit a depth-limited tree and the marginal distribution,
// keep the tree only when it strictly beats the marginal's validation
// expected absolute error.
inline DynamicsModel fit_dynamics(const ExperienceSet& set, const VelocityGrid& grid,
                                  uint64_t split_seed) {
    grid.validate();
    DynamicsModel model;
    model.n_tracks = set.n_tracks;
    model.grid = grid;
    model.models.resize(size_t(set.n_tracks) * 2);
    int k_bins = grid.size();
    for (int k = 0; k < set.n_tracks; ++k) {
        // Rows are shared between the two dimensions; targets differ. One
        // row per member-tracklet label (see VelLabel): a track holding two
        // live tracklets contributes two labels behind the same features.
        // The track-level velocity feature must itself be defined, so rows
        // at a track's first appearance are skipped rather than entering
        // with zero-filled features and an arbitrary label.
        std::vector<std::vector<double>> feats;
        std::vector<std::array<int, 2>> targets;
        for (const Experience& x : set.items) {
            if (!x.state->present[size_t(k)] || !x.state->has_vel[size_t(k)]) continue;
            bool built = false;
            std::vector<double> f;
            for (const VelLabel& lb : x.vel_labels) {
                if (lb.track != k) continue;
                if (!built) {
                    f = detail::dynamics_features(*x.state, x.action, k, set.n_tracks);
                    built = true;
                }
                feats.push_back(f);
                targets.push_back({grid.bin_of(lb.v_next.x), grid.bin_of(lb.v_next.y)});
            }
        }
        int n = int(feats.size());
        for (int d = 0; d < 2; ++d) {
            TrackDimModel& m = model.models[size_t(k) * 2 + size_t(d)];
            m.rows = n;
            m.marginal.assign(size_t(k_bins), 0.0);
            if (n == 0) {
                m.marginal[size_t(grid.bin_of(0.0))] = 1.0;
                continue;
            }
            std::vector<int> counts(size_t(k_bins), 0);
            for (const auto& t : targets) ++counts[size_t(t[size_t(d)])];
            for (int b = 0; b < k_bins; ++b) m.marginal[size_t(b)] = double(counts[size_t(b)]) / n;
            if (n < 2) continue;
            Rng rng(mix_seed({split_seed, uint64_t(k), uint64_t(d)}));
            std::vector<int> idx = detail::shuffled_indices(n, rng);
            int train_n = (4 * n) / 5;
            if (train_n == 0 || train_n == n) continue;
            Dataset train(int(feats.front().size()));
            std::vector<int> train_counts(size_t(k_bins), 0);
            for (int i = 0; i < train_n; ++i) {
                int r = idx[size_t(i)];
                train.add_row(feats[size_t(r)], double(targets[size_t(r)][size_t(d)]));
                ++train_counts[size_t(targets[size_t(r)][size_t(d)])];
            }
            std::vector<double> train_marginal(size_t(k_bins), 0.0);
            for (int b = 0; b < k_bins; ++b)
                train_marginal[size_t(b)] = double(train_counts[size_t(b)]) / train_n;
            // Smoothing mass of 1 spread over the whole grid: with 61 velocity
            // bins, per-bin Laplace alpha = 1 would hand every leaf a nearly
            // uniform tail whose expected absolute error (~13 px) buries the
            // signal; a total prior of one pseudo-count keeps distributions
            // proper without drowning confident leaves.
            DecisionTree tree = DecisionTree::fit_classifier(
                train, k_bins, depth_for_rows(train_n), 5, 1.0 / k_bins);
            double err_tree = 0.0, err_marginal = 0.0;
            int val_n = n - train_n;
            for (int i = train_n; i < n; ++i) {
                int r = idx[size_t(i)];
                int target = targets[size_t(r)][size_t(d)];
                err_tree += detail::expected_abs_error(tree.predict_dist(feats[size_t(r)]),
                                                       target, grid);
                err_marginal += detail::expected_abs_error(train_marginal, target, grid);
            }
            m.val_tree = err_tree / val_n;
            m.val_marginal = err_marginal / val_n;
            if (m.val_tree < m.val_marginal) m.tree = std::move(tree);
        }
    }
    return model;
}

// Presence classifier + reappearance position model per track.
struct PresenceAppearance {
    static constexpr int kGridCells = 8;  // per axis

    struct TrackModel {
        bool always_present = false;
        std::optional<DecisionTree> tree;  // binary: predicts present at t+1
        std::vector<double> appear;        // Laplace categorical over grid cells
    };

    int n_tracks = 0;
    int frame_h = 0;
    int frame_w = 0;
    std::vector<TrackModel> tracks;

    static std::vector<double> presence_features(const ObjectState& s, Action a, int k) {
        std::vector<double> f;
        f.reserve(11);
        bool present = s.present[size_t(k)] != 0;
        f.push_back(present ? 1.0 : 0.0);
        f.push_back(present ? s.pos[size_t(k)].x : -1.0);
        f.push_back(present ? s.pos[size_t(k)].y : -1.0);
        bool hv = s.has_vel[size_t(k)] != 0;
        f.push_back(hv ? s.vel[size_t(k)].x : 0.0);
        f.push_back(hv ? s.vel[size_t(k)].y : 0.0);
        f.push_back(hv ? 1.0 : 0.0);
        for (int i = 0; i < kNumActions; ++i) f.push_back(i == int(a) ? 1.0 : 0.0);
        return f;
    }

    int cell_of(Vec2 p) const {
        int cx = std::clamp(int(p.x * kGridCells / frame_w), 0, kGridCells - 1);
        int cy = std::clamp(int(p.y * kGridCells / frame_h), 0, kGridCells - 1);
        return cy * kGridCells + cx;
    }

    Vec2 cell_center(int cell) const {
        int cx = cell % kGridCells, cy = cell / kGridCells;
        return {(cx + 0.5) * frame_w / kGridCells - 0.5, (cy + 0.5) * frame_h / kGridCells - 0.5};
    }

    double present_probability(const ObjectState& s, Action a, int k) const {
        const TrackModel& m = tracks[size_t(k)];
        if (m.always_present) return 1.0;
        return m.tree->predict_dist(presence_features(s, a, k))[1];
    }
};

inline PresenceAppearance fit_presence_and_appearance(const ExperienceSet& set, int frame_h,
                                                      int frame_w) {
    if (set.items.empty()) throw UsageError("fit_presence_and_appearance: no experiences");
    PresenceAppearance pa;
    pa.n_tracks = set.n_tracks;
    pa.frame_h = frame_h;
    pa.frame_w = frame_w;
    pa.tracks.resize(size_t(set.n_tracks));
    constexpr int kCells = PresenceAppearance::kGridCells * PresenceAppearance::kGridCells;
    for (int k = 0; k < set.n_tracks; ++k) {
        PresenceAppearance::TrackModel& m = pa.tracks[size_t(k)];
        bool ever_absent = false;
        for (const Experience& x : set.items)
            ever_absent = ever_absent || !x.state->present[size_t(k)] ||
                          !x.next->present[size_t(k)];
        std::vector<double> appear_counts(size_t(kCells), 0.0);
        double appear_n = 0.0;
        for (const Experience& x : set.items) {
            if (!x.state->present[size_t(k)] && x.next->present[size_t(k)]) {
                appear_counts[size_t(pa.cell_of(x.next->pos[size_t(k)]))] += 1.0;
                appear_n += 1.0;
            }
        }
        m.appear.resize(size_t(kCells));
        for (int c = 0; c < kCells; ++c)
            m.appear[size_t(c)] = (appear_counts[size_t(c)] + 1.0) / (appear_n + kCells);
        if (!ever_absent) {
            m.always_present = true;
            continue;
        }
        Dataset d(11);
        for (const Experience& x : set.items)
            d.add_row(PresenceAppearance::presence_features(*x.state, x.action, k),
                      x.next->present[size_t(k)] ? 1.0 : 0.0);
        m.tree = DecisionTree::fit_classifier(d, 2, depth_for_rows(int(d.rows())));
    }
    return pa;
}

// ---------------------------------------------------------------------------
// Pairwise contact-centric reward / value models.

enum class PairTarget { reward, value };

namespace detail {

// 19 features for pair (i, j), i < j: relative kinematics, both tracks'
// absolute kinematics, and the action index. Missing velocity/acceleration
// zero-filled (contact rows guarantee both positions).
inline std::vector<double> pair_features(const ObjectState& s, Action a, int i, int j) {
    auto vel = [&](int k) { return s.has_vel[size_t(k)] ? s.vel[size_t(k)] : Vec2{}; };
    auto acc = [&](int k) { return s.has_acc[size_t(k)] ? s.acc[size_t(k)] : Vec2{}; };
    Vec2 pi = s.pos_of(i), pj = s.pos_of(j);
    Vec2 vi = vel(i), vj = vel(j), ai = acc(i), aj = acc(j);
    return {pj.x - pi.x, pj.y - pi.y, vj.x - vi.x, vj.y - vi.y, aj.x - ai.x, aj.y - ai.y,
            pi.x,        pi.y,        vi.x,        vi.y,        ai.x,        ai.y,
            pj.x,        pj.y,        vj.x,        vj.y,        aj.x,        aj.y,
            double(int(a))};
}

}  // namespace detail

struct PairModel {
    bool fitted = false;               // pair had contact rows
    std::optional<DecisionTree> tree;  // engaged when it beat the train mean
    double mean = 0.0;
    double val_tree = 0.0;  // validation MSEs
    double val_mean = 0.0;
    int rows = 0;

    double predict(const std::vector<double>& features) const {
        if (tree) return tree->predict(features);
        return mean;
    }
};

struct PairwiseModel {
    PairTarget target = PairTarget::reward;
    int n_tracks = 0;
    std::vector<PairModel> pairs;       // pair-indexed over i < j
    double no_contact_fallback = 0.0;   // mean target over zero-contact steps

    const PairModel& at(int i, int j) const { return pairs[pair_index(i, j, n_tracks)]; }

    void check_state(const ObjectState& s) const {
        if (s.n_tracks < n_tracks)
            throw UsageError("state has fewer tracks than the pairwise model");
    }

    // Mean prediction over contacting pairs that have a model; the
    // no-contact fallback when there are none.
    double predict(const ObjectState& s, Action a) const {
        check_state(s);
        double sum = 0.0;
        int n = 0;
        for (int i = 0; i < n_tracks; ++i) {
            if (!s.present[size_t(i)]) continue;
            for (int j = i + 1; j < n_tracks; ++j) {
                if (!s.present[size_t(j)] || !s.contact_at(i, j)) continue;
                const PairModel& m = at(i, j);
                if (!m.fitted) continue;
                sum += m.predict(detail::pair_features(s, a, i, j));
                ++n;
            }
        }
        if (n == 0) return no_contact_fallback;
        return sum / n;
    }
};

// Per contacting pair: depth-6 regression tree vs train-mean fallback on a
// seeded 3:1 split, kept only when strictly better on validation MSE.
inline PairwiseModel fit_pairwise(const ExperienceSet& set, PairTarget target,
                                  uint64_t split_seed) {
    if (set.items.empty()) throw UsageError("fit_pairwise: no experiences");
    PairwiseModel model;
    model.target = target;
    model.n_tracks = set.n_tracks;
    model.pairs.resize(num_pairs(set.n_tracks));
    auto target_of = [&](const Experience& x) {
        return target == PairTarget::reward ? x.reward : x.ret;
    };

    double nc_sum = 0.0, all_sum = 0.0;
    int nc_n = 0;
    for (const Experience& x : set.items) {
        bool any = false;
        for (char c : x.state->contact) any = any || c != 0;
        all_sum += target_of(x);
        if (!any) {
            nc_sum += target_of(x);
            ++nc_n;
        }
    }
    model.no_contact_fallback =
        nc_n > 0 ? nc_sum / nc_n : all_sum / double(set.items.size());

    for (int i = 0; i < set.n_tracks; ++i) {
        for (int j = i + 1; j < set.n_tracks; ++j) {
            PairModel& m = model.pairs[pair_index(i, j, set.n_tracks)];
            std::vector<std::vector<double>> feats;
            std::vector<double> ys;
            for (const Experience& x : set.items) {
                if (!x.state->pair_present(i, j) || !x.state->contact_at(i, j)) continue;
                feats.push_back(detail::pair_features(*x.state, x.action, i, j));
                ys.push_back(target_of(x));
            }
            int n = int(feats.size());
            if (n == 0) continue;  // pair never in contact: no model
            m.fitted = true;
            m.rows = n;
            m.mean = 0.0;
            for (double y : ys) m.mean += y / n;
            if (n < 2) continue;
            Rng rng(mix_seed({split_seed, uint64_t(i), uint64_t(j)}));
            std::vector<int> idx = detail::shuffled_indices(n, rng);
            int train_n = (3 * n) / 4;
            if (train_n == 0 || train_n == n) continue;
            Dataset train(19);
            double train_mean = 0.0;
            for (int r = 0; r < train_n; ++r) {
                train.add_row(feats[size_t(idx[size_t(r)])], ys[size_t(idx[size_t(r)])]);
                train_mean += ys[size_t(idx[size_t(r)])] / train_n;
            }
            DecisionTree tree = DecisionTree::fit_regressor(train, 6);
            double mse_tree = 0.0, mse_mean = 0.0;
            int val_n = n - train_n;
            for (int r = train_n; r < n; ++r) {
                double y = ys[size_t(idx[size_t(r)])];
                mse_tree += sqr(tree.predict(feats[size_t(idx[size_t(r)])]) - y);
                mse_mean += sqr(train_mean - y);
            }
            m.val_tree = mse_tree / val_n;
            m.val_mean = mse_mean / val_n;
            if (m.val_tree < m.val_mean) {
                m.tree = std::move(tree);
                m.mean = train_mean;
            }
        }
    }
    return model;
}

// ---------------------------------------------------------------------------
// Sampled forward model for planning.

// A track's point cloud during planning: the last observed mask translated
// by the displacement accumulated over sampled transitions.
struct PlanCloud {
    const BitMask* base = nullptr;
    Vec2i offset{0, 0};

    BitMask materialize() const { return base->shifted(offset.x, offset.y); }
};

struct PlanState {
    ObjectState s;
    std::vector<PlanCloud> clouds;  // aligned with s's tracks
};

// Planning start state over the model universe: restricts an extracted
// state (which may carry extra, newer tracks) to the first n_tracks and
// attaches each present track's current point cloud.
inline PlanState make_plan_state(const ObjectState& full,
                                 const std::vector<TrackObservation>& obs, int n_tracks) {
    if (full.n_tracks < n_tracks || int(obs.size()) < n_tracks)
        throw UsageError("make_plan_state: fewer tracks than the model universe");
    PlanState p;
    p.s.t = full.t;
    p.s.n_tracks = n_tracks;
    auto take = [&](auto& dst, const auto& src) { dst.assign(src.begin(), src.begin() + n_tracks); };
    take(p.s.present, full.present);
    take(p.s.has_vel, full.has_vel);
    take(p.s.has_acc, full.has_acc);
    take(p.s.pos, full.pos);
    take(p.s.vel, full.vel);
    take(p.s.acc, full.acc);
    p.s.contact.assign(num_pairs(n_tracks), 0);
    for (int i = 0; i < n_tracks; ++i)
        for (int j = i + 1; j < n_tracks; ++j)
            if (full.pair_present(i, j) && full.contact_at(i, j))
                p.s.contact[pair_index(i, j, n_tracks)] = 1;
    p.clouds.resize(size_t(n_tracks));
    for (int k = 0; k < n_tracks; ++k) {
        if (!p.s.present[size_t(k)]) continue;
        if (!obs[size_t(k)].present)
            throw UsageError("make_plan_state: present track without an observed cloud");
        p.clouds[size_t(k)].base = &obs[size_t(k)].mask;
    }
    return p;
}

// One sampled step: per present track draw presence at t+1, then a velocity
// bin per dimension, advance the position and cloud by the sampled
// velocity, and recompute contacts from the translated clouds. Absent
// tracks may reappear at a position drawn from the appearance model.
// Draw order is fixed (ascending track; presence, cell, vx, vy) so a seeded
// rng reproduces the trajectory exactly.
inline PlanState sample_transition(const DynamicsModel& dyn, const PresenceAppearance& pa,
                                   const PlanState& cur, Action a, Rng& rng,
                                   const StateParams& params = {}) {
    dyn.check_state(cur.s);
    if (pa.n_tracks != dyn.n_tracks)
        throw UsageError("sample_transition: presence/dynamics track universes differ");
    int k_tracks = dyn.n_tracks;
    PlanState next;
    next.s.t = cur.s.t + 1;
    next.s.n_tracks = k_tracks;
    next.s.present.assign(size_t(k_tracks), 0);
    next.s.has_vel.assign(size_t(k_tracks), 0);
    next.s.has_acc.assign(size_t(k_tracks), 0);
    next.s.pos.assign(size_t(k_tracks), {});
    next.s.vel.assign(size_t(k_tracks), {});
    next.s.acc.assign(size_t(k_tracks), {});
    next.clouds = cur.clouds;

    for (int k = 0; k < k_tracks; ++k) {
        bool was_present = cur.s.present[size_t(k)] != 0;
        double p_present = pa.present_probability(cur.s, a, k);
        bool present_next = rng.uniform() < p_present;
        if (!present_next) continue;
        next.s.present[size_t(k)] = 1;
        if (!was_present) {
            // Reappearance: place the track at a sampled appearance cell.
            int cell = rng.sample_categorical(pa.tracks[size_t(k)].appear);
            Vec2 p = pa.cell_center(cell);
            next.s.pos[size_t(k)] = p;
            if (cur.clouds[size_t(k)].base) {
                Vec2 med = cur.clouds[size_t(k)].base->median();
                next.clouds[size_t(k)].offset = {int(std::lround(p.x - med.x)),
                                                 int(std::lround(p.y - med.y))};
            }
            continue;
        }
        std::array<std::vector<double>, 2> dist = dyn.predict(cur.s, a, k);
        double vx = dyn.grid.value(rng.sample_categorical(dist[0]));
        double vy = dyn.grid.value(rng.sample_categorical(dist[1]));
        next.s.pos[size_t(k)] = cur.s.pos[size_t(k)] + Vec2{vx, vy};
        next.s.vel[size_t(k)] = {vx, vy};
        next.s.has_vel[size_t(k)] = 1;
        if (cur.s.has_vel[size_t(k)]) {
            next.s.has_acc[size_t(k)] = 1;
            next.s.acc[size_t(k)] = next.s.vel[size_t(k)] - cur.s.vel[size_t(k)];
        }
        next.clouds[size_t(k)].offset += Vec2i{int(vx), int(vy)};
    }

    std::vector<TrackObservation> obs(static_cast<size_t>(k_tracks));
    for (int k = 0; k < k_tracks; ++k) {
        if (!next.s.present[size_t(k)] || !next.clouds[size_t(k)].base) continue;
        obs[size_t(k)].present = true;
        obs[size_t(k)].mask = next.clouds[size_t(k)].materialize();
        if (obs[size_t(k)].mask.empty()) obs[size_t(k)].present = false;  // left the frame
    }
    next.s.contact = compute_contacts(obs, params.contact_radius);
    return next;
}

}  // namespace olrl
