#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "olrl/core.hpp"
#include "olrl/models.hpp"
#include "olrl/objstate.hpp"
#include "olrl/track.hpp"

namespace olrl {

struct ObjectiveConfig {
    double holdout_fraction = 0.2;
    double c = 0.02;             // acceptance tolerance for merge proposals
    int proposals_per_round = 20;
    double gamma = 0.95;
    uint64_t split_seed = 0;
    VelocityGrid grid = VelocityGrid::standard();
    StateParams state;

    void validate() const {
        if (!(holdout_fraction > 0.0) || !(holdout_fraction < 1.0))
            throw ConfigError("holdout_fraction must lie in (0, 1)");
        if (c < 0.0) throw ConfigError("acceptance tolerance c must be >= 0");
        if (proposals_per_round < 0) throw ConfigError("proposals_per_round must be >= 0");
        if (gamma < 0.0 || gamma > 1.0) throw ConfigError("gamma must lie in [0, 1]");
        grid.validate();
        state.validate();
    }
};

struct ObjectiveBreakdown {
    double total = 0.0;
    double e_d = 0.0;  // dynamics: expected |v_pred - v_obs|
    double e_r = 0.0;  // reward: squared error
    double e_v = 0.0;  // value: squared error
};

// Mean over (held-out step, present track, dimension) of the expected
// absolute deviation between the predicted velocity distribution and the
// observed next velocity.
inline double dynamics_error(const DynamicsModel& dyn, const std::vector<Experience>& items) {
    double total = 0.0;
    long count = 0;
    for (const Experience& x : items) {
        // One error term per member-tracklet label and dimension, mirroring
        // the fitting rows: the label is the member's own observed next
        // velocity, the features come from the track-level state.
        for (const VelLabel& lb : x.vel_labels) {
            int k = lb.track;
            if (k >= dyn.n_tracks) continue;
            if (!x.state->present[size_t(k)] || !x.state->has_vel[size_t(k)]) continue;
            std::vector<double> f = dyn.features(*x.state, x.action, k);
            for (int d = 0; d < 2; ++d) {
                const std::vector<double>& dist = dyn.at(k, d).predict(f);
                double v_obs = d == 0 ? lb.v_next.x : lb.v_next.y;
                double e = 0.0;
                for (size_t b = 0; b < dist.size(); ++b)
                    e += dist[b] * std::abs(dyn.grid.value(int(b)) - v_obs);
                total += e;
                ++count;
            }
        }
    }
    if (count == 0) throw UsageError("dynamics_error: no held-out velocity observations");
    return total / double(count);
}

// Mean squared error of the pairwise model's per-step prediction against
// the observed reward (or return).
inline double pairwise_error(const PairwiseModel& model, const std::vector<Experience>& items) {
    if (items.empty()) throw UsageError("pairwise_error: no held-out steps");
    double total = 0.0;
    for (const Experience& x : items) {
        double y = model.target == PairTarget::reward ? x.reward : x.ret;
        total += sqr(model.predict(*x.state, x.action) - y);
    }
    return total / double(items.size());
}

inline double reward_error(const PairwiseModel& model, const std::vector<Experience>& items) {
    if (model.target != PairTarget::reward)
        throw UsageError("reward_error: model was fitted on returns");
    return pairwise_error(model, items);
}

inline double value_error(const PairwiseModel& model, const std::vector<Experience>& items) {
    if (model.target != PairTarget::value)
        throw UsageError("value_error: model was fitted on rewards");
    return pairwise_error(model, items);
}

// Scores a tracklet map: rebuilds every episode's experience under the map,
// holds out a seeded fraction of the steps (the same steps for every
// candidate map, since step identity does not depend on the map), fits
// dynamics and pairwise models on the remainder, and sums the three
// held-out errors.
inline ObjectiveBreakdown evaluate_map(const std::vector<Tracklet>& tracklets,
                                       const TrackletMap& map, const ReplayBuffer& buffer,
                                       const ObjectiveConfig& cfg) {
    cfg.validate();
    if (buffer.episodes.size() < 2)
        throw UsageError("evaluate_map: needs at least two episodes of experience");
    ExperienceSet set = build_experiences(tracklets, map, buffer, cfg.gamma, cfg.state);
    int n = int(set.items.size());
    if (n < 2) throw UsageError("evaluate_map: needs at least two experience steps");

    Rng rng(cfg.split_seed);
    std::vector<int> idx = detail::shuffled_indices(n, rng);
    int holdout_n = std::max(1, int(cfg.holdout_fraction * n));
    if (holdout_n >= n) holdout_n = n - 1;
    std::vector<char> held(size_t(n), 0);
    for (int i = 0; i < holdout_n; ++i) held[size_t(idx[size_t(i)])] = 1;

    ExperienceSet train;
    train.n_tracks = set.n_tracks;
    std::vector<Experience> holdout;
    for (int i = 0; i < n; ++i) {
        if (held[size_t(i)])
            holdout.push_back(set.items[size_t(i)]);
        else
            train.items.push_back(set.items[size_t(i)]);
    }

    DynamicsModel dyn = fit_dynamics(train, cfg.grid, cfg.split_seed);
    PairwiseModel reward_model = fit_pairwise(train, PairTarget::reward, cfg.split_seed);
    PairwiseModel value_model = fit_pairwise(train, PairTarget::value, cfg.split_seed);

    ObjectiveBreakdown out;
    out.e_d = dynamics_error(dyn, holdout);
    out.e_r = reward_error(reward_model, holdout);
    out.e_v = value_error(value_model, holdout);
    out.total = out.e_d + out.e_r + out.e_v;
    return out;
}

// One scored merge proposal, for trace files and diagnostics.
struct ProposalTrace {
    int round = 0;       // filled by the caller running multiple rounds
    int track_a = 0;
    int track_b = 0;
    ObjectiveBreakdown candidate;  // errors of the proposed map
    double before = 0.0;           // objective the proposal competed against
    double after = 0.0;            // objective in force once decided
    bool accepted = false;
};

struct OptimizeResult {
    TrackletMap map;
    ObjectiveBreakdown objective;       // of the returned map
    int proposals = 0;
    int accepted = 0;
    // Tracklet pairs (earlier id, later id) whose merge was accepted and
    // whose lifetimes are consecutive: training positives for the tracker's
    // per-tracklet match classifiers.
    std::vector<std::pair<int, int>> promotions;
    std::vector<ProposalTrace> trace;  // one entry per proposal
};

namespace detail {

// After accepting a merge of tracks a and b under `before`, the handoff
// pairs are the time-consecutive tracklet pairs of the union that cross
// the old track boundary without overlapping in time.
inline void collect_promotions(const TrackletMap& before, int track_a, int track_b,
                               const std::vector<Tracklet>& tracklets,
                               std::vector<std::pair<int, int>>& out) {
    std::vector<const Tracklet*> members;
    for (const Tracklet& t : tracklets) {
        int g = before.track_of(t.id);
        if (g == track_a || g == track_b) members.push_back(&t);
    }
    std::sort(members.begin(), members.end(), [](const Tracklet* x, const Tracklet* y) {
        if (x->first_t != y->first_t) return x->first_t < y->first_t;
        return x->id < y->id;
    });
    for (size_t i = 0; i + 1 < members.size(); ++i) {
        const Tracklet* u = members[i];
        const Tracklet* v = members[i + 1];
        if (before.track_of(u->id) == before.track_of(v->id)) continue;
        if (u->last_seen >= v->first_t) continue;  // overlapping lifetimes
        out.emplace_back(u->id, v->id);
    }
}

}  // namespace detail

// One merge round: score the current map, then try seeded random pairs of
// current tracks, accepting any merge that does not worsen the objective by
// more than the tolerance c. At most proposals_per_round + 1 evaluations.
inline OptimizeResult optimize_map(const std::vector<Tracklet>& tracklets, const TrackletMap& map,
                                   const ReplayBuffer& buffer, const ObjectiveConfig& cfg,
                                   Rng& rng) {
    cfg.validate();
    OptimizeResult res;
    res.map = map;
    res.objective = evaluate_map(tracklets, map, buffer, cfg);
    for (int p = 0; p < cfg.proposals_per_round; ++p) {
        int k = res.map.n_tracks();
        if (k < 2) break;
        int a = rng.uniform_int(k);
        int b = rng.uniform_int(k - 1);
        if (b >= a) ++b;
        ++res.proposals;
        TrackletMap candidate = res.map.merged(a, b, tracklets);
        ObjectiveBreakdown scored = evaluate_map(tracklets, candidate, buffer, cfg);
        ProposalTrace tr;
        tr.track_a = a;
        tr.track_b = b;
        tr.candidate = scored;
        tr.before = res.objective.total;
        if (scored.total <= res.objective.total + cfg.c) {
            detail::collect_promotions(res.map, a, b, tracklets, res.promotions);
            res.map = candidate;
            res.objective = scored;
            ++res.accepted;
            tr.accepted = true;
        }
        tr.after = res.objective.total;
        res.trace.push_back(tr);
    }
    return res;
}

}  // namespace olrl
