#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <vector>

#include "olrl/core.hpp"
#include "olrl/env.hpp"
#include "olrl/track.hpp"

namespace olrl {

struct StateParams {
    int contact_radius = 2;  // Chebyshev pixel distance counted as contact
    double v_clamp = 30.0;   // per-dimension velocity clamp, pixels/step

    void validate() const {
        if (contact_radius < 0) throw ConfigError("contact_radius must be >= 0");
        if (v_clamp <= 0.0) throw ConfigError("v_clamp must be > 0");
    }
};

// Assignment of every tracklet to a track (an object hypothesis). Track ids
// are compact, ordered by the smallest tracklet id in each group, so maps
// that only gain fresh tracklets keep existing track ids stable. The
// background track is the group with the largest total pixel count.
class TrackletMap {
  public:
    TrackletMap() = default;

    static TrackletMap identity(const std::vector<Tracklet>& tracklets) {
        TrackletMap m;
        for (const Tracklet& l : tracklets) m.map_[l.id] = l.id;
        m.compact(tracklets);
        return m;
    }

    // Unseen tracklets become fresh singleton tracks; existing groups keep
    // their track ids (new tracklet ids are always larger than old ones).
    TrackletMap extended(const std::vector<Tracklet>& tracklets) const {
        TrackletMap m = *this;
        for (const Tracklet& l : tracklets)
            if (!m.map_.count(l.id)) m.map_[l.id] = -1 - l.id;  // fresh temp label
        m.compact(tracklets);
        return m;
    }

    TrackletMap merged(int track_a, int track_b, const std::vector<Tracklet>& tracklets) const {
        if (track_a == track_b) throw UsageError("merged: tracks must differ");
        if (track_a < 0 || track_a >= n_tracks_ || track_b < 0 || track_b >= n_tracks_)
            throw UsageError("merged: unknown track id");
        TrackletMap m = *this;
        for (auto& [id, track] : m.map_)
            if (track == track_b) track = track_a;
        m.compact(tracklets);
        return m;
    }

    int track_of(int tracklet_id) const {
        auto it = map_.find(tracklet_id);
        if (it == map_.end()) throw UsageError("tracklet id not in map");
        return it->second;
    }

    int n_tracks() const { return n_tracks_; }
    int background_track() const { return background_; }
    const std::map<int, int>& mapping() const { return map_; }

    // Tracklet ids per track, ascending within each group.
    std::vector<std::vector<int>> groups() const {
        std::vector<std::vector<int>> g(static_cast<size_t>(n_tracks_));
        for (const auto& [id, track] : map_) g[size_t(track)].push_back(id);
        return g;
    }

    bool operator==(const TrackletMap& o) const { return map_ == o.map_; }

  private:
    void compact(const std::vector<Tracklet>& tracklets) {
        // Group by current label, order groups by smallest member id.
        std::map<int, int> label_to_min;
        for (const auto& [id, label] : map_) {
            auto [it, fresh] = label_to_min.emplace(label, id);
            if (!fresh) it->second = std::min(it->second, id);
        }
        std::vector<std::pair<int, int>> order;  // (min tracklet id, label)
        for (const auto& [label, mn] : label_to_min) order.emplace_back(mn, label);
        std::sort(order.begin(), order.end());
        std::map<int, int> relabel;
        for (int k = 0; k < int(order.size()); ++k) relabel[order[size_t(k)].second] = k;
        for (auto& [id, label] : map_) label = relabel.at(label);
        n_tracks_ = int(order.size());

        std::vector<int64_t> pixels(size_t(n_tracks_), 0);
        for (const Tracklet& l : tracklets) {
            auto it = map_.find(l.id);
            if (it == map_.end()) continue;
            for (const TrackletEntry& e : l.entries)
                pixels[size_t(it->second)] += e.seg.pixel_count;
        }
        background_ = -1;
        int64_t best = -1;
        for (int k = 0; k < n_tracks_; ++k)
            if (pixels[size_t(k)] > best) {
                best = pixels[size_t(k)];
                background_ = k;
            }
    }

    std::map<int, int> map_;
    int n_tracks_ = 0;
    int background_ = -1;
};

struct TrackObservation {
    bool present = false;
    BitMask mask;      // union of constituent tracklet masks at t
    Vec2 median;       // lower median of the union, pixel units
    int pixel_count = 0;
};

// Track masks at time t under the map: per track, the union of masks of its
// tracklets that are present at t. The pixel multiset is conserved because
// tracklet masks at one frame partition the segmented pixels.
inline std::vector<TrackObservation> apply_map(const std::vector<Tracklet>& tracklets,
                                               const TrackletMap& map, int t) {
    std::vector<TrackObservation> out(size_t(map.n_tracks()));
    for (const Tracklet& l : tracklets) {
        int k = l.entry_at(t);
        if (k < 0) continue;
        TrackObservation& o = out[size_t(map.track_of(l.id))];
        const BitMask& m = l.entries[size_t(k)].seg.mask;
        if (!o.present) {
            o.present = true;
            o.mask = m;
        } else {
            o.mask |= m;
        }
    }
    for (TrackObservation& o : out) {
        if (!o.present) continue;
        o.pixel_count = o.mask.count();
        o.median = o.mask.median();
    }
    return out;
}

// c[i,j] = 1 iff some pixel of cloud i is within Chebyshev distance
// `radius` of some pixel of cloud j. Pair-indexed over i < j.
inline std::vector<char> compute_contacts(const std::vector<TrackObservation>& obs,
                                          int radius = 2) {
    int k = int(obs.size());
    std::vector<char> c(num_pairs(k), 0);
    if (k < 2) return c;
    std::vector<BitMask> dilated(obs.size());
    for (size_t i = 0; i < obs.size(); ++i)
        if (obs[i].present) dilated[i] = obs[i].mask.dilated(radius);
    for (int i = 0; i < k; ++i) {
        if (!obs[size_t(i)].present) continue;
        for (int j = i + 1; j < k; ++j) {
            if (!obs[size_t(j)].present) continue;
            if (obs[size_t(i)].mask.intersects(dilated[size_t(j)]))
                c[pair_index(i, j, k)] = 1;
        }
    }
    return c;
}

// Object-level state at one timestep: per-track position/velocity/
// acceleration with explicit missingness flags, plus pairwise contacts.
// Relative quantities are derived from the absolutes on demand.
struct ObjectState {
    int t = 0;
    int n_tracks = 0;
    std::vector<char> present;
    std::vector<char> has_vel;
    std::vector<char> has_acc;
    std::vector<Vec2> pos;  // valid iff present
    std::vector<Vec2> vel;  // valid iff has_vel; clamped to +-v_clamp per dim
    std::vector<Vec2> acc;  // valid iff has_acc
    std::vector<char> contact;  // pair-indexed, both-present pairs only

    bool contact_at(int i, int j) const { return contact[pair_index(i, j, n_tracks)] != 0; }

    Vec2 pos_of(int k) const {
        if (!present[size_t(k)]) throw UsageError("position of absent track");
        return pos[size_t(k)];
    }
    Vec2 vel_of(int k) const {
        if (!has_vel[size_t(k)]) throw UsageError("velocity of track without history");
        return vel[size_t(k)];
    }
    Vec2 acc_of(int k) const {
        if (!has_acc[size_t(k)]) throw UsageError("acceleration of track without history");
        return acc[size_t(k)];
    }

    bool pair_present(int i, int j) const { return present[size_t(i)] && present[size_t(j)]; }
    // p_r[i,j] = p_a[j] - p_a[i] for i < j; likewise v_r, a_r.
    Vec2 rel_pos(int i, int j) const { return pos_of(j) - pos_of(i); }
    Vec2 rel_vel(int i, int j) const { return vel_of(j) - vel_of(i); }
    Vec2 rel_acc(int i, int j) const { return acc_of(j) - acc_of(i); }
};

namespace detail {

inline Vec2 clamp_vec(Vec2 v, double lim) {
    return {std::clamp(v.x, -lim, lim), std::clamp(v.y, -lim, lim)};
}

}  // namespace detail

// State from a 3-frame observation window (older entries may be empty when
// the episode just started). Velocities are first differences of medians,
// clamped per dimension; accelerations are differences of clamped
// velocities. A track missing anywhere in the chain gets its derived
// quantities flagged missing rather than zeroed.
inline ObjectState extract_state(const std::vector<TrackObservation>& at_t,
                                 const std::vector<TrackObservation>& at_t1,
                                 const std::vector<TrackObservation>& at_t2, int t,
                                 const StateParams& params = {}) {
    params.validate();
    int k = int(at_t.size());
    if (int(at_t1.size()) != k && !at_t1.empty())
        throw UsageError("extract_state: window track counts differ");
    if (int(at_t2.size()) != k && !at_t2.empty())
        throw UsageError("extract_state: window track counts differ");
    ObjectState s;
    s.t = t;
    s.n_tracks = k;
    s.present.assign(size_t(k), 0);
    s.has_vel.assign(size_t(k), 0);
    s.has_acc.assign(size_t(k), 0);
    s.pos.assign(size_t(k), {});
    s.vel.assign(size_t(k), {});
    s.acc.assign(size_t(k), {});
    for (int i = 0; i < k; ++i) {
        if (!at_t[size_t(i)].present) continue;
        s.present[size_t(i)] = 1;
        s.pos[size_t(i)] = at_t[size_t(i)].median;
        if (at_t1.empty() || !at_t1[size_t(i)].present) continue;
        s.has_vel[size_t(i)] = 1;
        s.vel[size_t(i)] =
            detail::clamp_vec(s.pos[size_t(i)] - at_t1[size_t(i)].median, params.v_clamp);
        if (at_t2.empty() || !at_t2[size_t(i)].present) continue;
        Vec2 v_prev = detail::clamp_vec(at_t1[size_t(i)].median - at_t2[size_t(i)].median,
                                        params.v_clamp);
        s.has_acc[size_t(i)] = 1;
        s.acc[size_t(i)] = s.vel[size_t(i)] - v_prev;
    }
    s.contact = compute_contacts(at_t, params.contact_radius);
    return s;
}

// ObjectStates for frames t_base .. t_base + n_frames - 1 under the map.
inline std::vector<ObjectState> build_states(const std::vector<Tracklet>& tracklets,
                                             const TrackletMap& map, int t_base, int n_frames,
                                             const StateParams& params = {}) {
    std::vector<ObjectState> out;
    out.reserve(size_t(n_frames));
    std::vector<TrackObservation> prev2, prev1;
    for (int i = 0; i < n_frames; ++i) {
        std::vector<TrackObservation> cur = apply_map(tracklets, map, t_base + i);
        out.push_back(extract_state(cur, prev1, prev2, i, params));
        prev2 = std::move(prev1);
        prev1 = std::move(cur);
    }
    return out;
}

// Discounted returns, evaluated right to left so the Bellman recurrence
// G_t = r_t + g*G_{t+1} holds exactly in floating point.
inline std::vector<double> mc_returns(const std::vector<double>& rewards, double gamma) {
    if (gamma < 0.0 || gamma > 1.0) throw ConfigError("gamma must be in [0, 1]");
    std::vector<double> g(rewards.size());
    double acc = 0.0;
    for (size_t i = rewards.size(); i-- > 0;) {
        acc = rewards[i] + gamma * acc;
        g[i] = acc;
    }
    return g;
}

// One environment episode as the agent saw it: frames at global tracker
// times t_base .. t_base + n_frames - 1, with actions[i]/rewards[i] taken
// between frames i and i+1.
struct EpisodeLog {
    int t_base = 0;
    int n_frames = 0;
    std::vector<Action> actions;
    std::vector<double> rewards;
    uint64_t episode_seed = 0;

    double score() const {
        double s = 0.0;
        for (double r : rewards) s += r;
        return s;
    }

    void validate() const {
        if (actions.size() != rewards.size()) throw UsageError("actions/rewards length mismatch");
        if (int(actions.size()) != n_frames - 1)
            throw UsageError("episode must have one action between consecutive frames");
    }
};

struct ReplayBuffer {
    std::vector<EpisodeLog> episodes;

    int total_steps() const {
        int n = 0;
        for (const EpisodeLog& e : episodes) n += int(e.actions.size());
        return n;
    }
};

// A transition sample; state pointers refer into an ExperienceSet's episode
// state storage.
// One dynamics supervision row: a member tracklet observed at both t and
// t+1, labelled with its own next velocity (clamped median difference) and
// the track it belongs to under the current map. Keeping labels per member
// tracklet rather than per merged track is what gives the objective its
// teeth: a track holding two simultaneously live tracklets must explain both
// of their velocities from one blended state, so merging distinct movers
// raises the dynamics error instead of hiding one mover inside the union
// median. The row count is also map-independent (one row per tracklet
// presence), so candidate maps are compared over identical supervision.
struct VelLabel {
    int track = 0;
    Vec2 v_next;
};

struct Experience {
    int episode = 0;
    int t = 0;  // local step index within the episode
    Action action = Action::noop;
    double reward = 0.0;
    double ret = 0.0;  // Monte Carlo return G_t
    const ObjectState* state = nullptr;
    const ObjectState* next = nullptr;
    std::vector<VelLabel> vel_labels;
};

struct ExperienceSet {
    int n_tracks = 0;
    std::vector<std::vector<ObjectState>> episode_states;
    std::vector<Experience> items;
};

// Rebuilds every episode's states under the map and pairs them into
// (s, a, r, s') samples with their Monte Carlo returns.
inline ExperienceSet build_experiences(const std::vector<Tracklet>& tracklets,
                                       const TrackletMap& map, const ReplayBuffer& buffer,
                                       double gamma, const StateParams& params = {}) {
    ExperienceSet set;
    set.n_tracks = map.n_tracks();
    set.episode_states.reserve(buffer.episodes.size());
    for (const EpisodeLog& ep : buffer.episodes) {
        ep.validate();
        set.episode_states.push_back(
            build_states(tracklets, map, ep.t_base, ep.n_frames, params));
    }
    for (size_t e = 0; e < buffer.episodes.size(); ++e) {
        const EpisodeLog& ep = buffer.episodes[e];
        std::vector<double> g = mc_returns(ep.rewards, gamma);
        const std::vector<ObjectState>& states = set.episode_states[e];
        for (size_t i = 0; i < ep.actions.size(); ++i) {
            Experience x;
            x.episode = int(e);
            x.t = int(i);
            x.action = ep.actions[i];
            x.reward = ep.rewards[i];
            x.ret = g[i];
            x.state = &states[i];
            x.next = &states[i + 1];
            set.items.push_back(x);
        }
        for (const Tracklet& l : tracklets) {
            int track = map.track_of(l.id);
            for (const TrackletEntry& entry : l.entries) {
                int i = entry.t - ep.t_base;
                if (i < 0 || i >= int(ep.actions.size())) continue;
                int k_next = l.entry_at(entry.t + 1);
                if (k_next < 0) continue;
                Vec2 v = detail::clamp_vec(l.entries[size_t(k_next)].seg.median - entry.seg.median,
                                           params.v_clamp);
                set.items[set.items.size() - ep.actions.size() + size_t(i)].vel_labels.push_back(
                    {track, v});
            }
        }
    }
    return set;
}

}  // namespace olrl
