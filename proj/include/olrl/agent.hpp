#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <set>
#include <utility>
#include <vector>

#include "olrl/core.hpp"
#include "olrl/env.hpp"
#include "olrl/models.hpp"
#include "olrl/objective.hpp"
#include "olrl/objstate.hpp"
#include "olrl/track.hpp"

namespace olrl {

// Episodes are spaced this far apart on the tracker's global clock, so
// cross-episode segment matching is ruled out by the permanence penalty.
inline constexpr int kEpisodeStride = 10000;

struct AgentConfig {
    double gamma = 0.95;
    int plan_depth = 2;        // actions per evaluated sequence
    int samples_per_path = 10; // sampled rollouts per sequence
    double epsilon_start = 1.0;
    double epsilon_end = 0.05;
    int epsilon_decay_steps = 1000;
    int merge_rounds_per_episode = 1;
    uint64_t plan_seed = 0;

    void validate() const {
        if (gamma < 0.0 || gamma > 1.0) throw ConfigError("gamma must lie in [0, 1]");
        if (plan_depth < 1) throw ConfigError("plan_depth must be >= 1");
        if (samples_per_path < 1) throw ConfigError("samples_per_path must be >= 1");
        if (epsilon_start < 0.0 || epsilon_start > 1.0 || epsilon_end < 0.0 ||
            epsilon_end > 1.0 || epsilon_end > epsilon_start)
            throw ConfigError("epsilon schedule must satisfy 0 <= end <= start <= 1");
        if (epsilon_decay_steps < 1) throw ConfigError("epsilon_decay_steps must be >= 1");
        if (merge_rounds_per_episode < 0)
            throw ConfigError("merge_rounds_per_episode must be >= 0");
    }
};

// Discounted score of one sampled rollout: the rewards collected before the
// horizon plus the discounted terminal value.
inline double plan_value(const std::vector<double>& rewards, double terminal_value,
                         double gamma) {
    double g = 1.0;
    double acc = 0.0;
    for (double r : rewards) {
        acc += g * r;
        g *= gamma;
    }
    return acc + g * terminal_value;
}

struct AgentModels {
    bool trained = false;
    DynamicsModel dyn;
    PresenceAppearance pa;
    PairwiseModel reward;  // fitted on step rewards
    PairwiseModel value;   // fitted on Monte Carlo returns

    int n_tracks() const { return dyn.n_tracks; }
};

// Enumerates every action sequence of length plan_depth, scores each by
// averaging sampled rollouts (rewards along the way, value at the horizon),
// and returns the first action of the best sequence. All randomness comes
// from a fresh rng seeded by (plan_seed, tag), so a given state and tag
// always yield the same choice; ties are broken uniformly from the same
// rng.
inline Action plan_action(const AgentModels& models, const PlanState& start,
                          const AgentConfig& cfg, uint64_t tag,
                          const StateParams& params = {}) {
    cfg.validate();
    if (!models.trained) throw UsageError("plan_action: models are untrained");
    Rng rng(mix_seed({cfg.plan_seed, tag}));
    long n_seq = 1;
    for (int d = 0; d < cfg.plan_depth; ++d) n_seq *= kNumActions;

    double best_q = 0.0;
    std::vector<long> best;  // tied sequence indices
    std::vector<Action> seq(size_t(cfg.plan_depth));
    std::vector<double> rewards;
    for (long s = 0; s < n_seq; ++s) {
        long rem = s;
        for (int d = 0; d < cfg.plan_depth; ++d) {
            seq[size_t(d)] = Action(rem % kNumActions);
            rem /= kNumActions;
        }
        double q = 0.0;
        for (int r = 0; r < cfg.samples_per_path; ++r) {
            PlanState o = start;
            rewards.clear();
            double terminal = 0.0;
            for (int d = 0; d < cfg.plan_depth; ++d) {
                Action a = seq[size_t(d)];
                if (d + 1 < cfg.plan_depth) {
                    rewards.push_back(models.reward.predict(o.s, a));
                    o = sample_transition(models.dyn, models.pa, o, a, rng, params);
                } else {
                    terminal = models.value.predict(o.s, a);
                }
            }
            q += plan_value(rewards, terminal, cfg.gamma);
        }
        q /= cfg.samples_per_path;
        if (best.empty() || q > best_q) {
            best_q = q;
            best.assign(1, s);
        } else if (q == best_q) {
            best.push_back(s);
        }
    }
    long pick = best.size() == 1 ? best.front() : best[size_t(rng.uniform_int(int(best.size())))];
    return Action(pick % kNumActions);
}

struct EpisodeStats {
    int episode = 0;
    int steps = 0;
    double score = 0.0;
    int n_tracks = 0;
    bool objective_valid = false;  // needs two logged episodes
    ObjectiveBreakdown objective;
    double epsilon = 0.0;  // exploration rate at the first step
    double wall_ms = 0.0;
};

// The learning loop: track segments into tracklets, act by epsilon-greedy
// sampled planning over the current object map, and between episodes merge
// tracklets whose union does not hurt the predictive objective, promote the
// accepted handoffs into the tracker's match classifiers, and refit every
// model on all experience under the new map.
class Agent {
  public:
    Agent(AgentConfig cfg, TrackerConfig tracker_cfg, ObjectiveConfig objective_cfg,
          uint64_t seed)
        : cfg_(cfg),
          objective_cfg_(objective_cfg),
          tracker_(tracker_cfg),
          run_rng_(mix_seed({seed, 1})),
          merge_rng_(mix_seed({seed, 2})) {
        cfg_.validate();
        objective_cfg_.gamma = cfg_.gamma;  // one discount for the whole agent
        objective_cfg_.validate();
    }

    double epsilon_at(long step) const {
        if (step >= cfg_.epsilon_decay_steps) return cfg_.epsilon_end;
        double frac = double(step) / double(cfg_.epsilon_decay_steps);
        return cfg_.epsilon_start + (cfg_.epsilon_end - cfg_.epsilon_start) * frac;
    }

    EpisodeStats run_episode(Environment& env, uint64_t episode_seed) {
        auto start_clock = std::chrono::steady_clock::now();
        if (env.config().episode_len + 1 >= kEpisodeStride)
            throw ConfigError("episode_len must be shorter than the episode stride");
        frame_h_ = env.config().render_h;
        frame_w_ = env.config().render_w;

        EpisodeStats stats;
        stats.episode = episode_index_;
        stats.epsilon = epsilon_at(global_step_);
        int t_base = episode_index_ * kEpisodeStride;

        EpisodeLog log;
        log.t_base = t_base;
        log.episode_seed = episode_seed;
        Frame frame = env.reset(episode_seed);
        int frames_seen = 0;
        while (true) {
            int t = t_base + frames_seen;
            tracker_.observe(frame, t);
            ++frames_seen;
            Action a = act(t);
            StepResult r = env.step(a);
            log.actions.push_back(a);
            log.rewards.push_back(r.reward);
            ++global_step_;
            frame = std::move(r.frame);
            if (r.done) {
                tracker_.observe(frame, t_base + frames_seen);
                ++frames_seen;
                break;
            }
        }
        log.n_frames = frames_seen;
        log.validate();
        stats.steps = int(log.rewards.size());
        stats.score = log.score();
        buffer_.episodes.push_back(std::move(log));

        learn(stats);
        ++episode_index_;

        stats.n_tracks = map_.n_tracks();
        stats.wall_ms = std::chrono::duration<double, std::milli>(
                            std::chrono::steady_clock::now() - start_clock)
                            .count();
        return stats;
    }

    const Tracker& tracker() const { return tracker_; }
    const TrackletMap& map() const { return map_; }
    const ReplayBuffer& buffer() const { return buffer_; }
    const AgentModels& models() const { return models_; }
    const std::vector<ProposalTrace>& objective_trace() const { return trace_; }
    const AgentConfig& config() const { return cfg_; }
    const ObjectiveConfig& objective_config() const { return objective_cfg_; }
    long global_step() const { return global_step_; }
    int episodes_run() const { return episode_index_; }

  private:
    Action act(int t) {
        if (!models_.trained) return Action(run_rng_.uniform_int(kNumActions));
        if (run_rng_.uniform() < epsilon_at(global_step_))
            return Action(run_rng_.uniform_int(kNumActions));
        const std::vector<Tracklet>& ts = tracker_.tracklets();
        TrackletMap ext = map_.extended(ts);
        std::vector<TrackObservation> w2 = apply_map(ts, ext, t - 2);
        std::vector<TrackObservation> w1 = apply_map(ts, ext, t - 1);
        std::vector<TrackObservation> w0 = apply_map(ts, ext, t);
        ObjectState state = extract_state(w0, w1, w2, t, objective_cfg_.state);
        PlanState start = make_plan_state(state, w0, models_.n_tracks());
        return plan_action(models_, start, cfg_, uint64_t(t), objective_cfg_.state);
    }

    // Post-episode: extend the map over new tracklets, run merge rounds,
    // teach the tracker the accepted handoffs, and refit all models on the
    // full replay under the final map.
    void learn(EpisodeStats& stats) {
        const std::vector<Tracklet>& ts = tracker_.tracklets();
        map_ = map_.extended(ts);
        if (buffer_.episodes.size() >= 2) {
            if (cfg_.merge_rounds_per_episode > 0) {
                bool new_promotions = false;
                for (int r = 0; r < cfg_.merge_rounds_per_episode; ++r) {
                    OptimizeResult res =
                        optimize_map(ts, map_, buffer_, objective_cfg_, merge_rng_);
                    map_ = res.map;
                    stats.objective = res.objective;
                    for (ProposalTrace tr : res.trace) {
                        tr.round = merge_round_;
                        trace_.push_back(tr);
                    }
                    ++merge_round_;
                    for (const std::pair<int, int>& pr : res.promotions) {
                        if (promoted_pairs_.insert(pr).second) {
                            tracker_.promote_pair(pr.first, pr.second);
                            new_promotions = true;
                        }
                    }
                }
                if (new_promotions) tracker_.refit_classifiers();
            } else {
                stats.objective = evaluate_map(ts, map_, buffer_, objective_cfg_);
            }
            stats.objective_valid = true;
        }
        ExperienceSet set =
            build_experiences(ts, map_, buffer_, cfg_.gamma, objective_cfg_.state);
        models_.dyn = fit_dynamics(set, objective_cfg_.grid, objective_cfg_.split_seed);
        models_.pa = fit_presence_and_appearance(set, frame_h_, frame_w_);
        models_.reward = fit_pairwise(set, PairTarget::reward, objective_cfg_.split_seed);
        models_.value = fit_pairwise(set, PairTarget::value, objective_cfg_.split_seed);
        models_.trained = true;
    }

    AgentConfig cfg_;
    ObjectiveConfig objective_cfg_;
    Tracker tracker_;
    TrackletMap map_;
    ReplayBuffer buffer_;
    AgentModels models_;
    std::set<std::pair<int, int>> promoted_pairs_;
    std::vector<ProposalTrace> trace_;
    Rng run_rng_;
    Rng merge_rng_;
    long global_step_ = 0;
    int merge_round_ = 0;
    int episode_index_ = 0;
    int frame_h_ = 0;
    int frame_w_ = 0;
};

}  // namespace olrl
