// Benchmark harness: experiment configuration (JSON), the three policy
// variants (full pipeline, no-merging ablation, random), per-episode metrics
// CSVs with a cross-seed summary, an open-loop dynamics-prediction
// evaluation, and frame dumping.
//
// Every number produced here is a pure function of the configuration and the
// seeds, except wall-clock columns, which are measured.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "olrl/agent.hpp"
#include "olrl/core.hpp"
#include "olrl/env.hpp"
#include "olrl/objective.hpp"
#include "olrl/objstate.hpp"
#include "olrl/png_io.hpp"
#include "olrl/serialize.hpp"
#include "olrl/track.hpp"

namespace olrl {

// ---------------------------------------------------------------------------
// Variants under comparison.

enum class Variant { olrl, olrl_minus_m, random_policy };

inline std::string variant_name(Variant v) {
    switch (v) {
        case Variant::olrl: return "olrl";
        case Variant::olrl_minus_m: return "olrl_minus_m";
        case Variant::random_policy: return "random";
    }
    throw UsageError("bad variant");
}

inline Variant variant_from_name(const std::string& s) {
    if (s == "olrl") return Variant::olrl;
    if (s == "olrl_minus_m") return Variant::olrl_minus_m;
    if (s == "random") return Variant::random_policy;
    throw ConfigError("unknown variant: " + s);
}

// The ablations are expressed purely through the agent configuration:
// disabling merge rounds keeps every tracklet a separate track, and pinning
// epsilon at 1 makes the policy uniform-random while learning still runs.
inline AgentConfig variant_agent_config(const AgentConfig& base, Variant v) {
    AgentConfig cfg = base;
    if (v == Variant::olrl_minus_m) cfg.merge_rounds_per_episode = 0;
    if (v == Variant::random_policy) {
        cfg.epsilon_start = 1.0;
        cfg.epsilon_end = 1.0;
    }
    return cfg;
}

// ---------------------------------------------------------------------------
// Experiment configuration.

struct ExperimentConfig {
    EnvConfig env;
    AgentConfig agent;
    TrackerConfig tracker;
    ObjectiveConfig objective;
    std::vector<Variant> variants = {Variant::olrl, Variant::olrl_minus_m,
                                     Variant::random_policy};
    int total_steps = 2000;  // environment steps per seed, split into episodes
    int n_seeds = 5;
    std::string output_dir;

    void validate() const {
        env.validate();
        agent.validate();
        tracker.validate();
        objective.validate();
        if (total_steps < env.episode_len)
            throw ConfigError("total_steps must cover at least one episode");
        if (n_seeds < 1) throw ConfigError("n_seeds must be >= 1");
        if (variants.empty()) throw ConfigError("at least one variant required");
        for (size_t i = 0; i < variants.size(); ++i)
            for (size_t j = i + 1; j < variants.size(); ++j)
                if (variants[i] == variants[j]) throw ConfigError("duplicate variant");
    }
};

namespace detail {

inline void require_keys(const json& j, std::initializer_list<const char*> allowed,
                         const std::string& what) {
    if (!j.is_object()) throw ConfigError(what + " must be a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = false;
        for (const char* k : allowed) known = known || it.key() == k;
        if (!known) throw ConfigError("unknown " + what + " key: " + it.key());
    }
}

}  // namespace detail

inline AgentConfig agent_config_from_json(const json& j) {
    detail::require_keys(j,
                         {"gamma", "plan_depth", "samples_per_path", "epsilon_start",
                          "epsilon_end", "epsilon_decay_steps", "merge_rounds_per_episode",
                          "plan_seed"},
                         "agent config");
    AgentConfig cfg;
    if (j.contains("gamma")) cfg.gamma = j.at("gamma").get<double>();
    if (j.contains("plan_depth")) cfg.plan_depth = j.at("plan_depth").get<int>();
    if (j.contains("samples_per_path"))
        cfg.samples_per_path = j.at("samples_per_path").get<int>();
    if (j.contains("epsilon_start")) cfg.epsilon_start = j.at("epsilon_start").get<double>();
    if (j.contains("epsilon_end")) cfg.epsilon_end = j.at("epsilon_end").get<double>();
    if (j.contains("epsilon_decay_steps"))
        cfg.epsilon_decay_steps = j.at("epsilon_decay_steps").get<int>();
    if (j.contains("merge_rounds_per_episode"))
        cfg.merge_rounds_per_episode = j.at("merge_rounds_per_episode").get<int>();
    if (j.contains("plan_seed")) cfg.plan_seed = j.at("plan_seed").get<uint64_t>();
    return cfg;
}

inline ObjectiveConfig objective_config_from_json(const json& j) {
    detail::require_keys(
        j, {"holdout_fraction", "c", "proposals_per_round", "split_seed", "contact_radius"},
        "objective config");
    ObjectiveConfig cfg;
    if (j.contains("holdout_fraction"))
        cfg.holdout_fraction = j.at("holdout_fraction").get<double>();
    if (j.contains("c")) cfg.c = j.at("c").get<double>();
    if (j.contains("proposals_per_round"))
        cfg.proposals_per_round = j.at("proposals_per_round").get<int>();
    if (j.contains("split_seed")) cfg.split_seed = j.at("split_seed").get<uint64_t>();
    if (j.contains("contact_radius"))
        cfg.state.contact_radius = j.at("contact_radius").get<int>();
    return cfg;
}

inline TrackerConfig tracker_config_from_json(const json& j) {
    detail::require_keys(j, {"seg_scale", "seg_sigma", "seg_min_size"}, "tracker config");
    TrackerConfig cfg;
    if (j.contains("seg_scale")) cfg.seg_scale = j.at("seg_scale").get<double>();
    if (j.contains("seg_sigma")) cfg.seg_sigma = j.at("seg_sigma").get<double>();
    if (j.contains("seg_min_size")) cfg.seg_min_size = j.at("seg_min_size").get<int>();
    return cfg;
}

inline ExperimentConfig experiment_config_from_json(const json& j) {
    detail::require_keys(
        j, {"env", "agent", "tracker", "objective", "variant", "total_steps", "n_seeds",
            "output_dir"},
        "experiment config");
    ExperimentConfig cfg;
    if (j.contains("env")) cfg.env = env_config_from_json(j.at("env"));
    if (j.contains("agent")) cfg.agent = agent_config_from_json(j.at("agent"));
    if (j.contains("tracker")) cfg.tracker = tracker_config_from_json(j.at("tracker"));
    if (j.contains("objective")) cfg.objective = objective_config_from_json(j.at("objective"));
    if (j.contains("variant")) {
        std::string v = j.at("variant").get<std::string>();
        if (v != "all") cfg.variants = {variant_from_name(v)};
    }
    if (j.contains("total_steps")) cfg.total_steps = j.at("total_steps").get<int>();
    if (j.contains("n_seeds")) cfg.n_seeds = j.at("n_seeds").get<int>();
    if (j.contains("output_dir")) cfg.output_dir = j.at("output_dir").get<std::string>();
    cfg.validate();
    return cfg;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open for reading: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ConfigError(path + ": invalid JSON: " + e.what());
    }
    return experiment_config_from_json(j);
}

// ---------------------------------------------------------------------------
// Per-episode metrics.

struct MetricsRow {
    int seed = 0;
    int episode = 0;
    int total_steps = 0;  // environment steps taken within the episode
    double score = 0.0;
    int n_tracks = 0;
    bool objective_valid = false;
    ObjectiveBreakdown objective;
    double epsilon = 0.0;
    double wall_ms = 0.0;
};

inline const std::vector<std::string>& metrics_header() {
    static const std::vector<std::string> h = {"seed",    "episode", "total_steps",
                                               "score",   "n_tracks", "O",
                                               "E_D",     "E_R",      "E_V",
                                               "epsilon", "wall_time_ms"};
    return h;
}

inline void write_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows) {
    std::ofstream out = open_output(path);
    const std::vector<std::string>& h = metrics_header();
    for (size_t i = 0; i < h.size(); ++i) out << (i ? "," : "") << h[i];
    out << '\n';
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (const MetricsRow& r : rows) {
        double o = r.objective_valid ? r.objective.total : nan;
        double ed = r.objective_valid ? r.objective.e_d : nan;
        double er = r.objective_valid ? r.objective.e_r : nan;
        double ev = r.objective_valid ? r.objective.e_v : nan;
        out << r.seed << ',' << r.episode << ',' << r.total_steps << ','
            << format_double(r.score) << ',' << r.n_tracks << ',' << format_double(o) << ','
            << format_double(ed) << ',' << format_double(er) << ',' << format_double(ev)
            << ',' << format_double(r.epsilon) << ',' << format_double(r.wall_ms) << '\n';
    }
    if (!out) throw IoError("failed while writing " + path);
}

// ---------------------------------------------------------------------------
// Running one variant across seeds.

struct VariantResult {
    Variant variant = Variant::olrl;
    std::vector<MetricsRow> rows;  // one per (seed, episode)
    double final_score_mean = 0.0;  // over each seed's last episode
    double final_score_std = 0.0;   // sample standard deviation
};

namespace detail {

inline void dump_agent_artifacts(const Agent& agent, const ExperimentConfig& cfg,
                                 const std::string& dir) {
    write_tracklets_jsonl(dir + "/tracklets.jsonl", agent.tracker().tracklets());
    ExperienceSet set = build_experiences(agent.tracker().tracklets(), agent.map(),
                                          agent.buffer(), agent.config().gamma,
                                          cfg.objective.state);
    write_experiences_jsonl(dir + "/experiences.jsonl", set);
    if (agent.models().trained) write_models_json(dir + "/models.json", agent.models());
    write_objective_trace_csv(dir + "/objective_trace.csv", agent.objective_trace());
}

inline void finalize_scores(VariantResult& res, int episodes, int n_seeds) {
    std::vector<double> finals;
    for (const MetricsRow& r : res.rows)
        if (r.episode == episodes - 1) finals.push_back(r.score);
    double mean = 0.0;
    for (double s : finals) mean += s;
    mean /= double(finals.size());
    double var = 0.0;
    for (double s : finals) var += sqr(s - mean);
    res.final_score_mean = mean;
    res.final_score_std = n_seeds > 1 ? std::sqrt(var / double(n_seeds - 1)) : 0.0;
}

}  // namespace detail

// Runs one variant for every seed. When artifacts_dir is non-empty, the
// seed-0 run's tracklet archive, experience log, model snapshot, and merge
// trace are written there.
inline VariantResult run_variant(const ExperimentConfig& cfg, Variant v,
                                 const std::string& artifacts_dir = "") {
    cfg.validate();
    const int episodes = cfg.total_steps / cfg.env.episode_len;
    AgentConfig agent_cfg = variant_agent_config(cfg.agent, v);
    VariantResult res;
    res.variant = v;
    for (int seed = 0; seed < cfg.n_seeds; ++seed) {
        EnvConfig env_cfg = cfg.env;
        env_cfg.seed = mix_seed({cfg.env.seed, uint64_t(seed), 17});
        Environment env(env_cfg);
        Agent agent(agent_cfg, cfg.tracker, cfg.objective, mix_seed({uint64_t(seed), 29}));
        for (int e = 0; e < episodes; ++e) {
            EpisodeStats st =
                agent.run_episode(env, mix_seed({uint64_t(seed), uint64_t(e), 41}));
            MetricsRow row;
            row.seed = seed;
            row.episode = e;
            row.total_steps = st.steps;
            row.score = st.score;
            row.n_tracks = st.n_tracks;
            row.objective_valid = st.objective_valid;
            row.objective = st.objective;
            row.epsilon = st.epsilon;
            row.wall_ms = st.wall_ms;
            res.rows.push_back(row);
        }
        if (seed == 0 && !artifacts_dir.empty())
            detail::dump_agent_artifacts(agent, cfg, artifacts_dir);
    }
    detail::finalize_scores(res, episodes, cfg.n_seeds);
    return res;
}

struct ExperimentSummary {
    std::vector<VariantResult> variants;
};

inline void write_summary_csv(const std::string& path, const ExperimentSummary& summary,
                              int n_seeds) {
    std::ofstream out = open_output(path);
    out << "variant,final_score_mean,final_score_std,n_seeds\n";
    for (const VariantResult& r : summary.variants)
        out << variant_name(r.variant) << ',' << format_double(r.final_score_mean) << ','
            << format_double(r.final_score_std) << ',' << n_seeds << '\n';
    if (!out) throw IoError("failed while writing " + path);
}

// Runs every configured variant, writing metrics_<variant>.csv per variant,
// summary.csv across variants, and the first variant's seed-0 artifacts.
inline ExperimentSummary run_experiment(const ExperimentConfig& cfg,
                                        const std::string& out_dir) {
    cfg.validate();
    std::filesystem::create_directories(out_dir);
    ExperimentSummary summary;
    bool first = true;
    for (Variant v : cfg.variants) {
        VariantResult res = run_variant(cfg, v, first ? out_dir : std::string());
        first = false;
        write_metrics_csv(out_dir + "/metrics_" + variant_name(v) + ".csv", res.rows);
        summary.variants.push_back(std::move(res));
    }
    write_summary_csv(out_dir + "/summary.csv", summary, cfg.n_seeds);
    return summary;
}

// ---------------------------------------------------------------------------
// Open-loop dynamics evaluation.
//
// Training mirrors the learning loop minus planning: random-action episodes
// with map merge rounds and classifier promotion after each, then the object
// models are fit once under the final map and frozen. Each trial plays a
// fresh episode (a random warmup of 50-150 steps plus the 100-step horizon,
// all random actions), folds the episode's new track groups into the frozen
// tracks wherever the predictive objective allows -- the same mechanism that
// carries object identity across training episodes -- and then rolls the
// models forward open loop (averaging 10 sampled rollouts) against the
// actions the environment actually received. Reported per horizon: mean
// distance between predicted and observed track positions, over all tracks
// and over the agent's own track, next to a constant-velocity extrapolation
// of the same start states.

struct HorizonErrorRow {
    int horizon = 0;
    double model_all = 0.0;
    double model_agent = 0.0;
    double baseline_all = 0.0;
    double baseline_agent = 0.0;
    int n_all = 0;    // (trial, track) pairs scored at this horizon
    int n_agent = 0;  // trials where the agent's track was scored
};

struct DynamicsEval {
    std::vector<HorizonErrorRow> rows;  // horizons 1..horizon
    int n_trials = 0;
};

// The evaluation protocol. Defaults are the reported setting; tests shrink
// them to keep the suite fast.
struct EvalDynamicsParams {
    int trials = 100;
    int horizon = 100;
    int warmup_min = 50;
    int warmup_max = 150;
    int rollouts = 10;

    void validate() const {
        if (trials < 1) throw ConfigError("trials must be >= 1");
        if (horizon < 1) throw ConfigError("horizon must be >= 1");
        if (warmup_min < 2 || warmup_max < warmup_min)
            throw ConfigError("warmup range must satisfy 2 <= min <= max");
        if (rollouts < 1) throw ConfigError("rollouts must be >= 1");
    }
};

namespace detail {

// The track whose mask overlaps the agent body's rendered pixels most, or -1.
inline int find_agent_track(const std::vector<TrackObservation>& obs, int limit,
                            const std::vector<int>& labels, int w) {
    int best = -1, best_overlap = 0;
    for (int k = 0; k < limit && k < int(obs.size()); ++k) {
        if (!obs[size_t(k)].present) continue;
        const BitMask& m = obs[size_t(k)].mask;
        int overlap = 0;
        for (int y = 0; y < m.height(); ++y)
            for (int x = 0; x < m.width(); ++x)
                if (m.test(x, y) && labels[size_t(y) * size_t(w) + size_t(x)] == 0) ++overlap;
        if (overlap > best_overlap) {
            best_overlap = overlap;
            best = k;
        }
    }
    return best;
}

// Fold track groups made of recent tracklets (id >= min_tracklet_id) into a
// frozen track when doing so does not worsen the predictive objective by more
// than the acceptance slack. Only such new groups are ever merged away, and
// group numbering follows the smallest member tracklet id, so tracks below
// frozen_tracks keep their indices -- the frozen models stay aligned with the
// map.
inline TrackletMap fold_new_groups(const std::vector<Tracklet>& tracklets, TrackletMap map,
                                   const ReplayBuffer& buffer, const ObjectiveConfig& cfg,
                                   int frozen_tracks, int min_tracklet_id) {
    if (map.n_tracks() <= frozen_tracks || frozen_tracks == 0) return map;
    ObjectiveBreakdown current = evaluate_map(tracklets, map, buffer, cfg);
    int g = frozen_tracks;
    while (g < map.n_tracks()) {
        // Groups with no tracklet from the current episode have no
        // observations in the buffer to judge a merge by; leave them be.
        const std::vector<std::vector<int>> groups = map.groups();
        if (groups[size_t(g)].back() < min_tracklet_id) {
            ++g;
            continue;
        }
        int best = -1;
        ObjectiveBreakdown best_scored;
        for (int a = 0; a < frozen_tracks; ++a) {
            TrackletMap candidate = map.merged(a, g, tracklets);
            ObjectiveBreakdown scored = evaluate_map(tracklets, candidate, buffer, cfg);
            if (scored.total <= current.total + cfg.c &&
                (best < 0 || scored.total < best_scored.total)) {
                best = a;
                best_scored = scored;
            }
        }
        if (best >= 0) {
            // Group g is absorbed; the next unexamined group slides into its
            // slot, so g is re-examined rather than advanced.
            map = map.merged(best, g, tracklets);
            current = best_scored;
        } else {
            ++g;
        }
    }
    return map;
}

}  // namespace detail

inline DynamicsEval eval_dynamics(const ExperimentConfig& cfg,
                                  const EvalDynamicsParams& params = {}) {
    cfg.validate();
    params.validate();
    if (cfg.env.episode_len < params.warmup_max + params.horizon)
        throw ConfigError("episode_len must cover warmup_max + horizon");
    if (cfg.env.episode_len + 1 >= kEpisodeStride)
        throw ConfigError("episode_len must be shorter than the episode stride");
    const int kEvalTrials = params.trials;
    const int kEvalHorizon = params.horizon;

    Environment env(cfg.env);
    Tracker tracker(cfg.tracker);
    TrackletMap map;
    ReplayBuffer buffer;
    ObjectiveConfig ocfg = cfg.objective;
    ocfg.gamma = cfg.agent.gamma;  // one discount throughout, as in the agent
    Rng policy_rng(mix_seed({cfg.env.seed, 7}));
    Rng merge_rng(mix_seed({cfg.env.seed, 13}));
    std::set<std::pair<int, int>> promoted_pairs;

    // Training phase: stride-spaced random-action episodes with the learning
    // loop's own merge rounds between them.
    const int n_episodes = cfg.total_steps / cfg.env.episode_len;
    int episode_index = 0;
    auto play_episode = [&](uint64_t episode_seed, int n_steps, auto&& on_step) {
        EpisodeLog log;
        log.t_base = episode_index * kEpisodeStride;
        log.episode_seed = episode_seed;
        ++episode_index;
        Frame frame = env.reset(episode_seed);
        tracker.observe(frame, log.t_base);
        for (int i = 0; i < n_steps; ++i) {
            on_step(i);
            Action a = Action(policy_rng.uniform_int(kNumActions));
            StepResult sr = env.step(a);
            tracker.observe(sr.frame, log.t_base + i + 1);
            log.actions.push_back(a);
            log.rewards.push_back(sr.reward);
            if (sr.done) break;
        }
        log.n_frames = int(log.actions.size()) + 1;
        return log;
    };
    for (int e = 0; e < n_episodes; ++e) {
        buffer.episodes.push_back(play_episode(mix_seed({cfg.env.seed, uint64_t(e), 17}),
                                               cfg.env.episode_len, [](int) {}));
        const std::vector<Tracklet>& ts = tracker.tracklets();
        map = map.extended(ts);
        if (buffer.episodes.size() >= 2 && cfg.agent.merge_rounds_per_episode > 0) {
            bool new_promotions = false;
            for (int r = 0; r < cfg.agent.merge_rounds_per_episode; ++r) {
                OptimizeResult res = optimize_map(ts, map, buffer, ocfg, merge_rng);
                map = res.map;
                for (const std::pair<int, int>& pr : res.promotions)
                    if (promoted_pairs.insert(pr).second) {
                        tracker.promote_pair(pr.first, pr.second);
                        new_promotions = true;
                    }
            }
            if (new_promotions) tracker.refit_classifiers();
        }
    }
    ExperienceSet set =
        build_experiences(tracker.tracklets(), map, buffer, cfg.agent.gamma, ocfg.state);
    DynamicsModel dyn = fit_dynamics(set, ocfg.grid, ocfg.split_seed);
    PresenceAppearance pa =
        fit_presence_and_appearance(set, cfg.env.render_h, cfg.env.render_w);
    const int n_model_tracks = map.n_tracks();

    std::vector<double> sum_model(kEvalHorizon + 1, 0.0), sum_base(kEvalHorizon + 1, 0.0);
    std::vector<double> sum_model_agent(kEvalHorizon + 1, 0.0),
        sum_base_agent(kEvalHorizon + 1, 0.0);
    std::vector<int> n_all(kEvalHorizon + 1, 0), n_agent(kEvalHorizon + 1, 0);

    Rng trial_rng(mix_seed({cfg.env.seed, 19}));
    for (int trial = 0; trial < kEvalTrials; ++trial) {
        const int warmup = params.warmup_min +
                           trial_rng.uniform_int(params.warmup_max - params.warmup_min + 1);
        const int first_new_tracklet = int(tracker.tracklets().size());
        std::vector<int> labels_at_start;
        EpisodeLog log = play_episode(mix_seed({cfg.env.seed, uint64_t(trial), 23}),
                                      warmup + kEvalHorizon, [&](int i) {
                                          if (i == warmup) labels_at_start = env.labels_now();
                                      });
        const int t_start = log.t_base + warmup;
        std::vector<Action> seq(log.actions.begin() + warmup, log.actions.end());

        // Carry identity into the trial: fold its fresh track groups into the
        // frozen tracks wherever the objective allows.
        const std::vector<Tracklet>& ts = tracker.tracklets();
        ReplayBuffer fold_buffer;
        fold_buffer.episodes = buffer.episodes;
        fold_buffer.episodes.push_back(log);
        map = detail::fold_new_groups(ts, map.extended(ts), fold_buffer, ocfg,
                                      n_model_tracks, first_new_tracklet);

        std::vector<TrackObservation> w2 = apply_map(ts, map, t_start - 2);
        std::vector<TrackObservation> w1 = apply_map(ts, map, t_start - 1);
        std::vector<TrackObservation> w0 = apply_map(ts, map, t_start);
        ObjectState state = extract_state(w0, w1, w2, t_start, ocfg.state);
        PlanState start = make_plan_state(state, w0, n_model_tracks);
        const int agent_track =
            detail::find_agent_track(w0, n_model_tracks, labels_at_start, cfg.env.render_w);

        // Model prediction: mean position over rollouts, per track and horizon.
        std::vector<std::vector<Vec2>> pred_sum(
            size_t(kEvalHorizon) + 1, std::vector<Vec2>(size_t(n_model_tracks), Vec2{}));
        std::vector<std::vector<int>> pred_n(size_t(kEvalHorizon) + 1,
                                             std::vector<int>(size_t(n_model_tracks), 0));
        Rng roll_rng(mix_seed({cfg.env.seed, uint64_t(trial), 31}));
        for (int r = 0; r < params.rollouts; ++r) {
            PlanState cur = start;
            for (int h = 1; h <= kEvalHorizon; ++h) {
                cur = sample_transition(dyn, pa, cur, seq[size_t(h - 1)], roll_rng,
                                        ocfg.state);
                for (int k = 0; k < n_model_tracks; ++k) {
                    if (!cur.s.present[size_t(k)]) continue;
                    pred_sum[size_t(h)][size_t(k)].x += cur.s.pos[size_t(k)].x;
                    pred_sum[size_t(h)][size_t(k)].y += cur.s.pos[size_t(k)].y;
                    ++pred_n[size_t(h)][size_t(k)];
                }
            }
        }

        // Ground truth: the tracked positions along the actions actually taken.
        for (int h = 1; h <= kEvalHorizon; ++h) {
            std::vector<TrackObservation> wh = apply_map(ts, map, t_start + h);
            for (int k = 0; k < n_model_tracks; ++k) {
                if (!state.present[size_t(k)]) continue;       // need a start position
                if (pred_n[size_t(h)][size_t(k)] == 0) continue;  // model says gone
                if (!wh[size_t(k)].present) continue;             // truth unavailable
                Vec2 actual = wh[size_t(k)].median;
                Vec2 pred{pred_sum[size_t(h)][size_t(k)].x / pred_n[size_t(h)][size_t(k)],
                          pred_sum[size_t(h)][size_t(k)].y / pred_n[size_t(h)][size_t(k)]};
                Vec2 p0 = state.pos[size_t(k)];
                Vec2 v0 = state.has_vel[size_t(k)] ? state.vel[size_t(k)] : Vec2{};
                Vec2 base{p0.x + v0.x * h, p0.y + v0.y * h};
                double model_err = std::hypot(pred.x - actual.x, pred.y - actual.y);
                double base_err = std::hypot(base.x - actual.x, base.y - actual.y);
                sum_model[size_t(h)] += model_err;
                sum_base[size_t(h)] += base_err;
                ++n_all[size_t(h)];
                if (k == agent_track) {
                    sum_model_agent[size_t(h)] += model_err;
                    sum_base_agent[size_t(h)] += base_err;
                    ++n_agent[size_t(h)];
                }
            }
        }
    }

    DynamicsEval out;
    out.n_trials = kEvalTrials;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (int h = 1; h <= kEvalHorizon; ++h) {
        HorizonErrorRow row;
        row.horizon = h;
        row.n_all = n_all[size_t(h)];
        row.n_agent = n_agent[size_t(h)];
        row.model_all = row.n_all ? sum_model[size_t(h)] / row.n_all : nan;
        row.baseline_all = row.n_all ? sum_base[size_t(h)] / row.n_all : nan;
        row.model_agent = row.n_agent ? sum_model_agent[size_t(h)] / row.n_agent : nan;
        row.baseline_agent = row.n_agent ? sum_base_agent[size_t(h)] / row.n_agent : nan;
        out.rows.push_back(row);
    }
    return out;
}

inline const std::vector<std::string>& dynamics_header() {
    static const std::vector<std::string> h = {"horizon",      "model_all", "model_agent",
                                               "baseline_all", "baseline_agent", "n_all",
                                               "n_agent"};
    return h;
}

inline void write_dynamics_csv(const std::string& path, const DynamicsEval& eval) {
    std::ofstream out = open_output(path);
    const std::vector<std::string>& h = dynamics_header();
    for (size_t i = 0; i < h.size(); ++i) out << (i ? "," : "") << h[i];
    out << '\n';
    for (const HorizonErrorRow& r : eval.rows)
        out << r.horizon << ',' << format_double(r.model_all) << ','
            << format_double(r.model_agent) << ',' << format_double(r.baseline_all) << ','
            << format_double(r.baseline_agent) << ',' << r.n_all << ',' << r.n_agent << '\n';
    if (!out) throw IoError("failed while writing " + path);
}

// ---------------------------------------------------------------------------
// Frame dumping: the first `steps` frames of one random-action episode.

inline std::vector<std::string> dump_frames(const EnvConfig& cfg, int steps,
                                            const std::string& out_dir) {
    cfg.validate();
    if (steps < 1) throw ConfigError("steps must be >= 1");
    std::filesystem::create_directories(out_dir);
    Environment env(cfg);
    Rng rng(mix_seed({cfg.seed, 43}));
    std::vector<std::string> written;
    Frame f = env.reset(cfg.seed);
    for (int i = 0; i < steps; ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "frame_%05d", i);
        std::string stem = out_dir + "/" + name;
        write_frame_pngs(stem, f);
        written.push_back(stem + ".png");
        written.push_back(stem + "_depth.png");
        if (i + 1 < steps) {
            StepResult sr = env.step(Action(rng.uniform_int(kNumActions)));
            f = sr.frame;
            if (sr.done) break;
        }
    }
    return written;
}

}  // namespace olrl
