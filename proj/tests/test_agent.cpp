#include "olrl/agent.hpp"

#include <gtest/gtest.h>

#include <optional>
#include <utility>
#include <vector>

#include "support/scripted.hpp"

using namespace olrl;
using namespace olrl::testsupport;

namespace {

// Models fitted from a scripted world where pos_x moves track 0 by +3 and
// every other action leaves it in place, and where touching track 1 pays 1.
AgentModels approach_models() {
    ExperienceSet set;
    set.n_tracks = 2;
    // Dynamics volume: random pos_x / noop walks. Plenty of rows so the
    // action-conditioned tree beats the mixture marginal despite leaf
    // smoothing.
    Rng coin(41);
    for (int e = 0; e < 125; ++e) {
        std::vector<ObjectState> states;
        std::vector<Action> actions;
        Vec2 p{5.0, 20.0};
        Vec2 v{0.0, 0.0};
        bool has_v = false;
        for (int t = 0; t <= 20; ++t) {
            states.push_back(make_state(
                t, {p, Vec2{50.0, 50.0}},
                {has_v ? std::optional<Vec2>(v) : std::nullopt, Vec2{0.0, 0.0}}));
            if (t < 20) {
                bool go = coin.uniform() < 0.5;
                actions.push_back(go ? Action::pos_x : Action::noop);
                v = {go ? 3.0 : 0.0, 0.0};
                p += v;
                has_v = true;
            }
        }
        push_episode(set, std::move(states), std::move(actions),
                     std::vector<double>(20, 0.0));
    }
    // Reward/value signal: touching pays 1, being apart pays 0.
    for (int e = 0; e < 30; ++e) {
        push_episode(set,
                     {make_state(0, {Vec2{20.0, 20.0}, Vec2{23.0, 20.0}}, {}, {{0, 1}}),
                      make_state(1, {Vec2{20.0, 20.0}, Vec2{23.0, 20.0}}, {}, {{0, 1}})},
                     {Action::noop}, {1.0});
        push_episode(set,
                     {make_state(0, {Vec2{20.0, 20.0}, Vec2{40.0, 40.0}}),
                      make_state(1, {Vec2{20.0, 20.0}, Vec2{40.0, 40.0}})},
                     {Action::noop}, {0.0});
    }
    AgentModels m;
    m.dyn = fit_dynamics(set, VelocityGrid::standard(), 7);
    m.pa = fit_presence_and_appearance(set, 64, 64);
    m.reward = fit_pairwise(set, PairTarget::reward, 7);
    m.value = fit_pairwise(set, PairTarget::value, 7);
    m.trained = true;
    return m;
}

// Track 0 one +3 step left of touching track 1.
PlanState approach_start() {
    std::vector<TrackObservation> obs(2);
    obs[0].present = true;
    obs[0].mask = block64(19, 19, 3);  // median (20, 20)
    obs[1].present = true;
    obs[1].mask = block64(24, 19, 3);  // median (25, 20), Chebyshev gap 3
    ObjectState full = make_state(0, {Vec2{20.0, 20.0}, Vec2{25.0, 20.0}},
                                  {Vec2{0.0, 0.0}, Vec2{0.0, 0.0}});
    return make_plan_state(full, obs, 2);
}

}  // namespace

TEST(PlanValueTest, DiscountedRolloutScore) {
    // One step of reward 0, one of reward 1, then a terminal value of 2
    // under gamma 0.95: 0 + 0.95*1 + 0.95^2*2 = 2.755.
    EXPECT_NEAR(plan_value({0.0, 1.0}, 2.0, 0.95), 2.755, 1e-12);
    EXPECT_DOUBLE_EQ(plan_value({}, 5.0, 0.95), 5.0);
    EXPECT_DOUBLE_EQ(plan_value({1.0}, 0.0, 0.5), 1.0);
    EXPECT_DOUBLE_EQ(plan_value({1.0, 1.0, 1.0}, 0.0, 1.0), 3.0);
}

TEST(EpsilonScheduleTest, LinearDecayToTheFloor) {
    AgentConfig cfg;
    cfg.epsilon_decay_steps = 60;
    Agent agent(cfg, TrackerConfig{}, ObjectiveConfig{}, 1);
    EXPECT_DOUBLE_EQ(agent.epsilon_at(0), 1.0);
    EXPECT_DOUBLE_EQ(agent.epsilon_at(30), 1.0 + (0.05 - 1.0) * 0.5);
    EXPECT_DOUBLE_EQ(agent.epsilon_at(60), 0.05);
    EXPECT_DOUBLE_EQ(agent.epsilon_at(6000), 0.05);
}

TEST(PlanActionTest, StepsTowardTheRewardingContact) {
    AgentModels m = approach_models();
    ASSERT_TRUE(m.dyn.at(0, 0).tree.has_value());  // action-conditioned motion
    PlanState start = approach_start();
    AgentConfig cfg;
    EXPECT_EQ(plan_action(m, start, cfg, 99), Action::pos_x);
}

TEST(PlanActionTest, RepeatedCallsWithTheSameTagAgree) {
    AgentModels m = approach_models();
    PlanState start = approach_start();
    AgentConfig cfg;
    Action first = plan_action(m, start, cfg, 5);
    EXPECT_EQ(plan_action(m, start, cfg, 5), first);
    EXPECT_EQ(plan_action(m, start, cfg, 5), first);
}

TEST(PlanActionTest, ArgmaxIsInvariantToAConstantValueShift) {
    AgentModels m = approach_models();
    PlanState start = approach_start();
    AgentConfig cfg;
    Action base = plan_action(m, start, cfg, 11);
    AgentModels shifted = m;
    shifted.value.no_contact_fallback += 7.0;
    for (PairModel& p : shifted.value.pairs)
        if (p.fitted && !p.tree) p.mean += 7.0;
    EXPECT_EQ(plan_action(shifted, start, cfg, 11), base);
}

TEST(PlanActionTest, UntrainedModelsAreRejected) {
    AgentModels m;
    PlanState start = approach_start();
    EXPECT_THROW(plan_action(m, start, AgentConfig{}, 0), UsageError);
}

namespace {

EnvConfig small_env_config() {
    EnvConfig ec;
    ec.task = Task::gather;
    ec.n_targets = 1;
    ec.episode_len = 30;
    ec.render_h = 64;
    ec.render_w = 64;
    ec.noise_std = 0.0;
    ec.seed = 42;
    return ec;
}

AgentConfig fast_agent_config() {
    AgentConfig cfg;
    cfg.epsilon_decay_steps = 60;
    cfg.samples_per_path = 3;  // keep the test quick
    return cfg;
}

}  // namespace

TEST(AgentTest, FirstEpisodeTrainsModelsWithoutScoringTheObjective) {
    Environment env(small_env_config());
    Agent agent(fast_agent_config(), TrackerConfig{}, ObjectiveConfig{}, 7);
    EpisodeStats s0 = agent.run_episode(env, 100);
    EXPECT_EQ(s0.episode, 0);
    EXPECT_EQ(s0.steps, 30);
    EXPECT_DOUBLE_EQ(s0.epsilon, 1.0);
    EXPECT_FALSE(s0.objective_valid);
    EXPECT_TRUE(agent.models().trained);
    EXPECT_EQ(agent.buffer().episodes.size(), 1u);
    EXPECT_GE(s0.n_tracks, 2);  // at least table + some bodies
    EXPECT_EQ(agent.map().n_tracks(), s0.n_tracks);
    EXPECT_EQ(agent.global_step(), 30);
}

TEST(AgentTest, SecondEpisodeScoresTheObjectiveAndMergesAreApplied) {
    Environment env(small_env_config());
    Agent agent(fast_agent_config(), TrackerConfig{}, ObjectiveConfig{}, 7);
    agent.run_episode(env, 100);
    int tracklets_after_first = int(agent.tracker().tracklets().size());
    EpisodeStats s1 = agent.run_episode(env, 101);
    EXPECT_EQ(s1.episode, 1);
    EXPECT_TRUE(s1.objective_valid);
    EXPECT_GE(s1.objective.total, 0.0);
    EXPECT_GT(int(agent.tracker().tracklets().size()), 0);
    EXPECT_GE(tracklets_after_first, s1.n_tracks);  // merging only shrinks
    EXPECT_EQ(agent.global_step(), 60);
    EXPECT_DOUBLE_EQ(s1.epsilon, agent.epsilon_at(30));
}

TEST(AgentTest, TwoAgentsWithTheSameSeedsAreBitIdentical) {
    EnvConfig ec = small_env_config();
    Environment env_a(ec), env_b(ec);
    Agent a(fast_agent_config(), TrackerConfig{}, ObjectiveConfig{}, 7);
    Agent b(fast_agent_config(), TrackerConfig{}, ObjectiveConfig{}, 7);
    EpisodeStats last_a, last_b;
    for (int e = 0; e < 2; ++e) {
        last_a = a.run_episode(env_a, uint64_t(200 + e));
        last_b = b.run_episode(env_b, uint64_t(200 + e));
    }
    EXPECT_EQ(last_a.score, last_b.score);
    EXPECT_EQ(last_a.n_tracks, last_b.n_tracks);
    EXPECT_EQ(last_a.objective.total, last_b.objective.total);
    EXPECT_EQ(last_a.objective.e_d, last_b.objective.e_d);
    ASSERT_EQ(a.buffer().episodes.size(), b.buffer().episodes.size());
    for (size_t e = 0; e < a.buffer().episodes.size(); ++e) {
        EXPECT_EQ(a.buffer().episodes[e].actions, b.buffer().episodes[e].actions);
        EXPECT_EQ(a.buffer().episodes[e].rewards, b.buffer().episodes[e].rewards);
    }
    EXPECT_TRUE(a.map() == b.map());
}

TEST(AgentTest, OverlongEpisodesAreRejected) {
    EnvConfig ec = small_env_config();
    ec.episode_len = kEpisodeStride;  // would collide with the next episode
    Environment env(ec);
    Agent agent(fast_agent_config(), TrackerConfig{}, ObjectiveConfig{}, 7);
    EXPECT_THROW(agent.run_episode(env, 1), ConfigError);
}
