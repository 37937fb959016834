#include "olrl/objstate.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

namespace olrl {
namespace {

BitMask mask_of(std::initializer_list<Vec2i> pts, int w = 64, int h = 64) {
    BitMask m(h, w);
    for (Vec2i p : pts) m.set(p.x, p.y);
    return m;
}

BitMask block_mask(int x0, int y0, int w, int h, int fw = 64, int fh = 64) {
    BitMask m(fh, fw);
    for (int y = y0; y < y0 + h; ++y)
        for (int x = x0; x < x0 + w; ++x) m.set(x, y);
    return m;
}

Tracklet tracklet_from(int id, int t0, const std::vector<BitMask>& masks) {
    Tracklet l;
    l.id = id;
    for (size_t i = 0; i < masks.size(); ++i) {
        SegmentMask s = make_segment_mask(masks[i]);
        ZernikeDescriptor z{};
        l.append(t0 + int(i), std::move(s), z);
    }
    return l;
}

TEST(TrackletMapTest, IdentityCompactionAndBackground) {
    std::vector<Tracklet> ts;
    ts.push_back(tracklet_from(3, 0, {block_mask(0, 0, 50, 50)}));  // 2500 px
    ts.push_back(tracklet_from(7, 0, {block_mask(55, 55, 3, 3)}));  // 9 px
    ts.push_back(tracklet_from(5, 2, {block_mask(55, 5, 2, 2)}));   // 4 px
    TrackletMap m = TrackletMap::identity(ts);
    EXPECT_EQ(m.n_tracks(), 3);
    EXPECT_EQ(m.track_of(3), 0);
    EXPECT_EQ(m.track_of(5), 1);
    EXPECT_EQ(m.track_of(7), 2);
    EXPECT_EQ(m.background_track(), 0);
    EXPECT_THROW(m.track_of(99), UsageError);
}

TEST(TrackletMapTest, ExtendedKeepsExistingTrackIds) {
    std::vector<Tracklet> ts;
    ts.push_back(tracklet_from(0, 0, {block_mask(0, 0, 40, 40)}));
    ts.push_back(tracklet_from(1, 0, {block_mask(50, 50, 4, 4)}));
    TrackletMap m = TrackletMap::identity(ts).merged(0, 1, ts);
    EXPECT_EQ(m.n_tracks(), 1);
    ts.push_back(tracklet_from(2, 5, {block_mask(30, 2, 3, 3)}));
    ts.push_back(tracklet_from(3, 6, {block_mask(2, 30, 3, 3)}));
    TrackletMap ext = m.extended(ts);
    EXPECT_EQ(ext.n_tracks(), 3);
    EXPECT_EQ(ext.track_of(0), 0);  // old merged group keeps id 0
    EXPECT_EQ(ext.track_of(1), 0);
    EXPECT_EQ(ext.track_of(2), 1);
    EXPECT_EQ(ext.track_of(3), 2);
    EXPECT_EQ(ext.background_track(), 0);
}

TEST(TrackletMapTest, MergeCompactsByMinTrackletId) {
    std::vector<Tracklet> ts;
    for (int i = 0; i < 4; ++i)
        ts.push_back(tracklet_from(i, 0, {block_mask(i * 10, 0, 4 + i, 4)}));
    TrackletMap m = TrackletMap::identity(ts);
    TrackletMap m2 = m.merged(1, 3, ts);
    EXPECT_EQ(m2.n_tracks(), 3);
    EXPECT_EQ(m2.track_of(0), 0);
    EXPECT_EQ(m2.track_of(1), 1);
    EXPECT_EQ(m2.track_of(3), 1);
    EXPECT_EQ(m2.track_of(2), 2);  // renumbered after compaction
    EXPECT_THROW(m.merged(2, 2, ts), UsageError);
    EXPECT_THROW(m.merged(0, 9, ts), UsageError);
    // Groups listing is consistent with the mapping.
    auto g = m2.groups();
    ASSERT_EQ(g.size(), 3u);
    EXPECT_EQ(g[1], (std::vector<int>{1, 3}));
}

TEST(ApplyMapTest, IdentityMapReproducesTrackletMasks) {
    std::vector<Tracklet> ts;
    ts.push_back(tracklet_from(0, 0, {block_mask(0, 0, 6, 6), block_mask(1, 0, 6, 6)}));
    ts.push_back(tracklet_from(1, 0, {block_mask(20, 20, 5, 5)}));
    TrackletMap m = TrackletMap::identity(ts);
    auto obs = apply_map(ts, m, 0);
    ASSERT_EQ(obs.size(), 2u);
    EXPECT_TRUE(obs[0].present);
    EXPECT_TRUE(obs[0].mask == ts[0].entries[0].seg.mask);
    EXPECT_TRUE(obs[1].mask == ts[1].entries[0].seg.mask);
    auto obs1 = apply_map(ts, m, 1);
    EXPECT_TRUE(obs1[0].present);
    EXPECT_FALSE(obs1[1].present);  // tracklet 1 has no entry at t=1
}

TEST(ApplyMapTest, MergedCoexistingTrackletsUnionAndConservePixels) {
    std::vector<Tracklet> ts;
    ts.push_back(tracklet_from(0, 0, {block_mask(0, 0, 6, 6)}));     // 36 px
    ts.push_back(tracklet_from(1, 0, {block_mask(30, 30, 4, 4)}));   // 16 px
    TrackletMap merged = TrackletMap::identity(ts).merged(0, 1, ts);
    auto obs = apply_map(ts, merged, 0);
    ASSERT_EQ(obs.size(), 1u);
    EXPECT_EQ(obs[0].pixel_count, 52);  // disjoint masks: counts add
}

TEST(ApplyMapTest, DistractorIntoBackgroundGrowsItByItsCount) {
    std::vector<Tracklet> ts;
    ts.push_back(tracklet_from(0, 0, {block_mask(0, 0, 60, 50)}));   // 3000 px background
    ts.push_back(tracklet_from(1, 0, {block_mask(10, 55, 5, 2)}));   // 10 px distractor
    TrackletMap id = TrackletMap::identity(ts);
    auto before = apply_map(ts, id, 0);
    TrackletMap merged = id.merged(id.background_track(), 1, ts);
    auto after = apply_map(ts, merged, 0);
    ASSERT_EQ(after.size(), 1u);
    EXPECT_EQ(after[0].pixel_count, before[0].pixel_count + before[1].pixel_count);
}

TEST(ApplyMapTest, PixelConservationUnderArbitraryMaps) {
    // Partitioned synthetic frames: three tracklets tile disjoint areas.
    std::vector<Tracklet> ts;
    ts.push_back(tracklet_from(0, 0, {block_mask(0, 0, 64, 32), block_mask(0, 0, 64, 30)}));
    ts.push_back(tracklet_from(1, 0, {block_mask(0, 32, 64, 32), block_mask(0, 30, 64, 34)}));
    ts.push_back(tracklet_from(2, 1, {block_mask(10, 10, 5, 5)}));
    // note: tracklet 2 overlaps none of the others? It must not, to keep the
    // partition property; place it inside a hole carved below.
    ts[0].entries[1].seg = make_segment_mask([&] {
        BitMask m = block_mask(0, 0, 64, 30);
        for (int y = 10; y < 15; ++y)
            for (int x = 10; x < 15; ++x) m.reset(x, y);
        return m;
    }());
    int total_t1 = 0;
    for (const Tracklet& l : ts) {
        int k = l.entry_at(1);
        if (k >= 0) total_t1 += l.entries[size_t(k)].seg.pixel_count;
    }
    TrackletMap id = TrackletMap::identity(ts);
    for (const TrackletMap& m :
         {id, id.merged(0, 1, ts), id.merged(0, 2, ts), id.merged(1, 2, ts),
          id.merged(0, 1, ts).merged(0, 1, ts)}) {
        auto obs = apply_map(ts, m, 1);
        int total = 0;
        for (const auto& o : obs) total += o.pixel_count;
        EXPECT_EQ(total, total_t1);
    }
}

TEST(ObjStateTest, MedianRobustToBackgroundAbsorption) {
    // 3000-pixel background swallowing a 10-pixel distractor moves the
    // median by at most one pixel per dimension.
    std::vector<Tracklet> ts;
    ts.push_back(tracklet_from(0, 0, {block_mask(2, 2, 60, 50)}));
    ts.push_back(tracklet_from(1, 0, {block_mask(5, 58, 5, 2)}));
    TrackletMap id = TrackletMap::identity(ts);
    auto before = apply_map(ts, id, 0);
    TrackletMap merged = id.merged(0, 1, ts);
    auto after = apply_map(ts, merged, 0);
    EXPECT_LE(std::abs(after[0].median.x - before[0].median.x), 1.0);
    EXPECT_LE(std::abs(after[0].median.y - before[0].median.y), 1.0);
    // Brute-force oracle: recompute the merged median from raw pixels.
    std::vector<int> xs, ys;
    for (const Tracklet& l : ts)
        l.entries[0].seg.mask.for_each([&](int x, int y) {
            xs.push_back(x);
            ys.push_back(y);
        });
    std::sort(xs.begin(), xs.end());
    std::sort(ys.begin(), ys.end());
    EXPECT_EQ(after[0].median.x, double(xs[(xs.size() - 1) / 2]));
    EXPECT_EQ(after[0].median.y, double(ys[(ys.size() - 1) / 2]));
}

TEST(ContactsTest, AdjacencyExamplesAndSymmetry) {
    auto obs_of = [](std::initializer_list<BitMask> masks) {
        std::vector<TrackObservation> v;
        for (const BitMask& m : masks) {
            TrackObservation o;
            o.present = true;
            o.mask = m;
            v.push_back(o);
        }
        return v;
    };
    auto c1 = compute_contacts(obs_of({mask_of({{0, 0}}), mask_of({{1, 1}})}), 2);
    EXPECT_EQ(c1[0], 1);
    auto c2 = compute_contacts(obs_of({mask_of({{0, 0}}), mask_of({{5, 5}})}), 2);
    EXPECT_EQ(c2[0], 0);
    // Exactly at the radius boundary.
    auto c3 = compute_contacts(obs_of({mask_of({{0, 0}}), mask_of({{2, 2}})}), 2);
    EXPECT_EQ(c3[0], 1);
    auto c4 = compute_contacts(obs_of({mask_of({{0, 0}}), mask_of({{3, 0}})}), 2);
    EXPECT_EQ(c4[0], 0);
    // Three mutually adjacent clouds: all pairs set.
    auto c5 = compute_contacts(
        obs_of({mask_of({{10, 10}}), mask_of({{11, 11}}), mask_of({{9, 11}})}), 2);
    EXPECT_EQ(c5[pair_index(0, 1, 3)], 1);
    EXPECT_EQ(c5[pair_index(0, 2, 3)], 1);
    EXPECT_EQ(c5[pair_index(1, 2, 3)], 1);
}

TEST(ContactsTest, MatchesBruteForceOnRandomClouds) {
    Rng rng(42);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<TrackObservation> obs;
        std::vector<std::vector<Vec2i>> clouds;
        int k = 3 + int(rng.uniform_int(3));
        for (int i = 0; i < k; ++i) {
            BitMask m(64, 64);
            int cx = int(rng.uniform_int(56)), cy = int(rng.uniform_int(56));
            for (int n = 0; n < 8; ++n)
                m.set(cx + int(rng.uniform_int(8)), cy + int(rng.uniform_int(8)));
            TrackObservation o;
            o.present = true;
            o.mask = m;
            clouds.push_back(m.pixels());
            obs.push_back(std::move(o));
        }
        auto c = compute_contacts(obs, 2);
        for (int i = 0; i < k; ++i)
            for (int j = i + 1; j < k; ++j) {
                bool expect = false;
                for (Vec2i a : clouds[size_t(i)])
                    for (Vec2i b : clouds[size_t(j)])
                        expect |= std::max(std::abs(a.x - b.x), std::abs(a.y - b.y)) <= 2;
                EXPECT_EQ(c[pair_index(i, j, k)] != 0, expect);
            }
    }
}

TEST(ExtractStateTest, MedianVelocityAccelerationExamples) {
    auto obs_at = [](double x, double y) {
        TrackObservation o;
        o.present = true;
        o.mask = mask_of({{int(x), int(y)}});
        o.median = {x, y};
        o.pixel_count = 1;
        return std::vector<TrackObservation>{o};
    };
    // Point cloud {(1,1),(1,2),(1,3)} -> position (1,2).
    std::vector<TrackObservation> cloud(1);
    cloud[0].present = true;
    cloud[0].mask = mask_of({{1, 1}, {1, 2}, {1, 3}});
    cloud[0].median = cloud[0].mask.median();
    ObjectState s0 = extract_state(cloud, {}, {}, 0);
    EXPECT_EQ(s0.pos_of(0), (Vec2{1, 2}));
    EXPECT_FALSE(s0.has_vel[0]);

    // p(t)=(5,5), p(t-1)=(3,5) -> v=(2,0); acceleration needs one more frame.
    ObjectState s1 = extract_state(obs_at(5, 5), obs_at(3, 5), {}, 1);
    EXPECT_EQ(s1.vel_of(0), (Vec2{2, 0}));
    EXPECT_FALSE(s1.has_acc[0]);
    EXPECT_THROW(s1.acc_of(0), UsageError);

    ObjectState s2 = extract_state(obs_at(8, 5), obs_at(5, 5), obs_at(3, 5), 2);
    EXPECT_EQ(s2.vel_of(0), (Vec2{3, 0}));
    EXPECT_EQ(s2.acc_of(0), (Vec2{1, 0}));

    // Per-dimension clamping: an observed jump of 42 stores 30.
    ObjectState s3 = extract_state(obs_at(44, 5), obs_at(2, 5), {}, 1);
    EXPECT_EQ(s3.vel_of(0), (Vec2{30, 0}));
}

TEST(ExtractStateTest, FiniteDifferencesExactOnSyntheticSequences) {
    Rng rng(7);
    for (int trial = 0; trial < 10; ++trial) {
        // A random integer walk with occasional dropouts.
        int n = 20;
        std::vector<bool> present(static_cast<size_t>(n));
        std::vector<Vec2> p(static_cast<size_t>(n));
        Vec2 cur{32, 32};
        for (int t = 0; t < n; ++t) {
            present[size_t(t)] = rng.uniform() > 0.2;
            cur += {double(int(rng.uniform_int(7)) - 3), double(int(rng.uniform_int(7)) - 3)};
            cur.x = std::clamp(cur.x, 0.0, 63.0);
            cur.y = std::clamp(cur.y, 0.0, 63.0);
            p[size_t(t)] = cur;
        }
        std::vector<Tracklet> ts;
        Tracklet l;
        l.id = 0;
        for (int t = 0; t < n; ++t) {
            if (!present[size_t(t)]) continue;
            SegmentMask s = make_segment_mask(mask_of({{int(p[size_t(t)].x), int(p[size_t(t)].y)}}));
            l.append(t, std::move(s), {});
        }
        if (l.entries.empty()) continue;
        ts.push_back(std::move(l));
        TrackletMap m = TrackletMap::identity(ts);
        std::vector<ObjectState> states = build_states(ts, m, 0, n);
        for (int t = 0; t < n; ++t) {
            const ObjectState& s = states[size_t(t)];
            EXPECT_EQ(s.present[0] != 0, present[size_t(t)]);
            bool expect_vel = present[size_t(t)] && t >= 1 && present[size_t(t - 1)];
            EXPECT_EQ(s.has_vel[0] != 0, expect_vel);
            if (expect_vel)
                EXPECT_EQ(s.vel_of(0), p[size_t(t)] - p[size_t(t - 1)]);
            bool expect_acc = expect_vel && t >= 2 && present[size_t(t - 2)];
            EXPECT_EQ(s.has_acc[0] != 0, expect_acc);
            if (expect_acc)
                EXPECT_EQ(s.acc_of(0),
                          (p[size_t(t)] - p[size_t(t - 1)]) - (p[size_t(t - 1)] - p[size_t(t - 2)]));
        }
    }
}

TEST(ExtractStateTest, RelativeQuantitiesFollowTheInvariant) {
    auto two = [](Vec2 a, Vec2 b) {
        std::vector<TrackObservation> v(2);
        v[0].present = v[1].present = true;
        v[0].mask = mask_of({{int(a.x), int(a.y)}});
        v[1].mask = mask_of({{int(b.x), int(b.y)}});
        v[0].median = a;
        v[1].median = b;
        return v;
    };
    ObjectState s = extract_state(two({10, 20}, {14, 17}), two({8, 21}, {15, 15}), {}, 1);
    EXPECT_EQ(s.rel_pos(0, 1), s.pos_of(1) - s.pos_of(0));
    EXPECT_EQ(s.rel_vel(0, 1), s.vel_of(1) - s.vel_of(0));
    EXPECT_EQ(s.rel_pos(0, 1), (Vec2{4, -3}));
}

TEST(McReturnsTest, HandExamplesAndRecurrence) {
    std::vector<double> g = mc_returns({0, 0, 1}, 0.95);
    ASSERT_EQ(g.size(), 3u);
    EXPECT_NEAR(g[0], 0.9025, 1e-12);
    EXPECT_NEAR(g[1], 0.95, 1e-12);
    EXPECT_NEAR(g[2], 1.0, 1e-12);

    EXPECT_EQ(mc_returns({0, 0, 0, 0}, 0.95), (std::vector<double>{0, 0, 0, 0}));
    EXPECT_EQ(mc_returns({1, 2, 3}, 0.0), (std::vector<double>{1, 2, 3}));

    Rng rng(3);
    std::vector<double> r(50);
    for (double& x : r) x = rng.normal();
    std::vector<double> gg = mc_returns(r, 0.95);
    for (size_t t = 0; t + 1 < gg.size(); ++t)
        EXPECT_EQ(gg[t], r[t] + 0.95 * gg[t + 1]);  // exact, by right-to-left evaluation
    EXPECT_EQ(gg.back(), r.back());
    EXPECT_THROW(mc_returns({1.0}, 1.5), ConfigError);
}

TEST(BuildExperiencesTest, TransitionsAlignWithEpisodes) {
    std::vector<Tracklet> ts;
    std::vector<BitMask> walk;
    for (int t = 0; t < 5; ++t) walk.push_back(block_mask(10 + 2 * t, 10, 4, 4));
    ts.push_back(tracklet_from(0, 0, walk));
    ts.push_back(tracklet_from(1, 100, {walk[0], walk[1], walk[2]}));
    TrackletMap m = TrackletMap::identity(ts);
    ReplayBuffer buf;
    buf.episodes.push_back({0, 5, {Action::pos_x, Action::pos_x, Action::noop, Action::neg_y},
                            {0, 1, 0, 1}, 11});
    buf.episodes.push_back({100, 3, {Action::noop, Action::pos_y}, {0, 1}, 12});
    ExperienceSet set = build_experiences(ts, m, buf, 0.5);
    ASSERT_EQ(set.items.size(), 6u);
    for (const Experience& x : set.items) {
        EXPECT_EQ(x.next->t, x.state->t + 1);
        EXPECT_EQ(x.state, &set.episode_states[size_t(x.episode)][size_t(x.t)]);
    }
    // Returns per episode: [0+0.5*(1+0.5*(0+0.5)), ...] computed by hand.
    EXPECT_NEAR(set.items[0].ret, 0.625, 1e-12);
    EXPECT_NEAR(set.items[1].ret, 1.25, 1e-12);
    EXPECT_NEAR(set.items[4].ret, 0.5, 1e-12);
    EXPECT_NEAR(set.items[5].ret, 1.0, 1e-12);
    // Tracklet 1 only exists in episode 2's frames.
    EXPECT_FALSE(set.episode_states[0][0].present[1]);
    EXPECT_TRUE(set.episode_states[1][0].present[1]);

    ReplayBuffer bad;
    bad.episodes.push_back({0, 5, {Action::noop}, {0}, 1});
    EXPECT_THROW(build_experiences(ts, m, bad, 0.5), UsageError);
}

TEST(StateParamsTest, Validation) {
    StateParams p;
    p.contact_radius = -1;
    EXPECT_THROW(p.validate(), ConfigError);
    p = {};
    p.v_clamp = 0;
    EXPECT_THROW(p.validate(), ConfigError);
}

}  // namespace
}  // namespace olrl
