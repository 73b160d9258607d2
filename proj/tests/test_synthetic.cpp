#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "noniso/metrics.hpp"
#include "noniso/synthetic.hpp"

#include <cmath>

using namespace noniso;

namespace {

double bone_length(const Motion& m, const Skeleton& s, int f, int b) {
    const auto [i, j] = s.edges[b];
    double sq = 0.0;
    for (int d = 0; d < 3; ++d) {
        const double diff = m.at(f, j, d) - m.at(f, i, d);
        sq += diff * diff;
    }
    return std::sqrt(sq);
}

} // namespace

TEST_CASE("chain skeleton wiring") {
    const Skeleton s = make_chain_skeleton(3, {0.5, 0.5});
    CHECK(s.edges == std::vector<std::pair<int, int>>{{0, 1}, {1, 2}});
    CHECK(s.joints() == 3);

    const Skeleton two = make_chain_skeleton(2, {0.4});
    CHECK(two.bones() == 1);

    CHECK_THROWS_AS(make_chain_skeleton(3, {0.5, 0.0}), ValidationError);
    CHECK_THROWS_AS(make_chain_skeleton(3, {0.5}), ValidationError);
    CHECK_THROWS_AS(make_chain_skeleton(1, {}), ValidationError);
}

TEST_CASE("clean kinematics keeps bone lengths exact") {
    const Skeleton s = make_chain_skeleton(5, {0.4, 0.35, 0.3, 0.25});
    Rng rng(1);
    const Motion m = gen_motion(s, 0, 40, 0.0, rng);
    for (int f = 0; f < m.frames; ++f)
        for (int b = 0; b < s.bones(); ++b)
            CHECK(std::fabs(bone_length(m, s, f, b) - s.bone_lengths[b]) < 1e-12);

    // Body realism on clean rigid motion is exactly noise-free.
    const BodyRealism br = body_realism({m}, s);
    CHECK(br.str_mean < 1e-10);
}

TEST_CASE("noise bound on jittered bone lengths") {
    const Skeleton s = make_chain_skeleton(4, {0.4, 0.4, 0.4});
    Rng rng(2);
    const double noise = 0.005;
    const Motion m = gen_motion(s, 0, 60, noise, rng);
    int outliers = 0;
    for (int f = 0; f < m.frames; ++f)
        for (int b = 0; b < s.bones(); ++b)
            if (std::fabs(bone_length(m, s, f, b) - s.bone_lengths[b]) > 4.0 * noise) ++outliers;
    // the 2*noise_std bound holds with high probability; allow rare tails
    CHECK(outliers <= 2);
}

TEST_CASE("same mode and seed reproduce the motion bitwise") {
    const Skeleton s = make_chain_skeleton(4, {0.3, 0.3, 0.3});
    Rng a(7), b(7);
    const Motion m1 = gen_motion(s, 1, 30, 0.01, a);
    const Motion m2 = gen_motion(s, 1, 30, 0.01, b);
    CHECK(m1.a == m2.a);
}

TEST_CASE("modes share the past and diverge in the future") {
    const Skeleton s = make_chain_skeleton(7, {0.4, 0.38, 0.36, 0.34, 0.32, 0.3});
    const int branch = 12, frames = 60;
    Rng a(3), b(3);
    const Motion m0 = gen_motion(s, 0, frames, 0.0, a, branch);
    const Motion m1 = gen_motion(s, 1, frames, 0.0, b, branch);

    // Identical prefix through the branch frame.
    for (int f = 0; f <= branch; ++f)
        for (int j = 0; j < s.joints(); ++j)
            for (int d = 0; d < 3; ++d) CHECK(m0.at(f, j, d) == m1.at(f, j, d));

    // Futures genuinely diverge; pinned regression bound from one run.
    const Motion fut0 = m0.slice(branch, frames - branch);
    const Motion fut1 = m1.slice(branch, frames - branch);
    CHECK(sequence_distance(fut0, fut1) > 0.1);
}

TEST_CASE("dataset generation is reproducible and validates config") {
    DatasetConfig cfg;
    cfg.train_groups = 3;
    cfg.val_groups = 1;
    cfg.test_groups = 2;
    cfg.noise_std = 0.01;

    Rng a(11), b(11);
    const Dataset d1 = make_dataset(cfg, a);
    const Dataset d2 = make_dataset(cfg, b);
    REQUIRE(d1.train.segments.size() == d2.train.segments.size());
    for (size_t i = 0; i < d1.train.segments.size(); ++i) {
        CHECK(d1.train.segments[i].past.a == d2.train.segments[i].past.a);
        CHECK(d1.train.segments[i].future.a == d2.train.segments[i].future.a);
        CHECK(d1.train.segments[i].mode_label == d2.train.segments[i].mode_label);
    }
    CHECK(d1.test.mean_velocity == d2.test.mean_velocity);
    CHECK(d1.test.mean_velocity > 0.0);

    DatasetConfig bad = cfg;
    bad.gen_frames = 10; // < past + future
    Rng r(1);
    CHECK_THROWS_AS(make_dataset(bad, r), ValidationError);

    DatasetConfig badw = cfg;
    badw.mode_weights = {0.5, 0.2};
    CHECK_THROWS_AS(make_dataset(badw, r), ValidationError);
}

TEST_CASE("unimodal datasets have a single label") {
    DatasetConfig cfg;
    cfg.modes = 1;
    cfg.train_groups = 2;
    cfg.val_groups = 0;
    cfg.test_groups = 2;
    Rng rng(5);
    const Dataset data = make_dataset(cfg, rng);
    for (const Segment& seg : data.test.segments) CHECK(seg.mode_label == 0);
}

TEST_CASE("mode frequencies stay within the binomial envelope") {
    DatasetConfig cfg;
    cfg.modes = 3;
    cfg.train_groups = 250; // 1000 segments at 4 per group
    cfg.val_groups = 0;
    cfg.test_groups = 1;
    Rng rng(1);
    const Dataset data = make_dataset(cfg, rng);
    const int n = static_cast<int>(data.train.segments.size());
    REQUIRE(n == 1000);
    std::vector<int> counts(3, 0);
    for (const Segment& seg : data.train.segments) ++counts[seg.mode_label];
    const double p = 1.0 / 3.0;
    const double sigma = std::sqrt(n * p * (1.0 - p));
    for (int m = 0; m < 3; ++m) CHECK(std::fabs(counts[m] - n * p) < 3.0 * sigma);
}

TEST_CASE("groups plant duplicate pasts that mmgt recovers") {
    DatasetConfig cfg;
    cfg.train_groups = 1;
    cfg.val_groups = 0;
    cfg.test_groups = 5;
    cfg.segments_per_group = 3;
    cfg.noise_std = 0.0;
    Rng rng(17);
    const Dataset data = make_dataset(cfg, rng);
    const auto& segs = data.test.segments;
    REQUIRE(segs.size() == 15);

    // Bitwise-equal pasts within each group of three.
    for (int g = 0; g < 5; ++g)
        for (int k = 1; k < 3; ++k) CHECK(segs[g * 3].past.a == segs[g * 3 + k].past.a);

    // A tiny delta recovers exactly the same-group futures.
    const MMGTIndex idx = build_mmgt(data.test, 1e-9);
    for (int i = 0; i < 15; ++i) {
        const int g = i / 3;
        std::vector<int> want;
        for (int k = 0; k < 3; ++k)
            if (g * 3 + k != i) want.push_back(g * 3 + k);
        CHECK(idx.neighbors[i] == want);
    }
}

TEST_CASE("futures are contiguous with the past") {
    DatasetConfig cfg;
    cfg.train_groups = 1;
    cfg.val_groups = 0;
    cfg.test_groups = 1;
    cfg.noise_std = 0.0;
    Rng rng(19);
    const Dataset data = make_dataset(cfg, rng);
    for (const Segment& seg : data.test.segments) {
        CHECK(seg.past.frames == cfg.past_frames);
        CHECK(seg.future.frames == cfg.future_frames);
        // The generator is smooth, so the first future frame stays near the
        // last past frame (well under one frame of maximal joint travel).
        double gap = 0.0;
        for (int j = 0; j < seg.past.joints; ++j)
            for (int d = 0; d < 3; ++d)
                gap = std::max(gap, std::fabs(seg.future.at(0, j, d) -
                                              seg.past.at(cfg.past_frames - 1, j, d)));
        CHECK(gap < 0.3);
    }
}
