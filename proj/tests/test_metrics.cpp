#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "noniso/metrics.hpp"
#include "noniso/synthetic.hpp"

#include <cmath>

using namespace noniso;

namespace {

Motion constant_motion(int frames, int joints, double value) {
    Motion m(frames, joints);
    for (double& v : m.a) v = value;
    return m;
}

Motion offset_x(const Motion& base, double dx) {
    Motion out = base;
    for (int f = 0; f < out.frames; ++f)
        for (int j = 0; j < out.joints; ++j) out.at(f, j, 0) += dx;
    return out;
}

} // namespace

TEST_CASE("ade/fde hand case: single joint offset by one meter") {
    Motion gt(2, 1);
    gt.at(0, 0, 0) = 0.0;
    gt.at(1, 0, 0) = 0.5;
    const Motion pred = offset_x(gt, 1.0);
    // One joint: per-frame norm / sqrt(1) = 1 for every frame.
    CHECK(ade({pred}, gt) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(fde({pred}, gt) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("ade with the ground truth among predictions is zero") {
    Rng rng(1);
    Motion gt(4, 3);
    for (double& v : gt.a) v = rng.normal();
    PredictionSet preds = {offset_x(gt, 0.7), gt, offset_x(gt, -0.2)};
    CHECK(ade(preds, gt) == 0.0);
    CHECK(fde(preds, gt) == 0.0);
}

TEST_CASE("duplicated wrong samples score the same as one") {
    Rng rng(2);
    Motion gt(4, 3);
    for (double& v : gt.a) v = rng.normal();
    const Motion wrong = offset_x(gt, 0.3);
    CHECK(ade({wrong}, gt) == ade({wrong, wrong, wrong}, gt));
}

TEST_CASE("mmgt thresholds: empty at 0+, complete at infinity") {
    DatasetConfig cfg;
    cfg.train_groups = 1;
    cfg.val_groups = 0;
    cfg.test_groups = 6;
    // One segment per group: all pasts distinct, so a vanishing threshold
    // really does empty every list (groups would plant exact duplicates at
    // distance zero, which any positive delta keeps).
    cfg.segments_per_group = 1;
    Rng rng(3);
    const Dataset data = make_dataset(cfg, rng);

    const MMGTIndex tiny = build_mmgt(data.test, 1e-300);
    for (const auto& lst : tiny.neighbors) CHECK(lst.empty());

    const MMGTIndex all = build_mmgt(data.test, 1e300);
    for (size_t i = 0; i < all.neighbors.size(); ++i) {
        CHECK(all.neighbors[i].size() == data.test.segments.size() - 1);
        for (int n : all.neighbors[i]) CHECK(n != static_cast<int>(i));
    }

    CHECK_THROWS_AS(build_mmgt(data.test, 0.0), ValidationError);
}

TEST_CASE("mmade reduces to ade on a singleton mmgt") {
    Rng rng(4);
    Motion gt(5, 3);
    for (double& v : gt.a) v = rng.normal();
    PredictionSet preds = {offset_x(gt, 0.4), offset_x(gt, -0.1)};
    const std::vector<const Motion*> mm = {&gt};
    CHECK(mmade(preds, mm) == ade(preds, gt));
    CHECK(mmfde(preds, mm) == fde(preds, gt));
}

TEST_CASE("mmade hand case: min over the 2x2 cross product") {
    Motion base(1, 1);
    const Motion p1 = offset_x(base, 1.0);
    const Motion p2 = offset_x(base, 5.0);
    const Motion g1 = offset_x(base, 3.0);
    const Motion g2 = offset_x(base, 7.0);
    // distances: |1-3|=2, |1-7|=6, |5-3|=2, |5-7|=2 -> min = 2
    const std::vector<const Motion*> mm = {&g1, &g2};
    CHECK(mmade({p1, p2}, mm) == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("apd basics") {
    Rng rng(5);
    Motion a(3, 2);
    for (double& v : a.a) v = rng.normal();
    const Motion b = offset_x(a, 1.0);

    CHECK(apd(PredictionSet{a}) == 0.0);
    CHECK(apd(PredictionSet{a, a, a}) == 0.0);

    // Two samples at pinned distance d -> APD = d (both ordered pairs).
    const double d = sequence_distance(a, b);
    CHECK(apd(PredictionSet{a, b}) == doctest::Approx(d).epsilon(1e-15));

    // Permutation invariance in the sample axis.
    const Motion c = offset_x(a, -0.5);
    CHECK(apd(PredictionSet{a, b, c}) == doctest::Approx(apd(PredictionSet{c, a, b})).epsilon(1e-15));

    // Translation invariance under a common shift.
    PredictionSet shifted = {offset_x(a, 2.0), offset_x(b, 2.0), offset_x(c, 2.0)};
    CHECK(apd(shifted) == doctest::Approx(apd(PredictionSet{a, b, c})).epsilon(1e-12));
}

TEST_CASE("apde compares prediction and mmgt diversity") {
    Rng rng(6);
    Motion a(3, 2);
    for (double& v : a.a) v = rng.normal();
    const Motion b = offset_x(a, 1.0);
    PredictionSet preds = {a, b};
    const std::vector<const Motion*> mm = {&a, &b};
    CHECK(apde(preds, mm) == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("cmd hand cases") {
    // Frozen predictions: M_f = 0, CMD = mbar * F(F-1)/2.
    const Motion frozen = constant_motion(5, 2, 1.0);
    const double mbar = 0.25;
    CHECK(cmd({frozen, frozen}, mbar) ==
          doctest::Approx(mbar * 5.0 * 4.0 / 2.0).epsilon(1e-14));

    // F=3 with velocities a then b: CMD = 2|a-mbar| + |b-mbar|.
    Motion m(3, 1);
    m.at(0, 0, 0) = 0.0;
    m.at(1, 0, 0) = 0.3; // a = 0.3
    m.at(2, 0, 0) = 0.3 + 0.1; // b = 0.1
    const double want = 2.0 * std::fabs(0.3 - mbar) + std::fabs(0.1 - mbar);
    CHECK(cmd({m}, mbar) == doctest::Approx(want).epsilon(1e-13));

    // Matching the dataset velocity exactly cancels.
    Motion steady(4, 1);
    for (int f = 0; f < 4; ++f) steady.at(f, 0, 0) = 0.25 * f;
    CHECK(cmd({steady}, 0.25) == doctest::Approx(0.0).epsilon(1e-13));
}

TEST_CASE("body realism: stretch and jitter hand cases") {
    Skeleton s = make_chain_skeleton(2, {1.0});

    // One bone stretched by +10% in every frame.
    Motion stretched(4, 2);
    for (int f = 0; f < 4; ++f) stretched.at(f, 1, 0) = 1.1;
    const BodyRealism br = body_realism({stretched}, s);
    CHECK(br.str_mean == doctest::Approx(10.0).epsilon(1e-12));
    CHECK(br.str_rmse == doctest::Approx(10.0).epsilon(1e-12));
    CHECK(br.jit_mean == doctest::Approx(0.0).epsilon(1e-12));

    // Alternating +10% / -10%: jitter of 20% per transition.
    Motion wobble(4, 2);
    for (int f = 0; f < 4; ++f) wobble.at(f, 1, 0) = f % 2 == 0 ? 1.1 : 0.9;
    const BodyRealism bw = body_realism({wobble}, s);
    CHECK(bw.jit_mean == doctest::Approx(20.0).epsilon(1e-12));
    CHECK(bw.str_mean == doctest::Approx(10.0).epsilon(1e-12));
}

TEST_CASE("mae angle hand cases") {
    Skeleton s = make_chain_skeleton(2, {1.0});
    Motion gt(2, 2);
    for (int f = 0; f < 2; ++f) gt.at(f, 1, 0) = 1.0; // bone along +x

    CHECK(mae_angle({gt}, gt, s).degrees == doctest::Approx(0.0).epsilon(1e-12));

    Motion rot90(2, 2);
    for (int f = 0; f < 2; ++f) rot90.at(f, 1, 1) = 1.0; // bone along +y
    CHECK(mae_angle({rot90}, gt, s).degrees == doctest::Approx(90.0).epsilon(1e-12));

    Motion rot30(2, 2);
    for (int f = 0; f < 2; ++f) {
        rot30.at(f, 1, 0) = std::cos(M_PI / 6.0);
        rot30.at(f, 1, 1) = std::sin(M_PI / 6.0);
    }
    CHECK(mae_angle({rot30}, gt, s).degrees == doctest::Approx(30.0).epsilon(1e-10));

    // Zero-length predicted bone counts 90 degrees and raises the flag.
    Motion collapsed(2, 2);
    const MaeResult r = mae_angle({collapsed}, gt, s);
    CHECK(r.degrees == doctest::Approx(90.0).epsilon(1e-12));
    CHECK(r.had_degenerate_bone);
}

TEST_CASE("validity curve and delta apd on a mixed set") {
    Skeleton s = make_chain_skeleton(2, {1.0});
    Motion rigid_a(3, 2);
    for (int f = 0; f < 3; ++f) rigid_a.at(f, 1, 0) = 1.0;
    Motion rigid_b = offset_x(rigid_a, 0.5);
    // Alternates between +15% stretch and exact length: worst stretch and
    // worst jitter are both 0.15.
    Motion bad(3, 2);
    bad.at(0, 1, 0) = 1.15;
    bad.at(1, 1, 0) = 1.0;
    bad.at(2, 1, 0) = 1.15;

    const PredictionSet preds = {rigid_a, rigid_b, bad};
    const std::vector<double> thresholds = {0.10};

    const auto valid = validity_curve(preds, s, thresholds, BoneErrorKind::stretch);
    CHECK(valid[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));

    const auto dapd = delta_apd(preds, s, thresholds, BoneErrorKind::jitter);
    CHECK(dapd[0] == doctest::Approx(sequence_distance(rigid_a, rigid_b)).epsilon(1e-13));

    // Rigid predictions are valid at every threshold including zero.
    const auto all_valid =
        validity_curve({rigid_a, rigid_b}, s, {0.0, 0.1}, BoneErrorKind::stretch);
    CHECK(all_valid[0] == 1.0);
    CHECK(all_valid[1] == 1.0);

    // At an unbounded threshold delta-APD equals plain APD.
    const auto loose = delta_apd(preds, s, {1e300}, BoneErrorKind::jitter);
    CHECK(loose[0] == doctest::Approx(apd(preds)).epsilon(1e-15));

    // Fewer than two valid motions yield zero.
    const auto none = delta_apd({bad}, s, {1e-6}, BoneErrorKind::jitter);
    CHECK(none[0] == 0.0);
}

TEST_CASE("validity curve is nondecreasing in the threshold") {
    Rng rng(7);
    const Skeleton s = make_chain_skeleton(4, {0.4, 0.4, 0.4});
    PredictionSet preds;
    for (int i = 0; i < 6; ++i) {
        Motion m(8, 4);
        for (double& v : m.a) v = rng.normal();
        preds.push_back(std::move(m));
    }
    std::vector<double> thresholds;
    for (int i = 0; i <= 40; ++i) thresholds.push_back(0.05 * i);
    for (BoneErrorKind kind : {BoneErrorKind::stretch, BoneErrorKind::jitter}) {
        const auto curve = validity_curve(preds, s, thresholds, kind);
        for (size_t i = 1; i < curve.size(); ++i) CHECK(curve[i] >= curve[i - 1]);
    }
}

TEST_CASE("evaluate_predictions aggregates and is thread-count invariant") {
    DatasetConfig cfg;
    cfg.train_groups = 1;
    cfg.val_groups = 0;
    cfg.test_groups = 4;
    cfg.segments_per_group = 3;
    cfg.future_frames = 12;
    cfg.noise_std = 0.0;
    Rng rng(8);
    const Dataset data = make_dataset(cfg, rng);

    // Noisy copies of the ground truth as predictions.
    Rng prng(9);
    std::vector<PredictionSet> preds;
    for (const Segment& seg : data.test.segments) {
        PredictionSet set;
        for (int i = 0; i < 4; ++i) {
            Motion m = seg.future;
            for (double& v : m.a) v += 0.01 * prng.normal();
            set.push_back(std::move(m));
        }
        preds.push_back(std::move(set));
    }

    const MetricsReport serial = evaluate_predictions(preds, data.test, data.skeleton, 0.5, 1);
    const MetricsReport parallel = evaluate_predictions(preds, data.test, data.skeleton, 0.5, 4);
    CHECK(serial.ade == parallel.ade);
    CHECK(serial.apd == parallel.apd);
    CHECK(serial.cmd == parallel.cmd);
    CHECK(serial.str_mean == parallel.str_mean);
    CHECK(serial.segment_count == 12);
    CHECK(serial.per_segment.size() == 12);
    CHECK(serial.ade > 0.0);
    CHECK(serial.ade < 0.1);

    const std::string json = metrics_report_json(serial);
    CHECK(json.find("\"ade\"") != std::string::npos);
    CHECK(json.find("\"jit_rmse\"") != std::string::npos);

    // Exact GT copies: every precision metric collapses to zero.
    std::vector<PredictionSet> perfect;
    for (const Segment& seg : data.test.segments)
        perfect.push_back(PredictionSet(3, seg.future));
    const MetricsReport zero = evaluate_predictions(perfect, data.test, data.skeleton, 0.5, 1);
    CHECK(zero.ade == 0.0);
    CHECK(zero.fde == 0.0);
    CHECK(zero.apd == 0.0);
    CHECK(zero.str_mean < 1e-10);
    CHECK(zero.jit_mean < 1e-10);
}

TEST_CASE("segment count mismatches are rejected") {
    DatasetConfig cfg;
    cfg.train_groups = 1;
    cfg.val_groups = 0;
    cfg.test_groups = 2;
    Rng rng(10);
    const Dataset data = make_dataset(cfg, rng);
    std::vector<PredictionSet> too_few(3);
    CHECK_THROWS_AS(evaluate_predictions(too_few, data.test, data.skeleton, 0.5, 1),
                    ValidationError);
}
