#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "noniso/diffusion.hpp"
#include "noniso/synthetic.hpp"

#include <cmath>

using namespace noniso;

namespace {

NoiseSchedule chain_schedule(int joints, GammaKind kind, int steps = 10) {
    std::vector<double> lengths(static_cast<size_t>(joints) - 1, 1.0);
    const CorrelationModel corr = correlation_from_matrix(
        build_adjacency(make_chain_skeleton(joints, lengths)), NormKind::spectral);
    return build_schedule(corr, cosine_alpha_schedule(steps), gamma_schedule(steps, kind));
}

} // namespace

TEST_CASE("forward with zero noise is pure decay") {
    const NoiseSchedule s = chain_schedule(3, GammaKind::blend);
    Rng rng(1);
    const Mat x0 = normal_matrix(3, 2, rng);
    const Mat zero(3, 2);
    for (int t : {1, 5, 10}) {
        const LatentState xt = forward_sample(x0, t, zero, s);
        const Mat want = scale(x0, std::sqrt(s.alpha.alpha_bar[t]));
        CHECK(max_abs_diff(xt.values, want) < 1e-15);
        CHECK(xt.t == t);
    }
}

TEST_CASE("transition with zero noise is per-step decay") {
    const NoiseSchedule s = chain_schedule(3, GammaKind::blend);
    Rng rng(2);
    const Mat x = normal_matrix(3, 2, rng);
    const Mat zero(3, 2);
    const LatentState next = transition_sample(x, 4, zero, s);
    CHECK(max_abs_diff(next.values, scale(x, std::sqrt(s.alpha.alpha[4]))) < 1e-15);
}

TEST_CASE("shape mismatches are rejected") {
    const NoiseSchedule s = chain_schedule(3, GammaKind::blend);
    Rng rng(3);
    const Mat x0 = normal_matrix(4, 2, rng);
    const Mat eps = normal_matrix(4, 2, rng);
    CHECK_THROWS_AS(forward_sample(x0, 1, eps, s), ValidationError);
    const Mat ok = normal_matrix(3, 2, rng);
    CHECK_THROWS_AS(forward_sample(ok, 11, ok, s), ValidationError);
    CHECK_THROWS_AS(forward_sample(ok, 0, ok, s), ValidationError);
}

TEST_CASE("posterior mean collapses at noiseless x_t") {
    for (GammaKind kind : {GammaKind::blend, GammaKind::pure_iso, GammaKind::discarded}) {
        const NoiseSchedule s = chain_schedule(4, kind);
        Rng rng(4);
        const Mat x0 = normal_matrix(4, 3, rng);
        for (int t : {2, 6, 10}) {
            const Mat xt = scale(x0, std::sqrt(s.alpha.alpha_bar[t]));
            const PosteriorParams post = posterior_params({xt, t}, x0, s);
            const Mat want = scale(x0, std::sqrt(s.alpha.alpha_bar[t - 1]));
            CHECK(max_abs_diff(post.mean, want) < 1e-10);
            // The blend gamma hits exactly 1 at t = T, so the zero
            // eigen-mode gets a zero posterior variance there; every other
            // entry is strictly positive.
            for (double v : post.lambda_q) CHECK(v >= 0.0);
            if (t < 10)
                for (double v : post.lambda_q) CHECK(v > 0.0);
        }
    }
}

TEST_CASE("posterior at t=1 returns x0 with zero variance") {
    const NoiseSchedule s = chain_schedule(3, GammaKind::blend);
    Rng rng(5);
    const Mat x0 = normal_matrix(3, 2, rng);
    const Mat xt = normal_matrix(3, 2, rng);
    const PosteriorParams post = posterior_params({xt, 1}, x0, s);
    CHECK(max_abs_diff(post.mean, x0) < 1e-12);
    for (double v : post.lambda_q) CHECK(v == 0.0);
}

TEST_CASE("reverse step: zero noise gives the posterior mean, t=1 the prediction") {
    const NoiseSchedule s = chain_schedule(3, GammaKind::blend);
    Rng rng(6);
    const Mat x0_pred = normal_matrix(3, 2, rng);
    const Mat xt = normal_matrix(3, 2, rng);
    const Mat zero(3, 2);

    const LatentState stepped = reverse_step({xt, 5}, x0_pred, zero, s);
    const PosteriorParams post = posterior_params({xt, 5}, x0_pred, s);
    CHECK(max_abs_diff(stepped.values, post.mean) < 1e-15);
    CHECK(stepped.t == 4);

    const LatentState last = reverse_step({xt, 1}, x0_pred, zero, s);
    CHECK(max_abs_diff(last.values, x0_pred) == 0.0);
    CHECK(last.t == 0);
}

TEST_CASE("prior with zero noise is the zero tensor") {
    const NoiseSchedule s = chain_schedule(3, GammaKind::blend);
    const Mat zero(3, 4);
    const LatentState prior = sample_prior(4, s, zero);
    for (double v : prior.values.a) CHECK(v == 0.0);
    CHECK(prior.t == 10);
}

TEST_CASE("x0_from_noise marginal inverts forward_sample") {
    for (GammaKind kind : {GammaKind::blend, GammaKind::pure_iso, GammaKind::discarded}) {
        const NoiseSchedule s = chain_schedule(5, kind);
        Rng rng(7);
        for (int trial = 0; trial < 10; ++trial) {
            const Mat x0 = normal_matrix(5, 2, rng);
            const Mat eps = normal_matrix(5, 2, rng);
            const int t = 1 + static_cast<int>(rng.uniform_index(10));
            const LatentState xt = forward_sample(x0, t, eps, s);
            const Mat back = x0_from_noise_marginal(xt, eps, s);
            CHECK(max_abs_diff(back, x0) < 1e-10);
        }
    }
}

TEST_CASE("x0_from_noise with zero noise rescales x_t") {
    const NoiseSchedule s = chain_schedule(3, GammaKind::blend);
    Rng rng(8);
    const Mat xt = normal_matrix(3, 2, rng);
    const Mat zero(3, 2);
    const Mat a = x0_from_noise_marginal({xt, 5}, zero, s);
    const Mat b = x0_from_noise_step({xt, 5}, zero, s);
    const Mat want = scale(xt, 1.0 / std::sqrt(s.alpha.alpha_bar[5]));
    CHECK(max_abs_diff(a, want) < 1e-12);
    CHECK(max_abs_diff(b, want) < 1e-12);
}

TEST_CASE("x0_from_noise step variant uses the per-step scale") {
    const NoiseSchedule s = chain_schedule(3, GammaKind::blend);
    Rng rng(9);
    const Mat xt = normal_matrix(3, 1, rng);
    const Mat eps = normal_matrix(3, 1, rng);
    const Mat a = x0_from_noise_marginal({xt, 7}, eps, s);
    const Mat b = x0_from_noise_step({xt, 7}, eps, s);
    // lambda_t != lambda_bar_t for t >= 2, so the two variants must differ.
    CHECK(max_abs_diff(a, b) > 1e-8);
}

TEST_CASE("losses vanish on perfect predictions") {
    const NoiseSchedule s = chain_schedule(4, GammaKind::blend);
    Rng rng(10);
    const Mat x = normal_matrix(4, 3, rng);
    CHECK(loss_x0(x, x, 5, s) == 0.0);
    CHECK(loss_noise(x, x, 5, s) == 0.0);
}

TEST_CASE("loss_x0 reduces to the scalar SNR weighting under pure_iso") {
    const NoiseSchedule s = chain_schedule(4, GammaKind::pure_iso);
    Rng rng(11);
    const Mat x0 = normal_matrix(4, 3, rng);
    const Mat pred = normal_matrix(4, 3, rng);
    for (int t = 1; t <= 10; ++t) {
        double sq = 0.0;
        for (size_t i = 0; i < x0.a.size(); ++i) {
            const double d = pred.a[i] - x0.a[i];
            sq += d * d;
        }
        const double want =
            s.alpha.alpha_bar[t] / (1.0 - s.alpha.alpha_bar[t]) * sq / 3.0;
        CHECK(loss_x0(pred, x0, t, s) == doctest::Approx(want).epsilon(1e-12));
    }
}

TEST_CASE("loss_x0 is invariant under rotation when the covariance is isotropic") {
    // With Sigma_N = I replaced by the pure_iso tables the Mahalanobis
    // weights are uniform, so rotating both arguments changes nothing.
    const NoiseSchedule s = chain_schedule(4, GammaKind::pure_iso);
    Rng rng(12);
    const Mat x0 = normal_matrix(4, 2, rng);
    const Mat pred = normal_matrix(4, 2, rng);
    const Mat& u = s.correlation.eigvecs; // an arbitrary fixed orthogonal matrix
    const double base = loss_x0(pred, x0, 6, s);
    const double rotated = loss_x0(matmul(u, pred), matmul(u, x0), 6, s);
    CHECK(rotated == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("blend-schedule noise weights are nonnegative") {
    const NoiseSchedule s = chain_schedule(5, GammaKind::blend);
    for (int t = 1; t <= 10; ++t)
        for (int k = 0; k < 5; ++k) CHECK(s.loss_weight_noise[t][k] >= 0.0);
}

TEST_CASE("generate is deterministic and honors n") {
    const NoiseSchedule s = chain_schedule(3, GammaKind::blend);
    Rng rng(13);
    const Mat cond = normal_matrix(3, 2, rng);
    const Denoiser oracle = [](const Mat& x_t, const Mat&, int) { return scale(x_t, 0.5); };

    CHECK(generate(oracle, cond, s, 0, 42).empty());

    const std::vector<Mat> a = generate(oracle, cond, s, 5, 42);
    const std::vector<Mat> b = generate(oracle, cond, s, 5, 42);
    REQUIRE(a.size() == 5);
    for (int i = 0; i < 5; ++i) CHECK(max_abs_diff(a[i], b[i]) == 0.0);

    const std::vector<Mat> c = generate(oracle, cond, s, 5, 43);
    CHECK(max_abs_diff(a[0], c[0]) > 1e-12);
}

TEST_CASE("generate reports the failing timestep") {
    const NoiseSchedule s = chain_schedule(3, GammaKind::blend);
    const Mat cond(3, 2);
    const Denoiser broken = [](const Mat&, const Mat&, int t) -> Mat {
        if (t == 7) throw std::runtime_error("boom");
        return Mat(3, 2);
    };
    CHECK_THROWS_WITH_AS(generate(broken, cond, s, 1, 1), doctest::Contains("t=7"),
                         std::runtime_error);
}

TEST_CASE("oracle denoiser rollout contracts to the true x0") {
    // A denoiser that always answers the true x0 drives the reverse chain
    // into a shrinking posterior envelope around it.
    const NoiseSchedule s = chain_schedule(3, GammaKind::pure_iso);
    Rng rng(14);
    const Mat x0_true = normal_matrix(3, 2, rng);
    const Denoiser oracle = [&x0_true](const Mat&, const Mat&, int) { return x0_true; };
    const Mat cond(3, 2);
    const std::vector<Mat> samples = generate(oracle, cond, s, 64, 7);
    for (const Mat& sample : samples) CHECK(max_abs_diff(sample, x0_true) == 0.0);
}

TEST_CASE("rollouts with a noisy oracle stay within the posterior envelope") {
    const NoiseSchedule s = chain_schedule(3, GammaKind::blend);
    Rng rng(15);
    const Mat x0_true = normal_matrix(3, 1, rng);
    // Denoiser answers x0 plus a small perturbation of its input; the final
    // sample must still equal the last prediction exactly (t = 1 contract).
    const Denoiser near_oracle = [&x0_true](const Mat& x_t, const Mat&, int) {
        Mat out = x0_true;
        add_inplace(out, x_t, 1e-3);
        return out;
    };
    const Mat cond(3, 1);
    const std::vector<Mat> samples = generate(near_oracle, cond, s, 16, 11);
    for (const Mat& sample : samples) {
        // Within a loose envelope of the target.
        CHECK(max_abs_diff(sample, x0_true) < 0.5);
    }
}
