#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "noniso/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

using namespace noniso;

namespace {

// Small-but-trainable setup shared by the pipeline tests.
TrainConfig tiny_config() {
    TrainConfig cfg;
    cfg.dataset.joints = 4;
    cfg.dataset.bone_lengths = {0.4, 0.35, 0.3};
    cfg.dataset.past_frames = 6;
    cfg.dataset.future_frames = 12;
    cfg.dataset.modes = 2;
    cfg.dataset.train_groups = 8;
    cfg.dataset.val_groups = 0;
    cfg.dataset.test_groups = 3;
    cfg.dataset.segments_per_group = 2;
    cfg.latent = 4;
    cfg.width = 8;
    cfg.diffusion_steps = 5;
    cfg.ae_epochs = 3;
    cfg.diff_epochs = 2;
    cfg.curriculum_epochs = 2;
    cfg.k = 2;
    cfg.batch = 8;
    cfg.seed = 5;
    return cfg;
}

std::uint64_t hash_params(std::vector<Param*>& ps) {
    std::string bytes;
    for (const Param* p : ps)
        bytes.append(reinterpret_cast<const char*>(p->value.data()), p->value.size() * 8);
    return fnv1a64(bytes);
}

} // namespace

TEST_CASE("train config json round trip") {
    TrainConfig cfg = tiny_config();
    cfg.schedule_kind = GammaKind::pure_noniso;
    cfg.sigma_basis = SigmaBasis::closure;
    cfg.latent_argmin = true;
    save_train_config(cfg, "t_cfg.json");
    const TrainConfig back = load_train_config("t_cfg.json");
    CHECK(back.dataset.joints == cfg.dataset.joints);
    CHECK(back.dataset.bone_lengths == cfg.dataset.bone_lengths);
    CHECK(back.schedule_kind == GammaKind::pure_noniso);
    CHECK(back.sigma_basis == SigmaBasis::closure);
    CHECK(back.latent_argmin == true);
    CHECK(back.k == cfg.k);
    CHECK(back.seed == cfg.seed);
    std::remove("t_cfg.json");

    CHECK_THROWS_AS(load_train_config("missing_config.json"), ValidationError);
}

TEST_CASE("l1 loss and subgradient") {
    Motion a(2, 1);
    Motion b(2, 1);
    a.at(0, 0, 0) = 1.0;
    b.at(0, 0, 0) = 0.5;
    a.at(1, 0, 2) = -2.0;
    // Mean absolute error over 2 frames x 1 joint x 3 dims = 6 entries.
    CHECK(l1_loss(a, b, 2) == doctest::Approx((0.5 + 2.0) / 6.0).epsilon(1e-15));
    const Motion g = l1_loss_grad(a, b, 2);
    CHECK(g.at(0, 0, 0) == doctest::Approx(1.0 / 6.0));
    CHECK(g.at(1, 0, 2) == doctest::Approx(-1.0 / 6.0));
    CHECK(g.at(0, 0, 1) == 0.0);

    // Restricting the frame range ignores later frames.
    CHECK(l1_loss(a, b, 1) == doctest::Approx(0.5 / 3.0).epsilon(1e-15));
}

TEST_CASE("correlation bases differ on a chain") {
    const Skeleton skel = make_chain_skeleton(7, {0.4, 0.4, 0.4, 0.4, 0.4, 0.4});
    const CorrelationModel a = build_correlation(skel, SigmaBasis::adjacency, 0.9, NormKind::spectral);
    const CorrelationModel r = build_correlation(skel, SigmaBasis::closure, 0.9, NormKind::spectral);
    const CorrelationModel h =
        build_correlation(skel, SigmaBasis::masked_closure, 0.9, NormKind::spectral);
    CHECK(max_abs_diff(a.sigma_n, r.sigma_n) > 1e-3);
    CHECK(max_abs_diff(r.sigma_n, h.sigma_n) > 1e-3);
}

TEST_CASE("autoencoder training runs, logs, and is deterministic") {
    const TrainConfig cfg = tiny_config();
    Rng rng(cfg.seed);
    const Dataset data = make_dataset(cfg.dataset, rng);

    std::ostringstream log1, log2;
    AutoencoderBundle b1 = train_autoencoder(cfg, data, &log1);
    AutoencoderBundle b2 = train_autoencoder(cfg, data, &log2);

    CHECK(b1.epoch_loss.size() == 3);
    for (double v : b1.epoch_loss) CHECK(std::isfinite(v));
    CHECK(b1.epoch_loss == b2.epoch_loss);
    CHECK(log1.str() == log2.str());
    CHECK(b1.param_count > 0);

    std::vector<Param*> p1, p2;
    b1.encoder.collect(p1);
    b1.decoder.collect(p1);
    b2.encoder.collect(p2);
    b2.decoder.collect(p2);
    CHECK(hash_params(p1) == hash_params(p2));
}

TEST_CASE("autoencoder overfits a small split") {
    TrainConfig cfg = tiny_config();
    cfg.dataset.train_groups = 5;
    cfg.dataset.segments_per_group = 2; // 10 sequences
    cfg.dataset.noise_std = 0.0;
    // Each epoch shows every sequence once at a random curricular length,
    // so the full-length pattern is visited roughly every 12th epoch; 1600
    // epochs give ~130 visits per pattern, enough to memorize.
    cfg.ae_epochs = 1600;
    cfg.latent = 8;
    cfg.width = 16;
    cfg.curriculum_epochs = 10;
    cfg.batch = 1;
    cfg.lr = 0.01;
    Rng rng(cfg.seed);
    const Dataset data = make_dataset(cfg.dataset, rng);
    const AutoencoderBundle bundle = train_autoencoder(cfg, data, nullptr);

    double total = 0.0;
    for (const Segment& seg : data.train.segments) {
        const Mat z = bundle.encoder.forward(seg.future);
        const Motion recon =
            bundle.decoder.forward(z, seg.past.slice(seg.past.frames - 2, 2));
        total += l1_loss(recon, seg.future, seg.future.frames);
    }
    CHECK(total / data.train.segments.size() < 1e-3);
}

TEST_CASE("denoiser training decreases the loss and freezes the autoencoder") {
    const TrainConfig cfg = tiny_config();
    Rng rng(cfg.seed);
    const Dataset data = make_dataset(cfg.dataset, rng);
    AutoencoderBundle ae = train_autoencoder(cfg, data, nullptr);

    std::vector<Param*> ae_params;
    ae.encoder_ema.collect(ae_params);
    ae.decoder_ema.collect(ae_params);
    const std::uint64_t before = hash_params(ae_params);

    TrainConfig longer = cfg;
    longer.diff_epochs = 4;
    DenoiserBundle diff = train_denoiser(longer, data, ae.encoder_ema, ae.decoder_ema, nullptr);

    CHECK(hash_params(ae_params) == before); // frozen-autoencoder contract
    REQUIRE(diff.epoch_loss.size() == 4);
    for (double v : diff.epoch_loss) CHECK(std::isfinite(v));
    CHECK(diff.epoch_loss.back() < diff.epoch_loss.front());

    // Determinism of the full stage.
    DenoiserBundle again = train_denoiser(longer, data, ae.encoder_ema, ae.decoder_ema, nullptr);
    std::vector<Param*> d1, d2;
    diff.net.collect(d1);
    again.net.collect(d2);
    CHECK(hash_params(d1) == hash_params(d2));
}

TEST_CASE("latent argmin variant trains too") {
    TrainConfig cfg = tiny_config();
    cfg.latent_argmin = true;
    Rng rng(cfg.seed);
    const Dataset data = make_dataset(cfg.dataset, rng);
    AutoencoderBundle ae = train_autoencoder(cfg, data, nullptr);
    const DenoiserBundle diff = train_denoiser(cfg, data, ae.encoder_ema, ae.decoder_ema, nullptr);
    for (double v : diff.epoch_loss) CHECK(std::isfinite(v));
}

TEST_CASE("prediction is deterministic, finite, and shaped") {
    const TrainConfig cfg = tiny_config();
    Rng rng(cfg.seed);
    const Dataset data = make_dataset(cfg.dataset, rng);
    AutoencoderBundle ae = train_autoencoder(cfg, data, nullptr);
    DenoiserBundle diff = train_denoiser(cfg, data, ae.encoder_ema, ae.decoder_ema, nullptr);

    const Motion& past = data.test.segments[0].past;
    const PredictionSet a =
        predict(ae.encoder_ema, ae.decoder_ema, diff.net_ema, diff.schedule, past, 5, 77);
    const PredictionSet b =
        predict(ae.encoder_ema, ae.decoder_ema, diff.net_ema, diff.schedule, past, 5, 77);
    REQUIRE(a.size() == 5);
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].frames == cfg.dataset.future_frames);
        CHECK(a[i].joints == cfg.dataset.joints);
        for (double v : a[i].a) CHECK(std::isfinite(v));
        CHECK(a[i].a == b[i].a);
    }

    // An untrained model still yields valid, finite motions.
    Rng fresh(123);
    DenoiserNet raw(cfg.dataset.joints, cfg.latent, cfg.width, cfg.diffusion_steps, cfg.heads,
                    cfg.denoiser_blocks, fresh);
    const PredictionSet c =
        predict(ae.encoder_ema, ae.decoder_ema, raw, diff.schedule, past, 2, 5);
    for (const Motion& m : c)
        for (double v : m.a) CHECK(std::isfinite(v));
}

TEST_CASE("checkpoint save/load reproduces predictions") {
    const TrainConfig cfg = tiny_config();
    Rng rng(cfg.seed);
    const Dataset data = make_dataset(cfg.dataset, rng);
    AutoencoderBundle ae = train_autoencoder(cfg, data, nullptr);
    DenoiserBundle diff = train_denoiser(cfg, data, ae.encoder_ema, ae.decoder_ema, nullptr);

    save_autoencoder("t_ae", ae);
    save_denoiser("t_diff", diff);
    const AutoencoderBundle ae2 = load_autoencoder("t_ae", cfg);
    const DenoiserBundle diff2 = load_denoiser("t_diff", cfg, data.skeleton);

    const Motion& past = data.test.segments[0].past;
    const PredictionSet a =
        predict(ae.encoder_ema, ae.decoder_ema, diff.net_ema, diff.schedule, past, 3, 9);
    const PredictionSet b =
        predict(ae2.encoder_ema, ae2.decoder_ema, diff2.net_ema, diff2.schedule, past, 3, 9);
    for (size_t i = 0; i < a.size(); ++i) CHECK(a[i].a == b[i].a);

    for (const char* f : {"t_ae.nitg", "t_ae.ema.nitg", "t_diff.nitg", "t_diff.ema.nitg"})
        std::remove(f);
}

TEST_CASE("zero velocity baseline repeats the last pose") {
    Motion past(4, 3);
    Rng rng(1);
    for (double& v : past.a) v = rng.normal();
    const PredictionSet preds = zero_velocity_prediction(past, 6, 3);
    REQUIRE(preds.size() == 3);
    for (const Motion& m : preds) {
        CHECK(m.frames == 6);
        for (int f = 0; f < 6; ++f)
            for (int j = 0; j < 3; ++j)
                for (int d = 0; d < 3; ++d) CHECK(m.at(f, j, d) == past.at(3, j, d));
    }
}

TEST_CASE("manifest json carries the config hash") {
    RunManifest m;
    m.config_json = train_config_json(tiny_config());
    m.content_hash = "deadbeef";
    m.checkpoints = {"a.nitg"};
    m.metrics_path = "metrics.json";
    m.wall_clock_sec = 1.5;
    const std::string json = manifest_json(m);
    CHECK(json.find("deadbeef") != std::string::npos);
    CHECK(json.find("a.nitg") != std::string::npos);
}
