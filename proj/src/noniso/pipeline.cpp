#include "noniso/pipeline.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

namespace noniso {

const char* sigma_basis_name(SigmaBasis b) {
    switch (b) {
        case SigmaBasis::adjacency: return "adjacency";
        case SigmaBasis::closure: return "closure";
        case SigmaBasis::masked_closure: return "masked_closure";
    }
    return "?";
}

SigmaBasis sigma_basis_from_name(const std::string& name) {
    if (name == "adjacency") return SigmaBasis::adjacency;
    if (name == "closure") return SigmaBasis::closure;
    if (name == "masked_closure") return SigmaBasis::masked_closure;
    throw ValidationError("unknown sigma basis: " + name);
}

void TrainConfig::validate() const {
    dataset.validate();
    require(latent >= 1 && width >= 1, "train config: latent and width must be positive");
    require(width % heads == 0, "train config: width must be divisible by heads");
    require(denoiser_blocks >= 1, "train config: need at least one denoiser block");
    require(diffusion_steps >= 1, "train config: diffusion_steps >= 1");
    require(lr > 0.0, "train config: lr must be positive");
    require(ema_decay > 0.0 && ema_decay < 1.0, "train config: ema_decay in (0,1)");
    require(batch >= 1, "train config: batch >= 1");
    require(ae_epochs >= 1 && diff_epochs >= 1, "train config: epochs >= 1");
    require(curriculum_epochs >= 1, "train config: curriculum_epochs >= 1");
    require(k >= 1, "train config: k >= 1");
    require(closure_eta > 0.0 && closure_eta < 1.0, "train config: closure_eta in (0,1)");
}

namespace {

nlohmann::json config_to_json(const TrainConfig& cfg) {
    nlohmann::json j;
    j["dataset"]["joints"] = cfg.dataset.joints;
    j["dataset"]["bone_lengths"] = cfg.dataset.bone_lengths;
    j["dataset"]["past_frames"] = cfg.dataset.past_frames;
    j["dataset"]["future_frames"] = cfg.dataset.future_frames;
    j["dataset"]["gen_frames"] = cfg.dataset.gen_frames;
    j["dataset"]["frame_rate"] = cfg.dataset.frame_rate;
    j["dataset"]["modes"] = cfg.dataset.modes;
    j["dataset"]["mode_weights"] = cfg.dataset.mode_weights;
    j["dataset"]["train_groups"] = cfg.dataset.train_groups;
    j["dataset"]["val_groups"] = cfg.dataset.val_groups;
    j["dataset"]["test_groups"] = cfg.dataset.test_groups;
    j["dataset"]["segments_per_group"] = cfg.dataset.segments_per_group;
    j["dataset"]["noise_std"] = cfg.dataset.noise_std;
    j["latent"] = cfg.latent;
    j["width"] = cfg.width;
    j["heads"] = cfg.heads;
    j["denoiser_blocks"] = cfg.denoiser_blocks;
    j["diffusion_steps"] = cfg.diffusion_steps;
    j["schedule_kind"] = gamma_kind_name(cfg.schedule_kind);
    j["sigma_basis"] = sigma_basis_name(cfg.sigma_basis);
    j["norm_kind"] = cfg.norm_kind == NormKind::spectral ? "spectral" : "frobenius";
    j["closure_eta"] = cfg.closure_eta;
    j["lr"] = cfg.lr;
    j["ema_decay"] = cfg.ema_decay;
    j["batch"] = cfg.batch;
    j["ae_epochs"] = cfg.ae_epochs;
    j["diff_epochs"] = cfg.diff_epochs;
    j["curriculum_epochs"] = cfg.curriculum_epochs;
    j["k"] = cfg.k;
    j["latent_argmin"] = cfg.latent_argmin;
    j["seed"] = cfg.seed;
    return j;
}

template <typename T>
void read_if(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

} // namespace

std::string train_config_json(const TrainConfig& cfg) {
    return config_to_json(cfg).dump(2) + "\n";
}

void save_train_config(const TrainConfig& cfg, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    require(out.good(), "train config: cannot write " + path);
    out << train_config_json(cfg);
}

TrainConfig load_train_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "train config: cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(path + ": config parse error: " + e.what());
    }

    TrainConfig cfg;
    try {
        if (j.contains("dataset")) {
            const auto& d = j.at("dataset");
            read_if(d, "joints", cfg.dataset.joints);
            read_if(d, "bone_lengths", cfg.dataset.bone_lengths);
            read_if(d, "past_frames", cfg.dataset.past_frames);
            read_if(d, "future_frames", cfg.dataset.future_frames);
            read_if(d, "gen_frames", cfg.dataset.gen_frames);
            read_if(d, "frame_rate", cfg.dataset.frame_rate);
            read_if(d, "modes", cfg.dataset.modes);
            read_if(d, "mode_weights", cfg.dataset.mode_weights);
            read_if(d, "train_groups", cfg.dataset.train_groups);
            read_if(d, "val_groups", cfg.dataset.val_groups);
            read_if(d, "test_groups", cfg.dataset.test_groups);
            read_if(d, "segments_per_group", cfg.dataset.segments_per_group);
            read_if(d, "noise_std", cfg.dataset.noise_std);
        }
        read_if(j, "latent", cfg.latent);
        read_if(j, "width", cfg.width);
        read_if(j, "heads", cfg.heads);
        read_if(j, "denoiser_blocks", cfg.denoiser_blocks);
        read_if(j, "diffusion_steps", cfg.diffusion_steps);
        if (j.contains("schedule_kind"))
            cfg.schedule_kind = gamma_kind_from_name(j.at("schedule_kind").get<std::string>());
        if (j.contains("sigma_basis"))
            cfg.sigma_basis = sigma_basis_from_name(j.at("sigma_basis").get<std::string>());
        if (j.contains("norm_kind")) {
            const std::string n = j.at("norm_kind").get<std::string>();
            require(n == "spectral" || n == "frobenius", "train config: bad norm_kind " + n);
            cfg.norm_kind = n == "spectral" ? NormKind::spectral : NormKind::frobenius;
        }
        read_if(j, "closure_eta", cfg.closure_eta);
        read_if(j, "lr", cfg.lr);
        read_if(j, "ema_decay", cfg.ema_decay);
        read_if(j, "batch", cfg.batch);
        read_if(j, "ae_epochs", cfg.ae_epochs);
        read_if(j, "diff_epochs", cfg.diff_epochs);
        read_if(j, "curriculum_epochs", cfg.curriculum_epochs);
        read_if(j, "k", cfg.k);
        read_if(j, "latent_argmin", cfg.latent_argmin);
        read_if(j, "seed", cfg.seed);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(path + ": malformed config: " + e.what());
    }
    cfg.validate();
    return cfg;
}

CorrelationModel build_correlation(const Skeleton& skeleton, SigmaBasis basis, double eta,
                                   NormKind norm) {
    switch (basis) {
        case SigmaBasis::adjacency: return correlation_from_matrix(build_adjacency(skeleton), norm);
        case SigmaBasis::closure:
            return correlation_from_matrix(closure_matrix(skeleton, eta), norm);
        case SigmaBasis::masked_closure: {
            require(skeleton.hub_joint.has_value(),
                    "masked_closure basis requires a hub joint in the skeleton");
            return correlation_from_matrix(
                masked_closure_matrix(skeleton, eta, *skeleton.hub_joint), norm);
        }
    }
    throw ValidationError("unreachable sigma basis");
}

NoiseSchedule schedule_from_config(const TrainConfig& cfg, const Skeleton& skeleton) {
    const CorrelationModel corr =
        build_correlation(skeleton, cfg.sigma_basis, cfg.closure_eta, cfg.norm_kind);
    const AlphaSchedule alpha = cosine_alpha_schedule(cfg.diffusion_steps);
    const GammaSchedule gamma = gamma_schedule(cfg.diffusion_steps, cfg.schedule_kind);
    return build_schedule(corr, alpha, gamma);
}

double l1_loss(const Motion& got, const Motion& want, int frames) {
    require(frames >= 1 && frames <= got.frames && frames <= want.frames,
            "l1_loss: frame range out of bounds");
    require(got.joints == want.joints, "l1_loss: joint mismatch");
    double acc = 0.0;
    for (int f = 0; f < frames; ++f)
        for (int j = 0; j < got.joints; ++j)
            for (int d = 0; d < 3; ++d) acc += std::fabs(got.at(f, j, d) - want.at(f, j, d));
    return acc / (static_cast<double>(frames) * got.joints * 3);
}

Motion l1_loss_grad(const Motion& got, const Motion& want, int frames) {
    Motion grad(got.frames, got.joints, got.frame_rate);
    const double inv = 1.0 / (static_cast<double>(frames) * got.joints * 3);
    for (int f = 0; f < frames; ++f)
        for (int j = 0; j < got.joints; ++j)
            for (int d = 0; d < 3; ++d) {
                const double diff = got.at(f, j, d) - want.at(f, j, d);
                grad.at(f, j, d) = diff > 0.0 ? inv : (diff < 0.0 ? -inv : 0.0);
            }
    return grad;
}

namespace {

int curriculum_fmax(int epoch, int curriculum_epochs, int full_frames) {
    const double u = std::min(1.0, static_cast<double>(epoch) / curriculum_epochs);
    const double ramp = (1.0 - std::cos(M_PI * u)) / 2.0;
    return 1 + static_cast<int>(std::llround((full_frames - 1) * ramp));
}

// Cosine decay to 1% of the base rate. The L1 objective keeps a constant
// gradient magnitude near the optimum, so without decay Adam hovers at an
// O(lr) residual floor.
double decayed_lr(double base, int epoch, int epochs) {
    const double u = epochs <= 1 ? 1.0 : static_cast<double>(epoch) / (epochs - 1);
    return base * (0.001 + 0.999 * 0.5 * (1.0 + std::cos(M_PI * u)));
}

std::vector<int> shuffled_indices(int n, Rng& rng) {
    std::vector<int> idx(n);
    for (int i = 0; i < n; ++i) idx[i] = i;
    for (int i = n - 1; i > 0; --i)
        std::swap(idx[i], idx[static_cast<int>(rng.uniform_index(i + 1))]);
    return idx;
}

Motion past_tail(const Motion& past) {
    return past.slice(past.frames - 2, 2);
}

} // namespace

AutoencoderBundle train_autoencoder(const TrainConfig& cfg, const Dataset& data,
                                    std::ostream* log) {
    cfg.validate();
    require(!data.train.segments.empty(), "train_autoencoder: empty train split");

    Rng init_rng = Rng::derive(cfg.seed, 0xAE0);
    AutoencoderBundle bundle;
    bundle.encoder = EncoderNet(cfg.dataset.joints, cfg.latent, cfg.width, cfg.heads, init_rng);
    bundle.decoder = DecoderNet(skeleton_parents(data.skeleton), cfg.latent, cfg.width,
                                cfg.dataset.future_frames, cfg.heads, init_rng);

    std::vector<Param*> params;
    bundle.encoder.collect(params);
    bundle.decoder.collect(params);
    bundle.param_count = total_param_count(params);

    AdamOptimizer opt;
    opt.lr = cfg.lr;
    opt.beta2 = 0.99; // faster second-moment adaptation at this data scale
    opt.ema_decay = cfg.ema_decay;
    opt.attach(params);

    Rng rng = Rng::derive(cfg.seed, 0xAE1);
    const int n = static_cast<int>(data.train.segments.size());

    for (int epoch = 0; epoch < cfg.ae_epochs; ++epoch) {
        const int fmax = curriculum_fmax(epoch, cfg.curriculum_epochs, cfg.dataset.future_frames);
        opt.lr = decayed_lr(cfg.lr, epoch, cfg.ae_epochs);
        const std::vector<int> order = shuffled_indices(n, rng);
        double epoch_loss = 0.0;
        int steps = 0;

        for (int start = 0; start < n; start += cfg.batch) {
            const int stop = std::min(n, start + cfg.batch);
            const double inv_batch = 1.0 / (stop - start);
            zero_grads(params);
            double batch_loss = 0.0;

            for (int b = start; b < stop; ++b) {
                const Segment& seg = data.train.segments[order[b]];
                const int f_til = 1 + static_cast<int>(rng.uniform_index(fmax));
                const Motion target = seg.future.head(f_til);
                const Motion tail = past_tail(seg.past);

                EncoderNet::Cache ec;
                DecoderNet::Cache dc;
                const Mat z = bundle.encoder.forward(target, ec);
                const Motion recon = bundle.decoder.forward(z, tail, dc);

                const double loss = l1_loss(recon, target, f_til);
                batch_loss += loss;

                Motion d_recon = l1_loss_grad(recon, target, f_til);
                for (double& v : d_recon.a) v *= inv_batch;
                const Mat d_z = bundle.decoder.backward(d_recon, dc);
                bundle.encoder.backward(d_z, ec);
            }
            batch_loss *= inv_batch;
            if (!std::isfinite(batch_loss))
                throw ValidationError("train_autoencoder: non-finite loss at epoch " +
                                      std::to_string(epoch) + ", step " + std::to_string(steps));
            if (!opt.step(params) && log)
                *log << "autoencoder: rejected non-finite gradient step at epoch " << epoch
                     << ", step " << steps << "\n";
            epoch_loss += batch_loss;
            ++steps;
        }
        bundle.epoch_loss.push_back(epoch_loss / steps);
        if (log)
            *log << "autoencoder epoch " << epoch << " fmax " << fmax << " l1 "
                 << bundle.epoch_loss.back() << "\n";
    }

    bundle.encoder_ema = bundle.encoder;
    bundle.decoder_ema = bundle.decoder;
    std::vector<Param*> ema_params;
    bundle.encoder_ema.collect(ema_params);
    bundle.decoder_ema.collect(ema_params);
    opt.write_ema(ema_params);
    return bundle;
}

DenoiserBundle train_denoiser(const TrainConfig& cfg, const Dataset& data,
                              const EncoderNet& frozen_encoder, const DecoderNet& frozen_decoder,
                              std::ostream* log) {
    cfg.validate();
    require(!data.train.segments.empty(), "train_denoiser: empty train split");

    Rng init_rng = Rng::derive(cfg.seed, 0xD1F0);
    DenoiserBundle bundle;
    bundle.net = DenoiserNet(cfg.dataset.joints, cfg.latent, cfg.width, cfg.diffusion_steps,
                             cfg.heads, cfg.denoiser_blocks, init_rng);
    bundle.schedule = schedule_from_config(cfg, data.skeleton);

    std::vector<Param*> params;
    bundle.net.collect(params);
    bundle.param_count = total_param_count(params);

    AdamOptimizer opt;
    opt.lr = cfg.lr;
    opt.beta2 = 0.99;
    opt.ema_decay = cfg.ema_decay;
    opt.attach(params);

    const int n = static_cast<int>(data.train.segments.size());
    const int T = cfg.diffusion_steps;

    // The autoencoder is frozen, so all latents are fixed and precomputable.
    std::vector<Mat> conds(n), x0s(n);
    std::vector<Motion> tails(n);
    for (int i = 0; i < n; ++i) {
        const Segment& seg = data.train.segments[i];
        conds[i] = frozen_encoder.forward(seg.past);
        x0s[i] = frozen_encoder.forward(seg.future);
        tails[i] = past_tail(seg.past);
    }

    Rng rng = Rng::derive(cfg.seed, 0xD1F1);

    auto latent_l1 = [](const Mat& a, const Mat& b) {
        double acc = 0.0;
        for (size_t i = 0; i < a.a.size(); ++i) acc += std::fabs(a.a[i] - b.a[i]);
        return acc / a.a.size();
    };

    for (int epoch = 0; epoch < cfg.diff_epochs; ++epoch) {
        opt.lr = decayed_lr(cfg.lr, epoch, cfg.diff_epochs);
        const std::vector<int> order = shuffled_indices(n, rng);
        double epoch_loss = 0.0;
        int steps = 0;

        for (int start = 0; start < n; start += cfg.batch) {
            const int stop = std::min(n, start + cfg.batch);
            const double inv_batch = 1.0 / (stop - start);
            zero_grads(params);
            double batch_loss = 0.0;

            for (int b = start; b < stop; ++b) {
                const int idx = order[b];
                const Segment& seg = data.train.segments[idx];
                const int t = 1 + static_cast<int>(rng.uniform_index(T));

                // k candidates; keep the denoiser input x_t of the best one.
                double best_score = INFINITY;
                Mat best_xt;
                for (int cand = 0; cand < cfg.k; ++cand) {
                    Rng roll(rng.next_u64());
                    Mat eps = normal_matrix(cfg.dataset.joints, cfg.latent, roll);
                    LatentState state = sample_prior(cfg.latent, bundle.schedule, eps);
                    Mat xt_at_t;
                    for (int tt = T; tt >= 1; --tt) {
                        state.t = tt;
                        if (tt == t) xt_at_t = state.values;
                        Mat x0_pred = bundle.net.forward(state.values, conds[idx], tt);
                        if (tt >= 2) {
                            Mat step_eps = normal_matrix(cfg.dataset.joints, cfg.latent, roll);
                            state = reverse_step(state, x0_pred, step_eps, bundle.schedule);
                        } else {
                            state = {std::move(x0_pred), 0};
                        }
                    }
                    double score;
                    if (cfg.latent_argmin) {
                        score = latent_l1(state.values, x0s[idx]);
                    } else {
                        const Motion decoded = frozen_decoder.forward(state.values, tails[idx]);
                        score = l1_loss(decoded, seg.future, seg.future.frames);
                    }
                    if (score < best_score) {
                        best_score = score;
                        best_xt = xt_at_t;
                    }
                }

                DenoiserNet::Cache cache;
                const Mat x0_pred = bundle.net.forward(best_xt, conds[idx], t, cache);
                const double loss = loss_x0(x0_pred, x0s[idx], t, bundle.schedule);
                batch_loss += loss;
                Mat d = loss_x0_grad(x0_pred, x0s[idx], t, bundle.schedule);
                for (double& v : d.a) v *= inv_batch;
                bundle.net.backward(d, cache);
            }
            batch_loss *= inv_batch;
            if (!std::isfinite(batch_loss))
                throw ValidationError("train_denoiser: non-finite loss at epoch " +
                                      std::to_string(epoch) + ", step " + std::to_string(steps));
            if (!opt.step(params) && log)
                *log << "denoiser: rejected non-finite gradient step at epoch " << epoch
                     << ", step " << steps << "\n";
            epoch_loss += batch_loss;
            ++steps;
        }
        bundle.epoch_loss.push_back(epoch_loss / steps);
        if (log)
            *log << "denoiser epoch " << epoch << " loss " << bundle.epoch_loss.back() << "\n";
    }

    bundle.net_ema = bundle.net;
    std::vector<Param*> ema_params;
    bundle.net_ema.collect(ema_params);
    opt.write_ema(ema_params);
    return bundle;
}

PredictionSet predict(const EncoderNet& encoder, const DecoderNet& decoder,
                      const DenoiserNet& denoiser, const NoiseSchedule& schedule,
                      const Motion& past, int n, std::uint64_t seed, int threads) {
    require(past.frames >= 2, "predict: need at least two observed frames");
    const Mat cond = encoder.forward(past);
    const Motion tail = past_tail(past);

    const Denoiser fn = [&denoiser](const Mat& x_t, const Mat& c, int t) {
        return denoiser.forward(x_t, c, t);
    };
    const std::vector<Mat> latents = generate(fn, cond, schedule, n, seed, threads);

    PredictionSet preds;
    preds.reserve(latents.size());
    for (const Mat& z : latents) preds.push_back(decoder.forward(z, tail));
    return preds;
}

std::vector<PredictionSet> predict_test_split(const EncoderNet& encoder,
                                              const DecoderNet& decoder,
                                              const DenoiserNet& denoiser,
                                              const NoiseSchedule& schedule, const Dataset& data,
                                              int n, std::uint64_t seed, int threads) {
    std::vector<PredictionSet> out;
    out.reserve(data.test.segments.size());
    for (size_t i = 0; i < data.test.segments.size(); ++i)
        out.push_back(predict(encoder, decoder, denoiser, schedule, data.test.segments[i].past, n,
                              seed + i, threads));
    return out;
}

PredictionSet zero_velocity_prediction(const Motion& past, int future_frames, int n) {
    Motion frozen(future_frames, past.joints, past.frame_rate);
    for (int f = 0; f < future_frames; ++f)
        for (int j = 0; j < past.joints; ++j)
            for (int d = 0; d < 3; ++d) frozen.at(f, j, d) = past.at(past.frames - 1, j, d);
    return PredictionSet(static_cast<size_t>(n), frozen);
}

std::uint64_t fnv1a64(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string manifest_json(const RunManifest& m) {
    nlohmann::json j;
    j["config"] = nlohmann::json::parse(m.config_json);
    j["content_hash"] = m.content_hash;
    j["checkpoints"] = m.checkpoints;
    j["metrics_path"] = m.metrics_path;
    j["wall_clock_sec"] = m.wall_clock_sec;
    return j.dump(2) + "\n";
}

void save_autoencoder(const std::string& stem, AutoencoderBundle& bundle) {
    std::vector<Param*> raw, ema;
    bundle.encoder.collect(raw);
    bundle.decoder.collect(raw);
    bundle.encoder_ema.collect(ema);
    bundle.decoder_ema.collect(ema);
    save_checkpoint(stem + ".nitg", raw);
    save_checkpoint(stem + ".ema.nitg", ema);
}

AutoencoderBundle load_autoencoder(const std::string& stem, const TrainConfig& cfg) {
    Rng dummy(0);
    // Synthetic datasets are chains, so the kinematic tree is 0-1-...-J-1
    // regardless of bone lengths.
    const std::vector<double> unit_lengths(static_cast<size_t>(cfg.dataset.joints) - 1, 1.0);
    const Skeleton chain = make_chain_skeleton(cfg.dataset.joints, unit_lengths);
    AutoencoderBundle bundle;
    bundle.encoder = EncoderNet(cfg.dataset.joints, cfg.latent, cfg.width, cfg.heads, dummy);
    bundle.decoder = DecoderNet(skeleton_parents(chain), cfg.latent, cfg.width,
                                cfg.dataset.future_frames, cfg.heads, dummy);
    bundle.encoder_ema = bundle.encoder;
    bundle.decoder_ema = bundle.decoder;

    std::vector<Param*> raw, ema;
    bundle.encoder.collect(raw);
    bundle.decoder.collect(raw);
    bundle.encoder_ema.collect(ema);
    bundle.decoder_ema.collect(ema);
    load_checkpoint(stem + ".nitg", raw);
    load_checkpoint(stem + ".ema.nitg", ema);
    bundle.param_count = total_param_count(raw);
    return bundle;
}

void save_denoiser(const std::string& stem, DenoiserBundle& bundle) {
    std::vector<Param*> raw, ema;
    bundle.net.collect(raw);
    bundle.net_ema.collect(ema);
    save_checkpoint(stem + ".nitg", raw);
    save_checkpoint(stem + ".ema.nitg", ema);
}

DenoiserBundle load_denoiser(const std::string& stem, const TrainConfig& cfg,
                             const Skeleton& skeleton) {
    Rng dummy(0);
    DenoiserBundle bundle;
    bundle.net = DenoiserNet(cfg.dataset.joints, cfg.latent, cfg.width, cfg.diffusion_steps,
                             cfg.heads, cfg.denoiser_blocks, dummy);
    bundle.net_ema = bundle.net;
    bundle.schedule = schedule_from_config(cfg, skeleton);

    std::vector<Param*> raw, ema;
    bundle.net.collect(raw);
    bundle.net_ema.collect(ema);
    load_checkpoint(stem + ".nitg", raw);
    load_checkpoint(stem + ".ema.nitg", ema);
    bundle.param_count = total_param_count(raw);
    return bundle;
}

} // namespace noniso
