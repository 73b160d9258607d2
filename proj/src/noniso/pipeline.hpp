#pragma once

#include "noniso/diffusion.hpp"
#include "noniso/metrics.hpp"
#include "noniso/synthetic.hpp"
#include "noniso/tg_net.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>

namespace noniso {

enum class SigmaBasis { adjacency, closure, masked_closure };

const char* sigma_basis_name(SigmaBasis b);
SigmaBasis sigma_basis_from_name(const std::string& name);

struct TrainConfig {
    DatasetConfig dataset;

    int latent = 8;
    int width = 24;
    int heads = 2;
    int denoiser_blocks = 2;
    int diffusion_steps = 10;

    GammaKind schedule_kind = GammaKind::blend;
    SigmaBasis sigma_basis = SigmaBasis::adjacency;
    NormKind norm_kind = NormKind::spectral;
    double closure_eta = 0.9;

    double lr = 0.005;
    double ema_decay = 0.98;
    int batch = 32;
    int ae_epochs = 300;
    int diff_epochs = 8;
    int curriculum_epochs = 10;
    int k = 10;               // candidates per step, gradient through the best
    bool latent_argmin = false; // select in latent space instead of motion space

    std::uint64_t seed = 1;

    void validate() const;
};

TrainConfig load_train_config(const std::string& path);
void save_train_config(const TrainConfig& cfg, const std::string& path);
std::string train_config_json(const TrainConfig& cfg);

// Correlation model for the configured connectivity basis.
CorrelationModel build_correlation(const Skeleton& skeleton, SigmaBasis basis, double eta,
                                   NormKind norm);
NoiseSchedule schedule_from_config(const TrainConfig& cfg, const Skeleton& skeleton);

// Mean absolute error over the first `frames` frames of both motions.
double l1_loss(const Motion& got, const Motion& want, int frames);
Motion l1_loss_grad(const Motion& got, const Motion& want, int frames);

struct AutoencoderBundle {
    EncoderNet encoder, encoder_ema;
    DecoderNet decoder, decoder_ema;
    std::vector<double> epoch_loss;
    size_t param_count = 0;
};

struct DenoiserBundle {
    DenoiserNet net, net_ema;
    NoiseSchedule schedule;
    std::vector<double> epoch_loss;
    size_t param_count = 0;
};

// Reconstruction training with curricular length sampling: per example the
// motion length is drawn uniformly from {1..Fmax(epoch)}, where Fmax ramps
// from 1 to the full future window over the curriculum epochs with a cosine
// shape. Aborts on non-finite loss, naming epoch and step.
AutoencoderBundle train_autoencoder(const TrainConfig& cfg, const Dataset& data,
                                    std::ostream* log = nullptr);

// Latent diffusion training with k-sample relaxation: per example, k full
// reverse rollouts from the prior; the candidate whose decoded motion is
// closest to the ground-truth future (L1) carries the gradient, applied to
// the denoiser call at the uniformly drawn timestep. The autoencoder stays
// frozen throughout.
DenoiserBundle train_denoiser(const TrainConfig& cfg, const Dataset& data,
                              const EncoderNet& frozen_encoder, const DecoderNet& frozen_decoder,
                              std::ostream* log = nullptr);

// n decoded futures for one observation; deterministic per seed.
PredictionSet predict(const EncoderNet& encoder, const DecoderNet& decoder,
                      const DenoiserNet& denoiser, const NoiseSchedule& schedule,
                      const Motion& past, int n, std::uint64_t seed, int threads = 1);

// Prediction sets for every test segment.
std::vector<PredictionSet> predict_test_split(const EncoderNet& encoder,
                                              const DecoderNet& decoder,
                                              const DenoiserNet& denoiser,
                                              const NoiseSchedule& schedule, const Dataset& data,
                                              int n, std::uint64_t seed, int threads = 1);

// The strongest trivial baseline: the last observed pose repeated.
PredictionSet zero_velocity_prediction(const Motion& past, int future_frames, int n);

std::uint64_t fnv1a64(const std::string& text);

struct RunManifest {
    std::string config_json;
    std::string content_hash; // fnv1a64 of the canonical config, hex
    std::vector<std::string> checkpoints;
    std::string metrics_path;
    double wall_clock_sec = 0.0;
};

std::string manifest_json(const RunManifest& m);

// Checkpoint bundles on disk: <stem>.nitg (raw) and <stem>.ema.nitg.
void save_autoencoder(const std::string& stem, AutoencoderBundle& bundle);
AutoencoderBundle load_autoencoder(const std::string& stem, const TrainConfig& cfg);
void save_denoiser(const std::string& stem, DenoiserBundle& bundle);
DenoiserBundle load_denoiser(const std::string& stem, const TrainConfig& cfg,
                             const Skeleton& skeleton);

} // namespace noniso
