#pragma once

#include "noniso/rng.hpp"
#include "noniso/schedule.hpp"

#include <functional>
#include <vector>

namespace noniso {

// A J x L latent at a diffusion timestep. The joint axis (rows) carries the
// structured covariance; the L feature columns are treated i.i.d., so every
// transform below acts on each column independently.
struct LatentState {
    Mat values;
    int t = 0;
};

struct PosteriorParams {
    Mat mean;                     // mu_q, J x L
    std::vector<double> lambda_q; // per-mode posterior variance
    const Mat* eigvecs = nullptr; // U of the owning schedule
};

// x_t = sqrt(abar_t) x0 + U diag(sqrt(lambda_bar_t)) eps. eps is caller
// supplied standard normal noise; it lives in the rotated (eigenvector)
// frame, i.e. U^T x_t = sqrt(abar_t) U^T x0 + sqrt(lambda_bar_t) eps.
LatentState forward_sample(const Mat& x0, int t, const Mat& eps, const NoiseSchedule& s);

// Single step x_t = sqrt(alpha_t) x_prev + U diag(sqrt(lambda_t)) eps.
LatentState transition_sample(const Mat& x_prev, int t, const Mat& eps, const NoiseSchedule& s);

// Posterior q(x_{t-1} | x_t, x0): mean = U Lbar_t^-1 (sqrt(alpha_t) Lbar_{t-1} U^T x_t
// + sqrt(abar_{t-1}) L_t U^T x0), variance lambda_q = L_t Lbar_{t-1} / Lbar_t.
// Valid for t >= 1; at t = 1 it degenerates to (x0, 0).
PosteriorParams posterior_params(const LatentState& x_t, const Mat& x0, const NoiseSchedule& s);

// x_{t-1} = mu_q + U diag(sqrt(lambda_q)) eps for t >= 2; returns x0_pred
// exactly at t = 1.
LatentState reverse_step(const LatentState& x_t, const Mat& x0_pred, const Mat& eps,
                         const NoiseSchedule& s);

// x_T = U diag(sqrt(lambda_bar_T)) eps, the forward marginal at t = T.
LatentState sample_prior(int feature_width, const NoiseSchedule& s, const Mat& eps);

// Invert the noising given the very eps that produced x_t. The marginal
// variant divides out lambda_bar_t and exactly inverts forward_sample; the
// step variant uses lambda_t as in the single-step reparameterization.
Mat x0_from_noise_marginal(const LatentState& x_t, const Mat& eps, const NoiseSchedule& s);
Mat x0_from_noise_step(const LatentState& x_t, const Mat& eps, const NoiseSchedule& s);

// abar_t * sum over modes/columns of (U^T delta)^2 / lambda_bar_t, averaged
// over the L columns.
double loss_x0(const Mat& x0_pred, const Mat& x0, int t, const NoiseSchedule& s);

// Gradient of loss_x0 with respect to x0_pred.
Mat loss_x0_grad(const Mat& x0_pred, const Mat& x0, int t, const NoiseSchedule& s);

// Noise-regression objective: per-mode weight (lambda_t/abar_t) *
// (SNR(t-1) - SNR(t)) applied entrywise to eps_pred - eps, averaged over L.
// The epsilons are the rotated-frame standard noises of forward_sample, so
// no rotation is applied here. SNR(0) uses the floored lambda_bar_0.
double loss_noise(const Mat& eps_pred, const Mat& eps, int t, const NoiseSchedule& s);

// Gradient of loss_noise with respect to eps_pred.
Mat loss_noise_grad(const Mat& eps_pred, const Mat& eps, int t, const NoiseSchedule& s);

using Denoiser = std::function<Mat(const Mat& x_t, const Mat& cond, int t)>;

// n reverse-chain rollouts, each on its own derived rng stream, so results
// are independent of scheduling order. threads > 1 parallelizes across
// rollouts; outputs are written by index and stay bitwise deterministic.
std::vector<Mat> generate(const Denoiser& denoiser, const Mat& cond, const NoiseSchedule& s,
                          int n, std::uint64_t seed, int threads = 1);

Mat normal_matrix(int rows, int cols, Rng& rng);

} // namespace noniso
