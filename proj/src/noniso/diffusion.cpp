#include "noniso/diffusion.hpp"

#include <cmath>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace noniso {

namespace {

void check_shape(const Mat& x, const NoiseSchedule& s, const char* op) {
    require(x.rows == s.order(), std::string(op) + ": joint axis " + std::to_string(x.rows) +
                                     " does not match schedule order " + std::to_string(s.order()));
    require(x.cols >= 1, std::string(op) + ": empty feature axis");
}

void check_t(int t, const NoiseSchedule& s, const char* op) {
    require(t >= 1 && t <= s.steps(),
            std::string(op) + ": t=" + std::to_string(t) + " outside 1.." + std::to_string(s.steps()));
}

// U diag(sqrt(d)) eps, column-wise over the feature axis.
Mat colored_noise(const Mat& u, const std::vector<double>& d, const Mat& eps) {
    Mat scaled = eps;
    for (int k = 0; k < eps.rows; ++k) {
        const double sk = std::sqrt(std::max(d[k], 0.0));
        for (int l = 0; l < eps.cols; ++l) scaled(k, l) *= sk;
    }
    return matmul(u, scaled);
}

} // namespace

Mat normal_matrix(int rows, int cols, Rng& rng) {
    Mat m(rows, cols);
    for (double& v : m.a) v = rng.normal();
    return m;
}

LatentState forward_sample(const Mat& x0, int t, const Mat& eps, const NoiseSchedule& s) {
    check_shape(x0, s, "forward_sample");
    check_t(t, s, "forward_sample");
    require(eps.same_shape(x0), "forward_sample: eps shape mismatch");

    Mat out = colored_noise(s.correlation.eigvecs, s.lambda_bar[t], eps);
    add_inplace(out, x0, std::sqrt(s.alpha.alpha_bar[t]));
    return {std::move(out), t};
}

LatentState transition_sample(const Mat& x_prev, int t, const Mat& eps, const NoiseSchedule& s) {
    check_shape(x_prev, s, "transition_sample");
    check_t(t, s, "transition_sample");
    require(eps.same_shape(x_prev), "transition_sample: eps shape mismatch");

    Mat out = colored_noise(s.correlation.eigvecs, s.lambda_t[t], eps);
    add_inplace(out, x_prev, std::sqrt(s.alpha.alpha[t]));
    return {std::move(out), t};
}

PosteriorParams posterior_params(const LatentState& x_t, const Mat& x0, const NoiseSchedule& s) {
    check_shape(x_t.values, s, "posterior_params");
    check_t(x_t.t, s, "posterior_params");
    require(x0.same_shape(x_t.values), "posterior_params: x0 shape mismatch");

    const int t = x_t.t;
    const Mat& u = s.correlation.eigvecs;
    const Mat xt_rot = matmul_tn(u, x_t.values);
    const Mat x0_rot = matmul_tn(u, x0);

    const double sqrt_a = std::sqrt(s.alpha.alpha[t]);
    const double sqrt_abar_prev = std::sqrt(s.alpha.alpha_bar[t - 1]);

    Mat mean_rot(xt_rot.rows, xt_rot.cols);
    PosteriorParams out;
    out.lambda_q.assign(s.order(), 0.0);
    for (int k = 0; k < s.order(); ++k) {
        const double lb = std::max(s.lambda_bar[t][k], kLambdaFloor);
        const double lb_prev = t >= 2 ? s.lambda_bar[t - 1][k] : 0.0;
        const double lt = s.lambda_t[t][k];
        out.lambda_q[k] = t >= 2 ? s.lambda_q[t][k] : 0.0;
        const double c_xt = sqrt_a * lb_prev / lb;
        const double c_x0 = sqrt_abar_prev * lt / lb;
        for (int l = 0; l < xt_rot.cols; ++l)
            mean_rot(k, l) = c_xt * xt_rot(k, l) + c_x0 * x0_rot(k, l);
    }
    out.mean = matmul(u, mean_rot);
    out.eigvecs = &s.correlation.eigvecs;
    return out;
}

LatentState reverse_step(const LatentState& x_t, const Mat& x0_pred, const Mat& eps,
                         const NoiseSchedule& s) {
    check_t(x_t.t, s, "reverse_step");
    if (x_t.t == 1) return {x0_pred, 0};

    require(eps.same_shape(x_t.values), "reverse_step: eps shape mismatch");
    PosteriorParams post = posterior_params(x_t, x0_pred, s);
    Mat out = colored_noise(s.correlation.eigvecs, post.lambda_q, eps);
    add_inplace(out, post.mean);
    return {std::move(out), x_t.t - 1};
}

LatentState sample_prior(int feature_width, const NoiseSchedule& s, const Mat& eps) {
    require(eps.rows == s.order() && eps.cols == feature_width, "sample_prior: eps shape mismatch");
    return {colored_noise(s.correlation.eigvecs, s.lambda_bar[s.steps()], eps), s.steps()};
}

namespace {

Mat invert_noising(const LatentState& x_t, const Mat& eps, const NoiseSchedule& s,
                   const std::vector<double>& scale_sq) {
    check_shape(x_t.values, s, "x0_from_noise");
    check_t(x_t.t, s, "x0_from_noise");
    require(eps.same_shape(x_t.values), "x0_from_noise: eps shape mismatch");

    const Mat& u = s.correlation.eigvecs;
    Mat rot = matmul_tn(u, x_t.values);
    const double inv_sqrt_abar = 1.0 / std::sqrt(s.alpha.alpha_bar[x_t.t]);
    for (int k = 0; k < rot.rows; ++k) {
        const double sk = std::sqrt(std::max(scale_sq[k], 0.0));
        for (int l = 0; l < rot.cols; ++l)
            rot(k, l) = (rot(k, l) - sk * eps(k, l)) * inv_sqrt_abar;
    }
    return matmul(u, rot);
}

} // namespace

Mat x0_from_noise_marginal(const LatentState& x_t, const Mat& eps, const NoiseSchedule& s) {
    return invert_noising(x_t, eps, s, s.lambda_bar[x_t.t]);
}

Mat x0_from_noise_step(const LatentState& x_t, const Mat& eps, const NoiseSchedule& s) {
    return invert_noising(x_t, eps, s, s.lambda_t[x_t.t]);
}

double loss_x0(const Mat& x0_pred, const Mat& x0, int t, const NoiseSchedule& s) {
    check_shape(x0_pred, s, "loss_x0");
    check_t(t, s, "loss_x0");
    require(x0.same_shape(x0_pred), "loss_x0: shape mismatch");

    const Mat diff_rot = matmul_tn(s.correlation.eigvecs, sub(x0_pred, x0));
    double acc = 0.0;
    for (int k = 0; k < diff_rot.rows; ++k) {
        const double w = s.loss_weight_x0[t][k];
        for (int l = 0; l < diff_rot.cols; ++l) acc += w * diff_rot(k, l) * diff_rot(k, l);
    }
    return acc / diff_rot.cols;
}

Mat loss_x0_grad(const Mat& x0_pred, const Mat& x0, int t, const NoiseSchedule& s) {
    check_t(t, s, "loss_x0_grad");
    const Mat& u = s.correlation.eigvecs;
    Mat diff_rot = matmul_tn(u, sub(x0_pred, x0));
    const double inv_cols = 1.0 / diff_rot.cols;
    for (int k = 0; k < diff_rot.rows; ++k) {
        const double w = 2.0 * s.loss_weight_x0[t][k] * inv_cols;
        for (int l = 0; l < diff_rot.cols; ++l) diff_rot(k, l) *= w;
    }
    return matmul(u, diff_rot);
}

double loss_noise(const Mat& eps_pred, const Mat& eps, int t, const NoiseSchedule& s) {
    check_shape(eps_pred, s, "loss_noise");
    check_t(t, s, "loss_noise");
    require(eps.same_shape(eps_pred), "loss_noise: shape mismatch");

    double acc = 0.0;
    for (int k = 0; k < eps_pred.rows; ++k) {
        const double w = s.loss_weight_noise[t][k];
        for (int l = 0; l < eps_pred.cols; ++l) {
            const double d = eps_pred(k, l) - eps(k, l);
            acc += w * d * d;
        }
    }
    return acc / eps_pred.cols;
}

Mat loss_noise_grad(const Mat& eps_pred, const Mat& eps, int t, const NoiseSchedule& s) {
    check_t(t, s, "loss_noise_grad");
    Mat grad = sub(eps_pred, eps);
    const double inv_cols = 1.0 / grad.cols;
    for (int k = 0; k < grad.rows; ++k) {
        const double w = 2.0 * s.loss_weight_noise[t][k] * inv_cols;
        for (int l = 0; l < grad.cols; ++l) grad(k, l) *= w;
    }
    return grad;
}

namespace {

Mat rollout(const Denoiser& denoiser, const Mat& cond, const NoiseSchedule& s, Rng rng,
            int feature_width) {
    Mat eps = normal_matrix(s.order(), feature_width, rng);
    LatentState state = sample_prior(feature_width, s, eps);
    for (int t = s.steps(); t >= 1; --t) {
        state.t = t;
        Mat x0_pred;
        try {
            x0_pred = denoiser(state.values, cond, t);
        } catch (const std::exception& e) {
            throw std::runtime_error("generate: denoiser failed at t=" + std::to_string(t) + ": " +
                                     e.what());
        }
        if (t >= 2) {
            Mat step_eps = normal_matrix(s.order(), feature_width, rng);
            state = reverse_step(state, x0_pred, step_eps, s);
        } else {
            state = {std::move(x0_pred), 0};
        }
    }
    return state.values;
}

} // namespace

std::vector<Mat> generate(const Denoiser& denoiser, const Mat& cond, const NoiseSchedule& s,
                          int n, std::uint64_t seed, int threads) {
    require(n >= 0, "generate: negative sample count");
    require(cond.rows == s.order(), "generate: cond joint axis mismatch");
    std::vector<Mat> out(static_cast<size_t>(n));
    const int width = cond.cols;

#ifdef _OPENMP
    if (threads > 1) {
        std::exception_ptr err;
#pragma omp parallel for num_threads(threads) schedule(dynamic)
        for (int i = 0; i < n; ++i) {
            try {
                out[i] = rollout(denoiser, cond, s, Rng::derive(seed, i), width);
            } catch (...) {
#pragma omp critical
                if (!err) err = std::current_exception();
            }
        }
        if (err) std::rethrow_exception(err);
        return out;
    }
#else
    (void)threads;
#endif
    for (int i = 0; i < n; ++i)
        out[i] = rollout(denoiser, cond, s, Rng::derive(seed, i), width);
    return out;
}

} // namespace noniso
