#pragma once

#include "noniso/mat.hpp"
#include "noniso/motion.hpp"
#include "noniso/rng.hpp"

#include <string>
#include <vector>

namespace noniso {

// Named flat parameter tensor with matching gradient storage. Everything
// trains in f64 so finite-difference checks are meaningful.
struct Param {
    std::string name;
    std::vector<int> dims;
    std::vector<double> value;
    std::vector<double> grad;

    size_t size() const { return value.size(); }
    void init_shape(std::string n, std::vector<int> d);
    void fill_uniform(double bound, Rng& rng);
    void zero_grad();
};

// Typed-graph linear layer: per-joint weight banks followed by a joint
// aggregation matrix, out = G * rowstack_j(x_j W_j) + bias.
struct TGLinear {
    int joints = 0, d_in = 0, d_out = 0;
    bool has_bias = true;
    Param w;    // joints x d_in x d_out
    Param g;    // joints x joints
    Param bias; // joints x d_out

    struct Cache {
        Mat x;
        Mat f_hat;
    };

    void init(const std::string& prefix, int joints_, int d_in_, int d_out_, Rng& rng,
              bool with_bias = true, bool zero_weights = false);
    Mat forward(const Mat& x) const;
    Mat forward(const Mat& x, Cache& cache) const;
    Mat backward(const Mat& d_out, const Cache& cache);
    void collect(std::vector<Param*>& out);
};

// Per-row x / sqrt(mean(x^2) + 1e-8) * gain.
struct RMSNorm {
    Param gain;

    struct Cache {
        Mat x;
        std::vector<double> inv_rms;
    };

    void init(const std::string& prefix, int width);
    Mat forward(const Mat& x) const;
    Mat forward(const Mat& x, Cache& cache) const;
    Mat backward(const Mat& d_out, const Cache& cache);
    void collect(std::vector<Param*>& out);
};

// Multi-head self-attention over the joint axis, with query/key/value
// produced by per-head typed-graph convolutions of the RMS-normed input.
// The caller adds the residual.
struct TGAttention {
    int heads = 0, d_model = 0, d_head = 0;
    RMSNorm norm;
    std::vector<TGLinear> q, k, v; // d_model -> d_head each
    TGLinear out_proj;             // d_model -> d_model, zero-initialized

    struct Cache {
        RMSNorm::Cache norm;
        Mat normed;
        std::vector<TGLinear::Cache> qc, kc, vc;
        std::vector<Mat> qm, km, vm, probs;
        Mat concat;
        TGLinear::Cache out;
    };

    void init(const std::string& prefix, int joints, int d_model_, int heads_, Rng& rng);
    Mat forward(const Mat& x) const;
    Mat forward(const Mat& x, Cache& cache) const;
    Mat backward(const Mat& d_out, const Cache& cache);
    void collect(std::vector<Param*>& out);
};

// Residual block: x += attention(x); x += fc2(tanh(fc1(rms(x)))).
struct TGBlock {
    TGAttention attn;
    RMSNorm norm2;
    TGLinear fc1, fc2;

    struct Cache {
        TGAttention::Cache attn;
        Mat after_attn;
        RMSNorm::Cache norm2;
        TGLinear::Cache fc1;
        Mat pre_act;
        Mat act;
        TGLinear::Cache fc2;
    };

    void init(const std::string& prefix, int joints, int d_model, int heads, Rng& rng);
    Mat forward(const Mat& x) const;
    Mat forward(const Mat& x, Cache& cache) const;
    Mat backward(const Mat& d_out, const Cache& cache);
    void collect(std::vector<Param*>& out);
};

// Denoiser g(x_t, cond, t) -> x0 prediction. Timestep enters through a
// learned embedding added to x_t; the conditioning latent is projected and
// concatenated along the feature axis.
struct DenoiserNet {
    int joints = 0, latent = 0, width = 0, steps = 0;
    Param t_embed; // steps x latent
    TGLinear cond_proj;
    TGLinear in_proj;
    std::vector<TGBlock> blocks;
    TGLinear out_proj;

    struct Cache {
        int t = 0;
        TGLinear::Cache cond;
        TGLinear::Cache in;
        std::vector<TGBlock::Cache> blocks;
        TGLinear::Cache out;
    };

    DenoiserNet() = default;
    DenoiserNet(int joints_, int latent_, int width_, int steps_, int heads, int n_blocks,
                Rng& rng);
    Mat forward(const Mat& x_t, const Mat& cond, int t) const;
    Mat forward(const Mat& x_t, const Mat& cond, int t, Cache& cache) const;
    // Accumulates parameter gradients; returns gradient w.r.t. x_t.
    Mat backward(const Mat& d_out, const Cache& cache);
    void collect(std::vector<Param*>& out);
    size_t param_count() const;
};

// Encoder pools a variable-length motion into a J x L latent: per joint the
// temporal mean, last and first frames, and first Fourier moments feed
// stacked typed-graph blocks. Stands in for a recurrent encoder at this
// scale while keeping the latent joint axis intact.
inline constexpr int kPooledFeatures = 15;

struct EncoderNet {
    int joints = 0, latent = 0, width = 0;
    TGLinear in_proj; // pooled features -> width
    TGBlock block;
    TGLinear out_proj; // width -> latent

    struct Cache {
        Mat pooled;
        int frames = 0;
        TGLinear::Cache in;
        TGBlock::Cache block;
        TGLinear::Cache out;
    };

    EncoderNet() = default;
    EncoderNet(int joints_, int latent_, int width_, int heads, Rng& rng);
    Mat forward(const Motion& m) const;
    Mat forward(const Motion& m, Cache& cache) const;
    void backward(const Mat& d_latent, const Cache& cache);
    void collect(std::vector<Param*>& out);
    size_t param_count() const;
};

// Decoder unrolls a fixed number of future frames from the latent plus the
// last two observed frames. Outputs are accumulated along the kinematic
// tree: each joint predicts the deviation of its bone vector from the last
// observed pose, and positions sum from the root down. With zero weights
// the decoder therefore repeats the last pose rigidly, and bone lengths are
// controlled by local predictions instead of differences of global ones.
struct DecoderNet {
    int joints = 0, latent = 0, width = 0, frames = 0;
    std::vector<int> parent;     // kinematic tree, -1 at the root
    std::vector<int> topo_order; // parents before children
    TGLinear in_proj;            // latent+6 -> width
    TGBlock block;
    TGLinear out_proj; // width -> frames*3

    struct Cache {
        Mat input;
        Motion past_tail;
        TGLinear::Cache in;
        TGBlock::Cache block;
        TGLinear::Cache out;
    };

    DecoderNet() = default;
    DecoderNet(std::vector<int> parents, int latent_, int width_, int frames_, int heads,
               Rng& rng);
    Motion forward(const Mat& z, const Motion& past_tail) const;
    Motion forward(const Mat& z, const Motion& past_tail, Cache& cache) const;
    // d_motion over all frames; returns gradient w.r.t. z.
    Mat backward(const Motion& d_motion, const Cache& cache);
    void collect(std::vector<Param*>& out);
    size_t param_count() const;
};

// Standard Adam with bias correction plus an exponential-moving-average
// shadow of the weights.
struct AdamOptimizer {
    double lr = 0.005;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double ema_decay = 0.98;
    long steps_taken = 0;
    long rejected_steps = 0;

    void attach(const std::vector<Param*>& params);
    // Applies one update from the accumulated gradients. Returns false and
    // leaves everything untouched when any gradient is non-finite.
    bool step(std::vector<Param*>& params);
    // Copies the EMA shadow into the given parameters (same layout).
    void write_ema(std::vector<Param*>& params) const;

    std::vector<std::vector<double>> m, v, ema;
};

void zero_grads(std::vector<Param*>& params);
size_t total_param_count(const std::vector<Param*>& params);

// Flat binary checkpoint: magic "NITG", version u32, then per tensor
// name-length u32, utf-8 name, rank u32, dims u32 x rank, f64 LE payload.
void save_checkpoint(const std::string& path, const std::vector<Param*>& params);
void load_checkpoint(const std::string& path, std::vector<Param*>& params);

} // namespace noniso
