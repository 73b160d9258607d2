#include "noniso/tg_net.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>

namespace noniso {

namespace {
constexpr double kRmsEps = 1e-8;
} // namespace

void Param::init_shape(std::string n, std::vector<int> d) {
    name = std::move(n);
    dims = std::move(d);
    size_t total = 1;
    for (int x : dims) total *= static_cast<size_t>(x);
    value.assign(total, 0.0);
    grad.assign(total, 0.0);
}

void Param::fill_uniform(double bound, Rng& rng) {
    for (double& v : value) v = (2.0 * rng.uniform() - 1.0) * bound;
}

void Param::zero_grad() {
    std::fill(grad.begin(), grad.end(), 0.0);
}

// ---------------------------------------------------------------- TGLinear

void TGLinear::init(const std::string& prefix, int joints_, int d_in_, int d_out_, Rng& rng,
                    bool with_bias, bool zero_weights) {
    joints = joints_;
    d_in = d_in_;
    d_out = d_out_;
    has_bias = with_bias;
    w.init_shape(prefix + ".w", {joints, d_in, d_out});
    g.init_shape(prefix + ".g", {joints, joints});
    bias.init_shape(prefix + ".bias", {joints, d_out});
    if (!zero_weights) w.fill_uniform(1.0 / std::sqrt(static_cast<double>(d_in)), rng);
    g.fill_uniform(1.0 / std::sqrt(static_cast<double>(joints)), rng);
}

Mat TGLinear::forward(const Mat& x) const {
    Cache scratch;
    return forward(x, scratch);
}

Mat TGLinear::forward(const Mat& x, Cache& cache) const {
    require(x.rows == joints && x.cols == d_in,
            "tg_linear " + w.name + ": input " + std::to_string(x.rows) + "x" +
                std::to_string(x.cols) + ", expected " + std::to_string(joints) + "x" +
                std::to_string(d_in));
    cache.x = x;
    cache.f_hat = Mat(joints, d_out);
    for (int j = 0; j < joints; ++j) {
        const double* wj = w.value.data() + static_cast<size_t>(j) * d_in * d_out;
        const double* xj = x.row_ptr(j);
        double* fj = cache.f_hat.row_ptr(j);
        for (int i = 0; i < d_in; ++i) {
            const double xi = xj[i];
            if (xi == 0.0) continue;
            const double* wrow = wj + static_cast<size_t>(i) * d_out;
            for (int o = 0; o < d_out; ++o) fj[o] += xi * wrow[o];
        }
    }
    Mat out(joints, d_out);
    for (int r = 0; r < joints; ++r) {
        double* orow = out.row_ptr(r);
        for (int j = 0; j < joints; ++j) {
            const double grj = g.value[static_cast<size_t>(r) * joints + j];
            if (grj == 0.0) continue;
            const double* fj = cache.f_hat.row_ptr(j);
            for (int o = 0; o < d_out; ++o) orow[o] += grj * fj[o];
        }
        if (has_bias) {
            const double* brow = bias.value.data() + static_cast<size_t>(r) * d_out;
            for (int o = 0; o < d_out; ++o) orow[o] += brow[o];
        }
    }
    return out;
}

Mat TGLinear::backward(const Mat& grad_out, const Cache& cache) {
    require(grad_out.rows == joints && grad_out.cols == d_out, "tg_linear backward: shape mismatch");

    if (has_bias) {
        for (int r = 0; r < joints; ++r) {
            const double* drow = grad_out.row_ptr(r);
            double* brow = bias.grad.data() + static_cast<size_t>(r) * d_out;
            for (int o = 0; o < d_out; ++o) brow[o] += drow[o];
        }
    }

    // dG(r,j) += sum_o grad_out(r,o) f_hat(j,o); d_fhat = G^T grad_out.
    Mat d_fhat(joints, d_out);
    for (int r = 0; r < joints; ++r) {
        const double* drow = grad_out.row_ptr(r);
        for (int j = 0; j < joints; ++j) {
            const double* fj = cache.f_hat.row_ptr(j);
            double acc = 0.0;
            for (int o = 0; o < d_out; ++o) acc += drow[o] * fj[o];
            g.grad[static_cast<size_t>(r) * joints + j] += acc;

            const double grj = g.value[static_cast<size_t>(r) * joints + j];
            if (grj != 0.0) {
                double* dfj = d_fhat.row_ptr(j);
                for (int o = 0; o < d_out; ++o) dfj[o] += grj * drow[o];
            }
        }
    }

    Mat d_x(joints, d_in);
    for (int j = 0; j < joints; ++j) {
        const double* xj = cache.x.row_ptr(j);
        const double* dfj = d_fhat.row_ptr(j);
        double* wj_grad = w.grad.data() + static_cast<size_t>(j) * d_in * d_out;
        const double* wj = w.value.data() + static_cast<size_t>(j) * d_in * d_out;
        double* dxj = d_x.row_ptr(j);
        for (int i = 0; i < d_in; ++i) {
            const double xi = xj[i];
            double* wrow_grad = wj_grad + static_cast<size_t>(i) * d_out;
            const double* wrow = wj + static_cast<size_t>(i) * d_out;
            double acc = 0.0;
            for (int o = 0; o < d_out; ++o) {
                wrow_grad[o] += xi * dfj[o];
                acc += wrow[o] * dfj[o];
            }
            dxj[i] = acc;
        }
    }
    return d_x;
}

void TGLinear::collect(std::vector<Param*>& out) {
    out.push_back(&w);
    out.push_back(&g);
    if (has_bias) out.push_back(&bias);
}

// ---------------------------------------------------------------- RMSNorm

void RMSNorm::init(const std::string& prefix, int width) {
    gain.init_shape(prefix + ".gain", {width});
    std::fill(gain.value.begin(), gain.value.end(), 1.0);
}

Mat RMSNorm::forward(const Mat& x) const {
    Cache scratch;
    return forward(x, scratch);
}

Mat RMSNorm::forward(const Mat& x, Cache& cache) const {
    require(x.cols == static_cast<int>(gain.size()), "rms_norm: width mismatch");
    cache.x = x;
    cache.inv_rms.assign(x.rows, 0.0);
    Mat out(x.rows, x.cols);
    for (int r = 0; r < x.rows; ++r) {
        const double* xr = x.row_ptr(r);
        double mean_sq = 0.0;
        for (int c = 0; c < x.cols; ++c) mean_sq += xr[c] * xr[c];
        mean_sq /= x.cols;
        const double inv = 1.0 / std::sqrt(mean_sq + kRmsEps);
        cache.inv_rms[r] = inv;
        double* orow = out.row_ptr(r);
        for (int c = 0; c < x.cols; ++c) orow[c] = xr[c] * inv * gain.value[c];
    }
    return out;
}

Mat RMSNorm::backward(const Mat& d_out, const Cache& cache) {
    const Mat& x = cache.x;
    Mat d_x(x.rows, x.cols);
    for (int r = 0; r < x.rows; ++r) {
        const double inv = cache.inv_rms[r];
        const double* xr = x.row_ptr(r);
        const double* dr = d_out.row_ptr(r);
        double dot = 0.0;
        for (int c = 0; c < x.cols; ++c) {
            gain.grad[c] += dr[c] * xr[c] * inv;
            dot += dr[c] * gain.value[c] * xr[c];
        }
        const double coef = dot * inv * inv * inv / x.cols;
        double* dxr = d_x.row_ptr(r);
        for (int c = 0; c < x.cols; ++c) dxr[c] = dr[c] * gain.value[c] * inv - xr[c] * coef;
    }
    return d_x;
}

void RMSNorm::collect(std::vector<Param*>& out) {
    out.push_back(&gain);
}

// ------------------------------------------------------------- TGAttention

void TGAttention::init(const std::string& prefix, int joints, int d_model_, int heads_, Rng& rng) {
    require(d_model_ % heads_ == 0, "tg_attention: d_model must be divisible by head count");
    heads = heads_;
    d_model = d_model_;
    d_head = d_model_ / heads_;
    norm.init(prefix + ".rms", d_model);
    q.resize(heads);
    k.resize(heads);
    v.resize(heads);
    for (int h = 0; h < heads; ++h) {
        q[h].init(prefix + ".q" + std::to_string(h), joints, d_model, d_head, rng);
        k[h].init(prefix + ".k" + std::to_string(h), joints, d_model, d_head, rng);
        v[h].init(prefix + ".v" + std::to_string(h), joints, d_model, d_head, rng);
    }
    out_proj.init(prefix + ".out", joints, d_model, d_model, rng, /*with_bias=*/true,
                  /*zero_weights=*/true);
}

namespace {

Mat softmax_rows(const Mat& scores) {
    Mat probs(scores.rows, scores.cols);
    for (int r = 0; r < scores.rows; ++r) {
        const double* srow = scores.row_ptr(r);
        double mx = srow[0];
        for (int c = 1; c < scores.cols; ++c) mx = std::max(mx, srow[c]);
        double sum = 0.0;
        double* prow = probs.row_ptr(r);
        for (int c = 0; c < scores.cols; ++c) {
            prow[c] = std::exp(srow[c] - mx);
            sum += prow[c];
        }
        for (int c = 0; c < scores.cols; ++c) prow[c] /= sum;
    }
    return probs;
}

// d_scores = P .* (d_probs - rowsum(d_probs .* P))
Mat softmax_rows_backward(const Mat& probs, const Mat& d_probs) {
    Mat d_scores(probs.rows, probs.cols);
    for (int r = 0; r < probs.rows; ++r) {
        const double* prow = probs.row_ptr(r);
        const double* drow = d_probs.row_ptr(r);
        double dot = 0.0;
        for (int c = 0; c < probs.cols; ++c) dot += prow[c] * drow[c];
        double* out = d_scores.row_ptr(r);
        for (int c = 0; c < probs.cols; ++c) out[c] = prow[c] * (drow[c] - dot);
    }
    return d_scores;
}

} // namespace

Mat TGAttention::forward(const Mat& x) const {
    Cache scratch;
    return forward(x, scratch);
}

Mat TGAttention::forward(const Mat& x, Cache& cache) const {
    cache.normed = norm.forward(x, cache.norm);
    cache.qc.resize(heads);
    cache.kc.resize(heads);
    cache.vc.resize(heads);
    cache.qm.resize(heads);
    cache.km.resize(heads);
    cache.vm.resize(heads);
    cache.probs.resize(heads);
    cache.concat = Mat(x.rows, d_model);

    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(d_head));
    for (int h = 0; h < heads; ++h) {
        cache.qm[h] = q[h].forward(cache.normed, cache.qc[h]);
        cache.km[h] = k[h].forward(cache.normed, cache.kc[h]);
        cache.vm[h] = v[h].forward(cache.normed, cache.vc[h]);
        Mat scores = scale(matmul_nt(cache.qm[h], cache.km[h]), inv_sqrt_dk);
        cache.probs[h] = softmax_rows(scores);
        Mat head_out = matmul(cache.probs[h], cache.vm[h]);
        for (int r = 0; r < x.rows; ++r)
            for (int c = 0; c < d_head; ++c) cache.concat(r, h * d_head + c) = head_out(r, c);
    }
    return out_proj.forward(cache.concat, cache.out);
}

Mat TGAttention::backward(const Mat& d_out, const Cache& cache) {
    Mat d_concat = out_proj.backward(d_out, cache.out);
    const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(d_head));
    Mat d_normed(cache.normed.rows, cache.normed.cols);

    for (int h = 0; h < heads; ++h) {
        Mat d_head_out(d_concat.rows, d_head);
        for (int r = 0; r < d_concat.rows; ++r)
            for (int c = 0; c < d_head; ++c) d_head_out(r, c) = d_concat(r, h * d_head + c);

        Mat d_probs = matmul_nt(d_head_out, cache.vm[h]);
        Mat d_v = matmul_tn(cache.probs[h], d_head_out);
        Mat d_scores = softmax_rows_backward(cache.probs[h], d_probs);
        Mat d_q = scale(matmul(d_scores, cache.km[h]), inv_sqrt_dk);
        Mat d_k = scale(matmul_tn(d_scores, cache.qm[h]), inv_sqrt_dk);

        add_inplace(d_normed, q[h].backward(d_q, cache.qc[h]));
        add_inplace(d_normed, k[h].backward(d_k, cache.kc[h]));
        add_inplace(d_normed, v[h].backward(d_v, cache.vc[h]));
    }
    return norm.backward(d_normed, cache.norm);
}

void TGAttention::collect(std::vector<Param*>& out) {
    norm.collect(out);
    for (int h = 0; h < heads; ++h) {
        q[h].collect(out);
        k[h].collect(out);
        v[h].collect(out);
    }
    out_proj.collect(out);
}

// ----------------------------------------------------------------- TGBlock

void TGBlock::init(const std::string& prefix, int joints, int d_model, int heads, Rng& rng) {
    attn.init(prefix + ".attn", joints, d_model, heads, rng);
    norm2.init(prefix + ".rms2", d_model);
    fc1.init(prefix + ".fc1", joints, d_model, d_model, rng);
    fc2.init(prefix + ".fc2", joints, d_model, d_model, rng);
}

Mat TGBlock::forward(const Mat& x) const {
    Cache scratch;
    return forward(x, scratch);
}

Mat TGBlock::forward(const Mat& x, Cache& cache) const {
    Mat h = add(x, attn.forward(x, cache.attn));
    cache.after_attn = h;
    Mat n2 = norm2.forward(h, cache.norm2);
    cache.pre_act = fc1.forward(n2, cache.fc1);
    cache.act = cache.pre_act;
    for (double& val : cache.act.a) val = std::tanh(val);
    Mat m = fc2.forward(cache.act, cache.fc2);
    add_inplace(m, h);
    return m;
}

Mat TGBlock::backward(const Mat& d_out, const Cache& cache) {
    Mat d_after = d_out;
    Mat d_act = fc2.backward(d_out, cache.fc2);
    for (size_t i = 0; i < d_act.a.size(); ++i) {
        const double th = cache.act.a[i];
        d_act.a[i] *= (1.0 - th * th);
    }
    Mat d_n2 = fc1.backward(d_act, cache.fc1);
    add_inplace(d_after, norm2.backward(d_n2, cache.norm2));

    Mat d_x = d_after;
    add_inplace(d_x, attn.backward(d_after, cache.attn));
    return d_x;
}

void TGBlock::collect(std::vector<Param*>& out) {
    attn.collect(out);
    norm2.collect(out);
    fc1.collect(out);
    fc2.collect(out);
}

// -------------------------------------------------------------- DenoiserNet

DenoiserNet::DenoiserNet(int joints_, int latent_, int width_, int steps_, int heads,
                         int n_blocks, Rng& rng)
    : joints(joints_), latent(latent_), width(width_), steps(steps_) {
    t_embed.init_shape("denoiser.t_embed", {steps, latent});
    t_embed.fill_uniform(1.0 / std::sqrt(static_cast<double>(latent)), rng);
    cond_proj.init("denoiser.cond_proj", joints, latent, latent, rng);
    in_proj.init("denoiser.in_proj", joints, 2 * latent, width, rng);
    blocks.resize(n_blocks);
    for (int b = 0; b < n_blocks; ++b)
        blocks[b].init("denoiser.block" + std::to_string(b), joints, width, heads, rng);
    out_proj.init("denoiser.out_proj", joints, width, latent, rng);
}

Mat DenoiserNet::forward(const Mat& x_t, const Mat& cond, int t) const {
    Cache scratch;
    return forward(x_t, cond, t, scratch);
}

Mat DenoiserNet::forward(const Mat& x_t, const Mat& cond, int t, Cache& cache) const {
    require(t >= 1 && t <= steps, "denoiser: t out of range");
    require(x_t.rows == joints && x_t.cols == latent, "denoiser: x_t shape mismatch");
    require(cond.rows == joints && cond.cols == latent, "denoiser: cond shape mismatch");
    cache.t = t;

    Mat left = x_t;
    const double* emb = t_embed.value.data() + static_cast<size_t>(t - 1) * latent;
    for (int j = 0; j < joints; ++j) {
        double* row = left.row_ptr(j);
        for (int c = 0; c < latent; ++c) row[c] += emb[c];
    }
    Mat cproj = cond_proj.forward(cond, cache.cond);

    Mat h0(joints, 2 * latent);
    for (int j = 0; j < joints; ++j) {
        for (int c = 0; c < latent; ++c) {
            h0(j, c) = left(j, c);
            h0(j, latent + c) = cproj(j, c);
        }
    }
    Mat h = in_proj.forward(h0, cache.in);
    cache.blocks.resize(blocks.size());
    for (size_t b = 0; b < blocks.size(); ++b) h = blocks[b].forward(h, cache.blocks[b]);
    return out_proj.forward(h, cache.out);
}

Mat DenoiserNet::backward(const Mat& d_out, const Cache& cache) {
    Mat d_h = out_proj.backward(d_out, cache.out);
    for (size_t b = blocks.size(); b-- > 0;) d_h = blocks[b].backward(d_h, cache.blocks[b]);
    Mat d_h0 = in_proj.backward(d_h, cache.in);

    Mat d_left(joints, latent);
    Mat d_cproj(joints, latent);
    for (int j = 0; j < joints; ++j) {
        for (int c = 0; c < latent; ++c) {
            d_left(j, c) = d_h0(j, c);
            d_cproj(j, c) = d_h0(j, latent + c);
        }
    }
    cond_proj.backward(d_cproj, cache.cond);

    double* emb_grad = t_embed.grad.data() + static_cast<size_t>(cache.t - 1) * latent;
    for (int j = 0; j < joints; ++j)
        for (int c = 0; c < latent; ++c) emb_grad[c] += d_left(j, c);
    return d_left;
}

void DenoiserNet::collect(std::vector<Param*>& out) {
    out.push_back(&t_embed);
    cond_proj.collect(out);
    in_proj.collect(out);
    for (auto& b : blocks) b.collect(out);
    out_proj.collect(out);
}

size_t DenoiserNet::param_count() const {
    std::vector<Param*> ps;
    const_cast<DenoiserNet*>(this)->collect(ps);
    return total_param_count(ps);
}

// --------------------------------------------------------------- Encoder

namespace {

// Per-joint temporal pooling: mean, last frame, first frame, and the first
// Fourier moments over the sequence. Fifteen numbers per joint carry enough
// of the trajectory for the decoder to reconstruct it at this scale.
Mat pool_motion(const Motion& m) {
    Mat pooled(m.joints, kPooledFeatures);
    const double inv_f = 1.0 / m.frames;
    for (int j = 0; j < m.joints; ++j) {
        for (int d = 0; d < 3; ++d) {
            double mean = 0.0, c1 = 0.0, s1 = 0.0;
            for (int f = 0; f < m.frames; ++f) {
                const double v = m.at(f, j, d);
                const double phase = 2.0 * M_PI * (f + 0.5) * inv_f;
                mean += v;
                c1 += v * std::cos(phase);
                s1 += v * std::sin(phase);
            }
            pooled(j, d) = mean * inv_f;
            pooled(j, 3 + d) = m.at(m.frames - 1, j, d);
            pooled(j, 6 + d) = m.at(0, j, d);
            pooled(j, 9 + d) = 2.0 * c1 * inv_f;
            pooled(j, 12 + d) = 2.0 * s1 * inv_f;
        }
    }
    return pooled;
}

} // namespace

EncoderNet::EncoderNet(int joints_, int latent_, int width_, int heads, Rng& rng)
    : joints(joints_), latent(latent_), width(width_) {
    in_proj.init("encoder.in_proj", joints, kPooledFeatures, width, rng);
    block.init("encoder.block0", joints, width, heads, rng);
    out_proj.init("encoder.out_proj", joints, width, latent, rng);
}

Mat EncoderNet::forward(const Motion& m) const {
    Cache scratch;
    return forward(m, scratch);
}

Mat EncoderNet::forward(const Motion& m, Cache& cache) const {
    require(m.frames >= 1, "encoder: empty motion");
    require(m.joints == joints, "encoder: joint count mismatch");
    cache.frames = m.frames;
    cache.pooled = pool_motion(m);
    Mat h = in_proj.forward(cache.pooled, cache.in);
    h = block.forward(h, cache.block);
    return out_proj.forward(h, cache.out);
}

void EncoderNet::backward(const Mat& d_latent, const Cache& cache) {
    Mat d_h = out_proj.backward(d_latent, cache.out);
    d_h = block.backward(d_h, cache.block);
    in_proj.backward(d_h, cache.in);
}

void EncoderNet::collect(std::vector<Param*>& out) {
    in_proj.collect(out);
    block.collect(out);
    out_proj.collect(out);
}

size_t EncoderNet::param_count() const {
    std::vector<Param*> ps;
    const_cast<EncoderNet*>(this)->collect(ps);
    return total_param_count(ps);
}

// --------------------------------------------------------------- Decoder

DecoderNet::DecoderNet(std::vector<int> parents, int latent_, int width_, int frames_, int heads,
                       Rng& rng)
    : joints(static_cast<int>(parents.size())), latent(latent_), width(width_), frames(frames_),
      parent(std::move(parents)) {
    int roots = 0;
    for (int j = 0; j < joints; ++j) {
        require(parent[j] >= -1 && parent[j] < joints && parent[j] != j,
                "decoder: bad parent index");
        if (parent[j] < 0) ++roots;
    }
    require(roots == 1, "decoder: kinematic tree needs exactly one root");

    topo_order.clear();
    std::vector<char> placed(joints, 0);
    while (static_cast<int>(topo_order.size()) < joints) {
        const size_t before = topo_order.size();
        for (int j = 0; j < joints; ++j) {
            if (placed[j]) continue;
            if (parent[j] < 0 || placed[parent[j]]) {
                topo_order.push_back(j);
                placed[j] = 1;
            }
        }
        require(topo_order.size() > before, "decoder: parent array has a cycle");
    }

    in_proj.init("decoder.in_proj", joints, latent + 6, width, rng);
    block.init("decoder.block0", joints, width, heads, rng);
    out_proj.init("decoder.out_proj", joints, width, frames * 3, rng);
}

Motion DecoderNet::forward(const Mat& z, const Motion& past_tail) const {
    Cache scratch;
    return forward(z, past_tail, scratch);
}

Motion DecoderNet::forward(const Mat& z, const Motion& past_tail, Cache& cache) const {
    require(z.rows == joints && z.cols == latent, "decoder: latent shape mismatch");
    require(past_tail.frames == 2 && past_tail.joints == joints,
            "decoder: past_tail must hold exactly the last two observed frames");

    cache.past_tail = past_tail;
    cache.input = Mat(joints, latent + 6);
    for (int j = 0; j < joints; ++j) {
        for (int c = 0; c < latent; ++c) cache.input(j, c) = z(j, c);
        for (int f = 0; f < 2; ++f)
            for (int d = 0; d < 3; ++d) cache.input(j, latent + f * 3 + d) = past_tail.at(f, j, d);
    }
    Mat h = in_proj.forward(cache.input, cache.in);
    h = block.forward(h, cache.block);
    Mat offsets = out_proj.forward(h, cache.out);

    // Offsets accumulate along the kinematic tree (the root entry moves the
    // whole body, each child entry bends its own bone), so a joint's
    // position is the last observed pose plus the summed offsets on its
    // root path. Zero offsets reproduce the last pose exactly.
    Motion out(frames, joints, past_tail.frame_rate);
    Mat cum(joints, 3);
    for (int f = 0; f < frames; ++f) {
        for (int j : topo_order) {
            for (int d = 0; d < 3; ++d) {
                const double up = parent[j] < 0 ? 0.0 : cum(parent[j], d);
                cum(j, d) = up + offsets(j, f * 3 + d);
                out.at(f, j, d) = past_tail.at(1, j, d) + cum(j, d);
            }
        }
    }
    return out;
}

Mat DecoderNet::backward(const Motion& d_motion, const Cache& cache) {
    require(d_motion.frames == frames && d_motion.joints == joints,
            "decoder backward: motion gradient shape mismatch");

    // d offset_j = subtree sum of the position gradients below joint j.
    Mat d_offsets(joints, frames * 3);
    for (int f = 0; f < frames; ++f)
        for (int j = 0; j < joints; ++j)
            for (int d = 0; d < 3; ++d) d_offsets(j, f * 3 + d) = d_motion.at(f, j, d);
    for (size_t i = topo_order.size(); i-- > 0;) {
        const int j = topo_order[i];
        if (parent[j] < 0) continue;
        for (int c = 0; c < frames * 3; ++c)
            d_offsets(parent[j], c) += d_offsets(j, c);
    }

    Mat d_h = out_proj.backward(d_offsets, cache.out);
    d_h = block.backward(d_h, cache.block);
    Mat d_input = in_proj.backward(d_h, cache.in);

    Mat d_z(joints, latent);
    for (int j = 0; j < joints; ++j)
        for (int c = 0; c < latent; ++c) d_z(j, c) = d_input(j, c);
    return d_z;
}

void DecoderNet::collect(std::vector<Param*>& out) {
    in_proj.collect(out);
    block.collect(out);
    out_proj.collect(out);
}

size_t DecoderNet::param_count() const {
    std::vector<Param*> ps;
    const_cast<DecoderNet*>(this)->collect(ps);
    return total_param_count(ps);
}

// ------------------------------------------------------------------- Adam

void AdamOptimizer::attach(const std::vector<Param*>& params) {
    m.clear();
    v.clear();
    ema.clear();
    for (const Param* p : params) {
        m.emplace_back(p->size(), 0.0);
        v.emplace_back(p->size(), 0.0);
        ema.push_back(p->value);
    }
    steps_taken = 0;
    rejected_steps = 0;
}

bool AdamOptimizer::step(std::vector<Param*>& params) {
    require(params.size() == m.size(), "adam: parameter list changed since attach()");
    for (const Param* p : params)
        for (double gval : p->grad)
            if (!std::isfinite(gval)) {
                ++rejected_steps;
                return false;
            }

    ++steps_taken;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(steps_taken));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(steps_taken));
    for (size_t i = 0; i < params.size(); ++i) {
        Param& p = *params[i];
        for (size_t k = 0; k < p.size(); ++k) {
            const double gval = p.grad[k];
            m[i][k] = beta1 * m[i][k] + (1.0 - beta1) * gval;
            v[i][k] = beta2 * v[i][k] + (1.0 - beta2) * gval * gval;
            const double m_hat = m[i][k] / bc1;
            const double v_hat = v[i][k] / bc2;
            p.value[k] -= lr * m_hat / (std::sqrt(v_hat) + eps);
            ema[i][k] = ema_decay * ema[i][k] + (1.0 - ema_decay) * p.value[k];
        }
    }
    return true;
}

void AdamOptimizer::write_ema(std::vector<Param*>& params) const {
    require(params.size() == ema.size(), "adam: parameter list changed since attach()");
    for (size_t i = 0; i < params.size(); ++i) params[i]->value = ema[i];
}

void zero_grads(std::vector<Param*>& params) {
    for (Param* p : params) p->zero_grad();
}

size_t total_param_count(const std::vector<Param*>& params) {
    size_t total = 0;
    for (const Param* p : params) total += p->size();
    return total;
}

// ------------------------------------------------------------- checkpoints

namespace {

void write_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4];
    b[0] = v & 0xff;
    b[1] = (v >> 8) & 0xff;
    b[2] = (v >> 16) & 0xff;
    b[3] = (v >> 24) & 0xff;
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    require(in.good(), "checkpoint: truncated file");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_f64_le(std::ostream& out, const double* data, size_t n) {
    for (size_t i = 0; i < n; ++i) {
        std::uint64_t bits;
        std::memcpy(&bits, &data[i], 8);
        unsigned char b[8];
        for (int k = 0; k < 8; ++k) b[k] = (bits >> (8 * k)) & 0xff;
        out.write(reinterpret_cast<const char*>(b), 8);
    }
}

void read_f64_le(std::istream& in, double* data, size_t n) {
    for (size_t i = 0; i < n; ++i) {
        unsigned char b[8];
        in.read(reinterpret_cast<char*>(b), 8);
        require(in.good(), "checkpoint: truncated payload");
        std::uint64_t bits = 0;
        for (int k = 0; k < 8; ++k) bits |= static_cast<std::uint64_t>(b[k]) << (8 * k);
        std::memcpy(&data[i], &bits, 8);
    }
}

constexpr char kMagic[4] = {'N', 'I', 'T', 'G'};
constexpr std::uint32_t kVersion = 1;

} // namespace

void save_checkpoint(const std::string& path, const std::vector<Param*>& params) {
    std::ofstream out(path, std::ios::binary);
    require(out.good(), "checkpoint: cannot write " + path);
    out.write(kMagic, 4);
    write_u32(out, kVersion);
    for (const Param* p : params) {
        write_u32(out, static_cast<std::uint32_t>(p->name.size()));
        out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
        write_u32(out, static_cast<std::uint32_t>(p->dims.size()));
        for (int d : p->dims) write_u32(out, static_cast<std::uint32_t>(d));
        write_f64_le(out, p->value.data(), p->size());
    }
    require(out.good(), "checkpoint: write failure on " + path);
}

void load_checkpoint(const std::string& path, std::vector<Param*>& params) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), "checkpoint: cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    require(in.good() && std::memcmp(magic, kMagic, 4) == 0,
            "checkpoint: bad magic in " + path);
    require(read_u32(in) == kVersion, "checkpoint: unsupported version in " + path);

    std::map<std::string, std::vector<double>> tensors;
    std::map<std::string, std::vector<int>> shapes;
    while (true) {
        in.peek();
        if (in.eof()) break;
        const std::uint32_t name_len = read_u32(in);
        require(name_len > 0 && name_len < 4096, "checkpoint: implausible name length");
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        require(in.good(), "checkpoint: truncated name");
        const std::uint32_t rank = read_u32(in);
        require(rank <= 8, "checkpoint: implausible rank");
        std::vector<int> dims(rank);
        size_t count = 1;
        for (std::uint32_t i = 0; i < rank; ++i) {
            dims[i] = static_cast<int>(read_u32(in));
            count *= static_cast<size_t>(dims[i]);
        }
        std::vector<double> data(count);
        read_f64_le(in, data.data(), count);
        require(tensors.emplace(name, std::move(data)).second,
                "checkpoint: duplicate tensor " + name);
        shapes.emplace(name, std::move(dims));
    }

    for (Param* p : params) {
        auto it = tensors.find(p->name);
        require(it != tensors.end(), "checkpoint: missing tensor " + p->name + " in " + path);
        require(shapes.at(p->name) == p->dims, "checkpoint: shape mismatch for " + p->name);
        require(it->second.size() == p->size(), "checkpoint: size mismatch for " + p->name);
        p->value = it->second;
        tensors.erase(it);
    }
    if (!tensors.empty())
        throw ValidationError("checkpoint: " + std::to_string(tensors.size()) +
                              " unexpected tensor(s), first: " + tensors.begin()->first);
}

} // namespace noniso
