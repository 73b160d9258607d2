// Benchmark comparing the serial reference implementations against the
// OpenMP kernels: metric evaluation over segments and reverse-chain rollout
// generation. Also cross-checks that both paths agree.

#include "noniso/diffusion.hpp"
#include "noniso/metrics.hpp"
#include "noniso/pipeline.hpp"
#include "noniso/verify.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace noniso;

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

int hardware_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

Motion random_walk_motion(int frames, int joints, Rng& rng) {
    Motion m(frames, joints);
    for (int j = 0; j < joints; ++j)
        for (int d = 0; d < 3; ++d) {
            double pos = rng.normal();
            for (int f = 0; f < frames; ++f) {
                pos += 0.05 * rng.normal();
                m.at(f, j, d) = pos;
            }
        }
    return m;
}

void print_row(const std::string& name, double serial_ms, double parallel_ms, double max_diff) {
    std::printf("%-34s %10.1f ms %10.1f ms %8.2fx   max diff %.3e\n", name.c_str(), serial_ms,
                parallel_ms, parallel_ms > 0 ? serial_ms / parallel_ms : 0.0, max_diff);
}

} // namespace

int main(int argc, char** argv) {
    int segments = 60;
    int samples = 16;
    if (argc > 1) segments = std::atoi(argv[1]);
    if (argc > 2) samples = std::atoi(argv[2]);
    const int threads = hardware_threads();
    std::printf("benchmark: %d segments, %d samples/segment, %d thread(s)\n\n", segments, samples,
                threads);
    std::printf("%-34s %13s %13s %9s\n", "kernel", "serial", "parallel", "speedup");

    Rng rng(42);
    DatasetConfig dcfg;
    dcfg.train_groups = 1;
    dcfg.val_groups = 0;
    dcfg.test_groups = std::max(1, segments / dcfg.segments_per_group);
    dcfg.noise_std = 0.01;
    const Dataset data = make_dataset(dcfg, rng);
    const int n_seg = static_cast<int>(data.test.segments.size());

    std::vector<PredictionSet> preds(n_seg);
    for (int i = 0; i < n_seg; ++i) {
        for (int s = 0; s < samples; ++s)
            preds[i].push_back(random_walk_motion(dcfg.future_frames, dcfg.joints, rng));
    }

    // ---- full metric evaluation: brute-force reference vs kernels ----
    {
        const MMGTIndex mmgt = ref::build_mmgt(data.test, 0.5);
        auto t0 = Clock::now();
        std::vector<SegmentMetrics> ref_rows(n_seg);
        for (int i = 0; i < n_seg; ++i) {
            std::vector<const Motion*> mm;
            for (int idx : mmgt.neighbors[i]) mm.push_back(&data.test.segments[idx].future);
            SegmentMetrics& r = ref_rows[i];
            const Motion& gt = data.test.segments[i].future;
            r.ade = ref::ade(preds[i], gt);
            r.fde = ref::fde(preds[i], gt);
            r.mae_deg = ref::mae_angle(preds[i], gt, data.skeleton).degrees;
            if (!mm.empty()) {
                r.mmade = ref::mmade(preds[i], mm);
                r.mmfde = ref::mmfde(preds[i], mm);
            } else {
                r.mmade = r.ade;
                r.mmfde = r.fde;
            }
            r.apd = ref::apd(preds[i]);
            r.cmd = ref::cmd(preds[i], data.test.mean_velocity);
            const BodyRealism br = ref::body_realism(preds[i], data.skeleton);
            r.str_mean = br.str_mean;
            r.jit_mean = br.jit_mean;
        }
        const double ref_ms = ms_since(t0);

        t0 = Clock::now();
        const MetricsReport serial =
            evaluate_predictions(preds, data.test, data.skeleton, 0.5, 1);
        const double serial_ms = ms_since(t0);

        t0 = Clock::now();
        const MetricsReport parallel =
            evaluate_predictions(preds, data.test, data.skeleton, 0.5, threads);
        const double parallel_ms = ms_since(t0);

        double max_diff = 0.0;
        for (int i = 0; i < n_seg; ++i) {
            max_diff = std::max(max_diff, std::fabs(serial.per_segment[i].ade - ref_rows[i].ade));
            max_diff = std::max(max_diff, std::fabs(serial.per_segment[i].apd - ref_rows[i].apd));
            max_diff =
                std::max(max_diff, std::fabs(serial.per_segment[i].str_mean - ref_rows[i].str_mean));
        }
        double thread_diff = 0.0;
        for (int i = 0; i < n_seg; ++i)
            thread_diff =
                std::max(thread_diff, std::fabs(serial.per_segment[i].ade - parallel.per_segment[i].ade));

        print_row("metrics (vs brute-force ref)", ref_ms, serial_ms, max_diff);
        print_row("metrics (1 vs N threads)", serial_ms, parallel_ms, thread_diff);
    }

    // ---- reverse-chain rollouts: serial vs parallel generate() ----
    {
        const int joints = dcfg.joints, latent = 8, steps = 10;
        std::vector<double> lengths(static_cast<size_t>(joints) - 1, 0.3);
        const Skeleton skel = make_chain_skeleton(joints, lengths);
        const NoiseSchedule sched =
            build_schedule(correlation_from_matrix(build_adjacency(skel), NormKind::spectral),
                           cosine_alpha_schedule(steps), gamma_schedule(steps, GammaKind::blend));
        Rng net_rng(7);
        const DenoiserNet net(joints, latent, 16, steps, 2, 2, net_rng);
        const Mat cond = normal_matrix(joints, latent, net_rng);
        const Denoiser fn = [&net](const Mat& x, const Mat& c, int t) {
            return net.forward(x, c, t);
        };

        const int rollouts = 512;
        auto t0 = Clock::now();
        const std::vector<Mat> serial = generate(fn, cond, sched, rollouts, 99, 1);
        const double serial_ms = ms_since(t0);
        t0 = Clock::now();
        const std::vector<Mat> parallel = generate(fn, cond, sched, rollouts, 99, threads);
        const double parallel_ms = ms_since(t0);

        double max_diff = 0.0;
        for (int i = 0; i < rollouts; ++i)
            max_diff = std::max(max_diff, max_abs_diff(serial[i], parallel[i]));
        print_row("rollout generation", serial_ms, parallel_ms, max_diff);
    }

    return 0;
}
