#include "noniso/metrics.hpp"

#include "noniso/mat.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <ostream>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace noniso {

namespace {

void check_same_shape(const Motion& a, const Motion& b, const char* op) {
    require(a.frames == b.frames && a.joints == b.joints,
            std::string(op) + ": motion shapes differ (" + std::to_string(a.frames) + "x" +
                std::to_string(a.joints) + " vs " + std::to_string(b.frames) + "x" +
                std::to_string(b.joints) + ")");
}

double frame_norm(const Motion& a, const Motion& b, int f) {
    const double* pa = a.a.data() + static_cast<size_t>(f) * a.joints * 3;
    const double* pb = b.a.data() + static_cast<size_t>(f) * b.joints * 3;
    double acc = 0.0;
    for (int i = 0; i < a.joints * 3; ++i) {
        const double d = pa[i] - pb[i];
        acc += d * d;
    }
    return std::sqrt(acc);
}

// Per-frame bone lengths for every bone of the skeleton.
std::vector<double> bone_length_table(const Motion& m, const Skeleton& s) {
    std::vector<double> table(static_cast<size_t>(m.frames) * s.bones());
    for (int f = 0; f < m.frames; ++f) {
        for (int b = 0; b < s.bones(); ++b) {
            auto [i, j] = s.edges[b];
            const double dx = m.at(f, j, 0) - m.at(f, i, 0);
            const double dy = m.at(f, j, 1) - m.at(f, i, 1);
            const double dz = m.at(f, j, 2) - m.at(f, i, 2);
            table[static_cast<size_t>(f) * s.bones() + b] = std::sqrt(dx * dx + dy * dy + dz * dz);
        }
    }
    return table;
}

double worst_bone_error(const Motion& m, const Skeleton& s, BoneErrorKind kind) {
    const std::vector<double> lengths = bone_length_table(m, s);
    const int bones = s.bones();
    double worst = 0.0;
    if (kind == BoneErrorKind::stretch) {
        for (int f = 0; f < m.frames; ++f)
            for (int b = 0; b < bones; ++b) {
                const double e =
                    std::fabs(s.bone_lengths[b] - lengths[static_cast<size_t>(f) * bones + b]) /
                    s.bone_lengths[b];
                worst = std::max(worst, e);
            }
    } else {
        for (int f = 0; f + 1 < m.frames; ++f)
            for (int b = 0; b < bones; ++b) {
                const double e = std::fabs(lengths[static_cast<size_t>(f + 1) * bones + b] -
                                           lengths[static_cast<size_t>(f) * bones + b]) /
                                 s.bone_lengths[b];
                worst = std::max(worst, e);
            }
    }
    return worst;
}

} // namespace

double sequence_distance(const Motion& a, const Motion& b) {
    check_same_shape(a, b, "sequence_distance");
    const double inv_sqrt_j = 1.0 / std::sqrt(static_cast<double>(a.joints));
    double acc = 0.0;
    for (int f = 0; f < a.frames; ++f) acc += frame_norm(a, b, f) * inv_sqrt_j;
    return acc / a.frames;
}

double final_frame_distance(const Motion& a, const Motion& b) {
    check_same_shape(a, b, "final_frame_distance");
    return frame_norm(a, b, a.frames - 1) / std::sqrt(static_cast<double>(a.joints));
}

double ade(const PredictionSet& preds, const Motion& gt) {
    require(!preds.empty(), "ade: need at least one prediction");
    double best = INFINITY;
    for (const Motion& p : preds) best = std::min(best, sequence_distance(p, gt));
    return best;
}

double fde(const PredictionSet& preds, const Motion& gt) {
    require(!preds.empty(), "fde: need at least one prediction");
    double best = INFINITY;
    for (const Motion& p : preds) best = std::min(best, final_frame_distance(p, gt));
    return best;
}

MMGTIndex build_mmgt(const DatasetSplit& split, double delta) {
    require(delta > 0.0, "build_mmgt: delta must be positive");
    const int n = static_cast<int>(split.segments.size());
    MMGTIndex idx;
    idx.delta = delta;
    idx.neighbors.assign(n, {});

    // Pairwise distances of last observation frames; compute each pair once.
    for (int a = 0; a < n; ++a) {
        const Motion& pa = split.segments[a].past;
        for (int b = a + 1; b < n; ++b) {
            const Motion& pb = split.segments[b].past;
            double acc = 0.0;
            for (int j = 0; j < pa.joints; ++j)
                for (int d = 0; d < 3; ++d) {
                    const double diff =
                        pa.at(pa.frames - 1, j, d) - pb.at(pb.frames - 1, j, d);
                    acc += diff * diff;
                }
            if (std::sqrt(acc) < delta) {
                idx.neighbors[a].push_back(b);
                idx.neighbors[b].push_back(a);
            }
        }
        std::sort(idx.neighbors[a].begin(), idx.neighbors[a].end());
    }
    return idx;
}

double mmade(const PredictionSet& preds, const std::vector<const Motion*>& mmgt) {
    require(!preds.empty() && !mmgt.empty(), "mmade: empty inputs");
    double best = INFINITY;
    for (const Motion& p : preds)
        for (const Motion* g : mmgt) best = std::min(best, sequence_distance(p, *g));
    return best;
}

double mmfde(const PredictionSet& preds, const std::vector<const Motion*>& mmgt) {
    require(!preds.empty() && !mmgt.empty(), "mmfde: empty inputs");
    double best = INFINITY;
    for (const Motion& p : preds)
        for (const Motion* g : mmgt) best = std::min(best, final_frame_distance(p, *g));
    return best;
}

double apd(const PredictionSet& preds) {
    const int n = static_cast<int>(preds.size());
    if (n < 2) return 0.0;
    double acc = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) acc += sequence_distance(preds[i], preds[j]);
    // Ordered pairs double the sum and the count; the mean is unchanged.
    return 2.0 * acc / (static_cast<double>(n) * (n - 1));
}

double apd(const std::vector<const Motion*>& motions) {
    const int n = static_cast<int>(motions.size());
    if (n < 2) return 0.0;
    double acc = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) acc += sequence_distance(*motions[i], *motions[j]);
    return 2.0 * acc / (static_cast<double>(n) * (n - 1));
}

double apde(const PredictionSet& preds, const std::vector<const Motion*>& mmgt) {
    return std::fabs(apd(preds) - apd(mmgt));
}

std::vector<double> prediction_velocity_profile(const PredictionSet& preds) {
    require(!preds.empty(), "velocity profile: empty prediction set");
    const int frames = preds.front().frames;
    const int joints = preds.front().joints;
    require(frames >= 2, "velocity profile: need at least two frames");
    std::vector<double> profile(frames - 1, 0.0);
    for (const Motion& m : preds) {
        check_same_shape(m, preds.front(), "velocity profile");
        for (int f = 0; f + 1 < frames; ++f) {
            double mean = 0.0;
            for (int j = 0; j < joints; ++j) {
                const double dx = m.at(f + 1, j, 0) - m.at(f, j, 0);
                const double dy = m.at(f + 1, j, 1) - m.at(f, j, 1);
                const double dz = m.at(f + 1, j, 2) - m.at(f, j, 2);
                mean += std::sqrt(dx * dx + dy * dy + dz * dz);
            }
            profile[f] += mean / joints;
        }
    }
    for (double& v : profile) v /= preds.size();
    return profile;
}

double cmd(const PredictionSet& preds, double dataset_mean_velocity) {
    const std::vector<double> profile = prediction_velocity_profile(preds);
    const int frames = static_cast<int>(profile.size()) + 1;
    double acc = 0.0;
    for (size_t i = 0; i < profile.size(); ++i)
        acc += (frames - 1.0 - static_cast<double>(i)) *
               std::fabs(profile[i] - dataset_mean_velocity);
    return acc;
}

BodyRealism body_realism(const PredictionSet& preds, const Skeleton& skeleton) {
    require(!preds.empty(), "body_realism: empty prediction set");
    skeleton.validate();
    const int bones = skeleton.bones();
    BodyRealism out;
    double n_stretch = 0.0, n_jit = 0.0;
    for (const Motion& m : preds) {
        const std::vector<double> lengths = bone_length_table(m, skeleton);
        for (int b = 0; b < bones; ++b) {
            const double ref = skeleton.bone_lengths[b];
            double e_sum = 0.0, e_sq = 0.0;
            for (int f = 0; f < m.frames; ++f) {
                const double e =
                    std::fabs(ref - lengths[static_cast<size_t>(f) * bones + b]) / ref;
                e_sum += e;
                e_sq += e * e;
            }
            out.str_mean += e_sum / m.frames;
            out.str_rmse += std::sqrt(e_sq / m.frames);
            n_stretch += 1.0;

            if (m.frames >= 2) {
                double v_sum = 0.0, v_sq = 0.0;
                for (int f = 0; f + 1 < m.frames; ++f) {
                    const double v = std::fabs(lengths[static_cast<size_t>(f + 1) * bones + b] -
                                               lengths[static_cast<size_t>(f) * bones + b]) /
                                     ref;
                    v_sum += v;
                    v_sq += v * v;
                }
                out.jit_mean += v_sum / (m.frames - 1);
                out.jit_rmse += std::sqrt(v_sq / (m.frames - 1));
                n_jit += 1.0;
            }
        }
    }
    const double scale_stretch = n_stretch > 0 ? 100.0 / n_stretch : 0.0;
    const double scale_jit = n_jit > 0 ? 100.0 / n_jit : 0.0;
    out.str_mean *= scale_stretch;
    out.str_rmse *= scale_stretch;
    out.jit_mean *= scale_jit;
    out.jit_rmse *= scale_jit;
    return out;
}

namespace {

struct BoneDir {
    double x, y, z, norm;
};

BoneDir bone_dir(const Motion& m, int f, int a, int b) {
    BoneDir d;
    d.x = m.at(f, b, 0) - m.at(f, a, 0);
    d.y = m.at(f, b, 1) - m.at(f, a, 1);
    d.z = m.at(f, b, 2) - m.at(f, a, 2);
    d.norm = std::sqrt(d.x * d.x + d.y * d.y + d.z * d.z);
    return d;
}

} // namespace

MaeResult mae_angle(const PredictionSet& preds, const Motion& gt, const Skeleton& skeleton) {
    require(!preds.empty(), "mae_angle: empty prediction set");
    skeleton.validate();
    MaeResult out;
    out.degrees = INFINITY;
    constexpr double kDegenerate = 1e-12;
    for (const Motion& p : preds) {
        check_same_shape(p, gt, "mae_angle");
        double frame_acc = 0.0;
        bool degenerate = false;
        for (int f = 0; f < p.frames; ++f) {
            double bone_acc = 0.0;
            for (int b = 0; b < skeleton.bones(); ++b) {
                auto [i, j] = skeleton.edges[b];
                const BoneDir dp = bone_dir(p, f, i, j);
                const BoneDir dg = bone_dir(gt, f, i, j);
                double angle_deg;
                if (dp.norm < kDegenerate || dg.norm < kDegenerate) {
                    angle_deg = 90.0;
                    degenerate = true;
                } else {
                    double cosv = (dp.x * dg.x + dp.y * dg.y + dp.z * dg.z) / (dp.norm * dg.norm);
                    cosv = std::clamp(cosv, -1.0, 1.0);
                    angle_deg = std::acos(cosv) * 180.0 / M_PI;
                }
                bone_acc += angle_deg;
            }
            frame_acc += bone_acc / skeleton.bones();
        }
        const double sample_mae = frame_acc / p.frames;
        if (sample_mae < out.degrees) out.degrees = sample_mae;
        out.had_degenerate_bone = out.had_degenerate_bone || degenerate;
    }
    return out;
}

std::vector<double> validity_curve(const PredictionSet& preds, const Skeleton& skeleton,
                                   const std::vector<double>& thresholds, BoneErrorKind kind) {
    require(!preds.empty(), "validity_curve: empty prediction set");
    require(std::is_sorted(thresholds.begin(), thresholds.end()),
            "validity_curve: thresholds must be ascending");
    std::vector<double> worst(preds.size());
    for (size_t i = 0; i < preds.size(); ++i) worst[i] = worst_bone_error(preds[i], skeleton, kind);
    std::sort(worst.begin(), worst.end());

    std::vector<double> out;
    out.reserve(thresholds.size());
    for (double th : thresholds) {
        const auto it = std::upper_bound(worst.begin(), worst.end(), th);
        out.push_back(static_cast<double>(it - worst.begin()) / preds.size());
    }
    return out;
}

std::vector<double> delta_apd(const PredictionSet& preds, const Skeleton& skeleton,
                              const std::vector<double>& thresholds, BoneErrorKind kind) {
    require(!preds.empty(), "delta_apd: empty prediction set");
    require(std::is_sorted(thresholds.begin(), thresholds.end()),
            "delta_apd: thresholds must be ascending");
    const int n = static_cast<int>(preds.size());
    std::vector<double> worst(n);
    for (int i = 0; i < n; ++i) worst[i] = worst_bone_error(preds[i], skeleton, kind);

    // Pairwise distances computed once; each threshold only reselects the
    // valid subset.
    std::vector<double> pair_dist(static_cast<size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            const double d = sequence_distance(preds[i], preds[j]);
            pair_dist[static_cast<size_t>(i) * n + j] = d;
            pair_dist[static_cast<size_t>(j) * n + i] = d;
        }

    std::vector<double> out;
    out.reserve(thresholds.size());
    for (double th : thresholds) {
        std::vector<int> valid;
        for (int i = 0; i < n; ++i)
            if (worst[i] <= th) valid.push_back(i);
        if (valid.size() < 2) {
            out.push_back(0.0);
            continue;
        }
        double acc = 0.0;
        for (size_t a = 0; a < valid.size(); ++a)
            for (size_t b = a + 1; b < valid.size(); ++b)
                acc += pair_dist[static_cast<size_t>(valid[a]) * n + valid[b]];
        out.push_back(2.0 * acc / (static_cast<double>(valid.size()) * (valid.size() - 1)));
    }
    return out;
}

SegmentMetrics evaluate_segment(const PredictionSet& preds, const Motion& gt_future,
                                const std::vector<const Motion*>& mmgt, const Skeleton& skeleton,
                                double dataset_mean_velocity) {
    SegmentMetrics m;
    m.ade = ade(preds, gt_future);
    m.fde = fde(preds, gt_future);
    const MaeResult mae = mae_angle(preds, gt_future, skeleton);
    m.mae_deg = mae.degrees;
    m.degenerate_bone = mae.had_degenerate_bone;

    std::vector<const Motion*> mm = mmgt;
    if (mm.empty()) {
        mm.push_back(&gt_future);
        m.mmgt_fallback = true;
    }
    m.mmade = mmade(preds, mm);
    m.mmfde = mmfde(preds, mm);
    m.apd = apd(preds);
    m.apde = apde(preds, mm);
    m.cmd = cmd(preds, dataset_mean_velocity);

    const BodyRealism br = body_realism(preds, skeleton);
    m.str_mean = br.str_mean;
    m.jit_mean = br.jit_mean;
    m.str_rmse = br.str_rmse;
    m.jit_rmse = br.jit_rmse;
    return m;
}

MetricsReport evaluate_predictions(const std::vector<PredictionSet>& preds,
                                   const DatasetSplit& split, const Skeleton& skeleton,
                                   double mmgt_delta, int threads) {
    require(preds.size() == split.segments.size(),
            "evaluate: prediction sets (" + std::to_string(preds.size()) +
                ") do not match segment count (" + std::to_string(split.segments.size()) + ")");
    require(!preds.empty(), "evaluate: empty dataset");

    const MMGTIndex mmgt = build_mmgt(split, mmgt_delta);
    const int n = static_cast<int>(preds.size());

    MetricsReport report;
    report.mmgt_delta = mmgt_delta;
    report.samples_per_segment = static_cast<int>(preds.front().size());
    report.segment_count = n;
    report.per_segment.resize(n);

    auto eval_one = [&](int i) {
        std::vector<const Motion*> mm;
        for (int idx : mmgt.neighbors[i]) mm.push_back(&split.segments[idx].future);
        report.per_segment[i] = evaluate_segment(preds[i], split.segments[i].future, mm, skeleton,
                                                 split.mean_velocity);
    };

#ifdef _OPENMP
    if (threads > 1) {
#pragma omp parallel for num_threads(threads) schedule(dynamic)
        for (int i = 0; i < n; ++i) eval_one(i);
    } else {
        for (int i = 0; i < n; ++i) eval_one(i);
    }
#else
    (void)threads;
    for (int i = 0; i < n; ++i) eval_one(i);
#endif

    // Fixed-order reduction over segment index.
    for (int i = 0; i < n; ++i) {
        const SegmentMetrics& s = report.per_segment[i];
        report.ade += s.ade;
        report.fde += s.fde;
        report.mae_deg += s.mae_deg;
        report.mmade += s.mmade;
        report.mmfde += s.mmfde;
        report.apd += s.apd;
        report.apde += s.apde;
        report.cmd += s.cmd;
        report.str_mean += s.str_mean;
        report.jit_mean += s.jit_mean;
        report.str_rmse += s.str_rmse;
        report.jit_rmse += s.jit_rmse;
        if (s.mmgt_fallback) ++report.mmgt_fallback_count;
    }
    const double inv = 1.0 / n;
    report.ade *= inv;
    report.fde *= inv;
    report.mae_deg *= inv;
    report.mmade *= inv;
    report.mmfde *= inv;
    report.apd *= inv;
    report.apde *= inv;
    report.cmd *= inv;
    report.str_mean *= inv;
    report.jit_mean *= inv;
    report.str_rmse *= inv;
    report.jit_rmse *= inv;
    return report;
}

std::string metrics_report_json(const MetricsReport& r) {
    nlohmann::json j;
    j["ade"] = r.ade;
    j["fde"] = r.fde;
    j["mae_deg"] = r.mae_deg;
    j["mmade"] = r.mmade;
    j["mmfde"] = r.mmfde;
    j["apd"] = r.apd;
    j["apde"] = r.apde;
    j["cmd"] = r.cmd;
    j["str_mean"] = r.str_mean;
    j["jit_mean"] = r.jit_mean;
    j["str_rmse"] = r.str_rmse;
    j["jit_rmse"] = r.jit_rmse;
    j["mmgt_delta"] = r.mmgt_delta;
    j["samples_per_segment"] = r.samples_per_segment;
    j["segment_count"] = r.segment_count;
    j["mmgt_fallback_count"] = r.mmgt_fallback_count;
    return j.dump(2) + "\n";
}

void write_per_segment_csv(const MetricsReport& r, std::ostream& out) {
    out << "segment,ade,fde,mae_deg,mmade,mmfde,apd,apde,cmd,str_mean,jit_mean,str_rmse,jit_rmse,"
           "mmgt_fallback\n";
    out.precision(17);
    for (size_t i = 0; i < r.per_segment.size(); ++i) {
        const SegmentMetrics& s = r.per_segment[i];
        out << i << "," << s.ade << "," << s.fde << "," << s.mae_deg << "," << s.mmade << ","
            << s.mmfde << "," << s.apd << "," << s.apde << "," << s.cmd << "," << s.str_mean << ","
            << s.jit_mean << "," << s.str_rmse << "," << s.jit_rmse << ","
            << (s.mmgt_fallback ? 1 : 0) << "\n";
    }
}

} // namespace noniso
