#include "noniso/metrics.hpp"

#include "noniso/mat.hpp"

#include <algorithm>
#include <cmath>

// Deliberately plain implementations: index arithmetic only, ordered pairs
// enumerated in full, every distance recomputed on demand. These are the
// oracles the optimized kernels are checked against.
namespace noniso::ref {

double sequence_distance(const Motion& a, const Motion& b) {
    double total = 0.0;
    for (int f = 0; f < a.frames; ++f) {
        double sq = 0.0;
        for (int j = 0; j < a.joints; ++j)
            for (int d = 0; d < 3; ++d) {
                const double diff = a.at(f, j, d) - b.at(f, j, d);
                sq += diff * diff;
            }
        total += std::sqrt(sq) / std::sqrt(static_cast<double>(a.joints));
    }
    return total / a.frames;
}

namespace {

double last_frame_distance(const Motion& a, const Motion& b) {
    double sq = 0.0;
    const int f = a.frames - 1;
    for (int j = 0; j < a.joints; ++j)
        for (int d = 0; d < 3; ++d) {
            const double diff = a.at(f, j, d) - b.at(f, j, d);
            sq += diff * diff;
        }
    return std::sqrt(sq) / std::sqrt(static_cast<double>(a.joints));
}

double bone_length(const Motion& m, const Skeleton& s, int f, int b) {
    const int i = s.edges[b].first;
    const int j = s.edges[b].second;
    double sq = 0.0;
    for (int d = 0; d < 3; ++d) {
        const double diff = m.at(f, j, d) - m.at(f, i, d);
        sq += diff * diff;
    }
    return std::sqrt(sq);
}

double motion_worst_error(const Motion& m, const Skeleton& s, BoneErrorKind kind) {
    double worst = 0.0;
    if (kind == BoneErrorKind::stretch) {
        for (int f = 0; f < m.frames; ++f)
            for (int b = 0; b < s.bones(); ++b)
                worst = std::max(worst, std::fabs(s.bone_lengths[b] - bone_length(m, s, f, b)) /
                                            s.bone_lengths[b]);
    } else {
        for (int f = 0; f + 1 < m.frames; ++f)
            for (int b = 0; b < s.bones(); ++b)
                worst = std::max(worst, std::fabs(bone_length(m, s, f + 1, b) -
                                                  bone_length(m, s, f, b)) /
                                            s.bone_lengths[b]);
    }
    return worst;
}

} // namespace

double ade(const PredictionSet& preds, const Motion& gt) {
    double best = INFINITY;
    for (const Motion& p : preds) best = std::min(best, ref::sequence_distance(p, gt));
    return best;
}

double fde(const PredictionSet& preds, const Motion& gt) {
    double best = INFINITY;
    for (const Motion& p : preds) best = std::min(best, last_frame_distance(p, gt));
    return best;
}

double mmade(const PredictionSet& preds, const std::vector<const Motion*>& mmgt) {
    double best = INFINITY;
    for (const Motion& p : preds)
        for (const Motion* g : mmgt) best = std::min(best, ref::sequence_distance(p, *g));
    return best;
}

double mmfde(const PredictionSet& preds, const std::vector<const Motion*>& mmgt) {
    double best = INFINITY;
    for (const Motion& p : preds)
        for (const Motion* g : mmgt) best = std::min(best, last_frame_distance(p, *g));
    return best;
}

double apd(const PredictionSet& preds) {
    const int n = static_cast<int>(preds.size());
    if (n < 2) return 0.0;
    double acc = 0.0;
    int pairs = 0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            if (i == j) continue;
            acc += ref::sequence_distance(preds[i], preds[j]);
            ++pairs;
        }
    return acc / pairs;
}

double cmd(const PredictionSet& preds, double dataset_mean_velocity) {
    const int frames = preds.front().frames;
    const int joints = preds.front().joints;
    double total = 0.0;
    for (int f = 0; f + 1 < frames; ++f) {
        double mf = 0.0;
        for (const Motion& m : preds) {
            for (int j = 0; j < joints; ++j) {
                double sq = 0.0;
                for (int d = 0; d < 3; ++d) {
                    const double diff = m.at(f + 1, j, d) - m.at(f, j, d);
                    sq += diff * diff;
                }
                mf += std::sqrt(sq);
            }
        }
        mf /= static_cast<double>(preds.size()) * joints;
        total += (frames - 1.0 - f) * std::fabs(mf - dataset_mean_velocity);
    }
    return total;
}

BodyRealism body_realism(const PredictionSet& preds, const Skeleton& skeleton) {
    BodyRealism out;
    double n_stretch = 0.0, n_jit = 0.0;
    for (const Motion& m : preds) {
        for (int b = 0; b < skeleton.bones(); ++b) {
            const double ref_len = skeleton.bone_lengths[b];
            double e_sum = 0.0, e_sq = 0.0;
            for (int f = 0; f < m.frames; ++f) {
                const double e = std::fabs(ref_len - bone_length(m, skeleton, f, b)) / ref_len;
                e_sum += e;
                e_sq += e * e;
            }
            out.str_mean += e_sum / m.frames;
            out.str_rmse += std::sqrt(e_sq / m.frames);
            n_stretch += 1.0;
            if (m.frames >= 2) {
                double v_sum = 0.0, v_sq = 0.0;
                for (int f = 0; f + 1 < m.frames; ++f) {
                    const double v = std::fabs(bone_length(m, skeleton, f + 1, b) -
                                               bone_length(m, skeleton, f, b)) /
                                     ref_len;
                    v_sum += v;
                    v_sq += v * v;
                }
                out.jit_mean += v_sum / (m.frames - 1);
                out.jit_rmse += std::sqrt(v_sq / (m.frames - 1));
                n_jit += 1.0;
            }
        }
    }
    if (n_stretch > 0) {
        out.str_mean *= 100.0 / n_stretch;
        out.str_rmse *= 100.0 / n_stretch;
    }
    if (n_jit > 0) {
        out.jit_mean *= 100.0 / n_jit;
        out.jit_rmse *= 100.0 / n_jit;
    }
    return out;
}

MaeResult mae_angle(const PredictionSet& preds, const Motion& gt, const Skeleton& skeleton) {
    MaeResult out;
    out.degrees = INFINITY;
    for (const Motion& p : preds) {
        double frame_acc = 0.0;
        bool degenerate = false;
        for (int f = 0; f < p.frames; ++f) {
            double bone_acc = 0.0;
            for (int b = 0; b < skeleton.bones(); ++b) {
                const int i = skeleton.edges[b].first;
                const int j = skeleton.edges[b].second;
                double dot = 0.0, np = 0.0, ng = 0.0;
                for (int d = 0; d < 3; ++d) {
                    const double vp = p.at(f, j, d) - p.at(f, i, d);
                    const double vg = gt.at(f, j, d) - gt.at(f, i, d);
                    dot += vp * vg;
                    np += vp * vp;
                    ng += vg * vg;
                }
                np = std::sqrt(np);
                ng = std::sqrt(ng);
                if (np < 1e-12 || ng < 1e-12) {
                    bone_acc += 90.0;
                    degenerate = true;
                } else {
                    bone_acc += std::acos(std::clamp(dot / (np * ng), -1.0, 1.0)) * 180.0 / M_PI;
                }
            }
            frame_acc += bone_acc / skeleton.bones();
        }
        out.degrees = std::min(out.degrees, frame_acc / p.frames);
        out.had_degenerate_bone = out.had_degenerate_bone || degenerate;
    }
    return out;
}

MMGTIndex build_mmgt(const DatasetSplit& split, double delta) {
    const int n = static_cast<int>(split.segments.size());
    MMGTIndex idx;
    idx.delta = delta;
    idx.neighbors.assign(n, {});
    for (int a = 0; a < n; ++a) {
        for (int b = 0; b < n; ++b) {
            if (a == b) continue;
            const Motion& pa = split.segments[a].past;
            const Motion& pb = split.segments[b].past;
            double sq = 0.0;
            for (int j = 0; j < pa.joints; ++j)
                for (int d = 0; d < 3; ++d) {
                    const double diff = pa.at(pa.frames - 1, j, d) - pb.at(pb.frames - 1, j, d);
                    sq += diff * diff;
                }
            if (std::sqrt(sq) < delta) idx.neighbors[a].push_back(b);
        }
    }
    return idx;
}

std::vector<double> validity_curve(const PredictionSet& preds, const Skeleton& skeleton,
                                   const std::vector<double>& thresholds, BoneErrorKind kind) {
    std::vector<double> out;
    for (double th : thresholds) {
        int valid = 0;
        for (const Motion& m : preds)
            if (motion_worst_error(m, skeleton, kind) <= th) ++valid;
        out.push_back(static_cast<double>(valid) / preds.size());
    }
    return out;
}

std::vector<double> delta_apd(const PredictionSet& preds, const Skeleton& skeleton,
                              const std::vector<double>& thresholds, BoneErrorKind kind) {
    std::vector<double> out;
    for (double th : thresholds) {
        PredictionSet valid;
        for (const Motion& m : preds)
            if (motion_worst_error(m, skeleton, kind) <= th) valid.push_back(m);
        out.push_back(valid.size() < 2 ? 0.0 : ref::apd(valid));
    }
    return out;
}

} // namespace noniso::ref
