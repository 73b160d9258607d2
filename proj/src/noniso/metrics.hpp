#pragma once

#include "noniso/motion.hpp"
#include "noniso/skeleton.hpp"
#include "noniso/synthetic.hpp"

#include <string>
#include <vector>

namespace noniso {

// Sequence norm used by the precision/diversity metrics, pinned so results
// are reproducible: mean over frames of the per-frame Euclidean norm of the
// stacked J x 3 difference, divided by sqrt(J). Other conventions exist in
// the literature; absolute values are not comparable across conventions.
double sequence_distance(const Motion& a, const Motion& b);
double final_frame_distance(const Motion& a, const Motion& b);

double ade(const PredictionSet& preds, const Motion& gt);
double fde(const PredictionSet& preds, const Motion& gt);

// Multimodal ground truth: for each segment the indices of other segments
// whose last observation frame is within delta (plain stacked L2, strict <).
struct MMGTIndex {
    double delta = 0.0;
    std::vector<std::vector<int>> neighbors; // per segment, self excluded
};

MMGTIndex build_mmgt(const DatasetSplit& split, double delta);

double mmade(const PredictionSet& preds, const std::vector<const Motion*>& mmgt);
double mmfde(const PredictionSet& preds, const std::vector<const Motion*>& mmgt);

// Average pairwise distance over the N(N-1) ordered pairs; 0 when N < 2.
double apd(const PredictionSet& preds);
double apd(const std::vector<const Motion*>& motions);
double apde(const PredictionSet& preds, const std::vector<const Motion*>& mmgt);

// Per-frame average displacement magnitudes of the predictions (mean over
// samples and joints), length F-1.
std::vector<double> prediction_velocity_profile(const PredictionSet& preds);
double cmd(const PredictionSet& preds, double dataset_mean_velocity);

struct BodyRealism {
    double str_mean = 0.0; // percent
    double jit_mean = 0.0;
    double str_rmse = 0.0;
    double jit_rmse = 0.0;
};

// Normalized limb-length error and frame-to-frame jitter against the
// skeleton's reference lengths; mean/RMSE over time, then mean over limbs
// and samples, reported x100.
BodyRealism body_realism(const PredictionSet& preds, const Skeleton& skeleton);

struct MaeResult {
    double degrees = 0.0;
    bool had_degenerate_bone = false; // zero-length predicted bone -> 90 deg
};

// Mean bone-direction angle error in degrees: per frame the mean over bones
// of the angle between predicted and ground-truth directions, meaned over
// frames, minimum over samples.
MaeResult mae_angle(const PredictionSet& preds, const Motion& gt, const Skeleton& skeleton);

enum class BoneErrorKind { stretch, jitter };

// Fraction of motions whose worst per-frame/per-bone error stays below each
// threshold. Thresholds must be ascending.
std::vector<double> validity_curve(const PredictionSet& preds, const Skeleton& skeleton,
                                   const std::vector<double>& thresholds,
                                   BoneErrorKind kind = BoneErrorKind::stretch);

// APD restricted to the motions valid at each threshold; 0 when fewer than
// two qualify.
std::vector<double> delta_apd(const PredictionSet& preds, const Skeleton& skeleton,
                              const std::vector<double>& thresholds,
                              BoneErrorKind kind = BoneErrorKind::jitter);

struct SegmentMetrics {
    double ade = 0.0, fde = 0.0, mae_deg = 0.0;
    double mmade = 0.0, mmfde = 0.0;
    double apd = 0.0, apde = 0.0;
    double cmd = 0.0;
    double str_mean = 0.0, jit_mean = 0.0, str_rmse = 0.0, jit_rmse = 0.0;
    bool mmgt_fallback = false; // MMGT empty; GT used instead
    bool degenerate_bone = false;
};

struct MetricsReport {
    double ade = 0.0, fde = 0.0, mae_deg = 0.0;
    double mmade = 0.0, mmfde = 0.0;
    double apd = 0.0, apde = 0.0;
    double cmd = 0.0;
    double str_mean = 0.0, jit_mean = 0.0, str_rmse = 0.0, jit_rmse = 0.0;
    double mmgt_delta = 0.0;
    int samples_per_segment = 0;
    int segment_count = 0;
    int mmgt_fallback_count = 0;
    std::vector<SegmentMetrics> per_segment;
};

SegmentMetrics evaluate_segment(const PredictionSet& preds, const Motion& gt_future,
                                const std::vector<const Motion*>& mmgt, const Skeleton& skeleton,
                                double dataset_mean_velocity);

// Full evaluation: one prediction set per test segment. threads > 1 runs
// segments in parallel; the reduction order is fixed by segment index, so
// results are bitwise identical for any thread count.
MetricsReport evaluate_predictions(const std::vector<PredictionSet>& preds,
                                   const DatasetSplit& split, const Skeleton& skeleton,
                                   double mmgt_delta, int threads = 1);

std::string metrics_report_json(const MetricsReport& r);
void write_per_segment_csv(const MetricsReport& r, std::ostream& out);

// Serial brute-force reference implementations (test oracles and the
// baseline for the benchmark): same contracts, straight-line loops.
namespace ref {
double sequence_distance(const Motion& a, const Motion& b);
double ade(const PredictionSet& preds, const Motion& gt);
double fde(const PredictionSet& preds, const Motion& gt);
double mmade(const PredictionSet& preds, const std::vector<const Motion*>& mmgt);
double mmfde(const PredictionSet& preds, const std::vector<const Motion*>& mmgt);
double apd(const PredictionSet& preds);
double cmd(const PredictionSet& preds, double dataset_mean_velocity);
BodyRealism body_realism(const PredictionSet& preds, const Skeleton& skeleton);
MaeResult mae_angle(const PredictionSet& preds, const Motion& gt, const Skeleton& skeleton);
MMGTIndex build_mmgt(const DatasetSplit& split, double delta);
std::vector<double> validity_curve(const PredictionSet& preds, const Skeleton& skeleton,
                                   const std::vector<double>& thresholds, BoneErrorKind kind);
std::vector<double> delta_apd(const PredictionSet& preds, const Skeleton& skeleton,
                              const std::vector<double>& thresholds, BoneErrorKind kind);
} // namespace ref

} // namespace noniso
