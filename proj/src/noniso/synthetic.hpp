#pragma once

#include "noniso/motion.hpp"
#include "noniso/rng.hpp"
#include "noniso/skeleton.hpp"

#include <cstdint>
#include <vector>

namespace noniso {

// A past/future pair cut from one generated sequence; past and future are
// contiguous in time. mode_label records which future program produced it.
struct Segment {
    Motion past;
    Motion future;
    int mode_label = 0;
};

struct DatasetSplit {
    std::vector<Segment> segments;
    // Dataset-average per-frame velocity (mean over joints of the 3D
    // displacement norm), taken from the test split; consumed by CMD.
    double mean_velocity = 0.0;
};

struct DatasetConfig {
    int joints = 7;
    std::vector<double> bone_lengths; // empty -> defaults for `joints`
    int past_frames = 12;
    int future_frames = 48;
    int gen_frames = 0; // 0 -> past+future; otherwise must be >= past+future
    double frame_rate = 24.0;
    int modes = 3;
    std::vector<double> mode_weights; // empty -> uniform
    int train_groups = 500;
    int val_groups = 10;
    int test_groups = 50;
    int segments_per_group = 4; // segments sharing an identical past
    double noise_std = 0.01;    // positional jitter added after kinematics

    void validate() const;
};

struct Dataset {
    Skeleton skeleton;
    DatasetConfig config;
    DatasetSplit train, val, test;
};

// Path-graph skeleton 0-1-...-J-1; hub set to the middle joint.
Skeleton make_chain_skeleton(int joints, const std::vector<double>& lengths);

// Sinusoidal joint-angle program driven through forward kinematics, so the
// clean output has exactly constant bone lengths. The first branch_frame
// frames follow a mode-independent base program; afterwards a mode-specific
// deviation ramps in, so sequences generated from the same rng state share
// an identical prefix across modes. noise_std > 0 adds i.i.d. positional
// jitter after kinematics.
Motion gen_motion(const Skeleton& skeleton, int mode, int frames, double noise_std, Rng& rng,
                  int branch_frame = 12, double frame_rate = 24.0);

// Groups of segments with bitwise-identical pasts whose futures branch into
// randomly drawn modes; the multimodal structure of the predictive
// distribution is therefore known exactly.
Dataset make_dataset(const DatasetConfig& config, Rng& rng);

int mode_count_limit();

} // namespace noniso
