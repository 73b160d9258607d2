#include "noniso/synthetic.hpp"

#include <cmath>

namespace noniso {

namespace {

constexpr int kMaxModes = 8;

// Per-bone angle programs: polar/azimuth each a base sinusoid with random
// phases, plus a mode-specific deviation that starts at the branch frame.
struct ChainProgram {
    std::vector<double> theta0, phi0;        // rest angles
    std::vector<double> theta_phase, phi_phase;
    double base_freq_theta = 0.7;  // Hz
    double base_freq_phi = 0.45;   // Hz
    double amp_theta = 0.3;        // rad
    double amp_phi = 0.25;         // rad
};

ChainProgram draw_program(int bones, Rng& rng) {
    ChainProgram p;
    p.theta0.resize(bones);
    p.phi0.resize(bones);
    p.theta_phase.resize(bones);
    p.phi_phase.resize(bones);
    for (int b = 0; b < bones; ++b) {
        p.theta0[b] = M_PI / 2.0 + 0.25 * (2.0 * rng.uniform() - 1.0);
        p.phi0[b] = 0.35 * b + 0.3 * (2.0 * rng.uniform() - 1.0);
        p.theta_phase[b] = 2.0 * M_PI * rng.uniform();
        p.phi_phase[b] = 2.0 * M_PI * rng.uniform();
    }
    return p;
}

struct ModeProgram {
    double freq;      // Hz
    double phase;     // rad
    double bone_skew; // rad per bone index
    double amp;       // rad
};

ModeProgram mode_program(int mode) {
    ModeProgram m;
    m.freq = 0.5 + 0.4 * mode;
    m.phase = 2.1 * mode;
    m.bone_skew = 0.5 + 0.6 * mode;
    m.amp = 0.45;
    return m;
}

double smoothstep01(double u) {
    if (u <= 0.0) return 0.0;
    if (u >= 1.0) return 1.0;
    return u * u * (3.0 - 2.0 * u);
}

Motion run_kinematics(const Skeleton& skeleton, const ChainProgram& p, int mode, int frames,
                      int branch_frame, double frame_rate) {
    const int bones = skeleton.bones();
    const ModeProgram mp = mode_program(mode);
    constexpr double kRampSeconds = 0.25;

    Motion out(frames, skeleton.joints(), frame_rate);
    for (int f = 0; f < frames; ++f) {
        const double t = f / frame_rate;
        const double since_branch = (f - branch_frame) / frame_rate;
        const double ramp = smoothstep01(since_branch / kRampSeconds);

        double px = 0.0, py = 0.0, pz = 0.0;
        out.at(f, 0, 0) = px;
        out.at(f, 0, 1) = py;
        out.at(f, 0, 2) = pz;
        for (int b = 0; b < bones; ++b) {
            double theta = p.theta0[b] +
                           p.amp_theta * std::sin(2.0 * M_PI * p.base_freq_theta * t + p.theta_phase[b]);
            double phi = p.phi0[b] +
                         p.amp_phi * std::sin(2.0 * M_PI * p.base_freq_phi * t + p.phi_phase[b]);
            if (ramp > 0.0) {
                const double dev =
                    mp.amp * std::sin(2.0 * M_PI * mp.freq * since_branch + mp.phase + mp.bone_skew * b);
                theta += ramp * 0.6 * dev;
                phi += ramp * dev;
            }
            const double len = skeleton.bone_lengths[b];
            px += len * std::sin(theta) * std::cos(phi);
            py += len * std::sin(theta) * std::sin(phi);
            pz += len * std::cos(theta);
            out.at(f, b + 1, 0) = px;
            out.at(f, b + 1, 1) = py;
            out.at(f, b + 1, 2) = pz;
        }
    }
    return out;
}

void add_jitter(Motion& m, double noise_std, Rng& rng) {
    if (noise_std <= 0.0) return;
    for (double& v : m.a) v += noise_std * rng.normal();
}

std::vector<double> default_lengths(int joints) {
    std::vector<double> lengths(joints - 1);
    for (int b = 0; b < joints - 1; ++b) lengths[b] = 0.40 - 0.02 * (b % 4);
    return lengths;
}

int draw_mode(const std::vector<double>& weights, Rng& rng) {
    const double u = rng.uniform();
    double acc = 0.0;
    for (size_t m = 0; m < weights.size(); ++m) {
        acc += weights[m];
        if (u < acc) return static_cast<int>(m);
    }
    return static_cast<int>(weights.size()) - 1;
}

} // namespace

int mode_count_limit() {
    return kMaxModes;
}

Skeleton make_chain_skeleton(int joints, const std::vector<double>& lengths) {
    require(joints >= 2, "make_chain_skeleton: need at least 2 joints");
    require(static_cast<int>(lengths.size()) == joints - 1,
            "make_chain_skeleton: need exactly " + std::to_string(joints - 1) + " bone lengths");
    for (double l : lengths)
        require(l > 0.0, "make_chain_skeleton: bone lengths must be positive");

    Skeleton s;
    for (int j = 0; j < joints; ++j) s.joint_names.push_back("j" + std::to_string(j));
    for (int j = 0; j + 1 < joints; ++j) s.edges.emplace_back(j, j + 1);
    s.bone_lengths = lengths;
    s.hub_joint = joints / 2;
    s.validate();
    return s;
}

Motion gen_motion(const Skeleton& skeleton, int mode, int frames, double noise_std, Rng& rng,
                  int branch_frame, double frame_rate) {
    require(mode >= 0 && mode < kMaxModes, "gen_motion: mode out of range");
    require(frames >= 1, "gen_motion: need at least one frame");
    skeleton.validate();

    const ChainProgram p = draw_program(skeleton.bones(), rng);
    Motion m = run_kinematics(skeleton, p, mode, frames, branch_frame, frame_rate);
    add_jitter(m, noise_std, rng);
    return m;
}

void DatasetConfig::validate() const {
    require(joints >= 2, "dataset config: joints >= 2 required");
    require(past_frames >= 2, "dataset config: past_frames >= 2 required (decoder conditioning)");
    require(future_frames >= 1, "dataset config: future_frames >= 1 required");
    if (gen_frames != 0)
        require(gen_frames >= past_frames + future_frames,
                "dataset config: gen_frames " + std::to_string(gen_frames) +
                    " shorter than past+future " + std::to_string(past_frames + future_frames));
    require(modes >= 1 && modes <= kMaxModes,
            "dataset config: modes must be in 1.." + std::to_string(kMaxModes));
    if (!mode_weights.empty()) {
        require(static_cast<int>(mode_weights.size()) == modes,
                "dataset config: mode_weights size must equal modes");
        double sum = 0.0;
        for (double w : mode_weights) {
            require(w >= 0.0, "dataset config: negative mode weight");
            sum += w;
        }
        require(std::fabs(sum - 1.0) < 1e-9, "dataset config: mode weights must sum to 1");
    }
    require(train_groups >= 1 && test_groups >= 1 && val_groups >= 0,
            "dataset config: need at least one train and test group");
    require(segments_per_group >= 1, "dataset config: segments_per_group >= 1 required");
    require(noise_std >= 0.0, "dataset config: noise_std must be nonnegative");
    if (!bone_lengths.empty())
        require(static_cast<int>(bone_lengths.size()) == joints - 1,
                "dataset config: bone_lengths size must be joints-1");
}

Dataset make_dataset(const DatasetConfig& config, Rng& rng) {
    config.validate();
    DatasetConfig cfg = config;
    if (cfg.bone_lengths.empty()) cfg.bone_lengths = default_lengths(cfg.joints);
    std::vector<double> weights = cfg.mode_weights;
    if (weights.empty()) weights.assign(cfg.modes, 1.0 / cfg.modes);

    Dataset ds;
    ds.config = cfg;
    ds.skeleton = make_chain_skeleton(cfg.joints, cfg.bone_lengths);

    const int total = cfg.gen_frames == 0 ? cfg.past_frames + cfg.future_frames : cfg.gen_frames;

    auto fill_split = [&](DatasetSplit& split, int groups) {
        for (int g = 0; g < groups; ++g) {
            const ChainProgram prog = draw_program(ds.skeleton.bones(), rng);
            for (int k = 0; k < cfg.segments_per_group; ++k) {
                const int mode = draw_mode(weights, rng);
                Motion full = run_kinematics(ds.skeleton, prog, mode, total, cfg.past_frames,
                                             cfg.frame_rate);
                Segment seg;
                seg.mode_label = mode;
                seg.past = full.head(cfg.past_frames);
                seg.future = full.slice(cfg.past_frames, cfg.future_frames);
                add_jitter(seg.future, cfg.noise_std, rng);
                split.segments.push_back(std::move(seg));
            }
        }
    };

    fill_split(ds.train, cfg.train_groups);
    fill_split(ds.val, cfg.val_groups);
    fill_split(ds.test, cfg.test_groups);

    // Average per-frame velocity over the test split (clean reference for
    // CMD): mean over joints of the per-step displacement norm.
    double vel_sum = 0.0;
    long vel_count = 0;
    for (const Segment& seg : ds.test.segments) {
        const Motion& m = seg.future;
        for (int f = 0; f + 1 < m.frames; ++f) {
            double frame_mean = 0.0;
            for (int j = 0; j < m.joints; ++j) {
                double dx = m.at(f + 1, j, 0) - m.at(f, j, 0);
                double dy = m.at(f + 1, j, 1) - m.at(f, j, 1);
                double dz = m.at(f + 1, j, 2) - m.at(f, j, 2);
                frame_mean += std::sqrt(dx * dx + dy * dy + dz * dz);
            }
            vel_sum += frame_mean / m.joints;
            ++vel_count;
        }
    }
    const double mean_vel = vel_count > 0 ? vel_sum / vel_count : 0.0;
    ds.train.mean_velocity = mean_vel;
    ds.val.mean_velocity = mean_vel;
    ds.test.mean_velocity = mean_vel;
    return ds;
}

} // namespace noniso
