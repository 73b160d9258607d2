#pragma once

#include <cassert>
#include <vector>

namespace noniso {

// A pose sequence: frames x joints x 3, meters, row-major.
struct Motion {
    int frames = 0;
    int joints = 0;
    double frame_rate = 24.0;
    std::vector<double> a;

    Motion() = default;
    Motion(int f, int j, double rate = 24.0)
        : frames(f), joints(j), frame_rate(rate), a(static_cast<size_t>(f) * j * 3, 0.0) {}

    double& at(int f, int j, int d) {
        assert(f >= 0 && f < frames && j >= 0 && j < joints && d >= 0 && d < 3);
        return a[(static_cast<size_t>(f) * joints + j) * 3 + d];
    }
    double at(int f, int j, int d) const {
        assert(f >= 0 && f < frames && j >= 0 && j < joints && d >= 0 && d < 3);
        return a[(static_cast<size_t>(f) * joints + j) * 3 + d];
    }

    // First n frames as a new motion.
    Motion head(int n) const {
        assert(n >= 1 && n <= frames);
        Motion out(n, joints, frame_rate);
        std::copy(a.begin(), a.begin() + static_cast<size_t>(n) * joints * 3, out.a.begin());
        return out;
    }

    // Frames [begin, begin+n).
    Motion slice(int begin, int n) const {
        assert(begin >= 0 && n >= 1 && begin + n <= frames);
        Motion out(n, joints, frame_rate);
        std::copy(a.begin() + static_cast<size_t>(begin) * joints * 3,
                  a.begin() + static_cast<size_t>(begin + n) * joints * 3, out.a.begin());
        return out;
    }
};

using PredictionSet = std::vector<Motion>;

} // namespace noniso
