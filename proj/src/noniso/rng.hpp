#pragma once

#include <array>
#include <cstdint>

namespace noniso {

// xoshiro256++ generator with splitmix64 seeding and Box-Muller normals.
// Fully specified here so sampled streams are identical across platforms
// and standard-library versions.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();

    // Uniform in [0, 1) with 53-bit resolution.
    double uniform();

    // Uniform integer in [0, n).
    std::uint64_t uniform_index(std::uint64_t n);

    // Standard normal draw (Box-Muller, cached spare).
    double normal();

    // Independent stream for a sub-task: mixes (seed, stream) through
    // splitmix64 so parallel workers never share state.
    static Rng derive(std::uint64_t seed, std::uint64_t stream);

private:
    std::array<std::uint64_t, 4> state_{};
    bool has_spare_ = false;
    double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t& state);

} // namespace noniso
