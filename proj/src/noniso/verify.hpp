#pragma once

#include "noniso/diffusion.hpp"
#include "noniso/skeleton.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace noniso {

struct CheckResult {
    std::string name;
    double max_violation = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

struct SuiteReport {
    std::string suite;
    std::vector<CheckResult> checks;
    bool pass = true;
    double seconds = 0.0;

    void add(const std::string& name, double violation, double tol);
};

// Monte-Carlo forward equivalence: the empirical law of iterated
// transitions at t = T must match the analytic closed-form marginal for
// J in {2,3,5}, T = 10, every schedule kind. Mean tolerance is
// sigma_mult * sigma / sqrt(samples) per coordinate, covariance tolerance
// is relative Frobenius.
SuiteReport verify_forward(std::uint64_t seed, int samples = 200000, double sigma_mult = 3.0,
                           double cov_rel_tol = 0.02);

// Posterior parameters against independent Schur-complement conditioning
// of the joint Gaussian of (x_{t-1}, x_t) given x0. For the pure_noniso
// kind only modes with nonzero correlation eigenvalue are compared (the
// floored dead modes intentionally carry no signal).
SuiteReport verify_posterior(std::uint64_t seed, int configs = 100, double tol = 1e-10);

// Every forward/posterior/loss quantity under the pure_iso kind against an
// independently coded scalar textbook diffusion model.
SuiteReport verify_iso_reduction(std::uint64_t seed, double tol = 1e-12);

// Schedule identities for T in {1, 10, 100} and all kinds.
SuiteReport verify_schedule(double tol = 1e-12);

// Central finite differences against every layer's analytic backward and
// both loss gradients. `violation` is |analytic - fd| / max(|analytic|,
// |fd|, 1e-3); absolute differences under 1e-7 count as agreement (they
// sit below the h^2 truncation level of the difference quotient itself).
SuiteReport verify_gradients(std::uint64_t seed, int trials = 20, double tol = 1e-5);

// Optimized metric kernels against the brute-force references on random
// instances, plus the exact zero-velocity pattern.
SuiteReport verify_metrics(std::uint64_t seed, int instances = 40, double tol = 1e-10);

std::string suites_json(const std::vector<SuiteReport>& suites);
bool all_pass(const std::vector<SuiteReport>& suites);

// Random simple connected graph (spanning tree plus extra edges), unit
// bone lengths, hub at joint 0.
Skeleton random_connected_skeleton(int joints, Rng& rng);

// Finite-difference helper: central differences with step h on each entry
// of `values`, compared against `analytic`; returns the worst violation
// under the gradient-check metric above.
double fd_violation(const std::function<double()>& f, double* values, const double* analytic,
                    size_t count, double h = 1e-4);

} // namespace noniso
