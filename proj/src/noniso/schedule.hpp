#pragma once

#include "noniso/skeleton.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace noniso {

// Cosine step-size schedule. Tables are stored with a virtual index 0:
// alpha[0] = alpha_bar[0] = 1, real steps live at t = 1..T.
struct AlphaSchedule {
    int steps = 0;
    std::vector<double> alpha;     // [0..T]
    std::vector<double> alpha_bar; // [0..T], cumulative product of alpha
};

enum class GammaKind { blend, pure_noniso, pure_iso, discarded };

// Per-step mixing coefficient between isotropic and structured noise.
// blend ramps 0 -> 1 with the mirrored cosine shape; pure_noniso is all
// ones; pure_iso all zeros. For the experimental `discarded` kind the
// table holds the per-step coefficient multiplying Sigma_N, which equals
// alpha_t; build_schedule rewrites it from the alpha schedule it is
// paired with.
struct GammaSchedule {
    GammaKind kind = GammaKind::blend;
    int steps = 0;
    std::vector<double> gamma; // [0..T], gamma[0] = 0
};

const char* gamma_kind_name(GammaKind k);
GammaKind gamma_kind_from_name(const std::string& name);

// Every per-step table the diffusion process needs, fully precomputed.
// lambda_bar is stored exactly as the closed form gives it (no flooring)
// so the recursion identity lambda_bar_t = alpha_t*lambda_bar_{t-1} +
// lambda_t can be checked to machine precision. Quantities that divide by
// lambda_bar apply a 1e-8 floor first; under pure_noniso the floored
// zero modes carry no signal through the reverse chain.
struct NoiseSchedule {
    CorrelationModel correlation;
    AlphaSchedule alpha;
    GammaSchedule gamma;

    std::vector<double> gamma_tilde;                 // [0..T], accumulated coefficient
    std::vector<std::vector<double>> lambda_t;       // [0..T], [0] unused; each length J
    std::vector<std::vector<double>> lambda_bar;     // [0..T], [0] = zeros
    std::vector<std::vector<double>> lambda_q;       // [0..T], valid for t >= 2
    std::vector<std::vector<double>> loss_weight_x0; // [0..T], alpha_bar_t / lambda_bar_t
    std::vector<std::vector<double>> loss_weight_noise; // [0..T]

    int steps() const { return alpha.steps; }
    int order() const { return correlation.order(); }

    double snr(int t, int mode) const; // alpha_bar_t / floored lambda_bar_t; snr(0,*) = 1/floor
};

inline constexpr double kLambdaFloor = 1e-8;

AlphaSchedule cosine_alpha_schedule(int steps, double offset = 0.008);
GammaSchedule gamma_schedule(int steps, GammaKind kind, double offset = 0.008);
NoiseSchedule build_schedule(const CorrelationModel& correlation, const AlphaSchedule& alpha,
                             const GammaSchedule& gamma);

struct ValidationItem {
    std::string name;
    double max_violation = 0.0;
    bool pass = true;
    bool informational = false; // reported but not gating (SNR check, discarded kind)
};

struct ValidationReport {
    std::vector<ValidationItem> items;
    std::vector<std::string> notes;
    double tolerance = 0.0;
    bool pass = true;
};

// Checks the identities the tables must satisfy: lambda_bar recursion,
// gamma_tilde recursion vs closed sum, lambda_q positivity on live modes,
// alpha_bar monotonicity, SNR monotonicity.
ValidationReport validate_schedule(const NoiseSchedule& s, double tol = 1e-10);

void write_schedule_csv(const NoiseSchedule& s, std::ostream& out);

} // namespace noniso
