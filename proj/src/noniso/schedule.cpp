#include "noniso/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

namespace noniso {

namespace {

double cosine_f(double t, double steps, double offset) {
    const double arg = ((t / steps + offset) / (1.0 + offset)) * (M_PI / 2.0);
    const double c = std::cos(arg);
    return c * c;
}

constexpr double kAlphaMin = 0.001;
constexpr double kAlphaMax = 0.9999;

} // namespace

const char* gamma_kind_name(GammaKind k) {
    switch (k) {
        case GammaKind::blend: return "blend";
        case GammaKind::pure_noniso: return "pure_noniso";
        case GammaKind::pure_iso: return "pure_iso";
        case GammaKind::discarded: return "discarded";
    }
    return "?";
}

GammaKind gamma_kind_from_name(const std::string& name) {
    if (name == "blend") return GammaKind::blend;
    if (name == "pure_noniso") return GammaKind::pure_noniso;
    if (name == "pure_iso") return GammaKind::pure_iso;
    if (name == "discarded") return GammaKind::discarded;
    throw ValidationError("unknown gamma schedule kind: " + name);
}

AlphaSchedule cosine_alpha_schedule(int steps, double offset) {
    require(steps >= 1, "cosine_alpha_schedule: steps must be >= 1");
    require(offset > 0.0, "cosine_alpha_schedule: offset must be positive");

    AlphaSchedule s;
    s.steps = steps;
    s.alpha.assign(steps + 1, 1.0);
    s.alpha_bar.assign(steps + 1, 1.0);

    const double f0 = cosine_f(0.0, steps, offset);
    double prev_raw = 1.0;
    for (int t = 1; t <= steps; ++t) {
        const double raw = cosine_f(t, steps, offset) / f0;
        double a = raw / prev_raw;
        a = std::clamp(a, kAlphaMin, kAlphaMax);
        s.alpha[t] = a;
        s.alpha_bar[t] = s.alpha_bar[t - 1] * a;
        prev_raw = raw;
    }
    return s;
}

GammaSchedule gamma_schedule(int steps, GammaKind kind, double offset) {
    require(steps >= 1, "gamma_schedule: steps must be >= 1");
    GammaSchedule g;
    g.kind = kind;
    g.steps = steps;
    g.gamma.assign(steps + 1, 0.0);

    switch (kind) {
        case GammaKind::blend: {
            const double f0 = cosine_f(0.0, steps, offset);
            for (int t = 1; t <= steps; ++t)
                g.gamma[t] = 1.0 - cosine_f(t, steps, offset) / f0;
            break;
        }
        case GammaKind::pure_noniso:
            for (int t = 1; t <= steps; ++t) g.gamma[t] = 1.0;
            break;
        case GammaKind::pure_iso:
            break;
        case GammaKind::discarded: {
            // Placeholder until paired with an alpha schedule; see
            // build_schedule.
            const AlphaSchedule a = cosine_alpha_schedule(steps, offset);
            for (int t = 1; t <= steps; ++t) g.gamma[t] = a.alpha[t];
            break;
        }
    }
    return g;
}

double NoiseSchedule::snr(int t, int mode) const {
    const double lb = t == 0 ? 0.0 : lambda_bar[t][mode];
    return alpha.alpha_bar[t] / std::max(lb, kLambdaFloor);
}

NoiseSchedule build_schedule(const CorrelationModel& correlation, const AlphaSchedule& alpha,
                             const GammaSchedule& gamma) {
    require(alpha.steps == gamma.steps, "build_schedule: alpha steps " + std::to_string(alpha.steps) +
                                            " != gamma steps " + std::to_string(gamma.steps));
    const int T = alpha.steps;
    const int J = correlation.order();
    require(J >= 1, "build_schedule: empty correlation model");
    for (double v : correlation.eigvals)
        require(v >= -1e-12, "build_schedule: correlation eigenvalues must be nonnegative");
    for (int t = 1; t <= T; ++t) {
        require(alpha.alpha[t] > 0.0 && alpha.alpha[t] < 1.0, "build_schedule: alpha out of (0,1)");
        require(gamma.gamma[t] >= 0.0 && gamma.gamma[t] <= 1.0, "build_schedule: gamma out of [0,1]");
    }

    NoiseSchedule s;
    s.correlation = correlation;
    s.alpha = alpha;
    s.gamma = gamma;

    // Per-mode basis of the structured part. The per-step covariance is
    //   blend family: (1-a_t) * (g_t*Sigma_N + (1-g_t)*I)
    //                = gbar_t*(Sigma_N - I) + (1-a_t)*I, gbar_t = (1-a_t)*g_t
    //   discarded:    a_t*Sigma_N + (1-a_t)*I,           gbar_t = a_t
    // Both accumulate through gtilde_t = gbar_t + a_t*gtilde_{t-1}, giving
    //   lambda_bar_t = gtilde_t*basis + (1 - abar_t).
    const bool discarded = gamma.kind == GammaKind::discarded;
    std::vector<double> basis(J);
    for (int k = 0; k < J; ++k)
        basis[k] = discarded ? correlation.eigvals[k] : correlation.eigvals[k] - 1.0;

    if (discarded) {
        for (int t = 1; t <= T; ++t) s.gamma.gamma[t] = alpha.alpha[t];
    }

    s.gamma_tilde.assign(T + 1, 0.0);
    s.lambda_t.assign(T + 1, std::vector<double>(J, 0.0));
    s.lambda_bar.assign(T + 1, std::vector<double>(J, 0.0));
    s.lambda_q.assign(T + 1, std::vector<double>(J, 0.0));
    s.loss_weight_x0.assign(T + 1, std::vector<double>(J, 0.0));
    s.loss_weight_noise.assign(T + 1, std::vector<double>(J, 0.0));

    for (int t = 1; t <= T; ++t) {
        const double a = alpha.alpha[t];
        const double abar = alpha.alpha_bar[t];
        const double gbar = discarded ? a : (1.0 - a) * s.gamma.gamma[t];
        s.gamma_tilde[t] = gbar + a * s.gamma_tilde[t - 1];
        for (int k = 0; k < J; ++k) {
            s.lambda_t[t][k] = gbar * basis[k] + (1.0 - a);
            s.lambda_bar[t][k] = s.gamma_tilde[t] * basis[k] + (1.0 - abar);
        }
    }

    for (int t = 1; t <= T; ++t) {
        const double abar = alpha.alpha_bar[t];
        for (int k = 0; k < J; ++k) {
            const double lb = std::max(s.lambda_bar[t][k], kLambdaFloor);
            s.loss_weight_x0[t][k] = abar / lb;
            s.loss_weight_noise[t][k] =
                (s.lambda_t[t][k] / abar) * (s.snr(t - 1, k) - s.snr(t, k));
            if (t >= 2)
                s.lambda_q[t][k] = s.lambda_t[t][k] * s.lambda_bar[t - 1][k] / lb;
        }
    }
    return s;
}

ValidationReport validate_schedule(const NoiseSchedule& s, double tol) {
    const int T = s.steps();
    const int J = s.order();
    ValidationReport rep;
    rep.tolerance = tol;

    // Modes with a zero correlation eigenvalue are dead for pure_noniso:
    // the floor rule excludes them from positivity checks.
    std::vector<char> live(J, 1);
    if (s.gamma.kind == GammaKind::pure_noniso) {
        int dead = 0;
        for (int k = 0; k < J; ++k) {
            if (s.correlation.eigvals[k] <= 0.0) {
                live[k] = 0;
                ++dead;
            }
        }
        if (dead > 0)
            rep.notes.push_back(std::to_string(dead) +
                                " zero mode(s) excluded from positivity checks (pure_noniso floor rule)");
    }

    auto push = [&](const std::string& name, double violation, bool informational = false) {
        ValidationItem item;
        item.name = name;
        item.max_violation = violation;
        item.informational = informational;
        item.pass = violation < tol;
        if (!item.pass && !informational) rep.pass = false;
        rep.items.push_back(item);
    };

    // alpha_bar strictly decreasing.
    {
        double worst = 0.0;
        int worst_t = 1;
        for (int t = 1; t <= T; ++t) {
            const double v = s.alpha.alpha_bar[t] - s.alpha.alpha_bar[t - 1];
            if (v > worst) {
                worst = v;
                worst_t = t;
            }
        }
        push("alpha_bar monotonicity, t=" + std::to_string(worst_t), std::max(0.0, worst));
    }

    // lambda_bar recursion: lambda_bar_t = alpha_t*lambda_bar_{t-1} + lambda_t.
    {
        double worst = 0.0;
        int worst_t = 1;
        for (int t = 1; t <= T; ++t) {
            for (int k = 0; k < J; ++k) {
                const double prev = t == 1 ? 0.0 : s.lambda_bar[t - 1][k];
                const double v =
                    std::fabs(s.lambda_bar[t][k] - (s.alpha.alpha[t] * prev + s.lambda_t[t][k]));
                if (v > worst) {
                    worst = v;
                    worst_t = t;
                }
            }
        }
        push("lambda_bar recursion, t=" + std::to_string(worst_t), worst);
    }

    // gamma_tilde recursion vs closed sum: gtilde_t = abar_t * sum_i gbar_i/abar_i.
    {
        const bool discarded = s.gamma.kind == GammaKind::discarded;
        double worst = 0.0;
        int worst_t = 1;
        double running = 0.0;
        for (int t = 1; t <= T; ++t) {
            const double a = s.alpha.alpha[t];
            const double gbar = discarded ? a : (1.0 - a) * s.gamma.gamma[t];
            running += gbar / s.alpha.alpha_bar[t];
            const double closed = s.alpha.alpha_bar[t] * running;
            const double v = std::fabs(s.gamma_tilde[t] - closed);
            if (v > worst) {
                worst = v;
                worst_t = t;
            }
        }
        push("gamma_tilde closed sum, t=" + std::to_string(worst_t), worst);
    }

    // lambda_q positivity over live modes, t >= 2 (vacuous for T = 1).
    {
        double worst = 0.0;
        int worst_t = 2;
        for (int t = 2; t <= T; ++t) {
            for (int k = 0; k < J; ++k) {
                if (!live[k]) continue;
                const double v = -s.lambda_q[t][k];
                if (v > worst) {
                    worst = v;
                    worst_t = t;
                }
            }
        }
        push(T >= 2 ? "lambda_q positivity, t=" + std::to_string(worst_t)
                    : "lambda_q positivity (vacuous, T=1)",
             std::max(0.0, worst));
    }

    // SNR strictly decreasing in t; informational for the discarded kind.
    {
        const bool informational = s.gamma.kind == GammaKind::discarded;
        double worst = 0.0;
        int worst_t = 1;
        for (int t = 1; t <= T; ++t) {
            for (int k = 0; k < J; ++k) {
                if (!live[k]) continue;
                const double v = s.snr(t, k) - s.snr(t - 1, k);
                if (v > worst) {
                    worst = v;
                    worst_t = t;
                }
            }
        }
        push("snr monotonicity, t=" + std::to_string(worst_t), std::max(0.0, worst), informational);
        if (informational)
            rep.notes.push_back("snr monotonicity reported but not asserted for the discarded kind");
    }

    return rep;
}

void write_schedule_csv(const NoiseSchedule& s, std::ostream& out) {
    const int J = s.order();
    out << "t,alpha,alpha_bar,gamma,gamma_tilde";
    for (int k = 0; k < J; ++k) out << ",lambda_t_" << k;
    for (int k = 0; k < J; ++k) out << ",lambda_bar_" << k;
    out << "\n";
    out.precision(17);
    for (int t = 1; t <= s.steps(); ++t) {
        out << t << "," << s.alpha.alpha[t] << "," << s.alpha.alpha_bar[t] << ","
            << s.gamma.gamma[t] << "," << s.gamma_tilde[t];
        for (int k = 0; k < J; ++k) out << "," << s.lambda_t[t][k];
        for (int k = 0; k < J; ++k) out << "," << s.lambda_bar[t][k];
        out << "\n";
    }
}

} // namespace noniso
