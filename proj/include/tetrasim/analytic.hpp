#pragma once

#include <cmath>

#include "tetrasim/types.hpp"

namespace tetrasim::analytic {

/// Closed-form mean PAoI with its full decomposition, so disagreement with
/// simulation can be localized term by term.
struct AnalyticBreakdown {
    double beta = 0.0;   // preemption probability
    double e_s = 0.0;    // mean service time of a delivered update
    double e_w = 0.0;    // mean idle wait after a delivery
    double e_t = 0.0;    // mean time from first post-delivery generation to next delivery
    double e_y = 0.0;    // mean interdeparture time, e_t + e_w
    double paoi = 0.0;   // mean peak age, e_y + e_s
};

namespace detail {

inline void require_rates(double lambda_f, double mu) {
    if (!(lambda_f > 0.0)) throw ParamError("lambda_f must be > 0");
    if (!(mu > 0.0)) throw ParamError("mu must be > 0");
}

/// exp(-mu*lambda) = 1 - beta, computed directly to avoid cancellation.
inline double survival(double lambda_f, double mu) { return std::exp(-mu * lambda_f); }

/// Mean service time of an update that is neither preempted nor lost,
/// weighted over retransmission rounds (geometric sum, closed form).
inline double prrt_es(double lambda_f, double mu, double alpha) {
    double omb = survival(lambda_f, mu);
    double denom = 1.0 - alpha * omb;
    return omb * (1.0 - alpha) * mu / (denom * denom);
}

/// Probability that an update survives preemption through all its
/// retransmission rounds and is finally received.
inline double prrt_ps(double lambda_f, double mu, double alpha) {
    double omb = survival(lambda_f, mu);
    return omb * (1.0 - alpha) / (1.0 - alpha * omb);
}

} // namespace detail

/// Probability that a fresh arrival preempts the in-service update.
inline double preemption_prob(double lambda_f, double mu) {
    detail::require_rates(lambda_f, mu);
    return -std::expm1(-mu * lambda_f);
}

/// Mean generation interval conditioned on a preemption occurring,
/// E[X | X < S] with S = mu. Always in (0, mu).
inline double conditional_interarrival(double lambda_f, double mu) {
    detail::require_rates(lambda_f, mu);
    double x = lambda_f * mu;
    if (x < 1e-3) {
        // series of 1/lambda + mu - mu/beta around x = 0
        return mu * (0.5 - x / 12.0 + x * x * x / 720.0);
    }
    return 1.0 / lambda_f + mu * (1.0 - 1.0 / preemption_prob(lambda_f, mu));
}

/// Mean PAoI under preemption without retransmission.
inline AnalyticBreakdown paoi_pr(const ModelParams& p) {
    p.validate();
    AnalyticBreakdown b;
    double omb = detail::survival(p.lambda_f, p.mu);
    b.beta = 1.0 - omb;
    b.e_s = p.mu;
    b.e_w = 1.0 / p.lambda_f;
    b.e_t = (b.beta + p.alpha - b.beta * p.alpha) / (p.lambda_f * omb * (1.0 - p.alpha));
    b.e_y = b.e_t + b.e_w;
    b.paoi = b.e_y + b.e_s;
    return b;
}

/// Mean PAoI under preemption with retransmission.
inline AnalyticBreakdown paoi_prrt(const ModelParams& p) {
    p.validate();
    AnalyticBreakdown b;
    double omb = detail::survival(p.lambda_f, p.mu);
    b.beta = 1.0 - omb;
    b.e_s = p.mu / (1.0 - p.alpha * omb);
    b.e_w = 1.0 / p.lambda_f;
    b.e_y = (1.0 - p.alpha + p.alpha * b.beta) / (p.lambda_f * omb * (1.0 - p.alpha));
    b.e_t = b.e_y - b.e_w;
    b.paoi = b.e_y + b.e_s;
    return b;
}

/// Mean PAoI with no preemption and no retransmission.
inline AnalyticBreakdown paoi_npr(const ModelParams& p) {
    p.validate();
    AnalyticBreakdown b;
    b.beta = 0.0;
    b.e_s = p.mu;
    b.e_w = 1.0 / p.lambda_f;
    b.e_t = (p.mu + p.alpha / p.lambda_f) / (1.0 - p.alpha);
    b.e_y = b.e_t + b.e_w;
    b.paoi = b.e_y + b.e_s;
    return b;
}

/// Dispatch on the discipline; only PR, PR-RT and NPR have closed forms.
inline AnalyticBreakdown paoi(const ModelParams& p) {
    switch (p.discipline) {
        case Discipline::Pr: return paoi_pr(p);
        case Discipline::Prrt: return paoi_prrt(p);
        case Discipline::Npr: return paoi_npr(p);
        default: throw ParamError("no closed-form PAoI for this discipline");
    }
}

} // namespace tetrasim::analytic
