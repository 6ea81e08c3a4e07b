#pragma once

#include "rlp/confidence.hpp"
#include "rlp/learners.hpp"
#include "rlp/robust.hpp"
#include "rlp/u2.hpp"
#include "rlp/whitebox.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

namespace rlp {

struct PriorAttackParams {
    double sigma = 1.0;
    int num_learners = 1;   // L in both the interval scales and the bound
    double failure_p = 0.1;
    double gamma = 0.9;
    std::vector<double> initial_dist;
    long total_steps = 1;   // T the bound is evaluated at
    SuboptFn subopt;        // suboptimal-step bound used by the cost bound
};

/// Result of the stand-alone attack from a prior observation log. The
/// perturbation is always computed from the data alone; the error table and
/// cost bound are analysis quantities that need the true MDP and are only
/// filled when it is supplied.
struct PriorDataReport {
    ConfidenceSet cs;
    Perturbation delta;
    double e_q = 0.0;
    double e_mu = 0.0;
    bool used_empirical_range = false; // e_q fell back to the empirical reward range
    std::optional<RewardTable> e_table; // per off-target pair; +inf where degenerate
    std::optional<double> bound;        // cost bound; +inf when vacuous
    bool bound_vacuous = false;
};

/**
 * The attack-phase procedure run directly on logged observations, with no
 * exploration: build the confidence set, freeze the robust perturbation,
 * and quantify its distance from the full-knowledge attack via
 *
 *   e(s, a) = 2 e_Q + eps/[mu(s) - e_mu]_+ - eps/mu(s)
 *
 * per off-target pair, giving the per-step cost bound
 * (||delta* + e||_inf + lambda) * SubOpt(T, eps, p/L) / T. With the counts
 * growing unboundedly every error term collapses to zero and the bound
 * matches the full-knowledge attack's.
 */
inline PriorDataReport attack_from_prior(const ObservationCounts& counts,
                                         const std::optional<TabularMdp>& m_true,
                                         const AttackConfig& cfg,
                                         const PriorAttackParams& params) {
    const int S = counts.num_states(), A = counts.num_actions();
    PriorDataReport report{build_confidence_set(counts, params.sigma, S, A, params.num_learners,
                                                params.failure_p)};
    report.delta = delta_hat(report.cs, params.gamma, params.initial_dist, cfg);

    const long n_min = counts.min_count();
    report.e_mu = mu_error_bound(report.cs.w, params.gamma, n_min);
    const double range = m_true ? m_true->reward_range() : report.cs.r_hat_range();
    report.used_empirical_range = !m_true.has_value();
    report.e_q = q_error_bound(report.cs.u, report.cs.w, params.gamma, range, n_min);

    if (!m_true) return report;

    const Perturbation dstar = delta_star(*m_true, cfg);
    RewardTable e(S, std::vector<double>(A, 0.0));
    double sup = 0.0;
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) {
            if (a == cfg.target(s)) continue;
            const double mu = occupancy(*m_true, neighbor_policy(cfg.target, s, a)).mu[s];
            const double shrunk = std::max(0.0, mu - report.e_mu);
            if (shrunk <= 0.0) {
                e[s][a] = std::numeric_limits<double>::infinity();
                report.bound_vacuous = true;
            } else {
                e[s][a] = 2.0 * report.e_q + cfg.eps / shrunk - cfg.eps / mu;
            }
            sup = std::max(sup, dstar(s, a) + e[s][a]);
        }
    report.e_table = std::move(e);
    if (params.subopt) {
        report.bound = report.bound_vacuous
                           ? std::numeric_limits<double>::infinity()
                           : (sup + cfg.lambda) *
                                 params.subopt(params.total_steps, cfg.eps,
                                               params.failure_p / params.num_learners) /
                                 static_cast<double>(params.total_steps);
    }
    return report;
}

} // namespace rlp
