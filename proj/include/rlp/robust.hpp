#pragma once

#include "rlp/confidence.hpp"
#include "rlp/mdp.hpp"
#include "rlp/whitebox.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace rlp {

enum class Orientation { Low, High };

/**
 * Optimizes sum_s p(s) v(s) over the L1 ball of the given budget around
 * p_hat, intersected with the simplex. Sorted-greedy: up to budget/2 mass
 * moves onto the single extreme-value state (capped so no probability
 * exceeds 1), drained from the opposite end of the value ordering. Budget
 * >= 2 therefore yields a point mass on the extreme state. Ties are broken
 * by state index so the result is deterministic.
 */
inline std::vector<double> inner_linear_opt(const std::vector<double>& p_hat, double budget,
                                            const std::vector<double>& v, Orientation orient) {
    if (budget < 0.0) throw std::invalid_argument("inner_linear_opt: negative budget");
    if (orient == Orientation::High) {
        std::vector<double> neg(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) neg[i] = -v[i];
        return inner_linear_opt(p_hat, budget, neg, Orientation::Low);
    }

    const int n = static_cast<int>(p_hat.size());
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int i, int j) {
        return v[i] != v[j] ? v[i] < v[j] : i < j;
    });

    std::vector<double> out = p_hat;
    const int dest = order[0]; // worst-value state receives the mass
    double moved = std::min(budget / 2.0, 1.0 - out[dest]);
    out[dest] += moved;
    for (int i = n - 1; i >= 0 && moved > 0.0; --i) {
        const int k = order[i];
        if (k == dest) continue;
        const double take = std::min(moved, out[k]);
        out[k] -= take;
        moved -= take;
    }
    return out;
}

namespace detail {
inline double interval_reward(const ConfidenceSet& cs, int s, int a, Orientation orient,
                              const RewardTable* reward_override) {
    if (reward_override) return (*reward_override)[s][a];
    return orient == Orientation::Low ? cs.r_low(s, a) : cs.r_high(s, a);
}

inline double robust_backup(const ConfidenceSet& cs, int s, int a,
                            const std::vector<double>& v, Orientation orient) {
    const std::vector<double> p = inner_linear_opt(cs.p_hat[s][a], cs.transition_budget(s, a), v,
                                                   orient);
    return std::inner_product(p.begin(), p.end(), v.begin(), 0.0);
}
} // namespace detail

/**
 * Worst-case (Low) or best-case (High) value of a fixed policy over the
 * confidence set, by iterating
 *
 *   v(s) <- opt_r r + gamma * opt_p E_{s'~p} v(s')
 *
 * from v = 0 until the sup-norm change drops below tol*(1-gamma)/(2*gamma).
 * A reward_override replaces the reward intervals with a known table (used
 * for occupancy computations, where the indicator reward is exact).
 */
inline std::vector<double> robust_policy_eval(const ConfidenceSet& cs, const Policy& pi,
                                              double gamma, Orientation orient,
                                              const RewardTable* reward_override = nullptr,
                                              double tol = 1e-8) {
    if (!(tol > 0.0)) throw std::invalid_argument("robust_policy_eval: tol must be positive");
    const int S = cs.params.num_states;
    std::vector<double> v(S, 0.0), next(S, 0.0);
    const double threshold = tol * (1.0 - gamma) / (2.0 * gamma);
    constexpr long cap = 2'000'000;
    for (long i = 0;; ++i) {
        if (i >= cap) throw std::runtime_error("robust_policy_eval: iteration cap exceeded");
        double change = 0.0;
        for (int s = 0; s < S; ++s) {
            const int a = pi(s);
            next[s] = detail::interval_reward(cs, s, a, orient, reward_override) +
                      gamma * detail::robust_backup(cs, s, a, v, orient);
            change = std::max(change, std::abs(next[s] - v[s]));
        }
        std::swap(v, next);
        if (change <= threshold) return v;
    }
}

namespace detail {
inline RewardTable q_from_v_high(const ConfidenceSet& cs, double gamma,
                                 const std::vector<double>& v_high) {
    RewardTable q(cs.params.num_states, std::vector<double>(cs.params.num_actions, 0.0));
    for (int s = 0; s < cs.params.num_states; ++s)
        for (int a = 0; a < cs.params.num_actions; ++a)
            q[s][a] = cs.r_high(s, a) +
                      gamma * robust_backup(cs, s, a, v_high, Orientation::High);
    return q;
}
} // namespace detail

/// Q_high(s,a) = max_r r + gamma max_p E V_high(s') for every pair, with
/// V_high the best-case value of pi over the set.
inline RewardTable q_high(const ConfidenceSet& cs, const Policy& pi, double gamma,
                          double tol = 1e-8) {
    return detail::q_from_v_high(
        cs, gamma, robust_policy_eval(cs, pi, gamma, Orientation::High, nullptr, tol));
}

/**
 * Lower bound on the occupancy of pi at s_target over the set, via the
 * worst-case value of pi in the indicator-reward MDP R(x, a) = 1{x ==
 * s_target} (reward known exactly, transitions still uncertain):
 * mu_low = (1-gamma) * sum_x d0(x) v_low(x). Always lands in [0, 1].
 */
inline double mu_low(const ConfidenceSet& cs, const Policy& pi, double gamma,
                     const std::vector<double>& initial_dist, int s_target, double tol = 1e-8) {
    RewardTable indicator(cs.params.num_states,
                          std::vector<double>(cs.params.num_actions, 0.0));
    for (int a = 0; a < cs.params.num_actions; ++a) indicator[s_target][a] = 1.0;
    const std::vector<double> v =
        robust_policy_eval(cs, pi, gamma, Orientation::Low, &indicator, tol);
    double out = 0.0;
    for (int x = 0; x < cs.params.num_states; ++x) out += initial_dist[x] * v[x];
    return (1.0 - gamma) * out;
}

/// mu_low of the neighbor policy target{s;a} at s, for every pair. One
/// robust evaluation per entry; the entry at (s, target(s)) is the target
/// policy's own lower occupancy bound.
inline RewardTable neighbor_mu_low_table(const ConfidenceSet& cs, const Policy& target,
                                         double gamma, const std::vector<double>& initial_dist,
                                         double tol = 1e-8) {
    RewardTable table(cs.params.num_states, std::vector<double>(cs.params.num_actions, 0.0));
    for (int s = 0; s < cs.params.num_states; ++s)
        for (int a = 0; a < cs.params.num_actions; ++a)
            table[s][a] = mu_low(cs, neighbor_policy(target, s, a), gamma, initial_dist, s, tol);
    return table;
}

/// The set-extremal quantities the robust attack is assembled from: the
/// target policy's value range over the set, the per-pair optimistic Q, and
/// the occupancy lower bound of each neighboring policy at its deviation
/// state.
struct RobustValues {
    std::vector<double> v_low;
    std::vector<double> v_high;
    RewardTable q_high;
    RewardTable mu_low; // indexed by (s, a): neighbor target{s;a} at s
};

inline RobustValues robust_values(const ConfidenceSet& cs, const Policy& target, double gamma,
                                  const std::vector<double>& initial_dist, double tol = 1e-8) {
    RobustValues out;
    out.v_low = robust_policy_eval(cs, target, gamma, Orientation::Low, nullptr, tol);
    out.v_high = robust_policy_eval(cs, target, gamma, Orientation::High, nullptr, tol);
    out.q_high = detail::q_from_v_high(cs, gamma, out.v_high);
    out.mu_low = neighbor_mu_low_table(cs, target, gamma, initial_dist, tol);
    return out;
}

/**
 * Robust counterpart of the closed-form perturbation, built from the
 * confidence set alone:
 *
 *   delta_hat(s, a) = [ Q_high(s, a) - V_low(s) + eps / mu_low_{target{s;a}}(s) ]_+
 *
 * off target and zero on the target column. Dominates the closed-form
 * perturbation of every MDP in the set, so subtracting it enforces the
 * target policy on all of them. Throws if some occupancy lower bound is not
 * positive (insufficient exploration would make the ratio blow up).
 */
inline Perturbation delta_hat(const RobustValues& rv, const AttackConfig& cfg) {
    const int S = static_cast<int>(rv.v_low.size());
    const int A = static_cast<int>(rv.q_high.empty() ? 0 : rv.q_high[0].size());
    Perturbation out;
    out.delta.assign(S, std::vector<double>(A, 0.0));
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) {
            if (a == cfg.target(s)) continue;
            if (rv.mu_low[s][a] <= 0.0)
                throw std::runtime_error("delta_hat: occupancy lower bound at (s=" +
                                         std::to_string(s) + ", a=" + std::to_string(a) +
                                         ") is not positive; exploration insufficient");
            out.delta[s][a] =
                std::max(0.0, rv.q_high[s][a] - rv.v_low[s] + cfg.eps / rv.mu_low[s][a]);
        }
    return out;
}

inline Perturbation delta_hat(const ConfidenceSet& cs, double gamma,
                              const std::vector<double>& initial_dist, const AttackConfig& cfg,
                              double tol = 1e-8, const RewardTable* precomputed_mu_low = nullptr) {
    cfg.validate();
    if (cfg.target.num_states() != cs.params.num_states)
        throw std::invalid_argument("delta_hat: target policy dimension mismatch");
    RobustValues rv;
    rv.v_low = robust_policy_eval(cs, cfg.target, gamma, Orientation::Low, nullptr, tol);
    rv.v_high = robust_policy_eval(cs, cfg.target, gamma, Orientation::High, nullptr, tol);
    rv.q_high = detail::q_from_v_high(cs, gamma, rv.v_high);
    rv.mu_low = precomputed_mu_low
                    ? *precomputed_mu_low
                    : neighbor_mu_low_table(cs, cfg.target, gamma, initial_dist, tol);
    return delta_hat(rv, cfg);
}

/// Error bound on robust value/Q estimates from interval scales u, w at
/// n_min observations per pair: (2u + 2 gamma range w) / ((1-gamma)^2 sqrt(n)).
inline double q_error_bound(double u, double w, double gamma, double reward_range, long n_min) {
    return (2.0 * u + 2.0 * gamma * reward_range * w) /
           ((1.0 - gamma) * (1.0 - gamma) * std::sqrt(static_cast<double>(n_min)));
}

/// Error bound on occupancy lower bounds: 2 gamma w / ((1-gamma) sqrt(n)).
inline double mu_error_bound(double w, double gamma, long n_min) {
    return 2.0 * gamma * w / ((1.0 - gamma) * std::sqrt(static_cast<double>(n_min)));
}

/**
 * Two-sided model-difference bound on Q values of a shared policy:
 * lhs = max_{s,a} |Q_1 - Q_2| computed exactly, rhs = (||R_1 - R_2||_inf +
 * gamma * range * max_{s,a} ||P_1(s,a,.) - P_2(s,a,.)||_1) / (1-gamma)^2
 * with the reward range taken over both MDPs. lhs <= rhs always.
 */
inline std::pair<double, double> simulation_lemma_bound(const TabularMdp& m1,
                                                        const TabularMdp& m2, const Policy& pi) {
    if (m1.num_states != m2.num_states || m1.num_actions != m2.num_actions ||
        m1.gamma != m2.gamma)
        throw std::invalid_argument("simulation_lemma_bound: incompatible MDPs");

    const ValueFunctions v1 = policy_eval(m1, pi);
    const ValueFunctions v2 = policy_eval(m2, pi);
    double lhs = 0.0;
    for (int s = 0; s < m1.num_states; ++s)
        for (int a = 0; a < m1.num_actions; ++a)
            lhs = std::max(lhs, std::abs(v1.q[s][a] - v2.q[s][a]));

    double r_diff = 0.0, p_diff = 0.0;
    double r_lo = m1.rewards[0][0], r_hi = m1.rewards[0][0];
    for (int s = 0; s < m1.num_states; ++s)
        for (int a = 0; a < m1.num_actions; ++a) {
            r_diff = std::max(r_diff, std::abs(m1.rewards[s][a] - m2.rewards[s][a]));
            for (double r : {m1.rewards[s][a], m2.rewards[s][a]}) {
                r_lo = std::min(r_lo, r);
                r_hi = std::max(r_hi, r);
            }
            double l1 = 0.0;
            for (int sp = 0; sp < m1.num_states; ++sp)
                l1 += std::abs(m1.transitions[s][a][sp] - m2.transitions[s][a][sp]);
            p_diff = std::max(p_diff, l1);
        }
    const double one_minus = 1.0 - m1.gamma;
    const double rhs = (r_diff + m1.gamma * (r_hi - r_lo) * p_diff) / (one_minus * one_minus);
    return {lhs, rhs};
}

} // namespace rlp
