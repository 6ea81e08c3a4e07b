#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace rlp {

using RewardTable = std::vector<std::vector<double>>;               // [s][a]
using TransitionTable = std::vector<std::vector<std::vector<double>>>; // [s][a][s']

constexpr double kProbabilityTol = 1e-12;

/**
 * Finite MDP with expected rewards R[s][a], transition kernel P[s][a][s'],
 * discount gamma, initial distribution d0, episode reset period `horizon`
 * and Gaussian reward-noise scale `noise_sigma`.
 *
 * All planning quantities (values, returns, occupancies) are infinite-horizon
 * discounted; `horizon` only controls simulation resets.
 */
struct TabularMdp {
    int num_states = 0;
    int num_actions = 0;
    RewardTable rewards;
    TransitionTable transitions;
    double gamma = 0.0;
    std::vector<double> initial_dist;
    int horizon = 1;
    double noise_sigma = 0.0;

    /// Throws std::invalid_argument with a field-level message on the first
    /// violated invariant.
    void validate() const {
        if (num_states < 1) throw std::invalid_argument("num_states: must be positive");
        if (num_actions < 1) throw std::invalid_argument("num_actions: must be positive");
        if (!(gamma > 0.0 && gamma < 1.0))
            throw std::invalid_argument("gamma: must lie strictly in (0, 1)");
        if (horizon < 1) throw std::invalid_argument("horizon: must be positive");
        if (noise_sigma < 0.0) throw std::invalid_argument("noise_sigma: must be >= 0");
        if (static_cast<int>(rewards.size()) != num_states)
            throw std::invalid_argument("rewards: expected " + std::to_string(num_states) + " rows");
        if (static_cast<int>(transitions.size()) != num_states)
            throw std::invalid_argument("transitions: expected " + std::to_string(num_states) + " rows");
        for (int s = 0; s < num_states; ++s) {
            if (static_cast<int>(rewards[s].size()) != num_actions)
                throw std::invalid_argument("rewards[" + std::to_string(s) + "]: expected " +
                                            std::to_string(num_actions) + " entries");
            for (int a = 0; a < num_actions; ++a)
                if (!std::isfinite(rewards[s][a]))
                    throw std::invalid_argument("rewards[" + std::to_string(s) + "][" +
                                                std::to_string(a) + "]: not finite");
            if (static_cast<int>(transitions[s].size()) != num_actions)
                throw std::invalid_argument("transitions[" + std::to_string(s) + "]: expected " +
                                            std::to_string(num_actions) + " rows");
            for (int a = 0; a < num_actions; ++a) {
                const auto& row = transitions[s][a];
                if (static_cast<int>(row.size()) != num_states)
                    throw std::invalid_argument("transitions[" + std::to_string(s) + "][" +
                                                std::to_string(a) + "]: expected " +
                                                std::to_string(num_states) + " entries");
                double sum = 0.0;
                for (int sp = 0; sp < num_states; ++sp) {
                    if (row[sp] < 0.0)
                        throw std::invalid_argument("transitions[" + std::to_string(s) + "][" +
                                                    std::to_string(a) + "][" + std::to_string(sp) +
                                                    "]: negative probability");
                    sum += row[sp];
                }
                if (std::abs(sum - 1.0) > kProbabilityTol)
                    throw std::invalid_argument("transitions[" + std::to_string(s) + "][" +
                                                std::to_string(a) + "]: row sums to " +
                                                std::to_string(sum));
            }
        }
        if (static_cast<int>(initial_dist.size()) != num_states)
            throw std::invalid_argument("initial_dist: expected " + std::to_string(num_states) +
                                        " entries");
        double d0_sum = 0.0;
        for (int s = 0; s < num_states; ++s) {
            if (initial_dist[s] < 0.0)
                throw std::invalid_argument("initial_dist[" + std::to_string(s) +
                                            "]: negative probability");
            d0_sum += initial_dist[s];
        }
        if (std::abs(d0_sum - 1.0) > kProbabilityTol)
            throw std::invalid_argument("initial_dist: sums to " + std::to_string(d0_sum));
    }

    double max_abs_reward() const {
        double m = 0.0;
        for (const auto& row : rewards)
            for (double r : row) m = std::max(m, std::abs(r));
        return m;
    }

    /// max R - min R over all state-action pairs.
    double reward_range() const {
        double lo = rewards[0][0], hi = rewards[0][0];
        for (const auto& row : rewards)
            for (double r : row) {
                lo = std::min(lo, r);
                hi = std::max(hi, r);
            }
        return hi - lo;
    }
};

/// Deterministic stationary policy: one action per state.
struct Policy {
    std::vector<int> action_of;

    int operator()(int s) const { return action_of[s]; }
    int num_states() const { return static_cast<int>(action_of.size()); }

    bool operator==(const Policy&) const = default;

    void validate(const TabularMdp& m) const {
        if (num_states() != m.num_states)
            throw std::invalid_argument("policy: wrong number of states");
        for (int a : action_of)
            if (a < 0 || a >= m.num_actions)
                throw std::invalid_argument("policy: action index out of range");
    }
};

struct ValueFunctions {
    std::vector<double> v;   // V^pi[s]
    RewardTable q;           // Q^pi[s][a]
    double rho = 0.0;        // sum_s d0[s] V^pi[s]
};

/// Discounted state distribution, (1-gamma) sum_t gamma^t Pr[s_t = s].
/// Nonnegative and sums to 1.
struct OccupancyMeasure {
    std::vector<double> mu;
};

/// pi modified to play `a` at state `s` and unchanged elsewhere.
inline Policy neighbor_policy(const Policy& pi, int s, int a) {
    Policy out = pi;
    out.action_of.at(s) = a;
    return out;
}

namespace detail {

constexpr int kDirectSolveMaxStates = 2000;
constexpr long kIterationCap = 2'000'000;

inline Eigen::MatrixXd policy_transition_matrix(const TabularMdp& m, const Policy& pi) {
    Eigen::MatrixXd p(m.num_states, m.num_states);
    for (int s = 0; s < m.num_states; ++s)
        for (int sp = 0; sp < m.num_states; ++sp) p(s, sp) = m.transitions[s][pi(s)][sp];
    return p;
}

// Fixed-point iteration fallback for state counts beyond the direct solve.
inline Eigen::VectorXd solve_bellman_iterative(const Eigen::MatrixXd& p_pi,
                                               const Eigen::VectorXd& r_pi, double gamma,
                                               double tol) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(r_pi.size());
    const double threshold = tol * (1.0 - gamma) / (2.0 * gamma);
    for (long i = 0; i < kIterationCap; ++i) {
        Eigen::VectorXd next = r_pi + gamma * (p_pi * v);
        const double change = (next - v).lpNorm<Eigen::Infinity>();
        v = std::move(next);
        if (change <= threshold) return v;
    }
    throw std::runtime_error("policy evaluation: fixed-point iteration did not converge");
}

} // namespace detail

/**
 * Exact policy evaluation. V solves V = R_pi + gamma P_pi V by direct linear
 * solve (the system is nonsingular for gamma < 1); an iterative fallback
 * covers state spaces too large for the dense solve.
 */
inline ValueFunctions policy_eval(const TabularMdp& m, const Policy& pi) {
    pi.validate(m);
    const int S = m.num_states;
    Eigen::VectorXd r_pi(S);
    for (int s = 0; s < S; ++s) r_pi(s) = m.rewards[s][pi(s)];
    const Eigen::MatrixXd p_pi = detail::policy_transition_matrix(m, pi);

    Eigen::VectorXd v;
    if (S <= detail::kDirectSolveMaxStates) {
        Eigen::MatrixXd a = Eigen::MatrixXd::Identity(S, S) - m.gamma * p_pi;
        v = a.partialPivLu().solve(r_pi);
    } else {
        v = detail::solve_bellman_iterative(p_pi, r_pi, m.gamma, 1e-10);
    }

    ValueFunctions out;
    out.v.assign(v.data(), v.data() + S);
    out.q.assign(S, std::vector<double>(m.num_actions, 0.0));
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < m.num_actions; ++a) {
            double ev = 0.0;
            for (int sp = 0; sp < S; ++sp) ev += m.transitions[s][a][sp] * v(sp);
            out.q[s][a] = m.rewards[s][a] + m.gamma * ev;
        }
    out.rho = 0.0;
    for (int s = 0; s < S; ++s) out.rho += m.initial_dist[s] * v(s);
    return out;
}

struct PlanResult {
    std::vector<double> v_star;
    RewardTable q_star;
    Policy pi_star;
};

/**
 * Value iteration to sup-norm Bellman residual <= tol*(1-gamma)/(2*gamma),
 * which bounds the value error by tol. The returned policy is greedy with
 * lowest-index tie-breaking.
 */
inline PlanResult value_iteration(const TabularMdp& m, double tol) {
    if (!(tol > 0.0)) throw std::invalid_argument("value_iteration: tol must be positive");
    const int S = m.num_states, A = m.num_actions;
    std::vector<double> v(S, 0.0), next(S, 0.0);
    const double threshold = tol * (1.0 - m.gamma) / (2.0 * m.gamma);
    for (long i = 0;; ++i) {
        if (i >= detail::kIterationCap)
            throw std::runtime_error("value_iteration: iteration cap exceeded");
        double change = 0.0;
        for (int s = 0; s < S; ++s) {
            double best = -std::numeric_limits<double>::infinity();
            for (int a = 0; a < A; ++a) {
                double ev = 0.0;
                for (int sp = 0; sp < S; ++sp) ev += m.transitions[s][a][sp] * v[sp];
                best = std::max(best, m.rewards[s][a] + m.gamma * ev);
            }
            next[s] = best;
            change = std::max(change, std::abs(next[s] - v[s]));
        }
        std::swap(v, next);
        if (change <= threshold) break;
    }

    PlanResult out;
    out.v_star = v;
    out.q_star.assign(S, std::vector<double>(A, 0.0));
    out.pi_star.action_of.assign(S, 0);
    for (int s = 0; s < S; ++s) {
        int best_a = 0;
        for (int a = 0; a < A; ++a) {
            double ev = 0.0;
            for (int sp = 0; sp < S; ++sp) ev += m.transitions[s][a][sp] * v[sp];
            out.q_star[s][a] = m.rewards[s][a] + m.gamma * ev;
            if (out.q_star[s][a] > out.q_star[s][best_a]) best_a = a;
        }
        out.pi_star.action_of[s] = best_a;
    }
    return out;
}

/// mu^pi = (1-gamma) d0^T (I - gamma P_pi)^{-1}, by direct linear solve.
inline OccupancyMeasure occupancy(const TabularMdp& m, const Policy& pi) {
    pi.validate(m);
    const int S = m.num_states;
    const Eigen::MatrixXd p_pi = detail::policy_transition_matrix(m, pi);
    Eigen::VectorXd d0(S);
    for (int s = 0; s < S; ++s) d0(s) = m.initial_dist[s];
    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(S, S) - m.gamma * p_pi.transpose();
    Eigen::VectorXd x = a.partialPivLu().solve(d0);
    OccupancyMeasure out;
    out.mu.resize(S);
    for (int s = 0; s < S; ++s) out.mu[s] = (1.0 - m.gamma) * x(s);
    return out;
}

/**
 * Whether pi beats every neighboring policy pi{s;a} by at least eps on the
 * normalized return scale (1-gamma)*rho. On that scale the closed-form
 * minimal perturbation is exactly tight: the occupancy-weighted advantage
 * identity (1-gamma)*(rho^pi - rho^pi') = sum_s mu^pi'(s) (V^pi(s) -
 * Q^pi(s, pi'(s))) holds without stray discount factors. Comparisons carry
 * an absolute 1e-9 slack in favor of the claim to absorb solver round-off.
 */
inline bool is_eps_robust_optimal(const TabularMdp& m, const Policy& pi, double eps) {
    if (!(eps > 0.0)) throw std::invalid_argument("is_eps_robust_optimal: eps must be positive");
    const ValueFunctions vf = policy_eval(m, pi);
    for (int s = 0; s < m.num_states; ++s) {
        for (int a = 0; a < m.num_actions; ++a) {
            if (a == pi(s)) continue;
            const ValueFunctions nvf = policy_eval(m, neighbor_policy(pi, s, a));
            const double gap = (1.0 - m.gamma) * (vf.rho - nvf.rho);
            if (gap < eps - 1e-9) return false;
        }
    }
    return true;
}

} // namespace rlp
