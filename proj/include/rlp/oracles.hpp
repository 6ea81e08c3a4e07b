#pragma once

#include "rlp/mdp.hpp"

#include <cmath>
#include <functional>
#include <iostream>
#include <set>
#include <vector>

namespace rlp {

constexpr long kEnumerationCap = 1'000'000;

namespace detail {
inline long policy_count_or_throw(const TabularMdp& m, long cap) {
    double count = std::pow(static_cast<double>(m.num_actions), m.num_states);
    if (count > static_cast<double>(cap))
        throw std::invalid_argument("policy enumeration: A^S = " + std::to_string(count) +
                                    " exceeds cap " + std::to_string(cap));
    return static_cast<long>(std::llround(count));
}
} // namespace detail

/// Visits all A^S deterministic policies in lexicographic order
/// (action indices as digits, last state least significant).
inline void for_each_policy(const TabularMdp& m, const std::function<void(const Policy&)>& fn,
                            long cap = kEnumerationCap) {
    detail::policy_count_or_throw(m, cap);
    Policy pi;
    pi.action_of.assign(m.num_states, 0);
    while (true) {
        fn(pi);
        int i = m.num_states - 1;
        while (i >= 0 && pi.action_of[i] == m.num_actions - 1) pi.action_of[i--] = 0;
        if (i < 0) break;
        ++pi.action_of[i];
    }
}

inline std::vector<Policy> enumerate_policies(const TabularMdp& m, long cap = kEnumerationCap) {
    std::vector<Policy> out;
    out.reserve(detail::policy_count_or_throw(m, cap));
    for_each_policy(m, [&](const Policy& pi) { out.push_back(pi); }, cap);
    return out;
}

/// For each state, the set of actions played by some eps-optimal policy,
/// i.e. { pi(s) : rho^pi >= rho* - eps }, computed by full enumeration.
struct EpsOptimalActionSets {
    std::vector<std::set<int>> actions_of;

    bool contains(int s, int a) const { return actions_of[s].count(a) > 0; }
};

inline EpsOptimalActionSets eps_optimal_action_sets(const TabularMdp& m, double eps,
                                                    long cap = kEnumerationCap) {
    std::vector<Policy> policies;
    std::vector<double> rho;
    double rho_star = -std::numeric_limits<double>::infinity();
    for_each_policy(m, [&](const Policy& pi) {
        const double r = policy_eval(m, pi).rho;
        policies.push_back(pi);
        rho.push_back(r);
        rho_star = std::max(rho_star, r);
    }, cap);

    EpsOptimalActionSets out;
    out.actions_of.assign(m.num_states, {});
    for (std::size_t i = 0; i < policies.size(); ++i)
        if (rho[i] >= rho_star - eps)
            for (int s = 0; s < m.num_states; ++s) out.actions_of[s].insert(policies[i](s));
    return out;
}

struct MuMinResult {
    double mu_min = 0.0;       // min over states and all policies of mu^pi(s)
    RewardTable g;             // g[s][a] = min over pi with pi(s)=a of mu^pi(s)
    bool positivity_warning = false;
};

/// Brute-force minimum occupancies. Warns (and flags) when some state is
/// effectively unreachable under some policy, which breaks the positivity
/// assumption the perturbation formulas divide by.
inline MuMinResult mu_min_and_g(const TabularMdp& m, long cap = kEnumerationCap) {
    MuMinResult out;
    out.g.assign(m.num_states, std::vector<double>(m.num_actions,
                                                   std::numeric_limits<double>::infinity()));
    for_each_policy(m, [&](const Policy& pi) {
        const OccupancyMeasure occ = occupancy(m, pi);
        for (int s = 0; s < m.num_states; ++s) {
            const int a = pi(s);
            out.g[s][a] = std::min(out.g[s][a], occ.mu[s]);
        }
    }, cap);
    out.mu_min = std::numeric_limits<double>::infinity();
    for (int s = 0; s < m.num_states; ++s)
        for (int a = 0; a < m.num_actions; ++a) out.mu_min = std::min(out.mu_min, out.g[s][a]);
    if (out.mu_min <= 1e-12) {
        out.positivity_warning = true;
        std::cerr << "warning: mu_min = " << out.mu_min
                  << " <= 1e-12; some state is effectively unreachable under some policy\n";
    }
    return out;
}

/// |rho^pi - (1/(1-gamma)) sum_s mu^pi(s) R(s, pi(s))|. Zero up to solver
/// round-off for any valid inputs.
inline double return_occupancy_residual(const TabularMdp& m, const Policy& pi) {
    const double rho = policy_eval(m, pi).rho;
    const OccupancyMeasure occ = occupancy(m, pi);
    double via_mu = 0.0;
    for (int s = 0; s < m.num_states; ++s) via_mu += occ.mu[s] * m.rewards[s][pi(s)];
    via_mu /= (1.0 - m.gamma);
    return std::abs(rho - via_mu);
}

/// Residual of the occupancy-weighted advantage identity between two
/// policies: (1-gamma)(rho^pi - rho^pi') = sum_s mu^pi'(s) (Q^pi(s, pi(s)) -
/// Q^pi(s, pi'(s))). The (1-gamma) factor pairs the normalized occupancy
/// with the unnormalized return; both sides are evaluated by the exact
/// solvers and must agree to 1e-8.
inline double performance_difference_residual(const TabularMdp& m, const Policy& pi,
                                              const Policy& pi2) {
    const ValueFunctions vf = policy_eval(m, pi);
    const double rho2 = policy_eval(m, pi2).rho;
    const OccupancyMeasure occ2 = occupancy(m, pi2);
    double rhs = 0.0;
    for (int s = 0; s < m.num_states; ++s)
        rhs += occ2.mu[s] * (vf.q[s][pi(s)] - vf.q[s][pi2(s)]);
    const double lhs = (1.0 - m.gamma) * (vf.rho - rho2);
    return std::abs(lhs - rhs);
}

} // namespace rlp
