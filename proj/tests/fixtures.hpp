#pragma once

#include "rlp/confidence.hpp"
#include "rlp/learners.hpp"
#include "rlp/mdp.hpp"
#include "rlp/rng.hpp"
#include "rlp/simulator.hpp"
#include "rlp/u2.hpp"

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

namespace rlp::test {

/// One state, two actions, R = [1, 0], gamma 1/2, self loop. By hand:
/// V^{a0} = 2, Q^{a0} = [2, 1], rho = 2; the a1 policy earns nothing.
inline TabularMdp single_state_mdp() {
    TabularMdp m;
    m.num_states = 1;
    m.num_actions = 2;
    m.rewards = {{1.0, 0.0}};
    m.transitions = {{{1.0}, {1.0}}};
    m.gamma = 0.5;
    m.initial_dist = {1.0};
    m.horizon = 10;
    m.noise_sigma = 0.0;
    return m;
}

/// Deterministic two-state cycle s0 -> s1 -> s0 under both actions,
/// rewards 1 at s0 and 0 at s1, gamma 1/2, start at s0. By hand:
/// V = (4/3, 2/3), rho = 4/3, mu = (2/3, 1/3).
inline TabularMdp two_state_cycle() {
    TabularMdp m;
    m.num_states = 2;
    m.num_actions = 2;
    m.rewards = {{1.0, 1.0}, {0.0, 0.0}};
    m.transitions = {{{0.0, 1.0}, {0.0, 1.0}}, {{1.0, 0.0}, {1.0, 0.0}}};
    m.gamma = 0.5;
    m.initial_dist = {1.0, 0.0};
    m.horizon = 10;
    m.noise_sigma = 0.0;
    return m;
}

/// The mixing two-state benchmark used by the end-to-end attack
/// experiments: every policy visits both states (mu >= 0.25 everywhere).
inline TabularMdp two_state_fixture() {
    TabularMdp m;
    m.num_states = 2;
    m.num_actions = 2;
    m.rewards = {{1.0, 0.2}, {0.0, 0.8}};
    m.transitions = {{{0.7, 0.3}, {0.3, 0.7}}, {{0.6, 0.4}, {0.2, 0.8}}};
    m.gamma = 0.5;
    m.initial_dist = {0.5, 0.5};
    m.horizon = 20;
    m.noise_sigma = 0.1;
    return m;
}

/// Against-the-grain target for the fixture above (the optimal policy is
/// (a0, a1)).
inline Policy fixture_target() { return Policy{{1, 0}}; }

inline std::vector<double> dirichlet(std::mt19937_64& rng, int n) {
    std::vector<double> x(n);
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        x[i] = -std::log(uniform01(rng));
        sum += x[i];
    }
    for (double& v : x) v /= sum;
    return x;
}

/// Random dense MDP: Dirichlet transition rows mixed with 10% uniform so
/// every state stays reachable under every policy, uniform [0,1] rewards,
/// uniform initial distribution.
inline TabularMdp random_mdp(std::mt19937_64& rng, int num_states, int num_actions,
                             double gamma_lo = 0.5, double gamma_hi = 0.95) {
    TabularMdp m;
    m.num_states = num_states;
    m.num_actions = num_actions;
    m.gamma = gamma_lo + (gamma_hi - gamma_lo) * uniform01(rng);
    m.horizon = 10;
    m.noise_sigma = 0.0;
    m.initial_dist.assign(num_states, 1.0 / num_states);
    m.rewards.assign(num_states, std::vector<double>(num_actions, 0.0));
    m.transitions.assign(num_states,
                         std::vector<std::vector<double>>(num_actions,
                                                          std::vector<double>(num_states, 0.0)));
    for (int s = 0; s < num_states; ++s)
        for (int a = 0; a < num_actions; ++a) {
            m.rewards[s][a] = uniform01(rng);
            const std::vector<double> d = dirichlet(rng, num_states);
            for (int sp = 0; sp < num_states; ++sp)
                m.transitions[s][a][sp] = 0.9 * d[sp] + 0.1 / num_states;
        }
    m.validate();
    return m;
}

inline Policy random_policy(std::mt19937_64& rng, int num_states, int num_actions) {
    Policy pi;
    pi.action_of.resize(num_states);
    for (int s = 0; s < num_states; ++s)
        pi.action_of[s] = std::min(static_cast<int>(uniform01(rng) * num_actions),
                                   num_actions - 1);
    return pi;
}

/// Counts whose empirical estimates reproduce the MDP: k observations per
/// pair, reward sums R*k, next-state counts apportioned by largest
/// remainder so each row sums to exactly k.
inline ObservationCounts synthetic_counts(const TabularMdp& m, long k) {
    ObservationCounts counts(m.num_states, m.num_actions);
    for (int s = 0; s < m.num_states; ++s)
        for (int a = 0; a < m.num_actions; ++a) {
            counts.n[s][a] = k;
            counts.reward_sum[s][a] = m.rewards[s][a] * static_cast<double>(k);
            long assigned = 0;
            std::vector<std::pair<double, int>> remainders;
            for (int sp = 0; sp < m.num_states; ++sp) {
                const double exact = m.transitions[s][a][sp] * static_cast<double>(k);
                const long base = static_cast<long>(exact);
                counts.next_counts[s][a][sp] = base;
                assigned += base;
                remainders.emplace_back(exact - static_cast<double>(base), sp);
            }
            std::sort(remainders.rbegin(), remainders.rend());
            for (long r = 0; r < k - assigned; ++r)
                counts.next_counts[s][a][remainders[r % remainders.size()].second] += 1;
        }
    return counts;
}

/// Draws an MDP inside the confidence set: rewards uniform in their
/// intervals, transition rows from Dirichlet draws pulled back toward the
/// empirical frequencies until they fit the L1 budget (a convex
/// combination, so rows stay on the simplex).
inline TabularMdp sample_mdp_in(const ConfidenceSet& cs, const TabularMdp& like,
                                std::mt19937_64& rng) {
    TabularMdp m = like;
    const int S = cs.params.num_states, A = cs.params.num_actions;
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) {
            const double hw = cs.reward_halfwidth(s, a);
            m.rewards[s][a] = cs.r_hat[s][a] + (2.0 * uniform01(rng) - 1.0) * hw;
            std::vector<double> q = dirichlet(rng, S);
            double l1 = 0.0;
            for (int sp = 0; sp < S; ++sp) l1 += std::abs(q[sp] - cs.p_hat[s][a][sp]);
            const double budget = cs.transition_budget(s, a);
            if (l1 > budget) {
                const double lam = 0.999 * budget / l1;
                for (int sp = 0; sp < S; ++sp)
                    q[sp] = cs.p_hat[s][a][sp] + lam * (q[sp] - cs.p_hat[s][a][sp]);
            }
            double sum = 0.0;
            for (double v : q) sum += v;
            for (double& v : q) v /= sum;
            m.transitions[s][a] = q;
        }
    m.validate();
    return m;
}

/// Bernoulli(1/2) replacement rewards plus observation bookkeeping of the
/// true interaction, mirroring what the two-phase attacker sees while it
/// explores.
class CountingExplorationAttacker : public Attacker {
public:
    CountingExplorationAttacker(int num_states, int num_actions)
        : counts_(num_states, num_actions) {}

    double perturb(int, long, int, int, double) override { return exploration_reward(rng_); }
    void observe(int, long, int s, int a, double r, int s_next) override {
        counts_.update(s, a, r, s_next);
    }
    void on_learner_start(int, std::uint64_t seed) override { rng_.seed(seed); }
    AttackPhase phase() const override { return AttackPhase::Exploration; }
    const ObservationCounts& counts() const { return counts_; }

private:
    ObservationCounts counts_;
    std::mt19937_64 rng_{0};
};

/// Runs one seeded exploration learner and returns the counts it produced.
inline ObservationCounts exploration_counts(const TabularMdp& m, long total_steps,
                                            std::uint64_t seed) {
    CountingExplorationAttacker attacker(m.num_states, m.num_actions);
    OptimisticModelLearner learner(m.num_states, m.num_actions, m.gamma, m.initial_dist,
                                   m.horizon, 0.1);
    RunConfig cfg{total_steps, 1, seed, false};
    run_learner(m, learner, attacker, cfg, 0);
    return attacker.counts();
}

} // namespace rlp::test
