#pragma once

#include "rlp/confidence.hpp"
#include "rlp/mdp.hpp"
#include "rlp/oracles.hpp"
#include "rlp/robust.hpp"
#include "rlp/simulator.hpp"
#include "rlp/whitebox.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <vector>

namespace rlp {

/// Everything the two-phase attacker is given up front. It knows the state
/// and action spaces, gamma, d0 and the noise scale, but nothing about the
/// rewards or transitions.
struct U2Config {
    Policy target;
    double eps = 0.1;
    double lambda = 1.0;
    double slack_m = 0.5;   // how much worse than the full-knowledge attack is acceptable
    double failure_p = 0.1; // confidence budget p
    double sigma = 1.0;
    double gamma = 0.9;
    std::vector<double> initial_dist;
    int num_actions = 0;
    int num_learners = 1; // L, enters the union bound in the interval scales

    int num_states() const { return target.num_states(); }

    void validate() const {
        if (!(slack_m > 0.0)) throw std::invalid_argument("u2 config: m must be positive");
        if (!(failure_p > 0.0 && failure_p < 1.0))
            throw std::invalid_argument("u2 config: p must lie in (0, 1)");
        if (!(eps > 0.0)) throw std::invalid_argument("u2 config: eps must be positive");
        if (!(gamma > 0.0 && gamma < 1.0))
            throw std::invalid_argument("u2 config: gamma must lie in (0, 1)");
        if (num_actions < 1) throw std::invalid_argument("u2 config: num_actions must be >= 1");
        if (num_learners < 1) throw std::invalid_argument("u2 config: num_learners must be >= 1");
        if (static_cast<int>(initial_dist.size()) != num_states())
            throw std::invalid_argument("u2 config: initial_dist size mismatch");
    }
};

/// Interval-derived error terms at the current observation level.
struct ErrorTerms {
    double r_hat_range = 0.0; // max R_high - min R_low
    double e_q_hat = 0.0;     // value/Q error scale from the empirical range
    double e_mu = 0.0;        // occupancy error scale
    double e_q = std::numeric_limits<double>::quiet_NaN(); // variant using a known true range
    long n_min = 0;
};

inline ErrorTerms error_terms(const ConfidenceSet& cs, double gamma,
                              std::optional<double> true_reward_range = std::nullopt) {
    ErrorTerms e;
    e.n_min = cs.counts.min_count();
    e.r_hat_range = cs.r_hat_range();
    e.e_q_hat = q_error_bound(cs.u, cs.w, gamma, e.r_hat_range, e.n_min);
    e.e_mu = mu_error_bound(cs.w, gamma, e.n_min);
    if (true_reward_range)
        e.e_q = q_error_bound(cs.u, cs.w, gamma, *true_reward_range, e.n_min);
    return e;
}

/// Bernoulli(1/2) replacement reward; deliberately independent of the state,
/// action and true reward.
inline double exploration_reward(std::mt19937_64& rng) {
    return bernoulli_half(rng) ? 1.0 : 0.0;
}

/**
 * Whether the gathered data certifies that the frozen perturbation will be
 * within m of the full-knowledge one: for every off-target pair,
 *
 *   2 e_q_hat + eps/mu_low - eps/(mu_low + e_mu) <= m .
 *
 * Returns false if any occupancy lower bound is nonpositive (the
 * perturbation would be unbounded there).
 */
inline bool stopping_check(const ConfidenceSet& cs, const U2Config& cfg,
                           const RewardTable& mu_low_table) {
    const ErrorTerms e = error_terms(cs, cfg.gamma);
    for (int s = 0; s < cfg.num_states(); ++s)
        for (int a = 0; a < cfg.num_actions; ++a) {
            if (a == cfg.target(s)) continue;
            const double mu = mu_low_table[s][a];
            if (mu <= 0.0) return false;
            const double lhs = 2.0 * e.e_q_hat + cfg.eps / mu - cfg.eps / (mu + e.e_mu);
            if (lhs > cfg.slack_m) return false;
        }
    return true;
}

/// Attacker that replaces every reward with a Bernoulli(1/2) draw, never
/// leaving the exploration phase. Used to exercise the data-collection
/// mechanism on its own.
class BernoulliExplorationAttacker : public Attacker {
public:
    double perturb(int, long, int, int, double) override { return exploration_reward(rng_); }
    void on_learner_start(int, std::uint64_t seed) override { rng_.seed(seed); }
    AttackPhase phase() const override { return AttackPhase::Exploration; }

private:
    std::mt19937_64 rng_{0};
};

struct U2State {
    AttackPhase phase = AttackPhase::Exploration;
    int learners_used_exploring = 0; // k1
    ObservationCounts counts;
    std::optional<ConfidenceSet> cs;       // refreshed after each exploration learner
    std::optional<RewardTable> mu_low;     // cached for the cs above
    std::optional<Perturbation> frozen_delta; // present iff phase == Attack
};

/**
 * The two-phase black-box attacker. While exploring it feeds learners
 * Bernoulli(1/2) rewards and records the true interaction; after each
 * exploration learner it rebuilds the confidence set, evaluates the
 * stopping condition and, once certified, freezes the robust perturbation
 * and attacks every remaining learner with it. The phase can only advance,
 * and never changes mid-learner.
 */
class U2Attacker : public Attacker {
public:
    explicit U2Attacker(U2Config cfg, double tol = 1e-8)
        : cfg_(std::move(cfg)), tol_(tol) {
        cfg_.validate();
        state_.counts = ObservationCounts(cfg_.num_states(), cfg_.num_actions);
    }

    double perturb(int, long, int s, int a, double r) override {
        if (state_.phase == AttackPhase::Exploration) return exploration_reward(rng_);
        return r - (*state_.frozen_delta)(s, a);
    }

    void observe(int, long, int s, int a, double true_reward, int s_next) override {
        if (state_.phase == AttackPhase::Exploration)
            state_.counts.update(s, a, true_reward, s_next);
    }

    void on_learner_start(int, std::uint64_t seed) override { rng_.seed(seed); }

    void on_learner_end(int) override {
        if (state_.phase != AttackPhase::Exploration) return;
        ++state_.learners_used_exploring;
        if (state_.counts.min_count() == 0) return; // set not yet defined
        state_.cs = build_confidence_set(state_.counts, cfg_.sigma, cfg_.num_states(),
                                         cfg_.num_actions, cfg_.num_learners, cfg_.failure_p);
        state_.mu_low = neighbor_mu_low_table(*state_.cs, cfg_.target, cfg_.gamma,
                                              cfg_.initial_dist, tol_);
        if (!stopping_check(*state_.cs, cfg_, *state_.mu_low)) return;
        try {
            AttackConfig attack{cfg_.target, cfg_.eps, cfg_.lambda};
            state_.frozen_delta = delta_hat(*state_.cs, cfg_.gamma, cfg_.initial_dist, attack,
                                            tol_, &*state_.mu_low);
            state_.phase = AttackPhase::Attack;
        } catch (const std::runtime_error&) {
            // A degenerate occupancy bound slipped past the check; keep
            // exploring with the next learner.
        }
    }

    AttackPhase phase() const override { return state_.phase; }
    const U2State& state() const { return state_; }
    const U2Config& config() const { return cfg_; }

    nlohmann::json snapshot() const {
        nlohmann::json j{{"phase", state_.phase == AttackPhase::Attack ? "attack"
                                                                       : "exploration"},
                         {"learners_used_exploring", state_.learners_used_exploring}};
        if (state_.frozen_delta) j["frozen_delta"] = state_.frozen_delta->delta;
        return j;
    }

private:
    U2Config cfg_;
    double tol_;
    U2State state_;
    std::mt19937_64 rng_{0};
};

/// Closed-form exploration budget: n0 bounds the per-pair observations
/// needed before the stopping condition must hold, k0 the number of
/// exploration learners needed to gather them.
struct TheoryBudget {
    double n0 = 0.0;
    double k0 = 0.0;
    double u = 0.0, w = 0.0;
    double mu_min = 0.0;
    double reward_range = 0.0;
    bool alpha_assumption_ok = true; // alpha < mu_min / (2 sqrt 2)
    bool beta_assumption_ok = true;  // beta < 1 / (8 S A)
};

constexpr double kBudgetC1 = 0.02;
constexpr double kBudgetC2 = 1.34;

inline TheoryBudget exploration_budget(const TabularMdp& m, double alpha, double beta,
                                       const U2Config& cfg) {
    cfg.validate();
    TheoryBudget b;
    b.mu_min = mu_min_and_g(m).mu_min;
    b.reward_range = m.reward_range();
    const ConfidenceParams params{cfg.sigma, m.num_states, m.num_actions, cfg.num_learners,
                                  cfg.failure_p};
    b.u = reward_radius_scale(params);
    b.w = transition_radius_scale(params);

    const double sa = static_cast<double>(m.num_states) * m.num_actions;
    b.alpha_assumption_ok = alpha < b.mu_min / (2.0 * std::sqrt(2.0));
    b.beta_assumption_ok = beta < 1.0 / (8.0 * sa);
    if (!b.alpha_assumption_ok)
        std::cerr << "warning: alpha = " << alpha << " >= mu_min/(2 sqrt 2) = "
                  << b.mu_min / (2.0 * std::sqrt(2.0)) << "\n";
    if (!b.beta_assumption_ok)
        std::cerr << "warning: beta = " << beta << " >= 1/(8SA) = " << 1.0 / (8.0 * sa) << "\n";

    const double one_minus = 1.0 - cfg.gamma;
    const double m_slack = cfg.slack_m;
    const double term1 = b.reward_range > 0.0 ? std::pow(2.0 * b.u / b.reward_range, 2.0) : 0.0;
    const double term2 = std::pow(
        (8.0 * b.u + 16.0 * cfg.gamma * b.reward_range * b.w) / (one_minus * one_minus * m_slack),
        2.0);
    const double term3 = std::pow((2.0 * cfg.gamma * b.w / one_minus) *
                                      (6.0 * cfg.eps + m_slack * b.mu_min) /
                                      (m_slack * b.mu_min * b.mu_min),
                                  2.0);
    b.n0 = std::max({term1, term2, term3});

    const double log_beta = std::log(1.0 / (8.0 * sa * beta));
    b.k0 = 8.0 * std::log(1.0 / cfg.failure_p) +
           (4.0 * alpha * alpha * b.n0 / (b.mu_min * b.mu_min)) *
               (std::log(16.0 * sa) + kBudgetC2 * log_beta) /
               (kBudgetC1 * log_beta * log_beta);
    return b;
}

/// Cost bound for the two-phase attack: exploration cost diminishing in L
/// plus a fixed-perturbation term within m of the full-knowledge attack.
inline double u2_cost_bound(const TabularMdp& m, const U2Config& cfg, const TheoryBudget& budget,
                            const SuboptFn& subopt, long total_steps, int num_learners) {
    const Perturbation dstar = delta_star(m, AttackConfig{cfg.target, cfg.eps, cfg.lambda});
    double first = 0.0;
    if (budget.k0 > 0.0) {
        first = (budget.k0 / num_learners) *
                (m.max_abs_reward() +
                 cfg.sigma * std::sqrt(2.0 * std::log(2.0 * budget.k0 * total_steps /
                                                      cfg.failure_p)) +
                 1.0 + cfg.lambda);
    }
    const double second = (dstar.sup_norm() + cfg.lambda + cfg.slack_m) *
                          subopt(total_steps, cfg.eps, cfg.failure_p / num_learners) /
                          static_cast<double>(total_steps);
    return first + second;
}

/// The three reward layouts supporting the exploration guarantee: constant
/// 1/2 everywhere, and the variants that raise or lower the probed pair by
/// alpha/g so it is played by all, respectively none, of the alpha-optimal
/// policies.
struct ExplorationFixtures {
    TabularMdp base;      // constant 1/2 rewards
    TabularMdp raised;    // probed pair at 1/2 + alpha/g
    TabularMdp lowered;   // probed pair at 1/2 - alpha/g
    double g = 0.0;       // min occupancy of the probed pair
};

inline ExplorationFixtures exploration_fixtures(const TabularMdp& m, int s, int a, double alpha) {
    if (s < 0 || s >= m.num_states || a < 0 || a >= m.num_actions)
        throw std::invalid_argument("exploration_fixtures: invalid state-action pair");
    const double g = mu_min_and_g(m).g[s][a];
    if (!(alpha > 0.0) || alpha / g > 0.5)
        throw std::invalid_argument("exploration_fixtures: alpha/g = " +
                                    std::to_string(alpha / g) +
                                    " must lie in (0, 1/2] for Bernoulli parameters");
    ExplorationFixtures out;
    out.g = g;
    out.base = m;
    for (auto& row : out.base.rewards) std::fill(row.begin(), row.end(), 0.5);
    out.raised = out.base;
    out.raised.rewards[s][a] = 0.5 + alpha / g;
    out.lowered = out.base;
    out.lowered.rewards[s][a] = 0.5 - alpha / g;
    return out;
}

struct VisitationReport {
    double bound = 0.0;    // guaranteed visit count at confidence 1 - delta
    double quantile = 0.0; // empirical lower delta-quantile of observed visits
    std::vector<long> visits;
    bool pass = false;
};

/**
 * Monte Carlo check of the exploration guarantee: runs seeded simulations
 * with Bernoulli(1/2) delivered rewards, counts visits to (s, a) over T
 * steps per trial, and compares the empirical delta-quantile against the
 * closed-form lower bound
 *
 *   g^2/alpha^2 * c1 (log delta/(4 beta))^2 /
 *       (log(8/delta) + c2 log(delta/(4 beta))) .
 *
 * The bound holds for any learner with the assumed (alpha, beta) guarantee,
 * so a failure points at the learner or a bug, not at bad luck.
 */
inline VisitationReport visitation_bound_check(
    const TabularMdp& m,
    const std::function<std::unique_ptr<Learner>(std::uint64_t seed)>& learner_factory, int s,
    int a, double alpha, double beta, double delta, long total_steps, int trials,
    std::uint64_t base_seed = 12345) {
    if (4.0 * beta > delta)
        throw std::invalid_argument("visitation_bound_check: requires 4 beta <= delta");
    const double g = mu_min_and_g(m).g[s][a];
    if (!(alpha / g < 1.0 / (2.0 * std::sqrt(2.0))))
        throw std::invalid_argument("visitation_bound_check: requires alpha/g < 1/(2 sqrt 2)");

    VisitationReport report;
    const double log_ratio = std::log(delta / (4.0 * beta));
    report.bound = (g * g / (alpha * alpha)) * kBudgetC1 * log_ratio * log_ratio /
                   (std::log(8.0 / delta) + kBudgetC2 * log_ratio);

    report.visits.reserve(trials);
    for (int trial = 0; trial < trials; ++trial) {
        auto learner = learner_factory(stream_seed(base_seed + trial, 0, StreamRole::Learner));
        BernoulliExplorationAttacker attacker;
        long count = 0;
        RunConfig cfg{total_steps, 1, base_seed + static_cast<std::uint64_t>(trial), false};
        run_learner(m, *learner, attacker, cfg, 0, [&](const TransitionRecord& rec) {
            if (rec.state == s && rec.action == a) ++count;
        });
        report.visits.push_back(count);
    }
    std::vector<long> sorted = report.visits;
    std::sort(sorted.begin(), sorted.end());
    const int idx = static_cast<int>(delta * (trials - 1));
    report.quantile = static_cast<double>(sorted[idx]);
    report.pass = report.quantile >= report.bound;
    return report;
}

} // namespace rlp
