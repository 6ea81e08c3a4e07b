#pragma once

#include "rlp/mdp.hpp"
#include "rlp/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace rlp {

/// Nonnegative reward-shift table; the attacker delivers r - delta[s][a].
/// Entries on the target policy's own actions are identically zero.
struct Perturbation {
    RewardTable delta;

    double operator()(int s, int a) const { return delta[s][a]; }

    double sup_norm() const {
        double m = 0.0;
        for (const auto& row : delta)
            for (double d : row) m = std::max(m, std::abs(d));
        return m;
    }
};

struct AttackConfig {
    Policy target;        // policy the attacker enforces
    double eps = 0.1;     // robust-optimality margin
    double lambda = 1.0;  // per-step penalty for off-target actions

    void validate() const {
        if (!(eps > 0.0)) throw std::invalid_argument("attack config: eps must be positive");
        if (!(lambda > 0.0)) throw std::invalid_argument("attack config: lambda must be positive");
    }
};

/// Applies the delivered MDP R - delta to a copy of m.
inline TabularMdp perturbed_mdp(const TabularMdp& m, const Perturbation& delta) {
    TabularMdp out = m;
    for (int s = 0; s < m.num_states; ++s)
        for (int a = 0; a < m.num_actions; ++a) out.rewards[s][a] -= delta(s, a);
    return out;
}

/**
 * Closed-form minimal perturbation enforcing the target policy:
 *
 *   delta*(s, a) = [ Q(s, a) - V(s) + eps / mu_{target{s;a}}(s) ]_+
 *
 * for off-target actions, zero on the target column, with Q, V the exact
 * values of the target policy and mu the occupancy of each neighboring
 * policy at the deviation state. Subtracting delta* makes the target
 * eps-robust optimal with every neighbor gap binding exactly where the
 * bracket is positive.
 */
inline Perturbation delta_star(const TabularMdp& m, const AttackConfig& cfg) {
    if (!(cfg.eps > 0.0)) throw std::invalid_argument("delta_star: eps must be positive");
    cfg.target.validate(m);
    const ValueFunctions vf = policy_eval(m, cfg.target);
    Perturbation out;
    out.delta.assign(m.num_states, std::vector<double>(m.num_actions, 0.0));
    for (int s = 0; s < m.num_states; ++s)
        for (int a = 0; a < m.num_actions; ++a) {
            if (a == cfg.target(s)) continue;
            const OccupancyMeasure occ = occupancy(m, neighbor_policy(cfg.target, s, a));
            if (occ.mu[s] <= 1e-12)
                throw std::invalid_argument(
                    "delta_star: occupancy of neighbor policy at (s=" + std::to_string(s) +
                    ", a=" + std::to_string(a) + ") is not positive");
            out.delta[s][a] =
                std::max(0.0, vf.q[s][a] - vf.v[s] + cfg.eps / occ.mu[s]);
        }
    return out;
}

/// The attack rule: r' = r - delta(s, a).
inline double apply_perturbation(const Perturbation& delta, int s, int a, double r) {
    return r - delta(s, a);
}

/**
 * Feasibility of delta for the minimal-perturbation program: the target
 * column must be zero and the target policy eps-robust optimal in the
 * perturbed MDP. Checked two independent ways -- the entrywise closed-form
 * characterization and the direct neighbor-gap test -- which must agree
 * except within 1e-7 of the feasibility boundary; disagreement farther out
 * signals a bug in one of the two routes and throws.
 */
inline bool is_feasible_p1(const TabularMdp& m, const AttackConfig& cfg,
                           const Perturbation& delta) {
    if (!(cfg.eps > 0.0)) throw std::invalid_argument("is_feasible_p1: eps must be positive");
    for (int s = 0; s < m.num_states; ++s)
        if (std::abs(delta(s, cfg.target(s))) > 1e-12) return false;

    const Perturbation dstar = delta_star(m, cfg);
    double char_margin = std::numeric_limits<double>::infinity();
    for (int s = 0; s < m.num_states; ++s)
        for (int a = 0; a < m.num_actions; ++a) {
            if (a == cfg.target(s)) continue;
            char_margin = std::min(char_margin, delta(s, a) - dstar(s, a));
        }
    const bool char_feasible = char_margin >= -1e-9;

    const bool direct_feasible =
        is_eps_robust_optimal(perturbed_mdp(m, delta), cfg.target, cfg.eps);

    if (char_feasible != direct_feasible && std::abs(char_margin) > 1e-7)
        throw std::logic_error(
            "is_feasible_p1: closed-form characterization and direct robust-optimality check "
            "disagree (margin " + std::to_string(char_margin) + ")");
    return char_feasible && direct_feasible;
}

/// Per-learner averaged cost bound for a fixed-perturbation attack with a
/// measured count of suboptimal steps: (||delta||_inf + lambda) * count / T.
inline double whitebox_cost_bound(const Perturbation& delta, double lambda, long subopt_count,
                                  long total_steps, int num_learners) {
    if (total_steps < 1 || num_learners < 1)
        throw std::invalid_argument("whitebox_cost_bound: invalid T or L");
    return (delta.sup_norm() + lambda) * static_cast<double>(subopt_count) /
           static_cast<double>(total_steps);
}

/// Attacker that subtracts a fixed perturbation from every reward. Covers
/// the full-knowledge attack (delta = delta_star) and the prior-data attack
/// (delta built from logged observations).
class FixedPerturbationAttacker : public Attacker {
public:
    explicit FixedPerturbationAttacker(Perturbation delta) : delta_(std::move(delta)) {}

    double perturb(int, long, int s, int a, double r) override {
        return apply_perturbation(delta_, s, a, r);
    }
    AttackPhase phase() const override { return AttackPhase::Attack; }
    const Perturbation& perturbation() const { return delta_; }

private:
    Perturbation delta_;
};

} // namespace rlp
