#pragma once

#include "rlp/confidence.hpp"
#include "rlp/mdp.hpp"
#include "rlp/oracles.hpp"
#include "rlp/robust.hpp"
#include "rlp/simulator.hpp"

#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace rlp {

/// SubOpt(T, eps, delta): bound on the number of eps-suboptimal steps a
/// no-regret learner takes in T steps with probability 1 - delta.
using SuboptFn = std::function<double(long total_steps, double eps, double delta)>;

/// Assumed performance guarantee of a learner: with probability 1 - beta it
/// finds an alpha-optimal policy within T steps, and its eps-suboptimal
/// step count is bounded by subopt. For the concrete learners here alpha
/// and beta are empirical estimates, not published constants.
struct LearnerGuarantee {
    double alpha = 0.1;
    double beta = 0.05;
    SuboptFn subopt;
};

/**
 * Model-based learner with optimistic planning. Keeps empirical means and
 * visit counts, and at every episode start recomputes
 *
 *   v(s) <- max_a [ max_{r in R(s,a)} r + gamma max_{p in P(s,a)} E_{s'~p} v(s') ]
 *
 * over per-pair reward intervals and L1 transition balls (the same interval
 * shapes the attacker uses, with this learner's own confidence parameter),
 * then acts greedily. Unvisited pairs get maximal optimism: reward bound of
 * one above the best reward seen so far, and a free choice of transition.
 */
class OptimisticModelLearner : public Learner {
public:
    OptimisticModelLearner(int num_states, int num_actions, double gamma,
                           std::vector<double> initial_dist, int horizon,
                           double confidence_delta)
        : S_(num_states), A_(num_actions), gamma_(gamma), initial_dist_(std::move(initial_dist)),
          horizon_(horizon), counts_(num_states, num_actions) {
        // Interval scales with a unit sub-Gaussian assumption; any valid
        // optimism works, the radii only shape the exploration schedule.
        const ConfidenceParams params{1.0, S_, A_, 1, confidence_delta};
        u_ = reward_radius_scale(params);
        w_ = transition_radius_scale(params);
        q_opt_.assign(S_, std::vector<double>(A_, 0.0));
        plan();
    }

    int act(int s) override {
        if (dirty_) plan();
        return greedy_action(s);
    }

    void observe(int s, int a, double reward, int s_next, bool episode_end) override {
        counts_.update(s, a, reward, s_next);
        if (!seen_any_ || reward > r_max_) {
            r_max_ = reward;
            seen_any_ = true;
        }
        if (episode_end) dirty_ = true;
    }

    Policy current_policy() const override {
        if (dirty_) plan();
        Policy pi;
        pi.action_of.resize(S_);
        for (int s = 0; s < S_; ++s) pi.action_of[s] = greedy_action(s);
        return pi;
    }

private:
    int greedy_action(int s) const {
        int best = 0;
        for (int a = 1; a < A_; ++a)
            if (q_opt_[s][a] > q_opt_[s][best]) best = a;
        return best;
    }

    double optimistic_reward(int s, int a) const {
        const long n = counts_.n[s][a];
        if (n == 0) return (seen_any_ ? r_max_ : 0.0) + 1.0;
        return counts_.reward_sum[s][a] / static_cast<double>(n) +
               u_ / std::sqrt(static_cast<double>(n));
    }

    double optimistic_backup(int s, int a, const std::vector<double>& v) const {
        const long n = counts_.n[s][a];
        std::vector<double> p_hat;
        double budget = 0.0;
        if (n == 0) {
            p_hat.assign(S_, 1.0 / S_);
            budget = 2.0; // whole simplex
        } else {
            p_hat.resize(S_);
            for (int sp = 0; sp < S_; ++sp)
                p_hat[sp] = static_cast<double>(counts_.next_counts[s][a][sp]) /
                            static_cast<double>(n);
            budget = w_ / std::sqrt(static_cast<double>(n));
        }
        const std::vector<double> p = inner_linear_opt(p_hat, budget, v, Orientation::High);
        return std::inner_product(p.begin(), p.end(), v.begin(), 0.0);
    }

    void plan() const {
        std::vector<double> v(S_, 0.0), next(S_, 0.0);
        const double threshold = 1e-6 * (1.0 - gamma_) / (2.0 * gamma_);
        constexpr long cap = 1'000'000;
        for (long i = 0;; ++i) {
            if (i >= cap)
                throw std::runtime_error("optimistic planning: iteration cap exceeded");
            double change = 0.0;
            for (int s = 0; s < S_; ++s) {
                double best = -std::numeric_limits<double>::infinity();
                for (int a = 0; a < A_; ++a)
                    best = std::max(best,
                                    optimistic_reward(s, a) + gamma_ * optimistic_backup(s, a, v));
                next[s] = best;
                change = std::max(change, std::abs(next[s] - v[s]));
            }
            std::swap(v, next);
            if (change <= threshold) break;
        }
        for (int s = 0; s < S_; ++s)
            for (int a = 0; a < A_; ++a)
                q_opt_[s][a] = optimistic_reward(s, a) + gamma_ * optimistic_backup(s, a, v);
        dirty_ = false;
    }

    int S_, A_;
    double gamma_;
    std::vector<double> initial_dist_;
    int horizon_;
    ObservationCounts counts_;
    double u_ = 0.0, w_ = 0.0;
    double r_max_ = 0.0;
    bool seen_any_ = false;
    mutable bool dirty_ = true;
    mutable RewardTable q_opt_;
};

/// Tabular Q-learning with epsilon-greedy exploration; the contrast
/// baseline outside the model-based class.
class QLearner : public Learner {
public:
    using Schedule = std::function<double(long)>;

    QLearner(int num_states, int num_actions, double gamma, Schedule learning_rate,
             Schedule epsilon, std::uint64_t seed)
        : S_(num_states), A_(num_actions), gamma_(gamma), lr_(std::move(learning_rate)),
          eps_(std::move(epsilon)), rng_(seed) {
        q_.assign(S_, std::vector<double>(A_, 0.0));
        visits_.assign(S_, std::vector<long>(A_, 0));
    }

    static Schedule default_learning_rate() {
        return [](long n) { return 1.0 / std::pow(static_cast<double>(n), 0.75); };
    }
    static Schedule default_epsilon(double c = 2.0) {
        return [c](long t) { return std::min(1.0, c / std::sqrt(static_cast<double>(t))); };
    }

    int act(int s) override {
        ++t_;
        if (uniform01(rng_) < eps_(t_)) {
            int a = static_cast<int>(uniform01(rng_) * A_);
            return std::min(a, A_ - 1);
        }
        return greedy_action(s);
    }

    void observe(int s, int a, double reward, int s_next, bool) override {
        const long n = ++visits_[s][a];
        const double alpha = lr_(n);
        double best_next = q_[s_next][0];
        for (int ap = 1; ap < A_; ++ap) best_next = std::max(best_next, q_[s_next][ap]);
        q_[s][a] += alpha * (reward + gamma_ * best_next - q_[s][a]);
    }

    Policy current_policy() const override {
        Policy pi;
        pi.action_of.resize(S_);
        for (int s = 0; s < S_; ++s) pi.action_of[s] = greedy_action(s);
        return pi;
    }

    const RewardTable& q_values() const { return q_; }

private:
    int greedy_action(int s) const {
        int best = 0;
        for (int a = 1; a < A_; ++a)
            if (q_[s][a] > q_[s][best]) best = a;
        return best;
    }

    int S_, A_;
    double gamma_;
    Schedule lr_, eps_;
    std::mt19937_64 rng_;
    RewardTable q_;
    std::vector<std::vector<long>> visits_;
    long t_ = 0;
};

struct LearnerOptions {
    double confidence_delta = 0.1; // optimistic learner
    double explore_c = 2.0;        // qlearn epsilon schedule
};

/// Factory keyed by the learner name used in experiment configs.
inline std::unique_ptr<Learner> make_learner(const std::string& name, int num_states,
                                             int num_actions, double gamma,
                                             const std::vector<double>& initial_dist, int horizon,
                                             std::uint64_t stream_seed,
                                             const LearnerOptions& opts = {}) {
    if (name == "optimistic")
        return std::make_unique<OptimisticModelLearner>(num_states, num_actions, gamma,
                                                        initial_dist, horizon,
                                                        opts.confidence_delta);
    if (name == "qlearn")
        return std::make_unique<QLearner>(num_states, num_actions, gamma,
                                          QLearner::default_learning_rate(),
                                          QLearner::default_epsilon(opts.explore_c), stream_seed);
    throw std::invalid_argument("unknown learner: " + name);
}

/// Number of recorded steps whose action lies outside the eps-optimal
/// action set of its state, measured in the given MDP (true or delivered).
inline long count_subopt_steps(const EpsOptimalActionSets& sets,
                               const std::vector<TransitionRecord>& records) {
    long count = 0;
    for (const auto& rec : records)
        if (!sets.contains(rec.state, rec.action)) ++count;
    return count;
}

inline long count_subopt_steps(const TabularMdp& m, const std::vector<TransitionRecord>& records,
                               double eps) {
    return count_subopt_steps(eps_optimal_action_sets(m, eps), records);
}

} // namespace rlp
