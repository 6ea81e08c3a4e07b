#pragma once

#include "rlp/mdp.hpp"

#include <json.hpp>

#include <cmath>
#include <string>
#include <vector>

namespace rlp {

/// Per-pair visit counts, reward sums and next-state counts gathered from
/// observed transitions. The raw material for the confidence set.
struct ObservationCounts {
    std::vector<std::vector<long>> n;                  // N[s][a]
    RewardTable reward_sum;                            // sum of observed rewards
    std::vector<std::vector<std::vector<long>>> next_counts; // N[s][a][s']

    ObservationCounts() = default;
    ObservationCounts(int num_states, int num_actions)
        : n(num_states, std::vector<long>(num_actions, 0)),
          reward_sum(num_states, std::vector<double>(num_actions, 0.0)),
          next_counts(num_states, std::vector<std::vector<long>>(
                                      num_actions, std::vector<long>(num_states, 0))) {}

    int num_states() const { return static_cast<int>(n.size()); }
    int num_actions() const { return n.empty() ? 0 : static_cast<int>(n[0].size()); }

    void update(int s, int a, double r, int s_next) {
        if (!std::isfinite(r)) throw std::invalid_argument("observation update: non-finite reward");
        n.at(s).at(a) += 1;
        reward_sum[s][a] += r;
        next_counts[s][a].at(s_next) += 1;
    }

    long min_count() const {
        long m = std::numeric_limits<long>::max();
        for (const auto& row : n)
            for (long c : row) m = std::min(m, c);
        return m;
    }

    std::vector<std::pair<int, int>> unvisited_pairs() const {
        std::vector<std::pair<int, int>> out;
        for (int s = 0; s < num_states(); ++s)
            for (int a = 0; a < num_actions(); ++a)
                if (n[s][a] == 0) out.emplace_back(s, a);
        return out;
    }
};

/// Parameters the interval scales are derived from.
struct ConfidenceParams {
    double sigma = 0.0;
    int num_states = 0;
    int num_actions = 0;
    int num_learners = 1; // L in the union bound
    double failure_p = 0.1;
};

inline double reward_radius_scale(const ConfidenceParams& p) {
    return std::sqrt(2.0 * p.sigma * p.sigma *
                     std::log(2.0 * p.num_states * p.num_actions * p.num_learners / p.failure_p));
}

inline double transition_radius_scale(const ConfidenceParams& p) {
    return std::sqrt(2.0 * std::log(2.0 * p.num_states * p.num_actions * p.num_learners /
                                    p.failure_p) +
                     2.0 * p.num_states * std::log(2.0));
}

/**
 * The set of plausible MDPs: per-pair reward intervals of half-width
 * u/sqrt(N(s,a)) around the empirical mean and L1 transition balls of
 * radius w/sqrt(N(s,a)) around the empirical frequencies, intersected with
 * the simplex. Built only once every pair has been visited.
 */
struct ConfidenceSet {
    RewardTable r_hat;
    TransitionTable p_hat;
    double u = 0.0; // reward radius scale
    double w = 0.0; // transition L1 radius scale
    ObservationCounts counts;
    ConfidenceParams params;

    double reward_halfwidth(int s, int a) const {
        return u / std::sqrt(static_cast<double>(counts.n[s][a]));
    }
    double transition_budget(int s, int a) const {
        return w / std::sqrt(static_cast<double>(counts.n[s][a]));
    }
    double r_high(int s, int a) const { return r_hat[s][a] + reward_halfwidth(s, a); }
    double r_low(int s, int a) const { return r_hat[s][a] - reward_halfwidth(s, a); }

    /// max over pairs of R_high minus min over pairs of R_low.
    double r_hat_range() const {
        double hi = -std::numeric_limits<double>::infinity();
        double lo = std::numeric_limits<double>::infinity();
        for (int s = 0; s < params.num_states; ++s)
            for (int a = 0; a < params.num_actions; ++a) {
                hi = std::max(hi, r_high(s, a));
                lo = std::min(lo, r_low(s, a));
            }
        return hi - lo;
    }
};

inline ConfidenceSet build_confidence_set(const ObservationCounts& counts, double sigma,
                                          int num_states, int num_actions, int num_learners,
                                          double failure_p) {
    if (counts.num_states() != num_states || counts.num_actions() != num_actions)
        throw std::invalid_argument("build_confidence_set: counts dimensions mismatch");
    const auto unvisited = counts.unvisited_pairs();
    if (!unvisited.empty()) {
        std::string msg = "build_confidence_set: unvisited pairs:";
        for (const auto& [s, a] : unvisited)
            msg += " (" + std::to_string(s) + "," + std::to_string(a) + ")";
        throw std::invalid_argument(msg);
    }

    ConfidenceSet cs;
    cs.counts = counts;
    cs.params = {sigma, num_states, num_actions, num_learners, failure_p};
    cs.u = reward_radius_scale(cs.params);
    cs.w = transition_radius_scale(cs.params);
    cs.r_hat.assign(num_states, std::vector<double>(num_actions, 0.0));
    cs.p_hat.assign(num_states,
                    std::vector<std::vector<double>>(num_actions,
                                                     std::vector<double>(num_states, 0.0)));
    for (int s = 0; s < num_states; ++s)
        for (int a = 0; a < num_actions; ++a) {
            const double ns = static_cast<double>(counts.n[s][a]);
            cs.r_hat[s][a] = counts.reward_sum[s][a] / ns;
            for (int sp = 0; sp < num_states; ++sp)
                cs.p_hat[s][a][sp] = static_cast<double>(counts.next_counts[s][a][sp]) / ns;
        }
    return cs;
}

/// Membership test: every reward within its interval and every transition
/// row within its L1 budget.
inline bool contains(const ConfidenceSet& cs, const TabularMdp& m) {
    if (m.num_states != cs.params.num_states || m.num_actions != cs.params.num_actions)
        throw std::invalid_argument("contains: dimension mismatch");
    for (int s = 0; s < m.num_states; ++s)
        for (int a = 0; a < m.num_actions; ++a) {
            if (std::abs(m.rewards[s][a] - cs.r_hat[s][a]) > cs.reward_halfwidth(s, a))
                return false;
            double l1 = 0.0;
            for (int sp = 0; sp < m.num_states; ++sp)
                l1 += std::abs(m.transitions[s][a][sp] - cs.p_hat[s][a][sp]);
            if (l1 > cs.transition_budget(s, a)) return false;
        }
    return true;
}

inline nlohmann::json counts_to_json(const ObservationCounts& c) {
    return nlohmann::json{
        {"n", c.n}, {"reward_sum", c.reward_sum}, {"next_counts", c.next_counts}};
}

inline ObservationCounts counts_from_json(const nlohmann::json& j) {
    ObservationCounts c;
    try {
        j.at("n").get_to(c.n);
        j.at("reward_sum").get_to(c.reward_sum);
        j.at("next_counts").get_to(c.next_counts);
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("counts document: ") + e.what());
    }
    return c;
}

/// Snapshot of the confidence set for offline consumption (r_hat, p_hat,
/// u, w plus the raw counts they derive from).
inline nlohmann::json confidence_snapshot(const ConfidenceSet& cs) {
    return nlohmann::json{{"r_hat", cs.r_hat},
                          {"p_hat", cs.p_hat},
                          {"u", cs.u},
                          {"w", cs.w},
                          {"counts", counts_to_json(cs.counts)},
                          {"params",
                           {{"sigma", cs.params.sigma},
                            {"num_states", cs.params.num_states},
                            {"num_actions", cs.params.num_actions},
                            {"num_learners", cs.params.num_learners},
                            {"failure_p", cs.params.failure_p}}}};
}

} // namespace rlp
