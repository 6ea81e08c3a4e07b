#pragma once

#include "rlp/mdp.hpp"
#include "rlp/rng.hpp"

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace rlp {

struct RunConfig {
    long total_steps = 1;   // T steps per learner
    int num_learners = 1;   // L
    std::uint64_t seed = 0;
    bool record_trajectories = false;

    void validate() const {
        if (total_steps < 1) throw std::invalid_argument("run config: total_steps must be >= 1");
        if (num_learners < 1) throw std::invalid_argument("run config: num_learners must be >= 1");
    }
};

struct TransitionRecord {
    int learner = 0;
    long step = 0; // 1-based
    int state = 0;
    int action = 0;
    double true_reward = 0.0;
    double delivered_reward = 0.0;
    int next_state = 0;
    bool episode_end = false;

    bool operator==(const TransitionRecord&) const = default;
};

/// Victim interface. A learner sees only its own observations, never the
/// true MDP.
class Learner {
public:
    virtual ~Learner() = default;
    virtual int act(int state) = 0;
    virtual void observe(int state, int action, double reward, int next_state,
                         bool episode_end) = 0;
    virtual Policy current_policy() const = 0;
};

enum class AttackPhase { None, Exploration, Attack };

/// Attacker interface. perturb() sees exactly the public interaction
/// (learner index, step, state, action, true reward); observe() additionally
/// carries the sampled next state so the attacker can keep transition counts.
class Attacker {
public:
    virtual ~Attacker() = default;
    virtual double perturb(int learner, long step, int state, int action, double true_reward) = 0;
    virtual void observe(int /*learner*/, long /*step*/, int /*state*/, int /*action*/,
                         double /*true_reward*/, int /*next_state*/) {}
    virtual void on_learner_start(int /*learner*/, std::uint64_t /*stream_seed*/) {}
    virtual void on_learner_end(int /*learner*/) {}
    virtual AttackPhase phase() const { return AttackPhase::None; }
};

/// No-op attacker: delivers rewards unchanged.
class IdentityAttacker : public Attacker {
public:
    double perturb(int, long, int, int, double r) override { return r; }
};

/// One environment step: reward R(s,a) plus sigma-scaled Gaussian noise and
/// a next state drawn by inverse CDF over P(s,a,.).
inline std::pair<double, int> sample_step(const TabularMdp& m, int s, int a,
                                          std::mt19937_64& rng) {
    double r = m.rewards[s][a];
    if (m.noise_sigma > 0.0) r += m.noise_sigma * gaussian(rng);
    const int s_next = sample_categorical(m.transitions[s][a], rng);
    return {r, s_next};
}

struct RunResult {
    std::vector<TransitionRecord> records; // filled only when recording
    Policy final_policy;
};

/**
 * Runs one fresh learner for cfg.total_steps steps against the attacker.
 * Episodes restart from d0 every `horizon` steps; episode_end is flagged at
 * steps t = 0 (mod H) and at t = T. The learner is fed delivered rewards,
 * the attacker observes true rewards. Per-learner RNG streams are derived
 * from (cfg.seed, learner_index, role) so runs are reproducible and the
 * attacker cannot perturb environment noise.
 */
inline RunResult run_learner(const TabularMdp& m, Learner& learner, Attacker& attacker,
                             const RunConfig& cfg, int learner_index,
                             const std::function<void(const TransitionRecord&)>& sink = {}) {
    cfg.validate();
    std::mt19937_64 env_rng = make_stream(cfg.seed, learner_index, StreamRole::Environment);
    attacker.on_learner_start(learner_index,
                              stream_seed(cfg.seed, learner_index, StreamRole::Attacker));

    RunResult out;
    if (cfg.record_trajectories) out.records.reserve(static_cast<std::size_t>(cfg.total_steps));

    int s = 0;
    bool episode_start = true;
    for (long t = 1; t <= cfg.total_steps; ++t) {
        if (episode_start) s = sample_categorical(m.initial_dist, env_rng);
        const int a = learner.act(s);
        if (a < 0 || a >= m.num_actions)
            throw std::runtime_error("learner " + std::to_string(learner_index) +
                                     " returned out-of-range action " + std::to_string(a) +
                                     " at step " + std::to_string(t));
        const auto [r, s_next] = sample_step(m, s, a, env_rng);
        const double delivered = attacker.perturb(learner_index, t, s, a, r);
        if (!std::isfinite(delivered))
            throw std::runtime_error("attacker returned non-finite reward at step " +
                                     std::to_string(t) + " of learner " +
                                     std::to_string(learner_index));
        attacker.observe(learner_index, t, s, a, r, s_next);

        const bool episode_end = (t % m.horizon == 0) || (t == cfg.total_steps);
        learner.observe(s, a, delivered, s_next, episode_end);

        const TransitionRecord rec{learner_index, t, s, a, r, delivered, s_next, episode_end};
        if (sink) sink(rec);
        if (cfg.record_trajectories) out.records.push_back(rec);

        episode_start = episode_end;
        s = s_next;
    }

    attacker.on_learner_end(learner_index);
    out.final_policy = learner.current_policy();
    return out;
}

inline std::string trajectory_csv_header() { return "l,t,s,a,r,r_delivered,s_next,episode_end"; }

} // namespace rlp
