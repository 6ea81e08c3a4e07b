#include "fixtures.hpp"
#include "rlp/oracles.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <set>

using namespace rlp;
using test::random_mdp;
using test::random_policy;
using test::single_state_mdp;
using test::two_state_cycle;

TEST_CASE("policy enumeration counts and order", "[oracles]") {
    CHECK(enumerate_policies(single_state_mdp()).size() == 2);

    std::mt19937_64 rng(41);
    CHECK(enumerate_policies(random_mdp(rng, 2, 2)).size() == 4);

    const TabularMdp m33 = random_mdp(rng, 3, 3);
    const auto policies = enumerate_policies(m33);
    REQUIRE(policies.size() == 27);
    std::set<std::vector<int>> distinct;
    for (const auto& pi : policies) distinct.insert(pi.action_of);
    CHECK(distinct.size() == 27);
    CHECK(policies.front().action_of == std::vector<int>{0, 0, 0});
    CHECK(policies[1].action_of == std::vector<int>{0, 0, 1}); // lexicographic
    CHECK(policies.back().action_of == std::vector<int>{2, 2, 2});

    CHECK_THROWS_AS(enumerate_policies(random_mdp(rng, 10, 3), 100), std::invalid_argument);
}

TEST_CASE("eps-optimal action sets by enumeration", "[oracles]") {
    const TabularMdp m = single_state_mdp();
    const EpsOptimalActionSets tight = eps_optimal_action_sets(m, 0.5);
    CHECK(tight.actions_of[0] == std::set<int>{0});

    const EpsOptimalActionSets loose = eps_optimal_action_sets(m, 100.0);
    CHECK(loose.actions_of[0] == std::set<int>{0, 1});

    // eps = 0 keeps exactly the optimal policy's actions when it is unique.
    std::mt19937_64 rng(43);
    const TabularMdp r = random_mdp(rng, 3, 3);
    const PlanResult plan = value_iteration(r, 1e-11);
    const EpsOptimalActionSets zero = eps_optimal_action_sets(r, 0.0);
    for (int s = 0; s < 3; ++s) CHECK(zero.actions_of[s] == std::set<int>{plan.pi_star(s)});
}

TEST_CASE("minimum occupancies by enumeration", "[oracles]") {
    const MuMinResult single = mu_min_and_g(single_state_mdp());
    CHECK(single.mu_min == Catch::Approx(1.0).margin(1e-12));
    CHECK(single.g[0][0] == Catch::Approx(1.0).margin(1e-12));
    CHECK(single.g[0][1] == Catch::Approx(1.0).margin(1e-12));
    CHECK_FALSE(single.positivity_warning);

    const MuMinResult cycle = mu_min_and_g(two_state_cycle());
    CHECK(cycle.mu_min == Catch::Approx(1.0 / 3.0).margin(1e-12));
    CHECK(cycle.g[0][0] == Catch::Approx(2.0 / 3.0).margin(1e-12));
    CHECK(cycle.g[1][1] == Catch::Approx(1.0 / 3.0).margin(1e-12));

    // s1 is unreachable: every action self-loops at s0 and d0 is on s0.
    TabularMdp unreachable;
    unreachable.num_states = 2;
    unreachable.num_actions = 2;
    unreachable.rewards = {{0.0, 0.0}, {0.0, 0.0}};
    unreachable.transitions = {{{1.0, 0.0}, {1.0, 0.0}}, {{1.0, 0.0}, {1.0, 0.0}}};
    unreachable.gamma = 0.5;
    unreachable.initial_dist = {1.0, 0.0};
    unreachable.horizon = 5;
    CHECK(mu_min_and_g(unreachable).positivity_warning);
}

TEST_CASE("return-occupancy identity", "[oracles]") {
    CHECK(return_occupancy_residual(single_state_mdp(), Policy{{0}}) <= 1e-10);
    CHECK(return_occupancy_residual(two_state_cycle(), Policy{{0, 1}}) <= 1e-10);

    std::mt19937_64 rng(47);
    TabularMdp zero = random_mdp(rng, 4, 2);
    for (auto& row : zero.rewards) std::fill(row.begin(), row.end(), 0.0);
    CHECK(return_occupancy_residual(zero, random_policy(rng, 4, 2)) <= 1e-10);

    for (int i = 0; i < 100; ++i) {
        const int S = 1 + static_cast<int>(uniform01(rng) * 5);
        const int A = 1 + static_cast<int>(uniform01(rng) * 5);
        const TabularMdp m = random_mdp(rng, S, A);
        CHECK(return_occupancy_residual(m, random_policy(rng, S, A)) <= 1e-8);
    }
}

TEST_CASE("occupancy-weighted advantage identity", "[oracles]") {
    const TabularMdp single = single_state_mdp();
    CHECK(performance_difference_residual(single, Policy{{0}}, Policy{{0}}) <= 1e-12);
    CHECK(performance_difference_residual(single, Policy{{0}}, Policy{{1}}) <= 1e-10);

    const TabularMdp cycle = two_state_cycle();
    const auto policies = enumerate_policies(cycle);
    for (const auto& pi : policies)
        for (const auto& pi2 : policies)
            CHECK(performance_difference_residual(cycle, pi, pi2) <= 1e-8);

    std::mt19937_64 rng(53);
    for (int i = 0; i < 100; ++i) {
        const int S = 1 + static_cast<int>(uniform01(rng) * 5);
        const int A = 1 + static_cast<int>(uniform01(rng) * 5);
        const TabularMdp m = random_mdp(rng, S, A);
        CHECK(performance_difference_residual(m, random_policy(rng, S, A),
                                              random_policy(rng, S, A)) <= 1e-8);
    }
}

TEST_CASE("neighbor characterization agrees with full enumeration", "[oracles]") {
    std::mt19937_64 rng(59);
    for (int i = 0; i < 40; ++i) {
        const int S = 1 + static_cast<int>(uniform01(rng) * 3);
        const int A = 2 + static_cast<int>(uniform01(rng) * 2);
        const TabularMdp m = random_mdp(rng, S, A);
        const Policy pi = random_policy(rng, S, A);
        const double rho_pi = policy_eval(m, pi).rho;

        double max_gap = 0.0;
        for_each_policy(m, [&](const Policy& other) {
            if (other == pi) return;
            max_gap = std::max(max_gap,
                               (1.0 - m.gamma) * (rho_pi - policy_eval(m, other).rho));
        });
        const double eps = std::max(1e-6, uniform01(rng) * std::abs(max_gap) * 1.2);

        bool brute = true;
        for_each_policy(m, [&](const Policy& other) {
            if (other == pi) return;
            if ((1.0 - m.gamma) * (rho_pi - policy_eval(m, other).rho) < eps - 1e-9)
                brute = false;
        });
        CHECK(is_eps_robust_optimal(m, pi, eps) == brute);
    }
}

TEST_CASE("greedy planner attains the enumeration optimum", "[oracles]") {
    std::mt19937_64 rng(61);
    for (int i = 0; i < 15; ++i) {
        const TabularMdp m = random_mdp(rng, 3, 3);
        const PlanResult plan = value_iteration(m, 1e-9);
        double best = -1e300;
        for_each_policy(m,
                        [&](const Policy& pi) { best = std::max(best, policy_eval(m, pi).rho); });
        CHECK(policy_eval(m, plan.pi_star).rho == Catch::Approx(best).margin(1e-8));
    }
}
