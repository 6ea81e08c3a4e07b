#include "fixtures.hpp"
#include "rlp/harness.hpp"
#include "rlp/mdp_io.hpp"
#include "rlp/prior.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

using namespace rlp;
using test::synthetic_counts;
using test::two_state_fixture;

namespace {

PriorAttackParams fixture_params(const TabularMdp& m, long total_steps = 1000) {
    return PriorAttackParams{m.noise_sigma, 1,    0.1, m.gamma, m.initial_dist, total_steps,
                             [](long, double, double) { return 100.0; }};
}

} // namespace

TEST_CASE("prior attack collapses to the full-knowledge attack", "[prior]") {
    TabularMdp m = two_state_fixture();
    m.noise_sigma = 0.0;
    const AttackConfig cfg{test::fixture_target(), 0.1, 1.0};
    PriorAttackParams params = fixture_params(m);
    params.sigma = 0.0;

    const PriorDataReport report =
        attack_from_prior(synthetic_counts(m, 100'000'000), m, cfg, params);
    CHECK(report.e_q <= 1e-2);
    CHECK(report.e_mu <= 1e-2);
    REQUIRE(report.e_table.has_value());
    for (int s = 0; s < 2; ++s)
        for (int a = 0; a < 2; ++a) CHECK((*report.e_table)[s][a] <= 0.05);

    const Perturbation dstar = delta_star(m, cfg);
    for (int s = 0; s < 2; ++s)
        for (int a = 0; a < 2; ++a)
            CHECK(report.delta(s, a) == Catch::Approx(dstar(s, a)).margin(1e-3));

    const double whitebox = whitebox_cost_bound(dstar, cfg.lambda, 100, params.total_steps, 1);
    REQUIRE(report.bound.has_value());
    CHECK(*report.bound == Catch::Approx(whitebox).epsilon(1e-2));
}

TEST_CASE("error terms scale as one over sqrt of the counts", "[prior]") {
    const TabularMdp m = two_state_fixture();
    const AttackConfig cfg{test::fixture_target(), 0.1, 1.0};
    const PriorAttackParams params = fixture_params(m);

    const PriorDataReport base = attack_from_prior(synthetic_counts(m, 4000), m, cfg, params);
    const PriorDataReport quad = attack_from_prior(synthetic_counts(m, 16000), m, cfg, params);
    CHECK(quad.e_q == Catch::Approx(base.e_q / 2.0).epsilon(1e-9));
    CHECK(quad.e_mu == Catch::Approx(base.e_mu / 2.0).epsilon(1e-9));

    REQUIRE(base.e_table.has_value());
    REQUIRE(quad.e_table.has_value());
    for (int s = 0; s < 2; ++s)
        for (int a = 0; a < 2; ++a)
            CHECK((*quad.e_table)[s][a] <= (*base.e_table)[s][a] + 1e-12);
}

TEST_CASE("degenerate occupancy margins mark the bound vacuous", "[prior]") {
    const TabularMdp m = two_state_fixture();
    const AttackConfig cfg{test::fixture_target(), 0.1, 1.0};
    // Few observations: e_mu exceeds every occupancy, so mu - e_mu clips to 0.
    const PriorDataReport report = attack_from_prior(synthetic_counts(m, 2), m, cfg,
                                                     fixture_params(m));
    REQUIRE(report.e_table.has_value());
    CHECK(report.bound_vacuous);
    CHECK(std::isinf(*report.bound));
    bool any_inf = false;
    for (int s = 0; s < 2; ++s)
        for (int a = 0; a < 2; ++a)
            if (std::isinf((*report.e_table)[s][a])) any_inf = true;
    CHECK(any_inf);
}

TEST_CASE("analysis quantities are withheld without the true model", "[prior]") {
    const TabularMdp m = two_state_fixture();
    const AttackConfig cfg{test::fixture_target(), 0.1, 1.0};
    const PriorDataReport report =
        attack_from_prior(synthetic_counts(m, 500), std::nullopt, cfg, fixture_params(m));
    CHECK(report.used_empirical_range);
    CHECK_FALSE(report.e_table.has_value());
    CHECK_FALSE(report.bound.has_value());
    CHECK(report.delta.sup_norm() > 0.0);
}

TEST_CASE("robust perturbation stays within the error budget of the closed form", "[prior]") {
    const TabularMdp m = two_state_fixture();
    const AttackConfig cfg{test::fixture_target(), 0.1, 1.0};
    const Perturbation dstar = delta_star(m, cfg);

    int usable = 0;
    for (std::uint64_t seed = 0; seed < 20 && usable < 10; ++seed) {
        const ObservationCounts counts = test::exploration_counts(m, 6000, 900 + seed);
        if (counts.min_count() == 0) continue;
        const ConfidenceSet cs = build_confidence_set(counts, m.noise_sigma, 2, 2, 1, 0.1);
        if (!contains(cs, m)) continue;
        ++usable;
        const PriorDataReport report = attack_from_prior(counts, m, cfg, fixture_params(m));
        REQUIRE(report.e_table.has_value());
        for (int s = 0; s < 2; ++s)
            for (int a = 0; a < 2; ++a) {
                if (a == cfg.target(s)) continue;
                CHECK(report.delta(s, a) <= dstar(s, a) + (*report.e_table)[s][a] + 1e-6);
            }
    }
    REQUIRE(usable == 10);
}

TEST_CASE("measured prior-attack cost stays under its bound", "[prior]") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "rlp_prior_test";
    fs::create_directories(dir);
    const TabularMdp m = two_state_fixture();
    save_mdp(m, (dir / "mdp.json").string());

    ExperimentConfig cfg;
    cfg.mdp_path = (dir / "mdp.json").string();
    cfg.learner = "optimistic";
    cfg.attacker = "prior";
    cfg.attack = {test::fixture_target(), 0.1, 1.0};
    cfg.total_steps = 1500;
    cfg.num_learners = 4;
    cfg.prior_learners = 2;
    cfg.record_trajectories = true;
    for (std::uint64_t s = 1; s <= 20; ++s) cfg.seeds.push_back(s);

    const ExperimentSummary summary = run_experiment(cfg);
    int held = 0;
    for (const auto& r : summary.seeds) {
        REQUIRE(r.frozen_delta.has_value());
        const TabularMdp m_prime = perturbed_mdp(m, *r.frozen_delta);
        const EpsOptimalActionSets sets = eps_optimal_action_sets(m_prime, cfg.attack.eps);
        long max_count = 0;
        for (const auto& records : r.trajectories)
            max_count = std::max(max_count, count_subopt_steps(sets, records));
        const SuboptFn measured = [&](long, double, double) {
            return static_cast<double>(max_count);
        };
        PriorAttackParams params{m.noise_sigma,  cfg.num_learners, cfg.u2_p,
                                 m.gamma,        m.initial_dist,   cfg.total_steps, measured};
        const ObservationCounts counts = harvest_prior_counts(m, cfg, r.seed);
        const auto bound = attack_from_prior(counts, m, cfg.attack, params).bound;
        REQUIRE(bound.has_value());
        if (r.cost <= *bound) ++held;
    }
    CHECK(held >= 18); // >= 90% of seeds
}
