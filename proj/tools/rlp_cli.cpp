#include "rlp/harness.hpp"
#include "rlp/mdp_io.hpp"
#include "rlp/prior.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>

namespace {

void print_table(const rlp::RewardTable& table, const char* row_label) {
    std::printf("%-8s", "");
    for (std::size_t a = 0; a < table[0].size(); ++a) std::printf("%12s%zu", "a", a);
    std::printf("\n");
    for (std::size_t s = 0; s < table.size(); ++s) {
        std::printf("%s%-7zu", row_label, s);
        for (double v : table[s]) std::printf("%13.6g", v);
        std::printf("\n");
    }
}

int cmd_validate(const std::string& mdp_path) {
    const rlp::TabularMdp m = rlp::load_mdp(mdp_path);
    std::printf("%s: OK (%d states, %d actions, gamma %.4g, horizon %d, sigma %.4g)\n",
                mdp_path.c_str(), m.num_states, m.num_actions, m.gamma, m.horizon,
                m.noise_sigma);
    if (m.noise_sigma <= 1.0)
        std::printf("note: noise_sigma <= 1; the cost analysis assumes sigma > 1\n");
    return 0;
}

int cmd_delta_star(const std::string& config_path) {
    const rlp::ExperimentConfig cfg = rlp::load_experiment_config(config_path);
    const rlp::TabularMdp m = rlp::load_mdp(cfg.mdp_path);
    const rlp::Perturbation delta = rlp::delta_star(m, cfg.attack);
    std::printf("delta* for target policy:\n");
    print_table(delta.delta, "s");
    std::printf("sup norm: %.10g\n", delta.sup_norm());
    return 0;
}

int cmd_run(const std::string& config_path, std::optional<std::uint64_t> seed,
            const std::string& out_dir, int jobs) {
    rlp::ExperimentConfig cfg = rlp::load_experiment_config(config_path);
    if (seed) cfg.seeds = {*seed};
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    const rlp::ExperimentSummary summary = rlp::run_experiment(cfg, jobs);
    std::printf("attacker %-9s learner %-11s T=%ld L=%d seeds=%zu\n", cfg.attacker.c_str(),
                cfg.learner.c_str(), cfg.total_steps, cfg.num_learners, cfg.seeds.size());
    std::printf("mean cost %.6g (std %.6g), final-quarter target match %.3f\n",
                summary.mean_cost, summary.std_cost, summary.mean_final_quarter_match);
    for (const auto& r : summary.seeds)
        std::printf("  seed %llu: cost %.6g, match %.3f, phase %s, k1=%d\n",
                    static_cast<unsigned long long>(r.seed), r.cost, r.match_rate,
                    r.final_phase.c_str(), r.exploration_learners);
    if (!cfg.out_dir.empty()) std::printf("outputs written to %s\n", cfg.out_dir.c_str());
    return 0;
}

int cmd_prior_attack(const std::string& counts_path, const std::string& mdp_path,
                     const std::string& config_path, const std::string& out_path) {
    const rlp::ExperimentConfig cfg = rlp::load_experiment_config(config_path);
    std::ifstream in(counts_path);
    if (!in) throw std::invalid_argument("cannot open counts file: " + counts_path);
    nlohmann::json j = nlohmann::json::parse(in);
    const rlp::ObservationCounts counts =
        rlp::counts_from_json(j.contains("counts") ? j.at("counts") : j);

    std::optional<rlp::TabularMdp> m_true;
    if (!mdp_path.empty()) m_true = rlp::load_mdp(mdp_path);
    const rlp::TabularMdp planning = rlp::load_mdp(cfg.mdp_path);

    rlp::PriorAttackParams params{cfg.attacker_sigma(planning), cfg.num_learners,
                                  cfg.u2_p,                     planning.gamma,
                                  planning.initial_dist,        cfg.total_steps,
                                  {}};
    const rlp::PriorDataReport report =
        rlp::attack_from_prior(counts, m_true, cfg.attack, params);

    std::printf("delta-hat from prior data (n_min = %ld):\n", counts.min_count());
    print_table(report.delta.delta, "s");
    std::printf("sup norm: %.10g\n", report.delta.sup_norm());
    std::printf("e_Q = %.6g%s, e_mu = %.6g\n", report.e_q,
                report.used_empirical_range ? " (empirical reward range; pass --mdp for the true one)"
                                            : "",
                report.e_mu);
    if (report.e_table) {
        std::printf("error table e(s,a):\n");
        print_table(*report.e_table, "s");
    }
    if (!out_path.empty()) {
        nlohmann::json out{{"delta", report.delta.delta},
                           {"e_q", report.e_q},
                           {"e_mu", report.e_mu},
                           {"used_empirical_range", report.used_empirical_range}};
        if (report.e_table) out["e_table"] = *report.e_table;
        std::ofstream(out_path) << out.dump(2) << "\n";
        std::printf("report written to %s\n", out_path.c_str());
    }
    return 0;
}

int cmd_compare(const std::string& config_path, const std::string& out_path, int jobs) {
    const rlp::ExperimentConfig cfg = rlp::load_experiment_config(config_path);
    const auto table = rlp::compare_attacks(cfg, jobs);
    std::printf("# bounds use measured suboptimal-step counts (empirical calibration)\n");
    std::printf("%-10s %14s %14s %14s\n", "attacker", "mean_cost", "std_cost", "mean_bound");
    for (const auto& row : table)
        std::printf("%-10s %14.6g %14.6g %14.6g\n", row.attacker.c_str(), row.mean_cost,
                    row.std_cost, row.mean_bound);
    if (!out_path.empty()) {
        std::ofstream out(out_path);
        out << "# bounds use measured suboptimal-step counts (empirical calibration)\n";
        out << "attacker,mean_cost,std_cost,mean_bound\n";
        for (const auto& row : table)
            out << row.attacker << ',' << rlp::fmt_double(row.mean_cost) << ','
                << rlp::fmt_double(row.std_cost) << ',' << rlp::fmt_double(row.mean_bound)
                << "\n";
        std::printf("table written to %s\n", out_path.c_str());
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"reward-poisoning laboratory for tabular no-regret learners"};
    app.require_subcommand(1);

    std::string config_path, out_dir, mdp_path, counts_path;
    std::optional<std::uint64_t> seed;
    int jobs = 1;

    auto* run = app.add_subcommand("run", "run an experiment from a config file");
    run->add_option("--config", config_path, "experiment config (json)")->required();
    run->add_option("--seed", seed, "run a single seed instead of the config's list");
    run->add_option("--out", out_dir, "output directory");
    run->add_option("--jobs", jobs, "parallel seed workers");

    auto* dstar = app.add_subcommand("delta-star", "print the closed-form perturbation");
    dstar->add_option("--config", config_path, "experiment config (json)")->required();

    auto* prior = app.add_subcommand("prior-attack", "build the attack from logged counts");
    prior->add_option("--counts", counts_path, "observation counts snapshot (json)")->required();
    prior->add_option("--mdp", mdp_path, "true MDP for the error analysis (optional)");
    prior->add_option("--config", config_path, "experiment config (json)")->required();
    prior->add_option("--out", out_dir, "report output path (json)");

    auto* compare = app.add_subcommand("compare", "compare attackers on a shared config");
    compare->add_option("--config", config_path, "experiment config (json)")->required();
    compare->add_option("--out", out_dir, "table output path (csv)");
    compare->add_option("--jobs", jobs, "parallel seed workers");

    auto* validate = app.add_subcommand("validate", "validate an MDP file");
    validate->add_option("mdp", mdp_path, "MDP file (json)")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (*run) return cmd_run(config_path, seed, out_dir, jobs);
        if (*dstar) return cmd_delta_star(config_path);
        if (*prior) return cmd_prior_attack(counts_path, mdp_path, config_path, out_dir);
        if (*compare) return cmd_compare(config_path, out_dir, jobs);
        if (*validate) return cmd_validate(mdp_path);
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
