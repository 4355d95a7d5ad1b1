#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "helpers.hpp"
#include "seqrej/scenarios.hpp"
#include "seqrej/seqrejectron.hpp"

using namespace seqrej;
using namespace seqrej::testing;

namespace {

SampledData chain_data(const ScenarioBundle& bundle, int m, int n, std::uint64_t seed) {
    return sample_datasets(bundle, m, n, seed);
}

} // namespace

TEST_CASE("ensemble size arithmetic: delta = 0.625 gives k = 3") {
    WindyChainParams params;
    params.deterministic_class = true;
    params.length = 3;
    params.horizon = 3;
    params.wind = 0.5;
    params.class_size = 6;
    const ScenarioBundle bundle = make_windy_chain(params, 7);
    const SampledData data = chain_data(bundle, 10, 10, 3);
    NoRegretConfig cfg;
    cfg.rng_seed = 5;
    const FitReport report =
        fit_deterministic(bundle.pc, data.train, data.test, 0.4, 0.1, 0.625, cfg);
    CHECK(report.ensemble_draws == 3);
    CHECK(report.committee_total <= 3 * 5);  // k * ceil(2/eta)
}

TEST_CASE("fit_deterministic: singleton class never stops on expert data") {
    const PolicyClass pc(std::vector<Policy>{desk_always_r()});
    Dataset train = {{{0, 1}, {1, 1}}};
    Dataset test = {{{0, 1}, {}}};
    NoRegretConfig cfg;
    cfg.rng_seed = 1;
    const FitReport report = fit_deterministic(pc, train, test, 0.5, 0.1, 0.2, cfg);
    CHECK(report.selective.rule.validator_ids == std::vector<int>{0});
    CHECK(stop_time(report.selective.rule, pc, std::vector<int>{0, 1}) == 3);
}

TEST_CASE("fit_deterministic: realizable never-stop on training support") {
    // All committee members are training-consistent with the base, so tau is
    // H+1 on every training trajectory.
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        WindyChainParams params;
        params.deterministic_class = true;
        params.length = 4;
        params.horizon = 5;
        params.wind = 0.4;
        params.slip = 0.2;
        params.class_size = 16;
        const ScenarioBundle bundle = make_windy_chain(params, seed);
        const SampledData data = chain_data(bundle, 30, 30, seed + 100);
        NoRegretConfig cfg;
        cfg.rng_seed = seed;
        const FitReport report =
            fit_deterministic(bundle.pc, data.train, data.test, 0.4, 0.1, 0.2, cfg);
        for (const Trajectory& t : data.train) {
            CHECK(stop_time(report.selective.rule, bundle.pc,
                            std::span<const int>(t.states.data(), t.states.size())) ==
                  bundle.M.horizon + 1);
        }
        CHECK(report.committee_total <=
              report.ensemble_draws * static_cast<int>(std::ceil(2.0 / 0.4)));
    }
}

TEST_CASE("fit_deterministic rejects unrealizable data") {
    const PolicyClass pc({desk_always_r(), desk_always_l()});
    Dataset train = {{{0, 0}, {0, 1}}};  // L then R at state 0: no member matches
    Dataset test = {{{0, 1}, {}}};
    NoRegretConfig cfg;
    CHECK_THROWS_AS(fit_deterministic(pc, train, test, 0.5, 0.1, 0.2, cfg),
                    RealizabilityError);
}

TEST_CASE("fit_stochastic: one-hot class matches deterministic behavior") {
    WindyChainParams params;
    params.deterministic_class = true;
    params.length = 4;
    params.horizon = 4;
    params.wind = 0.4;
    params.class_size = 8;
    const ScenarioBundle bundle = make_windy_chain(params, 3);
    const SampledData data = chain_data(bundle, 20, 20, 11);

    std::vector<Policy> onehot;
    for (const Policy& p : bundle.pc.policies) onehot.push_back(p.to_stochastic());
    const PolicyClass pc_soft(onehot);

    NoRegretConfig cfg;
    cfg.rng_seed = 9;
    const FitReport report =
        fit_stochastic(pc_soft, data.train, data.test, 0.5, 0.25, 0.5, 0.0, cfg);
    // gamma = 0: version space is exactly the loss minimizers; with one-hot
    // rows those are the training-consistent policies, so the rule never stops
    // on training trajectories.
    for (const Trajectory& t : data.train) {
        CHECK(stop_time(report.selective.rule, pc_soft,
                        std::span<const int>(t.states.data(), t.states.size())) ==
              bundle.M.horizon + 1);
    }
    CHECK(report.selective.rule.mode == StopMode::HellingerBudget);
    CHECK(report.committee_total <= report.k_ens);
}

TEST_CASE("fit_stochastic: gamma = 0 with unique MLE never stops") {
    // Unique MLE: tighter fit wins; version space = {MLE}; committee = {MLE}.
    const Policy sharp = Policy::make_stochastic(2, 2, 2, {0.05, 0.95, 0.05, 0.95, 0.05, 0.95, 0.05, 0.95});
    const Policy loose = Policy::make_stochastic(2, 2, 2, {0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5});
    const PolicyClass pc({sharp, loose});
    Dataset train;
    for (int i = 0; i < 10; ++i) train.push_back({{0, 1}, {1, 1}});
    Dataset test = {{{0, 1}, {}}, {{0, 0}, {}}};
    NoRegretConfig cfg;
    cfg.rng_seed = 2;
    const FitReport report = fit_stochastic(pc, train, test, 0.5, 0.25, 0.5, 0.0, cfg);
    CHECK(report.selective.rule.base_id == 0);
    CHECK(report.selective.rule.validator_ids == std::vector<int>{0});
    CHECK(stop_time(report.selective.rule, pc, std::vector<int>{0, 1}) == 3);
}

TEST_CASE("fit_misspecified: K validators from a single draw") {
    WindyChainParams params;
    params.deterministic_class = true;
    params.length = 4;
    params.horizon = 4;
    params.wind = 0.4;
    params.class_size = 8;
    const ScenarioBundle bundle = make_windy_chain(params, 5);
    ScenarioBundle corrupted = bundle;
    corrupted.corruption = 0.05;
    const SampledData data = chain_data(corrupted, 40, 40, 17);
    NoRegretConfig cfg;
    cfg.rng_seed = 23;
    cfg.rounds = 3000;
    const FitReport report =
        fit_misspecified(bundle.pc, data.train, data.test, 4.0, 4, cfg);
    CHECK(report.committee_total == 4);
    CHECK(report.selective.rule.validator_ids.size() == 4);
    CHECK(report.ensemble_draws == 1);
    const double slack = report.distribution.realized_regret / report.distribution.rounds + 0.02;
    double d_base = empirical_disagreement_rate(report.selective.rule.base_id,
                                                data.train, bundle.pc);
    CHECK(report.distribution.reg_completeness <= 4 * d_base + 1.0 / 4.0 + slack);
    CHECK(report.distribution.reg_soundness_sup <= 1.0 / 4.0 + slack);
    CHECK_THROWS_AS(fit_misspecified(bundle.pc, data.train, data.test, 0.0, 4, cfg),
                    ConfigError);
    CHECK_THROWS_AS(fit_misspecified(bundle.pc, data.train, data.test, 4.0, 0, cfg),
                    ConfigError);
    // K = 1 single-validator committee.
    const FitReport one = fit_misspecified(bundle.pc, data.train, data.test, 4.0, 1, cfg);
    CHECK(one.selective.rule.validator_ids.size() == 1);
}

TEST_CASE("fit_per_step coincides with fit_deterministic at H = 1") {
    Rng rng(41);
    const int S = 5, A = 2, H = 1;
    std::vector<Policy> members;
    const Policy anchor = random_deterministic_policy(S, A, H, rng);
    members.push_back(anchor);
    for (int i = 1; i < 8; ++i) {
        std::vector<int> table = anchor.actions;
        for (int& a : table)
            if (rng.next_unit() < 0.4) a = static_cast<int>(rng.next_below(A));
        members.push_back(Policy::make_deterministic(S, A, H, std::move(table)));
    }
    const PolicyClass pc(members);
    TabularMDP env;
    env.num_states = S;
    env.num_actions = A;
    env.horizon = 1;
    env.initial_dist.assign(S, 1.0 / S);
    env.costs.assign(S * A, 0.0);
    env.cost_cap = 1.0;
    env.validate();
    Dataset train, test;
    Rng data_rng = rng.split("data", 0);
    for (int i = 0; i < 15; ++i)
        train.push_back(sample_trajectory(env, pc[0], data_rng));
    for (int j = 0; j < 25; ++j) {
        Trajectory t = sample_trajectory(env, pc[0], data_rng);
        t.actions.clear();
        test.push_back(std::move(t));
    }
    NoRegretConfig cfg;
    cfg.rng_seed = 77;
    const double eta = 0.68, rho = 0.34;
    const FitReport det = fit_deterministic(pc, train, test, eta, 0.1, 0.2, cfg);
    const FitReport ps = fit_per_step(pc, train, test, rho, 0.1, 0.2, cfg);
    CHECK(ps.selective.rule.per_step_base_ids[0] == det.selective.rule.base_id);
    CHECK(ps.selective.rule.per_step_committees[0] == det.selective.rule.validator_ids);
    // Identical stop times on every test trajectory.
    for (const Trajectory& t : test) {
        const std::span<const int> states(t.states.data(), t.states.size());
        CHECK(stop_time(ps.selective.rule, pc, states) ==
              stop_time(det.selective.rule, pc, states));
    }
}

TEST_CASE("off-policy bundle drives the misspecified fit end to end") {
    RandomTabularParams params;
    params.class_size = 8;
    params.off_policy = true;
    const ScenarioBundle bundle = make_random_tabular(params, 77);
    const SampledData data = sample_datasets(bundle, 40, 40, 19);
    const int k = recommended_k_lambda(bundle.delta_off, bundle.pc.size(), 40, 40, 0.25);
    CHECK(k >= 1);
    NoRegretConfig cfg;
    cfg.rng_seed = 5;
    cfg.rounds = 2000;
    const FitReport fit = fit_misspecified(bundle.pc, data.train, data.test,
                                           static_cast<double>(k), k, cfg);
    CHECK(fit.committee_total == k);
    const double slack = fit.distribution.realized_regret / fit.distribution.rounds + 0.05;
    CHECK(fit.distribution.reg_soundness_sup <= 1.0 / k + slack);
    // delta_off = 0 collapses the recipe to the eps*-only rate.
    const int k0 = recommended_k_lambda(0.0, 8, 40, 40, 0.25);
    CHECK(k0 >= k);
}

TEST_CASE("fit_deterministic with the FTPL engine behind the same interface") {
    WindyChainParams params;
    params.deterministic_class = true;
    params.length = 4;
    params.horizon = 5;
    params.wind = 0.4;
    params.slip = 0.2;
    params.class_size = 12;
    const ScenarioBundle bundle = make_windy_chain(params, 6);
    const SampledData data = chain_data(bundle, 25, 25, 60);
    NoRegretConfig cfg;
    cfg.rng_seed = 19;
    cfg.rounds = 300;
    const FitReport report = fit_deterministic(bundle.pc, data.train, data.test, 0.4,
                                               0.1, 0.2, cfg, GameEngine::Ftpl);
    CHECK(report.selective.rule.mode == StopMode::FirstDisagreement);
    CHECK(report.committee_total >= 1);
    // Never stops on its own training support, same as the Hedge engine.
    for (const Trajectory& t : data.train) {
        CHECK(stop_time(report.selective.rule, bundle.pc,
                        std::span<const int>(t.states.data(), t.states.size())) ==
              bundle.M.horizon + 1);
    }
}

TEST_CASE("fit determinism: same seed, same report") {
    WindyChainParams params;
    params.deterministic_class = true;
    params.length = 4;
    params.horizon = 5;
    params.wind = 0.4;
    params.class_size = 12;
    const ScenarioBundle bundle = make_windy_chain(params, 8);
    const SampledData data = chain_data(bundle, 25, 25, 90);
    NoRegretConfig cfg;
    cfg.rng_seed = 1234;
    const FitReport a = fit_deterministic(bundle.pc, data.train, data.test, 0.4, 0.1, 0.2, cfg);
    const FitReport b = fit_deterministic(bundle.pc, data.train, data.test, 0.4, 0.1, 0.2, cfg);
    CHECK(a.selective.rule.validator_ids == b.selective.rule.validator_ids);
    CHECK(a.distribution.coverage_sup == b.distribution.coverage_sup);
}
