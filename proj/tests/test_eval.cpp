#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include <json.hpp>

#include "helpers.hpp"
#include "seqrej/eval.hpp"
#include "seqrej/serialization.hpp"

using namespace seqrej;
using namespace seqrej::testing;

namespace {

PolicyClass wind_class() {
    return PolicyClass({desk_always_r(), desk_r_except_20_l(), desk_always_l()});
}

SelectivePolicy wind_rule() {
    SelectivePolicy sel;
    sel.base = desk_always_r();
    sel.rule.base_id = 0;
    sel.rule.validator_ids = {0, 1};
    sel.rule.mode = StopMode::FirstDisagreement;
    return sel;
}

} // namespace

TEST_CASE("expert_variance") {
    // Deterministic expert: V = Q on-path, sigma^2 = 0.
    CHECK(expert_variance(desk_chain(), desk_always_r()) == doctest::Approx(0.0));
    // H = 1, uniform expert, costs (0, 1): E[(V-Q)^2] = 0.25.
    TabularMDP one;
    one.num_states = 1;
    one.num_actions = 2;
    one.horizon = 1;
    one.initial_dist = {1.0};
    one.costs = {0.0, 1.0};
    one.cost_cap = 1.0;
    one.validate();
    const Policy uniform = Policy::make_stochastic(1, 2, 1, {0.5, 0.5});
    CHECK(expert_variance(one, uniform) == doctest::Approx(0.25).epsilon(1e-12));
    // sigma^2 <= cost_cap^2 on random instances.
    Rng rng(19);
    for (int rep = 0; rep < 10; ++rep) {
        Rng r = rng.split("rep", rep);
        const TabularMDP mdp = random_mdp(3, 2, 3, r);
        const Policy pi = random_stochastic_policy(3, 2, 3, r);
        CHECK(expert_variance(mdp, pi) <= mdp.cost_cap * mdp.cost_cap + 1e-9);
    }
}

TEST_CASE("exact metrics: immediate-stop rule") {
    const PolicyClass pc({desk_always_r(), desk_always_l()});
    SelectivePolicy sel;
    sel.base = desk_always_r();
    sel.rule.base_id = 0;
    sel.rule.validator_ids = {1};  // disagrees everywhere: tau == 1
    sel.rule.mode = StopMode::FirstDisagreement;
    const MetricsReport r =
        exact_metrics(desk_chain(), desk_chain_windy(0.5), sel, desk_always_r(), pc);
    CHECK(r.alpha_M == doctest::Approx(1.0));
    CHECK(r.alpha_N == doctest::Approx(1.0));
    CHECK(r.stopped_regret_N == doctest::Approx(0.0));
    CHECK(r.switched_regret_N == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("exact metrics: DESK-CHAIN wind fixture, pinned") {
    const MetricsReport r = exact_metrics(desk_chain(), desk_chain_windy(0.5),
                                          wind_rule(), desk_always_r(), wind_class());
    // Recompute against the committed oracle fixture; 1e-9 drift fails the build.
    const nlohmann::json fixture = nlohmann::json::parse(
        read_file(std::string(SEQREJ_FIXTURE_DIR) + "/desk_wind_metrics.json"));
    CHECK(r.alpha_M == doctest::Approx(fixture["alpha_M"].get<double>()).epsilon(1e-9));
    CHECK(r.alpha_N == doctest::Approx(fixture["alpha_N"].get<double>()).epsilon(1e-9));
    CHECK(r.stopped_regret_N ==
          doctest::Approx(fixture["stopped_regret_N"].get<double>()).epsilon(1e-9));
    CHECK(r.switched_regret_N ==
          doctest::Approx(fixture["switched_regret_N"].get<double>()).epsilon(1e-9));
    CHECK(r.asymmetric_stopped_regret_N ==
          doctest::Approx(fixture["asymmetric_stopped_regret_N"].get<double>()).epsilon(1e-9));
    CHECK(r.stopped_hellinger_sq ==
          doctest::Approx(fixture["stopped_hellinger_sq"].get<double>()).epsilon(1e-9));
    CHECK(r.expert_variance ==
          doctest::Approx(fixture["expert_variance"].get<double>()).epsilon(1e-9));
    CHECK(r.learner_cost_N ==
          doctest::Approx(fixture["learner_cost_N"].get<double>()).epsilon(1e-9));
    CHECK(r.expert_cost_N ==
          doctest::Approx(fixture["expert_cost_N"].get<double>()).epsilon(1e-9));
    CHECK(r.switched_cost_N ==
          doctest::Approx(fixture["switched_cost_N"].get<double>()).epsilon(1e-9));
    CHECK(r.mean_handoff_time_N ==
          doctest::Approx(fixture["mean_handoff_time_N"].get<double>()).epsilon(1e-9));
    CHECK(r.state_tv_expert ==
          doctest::Approx(fixture["state_tv_expert"].get<double>()).epsilon(1e-9));
    CHECK(r.late_stop_risk_N ==
          doctest::Approx(fixture["late_stop_risk_N"].get<double>()).epsilon(1e-9));
    // Abstention transfer: alpha_N <= expert-side alpha_M + state TV + late-stop risk.
    CHECK(r.alpha_N <=
          r.expert_alpha_M + r.state_tv_expert + r.late_stop_risk_N + 1e-10);
}

TEST_CASE("stopped regret vanishes when N = M and the committee matches the expert") {
    const MetricsReport r = exact_metrics(desk_chain(), desk_chain(), wind_rule(),
                                          desk_always_r(), wind_class());
    CHECK(r.alpha_M == doctest::Approx(0.0));
    CHECK(r.stopped_regret_N == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("asymmetric stopped regret is bounded by switched regret") {
    Rng rng(37);
    for (int rep = 0; rep < 25; ++rep) {
        Rng r = rng.split("rep", rep);
        const int S = 3, A = 2, H = 3;
        const TabularMDP M = random_mdp(S, A, H, r);
        const TabularMDP N = random_mdp(S, A, H, r);
        std::vector<Policy> members;
        for (int i = 0; i < 4; ++i) members.push_back(random_deterministic_policy(S, A, H, r));
        const PolicyClass pc(members);
        SelectivePolicy sel;
        sel.base = pc[0];
        sel.rule.base_id = 0;
        sel.rule.validator_ids = {1, 2};
        sel.rule.mode = StopMode::FirstDisagreement;
        const MetricsReport m = exact_metrics(M, N, sel, pc[3], pc);
        CHECK(m.asymmetric_stopped_regret_N <= m.switched_regret_N + 1e-10);
        // Abstention-transfer decomposition for deterministic rules.
        CHECK(m.alpha_N <=
              m.expert_alpha_M + m.state_tv_expert + m.late_stop_risk_N + 1e-10);
    }
}

TEST_CASE("monte carlo agrees with exact within 3 CI half-widths") {
    const TabularMDP M = desk_chain();
    const TabularMDP N = desk_chain_windy(0.5);
    const MetricsReport exact =
        exact_metrics(M, N, wind_rule(), desk_always_r(), wind_class());
    const MetricsReport mc = monte_carlo_metrics(M, N, wind_rule(), desk_always_r(),
                                                 wind_class(), 4000, 77);
    REQUIRE(mc.ci.has_value());
    CHECK(std::abs(mc.alpha_M - exact.alpha_M) <= 3 * mc.ci->alpha_M + 1e-9);
    CHECK(std::abs(mc.alpha_N - exact.alpha_N) <= 3 * mc.ci->alpha_N + 1e-9);
    CHECK(std::abs(mc.stopped_regret_N - exact.stopped_regret_N) <=
          3 * mc.ci->stopped_regret_N + 1e-9);
    CHECK(std::abs(mc.switched_regret_N - exact.switched_regret_N) <=
          3 * mc.ci->switched_regret_N + 1e-9);
}

TEST_CASE("never-stop rule gives zero-variance alpha estimate") {
    const PolicyClass pc({desk_always_r()});
    SelectivePolicy sel;
    sel.base = desk_always_r();
    sel.rule.base_id = 0;
    sel.rule.validator_ids = {};
    sel.rule.mode = StopMode::FirstDisagreement;
    const MetricsReport mc = monte_carlo_metrics(desk_chain(), desk_chain_windy(0.3),
                                                 sel, desk_always_r(), pc, 500, 3);
    CHECK(mc.alpha_M == 0.0);
    CHECK(mc.ci->alpha_M == 0.0);
}

TEST_CASE("CI half-width shrinks like 1/sqrt(2) when rollouts double") {
    const TabularMDP M = desk_chain();
    const TabularMDP N = desk_chain_windy(0.5);
    const MetricsReport a = monte_carlo_metrics(M, N, wind_rule(), desk_always_r(),
                                                wind_class(), 4000, 5);
    const MetricsReport b = monte_carlo_metrics(M, N, wind_rule(), desk_always_r(),
                                                wind_class(), 8000, 5);
    const double ratio = b.ci->alpha_N / a.ci->alpha_N;
    CHECK(ratio == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(0.2));
}

TEST_CASE("monte carlo metrics are reproducible across calls") {
    const MetricsReport a = monte_carlo_metrics(desk_chain(), desk_chain_windy(0.5),
                                                wind_rule(), desk_always_r(),
                                                wind_class(), 1000, 42);
    const MetricsReport b = monte_carlo_metrics(desk_chain(), desk_chain_windy(0.5),
                                                wind_rule(), desk_always_r(),
                                                wind_class(), 1000, 42);
    CHECK(a.alpha_N == b.alpha_N);
    CHECK(a.switched_regret_N == b.switched_regret_N);
}
