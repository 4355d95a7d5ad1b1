#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "helpers.hpp"
#include "seqrej/validator_game.hpp"

using namespace seqrej;
using namespace seqrej::testing;

namespace {

PolicyClass desk_class() {
    return PolicyClass({desk_always_r(), desk_always_l(), desk_r_then_l()});
}

Dataset expert_trajectories(int count) {
    Dataset data;
    for (int i = 0; i < count; ++i) data.push_back({{0, 1}, {1, 1}});
    return data;
}

} // namespace

TEST_CASE("exact_version_space") {
    const PolicyClass pc = desk_class();
    // Empty data keeps the whole class.
    CHECK(exact_version_space(pc, {}).member_ids == std::vector<int>{0, 1, 2});
    // One expert trajectory pins both visited cells.
    CHECK(exact_version_space(pc, expert_trajectories(1)).member_ids ==
          std::vector<int>{0});
    const PolicyClass only_expert(std::vector<Policy>{desk_always_r()});
    CHECK(exact_version_space(only_expert, expert_trajectories(2)).member_ids ==
          std::vector<int>{0});
    // Inconsistent data (no policy plays L at s=0 then R at s=0).
    const Dataset weird = {{{0, 0}, {0, 1}}};
    CHECK_THROWS_AS(exact_version_space(pc, weird), RealizabilityError);
}

TEST_CASE("mle_policy selects the best fit with smallest-id ties") {
    const Policy b09 = Policy::make_stochastic(2, 2, 2, {0.1, 0.9, 0.1, 0.9, 0.1, 0.9, 0.1, 0.9});
    const Policy b05 = Policy::make_stochastic(2, 2, 2, {0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5});
    CHECK(mle_policy(PolicyClass({b09, b05}), expert_trajectories(10)) == 0);
    CHECK(mle_policy(PolicyClass({b05, b09}), expert_trajectories(10)) == 1);
    // Identical policies tie toward the smaller id.
    CHECK(mle_policy(PolicyClass({b05, b05}), expert_trajectories(3)) == 0);
    // Perfect fit wins.
    const Policy perfect = Policy::make_stochastic(2, 2, 2, {0, 1, 0, 1, 0, 1, 0, 1});
    CHECK(mle_policy(PolicyClass({b09, perfect}), expert_trajectories(5)) == 1);
    // All-infinite losses error out.
    const Policy wrong = Policy::make_stochastic(2, 2, 2, {1, 0, 1, 0, 1, 0, 1, 0});
    CHECK_THROWS_AS(mle_policy(PolicyClass(std::vector<Policy>{wrong}),
                               expert_trajectories(1)),
                    NoSupportError);
}

TEST_CASE("logloss_version_space radius arithmetic") {
    const Policy b09 = Policy::make_stochastic(2, 2, 2, {0.1, 0.9, 0.1, 0.9, 0.1, 0.9, 0.1, 0.9});
    const Policy b05 = Policy::make_stochastic(2, 2, 2, {0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5});
    const PolicyClass pc({b09, b05});
    const Dataset data = expert_trajectories(10);
    // Loss gap is 2 log 2 - 2 (-log 0.9) ~ 1.17557.
    const double gap = 2.0 * std::log(2.0) + 2.0 * std::log(0.9);
    CHECK(logloss_version_space(pc, data, gap - 0.01).member_ids == std::vector<int>{0});
    CHECK(logloss_version_space(pc, data, gap + 0.01).member_ids ==
          std::vector<int>{0, 1});
    // gamma = 0 keeps exactly the minimizers.
    CHECK(logloss_version_space(pc, data, 0.0).member_ids == std::vector<int>{0});
    // Infinite-loss members stay excluded even at the infinite radius.
    const Policy wrong = Policy::make_stochastic(2, 2, 2, {1, 0, 1, 0, 1, 0, 1, 0});
    const PolicyClass with_wrong({b09, b05, wrong});
    CHECK(logloss_version_space(with_wrong, data,
                                std::numeric_limits<double>::infinity())
              .member_ids == std::vector<int>{0, 1});
}

TEST_CASE("late_stop_fraction examples") {
    const PolicyClass pc = desk_class();
    const Dataset test = {{{0, 1}, {}}};
    // Comparator in the committee can never be strictly later.
    CHECK(late_stop_fraction(0, std::vector<int>{1, 2}, 1, test,
                             StopMode::FirstDisagreement, 0.0, pc) == 0.0);
    // Comparator = base never deviates.
    CHECK(late_stop_fraction(0, std::vector<int>{1}, 0, test,
                             StopMode::FirstDisagreement, 0.0, pc) == 0.0);
    // Committee {base} never stops; always-L deviates at step 1.
    CHECK(late_stop_fraction(0, std::vector<int>{0}, 1, test,
                             StopMode::FirstDisagreement, 0.0, pc) == 1.0);
}

TEST_CASE("empirical_disagreement_rate") {
    const PolicyClass pc = desk_class();
    const Dataset train = expert_trajectories(4);
    CHECK(empirical_disagreement_rate(0, train, pc) == 0.0);
    CHECK(empirical_disagreement_rate(1, train, pc) == 1.0);  // differs at s=0 step 1
    CHECK(empirical_disagreement_rate(2, train, pc) == 1.0);  // differs at s=1 step 2
}

namespace {

// Random deterministic game instance: DESK-scale class with clones of a base
// policy flipped off the data support, so stop-time vectors vary.
struct GameInstance {
    PolicyClass pc;
    VersionSpace space;
    int base_id = 0;
    Dataset test;
};

GameInstance random_game_instance(std::uint64_t seed, int class_size, int n) {
    Rng rng = Rng(seed).split("game-instance", 0);
    const int S = 3, A = 2, H = 3;
    std::vector<Policy> members;
    const Policy anchor = random_deterministic_policy(S, A, H, rng);
    members.push_back(anchor);
    for (int i = 1; i < class_size; ++i) {
        std::vector<int> table = anchor.actions;
        for (int& a : table)
            if (rng.next_unit() < 0.3) a = static_cast<int>(rng.next_below(A));
        members.push_back(Policy::make_deterministic(S, A, H, std::move(table)));
    }
    GameInstance inst{PolicyClass(std::move(members)), {}, 0, {}};
    for (int id = 0; id < inst.pc.size(); ++id) inst.space.member_ids.push_back(id);
    for (int j = 0; j < n; ++j) {
        Trajectory t;
        for (int h = 0; h < H; ++h) t.states.push_back(static_cast<int>(rng.next_below(S)));
        inst.test.push_back(std::move(t));
    }
    return inst;
}

} // namespace

TEST_CASE("sparse_validator_dist degenerate cases") {
    const PolicyClass pc = desk_class();
    NoRegretConfig cfg;
    cfg.rng_seed = 1;
    // Single-member space: every committee is {base}; certificate 0.
    VersionSpace solo;
    solo.member_ids = {0};
    const Dataset test = {{{0, 1}, {}}, {{0, 0}, {}}};
    const ValidatorDistribution d1 = sparse_validator_dist(
        solo, 0, test, 0.34, 0.1, 0.1, StopMode::FirstDisagreement, 0.0, pc, cfg);
    CHECK(d1.coverage_sup == 0.0);
    REQUIRE(d1.atoms.size() == 1);
    CHECK(d1.atoms[0].ids == std::vector<int>{0, 0, 0});
    // All policies with identical stop times: base itself never stops and
    // neither does anyone else on this test set (states where all agree).
    VersionSpace pair;
    pair.member_ids = {0, 2};
    const Dataset agree = {{{1, 1}, {}}};  // R-then-L agrees with always-R at s=1? no: h=2 differs
    const Dataset agree2 = {{{1, 0}, {}}};
    // Use trajectories visiting only s=1 at h=1 where all three agree and s=0 at h=2
    // for policy 2 only; pick states where 0 and 2 agree everywhere: s=1 at h=2 deviates.
    // Simpler: committee coverage certificate is still bounded by rho + xi.
    const ValidatorDistribution d2 = sparse_validator_dist(
        pair, 0, agree2, 0.34, 0.1, 0.1, StopMode::FirstDisagreement, 0.0, pc, cfg);
    CHECK(d2.coverage_sup <= 0.34 + 0.1 + 1e-12);
    CHECK_THROWS_AS(sparse_validator_dist(pair, 1, agree, 0.34, 0.1, 0.1,
                                          StopMode::FirstDisagreement, 0.0, pc, cfg),
                    ConfigError);
}

TEST_CASE("sparse_validator_dist on a random instance meets rho + xi") {
    const GameInstance inst = random_game_instance(99, 8, 50);
    NoRegretConfig cfg;
    cfg.rng_seed = 7;
    const ValidatorDistribution dist =
        sparse_validator_dist(inst.space, inst.base_id, inst.test, 0.34, 0.1, 0.1,
                              StopMode::FirstDisagreement, 0.0, inst.pc, cfg);
    // K = ceil(1/0.34) = 3 members per atom, weights normalized.
    double mass = 0.0;
    for (const ValidatorAtom& atom : dist.atoms) {
        CHECK(atom.ids.size() == 3);
        mass += atom.weight;
    }
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(dist.coverage_sup <= 0.34 + 0.1 + 1e-12);
    // Hedge regret certificate, exact assertion on the recorded run.
    CHECK(dist.realized_regret <=
          std::sqrt(2.0 * dist.rounds * std::log(inst.space.member_ids.size())) + 1e-9);
}

TEST_CASE("hedge regret certificate across seeds") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const GameInstance inst = random_game_instance(seed, 12, 30);
        NoRegretConfig cfg;
        cfg.rng_seed = seed;
        cfg.rounds = 500;
        const ValidatorDistribution dist =
            sparse_validator_dist(inst.space, inst.base_id, inst.test, 0.4, 0.1, 0.1,
                                  StopMode::FirstDisagreement, 0.0, inst.pc, cfg);
        CHECK(dist.realized_regret <= std::sqrt(2.0 * 500 * std::log(12.0)) + 1e-9);
    }
}

TEST_CASE("exchangeability bound, exact and monte carlo") {
    // For p over stop-time vectors and K i.i.d. committee draws, the expected
    // late-stop fraction against an independent p-draw is <= 1/(K+1).
    Rng rng(55);
    for (int rep = 0; rep < 20; ++rep) {
        Rng r = rng.split("rep", rep);
        const int support = 2 + static_cast<int>(r.next_below(4));
        const int n = 6;
        const int H = 4;
        std::vector<std::vector<int>> vectors(support, std::vector<int>(n));
        for (auto& v : vectors)
            for (int& tau : v) tau = 1 + static_cast<int>(r.next_below(H + 1));
        std::vector<double> p = random_row(support, r);

        for (int K : {1, 2, 3, 5}) {
            // Exact: per coordinate, sum over challenger values.
            double exact = 0.0;
            for (int j = 0; j < n; ++j) {
                for (int ci = 0; ci < support; ++ci) {
                    double later = 0.0;  // Pr_{v ~ p}[v_j > challenger_j]
                    for (int vi = 0; vi < support; ++vi)
                        if (vectors[vi][j] > vectors[ci][j]) later += p[vi];
                    exact += p[ci] * std::pow(later, K) / n;
                }
            }
            CHECK(exact <= 1.0 / (K + 1) + 1e-12);

            // Monte Carlo within 3 standard errors of the exact value.
            Rng mc = r.split("mc", K);
            const int draws = 10000;
            double sum = 0.0, sum_sq = 0.0;
            for (int d = 0; d < draws; ++d) {
                const int challenger = mc.next_categorical(p);
                std::vector<int> committee(K);
                for (int k = 0; k < K; ++k) committee[k] = mc.next_categorical(p);
                int late_count = 0;
                for (int j = 0; j < n; ++j) {
                    int tau = H + 2;
                    for (int k = 0; k < K; ++k) tau = std::min(tau, vectors[committee[k]][j]);
                    if (tau > vectors[challenger][j]) ++late_count;
                }
                const double x = static_cast<double>(late_count) / n;
                sum += x;
                sum_sq += x * x;
            }
            const double mean = sum / draws;
            const double var = std::max(0.0, (sum_sq - draws * mean * mean) / (draws - 1));
            const double se = std::sqrt(var / draws);
            CHECK(std::abs(mean - exact) <= 3.0 * se + 1e-9);
            CHECK(mean <= 1.0 / (K + 1) + 3.0 * se + 1e-9);
        }
    }
}

TEST_CASE("regularized_validator_dist certificates") {
    const GameInstance inst = random_game_instance(3, 8, 40);
    // Corrupt a slice of the labels so the instance is genuinely misspecified.
    Dataset train;
    Rng rng = Rng(4).split("train", 0);
    const TabularMDP mdp = random_mdp(3, 2, 3, rng);
    for (int i = 0; i < 40; ++i) {
        Trajectory t = sample_trajectory(mdp, inst.pc[0], rng);
        for (int& a : t.actions)
            if (rng.next_unit() < 0.05) a = 1 - a;
        train.push_back(std::move(t));
    }
    std::vector<double> d_hat(inst.pc.size());
    int base = 0;
    for (int id = 0; id < inst.pc.size(); ++id) {
        d_hat[id] = empirical_disagreement_rate(id, train, inst.pc);
        if (d_hat[id] < d_hat[base]) base = id;
    }
    NoRegretConfig cfg;
    cfg.rng_seed = 21;
    cfg.rounds = 20000;
    const double lambda = 3.0;
    const int K = 3;
    const ValidatorDistribution dist =
        regularized_validator_dist(inst.pc, base, train, inst.test, lambda, K, cfg);
    for (const ValidatorAtom& atom : dist.atoms) CHECK(atom.ids.size() == K);
    const double slack = dist.realized_regret / dist.rounds + 0.02;
    CHECK(dist.reg_completeness <= K * d_hat[base] + 1.0 / lambda + slack);
    CHECK(dist.reg_soundness_sup <= 1.0 / K + slack);
    // Wrong base is rejected.
    const int wrong = base == 0 ? 1 : 0;
    CHECK_THROWS_AS(
        regularized_validator_dist(inst.pc, wrong, train, inst.test, lambda, K, cfg),
        ConfigError);
}

TEST_CASE("regularized game at vanishing Lambda matches the plain game") {
    const GameInstance inst = random_game_instance(8, 8, 30);
    Dataset train;
    Rng rng = Rng(9).split("train", 0);
    const TabularMDP mdp = random_mdp(3, 2, 3, rng);
    for (int i = 0; i < 20; ++i)
        train.push_back(sample_trajectory(mdp, inst.pc[0], rng));
    NoRegretConfig cfg;
    cfg.rng_seed = 31;
    cfg.rounds = 800;
    const ValidatorDistribution reg = regularized_validator_dist(
        inst.pc, /*base=*/0, train, inst.test, /*lambda=*/1e-9, /*K=*/3, cfg);
    const StopTimeTable table =
        build_stop_time_table(inst.pc, inst.pc[0], inst.space.member_ids, inst.test,
                              StopMode::FirstDisagreement, 0.0);
    const ValidatorDistribution plain =
        sparse_validator_dist_from_table(table, 0.34, 0.1, 0.1, cfg);
    REQUIRE(reg.atoms.size() == plain.atoms.size());
    for (std::size_t i = 0; i < reg.atoms.size(); ++i) {
        CHECK(reg.atoms[i].ids == plain.atoms[i].ids);
        CHECK(reg.atoms[i].weight == doctest::Approx(plain.atoms[i].weight));
    }
}

TEST_CASE("realizable regularized game with large Lambda keeps committees clean") {
    const GameInstance inst = random_game_instance(12, 8, 30);
    Dataset train;
    Rng rng = Rng(13).split("train", 0);
    const TabularMDP mdp = random_mdp(3, 2, 3, rng);
    for (int i = 0; i < 25; ++i)
        train.push_back(sample_trajectory(mdp, inst.pc[0], rng));
    REQUIRE(empirical_disagreement_rate(0, train, inst.pc) == 0.0);
    NoRegretConfig cfg;
    cfg.rng_seed = 17;
    cfg.rounds = 5000;
    const double lambda = 10.0;
    const ValidatorDistribution dist =
        regularized_validator_dist(inst.pc, 0, train, inst.test, lambda, 3, cfg);
    const double slack = dist.realized_regret / dist.rounds + 0.02;
    CHECK(dist.reg_completeness <= 1.0 / lambda + slack);
}

TEST_CASE("per-step selectors: empty committees never abstain; step spaces") {
    const PolicyClass pc = desk_class();
    const Dataset train = expert_trajectories(2);
    CHECK(step_version_space(pc, train, 0) == std::vector<int>{0, 2});
    CHECK(step_version_space(pc, train, 1) == std::vector<int>{0});
    StoppingRule empty;
    empty.mode = StopMode::PerStep;
    empty.per_step_base_ids = {0, 0};
    empty.per_step_committees = {{}, {}};
    CHECK(stop_time(empty, pc, std::vector<int>{0, 1}) == 3);
}
