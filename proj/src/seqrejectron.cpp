#include "seqrej/seqrejectron.hpp"

#include <algorithm>
#include <cmath>

#include "seqrej/oracle_reductions.hpp"

namespace seqrej {

namespace {

int ceil_log2(double x) { return static_cast<int>(std::ceil(std::log2(x))); }

std::vector<int> union_committee_draws(const ValidatorDistribution& dist, int k,
                                       Rng& rng) {
    std::vector<int> committee;
    for (int r = 0; r < k; ++r) {
        for (int id : dist.sample_committee(rng))
            if (std::find(committee.begin(), committee.end(), id) == committee.end())
                committee.push_back(id);
    }
    std::sort(committee.begin(), committee.end());
    return committee;
}

} // namespace

FitReport fit_deterministic(const PolicyClass& pc, const Dataset& train,
                            const Dataset& test, double eta, double xi, double delta,
                            const NoRegretConfig& cfg, GameEngine engine) {
    if (eta <= 0.0 || delta <= 0.0 || delta >= 1.0)
        throw ConfigError("fit_deterministic: need eta > 0 and delta in (0,1)");
    const VersionSpace space = exact_version_space(pc, train);
    const int base_id = space.member_ids.front();

    Rng master(cfg.rng_seed);
    NoRegretConfig game_cfg = cfg;
    game_cfg.rng_seed = master.split("game", 0).key();
    ValidatorDistribution dist;
    if (engine == GameEngine::Hedge) {
        dist = sparse_validator_dist(space, base_id, test, eta / 2.0, xi, delta / 5.0,
                                     StopMode::FirstDisagreement, 0.0, pc, game_cfg);
    } else {
        FtplConfig fcfg;
        fcfg.rng_seed = game_cfg.rng_seed;
        if (cfg.rounds > 0) fcfg.rounds = cfg.rounds;
        dist = ftpl_engine(space, base_id, test, eta / 2.0, fcfg, pc);
    }

    const int k = ceil_log2(5.0 / delta);
    Rng draws = master.split("draws", 0);
    std::vector<int> committee = union_committee_draws(dist, k, draws);

    FitReport report;
    report.algorithm = FitAlgorithm::Deterministic;
    report.selective.base = pc[base_id];
    report.selective.rule.base_id = base_id;
    report.selective.rule.mode = StopMode::FirstDisagreement;
    report.selective.rule.validator_ids = std::move(committee);
    report.ensemble_draws = k;
    report.committee_total = static_cast<int>(report.selective.rule.validator_ids.size());
    report.params = {eta, xi, delta, 0.0, 0.0, 0.0, 0, eta / 2.0};
    report.distribution = std::move(dist);
    const int cap = k * static_cast<int>(std::ceil(2.0 / eta));
    report.Z = (static_cast<double>(cap) + 1.0) * std::log(pc.size()) + std::log(5.0 / delta);
    report.k_ens = cap;
    report.version_space_ids = space.member_ids;
    if (report.committee_total > cap)
        throw Error("fit_deterministic: committee budget exceeded (internal bug)");
    return report;
}

FitReport fit_stochastic(const PolicyClass& pc, const Dataset& train,
                         const Dataset& test, double eta, double delta, double theta,
                         double gamma, const NoRegretConfig& cfg) {
    if (eta <= 0.0 || delta <= 0.0 || delta >= 1.0)
        throw ConfigError("fit_stochastic: need eta > 0 and delta in (0,1)");
    if (theta <= 0.0) throw ConfigError("fit_stochastic: theta must be > 0");
    if (gamma < 0.0) throw ConfigError("fit_stochastic: gamma must be >= 0");
    const int base_id = mle_policy(pc, train);
    const VersionSpace space = logloss_version_space(pc, train, gamma);

    // The stochastic fit exposes no slack parameter; eta/4 keeps the realized
    // coverage within the eta/2 target the guarantees assume.
    const double xi = eta / 4.0;
    Rng master(cfg.rng_seed);
    NoRegretConfig game_cfg = cfg;
    game_cfg.rng_seed = master.split("game", 0).key();
    ValidatorDistribution dist =
        sparse_validator_dist(space, base_id, test, eta / 2.0, xi, delta / 4.0,
                              StopMode::HellingerBudget, theta, pc, game_cfg);

    const int k = ceil_log2(4.0 / delta);
    Rng draws = master.split("draws", 0);
    std::vector<int> committee = union_committee_draws(dist, k, draws);

    FitReport report;
    report.algorithm = FitAlgorithm::Stochastic;
    report.selective.base = pc[base_id];
    report.selective.rule.base_id = base_id;
    report.selective.rule.mode = StopMode::HellingerBudget;
    report.selective.rule.theta = theta;
    report.selective.rule.validator_ids = std::move(committee);
    report.ensemble_draws = k;
    report.committee_total = static_cast<int>(report.selective.rule.validator_ids.size());
    report.params = {eta, xi, delta, theta, gamma, 0.0, 0, eta / 2.0};
    report.distribution = std::move(dist);
    report.k_ens = k * static_cast<int>(std::ceil(2.0 / eta));
    report.Z = (static_cast<double>(report.k_ens) + 1.0) * std::log(pc.size()) +
               std::log(4.0 / delta);
    report.version_space_ids = space.member_ids;
    if (report.committee_total > report.k_ens)
        throw Error("fit_stochastic: committee budget exceeded (internal bug)");
    // Bound preconditions n >= 8Z/eta and m >= (log|Pi| + log(8/delta))/gamma.
    const double m = static_cast<double>(train.size());
    const double n = static_cast<double>(test.size());
    report.bound_certified =
        n >= 8.0 * report.Z / eta &&
        (gamma > 0.0 && m >= (std::log(pc.size()) + std::log(8.0 / delta)) / gamma);
    return report;
}

FitReport fit_misspecified(const PolicyClass& pc, const Dataset& train,
                           const Dataset& test, double lambda, int K,
                           const NoRegretConfig& cfg) {
    if (lambda <= 0.0 || K < 1)
        throw ConfigError("fit_misspecified: need Lambda > 0 and K >= 1");
    std::vector<double> d_hat(pc.size());
    for (int id = 0; id < pc.size(); ++id)
        d_hat[id] = empirical_disagreement_rate(id, train, pc);
    int base_id = 0;
    for (int id = 1; id < pc.size(); ++id)
        if (d_hat[id] < d_hat[base_id]) base_id = id;

    Rng master(cfg.rng_seed);
    NoRegretConfig game_cfg = cfg;
    game_cfg.rng_seed = master.split("game", 0).key();
    game_cfg.committee_size = K;
    ValidatorDistribution dist =
        regularized_validator_dist(pc, base_id, train, test, lambda, K, game_cfg);

    // One committee draw, no union: a union would amplify the irreducible
    // misspecification error.
    Rng draw = master.split("draws", 0);
    std::vector<int> committee = dist.sample_committee(draw);

    FitReport report;
    report.algorithm = FitAlgorithm::Misspecified;
    report.selective.base = pc[base_id];
    report.selective.rule.base_id = base_id;
    report.selective.rule.mode = StopMode::FirstDisagreement;
    report.selective.rule.validator_ids = std::move(committee);
    report.ensemble_draws = 1;
    report.committee_total = K;
    report.params = {0.0, 0.0, 0.25, 0.0, 0.0, lambda, K, 0.0};
    report.distribution = std::move(dist);
    // The misspecified fit takes no confidence parameter; Z is reported at delta = 0.25.
    report.Z = (static_cast<double>(K) + 1.0) * std::log(pc.size()) + std::log(4.0 / 0.25);
    return report;
}

int recommended_k_lambda(double gap, int class_size, int m, int n, double delta) {
    if (gap < 0.0 || m < 1 || n < 1)
        throw ConfigError("recommended_k_lambda: invalid inputs");
    const double c0 = std::log(class_size) + std::log(4.0 / delta);
    const double eps_star = std::max(std::pow(c0 / m, 0.2), std::pow(c0 / n, 1.0 / 3.0));
    const double denom = std::sqrt(gap) + eps_star;
    return std::max(1, static_cast<int>(std::ceil(1.0 / denom)));
}

FitReport fit_per_step(const PolicyClass& pc, const Dataset& train, const Dataset& test,
                       double rho, double xi, double delta, const NoRegretConfig& cfg) {
    const std::vector<StoppingRule> step_rules =
        per_step_selectors(pc, train, test, rho, xi, delta, cfg);
    const int H = pc.horizon();

    FitReport report;
    report.algorithm = FitAlgorithm::PerStep;
    StoppingRule rule;
    rule.mode = StopMode::PerStep;
    rule.per_step_base_ids.resize(H);
    rule.per_step_committees.resize(H);
    for (int h = 0; h < H; ++h) {
        rule.per_step_base_ids[h] = step_rules[h].base_id;
        rule.per_step_committees[h] = step_rules[h].validator_ids;
    }
    rule.base_id = rule.per_step_base_ids.front();

    // Composite base: the step-h row of the step-h base policy.
    Policy base = pc[rule.per_step_base_ids.front()];
    for (int h = 0; h < H; ++h) {
        const Policy& src = pc[rule.per_step_base_ids[h]];
        for (int s = 0; s < base.num_states; ++s)
            base.actions[static_cast<std::size_t>(h) * base.num_states + s] =
                src.action_at(h, s);
    }
    report.selective.base = std::move(base);
    report.selective.rule = std::move(rule);

    int total = 0;
    for (const auto& committee : report.selective.rule.per_step_committees)
        total += static_cast<int>(committee.size());
    report.ensemble_draws = static_cast<int>(std::ceil(std::log2(5.0 / delta)));
    report.committee_total = total;
    report.params = {0.0, xi, delta, 0.0, 0.0, 0.0, 0, rho};
    const int cap = report.ensemble_draws * static_cast<int>(std::ceil(1.0 / rho));
    report.Z = (static_cast<double>(cap) + 1.0) * std::log(pc.size()) + std::log(5.0 / delta);
    report.bound_certified = false;  // the per-step baseline carries no trajectory-level bound
    return report;
}

} // namespace seqrej
