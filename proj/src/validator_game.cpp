#include "seqrej/validator_game.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "seqrej/log.hpp"

namespace seqrej {

namespace {

void require_labeled(const Dataset& data, const char* who) {
    for (const Trajectory& t : data)
        if (t.actions.size() != t.states.size())
            throw ValidationError(std::string(who) + ": dataset must be labeled");
}

} // namespace

VersionSpace exact_version_space(const PolicyClass& pc, const Dataset& train) {
    if (!pc.deterministic())
        throw ConfigError("exact_version_space: class must be deterministic");
    require_labeled(train, "exact_version_space");
    VersionSpace vs;
    vs.kind = VersionSpace::Kind::ExactConsistency;
    for (int id = 0; id < pc.size(); ++id) {
        const Policy& p = pc[id];
        bool consistent = true;
        for (const Trajectory& t : train) {
            for (std::size_t h = 0; h < t.states.size() && consistent; ++h)
                consistent = p.action_at(static_cast<int>(h), t.states[h]) == t.actions[h];
            if (!consistent) break;
        }
        if (consistent) vs.member_ids.push_back(id);
    }
    if (vs.member_ids.empty())
        throw RealizabilityError(
            "exact_version_space: no policy is consistent with the training data "
            "(consider the misspecified fit)");
    return vs;
}

int mle_policy(const PolicyClass& pc, const Dataset& train) {
    if (pc.deterministic())
        throw ConfigError("mle_policy: class must be stochastic");
    int best = -1;
    double best_loss = std::numeric_limits<double>::infinity();
    for (int id = 0; id < pc.size(); ++id) {
        const double loss = log_loss(pc[id], train);
        if (loss < best_loss) {
            best_loss = loss;
            best = id;
        }
    }
    if (best < 0)
        throw NoSupportError("mle_policy: every policy has infinite log-loss");
    return best;
}

VersionSpace logloss_version_space(const PolicyClass& pc, const Dataset& train,
                                   double gamma) {
    if (gamma < 0.0) throw ConfigError("logloss_version_space: gamma must be >= 0");
    const int mle = mle_policy(pc, train);
    const double base_loss = log_loss(pc[mle], train);
    VersionSpace vs;
    vs.kind = VersionSpace::Kind::LogLossBall;
    vs.gamma = gamma;
    vs.base_loss = base_loss;
    for (int id = 0; id < pc.size(); ++id) {
        const double loss = log_loss(pc[id], train);
        if (std::isinf(loss)) continue;  // excluded regardless of gamma
        if (loss <= base_loss + gamma) vs.member_ids.push_back(id);
    }
    return vs;
}

int StopTimeTable::row_of(int policy_id) const {
    for (int r = 0; r < rows(); ++r)
        if (member_ids[r] == policy_id) return r;
    return -1;
}

StopTimeTable build_stop_time_table(const PolicyClass& pc, const Policy& base,
                                    std::span<const int> member_ids,
                                    const Dataset& test, StopMode mode, double theta) {
    if (test.empty()) throw EmptyInputError("build_stop_time_table: empty test set");
    StopTimeTable table;
    table.member_ids.assign(member_ids.begin(), member_ids.end());
    table.n = static_cast<int>(test.size());
    table.horizon = pc.horizon();
    table.tau.resize(member_ids.size() * test.size());
    for (std::size_t r = 0; r < member_ids.size(); ++r) {
        const Policy& member = pc[member_ids[r]];
        for (std::size_t j = 0; j < test.size(); ++j) {
            const std::span<const int> states(test[j].states.data(), test[j].states.size());
            table.tau[r * test.size() + j] =
                mode == StopMode::FirstDisagreement
                    ? deviation_time(base, member, states)
                    : deviation_time_hellinger(base, member, states, theta);
        }
    }
    return table;
}

StopTimeTable build_step_stop_time_table(const PolicyClass& pc, const Policy& base,
                                         std::span<const int> member_ids,
                                         const Dataset& test, int step) {
    if (test.empty()) throw EmptyInputError("build_step_stop_time_table: empty test set");
    StopTimeTable table;
    table.member_ids.assign(member_ids.begin(), member_ids.end());
    table.n = static_cast<int>(test.size());
    table.horizon = 1;
    table.tau.resize(member_ids.size() * test.size());
    for (std::size_t r = 0; r < member_ids.size(); ++r) {
        const Policy& member = pc[member_ids[r]];
        for (std::size_t j = 0; j < test.size(); ++j) {
            const int s = test[j].states[step];
            table.tau[r * test.size() + j] =
                member.action_at(step, s) != base.action_at(step, s) ? 1 : 2;
        }
    }
    return table;
}

double late_stop_fraction(const StopTimeTable& table,
                          std::span<const int> committee_rows, int comparator_row) {
    const auto cmp = table.row(comparator_row);
    int late = 0;
    for (int j = 0; j < table.n; ++j) {
        int committee_tau = table.horizon + 1;
        for (int r : committee_rows)
            committee_tau = std::min(committee_tau, table.row(r)[j]);
        if (committee_tau > cmp[j]) ++late;
    }
    return static_cast<double>(late) / table.n;
}

double late_stop_fraction(int base_id, std::span<const int> committee_ids,
                          int comparator_id, const Dataset& test, StopMode mode,
                          double theta, const PolicyClass& pc) {
    std::vector<int> ids(committee_ids.begin(), committee_ids.end());
    ids.push_back(comparator_id);
    const StopTimeTable table =
        build_stop_time_table(pc, pc[base_id], ids, test, mode, theta);
    std::vector<int> committee_rows(committee_ids.size());
    for (std::size_t i = 0; i < committee_ids.size(); ++i)
        committee_rows[i] = static_cast<int>(i);
    return late_stop_fraction(table, committee_rows, table.rows() - 1);
}

std::vector<int> ValidatorDistribution::sample_committee(Rng& rng) const {
    if (atoms.empty()) throw ValidationError("ValidatorDistribution: no atoms");
    const double u = rng.next_unit();
    double cum = 0.0;
    for (const ValidatorAtom& atom : atoms) {
        cum += atom.weight;
        if (u < cum) return atom.ids;
    }
    return atoms.back().ids;
}

namespace {

// Pick the smallest T with sqrt(2 log N / T) + sqrt(log(1/delta) / (2T)) <= xi.
int auto_rounds(int support, double xi, double delta, int max_rounds, bool* capped) {
    const double l = std::log(std::max(support, 1));
    const double numer = std::sqrt(2.0 * l) + std::sqrt(std::log(1.0 / delta) / 2.0);
    double t = xi > 0.0 ? (numer / xi) * (numer / xi)
                        : std::numeric_limits<double>::infinity();
    int rounds = static_cast<int>(std::ceil(t));
    if (rounds < 1) rounds = 1;
    if (rounds > max_rounds) {
        SEQREJ_WARN("no-regret round cap binds: wanted %d rounds for slack %g, "
                    "capping at %d", rounds, xi, max_rounds);
        if (capped) *capped = true;
        return max_rounds;
    }
    return rounds;
}

struct HedgeState {
    std::vector<double> cum_payoff;
    double eta = 0.0;

    explicit HedgeState(int n, double eta_) : cum_payoff(n, 0.0), eta(eta_) {}

    // p_i proportional to exp(eta * G_i), computed with max subtraction.
    std::vector<double> distribution() const {
        const double g_max = *std::max_element(cum_payoff.begin(), cum_payoff.end());
        std::vector<double> p(cum_payoff.size());
        double z = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) {
            p[i] = std::exp(eta * (cum_payoff[i] - g_max));
            z += p[i];
        }
        for (double& x : p) x /= z;
        return p;
    }
};

struct GameResult {
    std::vector<ValidatorAtom> atoms;   // weights over distinct sorted committees (rows)
    double realized_regret = 0.0;
    double regret_bound = 0.0;
    int rounds = 0;
    bool capped = false;
};

// Shared Hedge loop. extra_reward[r] is added to each row's late-stop payoff
// (zero length means the plain game); its values shift u^t by a per-row
// constant, so the committee-dependent certificate terms stay outside.
GameResult run_hedge_game(const StopTimeTable& table, int K, double xi, double delta,
                          const NoRegretConfig& cfg,
                          std::span<const double> extra_reward) {
    const int nrows = table.rows();
    GameResult result;
    result.rounds = cfg.rounds > 0
                        ? cfg.rounds
                        : auto_rounds(nrows, xi, delta, cfg.max_rounds, &result.capped);
    const int T = result.rounds;

    double range = 1.0;
    if (!extra_reward.empty()) {
        const auto [lo, hi] = std::minmax_element(extra_reward.begin(), extra_reward.end());
        range = std::max(1.0 + *hi - *lo, 1.0);
    }
    const double log_n = std::log(std::max(nrows, 1));
    const double eta =
        cfg.learning_rate > 0.0
            ? cfg.learning_rate
            : (log_n > 0.0 ? std::sqrt(8.0 * log_n / T) / range : 0.0);
    result.regret_bound = range * std::sqrt(2.0 * T * log_n);
    // Pathwise exponential-weights bound log N / eta + T eta range^2 / 8; equals
    // range sqrt(T log N / 2) at the default rate, never above regret_bound.
    const double check_bound =
        eta > 0.0 ? log_n / eta + T * eta * range * range / 8.0 : 0.0;

    HedgeState hedge(nrows, eta);
    Rng rng = Rng(cfg.rng_seed).split("hedge-game", 0);

    std::map<std::vector<int>, double> atom_weights;
    std::vector<double> payoff(nrows);
    std::vector<int> committee_rows(K);
    std::vector<int> committee_tau(table.n);
    double hedge_total = 0.0;  // sum_t E_{p^t}[u^t]

    for (int t = 0; t < T; ++t) {
        const std::vector<double> p = hedge.distribution();
        for (int k = 0; k < K; ++k) committee_rows[k] = rng.next_categorical(p);

        for (int j = 0; j < table.n; ++j) {
            int tau = table.horizon + 1;
            for (int r : committee_rows) tau = std::min(tau, table.row(r)[j]);
            committee_tau[j] = tau;
        }
        double expected = 0.0;
        for (int r = 0; r < nrows; ++r) {
            const auto row = table.row(r);
            int late = 0;
            for (int j = 0; j < table.n; ++j)
                if (committee_tau[j] > row[j]) ++late;
            payoff[r] = static_cast<double>(late) / table.n;
            if (!extra_reward.empty()) payoff[r] += extra_reward[r];
            expected += p[r] * payoff[r];
        }
        hedge_total += expected;

        std::vector<int> ids(K);
        for (int k = 0; k < K; ++k) ids[k] = table.member_ids[committee_rows[k]];
        std::sort(ids.begin(), ids.end());
        atom_weights[std::move(ids)] += 1.0 / T;

        for (int r = 0; r < nrows; ++r) hedge.cum_payoff[r] += payoff[r];
    }

    const double best =
        *std::max_element(hedge.cum_payoff.begin(), hedge.cum_payoff.end());
    result.realized_regret = best - hedge_total;
    if (result.realized_regret > check_bound + 1e-9)
        throw Error("hedge regret certificate violated (internal bug)");

    result.atoms.reserve(atom_weights.size());
    for (auto& [ids, w] : atom_weights) result.atoms.push_back({ids, w});
    return result;
}

// Exact E_{Phi ~ atoms}[late-stop fraction vs each row]; returns the sup and
// its witness row.
std::pair<double, int> coverage_sup_exact(const StopTimeTable& table,
                                          const std::vector<ValidatorAtom>& atoms) {
    std::vector<double> coverage(table.rows(), 0.0);
    std::vector<int> committee_tau(table.n);
    for (const ValidatorAtom& atom : atoms) {
        for (int j = 0; j < table.n; ++j) {
            int tau = table.horizon + 1;
            for (int id : atom.ids) {
                const int r = table.row_of(id);
                tau = std::min(tau, table.row(r)[j]);
            }
            committee_tau[j] = tau;
        }
        for (int r = 0; r < table.rows(); ++r) {
            const auto row = table.row(r);
            int late = 0;
            for (int j = 0; j < table.n; ++j)
                if (committee_tau[j] > row[j]) ++late;
            coverage[r] += atom.weight * late / table.n;
        }
    }
    int witness = 0;
    for (int r = 1; r < table.rows(); ++r)
        if (coverage[r] > coverage[witness]) witness = r;
    return {coverage[witness], table.member_ids[witness]};
}

} // namespace

ValidatorDistribution sparse_validator_dist_from_table(const StopTimeTable& table,
                                                       double rho, double xi,
                                                       double delta,
                                                       const NoRegretConfig& cfg) {
    if (rho <= 0.0 || rho >= 1.0)
        throw ConfigError("sparse_validator_dist: rho must lie in (0,1)");
    if (xi < 0.0 || delta <= 0.0 || delta >= 1.0)
        throw ConfigError("sparse_validator_dist: need xi >= 0 and delta in (0,1)");
    const int K = static_cast<int>(std::ceil(1.0 / rho));
    GameResult game = run_hedge_game(table, K, xi, delta, cfg, {});

    ValidatorDistribution dist;
    dist.atoms = std::move(game.atoms);
    dist.target_rho = rho;
    dist.slack = xi;
    dist.rounds = game.rounds;
    dist.realized_regret = game.realized_regret;
    dist.regret_bound = game.regret_bound;
    dist.rounds_capped = game.capped;
    dist.reg_completeness = std::numeric_limits<double>::quiet_NaN();
    dist.reg_soundness_sup = std::numeric_limits<double>::quiet_NaN();
    std::tie(dist.coverage_sup, dist.coverage_witness_id) =
        coverage_sup_exact(table, dist.atoms);
    return dist;
}

ValidatorDistribution sparse_validator_dist(const VersionSpace& space, int base_id,
                                            const Dataset& test, double rho, double xi,
                                            double delta, StopMode mode, double theta,
                                            const PolicyClass& pc,
                                            const NoRegretConfig& cfg) {
    if (std::find(space.member_ids.begin(), space.member_ids.end(), base_id) ==
        space.member_ids.end())
        throw ConfigError("sparse_validator_dist: base policy not in the version space");
    const StopTimeTable table =
        build_stop_time_table(pc, pc[base_id], space.member_ids, test, mode, theta);
    return sparse_validator_dist_from_table(table, rho, xi, delta, cfg);
}

double empirical_disagreement_rate(int policy_id, const Dataset& train,
                                   const PolicyClass& pc) {
    require_labeled(train, "empirical_disagreement_rate");
    if (train.empty()) throw EmptyInputError("empirical_disagreement_rate: empty dataset");
    const Policy& p = pc[policy_id];
    int disagrees = 0;
    for (const Trajectory& t : train) {
        for (std::size_t h = 0; h < t.states.size(); ++h) {
            if (p.action_at(static_cast<int>(h), t.states[h]) != t.actions[h]) {
                ++disagrees;
                break;
            }
        }
    }
    return static_cast<double>(disagrees) / train.size();
}

ValidatorDistribution regularized_validator_dist(const PolicyClass& pc, int base_id,
                                                 const Dataset& train,
                                                 const Dataset& test, double lambda,
                                                 int K, const NoRegretConfig& cfg) {
    if (lambda <= 0.0) throw ConfigError("regularized_validator_dist: Lambda must be > 0");
    if (K < 1) throw ConfigError("regularized_validator_dist: K must be >= 1");
    if (!pc.deterministic())
        throw ConfigError("regularized_validator_dist: class must be deterministic");

    std::vector<double> d_hat(pc.size());
    for (int id = 0; id < pc.size(); ++id)
        d_hat[id] = empirical_disagreement_rate(id, train, pc);
    int argmin = 0;
    for (int id = 1; id < pc.size(); ++id)
        if (d_hat[id] < d_hat[argmin]) argmin = id;
    if (base_id != argmin)
        throw ConfigError("regularized_validator_dist: base must be the empirical "
                          "disagreement minimizer (smallest id on ties)");

    std::vector<int> all_ids(pc.size());
    for (int id = 0; id < pc.size(); ++id) all_ids[id] = id;
    const StopTimeTable table = build_stop_time_table(
        pc, pc[base_id], all_ids, test, StopMode::FirstDisagreement, 0.0);

    // The committee term of U is pi-independent and dropped from the Hedge
    // reward; both certificates below are computed with the full payoff.
    std::vector<double> extra(pc.size());
    for (int id = 0; id < pc.size(); ++id) extra[id] = -lambda * d_hat[id];

    const double xi = 0.05;  // only drives the auto-T choice
    GameResult game = run_hedge_game(table, K, xi, 0.05, cfg, extra);

    ValidatorDistribution dist;
    dist.atoms = std::move(game.atoms);
    dist.target_rho = 1.0 / K;
    dist.slack = 0.0;
    dist.rounds = game.rounds;
    dist.realized_regret = game.realized_regret;
    dist.regret_bound = game.regret_bound;
    dist.rounds_capped = game.capped;

    // Certificate (i): E_{Phi}[sum_k d_hat(phi_k)].
    double completeness = 0.0;
    for (const ValidatorAtom& atom : dist.atoms) {
        double sum = 0.0;
        for (int id : atom.ids) sum += d_hat[id];
        completeness += atom.weight * sum;
    }
    dist.reg_completeness = completeness;

    // Certificate (ii): sup_pi { E_{Phi}[r_N(pi,Phi)] - Lambda (d_hat(pi) - d_hat(base)) }.
    std::vector<double> coverage(pc.size(), 0.0);
    std::vector<int> committee_tau(table.n);
    for (const ValidatorAtom& atom : dist.atoms) {
        for (int j = 0; j < table.n; ++j) {
            int tau = table.horizon + 1;
            for (int id : atom.ids) tau = std::min(tau, table.row(id)[j]);
            committee_tau[j] = tau;
        }
        for (int r = 0; r < table.rows(); ++r) {
            const auto row = table.row(r);
            int late = 0;
            for (int j = 0; j < table.n; ++j)
                if (committee_tau[j] > row[j]) ++late;
            coverage[r] += atom.weight * late / table.n;
        }
    }
    double sup = -std::numeric_limits<double>::infinity();
    int witness = 0;
    for (int id = 0; id < pc.size(); ++id) {
        const double value = coverage[id] - lambda * (d_hat[id] - d_hat[base_id]);
        if (value > sup) {
            sup = value;
            witness = id;
        }
    }
    dist.reg_soundness_sup = sup;
    dist.coverage_sup = coverage[witness];
    dist.coverage_witness_id = witness;
    return dist;
}

std::vector<int> step_version_space(const PolicyClass& pc, const Dataset& train, int step) {
    require_labeled(train, "step_version_space");
    std::vector<int> ids;
    for (int id = 0; id < pc.size(); ++id) {
        const Policy& p = pc[id];
        bool consistent = true;
        for (const Trajectory& t : train) {
            if (p.action_at(step, t.states[step]) != t.actions[step]) {
                consistent = false;
                break;
            }
        }
        if (consistent) ids.push_back(id);
    }
    return ids;
}

std::vector<StoppingRule> per_step_selectors(const PolicyClass& pc, const Dataset& train,
                                             const Dataset& test, double rho, double xi,
                                             double delta, const NoRegretConfig& cfg) {
    if (!pc.deterministic())
        throw ConfigError("per_step_selectors: class must be deterministic");
    const int H = pc.horizon();
    const int k = static_cast<int>(std::ceil(std::log2(5.0 / delta)));
    std::vector<StoppingRule> rules;
    rules.reserve(H);
    Rng master(cfg.rng_seed);
    for (int h = 0; h < H; ++h) {
        const std::vector<int> space = step_version_space(pc, train, h);
        if (space.empty())
            throw RealizabilityError("per_step_selectors: empty step-" +
                                     std::to_string(h + 1) + " version space");
        const int base_id = space.front();
        const StopTimeTable table =
            build_step_stop_time_table(pc, pc[base_id], space, test, h);
        NoRegretConfig step_cfg = cfg;
        step_cfg.rng_seed = master.split("game", h).key();
        // delta/5 per game as in the trajectory-level fit, split across the H
        // step problems; at H = 1 the two constructions coincide exactly.
        const ValidatorDistribution dist =
            sparse_validator_dist_from_table(table, rho, xi, delta / (5.0 * H), step_cfg);

        Rng draw = master.split("draws", h);
        std::vector<int> committee;
        for (int r = 0; r < k; ++r) {
            for (int id : dist.sample_committee(draw))
                if (std::find(committee.begin(), committee.end(), id) == committee.end())
                    committee.push_back(id);
        }
        std::sort(committee.begin(), committee.end());

        StoppingRule rule;
        rule.mode = StopMode::FirstDisagreement;
        rule.base_id = base_id;
        rule.validator_ids = std::move(committee);
        rules.push_back(std::move(rule));
    }
    return rules;
}

} // namespace seqrej
