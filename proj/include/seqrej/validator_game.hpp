#pragma once
#include <optional>
#include <vector>

#include "seqrej/stopping.hpp"

namespace seqrej {

struct VersionSpace {
    enum class Kind { ExactConsistency, LogLossBall };
    Kind kind = Kind::ExactConsistency;
    std::vector<int> member_ids;
    double gamma = 0.0;      // LogLossBall radius
    double base_loss = 0.0;  // MLE loss the ball is centered on
};

// Training-consistent version space of a deterministic class. Throws
// RealizabilityError when empty.
VersionSpace exact_version_space(const PolicyClass& pc, const Dataset& train);

// Log-loss minimizer, ties broken toward the smallest id. Throws
// NoSupportError when every loss is infinite.
int mle_policy(const PolicyClass& pc, const Dataset& train);

// Members within gamma of the MLE loss. Infinite-loss policies stay excluded
// regardless of gamma.
VersionSpace logloss_version_space(const PolicyClass& pc, const Dataset& train,
                                   double gamma);

// Committee stop times precomputed per (member, test trajectory): the payoff
// substrate for every game engine. tau values are 1-based with H+1 = never.
struct StopTimeTable {
    std::vector<int> member_ids;
    int n = 0;        // number of test trajectories
    int horizon = 0;  // taus live in [1, horizon+1]
    std::vector<int> tau;  // row r, column j at r*n + j

    std::span<const int> row(int r) const {
        return {tau.data() + static_cast<std::size_t>(r) * n, static_cast<std::size_t>(n)};
    }
    int rows() const { return static_cast<int>(member_ids.size()); }
    // Row index of a policy id; -1 when absent.
    int row_of(int policy_id) const;
};

StopTimeTable build_stop_time_table(const PolicyClass& pc, const Policy& base,
                                    std::span<const int> member_ids,
                                    const Dataset& test, StopMode mode, double theta);
// Single-step table for the stepwise baseline: tau in {1,2} from step-h
// disagreement against the step-h base row.
StopTimeTable build_step_stop_time_table(const PolicyClass& pc, const Policy& base,
                                         std::span<const int> member_ids,
                                         const Dataset& test, int step);

// (1/n) sum_j 1[min over committee members' tau > comparator tau].
double late_stop_fraction(const StopTimeTable& table,
                          std::span<const int> committee_rows, int comparator_row);
// Id-based convenience form.
double late_stop_fraction(int base_id, std::span<const int> committee_ids,
                          int comparator_id, const Dataset& test, StopMode mode,
                          double theta, const PolicyClass& pc);

struct NoRegretConfig {
    int rounds = 0;             // 0: smallest T meeting the slack inequality
    double learning_rate = 0.0; // 0: sqrt(8 log |support| / T) over the payoff range
    int committee_size = 0;     // regularized game only; sparse games use ceil(1/rho)
    int max_rounds = 200000;    // cap on the auto-chosen T
    std::uint64_t rng_seed = 0;
};

struct ValidatorAtom {
    std::vector<int> ids;  // committee as drawn (sorted; repeats preserved)
    double weight = 0.0;
};

struct ValidatorDistribution {
    std::vector<ValidatorAtom> atoms;
    double target_rho = 0.0;
    double slack = 0.0;  // xi

    // Exact certificates over the finite class (NaN when not applicable).
    double coverage_sup = 0.0;
    int coverage_witness_id = -1;
    double reg_completeness = 0.0;
    double reg_soundness_sup = 0.0;

    // No-regret diagnostics, recorded per run.
    int rounds = 0;
    double realized_regret = 0.0;
    double regret_bound = 0.0;  // sqrt(2 T log |support|), range-scaled
    bool rounds_capped = false;

    // One committee drawn from the atom weights.
    std::vector<int> sample_committee(Rng& rng) const;
};

// Hedge maximizer over the table rows, K = ceil(1/rho) i.i.d. committee
// draws per round, empirical distribution of the sampled committees. The
// returned coverage_sup is the exact sup over comparators.
ValidatorDistribution sparse_validator_dist_from_table(const StopTimeTable& table,
                                                       double rho, double xi,
                                                       double delta,
                                                       const NoRegretConfig& cfg);

ValidatorDistribution sparse_validator_dist(const VersionSpace& space, int base_id,
                                            const Dataset& test, double rho, double xi,
                                            double delta, StopMode mode, double theta,
                                            const PolicyClass& pc,
                                            const NoRegretConfig& cfg);

// Fraction of training trajectories where the policy's action differs from the
// recorded action at any step.
double empirical_disagreement_rate(int policy_id, const Dataset& train,
                                   const PolicyClass& pc);

// Symmetrically regularized game over the whole class: Hedge reward u(pi) =
// late-stop fraction minus Lambda * d_M(pi); committees of exactly K i.i.d.
// draws. Certificates
// (i) E[sum_k d_M(phi_k)] and (ii) sup_pi {E[r_N] - Lambda (d_M(pi) - d_M(base))}
// are computed exactly.
ValidatorDistribution regularized_validator_dist(const PolicyClass& pc, int base_id,
                                                 const Dataset& train,
                                                 const Dataset& test, double lambda,
                                                 int K, const NoRegretConfig& cfg);

// Stepwise reduction: one single-step rule per step h, fit on the
// step-h version space and the step-h states of the test set.
std::vector<StoppingRule> per_step_selectors(const PolicyClass& pc, const Dataset& train,
                                             const Dataset& test, double rho, double xi,
                                             double delta, const NoRegretConfig& cfg);

// Step-h version space: members agreeing with every recorded step-h action.
std::vector<int> step_version_space(const PolicyClass& pc, const Dataset& train, int step);

} // namespace seqrej
