#pragma once
#include <cstdint>
#include <vector>

#include "seqrej/validator_game.hpp"

namespace seqrej {

// Column index of the cutoff translation matrix: trajectory j in [0,n), cutoff
// c in [1,H].
struct CutoffColumnIndex {
    int trajectory = 0;
    int cutoff = 1;
};

// Gamma_{pi,(j,c)} = 1[tau_{pi0,{pi}}(T_j) <= c], evaluated through the stop
// table row of pi.
int cutoff_matrix_entry(const StopTimeTable& table, int row, CutoffColumnIndex col);

// Committee cutoff vector h^Phi = (tau_{pi0,Phi}(T_j))_j over table rows.
std::vector<int> committee_cutoff_vector(const StopTimeTable& table,
                                         std::span<const int> committee_rows);

// Payoff f(pi, h) = (1/n) sum_j 1[x_{pi,j} < h_j].
double cutoff_payoff(const StopTimeTable& table, int row, std::span<const int> h);

// n-scaled perturbed-leader objective sum_s n f(pi,h^s) + sum_{j,c} (n a_{j,c})
// Gamma, per row. alpha_times_n is indexed [j][c-1] and already carries the
// factor n, which keeps integer-valued inputs integer-valued throughout.
std::vector<double> direct_objectives_scaled(
    const StopTimeTable& table, const std::vector<std::vector<int>>& history,
    const std::vector<std::vector<double>>& alpha_times_n);

// Weighted MIL objective sum_{j,c} w_{j,c} 1[bag B_{j,c} positive]
// with w_{j,c} = #{s : tau_{pi0,Phi^s}(T_j) - 1 = c} + n a_{j,c}. Equals the
// n-scaled direct objective exactly, row by row.
std::vector<double> mil_objectives(const StopTimeTable& table,
                                   const std::vector<std::vector<int>>& history,
                                   const std::vector<std::vector<double>>& alpha_times_n);

// Multi-class form over augmented bags (state duplicated per
// alternative action); needs the policies to evaluate membership.
std::vector<double> mil_multiclass_objectives(
    const PolicyClass& pc, const Policy& base, const Dataset& test,
    std::span<const int> member_ids, const std::vector<std::vector<int>>& history,
    const std::vector<std::vector<double>>& alpha_times_n);

// Exhaustive perturbed best responses; ties toward the smallest policy id.
int perturbed_best_response_direct(const StopTimeTable& table,
                                   const std::vector<std::vector<int>>& history,
                                   const std::vector<std::vector<double>>& alpha_times_n);
int perturbed_best_response_mil(const StopTimeTable& table,
                                const std::vector<std::vector<int>>& history,
                                const std::vector<std::vector<double>>& alpha_times_n);

struct FtplConfig {
    int rounds = 1000;
    double perturbation_scale = 0.0;  // 0: 10 sqrt(T) / (n H)
    std::uint64_t rng_seed = 0;
};

// Quotient the table by empirical stopping-time equivalence, keeping the
// smallest id per class.
StopTimeTable quotient_by_stop_times(const StopTimeTable& table);

// Oracle-efficient engine: per round, draw uniform nonnegative column
// perturbations, play the MIL perturbed best response, and sample the
// K-committee i.i.d. from the empirical play distribution. Returns the
// empirical committee distribution with its exact coverage certificate;
// realized regret of the play sequence is recorded, not assumed.
ValidatorDistribution ftpl_engine(const VersionSpace& space, int base_id,
                                  const Dataset& test, double rho,
                                  const FtplConfig& cfg, const PolicyClass& pc);
ValidatorDistribution ftpl_engine_from_table(const StopTimeTable& table, double rho,
                                             const FtplConfig& cfg);

} // namespace seqrej
