#pragma once
#include <vector>

#include "seqrej/mdp.hpp"

namespace seqrej {

enum class StopMode { FirstDisagreement, HellingerBudget, PerStep };

// Validator-induced stopping rule. FirstDisagreement fires at the first step
// where some validator's action differs from the base's; HellingerBudget fires
// when any single validator's cumulative per-step d_H^2 against the base
// strictly exceeds theta (ties at theta continue; each validator tracks its
// own budget). PerStep carries one committee and one base id per step and
// fires at the first step h where a step-h committee member disagrees with
// the step-h base there.
struct StoppingRule {
    int base_id = 0;
    std::vector<int> validator_ids;
    StopMode mode = StopMode::FirstDisagreement;
    double theta = 0.0;

    // PerStep only; per_step_base_ids[h] supplies the base row at step h.
    std::vector<std::vector<int>> per_step_committees;
    std::vector<int> per_step_base_ids;
};

struct SelectivePolicy {
    Policy base;
    StoppingRule rule;
};

// Stop time of the rule on a full-length state trajectory, in [1, H+1].
int stop_time(const StoppingRule& rule, const PolicyClass& pc,
              std::span<const int> state_traj);

// First-disagreement stop time of {comparator} against base, the building
// block tau_{pi0,{pi}} used throughout the validator games.
int deviation_time(const Policy& base, const Policy& comparator,
                   std::span<const int> state_traj);
int deviation_time_hellinger(const Policy& base, const Policy& comparator,
                             std::span<const int> state_traj, double theta);

// Prefix predicate form of a rule, for enumeration and simulation.
StopPredicate make_stop_predicate(const StoppingRule& rule, const PolicyClass& pc);

struct SelectiveRollout {
    Trajectory prefix;   // ends at s_tau when stopped, full trajectory otherwise
    int tau = 0;         // in [1, H+1]
    double stopped_cost = 0.0;
};

SelectiveRollout run_selective(const TabularMDP& mdp, const SelectivePolicy& sel,
                               const PolicyClass& pc, std::uint64_t rng_seed);
SelectiveRollout run_selective(const TabularMDP& mdp, const SelectivePolicy& sel,
                               const PolicyClass& pc, Rng& rng);

struct SwitchedRollout {
    Trajectory traj;     // full horizon
    int tau = 0;         // handoff step, H+1 when never
    double full_cost = 0.0;
};

SwitchedRollout run_switched(const TabularMDP& mdp, const SelectivePolicy& sel,
                             const Policy& expert, const PolicyClass& pc,
                             std::uint64_t rng_seed);
SwitchedRollout run_switched(const TabularMDP& mdp, const SelectivePolicy& sel,
                             const Policy& expert, const PolicyClass& pc, Rng& rng);

} // namespace seqrej
