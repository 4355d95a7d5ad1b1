#pragma once
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "seqrej/errors.hpp"
#include "seqrej/rng.hpp"

namespace seqrej {

inline constexpr double kProbTol = 1e-9;
inline constexpr std::size_t kDefaultEnumBudget = 10'000'000;

// Finite-horizon tabular MDP. Steps are 0-based internally: costs are indexed
// by step h in [0,H), transitions by step h in [0,H-1) taking the process from
// step h to h+1. cost_cap must dominate every realizable trajectory cost.
struct TabularMDP {
    int num_states = 0;
    int num_actions = 0;
    int horizon = 0;
    std::vector<double> initial_dist;  // [s]
    std::vector<double> transitions;   // [h][s][a][s'], h in [0, H-1)
    std::vector<double> costs;         // [h][s][a]
    double cost_cap = 0.0;

    std::span<const double> transition_row(int h, int s, int a) const {
        const std::size_t base =
            ((static_cast<std::size_t>(h) * num_states + s) * num_actions + a) * num_states;
        return {transitions.data() + base, static_cast<std::size_t>(num_states)};
    }
    double cost(int h, int s, int a) const {
        return costs[(static_cast<std::size_t>(h) * num_states + s) * num_actions + a];
    }

    // Throws ValidationError unless every probability row normalizes within
    // kProbTol and every cost lies in [0,1].
    void validate() const;
};

struct Policy {
    enum class Kind { Deterministic, Stochastic };

    Kind kind = Kind::Deterministic;
    int num_states = 0;
    int num_actions = 0;
    int horizon = 0;
    std::vector<int> actions;    // [h][s] when deterministic
    std::vector<double> probs;   // [h][s][a] when stochastic

    bool deterministic() const { return kind == Kind::Deterministic; }

    int action_at(int h, int s) const {
        return actions[static_cast<std::size_t>(h) * num_states + s];
    }
    std::span<const double> row(int h, int s) const {
        const std::size_t base =
            (static_cast<std::size_t>(h) * num_states + s) * num_actions;
        return {probs.data() + base, static_cast<std::size_t>(num_actions)};
    }
    double prob_at(int h, int s, int a) const {
        if (deterministic()) return action_at(h, s) == a ? 1.0 : 0.0;
        return probs[(static_cast<std::size_t>(h) * num_states + s) * num_actions + a];
    }

    // One-hot stochastic form; identity on stochastic policies. Rows are exact
    // {0,1} doubles so d_H^2 equals the disagreement indicator exactly.
    Policy to_stochastic() const;

    void validate() const;

    static Policy make_deterministic(int S, int A, int H, std::vector<int> table);
    static Policy make_stochastic(int S, int A, int H, std::vector<double> table);
    // Deterministic policy playing the same action everywhere.
    static Policy constant(int S, int A, int H, int action);
};

bool same_shape(const Policy& a, const Policy& b);

struct PolicyClass {
    std::vector<Policy> policies;

    PolicyClass() = default;
    explicit PolicyClass(std::vector<Policy> ps);

    int size() const { return static_cast<int>(policies.size()); }
    const Policy& operator[](int id) const { return policies[id]; }
    bool deterministic() const { return policies.front().deterministic(); }
    int horizon() const { return policies.front().horizon; }
};

// A full trajectory has H states and H actions. A prefix stopped at tau <= H
// has tau states and tau-1 actions. Unlabeled data carries no actions.
struct Trajectory {
    std::vector<int> states;
    std::vector<int> actions;

    bool labeled() const { return !actions.empty() || states.empty(); }
    auto operator<=>(const Trajectory&) const = default;
};

using Dataset = std::vector<Trajectory>;

struct TrajectoryDistribution {
    std::vector<std::pair<Trajectory, double>> entries;  // sorted by outcome

    double total_mass() const;
    void validate() const;
};

// Stop predicate over a pre-action state prefix (s_1..s_h). The enumerator and
// simulators call it on prefixes of increasing length and stop at the first h
// where it returns true; tau = h (1-based), H+1 if it never fires.
using StopPredicate = std::function<bool(std::span<const int> state_prefix)>;

Trajectory sample_trajectory(const TabularMDP& mdp, const Policy& policy,
                             std::uint64_t rng_seed);
Trajectory sample_trajectory(const TabularMDP& mdp, const Policy& policy, Rng& rng);

// Exact law of the (optionally stopped) trajectory. With a stop rule, support
// entries are stopped prefixes keyed by their exact content; without one they
// are full trajectories. Throws EnumerationTooLarge past max_support entries.
TrajectoryDistribution enumerate_trajectory_distribution(
    const TabularMDP& mdp, const Policy& policy,
    const StopPredicate* stop = nullptr,
    std::size_t max_support = kDefaultEnumBudget);

// Exact full-horizon law of the switched process: base actions strictly before
// the stop time, expert actions from the stop step onward.
TrajectoryDistribution enumerate_switched_distribution(
    const TabularMDP& mdp, const Policy& base, const Policy& expert,
    const StopPredicate& stop, std::size_t max_support = kDefaultEnumBudget);

// Sum of c_h(s_h, a_h) for h < tau, with tau in [1, H+1].
double prefix_cost(const TabularMDP& mdp, const Trajectory& traj, int tau);

// Mean negative log-likelihood of the recorded actions; +infinity when any
// observed action has probability zero.
double log_loss(const Policy& policy, const Dataset& data);

// d_H^2(p, q) = 1 - sum_a sqrt(p_a q_a), in [0,1].
double action_hellinger_sq(std::span<const double> p, std::span<const double> q);
double action_hellinger_sq(const Policy& a, const Policy& b, int h, int s);

// Trajectory-level squared Hellinger distance between two (possibly stopped)
// laws; stopped prefixes of different content never match.
double trajectory_hellinger_sq(const TrajectoryDistribution& a,
                               const TrajectoryDistribution& b);

// Per-(h,s) normalized geometric mean. Zero normalizer rows become uniform.
Policy geometric_mixture_policy(const Policy& pi, const Policy& pi0);

// Helpers over enumerated laws.
bool is_stopped_entry(const Trajectory& t, int horizon);
int entry_tau(const Trajectory& t, int horizon);  // in [1, H+1]
double stopped_mass(const TrajectoryDistribution& dist, int horizon);
double expected_prefix_cost(const TabularMDP& mdp, const TrajectoryDistribution& dist);
double expected_capped_stop_time(const TrajectoryDistribution& dist, int horizon);
// Total variation between the state-trajectory marginals of two full laws.
double state_trajectory_tv(const TrajectoryDistribution& a,
                           const TrajectoryDistribution& b);

} // namespace seqrej
