#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include "seqrej/mdp.hpp"

namespace seqrej {

struct ScenarioBundle {
    TabularMDP M;
    TabularMDP N;
    Policy expert;      // demonstrator used for sampling labels in M
    PolicyClass pc;
    int expert_id = -1; // index of the expert in pc, -1 when outside the class
    double corruption = 0.0;

    // Off-policy pairs; both equal `expert` otherwise.
    Policy pi_train;
    Policy pi_test;
    bool off_policy = false;
    double delta_off = 0.0;  // exact min_pi max{d_M^tr, d_N^te} over the class
};

struct WindyChainParams {
    int length = 4;
    int horizon = 5;
    double wind = 0.4;
    int class_size = 16;
    // Deterministic variant: always-right expert, flip-to-left perturbations,
    // optional forward-slip noise in M. Stochastic variant: soft-right expert
    // and left-drift row perturbations, for the Hellinger pipeline.
    bool deterministic_class = false;
    double slip = 0.0;
    double perturb_cell_prob = 0.35;
    // Perturbations land on cells the expert rarely visits in M; cells with
    // occupancy above the threshold are flipped at the on-path rate instead,
    // mirroring candidate pools that agree with the expert on source support.
    double occupancy_threshold = 0.05;
    double on_path_perturb_prob = 0.05;
    // 0: start at state 0; 1: uniform start; in between: P0(s) proportional to
    // ratio^s, which keeps a fringe of rarely-started states.
    double start_ratio = 0.0;
};

// Chain with a goal at the right end; costs are distance-to-goal, normalized
// so every trajectory cost is at most 1. N pushes each forward move back with
// probability `wind`; w = 0 makes N identical to M.
ScenarioBundle make_windy_chain(const WindyChainParams& params, std::uint64_t seed);
ScenarioBundle make_windy_chain(int length, int horizon, double wind, std::uint64_t seed);

struct PqLowerBoundBundle {
    TabularMDP p_env;  // H = 1, uniform over all states
    TabularMDP q_env;  // H = 1, uniform over the first d states
    PolicyClass sigma_policies;
    std::vector<std::vector<int>> sigma_bits;   // per policy, d entries in {-1,+1}
    std::vector<std::vector<double>> costs_per_sigma;  // [policy][s*A + a]
    bool subsampled = false;
};

// Single-step lower-bound family: N = ceil(d / (2 eps)) states, sigma-policies taking
// action 1 with probability 1/2 + sigma_x Delta on the support of Q. A
// negative Delta selects the 4 eps default; Delta = 0 is the degenerate
// all-uniform class. The full 2^d class is enumerated for d <= 16, larger d
// draws a seeded subsample with a warning.
PqLowerBoundBundle make_pq_lower_bound(int d, double epsilon, double delta_param,
                                       std::uint64_t seed);

struct RandomTabularParams {
    int num_states = 3;
    int num_actions = 2;
    int horizon = 3;
    int class_size = 8;
    double corruption = 0.0;
    bool off_policy = false;
    bool stochastic = false;
};

ScenarioBundle make_random_tabular(const RandomTabularParams& params, std::uint64_t seed);

// Labeled rollouts from (M, pi_train) with each recorded action flipped to a
// uniformly random other action with probability bundle.corruption, plus
// state-only rollouts from (N, pi_test).
struct SampledData {
    Dataset train;
    Dataset test;
};
SampledData sample_datasets(const ScenarioBundle& bundle, int m, int n,
                            std::uint64_t seed);

// Greedy baseline selector: the K candidates with the largest cumulative
// squared Hellinger disagreement against the base on the test trajectories.
// A heuristic alternative to the game-theoretic construction; it carries no
// coverage certificate. Ties break toward the smaller id.
std::vector<int> greedy_hellinger_committee(const PolicyClass& pc,
                                            std::span<const int> candidate_ids,
                                            int base_id, const Dataset& test, int K);

} // namespace seqrej
