#pragma once
#include <vector>

#include "seqrej/mdp.hpp"
#include "seqrej/rng.hpp"

namespace seqrej::testing {

// Reference instance used across the suites: two states, two actions
// (L=0, R=1), horizon 2. Start at state 0; R escapes to state 1, L stays;
// state 1 absorbs. Costs charge 1 for being in state 0.
inline TabularMDP desk_chain() {
    TabularMDP mdp;
    mdp.num_states = 2;
    mdp.num_actions = 2;
    mdp.horizon = 2;
    mdp.initial_dist = {1.0, 0.0};
    // transitions[h=0][s][a][s']
    mdp.transitions = {
        1.0, 0.0,  // s=0, a=L -> 0
        0.0, 1.0,  // s=0, a=R -> 1
        0.0, 1.0,  // s=1, a=L -> 1
        0.0, 1.0,  // s=1, a=R -> 1
    };
    mdp.costs = {
        1.0, 1.0,  // h=1: s=0
        0.0, 0.0,  //      s=1
        1.0, 1.0,  // h=2: s=0
        0.0, 0.0,  //      s=1
    };
    mdp.cost_cap = 2.0;
    mdp.validate();
    return mdp;
}

// DESK-CHAIN with wind: R from state 0 lands back in 0 with probability w.
inline TabularMDP desk_chain_windy(double w) {
    TabularMDP mdp = desk_chain();
    mdp.transitions[2] = w;        // s=0, a=R -> 0
    mdp.transitions[3] = 1.0 - w;  // s=0, a=R -> 1
    mdp.validate();
    return mdp;
}

inline Policy desk_always_r() { return Policy::constant(2, 2, 2, 1); }
inline Policy desk_always_l() { return Policy::constant(2, 2, 2, 0); }
inline Policy desk_r_then_l() {
    return Policy::make_deterministic(2, 2, 2, {1, 1, 0, 0});
}
// Agrees with always-R except at (h=2, s=0), which expert data never visits.
inline Policy desk_r_except_20_l() {
    return Policy::make_deterministic(2, 2, 2, {1, 1, 0, 1});
}

inline std::vector<double> random_row(int n, Rng& rng) {
    std::vector<double> row(n);
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        row[i] = 0.05 + rng.next_unit();  // bounded away from zero
        sum += row[i];
    }
    for (double& x : row) x /= sum;
    return row;
}

inline TabularMDP random_mdp(int S, int A, int H, Rng& rng) {
    TabularMDP mdp;
    mdp.num_states = S;
    mdp.num_actions = A;
    mdp.horizon = H;
    mdp.initial_dist = random_row(S, rng);
    for (int h = 0; h + 1 < H; ++h)
        for (int s = 0; s < S; ++s)
            for (int a = 0; a < A; ++a) {
                const auto row = random_row(S, rng);
                mdp.transitions.insert(mdp.transitions.end(), row.begin(), row.end());
            }
    mdp.costs.resize(static_cast<std::size_t>(H) * S * A);
    for (double& c : mdp.costs) c = rng.next_unit();
    mdp.cost_cap = H;
    mdp.validate();
    return mdp;
}

inline Policy random_stochastic_policy(int S, int A, int H, Rng& rng) {
    std::vector<double> table;
    for (int c = 0; c < H * S; ++c) {
        const auto row = random_row(A, rng);
        table.insert(table.end(), row.begin(), row.end());
    }
    return Policy::make_stochastic(S, A, H, std::move(table));
}

inline Policy random_deterministic_policy(int S, int A, int H, Rng& rng) {
    std::vector<int> table(static_cast<std::size_t>(H) * S);
    for (int& a : table) a = static_cast<int>(rng.next_below(A));
    return Policy::make_deterministic(S, A, H, std::move(table));
}

} // namespace seqrej::testing
