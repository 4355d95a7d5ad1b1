#pragma once
#include <optional>

#include "seqrej/stopping.hpp"

namespace seqrej {

struct CiHalfwidths {
    double alpha_M = 0.0;
    double alpha_N = 0.0;
    double stopped_regret_N = 0.0;
    double switched_regret_N = 0.0;
    double asymmetric_stopped_regret_N = 0.0;
};

struct MetricsReport {
    double alpha_M = 0.0;  // Pr_{M,pi0}(tau <= H)
    double alpha_N = 0.0;  // Pr_{N,pi0}(tau <= H)
    double stopped_regret_N = 0.0;     // J_N(pi0,tau) - J_N(expert,tau), shared tau
    double switched_regret_N = 0.0;    // J_N(pi_sw) - J_N(expert)
    double asymmetric_stopped_regret_N = 0.0;  // J_N(pi0,tau) - J_N(expert)
    double stopped_hellinger_sq = 0.0;
    double expert_variance = 0.0;  // sigma^2 of the expert in N
    double learner_cost_N = 0.0;   // J_N(pi0), full horizon
    double expert_cost_N = 0.0;    // J_N(expert), full horizon
    double switched_cost_N = 0.0;  // J_N(pi_sw)
    double mean_handoff_time_N = 0.0;  // E_N[min(tau, H)]

    // Test-side abstention decomposition (exact method only; the inequality
    // alpha_N <= sum of the three holds for deterministic classes).
    double expert_alpha_M = 0.0;       // Pr_{M,expert}(tau <= H)
    double expert_alpha_N = 0.0;       // Pr_{N,expert}(tau <= H)
    double state_tv_expert = 0.0;      // TV of expert state laws between M and N
    double late_stop_risk_N = 0.0;     // Pr_{N,expert}(tau > tau_dev)

    bool exact = true;
    int n_rollouts = 0;
    std::optional<CiHalfwidths> ci;
};

MetricsReport exact_metrics(const TabularMDP& M, const TabularMDP& N,
                            const SelectivePolicy& sel, const Policy& expert,
                            const PolicyClass& pc,
                            std::size_t max_support = kDefaultEnumBudget);

// Plug-in estimates with normal-approximation 95% CI half-widths. Rollout i
// consumes the split("rollout", i) substream of the seed, so the schedule is
// independent of threading.
MetricsReport monte_carlo_metrics(const TabularMDP& M, const TabularMDP& N,
                                  const SelectivePolicy& sel, const Policy& expert,
                                  const PolicyClass& pc, int n_rollouts,
                                  std::uint64_t rng_seed);

// sigma^2 = sum_h E_expert[(V_h - Q_h)^2] by backward induction; always
// <= cost_cap^2.
double expert_variance(const TabularMDP& mdp, const Policy& expert);

} // namespace seqrej
