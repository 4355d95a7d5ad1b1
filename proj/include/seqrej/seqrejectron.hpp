#pragma once
#include <optional>

#include "seqrej/validator_game.hpp"

namespace seqrej {

enum class FitAlgorithm { Deterministic, Stochastic, Misspecified, PerStep };

enum class GameEngine { Hedge, Ftpl };

struct FitParams {
    double eta = 0.0;
    double xi = 0.0;
    double delta = 0.0;
    double theta = 0.0;
    double gamma = 0.0;
    double lambda = 0.0;
    int K = 0;
    double rho = 0.0;
};

struct FitReport {
    FitAlgorithm algorithm = FitAlgorithm::Deterministic;
    SelectivePolicy selective;
    int ensemble_draws = 0;   // k
    int committee_total = 0;  // |Phi| (deduplicated for the union algorithms)
    FitParams params;
    ValidatorDistribution distribution;  // q* with its certificates
    double Z = 0.0;
    int k_ens = 0;            // ceil(log2(4/delta)) ceil(2/eta), stochastic fit
    // Whether the theorem preconditions held at fit time; fitting proceeds
    // either way, this only flags the bound.
    bool bound_certified = true;
    std::vector<int> version_space_ids;
};

// Realizable deterministic fit: base = smallest-id member of the exact
// version space; rho = eta/2, confidence delta/5, k = ceil(log2(5/delta))
// committee draws unioned.
FitReport fit_deterministic(const PolicyClass& pc, const Dataset& train,
                            const Dataset& test, double eta, double xi, double delta,
                            const NoRegretConfig& cfg,
                            GameEngine engine = GameEngine::Hedge);

// Stochastic fit: base = MLE, space = log-loss ball of radius gamma,
// Hellinger budget theta, rho = eta/2, confidence delta/4,
// k = ceil(log2(4/delta)) draws.
FitReport fit_stochastic(const PolicyClass& pc, const Dataset& train,
                         const Dataset& test, double eta, double delta, double theta,
                         double gamma, const NoRegretConfig& cfg);

// Misspecified fit: base = empirical disagreement minimizer; a single
// committee draw from the regularized game, no union step.
FitReport fit_misspecified(const PolicyClass& pc, const Dataset& train,
                           const Dataset& test, double lambda, int K,
                           const NoRegretConfig& cfg);

// Stepwise baseline assembled into one selective policy.
FitReport fit_per_step(const PolicyClass& pc, const Dataset& train, const Dataset& test,
                       double rho, double xi, double delta, const NoRegretConfig& cfg);

// Balancing recipe for the misspecified fit: K = Lambda =
// ceil(1 / (sqrt(gap) + eps*)) with eps* = max((c0/m)^{1/5}, (c0/n)^{1/3})
// and c0 = log|class| + log(4/delta). `gap` is the best-in-class
// misspecification (exactly computable for generated bundles).
int recommended_k_lambda(double gap, int class_size, int m, int n, double delta);

} // namespace seqrej
