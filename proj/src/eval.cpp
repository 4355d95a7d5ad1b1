#include "seqrej/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace seqrej {

namespace {

double full_expected_cost(const TabularMDP& mdp, const Policy& policy,
                          std::size_t budget) {
    const TrajectoryDistribution law =
        enumerate_trajectory_distribution(mdp, policy, nullptr, budget);
    return expected_prefix_cost(mdp, law);
}

// Base-vs-expert deviation time in the rule's own mode: first disagreement for
// the deterministic rules, cumulative Hellinger against theta for the budget
// rule.
int base_deviation_time(const SelectivePolicy& sel, const Policy& expert,
                        std::span<const int> states) {
    if (sel.rule.mode == StopMode::HellingerBudget)
        return deviation_time_hellinger(sel.base, expert, states, sel.rule.theta);
    return deviation_time(sel.base, expert, states);
}

struct MeanAccumulator {
    double sum = 0.0;
    double sum_sq = 0.0;
    int n = 0;

    void add(double x) {
        sum += x;
        sum_sq += x * x;
        ++n;
    }
    double mean() const { return n ? sum / n : 0.0; }
    double ci_halfwidth() const {
        if (n < 2) return 0.0;
        const double m = mean();
        const double var = std::max(0.0, (sum_sq - n * m * m) / (n - 1));
        return 1.959963984540054 * std::sqrt(var / n);
    }
};

} // namespace

double expert_variance(const TabularMDP& mdp, const Policy& expert) {
    const int S = mdp.num_states, A = mdp.num_actions, H = mdp.horizon;
    const Policy pi = expert.to_stochastic();
    // Backward induction for V_h, Q_h.
    std::vector<double> v_next(S, 0.0);
    std::vector<std::vector<double>> V(H, std::vector<double>(S, 0.0));
    std::vector<std::vector<double>> Q(H, std::vector<double>(S * A, 0.0));
    for (int h = H - 1; h >= 0; --h) {
        for (int s = 0; s < S; ++s) {
            double v = 0.0;
            for (int a = 0; a < A; ++a) {
                double q = mdp.cost(h, s, a);
                if (h + 1 < H) {
                    const auto row = mdp.transition_row(h, s, a);
                    for (int s2 = 0; s2 < S; ++s2) q += row[s2] * v_next[s2];
                }
                Q[h][s * A + a] = q;
                v += pi.prob_at(h, s, a) * q;
            }
            V[h][s] = v;
        }
        v_next = V[h];
    }
    // Occupancy of the expert, forward.
    std::vector<double> occ = mdp.initial_dist;
    double sigma_sq = 0.0;
    for (int h = 0; h < H; ++h) {
        for (int s = 0; s < S; ++s) {
            if (occ[s] == 0.0) continue;
            for (int a = 0; a < A; ++a) {
                const double pa = pi.prob_at(h, s, a);
                if (pa == 0.0) continue;
                const double gap = V[h][s] - Q[h][s * A + a];
                sigma_sq += occ[s] * pa * gap * gap;
            }
        }
        if (h + 1 < H) {
            std::vector<double> next(S, 0.0);
            for (int s = 0; s < S; ++s) {
                if (occ[s] == 0.0) continue;
                for (int a = 0; a < A; ++a) {
                    const double pa = pi.prob_at(h, s, a);
                    if (pa == 0.0) continue;
                    const auto row = mdp.transition_row(h, s, a);
                    for (int s2 = 0; s2 < S; ++s2) next[s2] += occ[s] * pa * row[s2];
                }
            }
            occ = std::move(next);
        }
    }
    if (sigma_sq > mdp.cost_cap * mdp.cost_cap + 1e-9)
        throw ValidationError("expert_variance: sigma^2 exceeds cost_cap^2");
    return sigma_sq;
}

MetricsReport exact_metrics(const TabularMDP& M, const TabularMDP& N,
                            const SelectivePolicy& sel, const Policy& expert,
                            const PolicyClass& pc, std::size_t max_support) {
    const int H = N.horizon;
    const StopPredicate stop = make_stop_predicate(sel.rule, pc);

    MetricsReport r;
    r.exact = true;

    const TrajectoryDistribution base_M =
        enumerate_trajectory_distribution(M, sel.base, &stop, max_support);
    r.alpha_M = stopped_mass(base_M, H);

    const TrajectoryDistribution base_N =
        enumerate_trajectory_distribution(N, sel.base, &stop, max_support);
    const TrajectoryDistribution expert_N_stopped =
        enumerate_trajectory_distribution(N, expert, &stop, max_support);
    r.alpha_N = stopped_mass(base_N, H);
    r.stopped_regret_N =
        expected_prefix_cost(N, base_N) - expected_prefix_cost(N, expert_N_stopped);
    r.stopped_hellinger_sq = trajectory_hellinger_sq(base_N, expert_N_stopped);
    r.mean_handoff_time_N = expected_capped_stop_time(base_N, H);

    const TrajectoryDistribution switched_N =
        enumerate_switched_distribution(N, sel.base, expert, stop, max_support);
    r.switched_cost_N = expected_prefix_cost(N, switched_N);
    r.expert_cost_N = full_expected_cost(N, expert, max_support);
    r.learner_cost_N = full_expected_cost(N, sel.base, max_support);
    r.switched_regret_N = r.switched_cost_N - r.expert_cost_N;
    r.asymmetric_stopped_regret_N = expected_prefix_cost(N, base_N) - r.expert_cost_N;

    r.expert_variance = expert_variance(N, expert);

    // Test-side abstention transfer terms, all under the expert.
    const TrajectoryDistribution expert_M_stopped =
        enumerate_trajectory_distribution(M, expert, &stop, max_support);
    r.expert_alpha_M = stopped_mass(expert_M_stopped, H);
    r.expert_alpha_N = stopped_mass(expert_N_stopped, H);
    const TrajectoryDistribution expert_M_full =
        enumerate_trajectory_distribution(M, expert, nullptr, max_support);
    const TrajectoryDistribution expert_N_full =
        enumerate_trajectory_distribution(N, expert, nullptr, max_support);
    r.state_tv_expert = state_trajectory_tv(expert_M_full, expert_N_full);
    // Pr_{N,expert}[tau > tau_dev]: mass of expert trajectories whose rule stop
    // time comes strictly after the base-vs-expert deviation time.
    double late = 0.0;
    for (const auto& [t, p] : expert_N_full.entries) {
        const std::span<const int> states(t.states.data(), t.states.size());
        const int tau = stop_time(sel.rule, pc, states);
        if (tau > base_deviation_time(sel, expert, states)) late += p;
    }
    r.late_stop_risk_N = late;
    return r;
}

MetricsReport monte_carlo_metrics(const TabularMDP& M, const TabularMDP& N,
                                  const SelectivePolicy& sel, const Policy& expert,
                                  const PolicyClass& pc, int n_rollouts,
                                  std::uint64_t rng_seed) {
    if (n_rollouts < 1) throw ConfigError("monte_carlo_metrics: n_rollouts must be >= 1");
    const int H = N.horizon;
    const Rng master(rng_seed);
    const StopPredicate stop = make_stop_predicate(sel.rule, pc);

    MeanAccumulator alpha_M, alpha_N, learner_stopped_cost, expert_stopped_cost,
        switched_cost, expert_full_cost, learner_full_cost, handoff_time,
        expert_alpha_M, expert_alpha_N, late_stop_N;

    for (int i = 0; i < n_rollouts; ++i) {
        Rng stream = master.split("rollout", static_cast<std::uint64_t>(i));
        {
            Rng rng = stream.split("selective-M", 0);
            const SelectiveRollout roll = run_selective(M, sel, pc, rng);
            alpha_M.add(roll.tau <= H ? 1.0 : 0.0);
        }
        {
            Rng rng = stream.split("selective-N", 0);
            const SelectiveRollout roll = run_selective(N, sel, pc, rng);
            alpha_N.add(roll.tau <= H ? 1.0 : 0.0);
            learner_stopped_cost.add(roll.stopped_cost);
            handoff_time.add(std::min(roll.tau, H));
        }
        {
            Rng rng = stream.split("switched-N", 0);
            const SwitchedRollout roll = run_switched(N, sel, expert, pc, rng);
            switched_cost.add(roll.full_cost);
        }
        {
            // Expert rollout in N: stopped-cost functional, full cost, and the
            // abstention-transfer terms all read off the same trajectory.
            Rng rng = stream.split("expert-N", 0);
            const Trajectory t = sample_trajectory(N, expert, rng);
            const std::span<const int> states(t.states.data(), t.states.size());
            const int tau = stop_time(sel.rule, pc, states);
            expert_stopped_cost.add(prefix_cost(N, t, tau));
            expert_full_cost.add(prefix_cost(N, t, H + 1));
            expert_alpha_N.add(tau <= H ? 1.0 : 0.0);
            late_stop_N.add(tau > base_deviation_time(sel, expert, states) ? 1.0 : 0.0);
        }
        {
            Rng rng = stream.split("expert-M", 0);
            const Trajectory t = sample_trajectory(M, expert, rng);
            const std::span<const int> states(t.states.data(), t.states.size());
            expert_alpha_M.add(stop_time(sel.rule, pc, states) <= H ? 1.0 : 0.0);
        }
        {
            Rng rng = stream.split("learner-N", 0);
            const Trajectory t = sample_trajectory(N, sel.base, rng);
            learner_full_cost.add(prefix_cost(N, t, H + 1));
        }
    }

    MetricsReport r;
    r.exact = false;
    r.n_rollouts = n_rollouts;
    r.alpha_M = alpha_M.mean();
    r.alpha_N = alpha_N.mean();
    r.stopped_regret_N = learner_stopped_cost.mean() - expert_stopped_cost.mean();
    r.switched_cost_N = switched_cost.mean();
    r.expert_cost_N = expert_full_cost.mean();
    r.learner_cost_N = learner_full_cost.mean();
    r.switched_regret_N = switched_cost.mean() - expert_full_cost.mean();
    r.asymmetric_stopped_regret_N = learner_stopped_cost.mean() - expert_full_cost.mean();
    r.mean_handoff_time_N = handoff_time.mean();
    r.expert_alpha_M = expert_alpha_M.mean();
    r.expert_alpha_N = expert_alpha_N.mean();
    r.late_stop_risk_N = late_stop_N.mean();
    r.stopped_hellinger_sq = std::numeric_limits<double>::quiet_NaN();  // not estimable
    r.state_tv_expert = std::numeric_limits<double>::quiet_NaN();
    r.expert_variance = expert_variance(N, expert);  // DP-exact even here

    CiHalfwidths ci;
    ci.alpha_M = alpha_M.ci_halfwidth();
    ci.alpha_N = alpha_N.ci_halfwidth();
    // Difference-of-means half-widths combine in quadrature.
    auto combine = [](const MeanAccumulator& a, const MeanAccumulator& b) {
        return std::sqrt(a.ci_halfwidth() * a.ci_halfwidth() +
                         b.ci_halfwidth() * b.ci_halfwidth());
    };
    ci.stopped_regret_N = combine(learner_stopped_cost, expert_stopped_cost);
    ci.switched_regret_N = combine(switched_cost, expert_full_cost);
    ci.asymmetric_stopped_regret_N = combine(learner_stopped_cost, expert_full_cost);
    r.ci = ci;
    return r;
}

} // namespace seqrej
