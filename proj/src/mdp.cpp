#include "seqrej/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

namespace seqrej {

namespace {

void check_prob_row(std::span<const double> row, const char* what) {
    double sum = 0.0;
    for (double p : row) {
        if (p < 0.0) throw ValidationError(std::string(what) + ": negative probability");
        sum += p;
    }
    if (std::abs(sum - 1.0) > kProbTol)
        throw ValidationError(std::string(what) + ": row does not sum to 1");
}

} // namespace

void TabularMDP::validate() const {
    if (num_states <= 0 || num_actions <= 0 || horizon <= 0)
        throw ValidationError("TabularMDP: dimensions must be positive");
    if (initial_dist.size() != static_cast<std::size_t>(num_states))
        throw ValidationError("TabularMDP: initial_dist size mismatch");
    check_prob_row(initial_dist, "initial_dist");
    const std::size_t tr_size = static_cast<std::size_t>(std::max(horizon - 1, 0)) *
                                num_states * num_actions * num_states;
    if (transitions.size() != tr_size)
        throw ValidationError("TabularMDP: transitions size mismatch");
    for (int h = 0; h + 1 < horizon; ++h)
        for (int s = 0; s < num_states; ++s)
            for (int a = 0; a < num_actions; ++a)
                check_prob_row(transition_row(h, s, a), "transitions");
    if (costs.size() != static_cast<std::size_t>(horizon) * num_states * num_actions)
        throw ValidationError("TabularMDP: costs size mismatch");
    for (double c : costs)
        if (c < 0.0 || c > 1.0) throw ValidationError("TabularMDP: cost outside [0,1]");
}

Policy Policy::to_stochastic() const {
    if (!deterministic()) return *this;
    Policy out;
    out.kind = Kind::Stochastic;
    out.num_states = num_states;
    out.num_actions = num_actions;
    out.horizon = horizon;
    out.probs.assign(static_cast<std::size_t>(horizon) * num_states * num_actions, 0.0);
    for (int h = 0; h < horizon; ++h)
        for (int s = 0; s < num_states; ++s)
            out.probs[(static_cast<std::size_t>(h) * num_states + s) * num_actions +
                      action_at(h, s)] = 1.0;
    return out;
}

void Policy::validate() const {
    if (num_states <= 0 || num_actions <= 0 || horizon <= 0)
        throw ValidationError("Policy: dimensions must be positive");
    const std::size_t cells = static_cast<std::size_t>(horizon) * num_states;
    if (deterministic()) {
        if (actions.size() != cells) throw ValidationError("Policy: table size mismatch");
        for (int a : actions)
            if (a < 0 || a >= num_actions)
                throw ValidationError("Policy: action index out of range");
    } else {
        if (probs.size() != cells * num_actions)
            throw ValidationError("Policy: table size mismatch");
        for (int h = 0; h < horizon; ++h)
            for (int s = 0; s < num_states; ++s)
                check_prob_row(row(h, s), "policy row");
    }
}

Policy Policy::make_deterministic(int S, int A, int H, std::vector<int> table) {
    Policy p;
    p.kind = Kind::Deterministic;
    p.num_states = S;
    p.num_actions = A;
    p.horizon = H;
    p.actions = std::move(table);
    p.validate();
    return p;
}

Policy Policy::make_stochastic(int S, int A, int H, std::vector<double> table) {
    Policy p;
    p.kind = Kind::Stochastic;
    p.num_states = S;
    p.num_actions = A;
    p.horizon = H;
    p.probs = std::move(table);
    p.validate();
    return p;
}

Policy Policy::constant(int S, int A, int H, int action) {
    return make_deterministic(S, A, H,
                              std::vector<int>(static_cast<std::size_t>(H) * S, action));
}

bool same_shape(const Policy& a, const Policy& b) {
    return a.num_states == b.num_states && a.num_actions == b.num_actions &&
           a.horizon == b.horizon;
}

PolicyClass::PolicyClass(std::vector<Policy> ps) : policies(std::move(ps)) {
    if (policies.empty()) throw ValidationError("PolicyClass: empty");
    for (const Policy& p : policies) {
        p.validate();
        if (!same_shape(p, policies.front()) || p.kind != policies.front().kind)
            throw ValidationError("PolicyClass: incompatible member shapes");
    }
}

double TrajectoryDistribution::total_mass() const {
    double sum = 0.0;
    for (const auto& [t, p] : entries) sum += p;
    return sum;
}

void TrajectoryDistribution::validate() const {
    for (const auto& [t, p] : entries)
        if (p < 0.0) throw ValidationError("TrajectoryDistribution: negative mass");
    if (std::abs(total_mass() - 1.0) > kProbTol)
        throw ValidationError("TrajectoryDistribution: mass does not sum to 1");
}

namespace {

void check_compatible(const TabularMDP& mdp, const Policy& policy) {
    if (mdp.num_states != policy.num_states || mdp.num_actions != policy.num_actions ||
        mdp.horizon != policy.horizon)
        throw ConfigError("policy shape incompatible with MDP");
}

} // namespace

Trajectory sample_trajectory(const TabularMDP& mdp, const Policy& policy,
                             std::uint64_t rng_seed) {
    Rng rng(rng_seed);
    return sample_trajectory(mdp, policy, rng);
}

Trajectory sample_trajectory(const TabularMDP& mdp, const Policy& policy, Rng& rng) {
    check_compatible(mdp, policy);
    Trajectory traj;
    traj.states.reserve(mdp.horizon);
    traj.actions.reserve(mdp.horizon);
    int s = rng.next_categorical(mdp.initial_dist);
    for (int h = 0; h < mdp.horizon; ++h) {
        traj.states.push_back(s);
        const int a = policy.deterministic()
                          ? policy.action_at(h, s)
                          : rng.next_categorical(policy.row(h, s));
        traj.actions.push_back(a);
        if (h + 1 < mdp.horizon) s = rng.next_categorical(mdp.transition_row(h, s, a));
    }
    return traj;
}

namespace {

using OutcomeMap = std::map<Trajectory, double>;

struct EnumWalker {
    const TabularMDP& mdp;
    const Policy& base;
    const Policy* expert;       // non-null for switched enumeration
    const StopPredicate* stop;  // may be null
    std::size_t max_support;
    OutcomeMap out;

    std::vector<int> states;
    std::vector<int> actions;
    bool switched = false;

    void emit(double prob, bool full) {
        Trajectory t;
        t.states = states;
        t.actions = actions;
        if (!full) t.actions.pop_back();  // prefix ends at the stop-step state
        out[std::move(t)] += prob;
        if (out.size() > max_support)
            throw EnumerationTooLarge("trajectory enumeration exceeds support budget");
    }

    void walk(int h, int s, double prob) {
        states.push_back(s);
        actions.push_back(-1);  // placeholder for the pending action
        const bool was_switched = switched;
        if (!switched && stop &&
            (*stop)(std::span<const int>(states.data(), states.size()))) {
            if (expert == nullptr) {
                emit(prob, /*full=*/false);
                actions.pop_back();
                states.pop_back();
                return;
            }
            switched = true;
        }
        const Policy& acting = (switched && expert) ? *expert : base;
        for (int a = 0; a < mdp.num_actions; ++a) {
            const double pa = acting.prob_at(h, s, a);
            if (pa == 0.0) continue;
            actions.back() = a;
            if (h + 1 == mdp.horizon) {
                emit(prob * pa, /*full=*/true);
            } else {
                const auto row = mdp.transition_row(h, s, a);
                for (int s2 = 0; s2 < mdp.num_states; ++s2) {
                    if (row[s2] == 0.0) continue;
                    walk(h + 1, s2, prob * pa * row[s2]);
                }
            }
        }
        switched = was_switched;
        actions.pop_back();
        states.pop_back();
    }

    TrajectoryDistribution run() {
        for (int s = 0; s < mdp.num_states; ++s) {
            if (mdp.initial_dist[s] == 0.0) continue;
            walk(0, s, mdp.initial_dist[s]);
        }
        TrajectoryDistribution dist;
        dist.entries.assign(out.begin(), out.end());
        return dist;
    }
};

} // namespace

TrajectoryDistribution enumerate_trajectory_distribution(const TabularMDP& mdp,
                                                         const Policy& policy,
                                                         const StopPredicate* stop,
                                                         std::size_t max_support) {
    check_compatible(mdp, policy);
    EnumWalker walker{mdp, policy, nullptr, stop, max_support, {}, {}, {}, false};
    return walker.run();
}

TrajectoryDistribution enumerate_switched_distribution(const TabularMDP& mdp,
                                                       const Policy& base,
                                                       const Policy& expert,
                                                       const StopPredicate& stop,
                                                       std::size_t max_support) {
    check_compatible(mdp, base);
    check_compatible(mdp, expert);
    EnumWalker walker{mdp, base, &expert, &stop, max_support, {}, {}, {}, false};
    return walker.run();
}

double prefix_cost(const TabularMDP& mdp, const Trajectory& traj, int tau) {
    if (!traj.labeled()) throw ValidationError("prefix_cost: trajectory has no actions");
    if (tau < 1 || tau > mdp.horizon + 1) throw ValidationError("prefix_cost: tau out of range");
    double total = 0.0;
    const int steps = std::min<int>(tau - 1, static_cast<int>(traj.actions.size()));
    for (int h = 0; h < steps; ++h)
        total += mdp.cost(h, traj.states[h], traj.actions[h]);
    return total;
}

double log_loss(const Policy& policy, const Dataset& data) {
    if (data.empty()) throw EmptyInputError("log_loss: empty dataset");
    double total = 0.0;
    for (const Trajectory& t : data) {
        if (t.actions.size() != t.states.size())
            throw ValidationError("log_loss: dataset must be labeled and full-horizon");
        for (std::size_t h = 0; h < t.states.size(); ++h) {
            const double p = policy.prob_at(static_cast<int>(h), t.states[h], t.actions[h]);
            if (p <= 0.0) return std::numeric_limits<double>::infinity();
            total -= std::log(p);
        }
    }
    return total / static_cast<double>(data.size());
}

double action_hellinger_sq(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size())
        throw ValidationError("action_hellinger_sq: row length mismatch");
    double affinity = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) affinity += std::sqrt(p[i] * q[i]);
    return std::clamp(1.0 - affinity, 0.0, 1.0);
}

double action_hellinger_sq(const Policy& a, const Policy& b, int h, int s) {
    if (a.deterministic() && b.deterministic())
        return a.action_at(h, s) == b.action_at(h, s) ? 0.0 : 1.0;
    if (a.deterministic() || b.deterministic()) {
        // One-hot row against a stochastic row: affinity is sqrt of the mass
        // the stochastic row places on the deterministic action.
        const Policy& det = a.deterministic() ? a : b;
        const Policy& sto = a.deterministic() ? b : a;
        return std::clamp(1.0 - std::sqrt(sto.prob_at(h, s, det.action_at(h, s))), 0.0, 1.0);
    }
    return action_hellinger_sq(a.row(h, s), b.row(h, s));
}

double trajectory_hellinger_sq(const TrajectoryDistribution& a,
                               const TrajectoryDistribution& b) {
    // Both entry lists are sorted by outcome; merge to accumulate the affinity.
    double affinity = 0.0;
    std::size_t i = 0, j = 0;
    while (i < a.entries.size() && j < b.entries.size()) {
        const auto cmp = a.entries[i].first <=> b.entries[j].first;
        if (cmp < 0) {
            ++i;
        } else if (cmp > 0) {
            ++j;
        } else {
            affinity += std::sqrt(a.entries[i].second * b.entries[j].second);
            ++i;
            ++j;
        }
    }
    return std::clamp(1.0 - affinity, 0.0, 1.0);
}

Policy geometric_mixture_policy(const Policy& pi, const Policy& pi0) {
    if (!same_shape(pi, pi0))
        throw ValidationError("geometric_mixture_policy: shape mismatch");
    const Policy a = pi.to_stochastic();
    const Policy b = pi0.to_stochastic();
    Policy out = a;
    for (int h = 0; h < a.horizon; ++h) {
        for (int s = 0; s < a.num_states; ++s) {
            const std::size_t base =
                (static_cast<std::size_t>(h) * a.num_states + s) * a.num_actions;
            double z = 0.0;
            for (int ac = 0; ac < a.num_actions; ++ac) {
                out.probs[base + ac] = std::sqrt(a.probs[base + ac] * b.probs[base + ac]);
                z += out.probs[base + ac];
            }
            if (z == 0.0) {
                for (int ac = 0; ac < a.num_actions; ++ac)
                    out.probs[base + ac] = 1.0 / a.num_actions;
            } else {
                for (int ac = 0; ac < a.num_actions; ++ac) out.probs[base + ac] /= z;
            }
        }
    }
    return out;
}

bool is_stopped_entry(const Trajectory& t, int horizon) {
    (void)horizon;
    return t.actions.size() + 1 == t.states.size();
}

int entry_tau(const Trajectory& t, int horizon) {
    return is_stopped_entry(t, horizon) ? static_cast<int>(t.states.size()) : horizon + 1;
}

double stopped_mass(const TrajectoryDistribution& dist, int horizon) {
    double mass = 0.0;
    for (const auto& [t, p] : dist.entries)
        if (is_stopped_entry(t, horizon)) mass += p;
    return mass;
}

double expected_prefix_cost(const TabularMDP& mdp, const TrajectoryDistribution& dist) {
    double total = 0.0;
    for (const auto& [t, p] : dist.entries) {
        double c = 0.0;
        for (std::size_t h = 0; h < t.actions.size(); ++h)
            c += mdp.cost(static_cast<int>(h), t.states[h], t.actions[h]);
        total += p * c;
    }
    return total;
}

double expected_capped_stop_time(const TrajectoryDistribution& dist, int horizon) {
    double total = 0.0;
    for (const auto& [t, p] : dist.entries)
        total += p * std::min(entry_tau(t, horizon), horizon);
    return total;
}

double state_trajectory_tv(const TrajectoryDistribution& a,
                           const TrajectoryDistribution& b) {
    std::map<std::vector<int>, double> diff;
    for (const auto& [t, p] : a.entries) diff[t.states] += p;
    for (const auto& [t, p] : b.entries) diff[t.states] -= p;
    double tv = 0.0;
    for (const auto& [_, d] : diff) tv += std::abs(d);
    return 0.5 * tv;
}

} // namespace seqrej
