#include "seqrej/stopping.hpp"

#include <algorithm>

namespace seqrej {

namespace {

// Shared evaluation over a state prefix. Returns the 1-based trigger step, or
// prefix length + 1 if the rule never fires on this prefix.
int first_trigger(const StoppingRule& rule, const PolicyClass& pc,
                  std::span<const int> states) {
    const int len = static_cast<int>(states.size());
    switch (rule.mode) {
        case StopMode::FirstDisagreement: {
            const Policy& base = pc[rule.base_id];
            for (int h = 0; h < len; ++h) {
                const int s = states[h];
                const int b = base.action_at(h, s);
                for (int id : rule.validator_ids)
                    if (pc[id].action_at(h, s) != b) return h + 1;
            }
            return len + 1;
        }
        case StopMode::HellingerBudget: {
            const Policy& base = pc[rule.base_id];
            std::vector<double> cum(rule.validator_ids.size(), 0.0);
            for (int h = 0; h < len; ++h) {
                const int s = states[h];
                for (std::size_t v = 0; v < rule.validator_ids.size(); ++v) {
                    cum[v] += action_hellinger_sq(pc[rule.validator_ids[v]], base, h, s);
                    if (cum[v] > rule.theta) return h + 1;
                }
            }
            return len + 1;
        }
        case StopMode::PerStep: {
            for (int h = 0; h < len; ++h) {
                const int s = states[h];
                const int b = pc[rule.per_step_base_ids[h]].action_at(h, s);
                for (int id : rule.per_step_committees[h])
                    if (pc[id].action_at(h, s) != b) return h + 1;
            }
            return len + 1;
        }
    }
    return len + 1;
}

void check_rule(const StoppingRule& rule, const PolicyClass& pc) {
    auto check_id = [&](int id) {
        if (id < 0 || id >= pc.size())
            throw ValidationError("StoppingRule: policy id out of range");
    };
    if (rule.mode != StopMode::HellingerBudget && !pc.deterministic())
        throw ValidationError(
            "StoppingRule: disagreement modes need a deterministic class");
    if (rule.mode == StopMode::PerStep) {
        const int H = pc.horizon();
        if (static_cast<int>(rule.per_step_committees.size()) != H ||
            static_cast<int>(rule.per_step_base_ids.size()) != H)
            throw ValidationError("StoppingRule: per-step tables must have one entry per step");
        for (int id : rule.per_step_base_ids) check_id(id);
        for (const auto& committee : rule.per_step_committees)
            for (int id : committee) check_id(id);
        return;
    }
    check_id(rule.base_id);
    for (int id : rule.validator_ids) check_id(id);
    if (rule.mode == StopMode::HellingerBudget && rule.theta <= 0.0)
        throw ValidationError("StoppingRule: theta must be positive");
}

} // namespace

int stop_time(const StoppingRule& rule, const PolicyClass& pc,
              std::span<const int> state_traj) {
    check_rule(rule, pc);
    if (static_cast<int>(state_traj.size()) != pc.horizon())
        throw ValidationError("stop_time: state trajectory length != horizon");
    return first_trigger(rule, pc, state_traj);
}

int deviation_time(const Policy& base, const Policy& comparator,
                   std::span<const int> state_traj) {
    for (int h = 0; h < static_cast<int>(state_traj.size()); ++h)
        if (comparator.action_at(h, state_traj[h]) != base.action_at(h, state_traj[h]))
            return h + 1;
    return static_cast<int>(state_traj.size()) + 1;
}

int deviation_time_hellinger(const Policy& base, const Policy& comparator,
                             std::span<const int> state_traj, double theta) {
    double cum = 0.0;
    for (int h = 0; h < static_cast<int>(state_traj.size()); ++h) {
        cum += action_hellinger_sq(comparator, base, h, state_traj[h]);
        if (cum > theta) return h + 1;
    }
    return static_cast<int>(state_traj.size()) + 1;
}

StopPredicate make_stop_predicate(const StoppingRule& rule, const PolicyClass& pc) {
    check_rule(rule, pc);
    StoppingRule r = rule;
    const PolicyClass* cls = &pc;
    return [r, cls](std::span<const int> prefix) {
        // The walker only grows prefixes that have not yet triggered, so the
        // rule fires at the last state iff it fires anywhere on the prefix.
        return first_trigger(r, *cls, prefix) <= static_cast<int>(prefix.size());
    };
}

SelectiveRollout run_selective(const TabularMDP& mdp, const SelectivePolicy& sel,
                               const PolicyClass& pc, std::uint64_t rng_seed) {
    Rng rng(rng_seed);
    return run_selective(mdp, sel, pc, rng);
}

SelectiveRollout run_selective(const TabularMDP& mdp, const SelectivePolicy& sel,
                               const PolicyClass& pc, Rng& rng) {
    check_rule(sel.rule, pc);
    if (mdp.num_states != sel.base.num_states || mdp.num_actions != sel.base.num_actions ||
        mdp.horizon != sel.base.horizon)
        throw ConfigError("run_selective: base policy shape incompatible with MDP");
    SelectiveRollout out;
    int s = rng.next_categorical(mdp.initial_dist);
    for (int h = 0; h < mdp.horizon; ++h) {
        out.prefix.states.push_back(s);
        const std::span<const int> seen(out.prefix.states.data(), out.prefix.states.size());
        if (first_trigger(sel.rule, pc, seen) == h + 1) {
            out.tau = h + 1;
            return out;
        }
        const int a = sel.base.deterministic()
                          ? sel.base.action_at(h, s)
                          : rng.next_categorical(sel.base.row(h, s));
        out.prefix.actions.push_back(a);
        out.stopped_cost += mdp.cost(h, s, a);
        if (h + 1 < mdp.horizon) s = rng.next_categorical(mdp.transition_row(h, s, a));
    }
    out.tau = mdp.horizon + 1;
    return out;
}

SwitchedRollout run_switched(const TabularMDP& mdp, const SelectivePolicy& sel,
                             const Policy& expert, const PolicyClass& pc,
                             std::uint64_t rng_seed) {
    Rng rng(rng_seed);
    return run_switched(mdp, sel, expert, pc, rng);
}

SwitchedRollout run_switched(const TabularMDP& mdp, const SelectivePolicy& sel,
                             const Policy& expert, const PolicyClass& pc, Rng& rng) {
    check_rule(sel.rule, pc);
    SwitchedRollout out;
    out.tau = mdp.horizon + 1;
    bool switched = false;
    int s = rng.next_categorical(mdp.initial_dist);
    for (int h = 0; h < mdp.horizon; ++h) {
        out.traj.states.push_back(s);
        if (!switched) {
            const std::span<const int> seen(out.traj.states.data(), out.traj.states.size());
            if (first_trigger(sel.rule, pc, seen) == h + 1) {
                switched = true;
                out.tau = h + 1;
            }
        }
        const Policy& acting = switched ? expert : sel.base;
        const int a = acting.deterministic() ? acting.action_at(h, s)
                                             : rng.next_categorical(acting.row(h, s));
        out.traj.actions.push_back(a);
        out.full_cost += mdp.cost(h, s, a);
        if (h + 1 < mdp.horizon) s = rng.next_categorical(mdp.transition_row(h, s, a));
    }
    return out;
}

} // namespace seqrej
