#include "seqrej/scenarios.hpp"

#include <algorithm>
#include <cmath>

#include "seqrej/log.hpp"
#include "seqrej/stopping.hpp"

namespace seqrej {

namespace {

std::vector<double> random_prob_row(int n, Rng& rng) {
    std::vector<double> row(n);
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        row[i] = -std::log(1.0 - rng.next_unit());  // Exp(1), Dirichlet(1) weights
        sum += row[i];
    }
    if (sum == 0.0) {
        std::fill(row.begin(), row.end(), 1.0 / n);
    } else {
        for (double& x : row) x /= sum;
    }
    return row;
}

constexpr int kLeft = 0;
constexpr int kRight = 1;

// Chain transition row for one (s, a) cell. Forward moves succeed with
// probability (1 - slip) and, in the windy environment, are pushed back with
// probability wind on top of that. The goal state is absorbing.
std::vector<double> chain_row(int length, int s, int a, double wind, double slip) {
    std::vector<double> row(length, 0.0);
    const int goal = length - 1;
    if (s == goal) {
        row[goal] = 1.0;
        return row;
    }
    if (a == kLeft) {
        row[std::max(s - 1, 0)] = 1.0;
        return row;
    }
    row[s] += slip;
    row[std::min(s + 1, goal)] += (1.0 - slip) * (1.0 - wind);
    row[std::max(s - 1, 0)] += (1.0 - slip) * wind;
    return row;
}

TabularMDP make_chain_mdp(int length, int horizon, double wind, double slip,
                          double start_ratio) {
    TabularMDP mdp;
    mdp.num_states = length;
    mdp.num_actions = 2;
    mdp.horizon = horizon;
    if (start_ratio <= 0.0) {
        mdp.initial_dist.assign(length, 0.0);
        mdp.initial_dist[0] = 1.0;
    } else {
        mdp.initial_dist.resize(length);
        double z = 0.0;
        for (int s = 0; s < length; ++s) {
            mdp.initial_dist[s] = std::pow(start_ratio, s);
            z += mdp.initial_dist[s];
        }
        for (double& x : mdp.initial_dist) x /= z;
    }
    const int goal = length - 1;
    mdp.transitions.reserve(static_cast<std::size_t>(horizon - 1) * length * 2 * length);
    for (int h = 0; h + 1 < horizon; ++h)
        for (int s = 0; s < length; ++s)
            for (int a = 0; a < 2; ++a) {
                const auto row = chain_row(length, s, a, wind, slip);
                mdp.transitions.insert(mdp.transitions.end(), row.begin(), row.end());
            }
    // Distance-to-goal cost, normalized so any trajectory costs at most 1.
    mdp.costs.resize(static_cast<std::size_t>(horizon) * length * 2);
    for (int h = 0; h < horizon; ++h)
        for (int s = 0; s < length; ++s)
            for (int a = 0; a < 2; ++a)
                mdp.costs[(static_cast<std::size_t>(h) * length + s) * 2 + a] =
                    static_cast<double>(goal - s) / (static_cast<double>(goal) * horizon);
    mdp.cost_cap = 1.0;
    mdp.validate();
    return mdp;
}

} // namespace

namespace {

// Expert state occupancy d_h(s) in M by forward induction.
std::vector<double> expert_occupancy(const TabularMDP& mdp, const Policy& expert) {
    const int S = mdp.num_states, H = mdp.horizon;
    std::vector<double> occ(static_cast<std::size_t>(H) * S, 0.0);
    std::vector<double> cur = mdp.initial_dist;
    for (int h = 0; h < H; ++h) {
        for (int s = 0; s < S; ++s) occ[static_cast<std::size_t>(h) * S + s] = cur[s];
        if (h + 1 == H) break;
        std::vector<double> next(S, 0.0);
        for (int s = 0; s < S; ++s) {
            if (cur[s] == 0.0) continue;
            for (int a = 0; a < mdp.num_actions; ++a) {
                const double pa = expert.prob_at(h, s, a);
                if (pa == 0.0) continue;
                const auto row = mdp.transition_row(h, s, a);
                for (int s2 = 0; s2 < S; ++s2) next[s2] += cur[s] * pa * row[s2];
            }
        }
        cur = std::move(next);
    }
    return occ;
}

} // namespace

ScenarioBundle make_windy_chain(const WindyChainParams& params, std::uint64_t seed) {
    if (params.length < 2 || params.horizon < 1)
        throw ConfigError("make_windy_chain: need length >= 2 and horizon >= 1");
    if (params.wind < 0.0 || params.wind > 1.0)
        throw ConfigError("make_windy_chain: wind must lie in [0,1]");

    ScenarioBundle bundle;
    bundle.M = make_chain_mdp(params.length, params.horizon, 0.0, params.slip,
                              params.start_ratio);
    bundle.N = make_chain_mdp(params.length, params.horizon, params.wind, params.slip,
                              params.start_ratio);

    const int S = params.length, H = params.horizon;
    const std::size_t cells = static_cast<std::size_t>(H) * S;
    Rng rng = Rng(seed).split("windy-chain", 0);

    std::vector<Policy> members;
    const Policy expert =
        params.deterministic_class
            ? Policy::constant(S, 2, H, kRight)
            : [&] {
                  std::vector<double> table(cells * 2);
                  for (std::size_t c = 0; c < cells; ++c) {
                      table[c * 2 + kLeft] = 0.05;
                      table[c * 2 + kRight] = 0.95;
                  }
                  return Policy::make_stochastic(S, 2, H, std::move(table));
              }();
    const std::vector<double> occ = expert_occupancy(bundle.M, expert);
    auto flip_prob = [&](std::size_t cell) {
        return occ[cell] < params.occupancy_threshold ? params.perturb_cell_prob
                                                      : params.on_path_perturb_prob;
    };

    if (params.deterministic_class) {
        for (int i = 0; i + 1 < params.class_size; ++i) {
            std::vector<int> table(cells, kRight);
            for (std::size_t c = 0; c < cells; ++c)
                if (rng.next_unit() < flip_prob(c)) table[c] = kLeft;
            members.push_back(Policy::make_deterministic(S, 2, H, std::move(table)));
        }
    } else {
        // Clones drift left on perturbed cells, each with its own drift
        // strength; with the perturbations living off the expert's source
        // support, clones tie the expert on likelihood yet act badly exactly
        // where the wind sends the system.
        for (int i = 0; i + 1 < params.class_size; ++i) {
            std::vector<double> table = expert.probs;
            for (std::size_t c = 0; c < cells; ++c) {
                if (rng.next_unit() < flip_prob(c)) {
                    const double left = 0.75 + 0.23 * rng.next_unit();
                    table[c * 2 + kLeft] = left;
                    table[c * 2 + kRight] = 1.0 - left;
                }
            }
            members.push_back(Policy::make_stochastic(S, 2, H, std::move(table)));
        }
    }
    members.push_back(expert);
    bundle.expert = expert;
    bundle.expert_id = static_cast<int>(members.size()) - 1;
    bundle.pc = PolicyClass(std::move(members));
    bundle.pi_train = bundle.expert;
    bundle.pi_test = bundle.expert;
    return bundle;
}

ScenarioBundle make_windy_chain(int length, int horizon, double wind,
                                std::uint64_t seed) {
    WindyChainParams params;
    params.length = length;
    params.horizon = horizon;
    params.wind = wind;
    return make_windy_chain(params, seed);
}

PqLowerBoundBundle make_pq_lower_bound(int d, double epsilon, double delta_param,
                                       std::uint64_t seed) {
    if (d < 1) throw ConfigError("make_pq_lower_bound: d must be >= 1");
    if (epsilon <= 0.0 || epsilon > 1.0 / 16.0)
        throw ConfigError("make_pq_lower_bound: epsilon must lie in (0, 1/16]");
    const double delta = delta_param < 0.0 ? 4.0 * epsilon : delta_param;
    if (delta > 0.5) throw ConfigError("make_pq_lower_bound: Delta must be <= 1/2");

    const int n_states = static_cast<int>(std::ceil(d / (2.0 * epsilon)));
    PqLowerBoundBundle bundle;

    auto make_env = [&](int support) {
        TabularMDP env;
        env.num_states = n_states;
        env.num_actions = 2;
        env.horizon = 1;
        env.initial_dist.assign(n_states, 0.0);
        for (int s = 0; s < support; ++s) env.initial_dist[s] = 1.0 / support;
        env.costs.assign(static_cast<std::size_t>(n_states) * 2, 0.0);
        env.cost_cap = 1.0;
        env.validate();
        return env;
    };
    bundle.p_env = make_env(n_states);
    bundle.q_env = make_env(d);

    std::vector<std::vector<int>> sigmas;
    if (d <= 16) {
        const std::uint32_t count = 1u << d;
        sigmas.reserve(count);
        for (std::uint32_t bits = 0; bits < count; ++bits) {
            std::vector<int> sigma(d);
            for (int x = 0; x < d; ++x) sigma[x] = (bits >> x) & 1u ? 1 : -1;
            sigmas.push_back(std::move(sigma));
        }
    } else {
        const int count = 4096;
        SEQREJ_WARN("make_pq_lower_bound: d=%d too large to enumerate 2^d policies; "
                    "drawing a seeded subsample of %d", d, count);
        bundle.subsampled = true;
        Rng rng = Rng(seed).split("pq-sigma", 0);
        sigmas.reserve(count);
        for (int i = 0; i < count; ++i) {
            std::vector<int> sigma(d);
            for (int x = 0; x < d; ++x) sigma[x] = rng.next_unit() < 0.5 ? -1 : 1;
            sigmas.push_back(std::move(sigma));
        }
    }

    std::vector<Policy> members;
    members.reserve(sigmas.size());
    bundle.costs_per_sigma.reserve(sigmas.size());
    for (const std::vector<int>& sigma : sigmas) {
        std::vector<double> table(static_cast<std::size_t>(n_states) * 2);
        std::vector<double> cost(static_cast<std::size_t>(n_states) * 2, 0.0);
        for (int x = 0; x < n_states; ++x) {
            const double p1 = x < d ? 0.5 + sigma[x] * delta : 0.5;
            table[x * 2 + 0] = 1.0 - p1;
            table[x * 2 + 1] = p1;
            if (x < d) {
                cost[x * 2 + 1] = sigma[x] == -1 ? 1.0 : 0.0;
                cost[x * 2 + 0] = sigma[x] == 1 ? 1.0 : 0.0;
            }
        }
        members.push_back(Policy::make_stochastic(n_states, 2, 1, std::move(table)));
        bundle.costs_per_sigma.push_back(std::move(cost));
    }
    bundle.sigma_policies = PolicyClass(std::move(members));
    bundle.sigma_bits = std::move(sigmas);
    return bundle;
}

namespace {

// Pr_{E, behavior}(some step has member action != behavior action), exactly.
double exact_deviation_probability(const TabularMDP& env, const Policy& behavior,
                                   const Policy& member) {
    const TrajectoryDistribution law = enumerate_trajectory_distribution(env, behavior);
    double mass = 0.0;
    for (const auto& [t, p] : law.entries) {
        const std::span<const int> states(t.states.data(), t.states.size());
        if (deviation_time(behavior, member, states) <= env.horizon) mass += p;
    }
    return mass;
}

} // namespace

ScenarioBundle make_random_tabular(const RandomTabularParams& params,
                                   std::uint64_t seed) {
    const int S = params.num_states, A = params.num_actions, H = params.horizon;
    if (S < 1 || A < 2 || H < 1 || params.class_size < 1)
        throw ConfigError("make_random_tabular: invalid dimensions");
    Rng rng = Rng(seed).split("random-tabular", 0);

    auto make_env = [&](Rng env_rng) {
        TabularMDP env;
        env.num_states = S;
        env.num_actions = A;
        env.horizon = H;
        env.initial_dist = random_prob_row(S, env_rng);
        for (int h = 0; h + 1 < H; ++h)
            for (int s = 0; s < S; ++s)
                for (int a = 0; a < A; ++a) {
                    const auto row = random_prob_row(S, env_rng);
                    env.transitions.insert(env.transitions.end(), row.begin(), row.end());
                }
        env.costs.resize(static_cast<std::size_t>(H) * S * A);
        double cap = 0.0;
        for (int h = 0; h < H; ++h) {
            double step_max = 0.0;
            for (int s = 0; s < S; ++s)
                for (int a = 0; a < A; ++a) {
                    const double c = env_rng.next_unit();
                    env.costs[(static_cast<std::size_t>(h) * S + s) * A + a] = c;
                    step_max = std::max(step_max, c);
                }
            cap += step_max;
        }
        env.cost_cap = cap;
        env.validate();
        return env;
    };
    ScenarioBundle bundle;
    bundle.M = make_env(rng.split("env-M", 0));
    bundle.N = make_env(rng.split("env-N", 0));
    // M and N share costs and differ only in dynamics.
    bundle.N.costs = bundle.M.costs;
    bundle.N.cost_cap = bundle.M.cost_cap;
    bundle.corruption = params.corruption;
    bundle.off_policy = params.off_policy;

    const std::size_t cells = static_cast<std::size_t>(H) * S;
    Rng class_rng = rng.split("class", 0);
    auto random_deterministic = [&](Rng& r) {
        std::vector<int> table(cells);
        for (std::size_t c = 0; c < cells; ++c)
            table[c] = static_cast<int>(r.next_below(A));
        return Policy::make_deterministic(S, A, H, std::move(table));
    };
    auto perturb_deterministic = [&](const Policy& src, Rng& r, double flip_prob) {
        std::vector<int> table = src.actions;
        for (std::size_t c = 0; c < cells; ++c) {
            if (r.next_unit() < flip_prob) {
                const int other = static_cast<int>(r.next_below(A - 1));
                table[c] = other >= table[c] ? other + 1 : other;
            }
        }
        return Policy::make_deterministic(S, A, H, std::move(table));
    };

    std::vector<Policy> members;
    if (params.stochastic) {
        std::vector<double> expert_table;
        Rng er = class_rng.split("expert", 0);
        for (std::size_t c = 0; c < cells; ++c) {
            const auto row = random_prob_row(A, er);
            expert_table.insert(expert_table.end(), row.begin(), row.end());
        }
        const Policy expert = Policy::make_stochastic(S, A, H, expert_table);
        members.push_back(expert);
        for (int i = 1; i < params.class_size; ++i) {
            Rng mr = class_rng.split("member", static_cast<std::uint64_t>(i));
            std::vector<double> table = expert_table;
            for (std::size_t c = 0; c < cells; ++c) {
                if (mr.next_unit() < 0.25) {
                    const auto row = random_prob_row(A, mr);
                    std::copy(row.begin(), row.end(), table.begin() + c * A);
                }
            }
            members.push_back(Policy::make_stochastic(S, A, H, std::move(table)));
        }
        bundle.expert = expert;
    } else {
        Rng er = class_rng.split("expert", 0);
        const Policy expert = random_deterministic(er);
        members.push_back(expert);
        for (int i = 1; i < params.class_size; ++i) {
            Rng mr = class_rng.split("member", static_cast<std::uint64_t>(i));
            members.push_back(perturb_deterministic(expert, mr, 0.25));
        }
        bundle.expert = expert;
    }
    bundle.expert_id = 0;
    bundle.pc = PolicyClass(std::move(members));

    if (params.off_policy) {
        if (params.stochastic)
            throw ConfigError("make_random_tabular: off-policy mode is deterministic only");
        Rng tr = rng.split("pi-train", 0);
        Rng te = rng.split("pi-test", 0);
        bundle.pi_train = perturb_deterministic(bundle.expert, tr, 0.2);
        bundle.pi_test = perturb_deterministic(bundle.expert, te, 0.2);
        double best = 1.0;
        for (int id = 0; id < bundle.pc.size(); ++id) {
            const double dm =
                exact_deviation_probability(bundle.M, bundle.pi_train, bundle.pc[id]);
            const double dn =
                exact_deviation_probability(bundle.N, bundle.pi_test, bundle.pc[id]);
            best = std::min(best, std::max(dm, dn));
        }
        bundle.delta_off = best;
    } else {
        bundle.pi_train = bundle.expert;
        bundle.pi_test = bundle.expert;
    }
    return bundle;
}

std::vector<int> greedy_hellinger_committee(const PolicyClass& pc,
                                            std::span<const int> candidate_ids,
                                            int base_id, const Dataset& test, int K) {
    if (K < 1) throw ConfigError("greedy_hellinger_committee: K must be >= 1");
    if (candidate_ids.empty())
        throw EmptyInputError("greedy_hellinger_committee: no candidates");
    const Policy& base = pc[base_id];
    std::vector<std::pair<double, int>> scored;
    scored.reserve(candidate_ids.size());
    for (int id : candidate_ids) {
        double score = 0.0;
        for (const Trajectory& t : test)
            for (std::size_t h = 0; h < t.states.size(); ++h)
                score +=
                    action_hellinger_sq(pc[id], base, static_cast<int>(h), t.states[h]);
        scored.push_back({score, id});
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        return a.first > b.first || (a.first == b.first && a.second < b.second);
    });
    std::vector<int> committee;
    for (int k = 0; k < K && k < static_cast<int>(scored.size()); ++k)
        committee.push_back(scored[k].second);
    std::sort(committee.begin(), committee.end());
    return committee;
}

SampledData sample_datasets(const ScenarioBundle& bundle, int m, int n,
                            std::uint64_t seed) {
    SampledData data;
    const Rng master(seed);
    const int A = bundle.M.num_actions;
    for (int i = 0; i < m; ++i) {
        Rng stream = master.split("train", static_cast<std::uint64_t>(i));
        Trajectory t = sample_trajectory(bundle.M, bundle.pi_train, stream);
        if (bundle.corruption > 0.0) {
            Rng noise = master.split("corrupt", static_cast<std::uint64_t>(i));
            for (int& a : t.actions) {
                if (noise.next_unit() < bundle.corruption) {
                    const int other = static_cast<int>(noise.next_below(A - 1));
                    a = other >= a ? other + 1 : other;
                }
            }
        }
        data.train.push_back(std::move(t));
    }
    for (int j = 0; j < n; ++j) {
        Rng stream = master.split("test", static_cast<std::uint64_t>(j));
        Trajectory t = sample_trajectory(bundle.N, bundle.pi_test, stream);
        t.actions.clear();  // unlabeled
        data.test.push_back(std::move(t));
    }
    return data;
}

} // namespace seqrej
