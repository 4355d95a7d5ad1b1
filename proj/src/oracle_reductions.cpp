#include "seqrej/oracle_reductions.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace seqrej {

int cutoff_matrix_entry(const StopTimeTable& table, int row, CutoffColumnIndex col) {
    if (col.trajectory < 0 || col.trajectory >= table.n || col.cutoff < 1 ||
        col.cutoff > table.horizon)
        throw ValidationError("cutoff_matrix_entry: column index out of range");
    return table.row(row)[col.trajectory] <= col.cutoff ? 1 : 0;
}

std::vector<int> committee_cutoff_vector(const StopTimeTable& table,
                                         std::span<const int> committee_rows) {
    std::vector<int> h(table.n, table.horizon + 1);
    for (int r : committee_rows)
        for (int j = 0; j < table.n; ++j) h[j] = std::min(h[j], table.row(r)[j]);
    return h;
}

double cutoff_payoff(const StopTimeTable& table, int row, std::span<const int> h) {
    const auto x = table.row(row);
    int hits = 0;
    for (int j = 0; j < table.n; ++j)
        if (x[j] < h[j]) ++hits;
    return static_cast<double>(hits) / table.n;
}

std::vector<double> direct_objectives_scaled(
    const StopTimeTable& table, const std::vector<std::vector<int>>& history,
    const std::vector<std::vector<double>>& alpha_times_n) {
    std::vector<double> obj(table.rows(), 0.0);
    for (int r = 0; r < table.rows(); ++r) {
        const auto x = table.row(r);
        double total = 0.0;
        for (const auto& h : history)
            for (int j = 0; j < table.n; ++j)
                if (x[j] < h[j]) total += 1.0;
        for (int j = 0; j < table.n; ++j)
            for (int c = 1; c <= table.horizon; ++c)
                if (x[j] <= c) total += alpha_times_n[j][c - 1];
        obj[r] = total;
    }
    return obj;
}

std::vector<double> mil_objectives(const StopTimeTable& table,
                                   const std::vector<std::vector<int>>& history,
                                   const std::vector<std::vector<double>>& alpha_times_n) {
    // w_{j,c} aggregates the history by cutoff value, then adds n alpha.
    std::vector<std::vector<double>> w(table.n,
                                       std::vector<double>(table.horizon, 0.0));
    for (const auto& h : history)
        for (int j = 0; j < table.n; ++j) {
            const int c = h[j] - 1;
            if (c >= 1 && c <= table.horizon) w[j][c - 1] += 1.0;
        }
    for (int j = 0; j < table.n; ++j)
        for (int c = 1; c <= table.horizon; ++c) w[j][c - 1] += alpha_times_n[j][c - 1];

    std::vector<double> obj(table.rows(), 0.0);
    for (int r = 0; r < table.rows(); ++r) {
        const auto x = table.row(r);
        double total = 0.0;
        for (int j = 0; j < table.n; ++j) {
            // Bag B_{j,c} is positive iff the policy deviates within the first
            // c states, i.e. tau <= c.
            for (int c = x[j]; c <= table.horizon; ++c) total += w[j][c - 1];
        }
        obj[r] = total;
    }
    return obj;
}

std::vector<double> mil_multiclass_objectives(
    const PolicyClass& pc, const Policy& base, const Dataset& test,
    std::span<const int> member_ids, const std::vector<std::vector<int>>& history,
    const std::vector<std::vector<double>>& alpha_times_n) {
    const int n = static_cast<int>(test.size());
    const int H = pc.horizon();
    std::vector<std::vector<double>> w(n, std::vector<double>(H, 0.0));
    for (const auto& h : history)
        for (int j = 0; j < n; ++j) {
            const int c = h[j] - 1;
            if (c >= 1 && c <= H) w[j][c - 1] += 1.0;
        }
    for (int j = 0; j < n; ++j)
        for (int c = 1; c <= H; ++c) w[j][c - 1] += alpha_times_n[j][c - 1];

    std::vector<double> obj(member_ids.size(), 0.0);
    for (std::size_t r = 0; r < member_ids.size(); ++r) {
        const Policy& pi = pc[member_ids[r]];
        double total = 0.0;
        for (int j = 0; j < n; ++j) {
            for (int c = 1; c <= H; ++c) {
                if (w[j][c - 1] == 0.0) continue;
                // Augmented bag: every (h, s_jh, a) with a != base action up to
                // step c; positive iff pi predicts one of those labels.
                bool positive = false;
                for (int h = 0; h < c && !positive; ++h) {
                    const int s = test[j].states[h];
                    const int base_a = base.action_at(h, s);
                    for (int a = 0; a < pc[member_ids[r]].num_actions; ++a) {
                        if (a == base_a) continue;
                        if (pi.action_at(h, s) == a) {
                            positive = true;
                            break;
                        }
                    }
                }
                if (positive) total += w[j][c - 1];
            }
        }
        obj[r] = total;
    }
    return obj;
}

namespace {

int argmax_smallest_id(const StopTimeTable& table, const std::vector<double>& obj) {
    int best = 0;
    for (int r = 1; r < table.rows(); ++r) {
        if (obj[r] > obj[best] ||
            (obj[r] == obj[best] && table.member_ids[r] < table.member_ids[best]))
            best = r;
    }
    return best;
}

} // namespace

int perturbed_best_response_direct(const StopTimeTable& table,
                                   const std::vector<std::vector<int>>& history,
                                   const std::vector<std::vector<double>>& alpha_times_n) {
    if (table.rows() == 0) throw EmptyInputError("perturbed_best_response: empty space");
    const std::vector<double> obj = direct_objectives_scaled(table, history, alpha_times_n);
    return table.member_ids[argmax_smallest_id(table, obj)];
}

int perturbed_best_response_mil(const StopTimeTable& table,
                                const std::vector<std::vector<int>>& history,
                                const std::vector<std::vector<double>>& alpha_times_n) {
    if (table.rows() == 0) throw EmptyInputError("perturbed_best_response: empty space");
    const std::vector<double> obj = mil_objectives(table, history, alpha_times_n);
    return table.member_ids[argmax_smallest_id(table, obj)];
}

StopTimeTable quotient_by_stop_times(const StopTimeTable& table) {
    std::map<std::vector<int>, int> reps;  // stop-time vector -> smallest id row
    for (int r = 0; r < table.rows(); ++r) {
        const auto row = table.row(r);
        std::vector<int> key(row.begin(), row.end());
        auto [it, inserted] = reps.emplace(std::move(key), r);
        if (!inserted && table.member_ids[r] < table.member_ids[it->second])
            it->second = r;
    }
    std::vector<int> rows;
    rows.reserve(reps.size());
    for (const auto& [_, r] : reps) rows.push_back(r);
    std::sort(rows.begin(), rows.end(),
              [&](int a, int b) { return table.member_ids[a] < table.member_ids[b]; });

    StopTimeTable out;
    out.n = table.n;
    out.horizon = table.horizon;
    for (int r : rows) {
        out.member_ids.push_back(table.member_ids[r]);
        const auto row = table.row(r);
        out.tau.insert(out.tau.end(), row.begin(), row.end());
    }
    return out;
}

ValidatorDistribution ftpl_engine_from_table(const StopTimeTable& full_table, double rho,
                                             const FtplConfig& cfg) {
    if (rho <= 0.0 || rho >= 1.0) throw ConfigError("ftpl_engine: rho must lie in (0,1)");
    const StopTimeTable table = quotient_by_stop_times(full_table);
    const int K = static_cast<int>(std::ceil(1.0 / rho));
    const int T = cfg.rounds;
    const double scale = cfg.perturbation_scale > 0.0
                             ? cfg.perturbation_scale
                             : 10.0 * std::sqrt(static_cast<double>(T)) /
                                   (static_cast<double>(table.n) * table.horizon);

    Rng rng = Rng(cfg.rng_seed).split("ftpl", 0);
    std::vector<std::vector<int>> history;  // committee cutoff vectors
    std::map<std::vector<int>, double> atom_weights;
    std::vector<std::vector<double>> alpha(table.n, std::vector<double>(table.horizon));
    std::vector<double> play_payoffs;  // u^t(pi^t) per round
    std::vector<std::vector<int>> round_h(T);

    // One perturbed best response = one draw from the round's play
    // distribution; the committee takes K independent draws of its own, the
    // same i.i.d.-K template as the Hedge engine.
    auto draw_from_play_distribution = [&]() {
        for (int j = 0; j < table.n; ++j)
            for (int c = 0; c < table.horizon; ++c)
                alpha[j][c] = table.n * scale * rng.next_unit();  // already n-scaled
        const std::vector<double> obj = mil_objectives(table, history, alpha);
        return argmax_smallest_id(table, obj);
    };

    for (int t = 0; t < T; ++t) {
        const int play = draw_from_play_distribution();
        std::vector<int> committee_rows(K);
        for (int k = 0; k < K; ++k) committee_rows[k] = draw_from_play_distribution();
        round_h[t] = committee_cutoff_vector(table, committee_rows);
        history.push_back(round_h[t]);
        play_payoffs.push_back(cutoff_payoff(table, play, round_h[t]));

        std::vector<int> ids(K);
        for (int k = 0; k < K; ++k) ids[k] = table.member_ids[committee_rows[k]];
        std::sort(ids.begin(), ids.end());
        atom_weights[std::move(ids)] += 1.0 / T;
    }

    ValidatorDistribution dist;
    dist.atoms.reserve(atom_weights.size());
    for (auto& [ids, w] : atom_weights) dist.atoms.push_back({ids, w});
    dist.target_rho = rho;
    dist.slack = 0.0;
    dist.rounds = T;

    // Empirical regret of the play sequence against the best fixed row.
    double played = 0.0;
    for (double u : play_payoffs) played += u;
    double best = 0.0;
    for (int r = 0; r < table.rows(); ++r) {
        double sum = 0.0;
        for (int t = 0; t < T; ++t) sum += cutoff_payoff(table, r, round_h[t]);
        best = std::max(best, sum);
    }
    dist.realized_regret = best - played;
    dist.regret_bound = std::numeric_limits<double>::quiet_NaN();  // reported, not certified
    dist.reg_completeness = std::numeric_limits<double>::quiet_NaN();
    dist.reg_soundness_sup = std::numeric_limits<double>::quiet_NaN();

    // Exact coverage certificate over the quotient (identical stop-time rows
    // have identical coverage, so the quotient sup equals the full sup).
    std::vector<double> coverage(table.rows(), 0.0);
    for (const auto& [ids, w] : atom_weights) {
        std::vector<int> rows;
        rows.reserve(ids.size());
        for (int id : ids) rows.push_back(table.row_of(id));
        const std::vector<int> h = committee_cutoff_vector(table, rows);
        for (int r = 0; r < table.rows(); ++r) coverage[r] += w * cutoff_payoff(table, r, h);
    }
    int witness = 0;
    for (int r = 1; r < table.rows(); ++r)
        if (coverage[r] > coverage[witness]) witness = r;
    dist.coverage_sup = coverage[witness];
    dist.coverage_witness_id = table.member_ids[witness];
    return dist;
}

ValidatorDistribution ftpl_engine(const VersionSpace& space, int base_id,
                                  const Dataset& test, double rho,
                                  const FtplConfig& cfg, const PolicyClass& pc) {
    if (std::find(space.member_ids.begin(), space.member_ids.end(), base_id) ==
        space.member_ids.end())
        throw ConfigError("ftpl_engine: base policy not in the version space");
    const StopTimeTable table = build_stop_time_table(
        pc, pc[base_id], space.member_ids, test, StopMode::FirstDisagreement, 0.0);
    return ftpl_engine_from_table(table, rho, cfg);
}

} // namespace seqrej
