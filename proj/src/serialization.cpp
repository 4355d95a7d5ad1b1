#include "seqrej/serialization.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace seqrej {

using nlohmann::json;

namespace {

json number_or_null(double x) {
    if (std::isnan(x)) return nullptr;
    return x;
}

std::vector<std::vector<std::vector<std::vector<double>>>> nest_transitions(
    const TabularMDP& mdp) {
    std::vector<std::vector<std::vector<std::vector<double>>>> out;
    for (int h = 0; h + 1 < mdp.horizon; ++h) {
        std::vector<std::vector<std::vector<double>>> per_state;
        for (int s = 0; s < mdp.num_states; ++s) {
            std::vector<std::vector<double>> per_action;
            for (int a = 0; a < mdp.num_actions; ++a) {
                const auto row = mdp.transition_row(h, s, a);
                per_action.emplace_back(row.begin(), row.end());
            }
            per_state.push_back(std::move(per_action));
        }
        out.push_back(std::move(per_state));
    }
    return out;
}

} // namespace

std::string mdp_to_json(const TabularMDP& mdp) {
    json j;
    j["num_states"] = mdp.num_states;
    j["num_actions"] = mdp.num_actions;
    j["horizon"] = mdp.horizon;
    j["initial_dist"] = mdp.initial_dist;
    j["transitions"] = nest_transitions(mdp);
    std::vector<std::vector<std::vector<double>>> costs;
    for (int h = 0; h < mdp.horizon; ++h) {
        std::vector<std::vector<double>> per_state;
        for (int s = 0; s < mdp.num_states; ++s) {
            std::vector<double> per_action;
            for (int a = 0; a < mdp.num_actions; ++a) per_action.push_back(mdp.cost(h, s, a));
            per_state.push_back(std::move(per_action));
        }
        costs.push_back(std::move(per_state));
    }
    j["costs"] = costs;
    j["cost_cap"] = mdp.cost_cap;
    return j.dump(2);
}

TabularMDP mdp_from_json(const std::string& text) {
    try {
        const json j = json::parse(text);
        TabularMDP mdp;
        mdp.num_states = j.at("num_states").get<int>();
        mdp.num_actions = j.at("num_actions").get<int>();
        mdp.horizon = j.at("horizon").get<int>();
        mdp.initial_dist = j.at("initial_dist").get<std::vector<double>>();
        for (const auto& per_state : j.at("transitions"))
            for (const auto& per_action : per_state)
                for (const auto& row : per_action)
                    for (const auto& p : row) mdp.transitions.push_back(p.get<double>());
        for (const auto& per_state : j.at("costs"))
            for (const auto& per_action : per_state)
                for (const auto& c : per_action) mdp.costs.push_back(c.get<double>());
        mdp.cost_cap = j.at("cost_cap").get<double>();
        mdp.validate();
        return mdp;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad MDP file: ") + e.what());
    }
}

std::string policy_class_to_json(const PolicyClass& pc) {
    json j;
    j["kind"] = pc.deterministic() ? "deterministic" : "stochastic";
    j["num_states"] = pc.policies.front().num_states;
    j["num_actions"] = pc.policies.front().num_actions;
    j["horizon"] = pc.policies.front().horizon;
    json tables = json::array();
    for (const Policy& p : pc.policies) {
        json table = json::array();
        for (int h = 0; h < p.horizon; ++h) {
            json per_state = json::array();
            for (int s = 0; s < p.num_states; ++s) {
                if (p.deterministic()) {
                    per_state.push_back(p.action_at(h, s));
                } else {
                    const auto row = p.row(h, s);
                    per_state.push_back(std::vector<double>(row.begin(), row.end()));
                }
            }
            table.push_back(std::move(per_state));
        }
        tables.push_back(std::move(table));
    }
    j["policies"] = std::move(tables);
    return j.dump(2);
}

PolicyClass policy_class_from_json(const std::string& text) {
    try {
        const json j = json::parse(text);
        const bool det = j.at("kind").get<std::string>() == "deterministic";
        const int S = j.at("num_states").get<int>();
        const int A = j.at("num_actions").get<int>();
        const int H = j.at("horizon").get<int>();
        std::vector<Policy> members;
        for (const auto& table : j.at("policies")) {
            if (det) {
                std::vector<int> actions;
                for (const auto& per_state : table)
                    for (const auto& a : per_state) actions.push_back(a.get<int>());
                members.push_back(Policy::make_deterministic(S, A, H, std::move(actions)));
            } else {
                std::vector<double> probs;
                for (const auto& per_state : table)
                    for (const auto& row : per_state)
                        for (const auto& p : row) probs.push_back(p.get<double>());
                members.push_back(Policy::make_stochastic(S, A, H, std::move(probs)));
            }
        }
        return PolicyClass(std::move(members));
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad policy-class file: ") + e.what());
    }
}

std::string dataset_to_jsonl(const Dataset& data) {
    std::ostringstream out;
    for (const Trajectory& t : data) {
        json j;
        j["states"] = t.states;
        if (!t.actions.empty()) j["actions"] = t.actions;
        out << j.dump() << "\n";
    }
    return out.str();
}

Dataset dataset_from_jsonl(const std::string& text) {
    Dataset data;
    std::istringstream in(text);
    std::string line;
    try {
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const json j = json::parse(line);
            Trajectory t;
            t.states = j.at("states").get<std::vector<int>>();
            if (j.contains("actions")) t.actions = j.at("actions").get<std::vector<int>>();
            data.push_back(std::move(t));
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad dataset file: ") + e.what());
    }
    return data;
}

namespace {

json rule_to_json(const StoppingRule& rule) {
    json j;
    j["base_id"] = rule.base_id;
    j["validator_ids"] = rule.validator_ids;
    switch (rule.mode) {
        case StopMode::FirstDisagreement:
            j["mode"] = "first_disagreement";
            break;
        case StopMode::HellingerBudget:
            j["mode"] = json{{"hellinger", rule.theta}};
            break;
        case StopMode::PerStep:
            j["mode"] = json{{"per_step", json{{"base_ids", rule.per_step_base_ids},
                                               {"committees", rule.per_step_committees}}}};
            break;
    }
    return j;
}

StoppingRule rule_from_json(const json& j) {
    StoppingRule rule;
    rule.base_id = j.at("base_id").get<int>();
    rule.validator_ids = j.at("validator_ids").get<std::vector<int>>();
    const json& mode = j.at("mode");
    if (mode.is_string() && mode.get<std::string>() == "first_disagreement") {
        rule.mode = StopMode::FirstDisagreement;
    } else if (mode.is_object() && mode.contains("hellinger")) {
        rule.mode = StopMode::HellingerBudget;
        rule.theta = mode.at("hellinger").get<double>();
    } else if (mode.is_object() && mode.contains("per_step")) {
        rule.mode = StopMode::PerStep;
        rule.per_step_base_ids = mode.at("per_step").at("base_ids").get<std::vector<int>>();
        rule.per_step_committees =
            mode.at("per_step").at("committees").get<std::vector<std::vector<int>>>();
    } else {
        throw ConfigError("bad stopping-rule mode");
    }
    return rule;
}

json policy_to_json(const Policy& p) {
    json j;
    j["kind"] = p.deterministic() ? "deterministic" : "stochastic";
    j["num_states"] = p.num_states;
    j["num_actions"] = p.num_actions;
    j["horizon"] = p.horizon;
    json table = json::array();
    for (int h = 0; h < p.horizon; ++h) {
        json per_state = json::array();
        for (int s = 0; s < p.num_states; ++s) {
            if (p.deterministic()) {
                per_state.push_back(p.action_at(h, s));
            } else {
                const auto row = p.row(h, s);
                per_state.push_back(std::vector<double>(row.begin(), row.end()));
            }
        }
        table.push_back(std::move(per_state));
    }
    j["table"] = std::move(table);
    return j;
}

Policy policy_from_json(const json& j) {
    const bool det = j.at("kind").get<std::string>() == "deterministic";
    const int S = j.at("num_states").get<int>();
    const int A = j.at("num_actions").get<int>();
    const int H = j.at("horizon").get<int>();
    if (det) {
        std::vector<int> actions;
        for (const auto& per_state : j.at("table"))
            for (const auto& a : per_state) actions.push_back(a.get<int>());
        return Policy::make_deterministic(S, A, H, std::move(actions));
    }
    std::vector<double> probs;
    for (const auto& per_state : j.at("table"))
        for (const auto& row : per_state)
            for (const auto& p : row) probs.push_back(p.get<double>());
    return Policy::make_stochastic(S, A, H, std::move(probs));
}

json distribution_to_json_obj(const ValidatorDistribution& dist) {
    json atoms = json::array();
    for (const ValidatorAtom& atom : dist.atoms)
        atoms.push_back(json{{"ids", atom.ids}, {"weight", atom.weight}});
    json j;
    j["atoms"] = std::move(atoms);
    j["rho"] = dist.target_rho;
    j["xi"] = dist.slack;
    j["certificates"] = json{{"coverage_sup", number_or_null(dist.coverage_sup)},
                             {"reg_completeness", number_or_null(dist.reg_completeness)},
                             {"reg_soundness_sup", number_or_null(dist.reg_soundness_sup)}};
    j["rounds"] = dist.rounds;
    j["realized_regret"] = dist.realized_regret;
    j["regret_bound"] = number_or_null(dist.regret_bound);
    return j;
}

} // namespace

std::string selective_policy_to_json(const SelectivePolicy& sel) {
    json j;
    j["base"] = policy_to_json(sel.base);
    j["rule"] = rule_to_json(sel.rule);
    return j.dump(2);
}

SelectivePolicy selective_policy_from_json(const std::string& text) {
    try {
        const json j = json::parse(text);
        SelectivePolicy sel;
        sel.base = policy_from_json(j.at("base"));
        sel.rule = rule_from_json(j.at("rule"));
        return sel;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad selective-policy file: ") + e.what());
    }
}

std::string validator_distribution_to_json(const ValidatorDistribution& dist) {
    return distribution_to_json_obj(dist).dump(2);
}

std::string fit_report_to_json(const FitReport& report) {
    static const char* names[] = {"deterministic", "stochastic", "misspecified",
                                  "per_step"};
    json j;
    j["algorithm"] = names[static_cast<int>(report.algorithm)];
    j["selective"] = json::parse(selective_policy_to_json(report.selective));
    j["ensemble_draws"] = report.ensemble_draws;
    j["committee_total"] = report.committee_total;
    j["params"] = json{{"eta", report.params.eta},         {"xi", report.params.xi},
                       {"delta", report.params.delta},     {"theta", report.params.theta},
                       {"gamma", report.params.gamma},     {"lambda", report.params.lambda},
                       {"K", report.params.K},             {"rho", report.params.rho}};
    j["distribution"] = distribution_to_json_obj(report.distribution);
    j["Z"] = report.Z;
    j["k_ens"] = report.k_ens;
    j["bound_certified"] = report.bound_certified;
    j["version_space_ids"] = report.version_space_ids;
    return j.dump(2);
}

std::string metrics_report_to_json(const MetricsReport& r) {
    json j;
    j["alpha_M"] = r.alpha_M;
    j["alpha_N"] = r.alpha_N;
    j["stopped_regret_N"] = r.stopped_regret_N;
    j["switched_regret_N"] = r.switched_regret_N;
    j["asymmetric_stopped_regret_N"] = r.asymmetric_stopped_regret_N;
    j["stopped_hellinger_sq"] = number_or_null(r.stopped_hellinger_sq);
    j["expert_variance"] = r.expert_variance;
    j["learner_cost_N"] = r.learner_cost_N;
    j["expert_cost_N"] = r.expert_cost_N;
    j["switched_cost_N"] = r.switched_cost_N;
    j["mean_handoff_time_N"] = r.mean_handoff_time_N;
    j["sequential_penalty"] = json{{"expert_alpha_M", r.expert_alpha_M},
                                   {"expert_alpha_N", r.expert_alpha_N},
                                   {"state_tv_expert", number_or_null(r.state_tv_expert)},
                                   {"late_stop_risk_N", r.late_stop_risk_N}};
    j["method"] = r.exact ? json("exact")
                          : json{{"monte_carlo", json{{"n_rollouts", r.n_rollouts}}}};
    if (r.ci) {
        j["ci_halfwidths"] =
            json{{"alpha_M", r.ci->alpha_M},
                 {"alpha_N", r.ci->alpha_N},
                 {"stopped_regret_N", r.ci->stopped_regret_N},
                 {"switched_regret_N", r.ci->switched_regret_N},
                 {"asymmetric_stopped_regret_N", r.ci->asymmetric_stopped_regret_N}};
    }
    return j.dump(2);
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open for writing: " + path);
    out << content;
    if (!out) throw Error("write failed: " + path);
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace seqrej
