#include "seqrej/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <future>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "seqrej/eval.hpp"
#include "seqrej/log.hpp"
#include "seqrej/oracle_reductions.hpp"
#include "seqrej/scenarios.hpp"
#include "seqrej/seqrejectron.hpp"
#include "seqrej/serialization.hpp"

namespace seqrej::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Fixed-format numbers keep sweep and demo CSVs byte-identical across runs.
std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", x);
    return buf;
}

struct ScenarioConfig {
    std::string family = "windy_chain";
    // windy_chain
    int length = 5;
    int horizon = 8;
    double wind = 0.5;
    int class_size = 16;
    bool deterministic_class = false;
    double slip = 0.0;
    double perturb = 0.35;
    // random_tabular
    int S = 3, A = 2, H = 3;
    double corruption = 0.0;
    bool off_policy = false;
    bool stochastic = false;
    // pq_lower_bound
    int d = 2;
    double epsilon = 0.0625;
    double Delta = -1.0;
};

struct Options {
    std::string config_path;
    std::string out_dir = "results";
    std::uint64_t seed = 0;
    int m = 30;
    int n = 30;

    ScenarioConfig scenario;
    // explicit file inputs (override scenario when all present)
    std::string mdp_m_path, mdp_n_path, class_path, train_path, test_path, expert_path;
    std::string policy_path;  // eval input

    std::string algo = "deterministic";
    double eta = 0.4, xi = 0.1, delta = 0.2, theta = 1.0, gamma = -1.0, lambda = 3.0;
    double rho = 0.34;
    int K = 3;
    std::string engine = "hedge";
    int T = 0;

    std::string eval_method = "exact";
    int n_rollouts = 2000;

    // sweep
    std::string grid_param = "theta";
    std::vector<double> grid;
    int trials = 20;
    int jobs = 1;
};

ScenarioConfig scenario_from_json(const json& j) {
    ScenarioConfig sc;
    sc.family = j.value("family", sc.family);
    sc.length = j.value("length", sc.length);
    sc.horizon = j.value("horizon", sc.horizon);
    sc.wind = j.value("wind", sc.wind);
    sc.class_size = j.value("class_size", sc.class_size);
    sc.deterministic_class = j.value("deterministic", sc.deterministic_class);
    sc.slip = j.value("slip", sc.slip);
    sc.perturb = j.value("perturb", sc.perturb);
    sc.S = j.value("S", sc.S);
    sc.A = j.value("A", sc.A);
    sc.H = j.value("H", sc.H);
    sc.corruption = j.value("corruption", sc.corruption);
    sc.off_policy = j.value("off_policy", sc.off_policy);
    sc.stochastic = j.value("stochastic", sc.stochastic);
    sc.d = j.value("d", sc.d);
    sc.epsilon = j.value("epsilon", sc.epsilon);
    sc.Delta = j.value("Delta", sc.Delta);
    return sc;
}

void apply_config_file(Options& opt) {
    if (opt.config_path.empty()) return;
    json j;
    try {
        j = json::parse(read_file(opt.config_path));
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad config file: ") + e.what());
    }
    if (j.contains("scenario")) opt.scenario = scenario_from_json(j["scenario"]);
    if (j.contains("paths")) {
        const json& p = j["paths"];
        opt.mdp_m_path = p.value("mdp_M", opt.mdp_m_path);
        opt.mdp_n_path = p.value("mdp_N", opt.mdp_n_path);
        opt.class_path = p.value("class", opt.class_path);
        opt.train_path = p.value("train", opt.train_path);
        opt.test_path = p.value("test", opt.test_path);
        opt.expert_path = p.value("expert", opt.expert_path);
        opt.policy_path = p.value("policy", opt.policy_path);
    }
    opt.algo = j.value("algorithm", opt.algo);
    if (j.contains("params")) {
        const json& p = j["params"];
        opt.eta = p.value("eta", opt.eta);
        opt.xi = p.value("xi", opt.xi);
        opt.delta = p.value("delta", opt.delta);
        opt.theta = p.value("theta", opt.theta);
        opt.gamma = p.value("gamma", opt.gamma);
        opt.lambda = p.value("lambda", opt.lambda);
        opt.rho = p.value("rho", opt.rho);
        opt.K = p.value("K", opt.K);
        opt.engine = p.value("engine", opt.engine);
        opt.T = p.value("T", opt.T);
    }
    if (j.contains("eval")) {
        opt.eval_method = j["eval"].value("method", opt.eval_method);
        opt.n_rollouts = j["eval"].value("n_rollouts", opt.n_rollouts);
    }
    opt.seed = j.value("seed", opt.seed);
    opt.m = j.value("m", opt.m);
    opt.n = j.value("n", opt.n);
    opt.out_dir = j.value("out", opt.out_dir);
    opt.grid_param = j.value("grid_param", opt.grid_param);
    if (j.contains("grid")) opt.grid = j["grid"].get<std::vector<double>>();
    opt.trials = j.value("trials", opt.trials);
    opt.jobs = j.value("jobs", opt.jobs);
}

ScenarioBundle build_scenario(const ScenarioConfig& sc, std::uint64_t seed) {
    if (sc.family == "windy_chain") {
        WindyChainParams p;
        p.length = sc.length;
        p.horizon = sc.horizon;
        p.wind = sc.wind;
        p.class_size = sc.class_size;
        p.deterministic_class = sc.deterministic_class;
        p.slip = sc.slip;
        p.perturb_cell_prob = sc.perturb;
        return make_windy_chain(p, seed);
    }
    if (sc.family == "random_tabular") {
        RandomTabularParams p;
        p.num_states = sc.S;
        p.num_actions = sc.A;
        p.horizon = sc.H;
        p.class_size = sc.class_size;
        p.corruption = sc.corruption;
        p.off_policy = sc.off_policy;
        p.stochastic = sc.stochastic;
        return make_random_tabular(p, seed);
    }
    throw ConfigError("unknown scenario family: " + sc.family);
}

struct LoadedProblem {
    TabularMDP M, N;
    PolicyClass pc;
    Dataset train, test;
    std::optional<Policy> expert;
};

void validate_dataset(const Dataset& data, const TabularMDP& mdp, const char* which) {
    for (const Trajectory& t : data) {
        if (static_cast<int>(t.states.size()) != mdp.horizon)
            throw ConfigError(std::string(which) + ": trajectory length != horizon");
        if (!t.actions.empty() && t.actions.size() != t.states.size())
            throw ConfigError(std::string(which) + ": ragged action list");
        for (int s : t.states)
            if (s < 0 || s >= mdp.num_states)
                throw ConfigError(std::string(which) + ": state index out of range");
        for (int a : t.actions)
            if (a < 0 || a >= mdp.num_actions)
                throw ConfigError(std::string(which) + ": action index out of range");
    }
}

LoadedProblem load_problem(const Options& opt) {
    LoadedProblem prob;
    if (!opt.mdp_m_path.empty()) {
        if (opt.mdp_n_path.empty() || opt.class_path.empty() || opt.train_path.empty() ||
            opt.test_path.empty())
            throw ConfigError("file-driven runs need mdp_M, mdp_N, class, train, test");
        prob.M = mdp_from_json(read_file(opt.mdp_m_path));
        prob.N = mdp_from_json(read_file(opt.mdp_n_path));
        prob.pc = policy_class_from_json(read_file(opt.class_path));
        prob.train = dataset_from_jsonl(read_file(opt.train_path));
        prob.test = dataset_from_jsonl(read_file(opt.test_path));
        validate_dataset(prob.train, prob.M, "train");
        validate_dataset(prob.test, prob.N, "test");
        if (!opt.expert_path.empty()) {
            PolicyClass one = policy_class_from_json(read_file(opt.expert_path));
            prob.expert = one.policies.front();
        }
    } else {
        const ScenarioBundle bundle = build_scenario(opt.scenario, opt.seed);
        const SampledData data =
            sample_datasets(bundle, opt.m, opt.n, Rng(opt.seed).split("data", 0).key());
        prob.M = bundle.M;
        prob.N = bundle.N;
        prob.pc = bundle.pc;
        prob.train = data.train;
        prob.test = data.test;
        prob.expert = bundle.pi_test;
    }
    return prob;
}

double default_gamma(const Options& opt, const PolicyClass& pc, const Dataset& train) {
    if (opt.gamma >= 0.0) return opt.gamma;
    // Closed-form radius balancing the version-space width against m.
    return (std::log(pc.size()) + std::log(8.0 / opt.delta)) / train.size();
}

FitReport run_fit(const Options& opt, const LoadedProblem& prob) {
    NoRegretConfig cfg;
    cfg.rng_seed = opt.seed;
    cfg.rounds = opt.T;
    if (opt.algo == "deterministic") {
        const GameEngine engine =
            opt.engine == "ftpl" ? GameEngine::Ftpl : GameEngine::Hedge;
        return fit_deterministic(prob.pc, prob.train, prob.test, opt.eta, opt.xi,
                                 opt.delta, cfg, engine);
    }
    if (opt.algo == "stochastic") {
        return fit_stochastic(prob.pc, prob.train, prob.test, opt.eta, opt.delta,
                              opt.theta, default_gamma(opt, prob.pc, prob.train), cfg);
    }
    if (opt.algo == "misspecified") {
        return fit_misspecified(prob.pc, prob.train, prob.test, opt.lambda, opt.K, cfg);
    }
    if (opt.algo == "per_step") {
        return fit_per_step(prob.pc, prob.train, prob.test, opt.rho, opt.xi, opt.delta,
                            cfg);
    }
    throw ConfigError("unknown algorithm: " + opt.algo);
}

MetricsReport run_eval(const Options& opt, const LoadedProblem& prob,
                       const SelectivePolicy& sel) {
    if (!prob.expert) throw ConfigError("eval needs an expert policy");
    if (opt.eval_method == "exact")
        return exact_metrics(prob.M, prob.N, sel, *prob.expert, prob.pc);
    if (opt.eval_method == "monte_carlo")
        return monte_carlo_metrics(prob.M, prob.N, sel, *prob.expert, prob.pc,
                                   opt.n_rollouts, Rng(opt.seed).split("eval", 0).key());
    throw ConfigError("unknown eval method: " + opt.eval_method);
}

int cmd_gen_data(const Options& opt) {
    fs::create_directories(opt.out_dir);
    if (opt.scenario.family == "pq_lower_bound") {
        const PqLowerBoundBundle bundle = make_pq_lower_bound(
            opt.scenario.d, opt.scenario.epsilon, opt.scenario.Delta, opt.seed);
        write_file(opt.out_dir + "/P_env.json", mdp_to_json(bundle.p_env));
        write_file(opt.out_dir + "/Q_env.json", mdp_to_json(bundle.q_env));
        write_file(opt.out_dir + "/class.json", policy_class_to_json(bundle.sigma_policies));
        json costs;
        costs["sigma"] = bundle.sigma_bits;
        costs["costs"] = bundle.costs_per_sigma;
        costs["subsampled"] = bundle.subsampled;
        write_file(opt.out_dir + "/sigma_costs.json", costs.dump(2));
        return 0;
    }
    const ScenarioBundle bundle = build_scenario(opt.scenario, opt.seed);
    const SampledData data =
        sample_datasets(bundle, opt.m, opt.n, Rng(opt.seed).split("data", 0).key());
    write_file(opt.out_dir + "/M.json", mdp_to_json(bundle.M));
    write_file(opt.out_dir + "/N.json", mdp_to_json(bundle.N));
    write_file(opt.out_dir + "/class.json", policy_class_to_json(bundle.pc));
    write_file(opt.out_dir + "/train.jsonl", dataset_to_jsonl(data.train));
    write_file(opt.out_dir + "/test.jsonl", dataset_to_jsonl(data.test));
    PolicyClass expert_only(std::vector<Policy>{bundle.pi_test});
    write_file(opt.out_dir + "/expert.json", policy_class_to_json(expert_only));
    json meta;
    meta["family"] = opt.scenario.family;
    meta["seed"] = opt.seed;
    meta["m"] = opt.m;
    meta["n"] = opt.n;
    meta["expert_id"] = bundle.expert_id;
    if (bundle.off_policy) meta["delta_off"] = bundle.delta_off;
    write_file(opt.out_dir + "/scenario.json", meta.dump(2));
    return 0;
}

int cmd_fit(const Options& opt) {
    const LoadedProblem prob = load_problem(opt);
    const FitReport report = run_fit(opt, prob);
    fs::create_directories(opt.out_dir);
    write_file(opt.out_dir + "/fit_report.json", fit_report_to_json(report));
    write_file(opt.out_dir + "/selective_policy.json",
               selective_policy_to_json(report.selective));
    return 0;
}

int cmd_eval(const Options& opt) {
    const LoadedProblem prob = load_problem(opt);
    SelectivePolicy sel;
    if (!opt.policy_path.empty()) {
        sel = selective_policy_from_json(read_file(opt.policy_path));
    } else {
        sel = run_fit(opt, prob).selective;
    }
    const MetricsReport metrics = run_eval(opt, prob, sel);
    fs::create_directories(opt.out_dir);
    write_file(opt.out_dir + "/metrics.json", metrics_report_to_json(metrics));
    return 0;
}

std::string sweep_header() {
    return "trial,param,value,source_handoff_rate,target_handoff_rate,stopped_regret,"
           "switched_regret,switched_cost,learner_cost,expert_cost,mean_handoff_time\n";
}

std::string sweep_row(int trial, const std::string& param, double value,
                      const MetricsReport& m) {
    std::ostringstream row;
    row << trial << ',' << param << ',' << fmt(value) << ',' << fmt(m.alpha_M) << ','
        << fmt(m.alpha_N) << ',' << fmt(m.stopped_regret_N) << ','
        << fmt(m.switched_regret_N) << ',' << fmt(m.switched_cost_N) << ','
        << fmt(m.learner_cost_N) << ',' << fmt(m.expert_cost_N) << ','
        << fmt(m.mean_handoff_time_N) << '\n';
    return row.str();
}

int cmd_sweep(const Options& opt) {
    if (opt.grid.empty()) throw ConfigError("sweep needs a nonempty --grid");
    const std::vector<std::string> known = {"theta", "eta", "K", "lambda"};
    if (std::find(known.begin(), known.end(), opt.grid_param) == known.end())
        throw ConfigError("sweep grid_param must be one of theta|eta|K|lambda");

    struct Cell {
        int trial;
        double value;
    };
    std::vector<Cell> cells;
    for (int t = 0; t < opt.trials; ++t)
        for (double v : opt.grid) cells.push_back({t, v});

    auto run_cell = [&](const Cell& cell) -> std::string {
        Options local = opt;
        local.seed = Rng(opt.seed).split("trial", cell.trial).key();
        if (opt.grid_param == "theta") local.theta = cell.value;
        if (opt.grid_param == "eta") local.eta = cell.value;
        if (opt.grid_param == "K") local.K = static_cast<int>(cell.value);
        if (opt.grid_param == "lambda") local.lambda = cell.value;
        const LoadedProblem prob = load_problem(local);
        const FitReport report = run_fit(local, prob);
        const MetricsReport metrics = run_eval(local, prob, report.selective);
        return sweep_row(cell.trial, opt.grid_param, cell.value, metrics);
    };

    std::vector<std::string> rows(cells.size());
    const int jobs = std::max(1, opt.jobs);
    std::size_t next = 0;
    while (next < cells.size()) {
        const std::size_t batch = std::min<std::size_t>(jobs, cells.size() - next);
        std::vector<std::future<std::string>> futs;
        for (std::size_t i = 0; i < batch; ++i)
            futs.push_back(std::async(std::launch::async, run_cell, cells[next + i]));
        for (std::size_t i = 0; i < batch; ++i) rows[next + i] = futs[i].get();
        next += batch;
    }

    std::string csv = sweep_header();
    for (const std::string& row : rows) csv += row;
    fs::create_directories(opt.out_dir);
    write_file(opt.out_dir + "/sweep.csv", csv);
    return 0;
}

// Windy-chain theta sweep mirroring the reference experiment: per trial, fit
// the stochastic pipeline once (committee of K validators selected at
// theta = 2) and sweep the deployment threshold.
int cmd_demo(const Options& opt) {
    const std::vector<double> grid =
        opt.grid.empty() ? std::vector<double>{0.25, 0.5, 1.0, 1.5, 2.0} : opt.grid;
    const double theta_fit = 2.0;
    const double rho = 1.0 / (opt.K - 0.5);  // ceil(1/rho) = K, away from FP edges
    const double xi = 0.1, delta = 0.1;

    std::string csv =
        "trial,theta,source_handoff_rate,target_handoff_rate,switched_cost,"
        "learner_cost,expert_cost,mean_handoff_time\n";
    for (int trial = 0; trial < opt.trials; ++trial) {
        const std::uint64_t trial_seed = Rng(opt.seed).split("trial", trial).key();
        const ScenarioBundle bundle = build_scenario(opt.scenario, trial_seed);
        const SampledData data = sample_datasets(bundle, opt.m, opt.n,
                                                 Rng(trial_seed).split("data", 0).key());

        const int base_id = mle_policy(bundle.pc, data.train);
        const double gamma =
            (std::log(bundle.pc.size()) + std::log(8.0 / delta)) / data.train.size();
        const VersionSpace space = logloss_version_space(bundle.pc, data.train, gamma);
        NoRegretConfig cfg;
        cfg.rng_seed = Rng(trial_seed).split("game", 0).key();
        const ValidatorDistribution dist =
            sparse_validator_dist(space, base_id, data.test, rho, xi, delta,
                                  StopMode::HellingerBudget, theta_fit, bundle.pc, cfg);
        Rng draw = Rng(trial_seed).split("committee", 0);
        const std::vector<int> committee = dist.sample_committee(draw);

        for (double theta : grid) {
            SelectivePolicy sel;
            sel.base = bundle.pc[base_id];
            sel.rule.base_id = base_id;
            sel.rule.mode = StopMode::HellingerBudget;
            sel.rule.theta = theta;
            sel.rule.validator_ids = committee;
            const MetricsReport m =
                exact_metrics(bundle.M, bundle.N, sel, bundle.expert, bundle.pc);
            std::ostringstream row;
            row << trial << ',' << fmt(theta) << ',' << fmt(m.alpha_M) << ','
                << fmt(m.alpha_N) << ',' << fmt(m.switched_cost_N) << ','
                << fmt(m.learner_cost_N) << ',' << fmt(m.expert_cost_N) << ','
                << fmt(m.mean_handoff_time_N) << '\n';
            csv += row.str();
        }
    }
    fs::create_directories(opt.out_dir);
    write_file(opt.out_dir + "/demo.csv", csv);
    return 0;
}

} // namespace

int run(const std::vector<std::string>& args) {
    CLI::App app{"SeqRejectron: selective imitation learning under dynamics shift"};
    app.require_subcommand(1);

    Options opt;
    // Config file values load first; explicitly passed flags then win.
    for (std::size_t i = 0; i + 1 < args.size(); ++i)
        if (args[i] == "--config") opt.config_path = args[i + 1];
    try {
        apply_config_file(opt);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }

    std::string scenario_family = opt.scenario.family;
    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", opt.config_path, "JSON config file");
        cmd->add_option("--out", opt.out_dir, "output directory");
        cmd->add_option("--seed", opt.seed, "master seed");
        cmd->add_option("--scenario", scenario_family,
                        "windy_chain|random_tabular|pq_lower_bound");
        cmd->add_option("--m", opt.m, "labeled training rollouts");
        cmd->add_option("--n", opt.n, "unlabeled test rollouts");
        cmd->add_option("--length", opt.scenario.length);
        cmd->add_option("--horizon", opt.scenario.horizon);
        cmd->add_option("--wind", opt.scenario.wind);
        cmd->add_option("--class-size", opt.scenario.class_size);
        cmd->add_flag("--deterministic-class", opt.scenario.deterministic_class);
        cmd->add_option("--slip", opt.scenario.slip);
        cmd->add_option("--perturb", opt.scenario.perturb);
        cmd->add_option("--S", opt.scenario.S);
        cmd->add_option("--A", opt.scenario.A);
        cmd->add_option("--H", opt.scenario.H);
        cmd->add_option("--corruption", opt.scenario.corruption);
        cmd->add_flag("--off-policy", opt.scenario.off_policy);
        cmd->add_flag("--stochastic-class", opt.scenario.stochastic);
        cmd->add_option("--d", opt.scenario.d);
        cmd->add_option("--epsilon", opt.scenario.epsilon);
        cmd->add_option("--Delta", opt.scenario.Delta);
        cmd->add_option("--mdp-m", opt.mdp_m_path, "MDP file for M");
        cmd->add_option("--mdp-n", opt.mdp_n_path, "MDP file for N");
        cmd->add_option("--class", opt.class_path, "policy-class file");
        cmd->add_option("--train", opt.train_path, "labeled JSONL");
        cmd->add_option("--test", opt.test_path, "unlabeled JSONL");
        cmd->add_option("--expert", opt.expert_path, "expert policy-class file");
    };
    auto add_fit_params = [&](CLI::App* cmd) {
        cmd->add_option("--algo", opt.algo,
                        "deterministic|stochastic|misspecified|per_step");
        cmd->add_option("--eta", opt.eta);
        cmd->add_option("--xi", opt.xi);
        cmd->add_option("--delta", opt.delta);
        cmd->add_option("--theta", opt.theta);
        cmd->add_option("--gamma", opt.gamma);
        cmd->add_option("--lambda", opt.lambda);
        cmd->add_option("--rho", opt.rho);
        cmd->add_option("--K", opt.K);
        cmd->add_option("--engine", opt.engine, "hedge|ftpl");
        cmd->add_option("--T", opt.T, "no-regret rounds (0 = auto)");
    };

    CLI::App* gen = app.add_subcommand("gen-data", "write a scenario bundle");
    add_common(gen);

    CLI::App* fit = app.add_subcommand("fit", "fit a selective policy");
    add_common(fit);
    add_fit_params(fit);

    CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a selective policy");
    add_common(eval_cmd);
    add_fit_params(eval_cmd);
    eval_cmd->add_option("--policy", opt.policy_path, "selective-policy file");
    eval_cmd->add_option("--method", opt.eval_method, "exact|monte_carlo");
    eval_cmd->add_option("--n-rollouts", opt.n_rollouts);

    CLI::App* sweep = app.add_subcommand("sweep", "grid x seeds, tidy CSV");
    add_common(sweep);
    add_fit_params(sweep);
    sweep->add_option("--method", opt.eval_method, "exact|monte_carlo");
    sweep->add_option("--n-rollouts", opt.n_rollouts);
    sweep->add_option("--grid-param", opt.grid_param, "theta|eta|K|lambda");
    sweep->add_option("--grid", opt.grid, "grid values")->delimiter(',');
    sweep->add_option("--trials", opt.trials);
    sweep->add_option("--jobs", opt.jobs);

    CLI::App* demo = app.add_subcommand("demo", "windy-chain theta sweep");
    add_common(demo);
    demo->add_option("--trials", opt.trials);
    demo->add_option("--K", opt.K);
    demo->add_option("--grid", opt.grid, "theta grid")->delimiter(',');

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    opt.scenario.family = scenario_family;

    try {
        if (gen->parsed()) return cmd_gen_data(opt);
        if (fit->parsed()) return cmd_fit(opt);
        if (eval_cmd->parsed()) return cmd_eval(opt);
        if (sweep->parsed()) return cmd_sweep(opt);
        if (demo->parsed()) return cmd_demo(opt);
        return 2;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}

} // namespace seqrej::cli
