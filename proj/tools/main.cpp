// Command-line harness: training, pretraining, evaluation, ablations,
// inference benchmarking, and artifact exports over one RunConfig.
#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "gridrl/checkpoint.hpp"
#include "gridrl/config.hpp"
#include "gridrl/graph_obs.hpp"
#include "gridrl/learner.hpp"

namespace fs = std::filesystem;
using namespace gridrl;

namespace {

/// Stages every RunConfig field behind a CLI flag. Flags the user actually
/// passed override the config file; everything else keeps the file's (or the
/// default) value.
struct FlagBinder {
    std::string config_path;
    RunConfig staged;
    std::string staged_shaping = "bootstrapped";
    std::vector<std::pair<CLI::Option*, std::function<void(RunConfig&, const FlagBinder&)>>>
        appliers;

    void bind(CLI::App* cmd) {
        cmd->add_option("--config", config_path, "JSON run configuration")
            ->check(CLI::ExistingFile);

        auto opt = [&](const char* flag, auto& staged_field, const char* help,
                       auto&& copy_fn) {
            CLI::Option* o = cmd->add_option(flag, staged_field, help);
            appliers.emplace_back(o, copy_fn);
        };

        // Assets and chronics.
        opt("--grid", staged.grid_path, "grid description file",
            [](RunConfig& c, const FlagBinder& b) { c.grid_path = b.staged.grid_path; });
        opt("--chronics-dir", staged.chronics_dir, "load chronics from this directory",
            [](RunConfig& c, const FlagBinder& b) { c.chronics_dir = b.staged.chronics_dir; });
        opt("--hardness", staged.hardness, "synthetic profile hardness (easy|hard)",
            [](RunConfig& c, const FlagBinder& b) { c.hardness = b.staged.hardness; });
        opt("--horizon", staged.horizon, "synthetic chronic length in steps",
            [](RunConfig& c, const FlagBinder& b) { c.horizon = b.staged.horizon; });
        opt("--train-chronics", staged.train_chronics, "synthetic training chronic count",
            [](RunConfig& c, const FlagBinder& b) {
                c.train_chronics = b.staged.train_chronics;
            });
        opt("--eval-chronics", staged.eval_chronics, "synthetic evaluation chronic count",
            [](RunConfig& c, const FlagBinder& b) { c.eval_chronics = b.staged.eval_chronics; });
        opt("--train-chronic-seed", staged.train_chronic_seed, "seed of the training split",
            [](RunConfig& c, const FlagBinder& b) {
                c.train_chronic_seed = b.staged.train_chronic_seed;
            });
        opt("--eval-chronic-seed", staged.eval_chronic_seed, "seed of the evaluation split",
            [](RunConfig& c, const FlagBinder& b) {
                c.eval_chronic_seed = b.staged.eval_chronic_seed;
            });

        // Learning scope.
        opt("--seed", staged.seed, "master seed for every stochastic component",
            [](RunConfig& c, const FlagBinder& b) { c.seed = b.staged.seed; });
        opt("--replay-capacity", staged.replay_capacity, "transitions per replay buffer",
            [](RunConfig& c, const FlagBinder& b) {
                c.replay_capacity = b.staged.replay_capacity;
            });
        opt("--demo-episodes", staged.demo_episodes, "expert episodes for demonstrations",
            [](RunConfig& c, const FlagBinder& b) { c.demo_episodes = b.staged.demo_episodes; });
        opt("--pretrain-steps", staged.pretrain_steps, "demo-only DQfD rounds",
            [](RunConfig& c, const FlagBinder& b) {
                c.pretrain_steps = b.staged.pretrain_steps;
            });
        opt("--train-episodes", staged.train_episodes, "online training episodes",
            [](RunConfig& c, const FlagBinder& b) {
                c.train_episodes = b.staged.train_episodes;
            });
        opt("--updates-per-decision", staged.updates_per_decision,
            "learner rounds per danger decision",
            [](RunConfig& c, const FlagBinder& b) {
                c.updates_per_decision = b.staged.updates_per_decision;
            });
        opt("--checkpoint-every", staged.checkpoint_every, "episodes between checkpoints",
            [](RunConfig& c, const FlagBinder& b) {
                c.checkpoint_every = b.staged.checkpoint_every;
            });
        opt("--beta-horizon-updates", staged.beta_horizon_updates,
            "rounds until the PER β anneal reaches its end value",
            [](RunConfig& c, const FlagBinder& b) {
                c.beta_horizon_updates = b.staged.beta_horizon_updates;
            });

        // Ablation flags.
        opt("--use-dqfd", staged.use_dqfd, "demonstrations + pretraining on/off",
            [](RunConfig& c, const FlagBinder& b) { c.use_dqfd = b.staged.use_dqfd; });
        opt("--use-gnn", staged.use_gnn, "shared encoder on/off (off: zero-padded locals)",
            [](RunConfig& c, const FlagBinder& b) { c.use_gnn = b.staged.use_gnn; });
        opt("--filter", staged.filter_on, "greedy action filter on/off",
            [](RunConfig& c, const FlagBinder& b) { c.filter_on = b.staged.filter_on; });
        opt("--shaping", staged_shaping, "reward shaping (off|static|bootstrapped)",
            [](RunConfig& c, const FlagBinder& b) {
                c.shaping = shaping_mode_from_string(b.staged_shaping);
            });

        // Hyperparameters: every field.
        opt("--gamma", staged.hp.gamma, "discount factor",
            [](RunConfig& c, const FlagBinder& b) { c.hp.gamma = b.staged.hp.gamma; });
        opt("--lr", staged.hp.lr, "Adam learning rate",
            [](RunConfig& c, const FlagBinder& b) { c.hp.lr = b.staged.hp.lr; });
        opt("--eps0", staged.hp.eps0, "initial exploration rate",
            [](RunConfig& c, const FlagBinder& b) { c.hp.eps0 = b.staged.hp.eps0; });
        opt("--eps-half-life", staged.hp.eps_half_life,
            "danger decisions per halving of epsilon",
            [](RunConfig& c, const FlagBinder& b) {
                c.hp.eps_half_life = b.staged.hp.eps_half_life;
            });
        opt("--eps-min", staged.hp.eps_min, "exploration floor",
            [](RunConfig& c, const FlagBinder& b) { c.hp.eps_min = b.staged.hp.eps_min; });
        opt("--tau", staged.hp.tau, "soft target update rate",
            [](RunConfig& c, const FlagBinder& b) { c.hp.tau = b.staged.hp.tau; });
        opt("--sync-interval", staged.hp.sync_interval, "rounds between target syncs",
            [](RunConfig& c, const FlagBinder& b) {
                c.hp.sync_interval = b.staged.hp.sync_interval;
            });
        opt("--grad-clip", staged.hp.grad_clip, "elementwise gradient clip",
            [](RunConfig& c, const FlagBinder& b) { c.hp.grad_clip = b.staged.hp.grad_clip; });
        opt("--alpha-per", staged.hp.alpha_per, "PER priority exponent",
            [](RunConfig& c, const FlagBinder& b) { c.hp.alpha_per = b.staged.hp.alpha_per; });
        opt("--beta-per-start", staged.hp.beta_per_start, "PER IS exponent at round 0",
            [](RunConfig& c, const FlagBinder& b) {
                c.hp.beta_per_start = b.staged.hp.beta_per_start;
            });
        opt("--beta-per-end", staged.hp.beta_per_end, "PER IS exponent at the anneal horizon",
            [](RunConfig& c, const FlagBinder& b) {
                c.hp.beta_per_end = b.staged.hp.beta_per_end;
            });
        opt("--eps-prio", staged.hp.eps_prio, "priority floor for collected transitions",
            [](RunConfig& c, const FlagBinder& b) { c.hp.eps_prio = b.staged.hp.eps_prio; });
        opt("--eps-demo", staged.hp.eps_demo, "extra priority bonus for demonstrations",
            [](RunConfig& c, const FlagBinder& b) { c.hp.eps_demo = b.staged.hp.eps_demo; });
        opt("--margin", staged.hp.margin, "large-margin supervised loss margin",
            [](RunConfig& c, const FlagBinder& b) { c.hp.margin = b.staged.hp.margin; });
        opt("--lambda-nstep", staged.hp.lambda_nstep, "n-step loss weight",
            [](RunConfig& c, const FlagBinder& b) {
                c.hp.lambda_nstep = b.staged.hp.lambda_nstep;
            });
        opt("--lambda-expert", staged.hp.lambda_expert, "supervised loss weight",
            [](RunConfig& c, const FlagBinder& b) {
                c.hp.lambda_expert = b.staged.hp.lambda_expert;
            });
        opt("--lambda-l2", staged.hp.lambda_l2, "L2 regularization weight",
            [](RunConfig& c, const FlagBinder& b) { c.hp.lambda_l2 = b.staged.hp.lambda_l2; });
        opt("--n-step", staged.hp.n_step, "n-step return length",
            [](RunConfig& c, const FlagBinder& b) { c.hp.n_step = b.staged.hp.n_step; });
        opt("--batch-size", staged.hp.batch_size, "transitions per learner round",
            [](RunConfig& c, const FlagBinder& b) { c.hp.batch_size = b.staged.hp.batch_size; });
        opt("--blackout-penalty", staged.hp.blackout_penalty, "reward on blackout",
            [](RunConfig& c, const FlagBinder& b) {
                c.hp.blackout_penalty = b.staged.hp.blackout_penalty;
            });
        opt("--danger-ratio", staged.hp.danger_ratio, "load ratio that triggers the agents",
            [](RunConfig& c, const FlagBinder& b) {
                c.hp.danger_ratio = b.staged.hp.danger_ratio;
            });

        // Network shapes.
        opt("--embedding-width", staged.net.embedding_width, "GNN output width per line",
            [](RunConfig& c, const FlagBinder& b) {
                c.net.embedding_width = b.staged.net.embedding_width;
            });
        opt("--gnn-layers", staged.net.gnn_layers, "GNN depth",
            [](RunConfig& c, const FlagBinder& b) { c.net.gnn_layers = b.staged.net.gnn_layers; });
        opt("--agent-hidden", staged.net.agent_hidden, "agent dueling-net hidden width",
            [](RunConfig& c, const FlagBinder& b) {
                c.net.agent_hidden = b.staged.net.agent_hidden;
            });
        opt("--manager-hidden", staged.net.manager_hidden, "manager dueling-net hidden width",
            [](RunConfig& c, const FlagBinder& b) {
                c.net.manager_hidden = b.staged.net.manager_hidden;
            });

        // Environment.
        opt("--cooldown-steps", staged.env.cooldown_steps, "substation/line cooldown",
            [](RunConfig& c, const FlagBinder& b) {
                c.env.cooldown_steps = b.staged.env.cooldown_steps;
            });
        opt("--soft-overflow-steps", staged.env.soft_overflow_steps,
            "steps above 100% before a soft trip",
            [](RunConfig& c, const FlagBinder& b) {
                c.env.soft_overflow_steps = b.staged.env.soft_overflow_steps;
            });
        opt("--hard-overflow-ratio", staged.env.hard_overflow_ratio,
            "load ratio for an instant trip",
            [](RunConfig& c, const FlagBinder& b) {
                c.env.hard_overflow_ratio = b.staged.env.hard_overflow_ratio;
            });
        opt("--env-blackout-penalty", staged.env.blackout_penalty,
            "environment-side blackout reward",
            [](RunConfig& c, const FlagBinder& b) {
                c.env.blackout_penalty = b.staged.env.blackout_penalty;
            });
        opt("--slack-tolerance", staged.env.slack_tolerance,
            "slack band as a fraction of generator p_max",
            [](RunConfig& c, const FlagBinder& b) {
                c.env.slack_tolerance = b.staged.env.slack_tolerance;
            });

        // Outputs.
        opt("--out", staged.out_dir, "output directory",
            [](RunConfig& c, const FlagBinder& b) { c.out_dir = b.staged.out_dir; });
    }

    RunConfig resolve() const {
        RunConfig config = config_path.empty() ? RunConfig{} : load_run_config(config_path);
        for (const auto& [option, apply] : appliers)
            if (option->count() > 0) apply(config, *this);
        config.validate();
        return config;
    }
};

/// Builds a system of the configured shape and restores the checkpoint.
PolicySystem restore_system(const Grid& grid, const RunConfig& config,
                            const std::string& checkpoint) {
    PolicySystem sys(grid, config.net, config.seed);
    load_checkpoint(checkpoint, sys.all_params());
    return sys;
}

ActorConfig actor_for(const RunConfig& config) {
    ActorConfig actor;
    actor.filter_on = config.filter_on;
    actor.use_gnn = config.use_gnn;
    actor.danger_ratio = config.hp.danger_ratio;
    return actor;
}

void print_eval(const std::string& name, const EvalReport& report) {
    std::cout << name << ": mean survive " << report.mean_survive << " +- "
              << report.std_survive << " over " << report.rows.size() << " chronics\n";
}

/// Deterministic 1-in-k interleaved split; every k-th transition is held out.
template <typename T>
void split_holdout(const std::vector<T>& all, int stride, std::vector<T>& kept,
                   std::vector<T>& held) {
    for (std::size_t i = 0; i < all.size(); ++i) {
        if (stride > 0 && (i + 1) % static_cast<std::size_t>(stride) == 0)
            held.push_back(all[i]);
        else
            kept.push_back(all[i]);
    }
}

int run_train(const RunConfig& config) {
    const TrainResult result = train(config);
    std::cout << "trained " << result.episodes.size() << " episodes, mean survive "
              << result.mean_survive_time << "\n";
    if (result.pretrain.rounds > 0)
        std::cout << "pretrain: " << result.pretrain.rounds << " rounds, "
                  << result.pretrain.agents_trained << " agents ("
                  << result.pretrain.agents_skipped << " without demos), expert loss "
                  << result.pretrain.expert_loss_first << " -> "
                  << result.pretrain.expert_loss_last << "\n";
    std::cout << "metrics: " << result.metrics_path << "\n";
    std::cout << "checkpoint: " << result.checkpoint_path << "\n";
    std::cout << "danger states: " << result.danger_states_path << "\n";

    // Final greedy evaluation against the Do-Nothing baseline.
    const Grid grid = Grid::load(config.grid_path);
    const std::vector<Chronic> eval_chronics = chronics_for(config, grid, /*eval_split=*/true);
    PolicySystem sys = restore_system(grid, config, result.checkpoint_path);
    const EvalReport policy = evaluate_policy(sys, eval_chronics, config.env, actor_for(config));
    const EvalReport baseline = evaluate_do_nothing(grid, eval_chronics, config.env);
    write_eval_csv((fs::path(config.out_dir) / "eval.csv").string(), policy);
    write_latency_sidecar((fs::path(config.out_dir) / "eval_latency.csv").string(), policy);
    write_eval_csv((fs::path(config.out_dir) / "do_nothing.csv").string(), baseline);
    print_eval("policy", policy);
    print_eval("do-nothing", baseline);
    if (baseline.mean_survive > 0.0)
        std::cout << "improvement: " << policy.mean_survive / baseline.mean_survive
                  << "x do-nothing\n";
    return 0;
}

int run_pretrain(const RunConfig& config, const std::string& demo_path, double holdout) {
    fs::create_directories(config.out_dir);
    const Grid grid = Grid::load(config.grid_path);

    DemoSet all;
    if (!demo_path.empty()) {
        all = load_demos(demo_path, grid);
    } else {
        const std::vector<Chronic> chronics = chronics_for(config, grid, /*eval_split=*/false);
        DemoStats stats;
        all = collect_demonstrations(grid, chronics, config.env, config.hp,
                                     config.demo_episodes, 0.02, &stats);
        std::cout << "collected " << all.agent.size() << " agent / " << all.manager.size()
                  << " manager demos from " << stats.episodes << " episodes\n";
    }

    DemoSet kept, held;
    const int stride =
        holdout > 0.0 ? std::max(2, static_cast<int>(std::lround(1.0 / holdout))) : 0;
    split_holdout(all.agent, stride, kept.agent, held.agent);
    split_holdout(all.manager, stride, kept.manager, held.manager);

    PolicySystem sys(grid, config.net, config.seed);
    Learner learner(sys, config);
    learner.load_demo_set(kept);
    const PretrainReport report = pretrain_dqfd(learner, grid, config.pretrain_steps);

    std::cout << "pretrained " << report.agents_trained << " agents ("
              << report.agents_skipped << " skipped: no demos) for " << report.rounds
              << " rounds\n";
    std::cout << "expert loss " << report.expert_loss_first << " -> "
              << report.expert_loss_last << ", total loss " << report.total_loss_first
              << " -> " << report.total_loss_last << "\n";
    if (!held.agent.empty() || !held.manager.empty())
        std::cout << "held-out agreement: " << demo_agreement(sys, held, config.use_gnn)
                  << " over " << held.agent.size() + held.manager.size() << " decisions\n";

    const std::string ckpt = (fs::path(config.out_dir) / "pretrained.ckpt").string();
    save_checkpoint(ckpt, sys.all_params());
    save_demos((fs::path(config.out_dir) / "demos_used.jsonl").string(), kept);
    std::cout << "checkpoint: " << ckpt << "\n";
    return 0;
}

int run_expert_demo(const RunConfig& config) {
    fs::create_directories(config.out_dir);
    const Grid grid = Grid::load(config.grid_path);
    const std::vector<Chronic> chronics = chronics_for(config, grid, /*eval_split=*/false);
    DemoStats stats;
    const DemoSet demos = collect_demonstrations(grid, chronics, config.env, config.hp,
                                                 config.demo_episodes, 0.02, &stats);
    const std::string path = (fs::path(config.out_dir) / "demos.jsonl").string();
    save_demos(path, demos);
    std::cout << "episodes " << stats.episodes << ", steps " << stats.steps
              << ", danger steps " << stats.danger_steps << ", expert actions "
              << stats.expert_actions << "\n";
    std::cout << "agent demos " << demos.agent.size() << ", manager demos "
              << demos.manager.size() << " -> " << path << "\n";
    return 0;
}

int run_evaluate(const RunConfig& config, const std::string& checkpoint) {
    fs::create_directories(config.out_dir);
    const Grid grid = Grid::load(config.grid_path);
    const std::vector<Chronic> chronics = chronics_for(config, grid, /*eval_split=*/true);
    PolicySystem sys = restore_system(grid, config, checkpoint);

    const EvalReport policy = evaluate_policy(sys, chronics, config.env, actor_for(config));
    const EvalReport baseline = evaluate_do_nothing(grid, chronics, config.env);
    write_eval_csv((fs::path(config.out_dir) / "eval.csv").string(), policy);
    write_latency_sidecar((fs::path(config.out_dir) / "eval_latency.csv").string(), policy);
    write_eval_csv((fs::path(config.out_dir) / "do_nothing.csv").string(), baseline);

    print_eval("policy", policy);
    std::cout << "decision latency " << policy.mean_decision_us << " +- "
              << policy.std_decision_us << " us\n";
    print_eval("do-nothing", baseline);
    if (baseline.mean_survive > 0.0)
        std::cout << "improvement: " << policy.mean_survive / baseline.mean_survive
                  << "x do-nothing\n";
    return 0;
}

int run_ablate(const RunConfig& base, const std::vector<std::string>& rows) {
    fs::create_directories(base.out_dir);
    const Grid grid = Grid::load(base.grid_path);
    const std::vector<Chronic> eval_chronics = chronics_for(base, grid, /*eval_split=*/true);
    const EvalReport baseline = evaluate_do_nothing(grid, eval_chronics, base.env);

    std::ofstream table((fs::path(base.out_dir) / "ablation.csv").string());
    if (!table) throw std::runtime_error("ablation.csv: cannot open");
    table << "row,train_mean_survive,eval_mean_survive,do_nothing_mean_survive\n";

    for (const std::string& row : rows) {
        RunConfig config = base;  // identical seeds, chronics, and budgets per row
        if (row == "complete") {
        } else if (row == "no_gnn") {
            config.use_gnn = false;
        } else if (row == "no_dqfd") {
            config.use_dqfd = false;
        } else if (row == "no_shaping") {
            config.shaping = ShapingMode::kOff;
        } else {
            throw std::invalid_argument("unknown ablation row: " + row);
        }
        config.out_dir = (fs::path(base.out_dir) / row).string();

        std::cout << "=== " << row << " ===\n";
        const TrainResult result = train(config);
        PolicySystem sys = restore_system(grid, config, result.checkpoint_path);
        const EvalReport eval =
            evaluate_policy(sys, eval_chronics, config.env, actor_for(config));
        std::cout << row << ": train mean survive " << result.mean_survive_time
                  << ", eval mean survive " << eval.mean_survive << " (do-nothing "
                  << baseline.mean_survive << ")\n";
        table << row << ',' << result.mean_survive_time << ',' << eval.mean_survive << ','
              << baseline.mean_survive << '\n';
    }
    if (!table) throw std::runtime_error("ablation.csv: write failed");
    std::cout << "table: " << (fs::path(base.out_dir) / "ablation.csv").string() << "\n";
    return 0;
}

int run_bench(const RunConfig& config, const std::string& checkpoint,
              const std::string& states_path, int repeats) {
    fs::create_directories(config.out_dir);
    const Grid grid = Grid::load(config.grid_path);
    PolicySystem sys = restore_system(grid, config, checkpoint);
    const std::vector<StateSnapshot> states = load_snapshots(states_path, grid);
    if (states.size() < 100)
        std::cerr << "warning: only " << states.size()
                  << " recorded danger states (benchmark contract expects >= 100)\n";

    const BenchReport report = bench_inference(sys, grid, states, config.env, repeats);
    write_bench_csv((fs::path(config.out_dir) / "bench.csv").string(), report);
    std::cout << "states " << report.states << ", repeats " << repeats << "\n";
    std::cout << "agent (filter off) " << report.agent_mean_us << " +- "
              << report.agent_std_us << " us\n";
    std::cout << "agent (filter on)  " << report.filter_mean_us << " +- "
              << report.filter_std_us << " us\n";
    std::cout << "expert             " << report.expert_mean_us << " +- "
              << report.expert_std_us << " us\n";
    std::cout << "speedup (no filter vs expert): " << report.speedup_no_filter << "x\n";
    std::cout << "expert cost vs candidates: slope " << report.expert_slope_us
              << " us/candidate, corr " << report.expert_corr << " (agent corr "
              << report.agent_corr << ")\n";
    return 0;
}

int run_export_graph(const RunConfig& config, int chronic_index) {
    fs::create_directories(config.out_dir);
    const Grid grid = Grid::load(config.grid_path);
    const std::vector<Chronic> chronics = chronics_for(config, grid, /*eval_split=*/false);
    if (chronic_index < 0 || chronic_index >= static_cast<int>(chronics.size()))
        throw std::invalid_argument("--chronic index out of range");
    const SimState state = reset(grid, chronics[chronic_index], config.env);
    const LineGraph graph = build_line_graph(state);
    const std::string edges = (fs::path(config.out_dir) / "graph_edges.csv").string();
    const std::string features = (fs::path(config.out_dir) / "graph_features.csv").string();
    write_line_graph_csv(graph, edges, features);
    std::cout << graph.node_features.rows() << " nodes x " << graph.node_features.cols()
              << " features, " << static_cast<long>(graph.adjacency.sum() / 2) << " edges\n";
    std::cout << "edges: " << edges << "\nfeatures: " << features << "\n";
    return 0;
}

int run_export_heatmap(const RunConfig& config, const std::string& checkpoint) {
    if (!config.use_gnn)
        throw std::invalid_argument("export-heatmap: this configuration disables the GNN");
    fs::create_directories(config.out_dir);
    const Grid grid = Grid::load(config.grid_path);
    PolicySystem sys = restore_system(grid, config, checkpoint);
    const GnnHeatmap heatmap = gnn_heatmap(sys);
    const std::string path = (fs::path(config.out_dir) / "heatmap.csv").string();
    write_heatmap_csv(path, heatmap);
    std::cout << heatmap.matrix.rows() << " x " << heatmap.matrix.cols()
              << " first-layer weights, symmetry score " << heatmap.symmetry_score << "\n";
    std::cout << "heatmap: " << path << "\n";
    return 0;
}

int run_gen_chronics(const RunConfig& config, bool eval_split) {
    fs::create_directories(config.out_dir);
    const Grid grid = Grid::load(config.grid_path);
    RunConfig synth = config;
    synth.chronics_dir.clear();  // force synthesis even if the config names a directory
    const std::vector<Chronic> chronics = chronics_for(synth, grid, eval_split);
    for (const Chronic& chronic : chronics) {
        save_chronic(config.out_dir, chronic);
        std::cout << chronic.id << ": horizon " << chronic.horizon() << ", do-nothing survives "
                  << do_nothing_survive_time(grid, chronic, config.env) << "\n";
    }
    std::cout << chronics.size() << " chronics -> " << config.out_dir << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Distributed topology-control RL harness"};
    app.require_subcommand(1);
    int exit_code = 0;

    auto add = [&](const char* name, const char* help) {
        CLI::App* cmd = app.add_subcommand(name, help);
        auto binder = std::make_shared<FlagBinder>();
        binder->bind(cmd);
        return std::make_pair(cmd, binder);
    };

    {
        auto [cmd, binder] = add("train", "DQfD pretraining + online training + final eval");
        cmd->callback([binder, &exit_code] { exit_code = run_train(binder->resolve()); });
    }
    {
        auto [cmd, binder] = add("pretrain", "demo-only DQfD pretraining");
        auto demo_path = std::make_shared<std::string>();
        auto holdout = std::make_shared<double>(0.2);
        cmd->add_option("--demos", *demo_path, "demo JSONL (collected fresh when omitted)");
        cmd->add_option("--holdout", *holdout, "fraction of demos held out for agreement")
            ->check(CLI::Range(0.0, 0.5));
        cmd->callback([binder, demo_path, holdout, &exit_code] {
            exit_code = run_pretrain(binder->resolve(), *demo_path, *holdout);
        });
    }
    {
        auto [cmd, binder] = add("expert-demo", "collect expert demonstrations");
        cmd->callback([binder, &exit_code] { exit_code = run_expert_demo(binder->resolve()); });
    }
    {
        auto [cmd, binder] = add("evaluate", "greedy evaluation vs the do-nothing baseline");
        auto checkpoint = std::make_shared<std::string>();
        cmd->add_option("--checkpoint", *checkpoint, "trained parameters")
            ->required()
            ->check(CLI::ExistingFile);
        cmd->callback([binder, checkpoint, &exit_code] {
            exit_code = run_evaluate(binder->resolve(), *checkpoint);
        });
    }
    {
        auto [cmd, binder] = add("ablate", "train + evaluate each ablation row");
        auto rows = std::make_shared<std::vector<std::string>>(
            std::vector<std::string>{"complete", "no_gnn", "no_dqfd", "no_shaping"});
        cmd->add_option("--rows", *rows, "subset of complete,no_gnn,no_dqfd,no_shaping")
            ->delimiter(',');
        cmd->callback([binder, rows, &exit_code] {
            exit_code = run_ablate(binder->resolve(), *rows);
        });
    }
    {
        auto [cmd, binder] = add("bench-inference", "time agent vs filter vs expert decisions");
        auto checkpoint = std::make_shared<std::string>();
        auto states = std::make_shared<std::string>();
        auto repeats = std::make_shared<int>(3);
        cmd->add_option("--checkpoint", *checkpoint, "trained parameters")
            ->required()
            ->check(CLI::ExistingFile);
        cmd->add_option("--states", *states, "danger-state JSONL from a training run")
            ->required()
            ->check(CLI::ExistingFile);
        cmd->add_option("--repeats", *repeats, "timing repeats per state (min taken)")
            ->check(CLI::PositiveNumber);
        cmd->callback([binder, checkpoint, states, repeats, &exit_code] {
            exit_code = run_bench(binder->resolve(), *checkpoint, *states, *repeats);
        });
    }
    {
        auto [cmd, binder] = add("export-graph", "dump the line graph as edge + feature CSVs");
        auto index = std::make_shared<int>(0);
        cmd->add_option("--chronic", *index, "chronic index whose first step is exported");
        cmd->callback([binder, index, &exit_code] {
            exit_code = run_export_graph(binder->resolve(), *index);
        });
    }
    {
        auto [cmd, binder] = add("export-heatmap", "dump first-layer GNN weights as CSV");
        auto checkpoint = std::make_shared<std::string>();
        cmd->add_option("--checkpoint", *checkpoint, "trained parameters")
            ->required()
            ->check(CLI::ExistingFile);
        cmd->callback([binder, checkpoint, &exit_code] {
            exit_code = run_export_heatmap(binder->resolve(), *checkpoint);
        });
    }
    {
        auto [cmd, binder] = add("gen-chronics", "synthesize calibrated chronics to disk");
        auto eval_split = std::make_shared<bool>(false);
        cmd->add_flag("--eval-split", *eval_split, "use the evaluation seed range");
        cmd->callback([binder, eval_split, &exit_code] {
            exit_code = run_gen_chronics(binder->resolve(), *eval_split);
        });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return exit_code;
}
