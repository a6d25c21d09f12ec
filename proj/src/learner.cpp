#include "gridrl/learner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "gridrl/checkpoint.hpp"
#include "gridrl/graph_obs.hpp"

namespace gridrl {

namespace {

constexpr std::size_t kMaxRecordedDangerStates = 512;

std::string fmt(double v) {
    std::ostringstream s;
    s << std::setprecision(17) << v;
    return s.str();
}

double mean_of(const std::vector<double>& xs) {
    if (xs.empty()) return 0.0;
    double sum = 0.0;
    for (double x : xs) sum += x;
    return sum / static_cast<double>(xs.size());
}

double std_of(const std::vector<double>& xs) {
    if (xs.size() < 2) return 0.0;
    const double mu = mean_of(xs);
    double acc = 0.0;
    for (double x : xs) acc += (x - mu) * (x - mu);
    return std::sqrt(acc / static_cast<double>(xs.size() - 1));
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    if (n < 2 || y.size() != n) return 0.0;
    const double mx = mean_of(x), my = mean_of(y);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx <= 0.0 || syy <= 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

double ls_slope(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    if (n < 2 || y.size() != n) return 0.0;
    const double mx = mean_of(x), my = mean_of(y);
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    if (sxx <= 0.0) return 0.0;
    return sxy / sxx;
}

int legal_argmax(const Eigen::MatrixXd& q, const std::vector<int>& legal) {
    int best = legal.front();
    for (int idx : legal)
        if (q(0, idx) > q(0, best)) best = idx;
    return best;
}

} // namespace

Learner::Learner(PolicySystem& system, const RunConfig& config)
    : sys_(system),
      config_(config),
      manager_buffer_(static_cast<std::size_t>(config.replay_capacity), config.hp.alpha_per,
                      config.hp.eps_prio, config.hp.eps_demo),
      gnn_opt_(system.gnn_main.params(), config.hp.lr, config.hp.grad_clip),
      manager_opt_(system.manager_main.params(), config.hp.lr, config.hp.grad_clip),
      sample_rng_(Rng::fork(config.seed, "learn/sample")) {
    const int lines = static_cast<int>(system.agents.size());
    agent_buffers_.reserve(lines);
    agent_opts_.reserve(lines);
    for (int line = 0; line < lines; ++line) {
        agent_buffers_.emplace_back(static_cast<std::size_t>(config.replay_capacity),
                                    config.hp.alpha_per, config.hp.eps_prio, config.hp.eps_demo);
        agent_opts_.emplace_back(system.agents[line].main.params(), config.hp.lr,
                                 config.hp.grad_clip);
    }
}

void Learner::load_demo_set(const DemoSet& demos) {
    for (const AgentTransition& tr : demos.agent) {
        if (tr.line < 0 || tr.line >= static_cast<int>(agent_buffers_.size()))
            throw std::invalid_argument("load_demo_set: demo line out of range");
        agent_buffers_[tr.line].add_demo(tr);
    }
    for (const ManagerTransition& tr : demos.manager) manager_buffer_.add_demo(tr);
}

void Learner::add_agent(const AgentTransition& t) {
    if (t.line < 0 || t.line >= static_cast<int>(agent_buffers_.size()))
        throw std::invalid_argument("add_agent: line out of range");
    agent_buffers_[t.line].add(t);
}

void Learner::add_manager(const ManagerTransition& t) { manager_buffer_.add(t); }

double Learner::beta() const {
    return beta_at(rounds_, config_.beta_horizon_updates, config_.hp.beta_per_start,
                   config_.hp.beta_per_end);
}

const ReplayBuffer<AgentTransition>& Learner::agent_buffer(int line) const {
    return agent_buffers_.at(static_cast<std::size_t>(line));
}

void Learner::end_round() {
    ++rounds_;
    if (rounds_ % config_.hp.sync_interval == 0) {
        const double tau = config_.hp.tau;
        soft_update(sys_.gnn_main.params(), sys_.gnn_target.params(), tau);
        soft_update(sys_.manager_main.params(), sys_.manager_target.params(), tau);
        for (LineAgent& agent : sys_.agents)
            soft_update(agent.main.params(), agent.target.params(), tau);
    }
}

double Learner::agent_potential(const SimState& s, int line) const {
    switch (config_.shaping) {
        case ShapingMode::kOff: return 0.0;
        case ShapingMode::kStatic: return static_potential(s);
        case ShapingMode::kBootstrapped: {
            Eigen::RowVectorXd emb =
                Eigen::RowVectorXd::Zero(sys_.config.embedding_width);
            if (config_.use_gnn) {
                const LineGraph graph = build_line_graph(s);
                emb = sys_.gnn_target.infer(graph.node_features, sys_.norm_adjacency).row(line);
            }
            Eigen::RowVectorXd input(sys_.agent_input_width());
            input << emb, agent_local_features(s, line);
            return sys_.agents[line].target.value_stream(input)(0);
        }
    }
    return 0.0;
}

double Learner::manager_potential(const SimState& s) const {
    switch (config_.shaping) {
        case ShapingMode::kOff: return 0.0;
        case ShapingMode::kStatic: return static_potential(s);
        case ShapingMode::kBootstrapped:
            return sys_.manager_target.value_stream(manager_observation(s))(0);
    }
    return 0.0;
}

std::optional<DqfdTerms> Learner::update_agent(int line, int min_items) {
    ReplayBuffer<AgentTransition>& buf = agent_buffers_.at(static_cast<std::size_t>(line));
    if (buf.size() < static_cast<std::size_t>(std::max(1, min_items))) return std::nullopt;
    const ReplaySample sample =
        buf.sample(static_cast<std::size_t>(config_.hp.batch_size), beta(), sample_rng_);
    return apply_agent_update(line, sample, /*update_priorities=*/true);
}

DqfdTerms Learner::apply_agent_update(int line, const ReplaySample& sample,
                                      bool update_priorities) {
    const Grid& grid = *sys_.grid;
    const Hyperparams& hp = config_.hp;
    ReplayBuffer<AgentTransition>& buf = agent_buffers_.at(static_cast<std::size_t>(line));
    const int b = static_cast<int>(sample.indices.size());
    const int width = sys_.agent_input_width();
    const int emb_width = sys_.config.embedding_width;
    const bool use_gnn = config_.use_gnn;

    Eigen::MatrixXd x0(b, width);
    Eigen::MatrixXd x1_main = Eigen::MatrixXd::Zero(b, width);
    Eigen::MatrixXd x1_target = Eigen::MatrixXd::Zero(b, width);
    Eigen::MatrixXd xn_main = Eigen::MatrixXd::Zero(b, width);
    Eigen::MatrixXd xn_target = Eigen::MatrixXd::Zero(b, width);
    Eigen::VectorXd r1(b), rn(b), gamma1(b), gamman(b);
    std::vector<std::uint8_t> done1(b), donen(b);
    std::vector<std::vector<int>> legal1(b), legaln(b);
    std::vector<int> actions(b);
    std::vector<std::uint8_t> is_demo(b);
    std::vector<Eigen::MatrixXd> features0(b);

    // Builds the embedding-plus-locals input row of one successor state and
    // returns its potential; done states are skipped entirely (their target
    // contribution is forced to the reward).
    auto fill_next = [&](const StateSnapshot& snap, bool done, Eigen::MatrixXd& main_rows,
                         Eigen::MatrixXd& target_rows, int row,
                         std::vector<int>& legal) -> double {
        if (done) {
            legal = {0};
            return 0.0;
        }
        const SimState s = from_snapshot(grid, snap, config_.env);
        const Eigen::RowVectorXd locals = agent_local_features(s, line);
        if (use_gnn) {
            const LineGraph graph = build_line_graph(s);
            main_rows.row(row) << sys_.gnn_main.infer(graph.node_features, sys_.norm_adjacency)
                                      .row(line),
                locals;
            target_rows.row(row) << sys_.gnn_target
                                        .infer(graph.node_features, sys_.norm_adjacency)
                                        .row(line),
                locals;
        } else {
            main_rows.row(row).tail(kAgentLocalWidth) = locals;
            target_rows.row(row).tail(kAgentLocalWidth) = locals;
        }
        legal = legal_action_indices(grid, s.topology, line);
        return config_.shaping == ShapingMode::kOff ? 0.0 : agent_potential(s, line);
    };

    for (int i = 0; i < b; ++i) {
        const AgentTransition& tr = buf.at(sample.indices[i]);
        actions[i] = tr.action_index;
        is_demo[i] = buf.is_demo(sample.indices[i]) ? 1 : 0;
        done1[i] = tr.done1 ? 1 : 0;
        donen[i] = tr.done_n ? 1 : 0;

        const SimState s0 = from_snapshot(grid, tr.s0, config_.env);
        const Eigen::RowVectorXd locals0 = agent_local_features(s0, line);
        if (use_gnn) {
            const LineGraph graph = build_line_graph(s0);
            features0[i] = graph.node_features;
            x0.row(i) << sys_.gnn_main.infer(graph.node_features, sys_.norm_adjacency).row(line),
                locals0;
        } else {
            x0.row(i).setZero();
            x0.row(i).tail(kAgentLocalWidth) = locals0;
        }

        const double phi0 =
            config_.shaping == ShapingMode::kOff ? 0.0 : agent_potential(s0, line);
        const double phi1 = fill_next(tr.s1, tr.done1, x1_main, x1_target, i, legal1[i]);
        const double phin = fill_next(tr.sn, tr.done_n, xn_main, xn_target, i, legaln[i]);

        r1(i) = shape_reward(tr.reward1, phi0, phi1, tr.done1, hp.gamma, config_.shaping);
        const double gn = std::pow(hp.gamma, tr.n_actual);
        rn(i) = shape_reward(tr.reward_n, phi0, phin, tr.done_n, gn, config_.shaping);
        gamma1(i) = hp.gamma;
        gamman(i) = gn;
    }

    DuelingNet& main = sys_.agents[line].main;
    const DuelingNet& target = sys_.agents[line].target;

    DqfdBatch batch;
    batch.action = actions;
    batch.is_demo = is_demo;
    batch.is_weight = Eigen::Map<const Eigen::VectorXd>(sample.weights.data(), b);
    batch.target_1step = double_dqn_targets(main.infer(x1_main), target.infer(x1_target), r1,
                                            done1, gamma1, legal1);
    batch.target_nstep = double_dqn_targets(main.infer(xn_main), target.infer(xn_target), rn,
                                            donen, gamman, legaln);
    batch.q = main.forward(x0);

    std::vector<Tensor*> l2_params = main.params();
    if (use_gnn) {
        const std::vector<Tensor*> gnn_params = sys_.gnn_main.params();
        l2_params.insert(l2_params.end(), gnn_params.begin(), gnn_params.end());
    }
    const DqfdTerms terms = dqfd_loss(batch, l2_params, hp);
    if (!std::isfinite(terms.total))
        throw std::runtime_error("agent " + std::to_string(line) + " round " +
                                 std::to_string(rounds_) + ": non-finite loss");

    agent_opts_[static_cast<std::size_t>(line)].zero_grad();
    if (use_gnn) gnn_opt_.zero_grad();
    const Eigen::MatrixXd dx = main.backward(terms.dq);
    if (use_gnn) {
        for (int i = 0; i < b; ++i) {
            sys_.gnn_main.forward(features0[i], sys_.norm_adjacency);
            Eigen::MatrixXd dh = Eigen::MatrixXd::Zero(grid.num_lines(), emb_width);
            dh.row(line) = dx.row(i).head(emb_width);
            sys_.gnn_main.backward(dh);
        }
    }
    add_l2_gradient(l2_params, hp.lambda_l2);

    if (!agent_opts_[static_cast<std::size_t>(line)].step())
        throw std::runtime_error("agent " + std::to_string(line) + " round " +
                                 std::to_string(rounds_) + ": non-finite gradient");
    if (use_gnn && !gnn_opt_.step())
        throw std::runtime_error("shared gnn round " + std::to_string(rounds_) +
                                 ": non-finite gradient");

    if (update_priorities)
        for (int i = 0; i < b; ++i) buf.update_priority(sample.indices[i], terms.td_abs(i));
    return terms;
}

std::optional<DqfdTerms> Learner::update_manager(int min_items) {
    const Grid& grid = *sys_.grid;
    const Hyperparams& hp = config_.hp;
    if (manager_buffer_.size() < static_cast<std::size_t>(std::max(1, min_items)))
        return std::nullopt;
    const ReplaySample sample =
        manager_buffer_.sample(static_cast<std::size_t>(hp.batch_size), beta(), sample_rng_);
    const int b = static_cast<int>(sample.indices.size());

    Eigen::MatrixXd x0(b, manager_observation_width(grid));
    Eigen::MatrixXd x1 = Eigen::MatrixXd::Zero(b, manager_observation_width(grid));
    Eigen::VectorXd rewards(b), gammas(b);
    std::vector<std::uint8_t> done(b);
    std::vector<int> actions(b);
    std::vector<std::uint8_t> is_demo(b);

    for (int i = 0; i < b; ++i) {
        const ManagerTransition& tr = manager_buffer_.at(sample.indices[i]);
        actions[i] = tr.line;
        is_demo[i] = manager_buffer_.is_demo(sample.indices[i]) ? 1 : 0;
        done[i] = tr.done ? 1 : 0;

        const SimState s0 = from_snapshot(grid, tr.s0, config_.env);
        x0.row(i) = manager_observation(s0);
        const double phi0 = config_.shaping == ShapingMode::kOff ? 0.0 : manager_potential(s0);
        double phi1 = 0.0;
        const double gamma_dt = std::pow(hp.gamma, tr.dt);
        if (!tr.done) {
            const SimState s1 = from_snapshot(grid, tr.s1, config_.env);
            x1.row(i) = manager_observation(s1);
            if (config_.shaping != ShapingMode::kOff) phi1 = manager_potential(s1);
        }
        rewards(i) = shape_reward(tr.reward, phi0, phi1, tr.done, gamma_dt, config_.shaping);
        gammas(i) = gamma_dt;
    }

    DqfdBatch batch;
    batch.action = actions;
    batch.is_demo = is_demo;
    batch.is_weight = Eigen::Map<const Eigen::VectorXd>(sample.weights.data(), b);
    batch.target_1step = double_dqn_targets(sys_.manager_main.infer(x1),
                                            sys_.manager_target.infer(x1), rewards, done, gammas);
    // The semi-MDP transition is already multi-step; the n-step head is
    // disabled for the manager.
    batch.target_nstep = batch.target_1step;
    batch.q = sys_.manager_main.forward(x0);

    Hyperparams manager_hp = hp;
    manager_hp.lambda_nstep = 0.0;
    const std::vector<Tensor*> params = sys_.manager_main.params();
    const DqfdTerms terms = dqfd_loss(batch, params, manager_hp);
    if (!std::isfinite(terms.total))
        throw std::runtime_error("manager round " + std::to_string(rounds_) +
                                 ": non-finite loss");

    manager_opt_.zero_grad();
    sys_.manager_main.backward(terms.dq);
    add_l2_gradient(params, manager_hp.lambda_l2);
    if (!manager_opt_.step())
        throw std::runtime_error("manager round " + std::to_string(rounds_) +
                                 ": non-finite gradient");

    for (int i = 0; i < b; ++i)
        manager_buffer_.update_priority(sample.indices[i], terms.td_abs(i));
    return terms;
}

std::vector<DqfdTerms> Learner::overfit_agent(int line, int steps) {
    ReplayBuffer<AgentTransition>& buf = agent_buffers_.at(static_cast<std::size_t>(line));
    if (buf.size() == 0) throw std::logic_error("overfit_agent: empty buffer");
    const ReplaySample sample =
        buf.sample(static_cast<std::size_t>(config_.hp.batch_size), beta(), sample_rng_);
    std::vector<DqfdTerms> out;
    out.reserve(static_cast<std::size_t>(steps));
    for (int s = 0; s < steps; ++s)
        out.push_back(apply_agent_update(line, sample, /*update_priorities=*/false));
    return out;
}

PretrainReport pretrain_dqfd(Learner& learner, const Grid& grid, int steps) {
    PretrainReport report;
    std::vector<int> demo_agents;
    for (int line = 0; line < grid.num_lines(); ++line) {
        if (learner.agent_buffer(line).demo_count() > 0)
            demo_agents.push_back(line);
        else
            ++report.agents_skipped;
    }
    report.agents_trained = static_cast<int>(demo_agents.size());
    const bool manager_demos = learner.manager_buffer().demo_count() > 0;
    if (demo_agents.empty() && !manager_demos)
        throw std::invalid_argument("pretrain_dqfd: no demonstrations loaded");

    for (int s = 0; s < steps; ++s) {
        double je = 0.0, total = 0.0;
        int n = 0;
        for (int line : demo_agents) {
            const auto terms = learner.update_agent(line, 1);
            if (terms) {
                je += terms->expert;
                total += terms->total;
                ++n;
            }
        }
        if (manager_demos) {
            const auto terms = learner.update_manager(1);
            if (terms) {
                je += terms->expert;
                total += terms->total;
                ++n;
            }
        }
        learner.end_round();
        ++report.rounds;
        if (n > 0) {
            const double mean_je = je / n, mean_total = total / n;
            if (s == 0) {
                report.expert_loss_first = mean_je;
                report.total_loss_first = mean_total;
            }
            report.expert_loss_last = mean_je;
            report.total_loss_last = mean_total;
        }
    }
    return report;
}

double demo_agreement(const PolicySystem& system, const DemoSet& held_out, bool use_gnn) {
    const Grid& grid = *system.grid;
    int agree = 0, total = 0;
    for (const AgentTransition& tr : held_out.agent) {
        const SimState s0 = from_snapshot(grid, tr.s0);
        Eigen::RowVectorXd input(system.agent_input_width());
        input << system.embed(s0, use_gnn).row(tr.line), agent_local_features(s0, tr.line);
        const Eigen::MatrixXd q = system.agents[tr.line].main.infer(input);
        const std::vector<int> legal = legal_action_indices(grid, s0.topology, tr.line);
        if (legal_argmax(q, legal) == tr.action_index) ++agree;
        ++total;
    }
    for (const ManagerTransition& tr : held_out.manager) {
        const SimState s0 = from_snapshot(grid, tr.s0);
        const Eigen::MatrixXd q = system.manager_main.infer(manager_observation(s0));
        int best = 0;
        for (int i = 1; i < static_cast<int>(q.cols()); ++i)
            if (q(0, i) > q(0, best)) best = i;
        if (best == tr.line) ++agree;
        ++total;
    }
    return total > 0 ? static_cast<double>(agree) / total : 0.0;
}

std::vector<Chronic> chronics_for(const RunConfig& config, const Grid& grid, bool eval_split) {
    if (!config.chronics_dir.empty()) return load_chronics(config.chronics_dir, grid);
    const ProfileHardness hardness =
        config.hardness == "hard" ? ProfileHardness::kHard : ProfileHardness::kEasy;
    const std::uint64_t seed =
        eval_split ? config.eval_chronic_seed : config.train_chronic_seed;
    const int count = eval_split ? config.eval_chronics : config.train_chronics;
    return make_synthetic_set(grid, hardness, seed, count, config.horizon, config.env);
}

TrainResult train(const RunConfig& config) {
    config.validate();
    namespace fs = std::filesystem;
    fs::create_directories(config.out_dir);
    const Hyperparams& hp = config.hp;

    const Grid grid = Grid::load(config.grid_path);
    const std::vector<Chronic> chronics = chronics_for(config, grid, /*eval_split=*/false);
    PolicySystem sys(grid, config.net, config.seed);
    Learner learner(sys, config);

    TrainResult result;
    if (config.use_dqfd && config.demo_episodes > 0) {
        const DemoSet demos = collect_demonstrations(grid, chronics, config.env, hp,
                                                     config.demo_episodes, 0.02,
                                                     &result.demo_stats);
        if (!demos.agent.empty() || !demos.manager.empty()) {
            learner.load_demo_set(demos);
            result.pretrain = pretrain_dqfd(learner, grid, config.pretrain_steps);
        }
    }

    ActorConfig actor;
    actor.filter_on = config.filter_on;
    actor.use_gnn = config.use_gnn;
    actor.danger_ratio = hp.danger_ratio;
    Rng act_rng = Rng::fork(config.seed, "train/act");

    std::vector<StateSnapshot> danger_states;
    long danger_decisions = 0;

    const fs::path out_dir(config.out_dir);
    const fs::path checkpoint_path = out_dir / "latest.ckpt";

    for (int episode = 0; episode < config.train_episodes; ++episode) {
        const Chronic& chronic = chronics[episode % chronics.size()];
        SimState state = reset(grid, chronic, config.env);

        std::vector<StateSnapshot> snaps{to_snapshot(state)};
        std::vector<double> rewards;
        std::vector<std::uint8_t> danger_flags{
            static_cast<std::uint8_t>(is_danger(state, hp.danger_ratio) ? 1 : 0)};
        struct Decision {
            int k;
            int line;
            int idx;
        };
        std::vector<Decision> decisions;
        std::size_t agent_final = 0, manager_final = 0;

        EpisodeMetrics metrics;
        metrics.episode = episode;
        metrics.chronic = chronic.id;
        const int rounds_before = learner.rounds();
        double agent_loss_sum = 0.0, manager_loss_sum = 0.0;
        int agent_loss_n = 0, manager_loss_n = 0;

        while (!state.done) {
            Action action = Action::noop();
            int acted_line = -1;
            if (danger_flags.back()) {
                const double eps =
                    epsilon_at(static_cast<double>(danger_decisions), hp.eps0,
                               hp.eps_half_life, hp.eps_min);
                const ActDecision d = act(sys, state, eps, eps, act_rng, actor);
                decisions.push_back({static_cast<int>(rewards.size()), d.line, d.action_index});
                action = d.action;
                acted_line = d.line;
                ++danger_decisions;
                ++metrics.danger_decisions;
                if (danger_states.size() < kMaxRecordedDangerStates)
                    danger_states.push_back(snaps.back());
            }

            StepOutcome outcome = step(state, action);
            rewards.push_back(outcome.reward);
            state = std::move(outcome.next);
            snaps.push_back(to_snapshot(state));
            danger_flags.push_back(static_cast<std::uint8_t>(
                !state.done && is_danger(state, hp.danger_ratio) ? 1 : 0));
            const int total = static_cast<int>(rewards.size());

            // Agent transitions mature after n steps or at the terminal.
            while (agent_final < decisions.size()) {
                const Decision& d = decisions[agent_final];
                if (total - d.k < hp.n_step && !state.done) break;
                AgentTransition tr;
                tr.s0 = snaps[d.k];
                tr.line = d.line;
                tr.action_index = d.idx;
                tr.reward1 = rewards[d.k];
                tr.s1 = snaps[d.k + 1];
                tr.done1 = snaps[d.k + 1].done;
                const int m = std::min(hp.n_step, total - d.k);
                double rn = 0.0;
                for (int j = 0; j < m; ++j) rn += std::pow(hp.gamma, j) * rewards[d.k + j];
                tr.reward_n = rn;
                tr.sn = snaps[d.k + m];
                tr.done_n = snaps[d.k + m].done;
                tr.n_actual = m;
                learner.add_agent(tr);
                ++agent_final;
            }

            // Manager transitions close at the next danger state or terminal.
            while (manager_final < decisions.size() &&
                   (danger_flags.back() || state.done)) {
                const Decision& d = decisions[manager_final];
                ManagerTransition mt;
                mt.s0 = snaps[d.k];
                mt.line = d.line;
                double r = 0.0;
                for (int j = d.k; j < total; ++j)
                    r += std::pow(hp.gamma, j - d.k) * rewards[j];
                mt.reward = r;
                mt.s1 = snaps[total];
                mt.done = snaps[total].done;
                mt.dt = total - d.k;
                learner.add_manager(mt);
                ++manager_final;
            }

            if (acted_line >= 0) {
                for (int u = 0; u < config.updates_per_decision; ++u) {
                    const auto agent_terms = learner.update_agent(acted_line, hp.batch_size);
                    const auto manager_terms = learner.update_manager(hp.batch_size);
                    if (agent_terms) {
                        agent_loss_sum += agent_terms->total;
                        ++agent_loss_n;
                    }
                    if (manager_terms) {
                        manager_loss_sum += manager_terms->total;
                        ++manager_loss_n;
                    }
                    if (agent_terms || manager_terms) learner.end_round();
                }
            }
        }

        metrics.survive_time = state.t;
        metrics.steps = static_cast<int>(rewards.size());
        metrics.updates = learner.rounds() - rounds_before;
        metrics.epsilon = epsilon_at(static_cast<double>(danger_decisions), hp.eps0,
                                     hp.eps_half_life, hp.eps_min);
        metrics.beta = learner.beta();
        metrics.agent_loss = agent_loss_n > 0 ? agent_loss_sum / agent_loss_n : 0.0;
        metrics.manager_loss = manager_loss_n > 0 ? manager_loss_sum / manager_loss_n : 0.0;
        metrics.blackout = state.blackout;
        result.episodes.push_back(metrics);

        if ((episode + 1) % config.checkpoint_every == 0)
            save_checkpoint(checkpoint_path.string(), sys.all_params());
    }

    save_checkpoint(checkpoint_path.string(), sys.all_params());
    result.checkpoint_path = checkpoint_path.string();

    const fs::path config_path = out_dir / "config.json";
    save_run_config(config_path.string(), config);
    result.config_path = config_path.string();

    const fs::path danger_path = out_dir / "danger_states.jsonl";
    save_snapshots(danger_path.string(), danger_states);
    result.danger_states_path = danger_path.string();

    const fs::path metrics_path = out_dir / "metrics.csv";
    {
        std::ofstream out(metrics_path);
        if (!out) throw std::runtime_error(metrics_path.string() + ": cannot open");
        out << "episode,chronic,survive_time,steps,danger_decisions,updates,epsilon,beta,"
               "agent_loss,manager_loss,blackout\n";
        for (const EpisodeMetrics& m : result.episodes) {
            out << m.episode << ',' << m.chronic << ',' << m.survive_time << ',' << m.steps
                << ',' << m.danger_decisions << ',' << m.updates << ',' << fmt(m.epsilon)
                << ',' << fmt(m.beta) << ',' << fmt(m.agent_loss) << ',' << fmt(m.manager_loss)
                << ',' << (m.blackout ? 1 : 0) << '\n';
        }
        if (!out) throw std::runtime_error(metrics_path.string() + ": write failed");
    }
    result.metrics_path = metrics_path.string();

    double survive_sum = 0.0;
    for (const EpisodeMetrics& m : result.episodes) survive_sum += m.survive_time;
    result.mean_survive_time =
        result.episodes.empty() ? 0.0 : survive_sum / result.episodes.size();
    return result;
}

EvalReport evaluate_policy(const PolicySystem& system, const std::vector<Chronic>& chronics,
                           const EnvConfig& env_config, const ActorConfig& actor) {
    const Grid& grid = *system.grid;
    EvalReport report;
    Rng rng;  // ε = 0: never drawn from
    std::vector<double> survive, latencies;

    for (const Chronic& chronic : chronics) {
        SimState state = reset(grid, chronic, env_config);
        EvalRow row;
        row.chronic = chronic.id;
        while (!state.done) {
            const auto t0 = std::chrono::steady_clock::now();
            const ActDecision d = act(system, state, 0.0, 0.0, rng, actor);
            const auto t1 = std::chrono::steady_clock::now();
            if (d.danger) {
                ++row.danger_decisions;
                latencies.push_back(
                    std::chrono::duration<double, std::micro>(t1 - t0).count());
            }
            StepOutcome outcome = step(state, d.action);
            state = std::move(outcome.next);
        }
        row.survive_time = state.t;
        row.completed = !state.blackout && state.t == chronic.horizon() - 1;
        survive.push_back(static_cast<double>(row.survive_time));
        report.rows.push_back(std::move(row));
    }

    report.mean_survive = mean_of(survive);
    report.std_survive = std_of(survive);
    report.mean_decision_us = mean_of(latencies);
    report.std_decision_us = std_of(latencies);
    return report;
}

EvalReport evaluate_do_nothing(const Grid& grid, const std::vector<Chronic>& chronics,
                               const EnvConfig& env_config) {
    EvalReport report;
    std::vector<double> survive;
    for (const Chronic& chronic : chronics) {
        SimState state = reset(grid, chronic, env_config);
        EvalRow row;
        row.chronic = chronic.id;
        while (!state.done) {
            if (is_danger(state, 0.95)) ++row.danger_decisions;
            StepOutcome outcome = step(state, Action::noop());
            state = std::move(outcome.next);
        }
        row.survive_time = state.t;
        row.completed = !state.blackout && state.t == chronic.horizon() - 1;
        survive.push_back(static_cast<double>(row.survive_time));
        report.rows.push_back(std::move(row));
    }
    report.mean_survive = mean_of(survive);
    report.std_survive = std_of(survive);
    return report;
}

void write_eval_csv(const std::string& path, const EvalReport& report) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error(path + ": cannot open");
    out << "chronic,survive_time,completed,danger_decisions\n";
    for (const EvalRow& row : report.rows)
        out << row.chronic << ',' << row.survive_time << ',' << (row.completed ? 1 : 0) << ','
            << row.danger_decisions << '\n';
    out << "# mean_survive=" << fmt(report.mean_survive) << '\n';
    out << "# std_survive=" << fmt(report.std_survive) << '\n';
    if (!out) throw std::runtime_error(path + ": write failed");
}

void write_latency_sidecar(const std::string& path, const EvalReport& report) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error(path + ": cannot open");
    out << "mean_decision_us," << fmt(report.mean_decision_us) << '\n';
    out << "std_decision_us," << fmt(report.std_decision_us) << '\n';
    if (!out) throw std::runtime_error(path + ": write failed");
}

BenchReport bench_inference(const PolicySystem& system, const Grid& grid,
                            const std::vector<StateSnapshot>& danger_states,
                            const EnvConfig& env_config, int repeats) {
    if (danger_states.empty())
        throw std::invalid_argument("bench_inference: no danger states");
    if (repeats < 1) throw std::invalid_argument("bench_inference: repeats must be positive");

    ActorConfig no_filter;
    no_filter.filter_on = false;
    ActorConfig with_filter;
    with_filter.filter_on = true;
    Rng rng;  // ε = 0

    BenchReport report;
    auto time_min_us = [repeats](auto&& run) {
        double best = std::numeric_limits<double>::infinity();
        for (int r = 0; r < repeats; ++r) {
            const auto t0 = std::chrono::steady_clock::now();
            run();
            const auto t1 = std::chrono::steady_clock::now();
            best = std::min(best,
                            std::chrono::duration<double, std::micro>(t1 - t0).count());
        }
        return best;
    };

    for (const StateSnapshot& snap : danger_states) {
        const SimState state = from_snapshot(grid, snap, env_config);
        if (state.done || !is_danger(state, no_filter.danger_ratio)) continue;
        report.candidates.push_back(count_expert_candidates(state));
        report.agent_us.push_back(
            time_min_us([&] { act(system, state, 0.0, 0.0, rng, no_filter); }));
        report.filter_us.push_back(
            time_min_us([&] { act(system, state, 0.0, 0.0, rng, with_filter); }));
        report.expert_us.push_back(time_min_us([&] { expert_action(state); }));
    }
    report.states = static_cast<int>(report.agent_us.size());
    if (report.states == 0)
        throw std::invalid_argument("bench_inference: no live danger states in input");

    report.agent_mean_us = mean_of(report.agent_us);
    report.agent_std_us = std_of(report.agent_us);
    report.filter_mean_us = mean_of(report.filter_us);
    report.filter_std_us = std_of(report.filter_us);
    report.expert_mean_us = mean_of(report.expert_us);
    report.expert_std_us = std_of(report.expert_us);
    report.speedup_no_filter =
        report.agent_mean_us > 0.0 ? report.expert_mean_us / report.agent_mean_us : 0.0;

    std::vector<double> cand(report.candidates.begin(), report.candidates.end());
    report.expert_slope_us = ls_slope(cand, report.expert_us);
    report.expert_corr = pearson(cand, report.expert_us);
    report.agent_corr = pearson(cand, report.agent_us);
    return report;
}

void write_bench_csv(const std::string& path, const BenchReport& report) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error(path + ": cannot open");
    out << "candidates,agent_us,filter_us,expert_us\n";
    for (int i = 0; i < report.states; ++i)
        out << report.candidates[i] << ',' << fmt(report.agent_us[i]) << ','
            << fmt(report.filter_us[i]) << ',' << fmt(report.expert_us[i]) << '\n';
    out << "# agent_mean_us=" << fmt(report.agent_mean_us)
        << " agent_std_us=" << fmt(report.agent_std_us) << '\n';
    out << "# filter_mean_us=" << fmt(report.filter_mean_us)
        << " filter_std_us=" << fmt(report.filter_std_us) << '\n';
    out << "# expert_mean_us=" << fmt(report.expert_mean_us)
        << " expert_std_us=" << fmt(report.expert_std_us) << '\n';
    out << "# speedup_no_filter=" << fmt(report.speedup_no_filter) << '\n';
    out << "# expert_slope_us=" << fmt(report.expert_slope_us)
        << " expert_corr=" << fmt(report.expert_corr)
        << " agent_corr=" << fmt(report.agent_corr) << '\n';
    if (!out) throw std::runtime_error(path + ": write failed");
}

GnnHeatmap gnn_heatmap(PolicySystem& system) {
    const std::vector<Tensor*> params = system.gnn_main.params();
    // Layer parameter order is (w_self, w_nbr, b) per layer; the heatmap is
    // the first layer's self weights, transposed to hidden x input.
    GnnHeatmap heatmap;
    heatmap.matrix = params[0]->value.transpose();

    static const char* kSlotNames[kElementWidth] = {
        "gen_p_rel", "gen_p_share", "load_share", "load_bias", "flow", "rho", "status"};
    static const char* kBusNames[3] = {"bus1", "bus2", "disc"};
    for (const char* side : {"origin", "ext"})
        for (const char* bus : kBusNames)
            for (const char* slot : kSlotNames)
                heatmap.labels.push_back(std::string(side) + ":" + bus + ":" + slot);

    const int half = kNodeWidth / 2;
    std::vector<double> origin_norms, ext_norms;
    for (int j = 0; j < half; ++j) {
        origin_norms.push_back(heatmap.matrix.col(j).norm());
        ext_norms.push_back(heatmap.matrix.col(half + j).norm());
    }
    heatmap.symmetry_score = pearson(origin_norms, ext_norms);
    return heatmap;
}

void write_heatmap_csv(const std::string& path, const GnnHeatmap& heatmap) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error(path + ": cannot open");
    for (std::size_t j = 0; j < heatmap.labels.size(); ++j)
        out << (j ? "," : "") << heatmap.labels[j];
    out << '\n';
    for (Eigen::Index i = 0; i < heatmap.matrix.rows(); ++i) {
        for (Eigen::Index j = 0; j < heatmap.matrix.cols(); ++j)
            out << (j ? "," : "") << fmt(heatmap.matrix(i, j));
        out << '\n';
    }
    if (!out) throw std::runtime_error(path + ": write failed");
}

Eigen::MatrixXd read_heatmap_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error(path + ": cannot open");
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(path + ": empty heatmap file");

    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::istringstream cells(line);
        std::string cell;
        while (std::getline(cells, cell, ',')) row.push_back(std::stod(cell));
        if (!rows.empty() && row.size() != rows.front().size())
            throw std::runtime_error(path + ": ragged heatmap row");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw std::runtime_error(path + ": heatmap has no data rows");
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    return m;
}

} // namespace gridrl
