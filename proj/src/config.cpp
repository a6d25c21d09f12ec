#include "gridrl/config.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace gridrl {

namespace {

using nlohmann::json;

/// Assigns j[key] to out when present, and records the key as consumed.
template <typename T>
void pull(const json& j, std::set<std::string>& seen, const char* key, T& out) {
    seen.insert(key);
    if (j.contains(key)) out = j.at(key).get<T>();
}

void reject_unknown(const json& j, const std::set<std::string>& seen, const std::string& scope) {
    for (const auto& [key, value] : j.items())
        if (!seen.count(key))
            throw std::invalid_argument("config: unknown key \"" + scope + key + "\"");
}

json hyperparams_to_json(const Hyperparams& hp) {
    return json{{"gamma", hp.gamma},
                {"lr", hp.lr},
                {"eps0", hp.eps0},
                {"eps_half_life", hp.eps_half_life},
                {"eps_min", hp.eps_min},
                {"tau", hp.tau},
                {"sync_interval", hp.sync_interval},
                {"grad_clip", hp.grad_clip},
                {"alpha_per", hp.alpha_per},
                {"beta_per_start", hp.beta_per_start},
                {"beta_per_end", hp.beta_per_end},
                {"eps_prio", hp.eps_prio},
                {"eps_demo", hp.eps_demo},
                {"margin", hp.margin},
                {"lambda_nstep", hp.lambda_nstep},
                {"lambda_expert", hp.lambda_expert},
                {"lambda_l2", hp.lambda_l2},
                {"n_step", hp.n_step},
                {"batch_size", hp.batch_size},
                {"blackout_penalty", hp.blackout_penalty},
                {"danger_ratio", hp.danger_ratio}};
}

Hyperparams hyperparams_from_json(const json& j) {
    Hyperparams hp;
    std::set<std::string> seen;
    pull(j, seen, "gamma", hp.gamma);
    pull(j, seen, "lr", hp.lr);
    pull(j, seen, "eps0", hp.eps0);
    pull(j, seen, "eps_half_life", hp.eps_half_life);
    pull(j, seen, "eps_min", hp.eps_min);
    pull(j, seen, "tau", hp.tau);
    pull(j, seen, "sync_interval", hp.sync_interval);
    pull(j, seen, "grad_clip", hp.grad_clip);
    pull(j, seen, "alpha_per", hp.alpha_per);
    pull(j, seen, "beta_per_start", hp.beta_per_start);
    pull(j, seen, "beta_per_end", hp.beta_per_end);
    pull(j, seen, "eps_prio", hp.eps_prio);
    pull(j, seen, "eps_demo", hp.eps_demo);
    pull(j, seen, "margin", hp.margin);
    pull(j, seen, "lambda_nstep", hp.lambda_nstep);
    pull(j, seen, "lambda_expert", hp.lambda_expert);
    pull(j, seen, "lambda_l2", hp.lambda_l2);
    pull(j, seen, "n_step", hp.n_step);
    pull(j, seen, "batch_size", hp.batch_size);
    pull(j, seen, "blackout_penalty", hp.blackout_penalty);
    pull(j, seen, "danger_ratio", hp.danger_ratio);
    reject_unknown(j, seen, "hyperparams.");
    return hp;
}

json net_to_json(const NetConfig& net) {
    return json{{"embedding_width", net.embedding_width},
                {"gnn_layers", net.gnn_layers},
                {"agent_hidden", net.agent_hidden},
                {"manager_hidden", net.manager_hidden}};
}

NetConfig net_from_json(const json& j) {
    NetConfig net;
    std::set<std::string> seen;
    pull(j, seen, "embedding_width", net.embedding_width);
    pull(j, seen, "gnn_layers", net.gnn_layers);
    pull(j, seen, "agent_hidden", net.agent_hidden);
    pull(j, seen, "manager_hidden", net.manager_hidden);
    reject_unknown(j, seen, "net.");
    return net;
}

json env_to_json(const EnvConfig& env) {
    return json{{"cooldown_steps", env.cooldown_steps},
                {"soft_overflow_steps", env.soft_overflow_steps},
                {"hard_overflow_ratio", env.hard_overflow_ratio},
                {"blackout_penalty", env.blackout_penalty},
                {"slack_tolerance", env.slack_tolerance}};
}

EnvConfig env_from_json(const json& j) {
    EnvConfig env;
    std::set<std::string> seen;
    pull(j, seen, "cooldown_steps", env.cooldown_steps);
    pull(j, seen, "soft_overflow_steps", env.soft_overflow_steps);
    pull(j, seen, "hard_overflow_ratio", env.hard_overflow_ratio);
    pull(j, seen, "blackout_penalty", env.blackout_penalty);
    pull(j, seen, "slack_tolerance", env.slack_tolerance);
    reject_unknown(j, seen, "env.");
    return env;
}

} // namespace

void RunConfig::validate() const {
    hp.validate();
    if (hardness != "easy" && hardness != "hard")
        throw std::invalid_argument("config: hardness must be easy or hard, got " + hardness);
    if (horizon < 2 || horizon > kMaxHorizon)
        throw std::invalid_argument("config: horizon out of range");
    if (train_chronics <= 0 || eval_chronics <= 0)
        throw std::invalid_argument("config: chronic counts must be positive");
    if (replay_capacity < hp.batch_size)
        throw std::invalid_argument("config: replay_capacity below batch_size");
    if (demo_episodes < 0 || pretrain_steps < 0 || train_episodes < 0)
        throw std::invalid_argument("config: budgets must be non-negative");
    if (updates_per_decision <= 0)
        throw std::invalid_argument("config: updates_per_decision must be positive");
    if (checkpoint_every <= 0)
        throw std::invalid_argument("config: checkpoint_every must be positive");
    if (beta_horizon_updates <= 0)
        throw std::invalid_argument("config: beta_horizon_updates must be positive");
    if (net.embedding_width <= 0 || net.gnn_layers <= 0 || net.agent_hidden <= 0 ||
        net.manager_hidden <= 0)
        throw std::invalid_argument("config: network widths must be positive");
    if (grid_path.empty()) throw std::invalid_argument("config: grid_path is empty");
    if (out_dir.empty()) throw std::invalid_argument("config: out_dir is empty");
}

RunConfig run_config_from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("config: ") + e.what());
    }

    RunConfig c;
    std::set<std::string> seen;
    pull(j, seen, "grid_path", c.grid_path);
    pull(j, seen, "chronics_dir", c.chronics_dir);
    pull(j, seen, "hardness", c.hardness);
    pull(j, seen, "horizon", c.horizon);
    pull(j, seen, "train_chronics", c.train_chronics);
    pull(j, seen, "eval_chronics", c.eval_chronics);
    pull(j, seen, "train_chronic_seed", c.train_chronic_seed);
    pull(j, seen, "eval_chronic_seed", c.eval_chronic_seed);
    pull(j, seen, "seed", c.seed);
    pull(j, seen, "replay_capacity", c.replay_capacity);
    pull(j, seen, "demo_episodes", c.demo_episodes);
    pull(j, seen, "pretrain_steps", c.pretrain_steps);
    pull(j, seen, "train_episodes", c.train_episodes);
    pull(j, seen, "updates_per_decision", c.updates_per_decision);
    pull(j, seen, "checkpoint_every", c.checkpoint_every);
    pull(j, seen, "beta_horizon_updates", c.beta_horizon_updates);
    pull(j, seen, "use_dqfd", c.use_dqfd);
    pull(j, seen, "use_gnn", c.use_gnn);
    pull(j, seen, "filter_on", c.filter_on);
    pull(j, seen, "out_dir", c.out_dir);

    seen.insert("shaping");
    if (j.contains("shaping")) c.shaping = shaping_mode_from_string(j.at("shaping").get<std::string>());
    seen.insert("hyperparams");
    if (j.contains("hyperparams")) c.hp = hyperparams_from_json(j.at("hyperparams"));
    seen.insert("net");
    if (j.contains("net")) c.net = net_from_json(j.at("net"));
    seen.insert("env");
    if (j.contains("env")) c.env = env_from_json(j.at("env"));

    reject_unknown(j, seen, "");
    c.validate();
    return c;
}

std::string run_config_to_json_text(const RunConfig& c) {
    json j{{"grid_path", c.grid_path},
           {"chronics_dir", c.chronics_dir},
           {"hardness", c.hardness},
           {"horizon", c.horizon},
           {"train_chronics", c.train_chronics},
           {"eval_chronics", c.eval_chronics},
           {"train_chronic_seed", c.train_chronic_seed},
           {"eval_chronic_seed", c.eval_chronic_seed},
           {"seed", c.seed},
           {"replay_capacity", c.replay_capacity},
           {"demo_episodes", c.demo_episodes},
           {"pretrain_steps", c.pretrain_steps},
           {"train_episodes", c.train_episodes},
           {"updates_per_decision", c.updates_per_decision},
           {"checkpoint_every", c.checkpoint_every},
           {"beta_horizon_updates", c.beta_horizon_updates},
           {"use_dqfd", c.use_dqfd},
           {"use_gnn", c.use_gnn},
           {"filter_on", c.filter_on},
           {"shaping", to_string(c.shaping)},
           {"hyperparams", hyperparams_to_json(c.hp)},
           {"net", net_to_json(c.net)},
           {"env", env_to_json(c.env)},
           {"out_dir", c.out_dir}};
    return j.dump(2) + "\n";
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error(path + ": cannot open config");
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
        return run_config_from_json_text(buf.str());
    } catch (const std::invalid_argument& e) {
        throw std::runtime_error(path + ": " + e.what());
    }
}

void save_run_config(const std::string& path, const RunConfig& config) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    out << run_config_to_json_text(config);
    if (!out) throw std::runtime_error(path + ": write failed");
}

} // namespace gridrl
