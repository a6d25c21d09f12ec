#include "gridrl/demos.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace gridrl {

namespace {

using nlohmann::json;

constexpr int kSchemaVersion = 1;

json snapshot_to_json(const StateSnapshot& snap) {
    json j;
    j["t"] = snap.t;
    j["done"] = snap.done;
    j["blackout"] = snap.blackout;
    std::vector<int> bus;
    bus.reserve(snap.topology.endpoint_bus.size());
    for (Bus b : snap.topology.endpoint_bus) bus.push_back(static_cast<int>(b));
    j["bus"] = bus;
    j["conn"] = snap.topology.line_connected;
    j["sub_cd"] = snap.topology.sub_cooldown;
    j["line_cd"] = snap.topology.line_cooldown;
    j["overflow"] = snap.topology.overflow_count;
    j["gen_p"] = snap.injections.gen_p;
    j["load_p"] = snap.injections.load_p;
    j["inj_t"] = snap.injections.t;
    return j;
}

StateSnapshot snapshot_from_json(const json& j, const Grid& grid) {
    StateSnapshot snap;
    snap.t = j.at("t").get<int>();
    snap.done = j.at("done").get<bool>();
    snap.blackout = j.at("blackout").get<bool>();

    const auto bus = j.at("bus").get<std::vector<int>>();
    if (static_cast<int>(bus.size()) != grid.num_endpoints())
        throw std::runtime_error("demo snapshot: endpoint count mismatch");
    snap.topology.endpoint_bus.reserve(bus.size());
    for (int b : bus) {
        if (b < 0 || b > 2) throw std::runtime_error("demo snapshot: invalid bus value");
        snap.topology.endpoint_bus.push_back(static_cast<Bus>(b));
    }
    snap.topology.line_connected = j.at("conn").get<std::vector<std::uint8_t>>();
    snap.topology.sub_cooldown = j.at("sub_cd").get<std::vector<int>>();
    snap.topology.line_cooldown = j.at("line_cd").get<std::vector<int>>();
    snap.topology.overflow_count = j.at("overflow").get<std::vector<int>>();
    if (static_cast<int>(snap.topology.line_connected.size()) != grid.num_lines() ||
        static_cast<int>(snap.topology.sub_cooldown.size()) != grid.num_substations() ||
        static_cast<int>(snap.topology.line_cooldown.size()) != grid.num_lines() ||
        static_cast<int>(snap.topology.overflow_count.size()) != grid.num_lines())
        throw std::runtime_error("demo snapshot: topology shape mismatch");

    snap.injections.gen_p = j.at("gen_p").get<std::vector<double>>();
    snap.injections.load_p = j.at("load_p").get<std::vector<double>>();
    snap.injections.t = j.at("inj_t").get<int>();
    if (static_cast<int>(snap.injections.gen_p.size()) != grid.num_generators() ||
        static_cast<int>(snap.injections.load_p.size()) != grid.num_loads())
        throw std::runtime_error("demo snapshot: injection shape mismatch");
    for (double p : snap.injections.gen_p)
        if (!std::isfinite(p)) throw std::runtime_error("demo snapshot: non-finite injection");
    for (double p : snap.injections.load_p)
        if (!std::isfinite(p)) throw std::runtime_error("demo snapshot: non-finite injection");
    return snap;
}

json agent_to_json(const AgentTransition& tr) {
    json j;
    j["v"] = kSchemaVersion;
    j["level"] = "agent";
    j["s0"] = snapshot_to_json(tr.s0);
    j["line"] = tr.line;
    j["action"] = tr.action_index;
    j["r1"] = tr.reward1;
    j["s1"] = snapshot_to_json(tr.s1);
    j["done1"] = tr.done1;
    j["rn"] = tr.reward_n;
    j["sn"] = snapshot_to_json(tr.sn);
    j["done_n"] = tr.done_n;
    j["n"] = tr.n_actual;
    return j;
}

json manager_to_json(const ManagerTransition& tr) {
    json j;
    j["v"] = kSchemaVersion;
    j["level"] = "manager";
    j["s0"] = snapshot_to_json(tr.s0);
    j["line"] = tr.line;
    j["r"] = tr.reward;
    j["s1"] = snapshot_to_json(tr.s1);
    j["done"] = tr.done;
    j["dt"] = tr.dt;
    return j;
}

void check_line(int line, const Grid& grid, const char* what) {
    if (line < 0 || line >= grid.num_lines())
        throw std::runtime_error(std::string("demo record: line out of range in ") + what);
}

} // namespace

DemoSet collect_demonstrations(const Grid& grid, const std::vector<Chronic>& chronics,
                               const EnvConfig& env_config, const Hyperparams& hp,
                               int budget_episodes, double improvement_margin,
                               DemoStats* stats) {
    if (budget_episodes <= 0)
        throw std::invalid_argument("collect_demonstrations: non-positive budget");
    if (chronics.empty()) throw std::invalid_argument("collect_demonstrations: no chronics");

    DemoSet out;
    DemoStats local;
    const int episodes = std::min<int>(budget_episodes, static_cast<int>(chronics.size()));

    for (int ep = 0; ep < episodes; ++ep) {
        SimState state = reset(grid, chronics[ep], env_config);

        std::vector<StateSnapshot> snaps{to_snapshot(state)};
        std::vector<double> rewards;
        std::vector<std::uint8_t> danger_flags{
            static_cast<std::uint8_t>(is_danger(state, hp.danger_ratio) ? 1 : 0)};
        struct Acted {
            int k;
            int line;
            int idx;
        };
        std::vector<Acted> acted;

        while (!state.done) {
            Action action = Action::noop();
            if (danger_flags.back()) {
                ++local.danger_steps;
                const ExpertDecision decision = expert_action(state, improvement_margin);
                if (decision.line >= 0) {
                    acted.push_back({static_cast<int>(rewards.size()), decision.line,
                                     decision.action_index});
                    action = decision.action;
                    ++local.expert_actions;
                }
            }
            StepOutcome outcome = step(state, action);
            rewards.push_back(outcome.reward);
            state = outcome.next;
            snaps.push_back(to_snapshot(state));
            danger_flags.push_back(static_cast<std::uint8_t>(
                !state.done && is_danger(state, hp.danger_ratio) ? 1 : 0));
        }

        const int total = static_cast<int>(rewards.size());
        for (const Acted& a : acted) {
            AgentTransition tr;
            tr.s0 = snaps[a.k];
            tr.line = a.line;
            tr.action_index = a.idx;
            tr.reward1 = rewards[a.k];
            tr.s1 = snaps[a.k + 1];
            tr.done1 = snaps[a.k + 1].done;
            const int m = std::min(hp.n_step, total - a.k);
            double rn = 0.0;
            for (int j = 0; j < m; ++j) rn += std::pow(hp.gamma, j) * rewards[a.k + j];
            tr.reward_n = rn;
            tr.sn = snaps[a.k + m];
            tr.done_n = snaps[a.k + m].done;
            tr.n_actual = m;
            out.agent.push_back(std::move(tr));

            ManagerTransition mt;
            mt.s0 = snaps[a.k];
            mt.line = a.line;
            int next_decision = a.k + 1;
            while (next_decision < total && !danger_flags[next_decision]) ++next_decision;
            double r = 0.0;
            for (int j = a.k; j < next_decision; ++j)
                r += std::pow(hp.gamma, j - a.k) * rewards[j];
            mt.reward = r;
            mt.s1 = snaps[next_decision];
            mt.done = snaps[next_decision].done;
            mt.dt = next_decision - a.k;
            out.manager.push_back(std::move(mt));
        }

        ++local.episodes;
        local.steps += total;
    }
    if (stats) *stats = local;
    return out;
}

void save_demos(const std::string& path, const DemoSet& demos) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open demo file for writing: " + path);
    for (const AgentTransition& tr : demos.agent) out << agent_to_json(tr).dump() << '\n';
    for (const ManagerTransition& tr : demos.manager) out << manager_to_json(tr).dump() << '\n';
    if (!out) throw std::runtime_error("write failure on demo file: " + path);
}

DemoSet load_demos(const std::string& path, const Grid& grid) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open demo file: " + path);
    DemoSet out;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
        if (j.at("v").get<int>() != kSchemaVersion)
            throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                     ": unsupported demo schema version");
        const std::string level = j.at("level").get<std::string>();
        if (level == "agent") {
            AgentTransition tr;
            tr.s0 = snapshot_from_json(j.at("s0"), grid);
            tr.line = j.at("line").get<int>();
            tr.action_index = j.at("action").get<int>();
            tr.reward1 = j.at("r1").get<double>();
            tr.s1 = snapshot_from_json(j.at("s1"), grid);
            tr.done1 = j.at("done1").get<bool>();
            tr.reward_n = j.at("rn").get<double>();
            tr.sn = snapshot_from_json(j.at("sn"), grid);
            tr.done_n = j.at("done_n").get<bool>();
            tr.n_actual = j.at("n").get<int>();
            check_line(tr.line, grid, "agent demo");
            if (tr.action_index < 0 || tr.action_index >= kActionsPerLine)
                throw std::runtime_error("demo record: action index out of range");
            if (!std::isfinite(tr.reward1) || !std::isfinite(tr.reward_n))
                throw std::runtime_error("demo record: non-finite reward");
            out.agent.push_back(std::move(tr));
        } else if (level == "manager") {
            ManagerTransition tr;
            tr.s0 = snapshot_from_json(j.at("s0"), grid);
            tr.line = j.at("line").get<int>();
            tr.reward = j.at("r").get<double>();
            tr.s1 = snapshot_from_json(j.at("s1"), grid);
            tr.done = j.at("done").get<bool>();
            tr.dt = j.at("dt").get<int>();
            check_line(tr.line, grid, "manager demo");
            if (!std::isfinite(tr.reward) || tr.dt < 1)
                throw std::runtime_error("demo record: invalid manager fields");
            out.manager.push_back(std::move(tr));
        } else {
            throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                     ": unknown demo level '" + level + "'");
        }
    }
    return out;
}

void save_snapshots(const std::string& path, const std::vector<StateSnapshot>& snapshots) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open snapshot file for writing: " + path);
    for (const StateSnapshot& snap : snapshots) {
        json j;
        j["v"] = kSchemaVersion;
        j["level"] = "state";
        j["state"] = snapshot_to_json(snap);
        out << j.dump() << '\n';
    }
    if (!out) throw std::runtime_error("write failure on snapshot file: " + path);
}

std::vector<StateSnapshot> load_snapshots(const std::string& path, const Grid& grid) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open snapshot file: " + path);
    std::vector<StateSnapshot> out;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
        if (j.at("v").get<int>() != kSchemaVersion || j.at("level") != "state")
            throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                     ": not a snapshot record");
        out.push_back(snapshot_from_json(j.at("state"), grid));
    }
    return out;
}

} // namespace gridrl
