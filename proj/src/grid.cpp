#include "gridrl/grid.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace gridrl {

namespace {

[[noreturn]] void schema_error(const std::string& what) {
    throw std::runtime_error("grid schema violation: " + what);
}

} // namespace

Grid Grid::from_parts(std::string name, int num_substations, std::vector<LineDef> lines,
                      std::vector<GenDef> gens, std::vector<LoadDef> loads, int slack_gen) {
    Grid g;
    g.name_ = std::move(name);
    g.num_substations_ = num_substations;
    g.lines_ = std::move(lines);
    g.gens_ = std::move(gens);
    g.loads_ = std::move(loads);
    g.slack_gen_ = slack_gen;
    g.index_and_validate();
    return g;
}

void Grid::index_and_validate() {
    if (num_substations_ <= 0) schema_error("substation count must be positive");

    auto check_ids = [](const auto& defs, const char* what) {
        std::unordered_set<int> seen;
        for (std::size_t i = 0; i < defs.size(); ++i) {
            if (defs[i].id != static_cast<int>(i))
                schema_error(std::string(what) + " ids must be dense and ascending, got id " +
                             std::to_string(defs[i].id) + " at position " + std::to_string(i));
            if (!seen.insert(defs[i].id).second)
                schema_error("duplicate " + std::string(what) + " id " + std::to_string(defs[i].id));
        }
    };
    check_ids(lines_, "line");
    check_ids(gens_, "generator");
    check_ids(loads_, "load");

    auto check_sub = [this](int sub, const std::string& owner) {
        if (sub < 0 || sub >= num_substations_)
            schema_error(owner + " references unknown substation " + std::to_string(sub));
    };
    for (const auto& l : lines_) {
        const std::string id = "line " + std::to_string(l.id);
        check_sub(l.origin, id);
        check_sub(l.extremity, id);
        if (l.origin == l.extremity) schema_error(id + " has origin == extremity");
        if (!(l.reactance > 0.0)) schema_error(id + " has non-positive reactance");
        if (!(l.thermal_limit > 0.0)) schema_error(id + " has non-positive thermal limit");
    }
    for (const auto& g : gens_) {
        check_sub(g.substation, "generator " + std::to_string(g.id));
        if (!(g.p_max > 0.0))
            schema_error("generator " + std::to_string(g.id) + " has non-positive p_max");
    }
    for (const auto& d : loads_) check_sub(d.substation, "load " + std::to_string(d.id));
    if (gens_.empty()) schema_error("grid has no generators");
    if (slack_gen_ < 0 || slack_gen_ >= num_generators())
        schema_error("slack references unknown generator " + std::to_string(slack_gen_));

    endpoint_substation_.assign(num_endpoints(), -1);
    sub_endpoints_.assign(num_substations_, {});
    sub_lines_.assign(num_substations_, {});
    for (const auto& l : lines_) {
        endpoint_substation_[line_endpoint(l.id, LineEnd::kOrigin)] = l.origin;
        endpoint_substation_[line_endpoint(l.id, LineEnd::kExtremity)] = l.extremity;
        sub_lines_[l.origin].push_back(l.id);
        sub_lines_[l.extremity].push_back(l.id);
    }
    for (const auto& g : gens_) endpoint_substation_[gen_endpoint(g.id)] = g.substation;
    for (const auto& d : loads_) endpoint_substation_[load_endpoint(d.id)] = d.substation;
    for (int e = 0; e < num_endpoints(); ++e)
        sub_endpoints_[endpoint_substation_[e]].push_back(e);

    max_thermal_limit_ = 0.0;
    for (const auto& l : lines_) max_thermal_limit_ = std::max(max_thermal_limit_, l.thermal_limit);
    total_gen_capacity_ = 0.0;
    for (const auto& g : gens_) total_gen_capacity_ += g.p_max;
}

Grid Grid::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open grid file: " + path);

    std::string name = "grid";
    int num_subs = -1;
    std::vector<LineDef> lines;
    std::vector<GenDef> gens;
    std::vector<LoadDef> loads;
    int slack = -1;

    std::string raw;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        const auto hash = raw.find('#');
        if (hash != std::string::npos) raw.erase(hash);
        std::istringstream ls(raw);
        std::string tok;
        if (!(ls >> tok)) continue;

        auto fail = [&](const std::string& msg) {
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " + msg);
        };
        if (tok == "grid") {
            if (!(ls >> name)) fail("expected: grid <name>");
        } else if (tok == "substations") {
            if (!(ls >> num_subs)) fail("expected: substations <count>");
        } else if (tok == "line") {
            LineDef l;
            if (!(ls >> l.id >> l.origin >> l.extremity >> l.reactance >> l.thermal_limit))
                fail("expected: line <id> <origin-sub> <ext-sub> <reactance> <thermal-limit>");
            lines.push_back(l);
        } else if (tok == "gen") {
            GenDef g;
            if (!(ls >> g.id >> g.substation >> g.p_max))
                fail("expected: gen <id> <sub> <p-max>");
            gens.push_back(g);
        } else if (tok == "load") {
            LoadDef d;
            if (!(ls >> d.id >> d.substation)) fail("expected: load <id> <sub>");
            loads.push_back(d);
        } else if (tok == "slack") {
            if (!(ls >> slack)) fail("expected: slack <gen-id>");
        } else {
            fail("unknown directive '" + tok + "'");
        }
    }
    if (num_subs < 0) throw std::runtime_error(path + ": missing 'substations' directive");
    if (slack < 0) throw std::runtime_error(path + ": missing 'slack' directive");
    return from_parts(std::move(name), num_subs, std::move(lines), std::move(gens),
                      std::move(loads), slack);
}

TopologyState TopologyState::initial(const Grid& grid) {
    TopologyState s;
    s.endpoint_bus.assign(grid.num_endpoints(), Bus::kBus1);
    s.line_connected.assign(grid.num_lines(), 1);
    s.sub_cooldown.assign(grid.num_substations(), 0);
    s.line_cooldown.assign(grid.num_lines(), 0);
    s.overflow_count.assign(grid.num_lines(), 0);
    return s;
}

std::string Action::describe() const {
    switch (kind) {
        case Kind::kNoop:
            return "noop";
        case Kind::kSetEndpoint:
            return "set line " + std::to_string(line) +
                   (end == LineEnd::kOrigin ? " origin" : " extremity") + " -> bus " +
                   (target == Bus::kBus1 ? "1" : "2");
        case Kind::kReconnectLine:
            return "reconnect line " + std::to_string(line) + " (" +
                   (origin_bus == Bus::kBus1 ? "1" : "2") + "," +
                   (extremity_bus == Bus::kBus1 ? "1" : "2") + ")";
    }
    return "?";
}

Action action_from_index(const TopologyState& state, int line, int index) {
    if (index < 0 || index >= kActionsPerLine)
        throw std::out_of_range("action index " + std::to_string(index));
    if (index == 0) return Action::noop();
    const int k = index - 1;
    if (state.is_connected(line)) {
        const LineEnd end = k < 2 ? LineEnd::kOrigin : LineEnd::kExtremity;
        const Bus target = (k % 2 == 0) ? Bus::kBus1 : Bus::kBus2;
        return Action::set_endpoint(line, end, target);
    }
    const Bus ob = (k / 2 == 0) ? Bus::kBus1 : Bus::kBus2;
    const Bus eb = (k % 2 == 0) ? Bus::kBus1 : Bus::kBus2;
    return Action::reconnect(line, ob, eb);
}

int action_to_index(const Action& action) {
    switch (action.kind) {
        case Action::Kind::kNoop:
            return 0;
        case Action::Kind::kSetEndpoint:
            return 1 + (action.end == LineEnd::kOrigin ? 0 : 2) +
                   (action.target == Bus::kBus1 ? 0 : 1);
        case Action::Kind::kReconnectLine:
            return 1 + (action.origin_bus == Bus::kBus1 ? 0 : 2) +
                   (action.extremity_bus == Bus::kBus1 ? 0 : 1);
    }
    return 0;
}

std::vector<int> legal_action_indices(const Grid& grid, const TopologyState& state, int line) {
    if (line < 0 || line >= grid.num_lines())
        throw std::out_of_range("unknown line id " + std::to_string(line));

    std::vector<int> out{0};
    const LineDef& def = grid.line(line);
    if (state.is_connected(line)) {
        for (int idx = 1; idx < kActionsPerLine; ++idx) {
            const Action a = action_from_index(state, line, idx);
            const int sub = a.end == LineEnd::kOrigin ? def.origin : def.extremity;
            if (state.sub_cooldown[sub] > 0) continue;
            if (state.line_end_bus(grid, line, a.end) == a.target) continue;  // no effect
            out.push_back(idx);
        }
    } else if (state.line_cooldown[line] == 0) {
        for (int idx = 1; idx < kActionsPerLine; ++idx) out.push_back(idx);
    }
    return out;
}

std::vector<Action> legal_actions(const Grid& grid, const TopologyState& state, int line) {
    std::vector<Action> out;
    for (int idx : legal_action_indices(grid, state, line))
        out.push_back(action_from_index(state, line, idx));
    return out;
}

bool is_action_legal(const Grid& grid, const TopologyState& state, const Action& action) {
    if (action.kind == Action::Kind::kNoop) return true;
    if (action.line < 0 || action.line >= grid.num_lines()) return false;
    const auto legal = legal_actions(grid, state, action.line);
    return std::find(legal.begin(), legal.end(), action) != legal.end();
}

TopologyState apply_action(const Grid& grid, const TopologyState& state, const Action& action,
                           int cooldown_steps) {
    if (action.kind == Action::Kind::kNoop) return state;
    if (!is_action_legal(grid, state, action))
        throw std::invalid_argument("illegal action: " + action.describe());

    TopologyState next = state;
    const LineDef& def = grid.line(action.line);
    if (action.kind == Action::Kind::kSetEndpoint) {
        next.endpoint_bus[grid.line_endpoint(action.line, action.end)] = action.target;
        const int sub = action.end == LineEnd::kOrigin ? def.origin : def.extremity;
        next.sub_cooldown[sub] = cooldown_steps;
    } else {
        next.endpoint_bus[grid.line_endpoint(action.line, LineEnd::kOrigin)] = action.origin_bus;
        next.endpoint_bus[grid.line_endpoint(action.line, LineEnd::kExtremity)] =
            action.extremity_bus;
        next.line_connected[action.line] = 1;
        next.line_cooldown[action.line] = cooldown_steps;
    }
    return next;
}

} // namespace gridrl
