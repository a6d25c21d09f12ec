#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace gridrl {

/// Bus assignment of one element endpoint inside its substation.
enum class Bus : std::uint8_t { kBus1 = 0, kBus2 = 1, kDisconnected = 2 };

enum class LineEnd : std::uint8_t { kOrigin = 0, kExtremity = 1 };

struct LineDef {
    int id = 0;
    int origin = 0;
    int extremity = 0;
    double reactance = 0.0;      // per-unit, > 0
    double thermal_limit = 0.0;  // per-unit flow, > 0
};

struct GenDef {
    int id = 0;
    int substation = 0;
    double p_max = 0.0;  // per-unit MW
};

struct LoadDef {
    int id = 0;
    int substation = 0;
};

/// Static grid description. Element counts and attachments are fixed after
/// load; endpoints are indexed flat: line origins, line extremities,
/// generators, loads.
class Grid {
public:
    static Grid load(const std::string& path);
    static Grid from_parts(std::string name, int num_substations,
                           std::vector<LineDef> lines, std::vector<GenDef> gens,
                           std::vector<LoadDef> loads, int slack_gen);

    const std::string& name() const { return name_; }
    int num_substations() const { return num_substations_; }
    int num_lines() const { return static_cast<int>(lines_.size()); }
    int num_generators() const { return static_cast<int>(gens_.size()); }
    int num_loads() const { return static_cast<int>(loads_.size()); }
    int slack_gen() const { return slack_gen_; }

    const LineDef& line(int id) const { return lines_.at(id); }
    const GenDef& generator(int id) const { return gens_.at(id); }
    const LoadDef& load_def(int id) const { return loads_.at(id); }
    const std::vector<LineDef>& lines() const { return lines_; }
    const std::vector<GenDef>& generators() const { return gens_; }
    const std::vector<LoadDef>& loads() const { return loads_; }

    /// Flat endpoint indexing: [0,L) line origins, [L,2L) line extremities,
    /// [2L,2L+G) generators, [2L+G,2L+G+D) loads.
    int num_endpoints() const { return 2 * num_lines() + num_generators() + num_loads(); }
    int line_endpoint(int line, LineEnd end) const {
        return end == LineEnd::kOrigin ? line : num_lines() + line;
    }
    int gen_endpoint(int gen) const { return 2 * num_lines() + gen; }
    int load_endpoint(int load) const { return 2 * num_lines() + num_generators() + load; }

    bool endpoint_is_line(int e) const { return e < 2 * num_lines(); }
    bool endpoint_is_gen(int e) const {
        return e >= 2 * num_lines() && e < 2 * num_lines() + num_generators();
    }
    bool endpoint_is_load(int e) const { return e >= 2 * num_lines() + num_generators(); }
    /// Line id of a line endpoint.
    int endpoint_line(int e) const { return e < num_lines() ? e : e - num_lines(); }
    LineEnd endpoint_line_end(int e) const {
        return e < num_lines() ? LineEnd::kOrigin : LineEnd::kExtremity;
    }
    int endpoint_gen(int e) const { return e - 2 * num_lines(); }
    int endpoint_load(int e) const { return e - 2 * num_lines() - num_generators(); }

    int endpoint_substation(int e) const { return endpoint_substation_[e]; }
    /// Endpoints attached to a substation, ascending.
    const std::vector<int>& substation_endpoints(int sub) const {
        return sub_endpoints_.at(sub);
    }
    /// Lines incident to a substation (either end), ascending.
    const std::vector<int>& substation_lines(int sub) const { return sub_lines_.at(sub); }

    double max_thermal_limit() const { return max_thermal_limit_; }
    double total_gen_capacity() const { return total_gen_capacity_; }

private:
    void index_and_validate();

    std::string name_;
    int num_substations_ = 0;
    std::vector<LineDef> lines_;
    std::vector<GenDef> gens_;
    std::vector<LoadDef> loads_;
    int slack_gen_ = 0;

    std::vector<int> endpoint_substation_;
    std::vector<std::vector<int>> sub_endpoints_;
    std::vector<std::vector<int>> sub_lines_;
    double max_thermal_limit_ = 0.0;
    double total_gen_capacity_ = 0.0;
};

/// Mutable part of the grid: per-endpoint bus assignment, line statuses and
/// the action bookkeeping counters. A value type; apply_action returns a
/// new state.
struct TopologyState {
    std::vector<Bus> endpoint_bus;
    std::vector<std::uint8_t> line_connected;
    std::vector<int> sub_cooldown;
    std::vector<int> line_cooldown;
    std::vector<int> overflow_count;

    static TopologyState initial(const Grid& grid);

    bool operator==(const TopologyState&) const = default;

    Bus line_end_bus(const Grid& g, int line, LineEnd end) const {
        return endpoint_bus[g.line_endpoint(line, end)];
    }
    bool is_connected(int line) const { return line_connected[line] != 0; }
};

/// A topology action. SET_ENDPOINT moves one line end between buses of its
/// substation (touches exactly one substation); RECONNECT_LINE restores a
/// disconnected line choosing the bus at both ends.
struct Action {
    enum class Kind : std::uint8_t { kNoop = 0, kSetEndpoint, kReconnectLine };

    Kind kind = Kind::kNoop;
    int line = -1;
    LineEnd end = LineEnd::kOrigin;   // SET_ENDPOINT
    Bus target = Bus::kBus1;          // SET_ENDPOINT
    Bus origin_bus = Bus::kBus1;      // RECONNECT_LINE
    Bus extremity_bus = Bus::kBus1;   // RECONNECT_LINE

    static Action noop() { return {}; }
    static Action set_endpoint(int line, LineEnd end, Bus target) {
        Action a;
        a.kind = Kind::kSetEndpoint;
        a.line = line;
        a.end = end;
        a.target = target;
        return a;
    }
    static Action reconnect(int line, Bus origin_bus, Bus extremity_bus) {
        Action a;
        a.kind = Kind::kReconnectLine;
        a.line = line;
        a.origin_bus = origin_bus;
        a.extremity_bus = extremity_bus;
        return a;
    }

    bool operator==(const Action&) const = default;
    std::string describe() const;
};

/// Per-line agents index their 5 action slots canonically: slot 0 is NOOP;
/// slots 1..4 are the four endpoint moves when the line is connected, or the
/// four reconnect bus pairs when it is disconnected.
inline constexpr int kActionsPerLine = 5;

/// Number of steps a substation or line stays locked after being acted on
/// (or force-disconnected). Configurable through EnvConfig; this is the
/// default.
inline constexpr int kDefaultCooldownSteps = 3;

/// Decode an action slot for a line given its current connection status.
Action action_from_index(const TopologyState& state, int line, int index);
/// Canonical slot of an action (inverse of action_from_index).
int action_to_index(const Action& action);

/// Slots of `line` that are currently legal: NOOP plus cooldown-free,
/// non-no-effect moves.
std::vector<int> legal_action_indices(const Grid& grid, const TopologyState& state, int line);
std::vector<Action> legal_actions(const Grid& grid, const TopologyState& state, int line);
bool is_action_legal(const Grid& grid, const TopologyState& state, const Action& action);

/// Apply a legal action, returning the successor state. Throws
/// std::invalid_argument on an illegal action. NOOP returns the input
/// unchanged.
TopologyState apply_action(const Grid& grid, const TopologyState& state, const Action& action,
                           int cooldown_steps = kDefaultCooldownSteps);

} // namespace gridrl
