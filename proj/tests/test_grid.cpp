#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <string>

#include "gridrl/grid.hpp"

using namespace gridrl;

namespace {

/// Three substations in a triangle, generator at 0, loads at 1 and 2.
Grid triangle() {
    return Grid::from_parts("triangle", 3,
                            {{0, 0, 1, 1.0, 1.0}, {1, 0, 2, 1.0, 1.0}, {2, 1, 2, 1.0, 1.0}},
                            {{0, 0, 10.0}}, {{0, 1}, {1, 2}}, 0);
}

std::string write_temp(const std::string& name, const std::string& body) {
    const auto path = std::filesystem::temp_directory_path() / name;
    std::ofstream out(path);
    out << body;
    return path.string();
}

bool throws_mentioning(const std::function<void()>& fn, const std::string& needle) {
    try {
        fn();
    } catch (const std::exception& e) {
        return std::string(e.what()).find(needle) != std::string::npos;
    }
    return false;
}

} // namespace

TEST_CASE("endpoint indexing partitions elements") {
    const Grid g = triangle();
    CHECK(g.num_endpoints() == 2 * 3 + 1 + 2);
    std::set<int> seen;
    for (int l = 0; l < g.num_lines(); ++l) {
        seen.insert(g.line_endpoint(l, LineEnd::kOrigin));
        seen.insert(g.line_endpoint(l, LineEnd::kExtremity));
    }
    for (int i = 0; i < g.num_generators(); ++i) seen.insert(g.gen_endpoint(i));
    for (int i = 0; i < g.num_loads(); ++i) seen.insert(g.load_endpoint(i));
    CHECK(static_cast<int>(seen.size()) == g.num_endpoints());

    for (int e = 0; e < g.num_endpoints(); ++e) {
        const int kinds = int(g.endpoint_is_line(e)) + int(g.endpoint_is_gen(e)) +
                          int(g.endpoint_is_load(e));
        CHECK(kinds == 1);
    }
    CHECK(g.endpoint_line(g.line_endpoint(2, LineEnd::kExtremity)) == 2);
    CHECK(g.endpoint_line_end(g.line_endpoint(2, LineEnd::kExtremity)) == LineEnd::kExtremity);
    CHECK(g.endpoint_gen(g.gen_endpoint(0)) == 0);
    CHECK(g.endpoint_load(g.load_endpoint(1)) == 1);

    CHECK(g.endpoint_substation(g.line_endpoint(1, LineEnd::kExtremity)) == 2);
    CHECK(g.substation_lines(0) == std::vector<int>{0, 1});
    CHECK(g.substation_lines(2) == std::vector<int>{1, 2});
}

TEST_CASE("schema violations carry the offending element id") {
    CHECK(throws_mentioning(
        [] {
            Grid::from_parts("g", 2, {{0, 0, 1, 1.0, 1.0}, {0, 0, 1, 1.0, 1.0}},
                             {{0, 0, 1.0}}, {}, 0);
        },
        "line"));
    CHECK(throws_mentioning(
        [] { Grid::from_parts("g", 2, {{0, 0, 5, 1.0, 1.0}}, {{0, 0, 1.0}}, {}, 0); },
        "line 0"));
    CHECK(throws_mentioning(
        [] { Grid::from_parts("g", 2, {{0, 1, 1, 1.0, 1.0}}, {{0, 0, 1.0}}, {}, 0); },
        "line 0"));
    CHECK(throws_mentioning(
        [] { Grid::from_parts("g", 2, {{0, 0, 1, -1.0, 1.0}}, {{0, 0, 1.0}}, {}, 0); },
        "reactance"));
    CHECK(throws_mentioning(
        [] { Grid::from_parts("g", 2, {{0, 0, 1, 1.0, 0.0}}, {{0, 0, 1.0}}, {}, 0); },
        "thermal"));
    CHECK(throws_mentioning(
        [] { Grid::from_parts("g", 2, {{0, 0, 1, 1.0, 1.0}}, {{0, 0, 0.0}}, {}, 0); },
        "generator 0"));
    CHECK(throws_mentioning(
        [] { Grid::from_parts("g", 2, {{0, 0, 1, 1.0, 1.0}}, {}, {}, 0); }, "no generators"));
    CHECK(throws_mentioning(
        [] { Grid::from_parts("g", 2, {{0, 0, 1, 1.0, 1.0}}, {{0, 0, 1.0}}, {}, 3); },
        "slack"));
    CHECK(throws_mentioning(
        [] { Grid::from_parts("g", 2, {{0, 0, 1, 1.0, 1.0}}, {{0, 0, 1.0}}, {{0, 9}}, 0); },
        "load 0"));
}

TEST_CASE("text loader round-trips and reports parse errors") {
    const std::string body = R"(# demo grid
grid demo
substations 3
line 0 0 1 0.5 1.5   # comment after fields
line 1 0 2 0.25 2.0
line 2 1 2 1.0 1.0
gen 0 0 12.5
load 0 1
load 1 2
slack 0
)";
    const Grid g = Grid::load(write_temp("gridrl_demo.grid", body));
    CHECK(g.name() == "demo");
    CHECK(g.num_substations() == 3);
    CHECK(g.num_lines() == 3);
    CHECK(g.line(1).reactance == doctest::Approx(0.25));
    CHECK(g.line(1).thermal_limit == doctest::Approx(2.0));
    CHECK(g.generator(0).p_max == doctest::Approx(12.5));
    CHECK(g.slack_gen() == 0);
    CHECK(g.total_gen_capacity() == doctest::Approx(12.5));
    CHECK(g.max_thermal_limit() == doctest::Approx(2.0));

    CHECK(throws_mentioning([] { Grid::load("/nonexistent/path.grid"); }, "cannot open"));
    CHECK(throws_mentioning(
        [] { Grid::load(write_temp("gridrl_bad1.grid", "substations 2\nbogus 1\nslack 0\n")); },
        "bogus"));
    CHECK(throws_mentioning(
        [] {
            Grid::load(write_temp("gridrl_bad2.grid",
                                  "substations 2\nline 0 0 1 1 1\ngen 0 0 1\n"));
        },
        "slack"));
    CHECK(throws_mentioning(
        [] { Grid::load(write_temp("gridrl_bad3.grid", "line 0 0 1 1\nslack 0\n")); },
        "expected"));
}

TEST_CASE("action slots round-trip in both connection states") {
    const Grid g = triangle();
    TopologyState s = TopologyState::initial(g);

    SUBCASE("connected line: endpoint moves") {
        std::set<std::string> unique;
        for (int idx = 0; idx < kActionsPerLine; ++idx) {
            const Action a = action_from_index(s, 1, idx);
            CHECK(action_to_index(a) == idx);
            unique.insert(a.describe());
            if (idx > 0) {
                CHECK(a.kind == Action::Kind::kSetEndpoint);
                CHECK(a.line == 1);
            }
        }
        CHECK(unique.size() == kActionsPerLine);
    }

    SUBCASE("disconnected line: reconnect bus pairs") {
        s.line_connected[1] = 0;
        std::set<std::string> unique;
        for (int idx = 0; idx < kActionsPerLine; ++idx) {
            const Action a = action_from_index(s, 1, idx);
            CHECK(action_to_index(a) == idx);
            unique.insert(a.describe());
            if (idx > 0) CHECK(a.kind == Action::Kind::kReconnectLine);
        }
        CHECK(unique.size() == kActionsPerLine);
        CHECK(action_from_index(s, 1, 1) == Action::reconnect(1, Bus::kBus1, Bus::kBus1));
        CHECK(action_from_index(s, 1, 4) == Action::reconnect(1, Bus::kBus2, Bus::kBus2));
    }

    CHECK_THROWS_AS((void)action_from_index(s, 0, 5), std::out_of_range);
    CHECK_THROWS_AS((void)action_from_index(s, 0, -1), std::out_of_range);
}

TEST_CASE("legality: no-effect moves and cooldowns are filtered") {
    const Grid g = triangle();
    TopologyState s = TopologyState::initial(g);

    // Everything sits on bus 1, so moves targeting bus 1 have no effect.
    CHECK(legal_action_indices(g, s, 0) == std::vector<int>{0, 2, 4});

    // Acting on line 0's origin (substation 0) locks that substation.
    const Action act = Action::set_endpoint(0, LineEnd::kOrigin, Bus::kBus2);
    CHECK(is_action_legal(g, s, act));
    TopologyState next = apply_action(g, s, act);
    CHECK(next.sub_cooldown[0] == kDefaultCooldownSteps);
    CHECK(next.endpoint_bus[g.line_endpoint(0, LineEnd::kOrigin)] == Bus::kBus2);

    // Exactly one endpoint changed.
    int changed = 0;
    for (size_t e = 0; e < s.endpoint_bus.size(); ++e)
        changed += next.endpoint_bus[e] != s.endpoint_bus[e];
    CHECK(changed == 1);

    // Substation 0 hosts line 0's origin and line 1's origin: both locked.
    // Moving line 0 back is now also blocked by the cooldown.
    CHECK(legal_action_indices(g, next, 0) == std::vector<int>{0, 4});
    CHECK(legal_action_indices(g, next, 1) == std::vector<int>{0, 4});
    // Line 2 does not touch substation 0 and stays free.
    CHECK(legal_action_indices(g, next, 2) == std::vector<int>{0, 2, 4});
    CHECK_THROWS_AS((void)apply_action(g, next, Action::set_endpoint(1, LineEnd::kOrigin, Bus::kBus2)),
                    std::invalid_argument);
}

TEST_CASE("reconnect requires a free line cooldown and sets both ends") {
    const Grid g = triangle();
    TopologyState s = TopologyState::initial(g);
    s.line_connected[2] = 0;
    s.line_cooldown[2] = 2;

    CHECK(legal_action_indices(g, s, 2) == std::vector<int>{0});
    CHECK_FALSE(is_action_legal(g, s, Action::reconnect(2, Bus::kBus1, Bus::kBus1)));

    s.line_cooldown[2] = 0;
    CHECK(legal_action_indices(g, s, 2) == std::vector<int>{0, 1, 2, 3, 4});
    TopologyState next = apply_action(g, s, Action::reconnect(2, Bus::kBus2, Bus::kBus1));
    CHECK(next.is_connected(2));
    CHECK(next.line_cooldown[2] == kDefaultCooldownSteps);
    CHECK(next.line_end_bus(g, 2, LineEnd::kOrigin) == Bus::kBus2);
    CHECK(next.line_end_bus(g, 2, LineEnd::kExtremity) == Bus::kBus1);
    // Reconnection locks the line, not its substations.
    CHECK(next.sub_cooldown == std::vector<int>{0, 0, 0});

    // SET_ENDPOINT on a disconnected line is illegal.
    s.line_connected[2] = 0;
    CHECK_FALSE(is_action_legal(g, s, Action::set_endpoint(2, LineEnd::kOrigin, Bus::kBus2)));
}

TEST_CASE("noop is always legal and applies as identity") {
    const Grid g = triangle();
    TopologyState s = TopologyState::initial(g);
    s.sub_cooldown.assign(3, 5);
    s.line_cooldown.assign(3, 5);
    CHECK(is_action_legal(g, s, Action::noop()));
    CHECK(legal_action_indices(g, s, 0) == std::vector<int>{0});
    CHECK(apply_action(g, s, Action::noop()) == s);
}
