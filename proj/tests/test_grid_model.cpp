#include <algorithm>
#include <map>
#include <random>
#include <set>
#include <string>

#include "doctest.h"
#include "gridtopo/grid_model.hpp"
#include "gridtopo/action_space.hpp"
#include "support/test_grids.hpp"

using namespace gridtopo;
using gridtopo::testing::four_sub_grid;

namespace {

// Component structure expressed over stable element labels, so isomorphic
// graphs compare equal regardless of node numbering.
std::set<std::vector<std::string>> component_signature(const GridSpec& grid,
                                                       const NodalGraph& g) {
    const auto comp = connected_components(g);
    std::map<int, std::vector<std::string>> groups;
    for (int l = 0; l < grid.num_lines(); ++l)
        if (g.line_node_from[l] >= 0)
            groups[comp[g.line_node_from[l]]].push_back("L" + std::to_string(l));
    for (size_t gi = 0; gi < g.gen_node.size(); ++gi)
        groups[comp[g.gen_node[gi]]].push_back("g" + std::to_string(gi));
    for (size_t d = 0; d < g.load_node.size(); ++d)
        groups[comp[g.load_node[d]]].push_back("d" + std::to_string(d));
    std::set<std::vector<std::string>> sig;
    for (auto& [rep, members] : groups) {
        std::sort(members.begin(), members.end());
        sig.insert(members);
    }
    return sig;
}

TopologyState complement_at(const GridSpec& grid, TopologyState topo, int sub) {
    for (const auto& e : grid.substations[sub].elements) {
        auto flip = [](uint8_t& b) { b = b == 1 ? 2 : 1; };
        switch (e.kind) {
            case ElementKind::line_from: flip(topo.line_from_bus[e.index]); break;
            case ElementKind::line_to: flip(topo.line_to_bus[e.index]); break;
            case ElementKind::generator: flip(topo.gen_bus[e.index]); break;
            case ElementKind::load: flip(topo.load_bus[e.index]); break;
        }
    }
    return topo;
}

TopologyState random_topology(const GridSpec& grid, std::mt19937_64& rng) {
    TopologyState topo = TopologyState::nominal(grid);
    std::uniform_int_distribution<int> subs(0, grid.num_subs() - 1);
    std::uniform_int_distribution<int> busbar(1, 2);
    std::uniform_int_distribution<int> nsplits(0, 3);
    const int k = nsplits(rng);
    for (int i = 0; i < k; ++i) {
        const int s = subs(rng);
        for (const auto& e : grid.substations[s].elements) {
            const uint8_t b = static_cast<uint8_t>(busbar(rng));
            switch (e.kind) {
                case ElementKind::line_from: topo.line_from_bus[e.index] = b; break;
                case ElementKind::line_to: topo.line_to_bus[e.index] = b; break;
                case ElementKind::generator: topo.gen_bus[e.index] = b; break;
                case ElementKind::load: topo.load_bus[e.index] = b; break;
            }
        }
    }
    return topo;
}

}  // namespace

TEST_SUITE("grid_model") {

TEST_CASE("reference grid shape and invariants") {
    const GridSpec g = reference_grid();
    CHECK(g.num_subs() == 14);
    CHECK(g.num_lines() == 20);
    CHECK(g.num_gens() == 5);
    CHECK(g.num_loads() == 11);
    CHECK(g.num_gens() + g.num_loads() == 16);  // the injection count
    CHECK(g.slack_gen == 0);
    // roster sizes drive the action space; total must support the 156 catalog
    long total = 0;
    for (const auto& s : g.substations) {
        REQUIRE(!s.elements.empty());
        total += 1L << (s.elements.size() - 1);
    }
    CHECK(total == 156);
}

TEST_CASE("grid JSON round trip") {
    const GridSpec g = reference_grid();
    const GridSpec g2 = GridSpec::from_json_string(g.to_json_string());
    CHECK(grid_hash(g) == grid_hash(g2));
    CHECK(g2.substations[3].elements.size() == g.substations[3].elements.size());
    CHECK(g2.lines[0].i_max == g.lines[0].i_max);  // JSON round trip is bit exact
}

TEST_CASE("grid validation rejects bad data") {
    GridSpec g = four_sub_grid();
    g.lines[0].x = 0.0;
    CHECK_THROWS_AS(g.finalize(), StructuralError);

    GridSpec g2 = four_sub_grid();
    g2.lines[1].i_max = -1.0;
    CHECK_THROWS_AS(g2.finalize(), StructuralError);

    GridSpec g3 = four_sub_grid();
    g3.generators[0].sub = 9;
    CHECK_THROWS_AS(g3.finalize(), StructuralError);

    GridSpec g4 = four_sub_grid();
    g4.substations[1].id = 5;
    CHECK_THROWS_AS(g4.finalize(), StructuralError);

    GridSpec g5 = four_sub_grid();
    g5.slack_gen = 3;
    CHECK_THROWS_AS(g5.finalize(), StructuralError);
}

TEST_CASE("nominal four-sub grid maps to four nodes; a split makes five") {
    const GridSpec g = four_sub_grid();
    const TopologyState nominal = TopologyState::nominal(g);
    const NodalGraph graph = build_nodal_graph(g, nominal);
    CHECK(graph.num_nodes() == 4);
    CHECK(connected_components(graph) == std::vector<int>{0, 0, 0, 0});

    // split sub 2: two line ends stay together, the third moves off
    const Action split = Action::split(2, {1, 1, 2});
    const TopologyState after = apply_action(nominal, g, split);
    const NodalGraph graph2 = build_nodal_graph(g, after);
    CHECK(graph2.num_nodes() == 5);
    CHECK(check_islanding(g, graph2) == IslandCheck::ok);
}

TEST_CASE("out-of-service lines leave no dangling nodes") {
    const GridSpec g = four_sub_grid();
    TopologyState topo = TopologyState::nominal(g);
    std::fill(topo.line_status.begin(), topo.line_status.end(), 0);
    const NodalGraph graph = build_nodal_graph(g, topo);
    // only the generator and load attachments remain
    CHECK(graph.num_nodes() == 2);
    for (int l = 0; l < g.num_lines(); ++l) CHECK(graph.line_node_from[l] == -1);
    const auto comp = connected_components(graph);
    CHECK(comp[0] != comp[1]);
    CHECK(check_islanding(g, graph) == IslandCheck::islanded);
}

TEST_CASE("zero-edge graph has one component per node") {
    GridSpec g;
    g.substations.resize(3);
    for (int s = 0; s < 3; ++s) g.substations[s].id = s;
    auto line = [](int f, int t) {
        LineSpec l;
        l.from_sub = f;
        l.to_sub = t;
        l.x = 0.1;
        l.i_max = 1.0;
        return l;
    };
    g.lines = {line(0, 1), line(0, 2)};
    g.generators = {{0, 0, 1.0, 1.0, ""}};
    g.loads = {{0, 1}, {1, 2}};
    g.finalize();
    TopologyState topo = TopologyState::nominal(g);
    topo.line_status = {0, 0};
    const NodalGraph graph = build_nodal_graph(g, topo);
    REQUIRE(graph.num_nodes() == 3);
    const auto comp = connected_components(graph);
    CHECK(std::set<int>(comp.begin(), comp.end()).size() == 3);
}

TEST_CASE("the documented four-line outage islands the reference grid") {
    const GridSpec g = reference_grid();
    TopologyState topo = TopologyState::nominal(g);
    // corridor 1-4, then 4-5, then 8-9 and 8-13
    for (int l : {4, 9, 15, 16}) topo.line_status[l] = 0;
    const NodalGraph graph = build_nodal_graph(g, topo);
    const auto comp = connected_components(graph);
    CHECK(std::set<int>(comp.begin(), comp.end()).size() >= 2);
    CHECK(check_islanding(g, graph) == IslandCheck::islanded);
}

TEST_CASE("nominal reference topology is one island-free component") {
    const GridSpec g = reference_grid();
    const NodalGraph graph = build_nodal_graph(g, TopologyState::nominal(g));
    const auto comp = connected_components(graph);
    CHECK(std::set<int>(comp.begin(), comp.end()).size() == 1);
    CHECK(check_islanding(g, graph) == IslandCheck::ok);
}

TEST_CASE("dimension mismatch is a structural error") {
    const GridSpec small = four_sub_grid();
    const GridSpec big = reference_grid();
    const TopologyState topo = TopologyState::nominal(small);
    CHECK_THROWS_AS(build_nodal_graph(big, topo), StructuralError);
    const NodalGraph graph = build_nodal_graph(small, topo);
    CHECK_THROWS_AS(check_islanding(big, graph), StructuralError);
}

TEST_CASE("build_nodal_graph is pure") {
    const GridSpec g = reference_grid();
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 5; ++trial) {
        const TopologyState topo = random_topology(g, rng);
        const NodalGraph a = build_nodal_graph(g, topo);
        const NodalGraph b = build_nodal_graph(g, topo);
        CHECK(a.nodes.size() == b.nodes.size());
        CHECK(a.line_node_from == b.line_node_from);
        CHECK(a.line_node_to == b.line_node_to);
        CHECK(a.gen_node == b.gen_node);
        CHECK(a.load_node == b.load_node);
    }
}

TEST_CASE("complement at one substation preserves component structure") {
    const GridSpec g = reference_grid();
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const TopologyState topo = random_topology(g, rng);
        const NodalGraph base = build_nodal_graph(g, topo);
        const int sub = static_cast<int>(rng() % g.num_subs());
        const NodalGraph flipped = build_nodal_graph(g, complement_at(g, topo, sub));
        CHECK(base.num_nodes() == flipped.num_nodes());
        CHECK(component_signature(g, base) == component_signature(g, flipped));
    }
}

TEST_CASE("removing a line never decreases the component count") {
    const GridSpec g = reference_grid();
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 30; ++trial) {
        TopologyState topo = random_topology(g, rng);
        const NodalGraph before = build_nodal_graph(g, topo);
        const auto count = [](const std::vector<int>& comp) {
            return std::set<int>(comp.begin(), comp.end()).size();
        };
        const size_t n_before = count(connected_components(before));
        const int line = static_cast<int>(rng() % g.num_lines());
        if (!topo.line_status[line]) continue;
        topo.line_status[line] = 0;
        const NodalGraph after = build_nodal_graph(g, topo);
        CHECK(count(connected_components(after)) >= n_before);
    }
}

}  // TEST_SUITE
