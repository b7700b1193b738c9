#include "gridtopo/grid_model.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>

#include "json.hpp"

namespace gridtopo {

using nlohmann::json;

void GridSpec::finalize() {
    if (base_mva <= 0.0) throw StructuralError("base_mva must be positive");
    const int ns = num_subs();
    for (int s = 0; s < ns; ++s) {
        if (substations[s].id != s)
            throw StructuralError("substation ids must be 0.." + std::to_string(ns - 1) +
                                  " and in order");
        substations[s].elements.clear();
    }
    auto check_sub = [&](int sub, const char* what) {
        if (sub < 0 || sub >= ns)
            throw StructuralError(std::string(what) + " references unknown substation " +
                                  std::to_string(sub));
    };
    for (int l = 0; l < num_lines(); ++l) {
        LineSpec& ln = lines[l];
        ln.id = l;
        check_sub(ln.from_sub, "line");
        check_sub(ln.to_sub, "line");
        if (ln.from_sub == ln.to_sub)
            throw StructuralError("line " + std::to_string(l) + " connects a substation to itself");
        if (ln.x <= 0.0) throw StructuralError("line " + std::to_string(l) + " needs x > 0");
        if (ln.i_max <= 0.0) throw StructuralError("line " + std::to_string(l) + " needs i_max > 0");
        substations[ln.from_sub].elements.push_back({ElementKind::line_from, l});
        substations[ln.to_sub].elements.push_back({ElementKind::line_to, l});
    }
    // roster order: line ends first (already by line id), then gens, then loads
    for (int g = 0; g < num_gens(); ++g) {
        generators[g].id = g;
        check_sub(generators[g].sub, "generator");
        substations[generators[g].sub].elements.push_back({ElementKind::generator, g});
    }
    for (int d = 0; d < num_loads(); ++d) {
        loads[d].id = d;
        check_sub(loads[d].sub, "load");
        substations[loads[d].sub].elements.push_back({ElementKind::load, d});
    }
    if (slack_gen < 0 || slack_gen >= num_gens())
        throw StructuralError("slack generator id out of range");
    for (const auto& g : generators)
        if (g.v_set <= 0.0) throw StructuralError("generator v_set must be positive");
}

std::string GridSpec::to_json_string(int indent) const {
    json j;
    j["base_mva"] = base_mva;
    j["substations"] = json::array();
    for (const auto& s : substations) j["substations"].push_back({{"id", s.id}});
    j["lines"] = json::array();
    for (const auto& l : lines)
        j["lines"].push_back({{"from", l.from_sub},
                              {"to", l.to_sub},
                              {"r", l.r},
                              {"x", l.x},
                              {"b", l.b},
                              {"i_max", l.i_max}});
    j["generators"] = json::array();
    for (const auto& g : generators)
        j["generators"].push_back(
            {{"sub", g.sub}, {"p_max", g.p_max}, {"v_set", g.v_set}, {"kind", g.kind}});
    j["loads"] = json::array();
    for (const auto& d : loads) j["loads"].push_back({{"sub", d.sub}});
    j["slack"] = slack_gen;
    return j.dump(indent);
}

GridSpec GridSpec::from_json_string(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw StructuralError(std::string("grid file is not valid JSON: ") + e.what());
    }
    GridSpec g;
    try {
        g.base_mva = j.at("base_mva").get<double>();
        for (const auto& s : j.at("substations")) {
            SubstationSpec sub;
            sub.id = s.at("id").get<int>();
            g.substations.push_back(sub);
        }
        for (const auto& l : j.at("lines")) {
            LineSpec ln;
            ln.from_sub = l.at("from").get<int>();
            ln.to_sub = l.at("to").get<int>();
            ln.r = l.at("r").get<double>();
            ln.x = l.at("x").get<double>();
            ln.b = l.at("b").get<double>();
            ln.i_max = l.at("i_max").get<double>();
            g.lines.push_back(ln);
        }
        for (const auto& gen : j.at("generators")) {
            GenSpec gs;
            gs.sub = gen.at("sub").get<int>();
            gs.p_max = gen.at("p_max").get<double>();
            gs.v_set = gen.at("v_set").get<double>();
            gs.kind = gen.value("kind", std::string());
            g.generators.push_back(gs);
        }
        for (const auto& d : j.at("loads")) {
            LoadSpec ls;
            ls.sub = d.at("sub").get<int>();
            g.loads.push_back(ls);
        }
        g.slack_gen = j.at("slack").get<int>();
    } catch (const json::exception& e) {
        throw StructuralError(std::string("grid file missing or mistyped field: ") + e.what());
    }
    g.finalize();
    return g;
}

GridSpec GridSpec::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw StructuralError("cannot open grid file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json_string(ss.str());
}

void GridSpec::save_file(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw StructuralError("cannot write grid file " + path);
    out << to_json_string(2) << "\n";
}

TopologyState TopologyState::nominal(const GridSpec& grid) {
    TopologyState t;
    t.line_from_bus.assign(grid.num_lines(), 1);
    t.line_to_bus.assign(grid.num_lines(), 1);
    t.gen_bus.assign(grid.num_gens(), 1);
    t.load_bus.assign(grid.num_loads(), 1);
    t.line_status.assign(grid.num_lines(), 1);
    return t;
}

bool TopologyState::matches(const GridSpec& grid) const {
    return line_from_bus.size() == static_cast<size_t>(grid.num_lines()) &&
           line_to_bus.size() == static_cast<size_t>(grid.num_lines()) &&
           gen_bus.size() == static_cast<size_t>(grid.num_gens()) &&
           load_bus.size() == static_cast<size_t>(grid.num_loads()) &&
           line_status.size() == static_cast<size_t>(grid.num_lines());
}

int NodalGraph::node_of(int sub, int busbar) const {
    NodeKey key{sub, static_cast<uint8_t>(busbar)};
    auto it = std::lower_bound(nodes.begin(), nodes.end(), key);
    if (it == nodes.end() || !(*it == key)) return -1;
    return static_cast<int>(it - nodes.begin());
}

NodalGraph build_nodal_graph(const GridSpec& grid, const TopologyState& topo) {
    if (!topo.matches(grid)) throw StructuralError("topology dimensions do not match grid");
    const int L = grid.num_lines();
    // collect occupied (sub, busbar) pairs; out-of-service line ends attach nothing
    std::vector<NodeKey> keys;
    keys.reserve(2 * grid.num_subs());
    auto add = [&](int sub, uint8_t bus) { keys.push_back({sub, bus}); };
    for (int l = 0; l < L; ++l) {
        if (!topo.line_status[l]) continue;
        add(grid.lines[l].from_sub, topo.line_from_bus[l]);
        add(grid.lines[l].to_sub, topo.line_to_bus[l]);
    }
    for (int g = 0; g < grid.num_gens(); ++g) add(grid.generators[g].sub, topo.gen_bus[g]);
    for (int d = 0; d < grid.num_loads(); ++d) add(grid.loads[d].sub, topo.load_bus[d]);
    std::sort(keys.begin(), keys.end());
    keys.erase(std::unique(keys.begin(), keys.end()), keys.end());

    NodalGraph g;
    g.nodes = std::move(keys);
    g.line_node_from.assign(L, -1);
    g.line_node_to.assign(L, -1);
    for (int l = 0; l < L; ++l) {
        if (!topo.line_status[l]) continue;
        g.line_node_from[l] = g.node_of(grid.lines[l].from_sub, topo.line_from_bus[l]);
        g.line_node_to[l] = g.node_of(grid.lines[l].to_sub, topo.line_to_bus[l]);
    }
    g.gen_node.resize(grid.num_gens());
    for (int gi = 0; gi < grid.num_gens(); ++gi)
        g.gen_node[gi] = g.node_of(grid.generators[gi].sub, topo.gen_bus[gi]);
    g.load_node.resize(grid.num_loads());
    for (int d = 0; d < grid.num_loads(); ++d)
        g.load_node[d] = g.node_of(grid.loads[d].sub, topo.load_bus[d]);
    return g;
}

std::vector<int> connected_components(const NodalGraph& g) {
    const int n = g.num_nodes();
    std::vector<int> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    std::function<int(int)> find = [&](int a) {
        while (parent[a] != a) {
            parent[a] = parent[parent[a]];
            a = parent[a];
        }
        return a;
    };
    auto unite = [&](int a, int b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        // keep the lowest index as the representative
        if (a < b) parent[b] = a;
        else parent[a] = b;
    };
    for (size_t l = 0; l < g.line_node_from.size(); ++l)
        if (g.line_node_from[l] >= 0) unite(g.line_node_from[l], g.line_node_to[l]);
    std::vector<int> comp(n);
    for (int i = 0; i < n; ++i) comp[i] = find(i);
    return comp;
}

IslandCheck check_islanding(const GridSpec& grid, const NodalGraph& g) {
    if (g.gen_node.size() != static_cast<size_t>(grid.num_gens()))
        throw StructuralError("graph does not match grid");
    const int slack_node = g.gen_node[grid.slack_gen];
    if (slack_node < 0) throw StructuralError("slack generator node absent from graph");
    const auto comp = connected_components(g);
    const int slack_comp = comp[slack_node];
    for (int n : g.gen_node)
        if (comp[n] != slack_comp) return IslandCheck::islanded;
    for (int n : g.load_node)
        if (comp[n] != slack_comp) return IslandCheck::islanded;
    return IslandCheck::ok;
}

GridSpec reference_grid() {
    // IEEE 14-bus branch list (taps dropped), 0-based substations. Thermal
    // limits calibrated so the nominal snapshot loads the sub0-sub1 corridor
    // to ~0.82 and every other line to <=0.5.
    struct Row { int f, t; double r, x, b, imax; };
    static const Row rows[] = {
        {0, 1, 0.01938, 0.05917, 0.0528, 0.62},
        {0, 4, 0.05403, 0.22304, 0.0492, 0.71},
        {1, 2, 0.04699, 0.19797, 0.0438, 0.39},
        {1, 3, 0.05811, 0.17632, 0.0340, 0.68},
        {1, 4, 0.05695, 0.17388, 0.0346, 0.54},
        {2, 3, 0.06701, 0.17103, 0.0128, 0.65},
        {3, 4, 0.01335, 0.04211, 0.0,    0.71},
        {3, 6, 0.0,     0.20912, 0.0,    0.61},
        {3, 8, 0.0,     0.55618, 0.0,    0.30},
        {4, 5, 0.0,     0.25202, 0.0,    0.57},
        {5, 10, 0.09498, 0.19890, 0.0,   0.29},
        {5, 11, 0.12291, 0.25581, 0.0,   0.25},
        {5, 12, 0.06615, 0.13027, 0.0,   0.43},
        {6, 7, 0.0,     0.17615, 0.0,    0.70},
        {6, 8, 0.0,     0.11001, 0.0,    0.44},
        {8, 9, 0.03181, 0.08450, 0.0,    0.25},
        {8, 13, 0.12711, 0.27038, 0.0,   0.25},
        {9, 10, 0.08205, 0.19207, 0.0,   0.25},
        {11, 12, 0.22092, 0.19988, 0.0,  0.25},
        {12, 13, 0.17093, 0.34802, 0.0,  0.25},
    };
    GridSpec g;
    g.base_mva = 100.0;
    g.substations.resize(14);
    for (int s = 0; s < 14; ++s) g.substations[s].id = s;
    for (const Row& r : rows) {
        LineSpec l;
        l.from_sub = r.f;
        l.to_sub = r.t;
        l.r = r.r;
        l.x = r.x;
        l.b = r.b;
        l.i_max = r.imax;
        g.lines.push_back(l);
    }
    // Five generators, slack included; the source material labels six profile
    // ids for what is physically five machines here, see README.
    g.generators = {
        {0, 0, 2.5, 1.06, "nuclear"},
        {1, 1, 1.0, 1.045, "thermal"},
        {2, 2, 0.7, 1.01, "wind"},
        {3, 5, 0.5, 1.07, "solar"},
        {4, 7, 0.8, 1.09, "hydro"},
    };
    // Load placement calibrated so sum over substations of 2^(k-1) equals 156
    // (gen buses are the textbook ones; loads moved from buses 3 and 6 to
    // buses 7 and 8 relative to the textbook case).
    const int load_subs[] = {1, 3, 4, 6, 7, 8, 9, 10, 11, 12, 13};
    for (int s : load_subs) {
        LoadSpec d;
        d.sub = s;
        g.loads.push_back(d);
    }
    g.slack_gen = 0;
    g.finalize();
    return g;
}

std::vector<double> reference_base_load_p() {
    return {0.217, 0.478, 0.076, 0.29, 0.10, 0.295, 0.09, 0.035, 0.061, 0.135, 0.149};
}

std::string grid_hash(const GridSpec& grid) {
    const std::string s = grid.to_json_string();
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace gridtopo
