#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace gridtopo {

// Structural problems with grid data or mismatched dimensions. Distinct from
// power-flow divergence, which is an ordinary simulation outcome.
class StructuralError : public std::runtime_error {
public:
    explicit StructuralError(const std::string& what) : std::runtime_error(what) {}
};

enum class ElementKind : uint8_t { line_from, line_to, generator, load };

// Reference to one element attached to a substation. `index` points into
// GridSpec::lines / generators / loads depending on `kind`.
struct ElementRef {
    ElementKind kind;
    int index;

    bool operator==(const ElementRef&) const = default;
};

struct SubstationSpec {
    int id = 0;
    // Attachment roster in canonical order: line ends by line id (from end
    // before to end), then generators by id, then loads by id. Assignment
    // vectors of node-split actions index into this roster.
    std::vector<ElementRef> elements;
};

struct LineSpec {
    int id = 0;
    int from_sub = 0;
    int to_sub = 0;
    double r = 0.0;      // series resistance, p.u.
    double x = 0.0;      // series reactance, p.u.
    double b = 0.0;      // total line charging susceptance, p.u.
    double i_max = 0.0;  // thermal current limit, p.u.
};

struct GenSpec {
    int id = 0;
    int sub = 0;
    double p_max = 0.0;  // p.u. on base_mva
    double v_set = 1.0;  // p.u.
    std::string kind;    // profile label, metadata only
};

struct LoadSpec {
    int id = 0;
    int sub = 0;
};

// Static network description. Immutable after construction; shared read-only
// across worker threads.
struct GridSpec {
    double base_mva = 100.0;
    std::vector<SubstationSpec> substations;
    std::vector<LineSpec> lines;
    std::vector<GenSpec> generators;
    std::vector<LoadSpec> loads;
    int slack_gen = 0;

    int num_subs() const { return static_cast<int>(substations.size()); }
    int num_lines() const { return static_cast<int>(lines.size()); }
    int num_gens() const { return static_cast<int>(generators.size()); }
    int num_loads() const { return static_cast<int>(loads.size()); }

    // Rebuilds substation rosters from lines/generators/loads and checks all
    // invariants. Throws StructuralError on violation.
    void finalize();

    std::string to_json_string(int indent = -1) const;
    static GridSpec from_json_string(const std::string& text);
    static GridSpec load_file(const std::string& path);
    void save_file(const std::string& path) const;
};

// Busbar assignment for every element plus line service status.
struct TopologyState {
    std::vector<uint8_t> line_from_bus;  // 1 or 2, per line
    std::vector<uint8_t> line_to_bus;
    std::vector<uint8_t> gen_bus;
    std::vector<uint8_t> load_bus;
    std::vector<uint8_t> line_status;  // 1 = in service

    static TopologyState nominal(const GridSpec& grid);
    bool matches(const GridSpec& grid) const;

    bool operator==(const TopologyState&) const = default;
};

// One electrical node: a (substation, busbar) pair with at least one
// attached in-service element.
struct NodeKey {
    int sub;
    uint8_t busbar;

    auto operator<=>(const NodeKey&) const = default;
};

// Bus-branch view of the grid under a given topology. Node ids are assigned
// by (sub, busbar) lexicographic order so they are stable across rebuilds.
struct NodalGraph {
    std::vector<NodeKey> nodes;
    std::vector<int> line_node_from;  // per line, -1 when out of service
    std::vector<int> line_node_to;
    std::vector<int> gen_node;   // per generator
    std::vector<int> load_node;  // per load

    int num_nodes() const { return static_cast<int>(nodes.size()); }
    int node_of(int sub, int busbar) const;  // -1 if absent
};

NodalGraph build_nodal_graph(const GridSpec& grid, const TopologyState& topo);

// Component label per node; the label is the lowest node index contained in
// the component.
std::vector<int> connected_components(const NodalGraph& g);

enum class IslandCheck { ok, islanded };

// islanded iff some load or generator sits outside the component holding the
// slack generator's node.
IslandCheck check_islanding(const GridSpec& grid, const NodalGraph& g);

// Shipped 14-substation reference grid: IEEE 14-bus branch list, 5 generators
// (slack included), 11 loads, per-unit thermal limits. The roster is
// calibrated so the node-split catalog has exactly 156 entries.
GridSpec reference_grid();

// Nominal per-load active power for the reference grid (p.u.), used by the
// snapshot and as default chronics base profile.
std::vector<double> reference_base_load_p();

// FNV-1a over the canonical JSON serialization; stable across platforms.
std::string grid_hash(const GridSpec& grid);

}  // namespace gridtopo
