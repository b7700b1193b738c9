#pragma once

#include <variant>
#include <vector>

#include "gridtopo/grid_model.hpp"

namespace gridtopo {

// Reassign every element of one substation between its two busbars. The
// assignment indexes the substation's element roster and is kept canonical
// (first entry on busbar 1).
struct NodeSplit {
    int substation = 0;
    std::vector<uint8_t> assignment;

    bool operator==(const NodeSplit&) const = default;
};

struct LineSwitch {
    int line = 0;
    bool in_service = false;

    bool operator==(const LineSwitch&) const = default;
};

struct Action {
    std::variant<std::monostate, NodeSplit, LineSwitch> v;

    bool is_noop() const { return std::holds_alternative<std::monostate>(v); }
    const NodeSplit* as_split() const { return std::get_if<NodeSplit>(&v); }
    const LineSwitch* as_switch() const { return std::get_if<LineSwitch>(&v); }

    static Action noop() { return {}; }
    static Action split(int sub, std::vector<uint8_t> assignment) {
        return {NodeSplit{sub, std::move(assignment)}};
    }
    static Action line_switch(int line, bool in_service) {
        return {LineSwitch{line, in_service}};
    }

    bool operator==(const Action&) const = default;
};

// Returns whichever of {a, complement(a)} has its first entry on busbar 1.
// Idempotent.
std::vector<uint8_t> canonicalize(std::vector<uint8_t> assignment);

// Cooldown timers consulted by legality checks; owned by the environment.
struct Cooldowns {
    std::vector<int> sub;
    std::vector<int> line;

    static Cooldowns zeros(const GridSpec& grid) {
        return {std::vector<int>(grid.num_subs(), 0), std::vector<int>(grid.num_lines(), 0)};
    }
};

// Agent-facing action indexing: index 0 is NoOp, then canonical node splits
// grouped by substation in id order. Within a substation the assignments walk
// a binary counter over roster elements 1..k-1, so the all-on-busbar-1
// (revert to nominal) entry comes first. The ordering is part of the
// checkpoint contract.
struct ActionCatalog {
    std::vector<Action> actions;
    std::vector<int> sub_begin;  // per substation, first catalog index of its splits
    std::vector<int> sub_count;  // per substation, 2^(k-1)

    int size() const { return static_cast<int>(actions.size()); }
    int num_splits() const { return size() - 1; }

    static ActionCatalog enumerate_node_splits(const GridSpec& grid);

    std::string to_json_string(int indent = -1) const;
};

std::string catalog_hash(const ActionCatalog& catalog);

// NoOp is always legal; a node split requires its substation timer to be 0;
// a line switch requires the line timer to be 0 and an actual status change.
bool is_legal(const Action& a, const Cooldowns& cd, const TopologyState& topo);

// Applies the action to a copy of the topology. Throws StructuralError if the
// action does not fit the grid; legality is the caller's concern.
TopologyState apply_action(const TopologyState& topo, const GridSpec& grid, const Action& a);

}  // namespace gridtopo
