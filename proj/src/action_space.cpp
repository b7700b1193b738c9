#include "gridtopo/action_space.hpp"

#include <cstdio>

#include "json.hpp"

namespace gridtopo {

using nlohmann::json;

std::vector<uint8_t> canonicalize(std::vector<uint8_t> assignment) {
    if (assignment.empty()) throw StructuralError("empty busbar assignment");
    if (assignment.front() == 1) return assignment;
    for (auto& b : assignment) b = (b == 1) ? 2 : 1;
    return assignment;
}

ActionCatalog ActionCatalog::enumerate_node_splits(const GridSpec& grid) {
    ActionCatalog cat;
    cat.actions.push_back(Action::noop());
    cat.sub_begin.resize(grid.num_subs());
    cat.sub_count.resize(grid.num_subs());
    for (int s = 0; s < grid.num_subs(); ++s) {
        const int k = static_cast<int>(grid.substations[s].elements.size());
        cat.sub_begin[s] = cat.size();
        if (k == 0) {
            cat.sub_count[s] = 0;
            continue;
        }
        const uint64_t count = uint64_t{1} << (k - 1);
        cat.sub_count[s] = static_cast<int>(count);
        for (uint64_t m = 0; m < count; ++m) {
            std::vector<uint8_t> a(k, 1);
            for (int e = 1; e < k; ++e)
                a[e] = static_cast<uint8_t>(1 + ((m >> (e - 1)) & 1));
            cat.actions.push_back(Action::split(s, std::move(a)));
        }
    }
    return cat;
}

std::string ActionCatalog::to_json_string(int indent) const {
    json arr = json::array();
    for (int i = 0; i < size(); ++i) {
        const Action& a = actions[i];
        json e;
        e["index"] = i;
        if (a.is_noop()) {
            e["type"] = "noop";
        } else if (const NodeSplit* sp = a.as_split()) {
            e["type"] = "node_split";
            e["substation"] = sp->substation;
            e["assignment"] = sp->assignment;
        } else if (const LineSwitch* sw = a.as_switch()) {
            e["type"] = "line_switch";
            e["line"] = sw->line;
            e["in_service"] = sw->in_service;
        }
        arr.push_back(std::move(e));
    }
    return arr.dump(indent);
}

std::string catalog_hash(const ActionCatalog& catalog) {
    const std::string s = catalog.to_json_string();
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

bool is_legal(const Action& a, const Cooldowns& cd, const TopologyState& topo) {
    if (a.is_noop()) return true;
    if (const NodeSplit* sp = a.as_split()) {
        if (sp->substation < 0 || sp->substation >= static_cast<int>(cd.sub.size())) return false;
        return cd.sub[sp->substation] == 0;
    }
    const LineSwitch* sw = a.as_switch();
    if (sw->line < 0 || sw->line >= static_cast<int>(cd.line.size())) return false;
    if (cd.line[sw->line] != 0) return false;
    return topo.line_status[sw->line] != static_cast<uint8_t>(sw->in_service ? 1 : 0);
}

TopologyState apply_action(const TopologyState& topo, const GridSpec& grid, const Action& a) {
    TopologyState out = topo;
    if (a.is_noop()) return out;
    if (const NodeSplit* sp = a.as_split()) {
        if (sp->substation < 0 || sp->substation >= grid.num_subs())
            throw StructuralError("node split references unknown substation");
        const auto& roster = grid.substations[sp->substation].elements;
        if (sp->assignment.size() != roster.size())
            throw StructuralError("node split assignment length does not match roster");
        for (size_t e = 0; e < roster.size(); ++e) {
            const uint8_t bus = sp->assignment[e];
            if (bus != 1 && bus != 2) throw StructuralError("busbar must be 1 or 2");
            switch (roster[e].kind) {
                case ElementKind::line_from: out.line_from_bus[roster[e].index] = bus; break;
                case ElementKind::line_to: out.line_to_bus[roster[e].index] = bus; break;
                case ElementKind::generator: out.gen_bus[roster[e].index] = bus; break;
                case ElementKind::load: out.load_bus[roster[e].index] = bus; break;
            }
        }
        return out;
    }
    const LineSwitch* sw = a.as_switch();
    if (sw->line < 0 || sw->line >= grid.num_lines())
        throw StructuralError("line switch references unknown line");
    out.line_status[sw->line] = sw->in_service ? 1 : 0;
    return out;
}

}  // namespace gridtopo
