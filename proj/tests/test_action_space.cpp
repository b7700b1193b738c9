#include <set>

#include "doctest.h"
#include "gridtopo/action_space.hpp"
#include "support/test_grids.hpp"

using namespace gridtopo;
using gridtopo::testing::four_sub_grid;

namespace {

std::vector<uint8_t> complement(std::vector<uint8_t> a) {
    for (auto& b : a) b = b == 1 ? 2 : 1;
    return a;
}

}  // namespace

TEST_SUITE("action_space") {

TEST_CASE("canonicalize picks the member with the first element on busbar 1") {
    CHECK(canonicalize({2, 1, 2}) == std::vector<uint8_t>{1, 2, 1});
    CHECK(canonicalize({1, 2, 2}) == std::vector<uint8_t>{1, 2, 2});
    CHECK(canonicalize({2}) == std::vector<uint8_t>{1});
    CHECK_THROWS_AS(canonicalize({}), StructuralError);
}

TEST_CASE("canonicalize is idempotent and complement-invariant, exhaustively to k=6") {
    for (int k = 1; k <= 6; ++k) {
        for (int m = 0; m < (1 << k); ++m) {
            std::vector<uint8_t> a(k);
            for (int e = 0; e < k; ++e) a[e] = ((m >> e) & 1) ? 2 : 1;
            const auto c = canonicalize(a);
            CHECK(c.front() == 1);
            CHECK(canonicalize(c) == c);
            CHECK(canonicalize(complement(a)) == c);
        }
    }
}

TEST_CASE("per-substation split counts follow the halved power formula") {
    const GridSpec g = reference_grid();
    const ActionCatalog cat = ActionCatalog::enumerate_node_splits(g);
    for (int s = 0; s < g.num_subs(); ++s) {
        const int k = static_cast<int>(g.substations[s].elements.size());
        CHECK(cat.sub_count[s] == (1 << (k - 1)));

        // oracle: canonicalize all 2^k raw assignments, count distinct
        std::set<std::vector<uint8_t>> distinct;
        for (int m = 0; m < (1 << k); ++m) {
            std::vector<uint8_t> a(k);
            for (int e = 0; e < k; ++e) a[e] = ((m >> e) & 1) ? 2 : 1;
            distinct.insert(canonicalize(a));
        }
        CHECK(static_cast<int>(distinct.size()) == cat.sub_count[s]);

        // and the catalog's entries for this substation are exactly that set
        std::set<std::vector<uint8_t>> in_catalog;
        for (int i = cat.sub_begin[s]; i < cat.sub_begin[s] + cat.sub_count[s]; ++i)
            in_catalog.insert(cat.actions[i].as_split()->assignment);
        CHECK(in_catalog == distinct);
    }
}

TEST_CASE("reference catalog has the published reduced size") {
    const GridSpec g = reference_grid();
    const ActionCatalog cat = ActionCatalog::enumerate_node_splits(g);
    CHECK(cat.num_splits() == 156);
    CHECK(cat.size() == 157);
    CHECK(cat.actions[0].is_noop());
    // each substation block starts with the revert-to-nominal assignment
    for (int s = 0; s < g.num_subs(); ++s) {
        const auto& first = cat.actions[cat.sub_begin[s]];
        const std::vector<uint8_t> all_ones(g.substations[s].elements.size(), 1);
        CHECK(first.as_split()->assignment == all_ones);
    }
}

TEST_CASE("tiny substations enumerate 2^(k-1) assignments") {
    GridSpec g;
    g.substations.resize(2);
    g.substations[0].id = 0;
    g.substations[1].id = 1;
    LineSpec l;
    l.from_sub = 0;
    l.to_sub = 1;
    l.x = 0.1;
    l.i_max = 1.0;
    g.lines = {l};
    g.generators = {{0, 0, 1.0, 1.0, ""}};
    g.loads = {{0, 1}};
    g.slack_gen = 0;
    g.finalize();
    // sub0: line end + gen (k=2) -> 2; sub1: line end + load (k=2) -> 2
    const ActionCatalog cat = ActionCatalog::enumerate_node_splits(g);
    CHECK(cat.sub_count[0] == 2);
    CHECK(cat.sub_count[1] == 2);
    CHECK(cat.size() == 5);
}

TEST_CASE("enumeration is deterministic and stable") {
    const GridSpec g = reference_grid();
    const ActionCatalog a = ActionCatalog::enumerate_node_splits(g);
    const ActionCatalog b = ActionCatalog::enumerate_node_splits(g);
    CHECK(a.to_json_string() == b.to_json_string());
    CHECK(catalog_hash(a) == catalog_hash(b));
}

TEST_CASE("legality rules") {
    const GridSpec g = four_sub_grid();
    const TopologyState topo = TopologyState::nominal(g);
    Cooldowns cd = Cooldowns::zeros(g);
    cd.sub.assign(g.num_subs(), 99);
    cd.line.assign(g.num_lines(), 99);

    CHECK(is_legal(Action::noop(), cd, topo));
    CHECK_FALSE(is_legal(Action::split(2, {1, 1, 2}), cd, topo));
    cd.sub[2] = 0;
    CHECK(is_legal(Action::split(2, {1, 1, 2}), cd, topo));
    cd.sub[2] = 2;
    CHECK_FALSE(is_legal(Action::split(2, {1, 1, 2}), cd, topo));

    Cooldowns fresh = Cooldowns::zeros(g);
    CHECK_FALSE(is_legal(Action::line_switch(0, true), fresh, topo));  // already in service
    CHECK(is_legal(Action::line_switch(0, false), fresh, topo));
    fresh.line[0] = 1;
    CHECK_FALSE(is_legal(Action::line_switch(0, false), fresh, topo));
}

TEST_CASE("apply_action rewires, reverts and leaves its input alone") {
    const GridSpec g = four_sub_grid();
    const TopologyState nominal = TopologyState::nominal(g);

    const Action split = Action::split(2, {1, 1, 2});
    const TopologyState after = apply_action(nominal, g, split);
    // sub2 roster: to-end of line 1, to-end of line 2, from-end of line 4
    CHECK(after.line_to_bus[1] == 1);
    CHECK(after.line_to_bus[2] == 1);
    CHECK(after.line_from_bus[4] == 2);
    CHECK(nominal.line_from_bus[4] == 1);  // input untouched

    const TopologyState same = apply_action(nominal, g, Action::noop());
    CHECK(same == nominal);

    const Action revert = Action::split(2, {1, 1, 1});
    CHECK(apply_action(after, g, revert) == nominal);

    const TopologyState out = apply_action(nominal, g, Action::line_switch(3, false));
    CHECK(out.line_status[3] == 0);

    CHECK_THROWS_AS(apply_action(nominal, g, Action::split(2, {1, 1})), StructuralError);
    CHECK_THROWS_AS(apply_action(nominal, g, Action::split(9, {1})), StructuralError);
    CHECK_THROWS_AS(apply_action(nominal, g, Action::line_switch(77, false)), StructuralError);
}

}  // TEST_SUITE
