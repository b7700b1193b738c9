#pragma once

// Shared fixtures: a small 4-substation meshed grid (the bus-splitting
// illustration case) and helpers to craft chronics with prescribed load
// scaling so enforcement timing can be pinned exactly.

#include <vector>

#include "gridtopo/chronics.hpp"
#include "gridtopo/grid_model.hpp"
#include "gridtopo/power_flow.hpp"

namespace gridtopo::testing {

// Four substations, five lines, slack at sub 0, one load at sub 3. Uniform
// 1.0 voltage setpoints and no line charging, so the zero-injection solution
// is exactly flat.
inline GridSpec four_sub_grid() {
    GridSpec g;
    g.base_mva = 100.0;
    g.substations.resize(4);
    for (int s = 0; s < 4; ++s) g.substations[s].id = s;
    auto line = [](int f, int t) {
        LineSpec l;
        l.from_sub = f;
        l.to_sub = t;
        l.r = 0.01;
        l.x = 0.05;
        l.b = 0.0;
        l.i_max = 1.0;
        return l;
    };
    g.lines = {line(0, 1), line(0, 2), line(1, 2), line(1, 3), line(2, 3)};
    g.generators = {{0, 0, 2.0, 1.0, "slack"}};
    g.loads = {{0, 3}};
    g.slack_gen = 0;
    g.finalize();
    return g;
}

inline Injections zero_injections(const GridSpec& grid) {
    Injections inj;
    inj.load_p = Eigen::VectorXd::Zero(grid.num_loads());
    inj.load_q = Eigen::VectorXd::Zero(grid.num_loads());
    inj.gen_p = Eigen::VectorXd::Zero(grid.num_gens());
    inj.gen_v.resize(grid.num_gens());
    for (int gi = 0; gi < grid.num_gens(); ++gi) inj.gen_v[gi] = grid.generators[gi].v_set;
    return inj;
}

// Reference-grid injections at a given uniform load scale, dispatch rule as
// in the chronics generator.
inline Injections scaled_injections(const GridSpec& grid, double scale) {
    const auto base = reference_base_load_p();
    Injections inj;
    inj.load_p.resize(grid.num_loads());
    inj.load_q.resize(grid.num_loads());
    const double tanphi = std::sqrt(1.0 - 0.95 * 0.95) / 0.95;
    double total = 0.0;
    for (int d = 0; d < grid.num_loads(); ++d) {
        inj.load_p[d] = base[d] * scale;
        inj.load_q[d] = inj.load_p[d] * tanphi;
        total += inj.load_p[d];
    }
    inj.gen_p = dispatch_generation(grid, total, 1.03);
    inj.gen_v.resize(grid.num_gens());
    for (int gi = 0; gi < grid.num_gens(); ++gi) inj.gen_v[gi] = grid.generators[gi].v_set;
    return inj;
}

// Chronics whose step t carries scaled_injections(grid, scales[t]); forecasts
// are exact (zero noise).
inline Chronics chronics_from_scales(const GridSpec& grid, const std::vector<double>& scales) {
    const int T = static_cast<int>(scales.size());
    Chronics ch;
    ch.load_p.resize(T, grid.num_loads());
    ch.load_q.resize(T, grid.num_loads());
    ch.gen_p.resize(T, grid.num_gens());
    ch.gen_v.resize(T, grid.num_gens());
    for (int t = 0; t < T; ++t) {
        const Injections inj = scaled_injections(grid, scales[t]);
        ch.load_p.row(t) = inj.load_p;
        ch.load_q.row(t) = inj.load_q;
        ch.gen_p.row(t) = inj.gen_p;
        ch.gen_v.row(t) = inj.gen_v;
    }
    auto fc = [&](const Eigen::MatrixXd& truth) {
        Eigen::MatrixXd f(T, truth.cols());
        for (int t = 0; t < T; ++t) f.row(t) = truth.row(std::min(t + 1, T - 1));
        return f;
    };
    ch.load_p_fc = fc(ch.load_p);
    ch.load_q_fc = fc(ch.load_q);
    ch.gen_p_fc = fc(ch.gen_p);
    ch.gen_v_fc = fc(ch.gen_v);
    return ch;
}

}  // namespace gridtopo::testing
