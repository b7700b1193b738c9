#pragma once

#include <Eigen/Dense>

#include "gridtopo/grid_model.hpp"

namespace gridtopo {

// Per-element injection set for one time step. All quantities p.u. on
// GridSpec::base_mva. gen_p of the slack generator is a planned value only;
// the solver lets the slack balance the system.
struct Injections {
    Eigen::VectorXd load_p;
    Eigen::VectorXd load_q;
    Eigen::VectorXd gen_p;
    Eigen::VectorXd gen_v;

    bool matches(const GridSpec& grid) const {
        return load_p.size() == grid.num_loads() && load_q.size() == grid.num_loads() &&
               gen_p.size() == grid.num_gens() && gen_v.size() == grid.num_gens();
    }

    std::string to_json_string(int indent = -1) const;
    static Injections from_json_string(const std::string& text);
    static Injections load_file(const std::string& path);
};

struct PFSolution {
    Eigen::VectorXd node_v_mag;    // per graph node; 0 for de-energized nodes
    Eigen::VectorXd node_v_angle;  // radians
    Eigen::VectorXd line_current;  // per line, max of the two end currents; 0 when out
    Eigen::VectorXd rho;           // line_current / i_max; 0 when out
    bool converged = false;
    int iterations = 0;
    double max_mismatch = 0.0;
    double slack_p = 0.0;

    std::string to_json_string(int indent = -1) const;
};

struct PFOptions {
    double tol = 1e-8;  // max |mismatch|, p.u.
    int max_iter = 20;
};

// Newton-Raphson AC power flow on the nodal graph, polar mismatch form.
// PV nodes at generator attachments (reactive limits unenforced), slack node
// fixes angle 0 and balances power. converged == false signals divergence
// (no solution found or singular Jacobian); that is an ordinary outcome, not
// an error. Throws StructuralError when a load or generator is islanded from
// the slack. Nodes outside the slack component that carry only line ends are
// treated as de-energized (V = 0, attached line flows 0).
//
// warm_start, when given, must be sized to the same graph; use
// map_warm_start to carry a solution across a topology change.
PFSolution solve_ac(const GridSpec& grid, const NodalGraph& g, const Injections& inj,
                    const PFOptions& opt = {}, const PFSolution* warm_start = nullptr);

// Transfers node voltages from a solution on prev_graph onto new_graph by
// matching (sub, busbar) keys; unmatched nodes get a flat start.
PFSolution map_warm_start(const NodalGraph& prev_graph, const PFSolution& prev,
                          const NodalGraph& new_graph);

// Nominal reference-grid snapshot: base loads at power factor 0.95 lagging,
// generation dispatched proportionally to p_max with a 3% loss margin.
Injections reference_nominal_injections(const GridSpec& grid);

}  // namespace gridtopo
