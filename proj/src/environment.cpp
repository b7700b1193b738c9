#include "gridtopo/environment.hpp"

#include <algorithm>
#include <cmath>

#include "gridtopo/config.hpp"

namespace gridtopo {

CurriculumLevel CurriculumLevel::preset(int level) {
    switch (level) {
        case 1: return {1, 1.0, 1e9, 1e9, 1e9};
        case 2: return {2, 5.0, 2.0, 15.0, 1e9};
        case 3: return {3, 10.0, 1.0, 3.0, 1.5};
        default: throw StructuralError("curriculum level must be 1, 2 or 3");
    }
}

const char* to_string(TerminalCause c) {
    switch (c) {
        case TerminalCause::none: return "none";
        case TerminalCause::islanded: return "islanded";
        case TerminalCause::diverged: return "diverged";
        case TerminalCause::end_of_scenario: return "end_of_scenario";
    }
    return "?";
}

void EnvConfig::apply_kv(const std::map<std::string, std::string>& kv) {
    auto get = [&](const char* key) -> const std::string* {
        auto it = kv.find(key);
        return it == kv.end() ? nullptr : &it->second;
    };
    if (const auto* v = get("level")) level = CurriculumLevel::preset(std::stoi(*v));
    if (const auto* v = get("alpha")) level.alpha = std::stod(*v);
    if (const auto* v = get("sot")) level.sot = std::stod(*v);
    if (const auto* v = get("col")) level.col = std::stod(*v);
    if (const auto* v = get("hot")) level.hot = std::stod(*v);
    if (const auto* v = get("sub_cooldown")) sub_cooldown = std::stoi(*v);
    if (const auto* v = get("recovery_delay")) recovery_delay = std::stoi(*v);
    if (const auto* v = get("scenario_length")) scenario_length = std::stoi(*v);
    if (const auto* v = get("pf_tol")) pf.tol = std::stod(*v);
    if (const auto* v = get("pf_max_iter")) pf.max_iter = std::stoi(*v);
}

EnvConfig EnvConfig::from_file(const std::string& path) {
    EnvConfig cfg;
    cfg.apply_kv(parse_kv_file(path));
    return cfg;
}

double line_margin(double x, double alpha) {
    return x <= 0.95 ? (0.95 - x) : alpha * (0.95 - x);
}

double reward_fn(const Eigen::VectorXd& rho, bool terminal_bad, double alpha) {
    if (terminal_bad) return -100.0;
    double sum = 0.0;
    for (int i = 0; i < rho.size(); ++i) sum += line_margin(rho[i], alpha);
    return sum;
}

int observation_size(const GridSpec& grid) {
    const int L = grid.num_lines(), G = grid.num_gens(), Ld = grid.num_loads(),
              S = grid.num_subs();
    return 5 * L + 3 * G + 3 * Ld + S;
}

Eigen::VectorXd encode_observation(const GridSpec& grid, const EnvState& state,
                                   const Injections& inj, double max_load_p, double max_load_q,
                                   int sub_cooldown_max) {
    const int L = grid.num_lines(), G = grid.num_gens(), Ld = grid.num_loads(),
              S = grid.num_subs();
    Eigen::VectorXd v(observation_size(grid));
    int i = 0;
    for (int l = 0; l < L; ++l) v[i++] = state.topo.line_from_bus[l] == 2 ? 1.0 : 0.0;
    for (int l = 0; l < L; ++l) v[i++] = state.topo.line_to_bus[l] == 2 ? 1.0 : 0.0;
    for (int g = 0; g < G; ++g) v[i++] = state.topo.gen_bus[g] == 2 ? 1.0 : 0.0;
    for (int d = 0; d < Ld; ++d) v[i++] = state.topo.load_bus[d] == 2 ? 1.0 : 0.0;
    for (int l = 0; l < L; ++l) v[i++] = state.topo.line_status[l] ? 1.0 : 0.0;
    for (int l = 0; l < L; ++l) v[i++] = state.last_solution.rho.size() ? state.last_solution.rho[l] : 0.0;
    double imax_max = 0.0;
    for (const auto& ln : grid.lines) imax_max = std::max(imax_max, ln.i_max);
    for (int l = 0; l < L; ++l) v[i++] = grid.lines[l].i_max / imax_max;
    for (int g = 0; g < G; ++g) v[i++] = inj.gen_p[g] / std::max(1e-9, grid.generators[g].p_max);
    for (int g = 0; g < G; ++g) v[i++] = (inj.gen_v[g] - 1.0) * 10.0;
    for (int d = 0; d < Ld; ++d) v[i++] = inj.load_p[d] / std::max(1e-9, max_load_p);
    for (int d = 0; d < Ld; ++d) v[i++] = inj.load_q[d] / std::max(1e-9, max_load_q);
    for (int s = 0; s < S; ++s)
        v[i++] = static_cast<double>(state.sub_cooldown[s]) / std::max(1, sub_cooldown_max);
    return v;
}

Environment::Environment(const GridSpec& grid, const Chronics& chronics, EnvConfig config)
    : grid_(grid), chronics_(chronics), config_(std::move(config)) {
    if (!chronics_.matches(grid_)) throw SetupError("chronics do not match grid dimensions");
    max_load_p_ = std::max(1e-9, chronics_.load_p.maxCoeff());
    max_load_q_ = std::max(1e-9, chronics_.load_q.maxCoeff());
}

Eigen::VectorXd Environment::reset() {
    state_ = EnvState{};
    state_.t = 0;
    state_.topo = TopologyState::nominal(grid_);
    state_.overload_counter.assign(grid_.num_lines(), 0);
    state_.sub_cooldown.assign(grid_.num_subs(), 0);
    state_.line_cooldown.assign(grid_.num_lines(), 0);
    state_.graph = build_nodal_graph(grid_, state_.topo);
    if (check_islanding(grid_, state_.graph) != IslandCheck::ok)
        throw SetupError("nominal topology is islanded");
    PFSolution sol = solve_ac(grid_, state_.graph, chronics_.injections_at(0), config_.pf);
    if (!sol.converged) throw SetupError("power flow diverges at t = 0, scenario rejected");
    state_.last_solution = std::move(sol);
    state_.terminal =
        chronics_.length() == 1 ? TerminalCause::end_of_scenario : TerminalCause::none;
    return observe();
}

Eigen::VectorXd Environment::observe() const {
    return encode_observation(grid_, state_, chronics_.injections_at(state_.t), max_load_p_,
                              max_load_q_, config_.sub_cooldown);
}

double Environment::max_rho() const {
    return state_.last_solution.rho.size() ? state_.last_solution.rho.maxCoeff() : 0.0;
}

int Environment::successful_steps() const {
    switch (state_.terminal) {
        case TerminalCause::end_of_scenario: return chronics_.length();
        case TerminalCause::none: return state_.t + 1;
        default: return state_.t;
    }
}

StepResult Environment::step(const Action& a) {
    if (done()) throw std::logic_error("step called after terminal state");
    StepResult res;

    // (1) legality, action application, cooldown bookkeeping
    const Cooldowns cd{state_.sub_cooldown, state_.line_cooldown};
    res.info.illegal_action = !is_legal(a, cd, state_.topo);
    const Action act = res.info.illegal_action ? Action::noop() : a;
    if (!act.is_noop()) state_.topo = apply_action(state_.topo, grid_, act);
    for (auto& c : state_.sub_cooldown)
        if (c > 0) --c;
    for (auto& c : state_.line_cooldown)
        if (c > 0) --c;
    if (const NodeSplit* sp = act.as_split()) state_.sub_cooldown[sp->substation] = config_.sub_cooldown;
    if (const LineSwitch* sw = act.as_switch()) state_.line_cooldown[sw->line] = config_.recovery_delay;

    // (2) advance time
    state_.t += 1;
    const Injections inj = chronics_.injections_at(state_.t);

    // (3) scheduled reconnections
    for (int l = 0; l < grid_.num_lines(); ++l) {
        if (!state_.topo.line_status[l] && state_.line_cooldown[l] == 0) {
            state_.topo.line_status[l] = 1;
            res.info.reconnected.push_back(l);
        }
    }

    auto resolve = [&](bool warm) -> bool {
        // returns false when the episode just terminated
        NodalGraph g = build_nodal_graph(grid_, state_.topo);
        if (check_islanding(grid_, g) != IslandCheck::ok) {
            state_.terminal = TerminalCause::islanded;
            return false;
        }
        PFSolution sol;
        if (warm) {
            PFSolution start = map_warm_start(state_.graph, state_.last_solution, g);
            sol = solve_ac(grid_, g, inj, config_.pf, &start);
        } else {
            sol = solve_ac(grid_, g, inj, config_.pf);
        }
        if (!sol.converged) {
            state_.terminal = TerminalCause::diverged;
            return false;
        }
        state_.graph = std::move(g);
        state_.last_solution = std::move(sol);
        return true;
    };

    // (4)(5) islanding check and power flow
    bool alive = resolve(true);

    // (6) hard-threshold cascade: every pass removes at least one line, so the
    // loop runs at most num_lines times
    while (alive) {
        std::vector<int> hot;
        for (int l = 0; l < grid_.num_lines(); ++l)
            if (state_.topo.line_status[l] && state_.last_solution.rho[l] > config_.level.hot)
                hot.push_back(l);
        if (hot.empty()) break;
        ++res.info.hot_rounds;
        for (int l : hot) {
            state_.topo.line_status[l] = 0;
            state_.line_cooldown[l] = config_.recovery_delay;
            res.info.hot_tripped.push_back(l);
        }
        alive = resolve(true);
    }

    // (7) soft-threshold bookkeeping on the post-cascade solution. The
    // counter tracks runs of this bookkeeping rho; a line tripped here keeps
    // its count until the next step where its rho reads 0.
    if (alive) {
        std::vector<int> col_trips;
        for (int l = 0; l < grid_.num_lines(); ++l) {
            const double book =
                state_.topo.line_status[l] ? state_.last_solution.rho[l] : 0.0;
            state_.overload_counter[l] = book > config_.level.sot ? state_.overload_counter[l] + 1 : 0;
            if (state_.topo.line_status[l] &&
                static_cast<double>(state_.overload_counter[l]) >= config_.level.col)
                col_trips.push_back(l);
        }
        if (!col_trips.empty()) {
            for (int l : col_trips) {
                state_.topo.line_status[l] = 0;
                state_.line_cooldown[l] = config_.recovery_delay;
                res.info.col_tripped.push_back(l);
            }
            alive = resolve(true);
        }
    }

    // (8) reward and terminal bookkeeping
    if (!alive) {
        res.reward = -100.0;
    } else {
        if (state_.t >= chronics_.length() - 1)
            state_.terminal = TerminalCause::end_of_scenario;
        res.reward = reward_fn(state_.last_solution.rho, false, config_.level.alpha);
    }
    res.terminal = state_.terminal;
    res.obs = observe();
    return res;
}

}  // namespace gridtopo
