#pragma once

#include <Eigen/Dense>
#include <map>

#include "gridtopo/action_space.hpp"
#include "gridtopo/chronics.hpp"
#include "gridtopo/grid_model.hpp"
#include "gridtopo/power_flow.hpp"

namespace gridtopo {

// Scenario could not even start (bad dimensions, divergence at t = 0).
class SetupError : public std::runtime_error {
public:
    explicit SetupError(const std::string& what) : std::runtime_error(what) {}
};

// Enforcement preset. 1e9 disables a threshold.
struct CurriculumLevel {
    int id = 3;
    double alpha = 10.0;  // reward overload penalty
    double sot = 1.0;     // soft overload threshold (rho)
    double col = 3.0;     // consecutive overload limit (steps)
    double hot = 1.5;     // hard overload threshold (rho)

    static CurriculumLevel preset(int level);
};

struct EnvConfig {
    CurriculumLevel level = CurriculumLevel::preset(3);
    int sub_cooldown = 3;     // steps a substation is locked after a split
    int recovery_delay = 10;  // steps a disconnected line stays out
    int scenario_length = 2000;
    PFOptions pf;

    // key=value file with level, alpha, sot, col, hot, sub_cooldown,
    // recovery_delay, scenario_length; level loads the preset first, the
    // explicit keys then override it.
    static EnvConfig from_file(const std::string& path);
    void apply_kv(const std::map<std::string, std::string>& kv);
};

enum class TerminalCause { none, islanded, diverged, end_of_scenario };

const char* to_string(TerminalCause c);

// Piecewise-linear line margin, Fig. 3 shape: slope -1 below the 0.95
// breakpoint, slope -alpha above it.
double line_margin(double x, double alpha);

// Sum of line margins, or -100 on a bad terminal (islanded/diverged).
// Reaching the end of the scenario is not a bad terminal.
double reward_fn(const Eigen::VectorXd& rho, bool terminal_bad, double alpha);

struct EnvState {
    int t = 0;
    TopologyState topo;
    std::vector<int> overload_counter;  // per line, run of steps above SOT
    std::vector<int> sub_cooldown;
    std::vector<int> line_cooldown;
    NodalGraph graph;
    PFSolution last_solution;  // latest converged solution
    TerminalCause terminal = TerminalCause::none;
};

struct StepInfo {
    bool illegal_action = false;
    int hot_rounds = 0;
    std::vector<int> hot_tripped;
    std::vector<int> col_tripped;
    std::vector<int> reconnected;
};

struct StepResult {
    Eigen::VectorXd obs;
    double reward = 0.0;
    TerminalCause terminal = TerminalCause::none;
    StepInfo info;
};

int observation_size(const GridSpec& grid);

// Fixed-order observation blocks: busbar flags (line from, line to, gens,
// loads; 0 = busbar 1), line status, rho, scaled i_max, gen P / p_max,
// (gen V - 1) * 10, load P and Q over the scenario maxima, substation
// cooldowns over their maximum.
Eigen::VectorXd encode_observation(const GridSpec& grid, const EnvState& state,
                                   const Injections& inj, double max_load_p, double max_load_q,
                                   int sub_cooldown_max);

// Episodic simulator: chronics playback, curriculum-parameterized overload
// enforcement, within-step cascading, reward. Single-threaded per instance;
// run one instance per worker over a shared read-only GridSpec.
class Environment {
public:
    // Both grid and chronics are borrowed and must outlive the environment.
    Environment(const GridSpec& grid, const Chronics& chronics, EnvConfig config);

    // Nominal topology, counters zeroed, power flow solved at t = 0.
    // Throws SetupError if the scenario cannot start.
    Eigen::VectorXd reset();

    // One transition. Illegal actions degrade to NoOp (flagged in info).
    // Throws std::logic_error when called on a terminal state.
    StepResult step(const Action& a);

    const EnvState& state() const { return state_; }
    const GridSpec& grid() const { return grid_; }
    const Chronics& chronics() const { return chronics_; }
    const EnvConfig& config() const { return config_; }
    int scenario_length() const { return chronics_.length(); }
    bool done() const { return state_.terminal != TerminalCause::none; }

    // Time indices operated without failure: T on a completed scenario, the
    // failing index on a bad terminal.
    int successful_steps() const;

    Eigen::VectorXd observe() const;
    double max_rho() const;

private:
    const GridSpec& grid_;
    const Chronics& chronics_;
    EnvConfig config_;
    EnvState state_;
    double max_load_p_ = 1.0;
    double max_load_q_ = 1.0;
};

}  // namespace gridtopo
