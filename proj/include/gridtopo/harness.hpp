#pragma once

#include <memory>
#include <string>
#include <vector>

#include "gridtopo/action_space.hpp"
#include "gridtopo/agent.hpp"
#include "gridtopo/environment.hpp"
#include "gridtopo/trainer.hpp"

namespace gridtopo {

inline constexpr const char* kVersion = "gridtopo 0.1.0";

// Single-step lookahead score of every catalog action against forecast
// injections: clone the topology, apply the action, solve one power flow and
// take reward_fn of the resulting loadings (islanding / divergence scored
// -100). Returns the argmax, ties to the lowest index, so NoOp wins ties.
// top_k > 0 restricts candidate splits to substations touching the k most
// loaded lines.
Action fpf_decide(const GridSpec& grid, const EnvState& state, const Injections& forecast,
                  const ActionCatalog& catalog, double alpha, const PFOptions& pf = {},
                  int top_k = 0);

// Decision maker evaluated by the harness. Called only at gated steps.
class EvalAgent {
public:
    virtual ~EvalAgent() = default;
    virtual std::string name() const = 0;
    virtual Action act(const Environment& env, const Eigen::VectorXd& obs) = 0;
};

class DoNothingAgent : public EvalAgent {
public:
    std::string name() const override { return "do-nothing"; }
    Action act(const Environment&, const Eigen::VectorXd&) override { return Action::noop(); }
};

// Greedy forecast-driven baseline, no learning.
class FpfAgent : public EvalAgent {
public:
    explicit FpfAgent(const ActionCatalog& catalog, int top_k = 0)
        : catalog_(catalog), top_k_(top_k) {}
    std::string name() const override { return "fpf"; }
    Action act(const Environment& env, const Eigen::VectorXd& obs) override;

private:
    const ActionCatalog& catalog_;
    int top_k_;
};

// Trained checkpoint acting by argmax.
class PolicyAgent : public EvalAgent {
public:
    PolicyAgent(NetworkParams params, const ActionCatalog& catalog, std::string label = "policy")
        : params_(std::move(params)), catalog_(catalog), label_(std::move(label)) {}
    std::string name() const override { return label_; }
    Action act(const Environment& env, const Eigen::VectorXd& obs) override;

private:
    NetworkParams params_;
    const ActionCatalog& catalog_;
    std::string label_;
};

struct BoxStats {
    double median = 0.0, q1 = 0.0, q3 = 0.0;
    double lo_whisker = 0.0, hi_whisker = 0.0;
    long outliers = 0;
};

// Type-7 linear-interpolation quantiles; whiskers at the most extreme data
// within 1.5 IQR of the quartiles.
BoxStats box_stats(std::vector<double> samples);

struct ScenarioResult {
    int scenario = 0;
    long steps = 0;
    TerminalCause cause = TerminalCause::none;
};

struct EvalReport {
    std::string agent;
    int level = 3;
    int scenario_length = 0;
    std::vector<ScenarioResult> scenarios;
    std::vector<BoxStats> rho_stats;             // per line, pooled over steps and scenarios
    std::vector<BoxStats> t_over_stats;          // per line, over scenarios
    std::vector<std::vector<long>> t_over;       // [line][scenario] max consecutive rho > 1 run
    std::vector<long> histogram;                 // successful-step bins of width 200
    std::string grid_hash_hex, catalog_hash_hex;

    long median_steps() const;
};

struct EvalOptions {
    int level = 3;
    double gate_threshold = 0.8;
    EnvConfig env;              // level field overridden by `level`
    std::string actions_dir;    // when set, per-scenario decision logs for replay
    int fpf_top_k = 0;
};

// Runs each scenario once at the given enforcement level, querying the agent
// only when some line exceeds the gate. Deterministic for argmax agents.
EvalReport evaluate(const GridSpec& grid, const ActionCatalog& catalog, EvalAgent& agent,
                    const std::vector<Chronics>& scenarios, const EvalOptions& opt);

// Maximal run lengths of x > threshold; shared by evaluation and tests.
long max_run_above(const std::vector<double>& x, double threshold);

// summary.json, per_scenario.csv, rho_boxplot.csv, t_over_boxplot.csv,
// histogram.csv under out_dir.
void export_report(const EvalReport& report, const std::string& out_dir);

struct ReplayResult {
    long steps = 0;
    TerminalCause cause = TerminalCause::none;
    double total_reward = 0.0;
    std::vector<long> t_over;  // per line
};

// Re-runs a logged episode: the actions CSV holds `t,action_index` rows;
// every other step takes NoOp.
ReplayResult replay(const GridSpec& grid, const ActionCatalog& catalog, const Chronics& chronics,
                    const std::string& actions_csv, const EvalOptions& opt);

}  // namespace gridtopo
