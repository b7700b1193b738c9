#include "gridtopo/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

namespace gridtopo {

namespace fs = std::filesystem;
using nlohmann::json;

Action fpf_decide(const GridSpec& grid, const EnvState& state, const Injections& forecast,
                  const ActionCatalog& catalog, double alpha, const PFOptions& pf, int top_k) {
    const Cooldowns cd{state.sub_cooldown, state.line_cooldown};

    // optional pruning: keep substations touching the k hottest lines
    std::vector<char> sub_allowed(grid.num_subs(), 1);
    if (top_k > 0 && state.last_solution.rho.size() == grid.num_lines()) {
        sub_allowed.assign(grid.num_subs(), 0);
        std::vector<int> order(grid.num_lines());
        for (int l = 0; l < grid.num_lines(); ++l) order[l] = l;
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
            return state.last_solution.rho[a] > state.last_solution.rho[b];
        });
        for (int i = 0; i < top_k && i < grid.num_lines(); ++i) {
            sub_allowed[grid.lines[order[i]].from_sub] = 1;
            sub_allowed[grid.lines[order[i]].to_sub] = 1;
        }
    }

    double best_score = -1e300;
    Action best = Action::noop();
    for (int i = 0; i < catalog.size(); ++i) {
        const Action& a = catalog.actions[i];
        if (const NodeSplit* sp = a.as_split()) {
            if (!sub_allowed[sp->substation]) continue;
        }
        if (!a.is_noop() && !is_legal(a, cd, state.topo)) continue;

        double score;
        try {
            const TopologyState topo = apply_action(state.topo, grid, a);
            const NodalGraph g = build_nodal_graph(grid, topo);
            if (check_islanding(grid, g) == IslandCheck::islanded) {
                score = -100.0;
            } else {
                const PFSolution warm = map_warm_start(state.graph, state.last_solution, g);
                const PFSolution sol = solve_ac(grid, g, forecast, pf, &warm);
                score = sol.converged ? reward_fn(sol.rho, false, alpha) : -100.0;
            }
        } catch (const StructuralError&) {
            score = -100.0;
        }
        if (score > best_score) {
            best_score = score;
            best = a;
        }
    }
    return best;
}

Action FpfAgent::act(const Environment& env, const Eigen::VectorXd&) {
    return fpf_decide(env.grid(), env.state(), env.chronics().forecast_at(env.state().t),
                      catalog_, env.config().level.alpha, env.config().pf, top_k_);
}

Action PolicyAgent::act(const Environment&, const Eigen::VectorXd& obs) {
    const ForwardResult fw = forward(params_, obs);
    return catalog_.actions[select_action(fw.probs, SelectMode::argmax)];
}

BoxStats box_stats(std::vector<double> samples) {
    BoxStats b;
    if (samples.empty()) return b;
    std::sort(samples.begin(), samples.end());
    auto quantile = [&](double p) {
        const double h = (static_cast<double>(samples.size()) - 1.0) * p;
        const size_t lo = static_cast<size_t>(h);
        if (lo + 1 >= samples.size()) return samples.back();
        return samples[lo] + (h - lo) * (samples[lo + 1] - samples[lo]);
    };
    b.median = quantile(0.5);
    b.q1 = quantile(0.25);
    b.q3 = quantile(0.75);
    const double iqr = b.q3 - b.q1;
    const double lo_fence = b.q1 - 1.5 * iqr, hi_fence = b.q3 + 1.5 * iqr;
    b.lo_whisker = b.q3;
    b.hi_whisker = b.q1;
    bool found = false;
    for (double v : samples) {
        if (v < lo_fence || v > hi_fence) {
            ++b.outliers;
            continue;
        }
        if (!found) {
            b.lo_whisker = v;
            found = true;
        }
        b.hi_whisker = v;
    }
    if (!found) {  // everything is an outlier; fall back to the quartiles
        b.lo_whisker = b.q1;
        b.hi_whisker = b.q3;
    }
    return b;
}

long max_run_above(const std::vector<double>& x, double threshold) {
    long best = 0, run = 0;
    for (double v : x) {
        run = v > threshold ? run + 1 : 0;
        best = std::max(best, run);
    }
    return best;
}

long EvalReport::median_steps() const {
    std::vector<double> s;
    s.reserve(scenarios.size());
    for (const auto& r : scenarios) s.push_back(static_cast<double>(r.steps));
    return static_cast<long>(TrainLog::median(std::move(s)));
}

EvalReport evaluate(const GridSpec& grid, const ActionCatalog& catalog, EvalAgent& agent,
                    const std::vector<Chronics>& scenarios, const EvalOptions& opt) {
    const int L = grid.num_lines();
    EvalReport rep;
    rep.agent = agent.name();
    rep.level = opt.level;
    rep.grid_hash_hex = grid_hash(grid);
    rep.catalog_hash_hex = catalog_hash(catalog);
    rep.t_over.assign(L, {});

    std::vector<std::vector<double>> rho_samples(L);
    int T_max = 1;

    if (!opt.actions_dir.empty()) fs::create_directories(opt.actions_dir);

    for (size_t si = 0; si < scenarios.size(); ++si) {
        const Chronics& ch = scenarios[si];
        T_max = std::max(T_max, ch.length());
        EnvConfig cfg = opt.env;
        cfg.level = CurriculumLevel::preset(opt.level);
        Environment env(grid, ch, cfg);

        ScenarioResult sr;
        sr.scenario = static_cast<int>(si);

        std::ofstream actions_log;
        if (!opt.actions_dir.empty()) {
            actions_log.open(
                (fs::path(opt.actions_dir) / ("actions_" + std::to_string(si) + ".csv")));
            actions_log << "t,action_index\n";
        }

        std::vector<std::vector<double>> rho_log(L);
        auto log_state = [&]() {
            const auto& rho = env.state().last_solution.rho;
            for (int l = 0; l < L; ++l) rho_log[l].push_back(rho[l]);
        };

        try {
            Eigen::VectorXd obs = env.reset();
            log_state();
            while (!env.done()) {
                Action a = Action::noop();
                if (env.max_rho() > opt.gate_threshold) {
                    a = agent.act(env, obs);
                    if (actions_log.is_open() && !a.is_noop()) {
                        // persist by catalog index for replay
                        for (int i = 0; i < catalog.size(); ++i)
                            if (catalog.actions[i] == a) {
                                actions_log << env.state().t << ',' << i << "\n";
                                break;
                            }
                    }
                }
                StepResult step = env.step(a);
                obs = step.obs;
                if (step.terminal == TerminalCause::none ||
                    step.terminal == TerminalCause::end_of_scenario)
                    log_state();
            }
            sr.steps = env.successful_steps();
            sr.cause = env.state().terminal;
        } catch (const SetupError&) {
            sr.steps = 0;
            sr.cause = TerminalCause::diverged;
        }

        for (int l = 0; l < L; ++l) {
            rep.t_over[l].push_back(max_run_above(rho_log[l], 1.0));
            auto& pool = rho_samples[l];
            pool.insert(pool.end(), rho_log[l].begin(), rho_log[l].end());
        }
        rep.scenarios.push_back(sr);
    }

    rep.scenario_length = T_max;
    rep.rho_stats.resize(L);
    rep.t_over_stats.resize(L);
    for (int l = 0; l < L; ++l) {
        rep.rho_stats[l] = box_stats(std::move(rho_samples[l]));
        std::vector<double> tv(rep.t_over[l].begin(), rep.t_over[l].end());
        rep.t_over_stats[l] = box_stats(std::move(tv));
    }

    const int nbins = std::max(1, (T_max + 199) / 200);
    rep.histogram.assign(nbins, 0);
    for (const auto& s : rep.scenarios) {
        int bin = static_cast<int>(s.steps / 200);
        bin = std::min(bin, nbins - 1);
        ++rep.histogram[bin];
    }
    return rep;
}

static void write_box_csv(const fs::path& path, const std::vector<BoxStats>& stats) {
    std::ofstream out(path);
    out << "line,median,q1,q3,lo_whisker,hi_whisker,outliers\n";
    out.precision(12);
    for (size_t l = 0; l < stats.size(); ++l)
        out << l << ',' << stats[l].median << ',' << stats[l].q1 << ',' << stats[l].q3 << ','
            << stats[l].lo_whisker << ',' << stats[l].hi_whisker << ',' << stats[l].outliers
            << "\n";
}

void export_report(const EvalReport& report, const std::string& out_dir) {
    fs::create_directories(out_dir);
    const fs::path dir(out_dir);

    json summary;
    summary["version"] = kVersion;
    summary["agent"] = report.agent;
    summary["level"] = report.level;
    summary["scenarios"] = report.scenarios.size();
    summary["scenario_length"] = report.scenario_length;
    summary["median_steps"] = report.median_steps();
    summary["grid_hash"] = report.grid_hash_hex;
    summary["catalog_hash"] = report.catalog_hash_hex;
    {
        std::ofstream out(dir / "summary.json");
        if (!out) throw std::runtime_error("cannot write " + (dir / "summary.json").string());
        out << summary.dump(2) << "\n";
    }
    {
        std::ofstream out(dir / "per_scenario.csv");
        out << "scenario,steps,cause\n";
        for (const auto& s : report.scenarios)
            out << s.scenario << ',' << s.steps << ',' << to_string(s.cause) << "\n";
    }
    write_box_csv(dir / "rho_boxplot.csv", report.rho_stats);
    write_box_csv(dir / "t_over_boxplot.csv", report.t_over_stats);
    {
        std::ofstream out(dir / "histogram.csv");
        out << "bin_start,bin_end,count\n";
        for (size_t b = 0; b < report.histogram.size(); ++b)
            out << b * 200 << ',' << (b + 1) * 200 << ',' << report.histogram[b] << "\n";
    }
}

ReplayResult replay(const GridSpec& grid, const ActionCatalog& catalog, const Chronics& chronics,
                    const std::string& actions_csv, const EvalOptions& opt) {
    std::map<int, int> plan;  // t -> catalog index
    {
        std::ifstream in(actions_csv);
        if (!in) throw std::runtime_error("cannot open actions file " + actions_csv);
        std::string line;
        std::getline(in, line);  // header
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            std::stringstream ss(line);
            std::string t_str, a_str;
            std::getline(ss, t_str, ',');
            std::getline(ss, a_str, ',');
            plan[std::stoi(t_str)] = std::stoi(a_str);
        }
    }
    EnvConfig cfg = opt.env;
    cfg.level = CurriculumLevel::preset(opt.level);
    Environment env(grid, chronics, cfg);
    env.reset();

    const int L = grid.num_lines();
    std::vector<std::vector<double>> rho_log(L);
    auto log_state = [&]() {
        for (int l = 0; l < L; ++l) rho_log[l].push_back(env.state().last_solution.rho[l]);
    };
    log_state();

    ReplayResult res;
    while (!env.done()) {
        // the logged action applies at the step that advances to t+1
        auto it = plan.find(env.state().t);
        Action a = it == plan.end() ? Action::noop() : catalog.actions[it->second];
        StepResult step = env.step(a);
        res.total_reward += step.reward;
        if (step.terminal == TerminalCause::none ||
            step.terminal == TerminalCause::end_of_scenario)
            log_state();
    }
    res.steps = env.successful_steps();
    res.cause = env.state().terminal;
    for (int l = 0; l < L; ++l) res.t_over.push_back(max_run_above(rho_log[l], 1.0));
    return res;
}

}  // namespace gridtopo
