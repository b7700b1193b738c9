#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "gridtopo/chronics.hpp"
#include "gridtopo/config.hpp"
#include "gridtopo/harness.hpp"
#include "gridtopo/trainer.hpp"

namespace fs = std::filesystem;
using namespace gridtopo;

namespace {

GridSpec load_grid(const std::string& path) {
    if (path.empty()) return reference_grid();
    return GridSpec::load_file(path);
}

// A chronics path is either one scenario directory (holds loads_p.csv) or a
// directory of scenario_* subdirectories.
std::vector<Chronics> load_scenarios(const std::string& dir, const GridSpec& grid) {
    std::vector<Chronics> out;
    if (fs::exists(fs::path(dir) / "loads_p.csv")) {
        out.push_back(Chronics::load_dir(dir, grid));
        return out;
    }
    std::vector<fs::path> subs;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_directory() && fs::exists(e.path() / "loads_p.csv")) subs.push_back(e.path());
    std::sort(subs.begin(), subs.end());
    for (const auto& p : subs) out.push_back(Chronics::load_dir(p.string(), grid));
    if (out.empty()) throw std::runtime_error("no chronics found under " + dir);
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Grid topology control stack: cascading-overload environment, "
                 "actor-critic training with a physics curriculum, and evaluation baselines"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string grid_path, config_path, out_dir;
    uint64_t seed = 1;
    app.add_option("--grid", grid_path, "grid description JSON (defaults to the built-in 14-bus)");
    app.add_option("--config", config_path, "key=value configuration file");
    app.add_option("--seed", seed, "random seed");
    app.add_option("--out", out_dir, "output directory");

    // enumerate-actions
    auto* enum_cmd = app.add_subcommand("enumerate-actions", "print the action catalog as JSON");
    bool verify = false;
    enum_cmd->add_flag("--verify", verify, "print per-substation counts and the 2^(k-1) check");

    // powerflow
    auto* pf_cmd = app.add_subcommand("powerflow", "solve one AC power flow, print JSON solution");
    std::string snapshot_path, pf_chronics;
    int pf_t = 0;
    pf_cmd->add_option("--snapshot", snapshot_path, "injections JSON file");
    pf_cmd->add_option("--chronics", pf_chronics, "scenario directory to read injections from");
    pf_cmd->add_option("--t", pf_t, "time step within --chronics");

    // gen-chronics
    auto* gen_cmd = app.add_subcommand("gen-chronics", "generate synthetic scenario CSVs");
    int gen_scenarios = 1, gen_length = 2000;
    double peak_scale = 1.0, forecast_noise = 0.0;
    gen_cmd->add_option("--scenarios", gen_scenarios, "number of scenarios");
    gen_cmd->add_option("--length", gen_length, "steps per scenario");
    gen_cmd->add_option("--peak-scale", peak_scale, "profile peak scaling");
    gen_cmd->add_option("--forecast-noise", forecast_noise, "absolute sigma on forecasts");

    // train
    auto* train_cmd = app.add_subcommand("train", "asynchronous actor-critic training");
    std::string train_chronics, mode_str = "curriculum";
    long episodes = -1;
    int workers = -1;
    train_cmd->add_option("--chronics", train_chronics, "scenario pool directory")->required();
    train_cmd->add_option("--mode", mode_str, "curriculum|baseline")
        ->check(CLI::IsMember({"curriculum", "baseline"}));
    train_cmd->add_option("--episodes", episodes, "override total episodes");
    train_cmd->add_option("--workers", workers, "override worker count");

    // evaluate
    auto* eval_cmd = app.add_subcommand("evaluate", "run scenarios and export statistics");
    std::string eval_chronics, agent_spec = "do-nothing";
    int eval_level = 3;
    bool log_actions = false;
    eval_cmd->add_option("--chronics", eval_chronics, "scenario pool directory")->required();
    eval_cmd->add_option("--agent", agent_spec,
                         "do-nothing | fpf | path to a checkpoint JSON");
    eval_cmd->add_option("--level", eval_level, "enforcement level (default 3)");
    eval_cmd->add_flag("--log-actions", log_actions, "write per-scenario action logs");

    // replay
    auto* replay_cmd = app.add_subcommand("replay", "re-run a logged episode");
    std::string replay_chronics, actions_path;
    int replay_level = 3;
    replay_cmd->add_option("--chronics", replay_chronics, "single scenario directory")->required();
    replay_cmd->add_option("--actions", actions_path, "actions CSV from evaluate --log-actions")
        ->required();
    replay_cmd->add_option("--level", replay_level, "enforcement level");

    CLI11_PARSE(app, argc, argv);

    try {
        const GridSpec grid = load_grid(grid_path);
        const ActionCatalog catalog = ActionCatalog::enumerate_node_splits(grid);

        if (enum_cmd->parsed()) {
            if (verify) {
                long total = 0;
                bool all_ok = true;
                for (int s = 0; s < grid.num_subs(); ++s) {
                    const int k = static_cast<int>(grid.substations[s].elements.size());
                    const long expect = k ? (1L << (k - 1)) : 0;
                    total += catalog.sub_count[s];
                    const bool ok = catalog.sub_count[s] == expect;
                    all_ok = all_ok && ok;
                    std::cout << "substation " << s << ": k=" << k << " splits="
                              << catalog.sub_count[s] << " expected=" << expect
                              << (ok ? "" : "  MISMATCH") << "\n";
                }
                std::cout << "total node-split actions: " << total << "\n";
                if (total == 156)
                    std::cout << "matches the published symmetry-reduced count (312 -> 156)\n";
                else
                    std::cout << "deviation from the published count 156: "
                              << (total - 156 > 0 ? "+" : "") << (total - 156) << "\n";
                std::cout << "catalog size incl. NoOp: " << catalog.size() << "\n";
                std::cout << "catalog hash: " << catalog_hash(catalog) << "\n";
                return all_ok ? 0 : 1;
            }
            std::cout << catalog.to_json_string(2) << "\n";
            return 0;
        }

        if (pf_cmd->parsed()) {
            Injections inj;
            if (!snapshot_path.empty()) {
                inj = Injections::load_file(snapshot_path);
            } else if (!pf_chronics.empty()) {
                const Chronics ch = Chronics::load_dir(pf_chronics, grid);
                if (pf_t < 0 || pf_t >= ch.length())
                    throw std::runtime_error("--t outside scenario range");
                inj = ch.injections_at(pf_t);
            } else {
                inj = reference_nominal_injections(grid);
            }
            const TopologyState topo = TopologyState::nominal(grid);
            const NodalGraph g = build_nodal_graph(grid, topo);
            PFOptions pf;
            if (!config_path.empty()) {
                EnvConfig env = EnvConfig::from_file(config_path);
                pf = env.pf;
            }
            std::cout << solve_ac(grid, g, inj, pf).to_json_string(2) << "\n";
            return 0;
        }

        if (gen_cmd->parsed()) {
            if (out_dir.empty()) throw std::runtime_error("gen-chronics needs --out");
            ChronicsProfile profile = grid.num_loads() == 11 &&
                                              grid_hash(grid) == grid_hash(reference_grid())
                                          ? ChronicsProfile::reference(peak_scale)
                                          : ChronicsProfile{};
            profile.peak_scale = peak_scale;
            profile.forecast_noise = forecast_noise;
            for (int i = 0; i < gen_scenarios; ++i) {
                const Chronics ch = generate_chronics(grid, gen_length, seed + i, profile);
                char name[32];
                snprintf(name, sizeof name, "scenario_%03d", i);
                ch.save_dir((fs::path(out_dir) / name).string(), grid);
            }
            std::cout << "wrote " << gen_scenarios << " scenario(s) under " << out_dir << "\n";
            return 0;
        }

        if (train_cmd->parsed()) {
            if (out_dir.empty()) throw std::runtime_error("train needs --out");
            TrainConfig cfg;
            if (!config_path.empty()) cfg = TrainConfig::from_file(config_path);
            cfg.seed = seed;
            if (episodes > 0) cfg.total_episodes = episodes;
            if (workers > 0) cfg.num_workers = workers;
            const auto scenarios = load_scenarios(train_chronics, grid);
            const TrainMode mode =
                mode_str == "baseline" ? TrainMode::baseline : TrainMode::curriculum;
            const TrainResult result = train(grid, catalog, scenarios, cfg, mode, out_dir);
            std::cout << "episodes: " << result.log.rows.size() << "\n";
            if (!result.log.rows.empty())
                std::cout << "final rolling median steps: "
                          << result.log.rows.back().rolling_median << "\n";
            for (long t : result.level_transitions)
                std::cout << "level transition after episode " << t << "\n";
            std::cout << "log: " << (fs::path(out_dir) / "trainlog.csv").string() << "\n";
            return 0;
        }

        if (eval_cmd->parsed()) {
            if (out_dir.empty()) throw std::runtime_error("evaluate needs --out");
            const auto scenarios = load_scenarios(eval_chronics, grid);
            EvalOptions opt;
            opt.level = eval_level;
            if (!config_path.empty()) {
                opt.env = EnvConfig::from_file(config_path);
            }
            if (log_actions) opt.actions_dir = (fs::path(out_dir) / "actions").string();

            std::unique_ptr<EvalAgent> agent;
            if (agent_spec == "do-nothing") {
                agent = std::make_unique<DoNothingAgent>();
            } else if (agent_spec == "fpf") {
                agent = std::make_unique<FpfAgent>(catalog, opt.fpf_top_k);
            } else {
                NetworkParams params = load_checkpoint(agent_spec, catalog_hash(catalog));
                agent = std::make_unique<PolicyAgent>(std::move(params), catalog,
                                                      fs::path(agent_spec).stem().string());
            }
            const EvalReport report = evaluate(grid, catalog, *agent, scenarios, opt);
            export_report(report, out_dir);
            std::cout << "agent " << report.agent << " on " << report.scenarios.size()
                      << " scenario(s), median successful steps " << report.median_steps()
                      << "\n";
            std::cout << "report written to " << out_dir << "\n";
            return 0;
        }

        if (replay_cmd->parsed()) {
            const auto scenarios = load_scenarios(replay_chronics, grid);
            if (scenarios.size() != 1)
                throw std::runtime_error("replay expects a single scenario directory");
            EvalOptions opt;
            opt.level = replay_level;
            const ReplayResult res = replay(grid, catalog, scenarios[0], actions_path, opt);
            std::cout << "steps: " << res.steps << "\ncause: " << to_string(res.cause)
                      << "\ntotal_reward: " << res.total_reward << "\nt_over:";
            for (long v : res.t_over) std::cout << ' ' << v;
            std::cout << "\n";
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
