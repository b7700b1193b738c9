#include <random>

#include "doctest.h"
#include "gridtopo/config.hpp"
#include "gridtopo/environment.hpp"
#include "support/test_grids.hpp"

using namespace gridtopo;
using gridtopo::testing::chronics_from_scales;
using gridtopo::testing::four_sub_grid;
using gridtopo::testing::scaled_injections;

namespace {

const GridSpec& ref_grid() {
    static const GridSpec g = reference_grid();
    return g;
}

EnvConfig level_config(int level) {
    EnvConfig cfg;
    cfg.level = CurriculumLevel::preset(level);
    return cfg;
}

// Uniform load scale that puts the hottest line's loading into
// [lo, hi] on the nominal topology, found by bisection against the solver.
double find_scale_for_max_rho(double lo, double hi) {
    const GridSpec& g = ref_grid();
    const NodalGraph graph = build_nodal_graph(g, TopologyState::nominal(g));
    double a = 0.2, b = 4.0;
    for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (a + b);
        const PFSolution sol = solve_ac(g, graph, scaled_injections(g, mid));
        if (!sol.converged) {
            b = mid;
            continue;
        }
        const double m = sol.rho.maxCoeff();
        if (m < lo) a = mid;
        else if (m > hi) b = mid;
        else return mid;
    }
    FAIL("no scale found for requested loading band");
    return 1.0;
}

}  // namespace

TEST_SUITE("environment") {

TEST_CASE("curriculum presets match the level table") {
    const CurriculumLevel l1 = CurriculumLevel::preset(1);
    CHECK(l1.alpha == 1.0);
    CHECK(l1.sot == 1e9);
    CHECK(l1.col == 1e9);
    CHECK(l1.hot == 1e9);
    const CurriculumLevel l2 = CurriculumLevel::preset(2);
    CHECK(l2.alpha == 5.0);
    CHECK(l2.sot == 2.0);
    CHECK(l2.col == 15.0);
    CHECK(l2.hot == 1e9);
    const CurriculumLevel l3 = CurriculumLevel::preset(3);
    CHECK(l3.alpha == 10.0);
    CHECK(l3.sot == 1.0);
    CHECK(l3.col == 3.0);
    CHECK(l3.hot == 1.5);
    CHECK_THROWS_AS(CurriculumLevel::preset(4), StructuralError);
}

TEST_CASE("config file overrides the preset") {
    const auto kv = parse_kv_text("level = 2\nsot = 1.25\nrecovery_delay = 7\n# comment\n");
    EnvConfig cfg;
    cfg.apply_kv(kv);
    CHECK(cfg.level.id == 2);
    CHECK(cfg.level.alpha == 5.0);
    CHECK(cfg.level.sot == 1.25);
    CHECK(cfg.recovery_delay == 7);
}

TEST_CASE("line margin is the documented piecewise-linear shape") {
    CHECK(line_margin(0.95, 1.0) == 0.0);
    CHECK(line_margin(0.95, 10.0) == 0.0);
    CHECK(line_margin(0.0, 3.0) == 0.95);
    CHECK(line_margin(1.15, 5.0) == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(line_margin(1.05, 10.0) == doctest::Approx(-1.0).epsilon(1e-12));
    // continuity at the breakpoint
    CHECK(std::abs(line_margin(0.95 - 1e-9, 7.0) - line_margin(0.95 + 1e-9, 7.0)) < 1e-7);
    // slope -1 below, -alpha above
    CHECK(line_margin(0.4, 9.0) - line_margin(0.5, 9.0) == doctest::Approx(0.1));
    CHECK(line_margin(1.2, 9.0) - line_margin(1.3, 9.0) == doctest::Approx(0.9));
}

TEST_CASE("reward function values") {
    Eigen::VectorXd rho = Eigen::VectorXd::Constant(20, 0.5);
    CHECK(reward_fn(rho, false, 1.0) == doctest::Approx(9.0).epsilon(1e-12));
    CHECK(reward_fn(rho, true, 1.0) == -100.0);
    Eigen::VectorXd mixed = Eigen::VectorXd::Constant(20, 0.95);
    mixed[4] = 1.05;
    CHECK(reward_fn(mixed, false, 10.0) == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("reward is bounded by the all-zero-loading value") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 2.0);
    for (int trial = 0; trial < 200; ++trial) {
        Eigen::VectorXd rho(20);
        for (int i = 0; i < 20; ++i) rho[i] = u(rng);
        CHECK(reward_fn(rho, false, 5.0) <= 0.95 * 20 + 1e-12);
    }
    CHECK(reward_fn(Eigen::VectorXd::Zero(20), false, 5.0) == doctest::Approx(0.95 * 20));
    Eigen::VectorXd nearly = Eigen::VectorXd::Zero(20);
    nearly[0] = 1e-6;
    CHECK(reward_fn(nearly, false, 5.0) < 0.95 * 20);
}

TEST_CASE("reset solves the nominal snapshot") {
    const GridSpec& g = ref_grid();
    const Chronics ch = chronics_from_scales(g, {1.0, 1.0, 1.0});
    Environment env(g, ch, level_config(3));
    const Eigen::VectorXd obs = env.reset();
    CHECK(env.state().terminal == TerminalCause::none);
    CHECK(env.state().last_solution.rho.maxCoeff() < 1.0);
    CHECK(obs.size() == observation_size(g));
}

TEST_CASE("length-one chronics are a valid, already-finished scenario") {
    const GridSpec& g = ref_grid();
    const Chronics ch = chronics_from_scales(g, {1.0});
    Environment env(g, ch, level_config(3));
    env.reset();
    CHECK(env.done());
    CHECK(env.state().terminal == TerminalCause::end_of_scenario);
    CHECK(env.successful_steps() == 1);
    CHECK_THROWS_AS(env.step(Action::noop()), std::logic_error);
}

TEST_CASE("mismatched chronics are a setup error") {
    const GridSpec& g = ref_grid();
    const Chronics small = chronics_from_scales(four_sub_grid(), {1.0});
    CHECK_THROWS_AS(Environment(g, small, level_config(3)), SetupError);
}

TEST_CASE("soft overload disconnects on the third consecutive step at level 3") {
    const GridSpec& g = ref_grid();
    const double hot_scale = find_scale_for_max_rho(1.05, 1.3);
    std::vector<double> scales(10, hot_scale);
    scales[0] = 1.0;
    const Chronics ch = chronics_from_scales(g, scales);

    Environment env(g, ch, level_config(3));
    env.reset();
    // step 1: counter 1, step 2: counter 2 -- still in service
    env.step(Action::noop());
    CHECK(env.state().topo.line_status[0] == 1);
    CHECK(env.state().overload_counter[0] == 1);
    env.step(Action::noop());
    CHECK(env.state().topo.line_status[0] == 1);
    CHECK(env.state().overload_counter[0] == 2);
    const StepResult third = env.step(Action::noop());
    CHECK(env.state().topo.line_status[0] == 0);
    CHECK(third.info.col_tripped == std::vector<int>{0});
    // the corridor loss overloads the parallel path; the episode collapses
    // within a few steps
    int extra = 0;
    while (!env.done() && extra < 10) {
        env.step(Action::noop());
        ++extra;
    }
    CHECK(env.done());
    CHECK((env.state().terminal == TerminalCause::islanded ||
           env.state().terminal == TerminalCause::diverged));
}

TEST_CASE("hard overload disconnects immediately within the step") {
    const GridSpec& g = ref_grid();
    const double big = find_scale_for_max_rho(1.55, 1.95);
    const Chronics ch = chronics_from_scales(g, {1.0, big, big});
    Environment env(g, ch, level_config(3));
    env.reset();
    const StepResult res = env.step(Action::noop());
    CHECK(res.info.hot_rounds >= 1);
    REQUIRE(!res.info.hot_tripped.empty());
    CHECK(res.info.hot_tripped.front() == 0);
    CHECK(env.state().topo.line_status[0] == 0);
}

TEST_CASE("level 1 never disconnects and keeps rewarding, negatively when overloaded") {
    const GridSpec& g = ref_grid();
    const double hot_scale = find_scale_for_max_rho(1.05, 1.3);
    // heavy tail pushes the whole system far past its ratings
    std::vector<double> scales = {1.0, hot_scale, hot_scale, hot_scale, 2.4, 2.4};
    const Chronics ch = chronics_from_scales(g, scales);

    Environment env(g, ch, level_config(1));
    env.reset();
    double min_reward = 1e300;
    while (!env.done()) {
        const StepResult r = env.step(Action::noop());
        CHECK(r.info.hot_tripped.empty());
        CHECK(r.info.col_tripped.empty());
        min_reward = std::min(min_reward, r.reward);
    }
    CHECK(env.state().terminal == TerminalCause::end_of_scenario);
    for (int l = 0; l < g.num_lines(); ++l) CHECK(env.state().topo.line_status[l] == 1);
    CHECK(min_reward < 0.0);  // the overloaded steps price in the risk
}

TEST_CASE("overload-disconnected lines reconnect after the recovery delay") {
    const GridSpec& g = ref_grid();
    const double hot_scale = find_scale_for_max_rho(1.05, 1.3);
    std::vector<double> scales(30, 0.7);
    scales[1] = scales[2] = scales[3] = hot_scale;  // trip at t=3
    const Chronics ch = chronics_from_scales(g, scales);
    EnvConfig cfg = level_config(3);
    cfg.recovery_delay = 10;
    Environment env(g, ch, cfg);
    env.reset();
    for (int t = 1; t <= 3; ++t) env.step(Action::noop());
    REQUIRE(env.state().topo.line_status[0] == 0);
    int reconnect_t = -1;
    while (!env.done() && env.state().t < 25) {
        const StepResult r = env.step(Action::noop());
        if (!r.info.reconnected.empty()) {
            reconnect_t = env.state().t;
            break;
        }
    }
    CHECK(reconnect_t == 13);  // out for exactly recovery_delay steps
    CHECK(env.state().topo.line_status[0] == 1);
}

TEST_CASE("illegal actions degrade to NoOp with a flag") {
    const GridSpec& g = ref_grid();
    const Chronics ch = chronics_from_scales(g, std::vector<double>(12, 0.9));
    EnvConfig cfg = level_config(3);
    cfg.sub_cooldown = 3;
    Environment env(g, ch, cfg);
    env.reset();
    const Action split = Action::split(9, canonicalize({1, 2, 2}));
    const StepResult first = env.step(split);
    CHECK_FALSE(first.info.illegal_action);
    CHECK(env.state().sub_cooldown[9] == 3);
    const TopologyState before = env.state().topo;
    const StepResult second = env.step(Action::split(9, canonicalize({1, 1, 2})));
    CHECK(second.info.illegal_action);
    CHECK(env.state().topo == before);  // acted as NoOp
    env.step(Action::noop());
    env.step(Action::noop());
    CHECK(env.state().sub_cooldown[9] == 0);
    const StepResult fourth = env.step(Action::split(9, canonicalize({1, 1, 2})));
    CHECK_FALSE(fourth.info.illegal_action);
}

TEST_CASE("an isolating split terminates the episode as islanded") {
    const GridSpec& g = ref_grid();
    const Chronics ch = chronics_from_scales(g, std::vector<double>(5, 0.9));
    Environment env(g, ch, level_config(3));
    env.reset();
    // sub 7 roster: line end, generator, load; parking gen+load alone on
    // busbar 2 cuts them off
    const StepResult res = env.step(Action::split(7, {1, 2, 2}));
    CHECK(res.terminal == TerminalCause::islanded);
    CHECK(res.reward == -100.0);
    CHECK(env.successful_steps() == 1);
}

TEST_CASE("overload counters match a run-length oracle on the bookkeeping loadings") {
    const GridSpec& g = ref_grid();
    // no enforcement interferes: custom soft threshold with huge limits
    EnvConfig cfg = level_config(2);
    cfg.level.sot = 0.9;
    cfg.level.col = 1e9;
    cfg.level.hot = 1e9;
    const Chronics ch = generate_chronics(g, 400, 77, ChronicsProfile::reference(1.4));
    Environment env(g, ch, cfg);
    env.reset();
    std::vector<long> run(g.num_lines(), 0);
    while (!env.done()) {
        const StepResult r = env.step(Action::noop());
        if (env.state().terminal != TerminalCause::none &&
            env.state().terminal != TerminalCause::end_of_scenario)
            break;
        for (int l = 0; l < g.num_lines(); ++l) {
            const double book =
                env.state().topo.line_status[l] ? env.state().last_solution.rho[l] : 0.0;
            run[l] = book > cfg.level.sot ? run[l] + 1 : 0;
            CHECK(env.state().overload_counter[l] == run[l]);
        }
    }
}

TEST_CASE("hard-overload cascade terminates within the line-count bound") {
    const GridSpec& g = ref_grid();
    const Chronics ch = chronics_from_scales(g, {1.0, 2.6});
    Environment env(g, ch, level_config(3));
    env.reset();
    const StepResult r = env.step(Action::noop());
    CHECK(r.info.hot_rounds <= g.num_lines());
    CHECK(env.done());
}

TEST_CASE("observation blocks encode as documented") {
    const GridSpec& g = ref_grid();
    CHECK(observation_size(g) == 5 * 20 + 3 * 5 + 3 * 11 + 14);  // 162 entries

    const Chronics ch = chronics_from_scales(g, {1.0, 1.0});
    Environment env(g, ch, level_config(3));
    Eigen::VectorXd obs = env.reset();
    const int L = g.num_lines();
    // nominal topology: all busbar flags zero, all statuses one
    for (int i = 0; i < 2 * L + g.num_gens() + g.num_loads(); ++i) CHECK(obs[i] == 0.0);
    for (int i = 0; i < L; ++i) CHECK(obs[2 * L + 16 + i] == 1.0);
    // rho block mirrors the solution
    for (int i = 0; i < L; ++i)
        CHECK(obs[3 * L + 16 + i] == env.state().last_solution.rho[i]);
}

TEST_CASE("observations stay within the scaled range over a stressed week") {
    const GridSpec& g = ref_grid();
    const Chronics ch = generate_chronics(g, 2016, 123, ChronicsProfile::reference(1.5));
    Environment env(g, ch, level_config(1));
    Eigen::VectorXd obs = env.reset();
    long checked = 0;
    while (!env.done()) {
        CHECK(obs.cwiseAbs().maxCoeff() <= 10.0);
        obs = env.step(Action::noop()).obs;
        ++checked;
    }
    CHECK(checked == 2015);
    CHECK(env.state().terminal == TerminalCause::end_of_scenario);
}

TEST_CASE("chronics generation is deterministic and forecasts are exact at zero noise") {
    const GridSpec& g = ref_grid();
    const Chronics a = generate_chronics(g, 600, 9, ChronicsProfile::reference(1.2));
    const Chronics b = generate_chronics(g, 600, 9, ChronicsProfile::reference(1.2));
    CHECK(a.load_p == b.load_p);
    CHECK(a.gen_p == b.gen_p);
    CHECK(a.load_p_fc == b.load_p_fc);
    const Chronics c = generate_chronics(g, 600, 10, ChronicsProfile::reference(1.2));
    CHECK(a.load_p != c.load_p);

    for (int t = 0; t + 1 < a.length(); ++t) {
        CHECK(a.load_p_fc.row(t) == a.load_p.row(t + 1));
        CHECK(a.gen_p_fc.row(t) == a.gen_p.row(t + 1));
    }

    ChronicsProfile noisy = ChronicsProfile::reference(1.2);
    noisy.forecast_noise = 0.01;
    const Chronics d = generate_chronics(g, 100, 9, noisy);
    CHECK(d.load_p_fc.row(0) != d.load_p.row(1));
}

TEST_CASE("the stress profile overloads the gate somewhere in the week") {
    const GridSpec& g = ref_grid();
    const Chronics ch = generate_chronics(g, 2016, 2024, ChronicsProfile::reference(1.3));
    Environment env(g, ch, level_config(1));
    env.reset();
    double worst = env.max_rho();
    while (!env.done()) {
        env.step(Action::noop());
        worst = std::max(worst, env.max_rho());
    }
    CHECK(worst > 0.8);
}

TEST_CASE("chronics CSV round trip") {
    const GridSpec& g = ref_grid();
    const Chronics a = generate_chronics(g, 50, 4, ChronicsProfile::reference(1.1));
    const std::string dir = "/tmp/gridtopo_test_chronics";
    a.save_dir(dir, g);
    const Chronics b = Chronics::load_dir(dir, g);
    CHECK(a.load_p == b.load_p);
    CHECK(a.load_q == b.load_q);
    CHECK(a.gen_p == b.gen_p);
    CHECK(a.gen_v == b.gen_v);
    CHECK(a.load_p_fc == b.load_p_fc);
}

TEST_CASE("enforcement levels order terminal times on a fixed action sequence") {
    const GridSpec& g = ref_grid();
    const Chronics ch = generate_chronics(g, 800, 31, ChronicsProfile::reference(1.6));
    long steps_by_level[4] = {0, 0, 0, 0};
    for (int level = 1; level <= 3; ++level) {
        Environment env(g, ch, level_config(level));
        env.reset();
        while (!env.done()) env.step(Action::noop());  // open-loop NoOp replay
        steps_by_level[level] = env.successful_steps();
    }
    CHECK(steps_by_level[1] >= steps_by_level[2]);
    CHECK(steps_by_level[2] >= steps_by_level[3]);
    CHECK(steps_by_level[3] < 800);  // the stress profile must bite at level 3
}

TEST_CASE("full-length episodes collect the largest return on a benign scenario") {
    const GridSpec& g = ref_grid();
    const Chronics ch = chronics_from_scales(g, std::vector<double>(40, 0.9));
    Environment good(g, ch, level_config(3));
    good.reset();
    double return_good = 0.0;
    while (!good.done()) return_good += good.step(Action::noop()).reward;
    CHECK(good.state().terminal == TerminalCause::end_of_scenario);

    Environment bad(g, ch, level_config(3));
    bad.reset();
    double return_bad = 0.0;
    return_bad += bad.step(Action::noop()).reward;
    return_bad += bad.step(Action::split(7, {1, 2, 2})).reward;  // islands immediately
    CHECK(bad.done());
    CHECK(return_bad < return_good);
}

}  // TEST_SUITE
