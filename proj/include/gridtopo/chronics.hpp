#pragma once

#include <Eigen/Dense>
#include <string>

#include "gridtopo/grid_model.hpp"
#include "gridtopo/power_flow.hpp"

namespace gridtopo {

// Time-indexed injection profiles for one scenario plus one-step-ahead
// forecasts. Row t of a *_forecast matrix is the prediction, made at t, of
// the corresponding quantity at t+1; the last row repeats itself.
struct Chronics {
    Eigen::MatrixXd load_p, load_q;  // T x num_loads
    Eigen::MatrixXd gen_p, gen_v;    // T x num_gens
    Eigen::MatrixXd load_p_fc, load_q_fc, gen_p_fc, gen_v_fc;

    int length() const { return static_cast<int>(load_p.rows()); }
    bool matches(const GridSpec& grid) const;

    Injections injections_at(int t) const;
    Injections forecast_at(int t) const;  // forecast made at t for t+1

    // loads_p.csv, loads_q.csv, gens_p.csv, gens_v.csv and *_forecast.csv
    // siblings; header row carries element ids, one row per step.
    static Chronics load_dir(const std::string& dir, const GridSpec& grid);
    void save_dir(const std::string& dir, const GridSpec& grid) const;
};

// Synthetic scenario shape: daily sinusoid inside a weekly envelope with
// autoregressive system and per-load noise. peak_scale 1.0 keeps the
// reference grid below the 0.8 loading gate; around 1.5 it produces
// mid-week overloads on the congested corridor.
struct ChronicsProfile {
    std::vector<double> base_load_p;  // per load; empty = 0.2 each
    double power_factor = 0.95;      // lagging, fixes Q from P
    double peak_scale = 1.0;
    double daily_min = 0.55;
    double daily_max = 0.88;
    std::vector<double> week_envelope = {0.82, 0.90, 0.97, 1.00, 0.97, 0.85, 0.78};
    int steps_per_day = 288;  // 5-minute steps
    double ar_rho = 0.9;
    double ar_sigma = 0.03;
    double ar_clip = 0.08;
    double jitter_sigma = 0.02;
    double jitter_clip = 0.06;
    double loss_margin = 1.03;
    double forecast_noise = 0.0;  // absolute p.u. sigma added to forecasts

    static ChronicsProfile reference(double peak_scale = 1.0);
};

// Deterministic for a fixed seed.
Chronics generate_chronics(const GridSpec& grid, int T, uint64_t seed,
                           const ChronicsProfile& profile = {});

// Generation dispatch shared by the generator and the reference snapshot:
// every machine takes total_load_p * loss_margin * p_max / sum(p_max),
// capped at p_max. The slack entry is a planned value only.
Eigen::VectorXd dispatch_generation(const GridSpec& grid, double total_load_p,
                                    double loss_margin);

}  // namespace gridtopo
