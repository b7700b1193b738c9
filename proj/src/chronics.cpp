#include "gridtopo/chronics.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

namespace gridtopo {

namespace fs = std::filesystem;

bool Chronics::matches(const GridSpec& grid) const {
    const int T = length();
    auto ok = [T](const Eigen::MatrixXd& m, int cols) {
        return m.rows() == T && m.cols() == cols;
    };
    return T >= 1 && ok(load_p, grid.num_loads()) && ok(load_q, grid.num_loads()) &&
           ok(gen_p, grid.num_gens()) && ok(gen_v, grid.num_gens()) &&
           ok(load_p_fc, grid.num_loads()) && ok(load_q_fc, grid.num_loads()) &&
           ok(gen_p_fc, grid.num_gens()) && ok(gen_v_fc, grid.num_gens());
}

Injections Chronics::injections_at(int t) const {
    Injections inj;
    inj.load_p = load_p.row(t);
    inj.load_q = load_q.row(t);
    inj.gen_p = gen_p.row(t);
    inj.gen_v = gen_v.row(t);
    return inj;
}

Injections Chronics::forecast_at(int t) const {
    Injections inj;
    inj.load_p = load_p_fc.row(t);
    inj.load_q = load_q_fc.row(t);
    inj.gen_p = gen_p_fc.row(t);
    inj.gen_v = gen_v_fc.row(t);
    return inj;
}

static void write_csv(const fs::path& path, const Eigen::MatrixXd& m, const std::string& prefix) {
    std::ofstream out(path);
    if (!out) throw StructuralError("cannot write " + path.string());
    for (int c = 0; c < m.cols(); ++c) out << (c ? "," : "") << prefix << c;
    out << "\n";
    out.precision(17);
    for (int r = 0; r < m.rows(); ++r) {
        for (int c = 0; c < m.cols(); ++c) out << (c ? "," : "") << m(r, c);
        out << "\n";
    }
}

static Eigen::MatrixXd read_csv(const fs::path& path, int expect_cols) {
    std::ifstream in(path);
    if (!in) throw StructuralError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw StructuralError("empty chronics file " + path.string());
    int header_cols = line.empty() ? 0 : 1;
    for (char c : line)
        if (c == ',') ++header_cols;
    if (header_cols != expect_cols)
        throw StructuralError(path.string() + ": expected " + std::to_string(expect_cols) +
                              " columns, found " + std::to_string(header_cols));
    std::vector<double> values;
    int rows = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        int cols = 0;
        while (std::getline(ss, cell, ',')) {
            values.push_back(std::stod(cell));
            ++cols;
        }
        if (cols != expect_cols)
            throw StructuralError(path.string() + ": ragged row " + std::to_string(rows + 1));
        ++rows;
    }
    Eigen::MatrixXd m(rows, expect_cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < expect_cols; ++c) m(r, c) = values[r * expect_cols + c];
    return m;
}

Chronics Chronics::load_dir(const std::string& dir, const GridSpec& grid) {
    const fs::path d(dir);
    Chronics ch;
    const int Ld = grid.num_loads(), G = grid.num_gens();
    ch.load_p = read_csv(d / "loads_p.csv", Ld);
    ch.load_q = read_csv(d / "loads_q.csv", Ld);
    ch.gen_p = read_csv(d / "gens_p.csv", G);
    ch.gen_v = read_csv(d / "gens_v.csv", G);
    ch.load_p_fc = read_csv(d / "loads_p_forecast.csv", Ld);
    ch.load_q_fc = read_csv(d / "loads_q_forecast.csv", Ld);
    ch.gen_p_fc = read_csv(d / "gens_p_forecast.csv", G);
    ch.gen_v_fc = read_csv(d / "gens_v_forecast.csv", G);
    if (!ch.matches(grid)) throw StructuralError("chronics in " + dir + " do not match grid");
    return ch;
}

void Chronics::save_dir(const std::string& dir, const GridSpec& grid) const {
    if (!matches(grid)) throw StructuralError("chronics do not match grid");
    const fs::path d(dir);
    fs::create_directories(d);
    write_csv(d / "loads_p.csv", load_p, "load_");
    write_csv(d / "loads_q.csv", load_q, "load_");
    write_csv(d / "gens_p.csv", gen_p, "gen_");
    write_csv(d / "gens_v.csv", gen_v, "gen_");
    write_csv(d / "loads_p_forecast.csv", load_p_fc, "load_");
    write_csv(d / "loads_q_forecast.csv", load_q_fc, "load_");
    write_csv(d / "gens_p_forecast.csv", gen_p_fc, "gen_");
    write_csv(d / "gens_v_forecast.csv", gen_v_fc, "gen_");
}

ChronicsProfile ChronicsProfile::reference(double peak_scale) {
    ChronicsProfile p;
    p.base_load_p = reference_base_load_p();
    p.peak_scale = peak_scale;
    return p;
}

Eigen::VectorXd dispatch_generation(const GridSpec& grid, double total_load_p,
                                    double loss_margin) {
    double pmax_all = 0.0;
    for (const auto& g : grid.generators) pmax_all += g.p_max;
    Eigen::VectorXd gp(grid.num_gens());
    for (int gi = 0; gi < grid.num_gens(); ++gi)
        gp[gi] = std::min(grid.generators[gi].p_max,
                          total_load_p * loss_margin * grid.generators[gi].p_max / pmax_all);
    return gp;
}

Chronics generate_chronics(const GridSpec& grid, int T, uint64_t seed,
                           const ChronicsProfile& profile) {
    if (T < 1) throw StructuralError("scenario length must be >= 1");
    const int Ld = grid.num_loads(), G = grid.num_gens();
    std::vector<double> base = profile.base_load_p;
    if (base.empty()) base.assign(Ld, 0.2);
    if (static_cast<int>(base.size()) != Ld)
        throw StructuralError("base_load_p length does not match grid loads");
    const double tanphi =
        std::sqrt(1.0 - profile.power_factor * profile.power_factor) / profile.power_factor;

    Chronics ch;
    ch.load_p.resize(T, Ld);
    ch.load_q.resize(T, Ld);
    ch.gen_p.resize(T, G);
    ch.gen_v.resize(T, G);

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> norm(0.0, 1.0);
    double ar_sys = 0.0;
    std::vector<double> jitter(Ld, 0.0);
    const double two_pi = 2.0 * M_PI;
    const double mid = 0.5 * (profile.daily_min + profile.daily_max);
    const double amp = 0.5 * (profile.daily_max - profile.daily_min);
    const int spd = std::max(1, profile.steps_per_day);

    for (int t = 0; t < T; ++t) {
        ar_sys = profile.ar_rho * ar_sys + profile.ar_sigma * norm(rng);
        ar_sys = std::clamp(ar_sys, -profile.ar_clip, profile.ar_clip);
        const double frac = static_cast<double>(t % spd) / spd;
        const double daily = mid + amp * std::sin(two_pi * frac - M_PI / 2.0);
        const int day = (t / spd) % static_cast<int>(profile.week_envelope.size());
        const double envelope = profile.week_envelope[day];
        double total = 0.0;
        for (int d = 0; d < Ld; ++d) {
            jitter[d] = profile.ar_rho * jitter[d] + profile.jitter_sigma * norm(rng);
            jitter[d] = std::clamp(jitter[d], -profile.jitter_clip, profile.jitter_clip);
            double lambda =
                profile.peak_scale * envelope * daily * (1.0 + ar_sys + jitter[d]);
            lambda = std::max(0.05, lambda);
            ch.load_p(t, d) = base[d] * lambda;
            ch.load_q(t, d) = ch.load_p(t, d) * tanphi;
            total += ch.load_p(t, d);
        }
        ch.gen_p.row(t) = dispatch_generation(grid, total, profile.loss_margin);
        for (int gi = 0; gi < G; ++gi) ch.gen_v(t, gi) = grid.generators[gi].v_set;
    }

    auto make_fc = [&](const Eigen::MatrixXd& truth) {
        Eigen::MatrixXd fc(T, truth.cols());
        for (int t = 0; t < T; ++t) {
            const int src = std::min(t + 1, T - 1);
            fc.row(t) = truth.row(src);
            if (profile.forecast_noise > 0.0)
                for (int c = 0; c < truth.cols(); ++c)
                    fc(t, c) += profile.forecast_noise * norm(rng);
        }
        return fc;
    };
    ch.load_p_fc = make_fc(ch.load_p);
    ch.load_q_fc = make_fc(ch.load_q);
    ch.gen_p_fc = make_fc(ch.gen_p);
    ch.gen_v_fc = make_fc(ch.gen_v);
    return ch;
}

}  // namespace gridtopo
