#include "gridtopo/power_flow.hpp"

#include <cmath>
#include <complex>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace gridtopo {

using nlohmann::json;
using cplx = std::complex<double>;

std::string Injections::to_json_string(int indent) const {
    json j;
    j["load_p"] = std::vector<double>(load_p.begin(), load_p.end());
    j["load_q"] = std::vector<double>(load_q.begin(), load_q.end());
    j["gen_p"] = std::vector<double>(gen_p.begin(), gen_p.end());
    j["gen_v"] = std::vector<double>(gen_v.begin(), gen_v.end());
    return j.dump(indent);
}

static Eigen::VectorXd to_vec(const json& arr) {
    Eigen::VectorXd v(arr.size());
    for (size_t i = 0; i < arr.size(); ++i) v[i] = arr[i].get<double>();
    return v;
}

Injections Injections::from_json_string(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
        Injections inj;
        inj.load_p = to_vec(j.at("load_p"));
        inj.load_q = to_vec(j.at("load_q"));
        inj.gen_p = to_vec(j.at("gen_p"));
        inj.gen_v = to_vec(j.at("gen_v"));
        return inj;
    } catch (const json::exception& e) {
        throw StructuralError(std::string("bad injections document: ") + e.what());
    }
}

Injections Injections::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw StructuralError("cannot open injections file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json_string(ss.str());
}

std::string PFSolution::to_json_string(int indent) const {
    json j;
    j["converged"] = converged;
    j["iterations"] = iterations;
    j["max_mismatch"] = max_mismatch;
    j["slack_p"] = slack_p;
    j["node_v_mag"] = std::vector<double>(node_v_mag.begin(), node_v_mag.end());
    j["node_v_angle"] = std::vector<double>(node_v_angle.begin(), node_v_angle.end());
    j["line_current"] = std::vector<double>(line_current.begin(), line_current.end());
    j["rho"] = std::vector<double>(rho.begin(), rho.end());
    return j.dump(indent);
}

PFSolution map_warm_start(const NodalGraph& prev_graph, const PFSolution& prev,
                          const NodalGraph& new_graph) {
    PFSolution out;
    const int n = new_graph.num_nodes();
    out.node_v_mag = Eigen::VectorXd::Ones(n);
    out.node_v_angle = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < n; ++i) {
        const NodeKey& key = new_graph.nodes[i];
        int p = prev_graph.node_of(key.sub, key.busbar);
        if (p >= 0 && prev.node_v_mag[p] > 0.0) {
            out.node_v_mag[i] = prev.node_v_mag[p];
            out.node_v_angle[i] = prev.node_v_angle[p];
        }
    }
    return out;
}

namespace {

struct NodeSpec {
    enum Type { pq, pv, slack } type = pq;
    double p = 0.0;    // specified injection
    double q = 0.0;
    double v_set = 1.0;
};

}  // namespace

PFSolution solve_ac(const GridSpec& grid, const NodalGraph& g, const Injections& inj,
                    const PFOptions& opt, const PFSolution* warm_start) {
    if (!inj.matches(grid)) throw StructuralError("injection dimensions do not match grid");
    if (check_islanding(grid, g) == IslandCheck::islanded)
        throw StructuralError("cannot solve power flow with islanded load or generator");

    const int n = g.num_nodes();
    const int L = grid.num_lines();
    const auto comp = connected_components(g);
    const int slack_node = g.gen_node[grid.slack_gen];
    const int slack_comp = comp[slack_node];

    // energized nodes = slack component, in graph order
    std::vector<int> live;  // graph node -> dense index, -1 for de-energized
    live.assign(n, -1);
    std::vector<int> node_at;  // dense index -> graph node
    for (int i = 0; i < n; ++i)
        if (comp[i] == slack_comp) {
            live[i] = static_cast<int>(node_at.size());
            node_at.push_back(i);
        }
    const int m = static_cast<int>(node_at.size());

    std::vector<NodeSpec> spec(m);
    for (int gi = 0; gi < grid.num_gens(); ++gi) {
        int d = live[g.gen_node[gi]];
        if (d < 0) continue;  // unreachable: islanding check passed
        spec[d].p += inj.gen_p[gi];
        if (spec[d].type == NodeSpec::pq) {
            spec[d].type = NodeSpec::pv;
            spec[d].v_set = inj.gen_v[gi];
        }
    }
    {
        int d = live[slack_node];
        spec[d].type = NodeSpec::slack;
        spec[d].v_set = inj.gen_v[grid.slack_gen];
        spec[d].p -= inj.gen_p[grid.slack_gen];  // planned slack output is not specified
    }
    for (int ld = 0; ld < grid.num_loads(); ++ld) {
        int d = live[g.load_node[ld]];
        spec[d].p -= inj.load_p[ld];
        spec[d].q -= inj.load_q[ld];
    }

    // admittance matrix over live nodes
    Eigen::MatrixXcd Y = Eigen::MatrixXcd::Zero(m, m);
    for (int l = 0; l < L; ++l) {
        if (g.line_node_from[l] < 0) continue;
        int i = live[g.line_node_from[l]];
        int j = live[g.line_node_to[l]];
        if (i < 0 || j < 0) continue;  // line in a de-energized component
        const LineSpec& ln = grid.lines[l];
        cplx ys = 1.0 / cplx(ln.r, ln.x);
        cplx sh(0.0, ln.b / 2.0);
        Y(i, i) += ys + sh;
        Y(j, j) += ys + sh;
        Y(i, j) -= ys;
        Y(j, i) -= ys;
    }

    // unknown ordering: angles for all non-slack live nodes, then V for PQ
    std::vector<int> ang_nodes, v_nodes;
    for (int d = 0; d < m; ++d) {
        if (spec[d].type == NodeSpec::slack) continue;
        ang_nodes.push_back(d);
        if (spec[d].type == NodeSpec::pq) v_nodes.push_back(d);
    }
    const int na = static_cast<int>(ang_nodes.size());
    const int nv = static_cast<int>(v_nodes.size());

    Eigen::VectorXd V = Eigen::VectorXd::Ones(m);
    Eigen::VectorXd th = Eigen::VectorXd::Zero(m);
    for (int d = 0; d < m; ++d)
        if (spec[d].type != NodeSpec::pq) V[d] = spec[d].v_set;
    if (warm_start) {
        if (warm_start->node_v_mag.size() != n)
            throw StructuralError("warm start sized to a different graph");
        for (int d = 0; d < m; ++d) {
            double wv = warm_start->node_v_mag[node_at[d]];
            if (wv > 0.0) {
                if (spec[d].type == NodeSpec::pq) V[d] = wv;
                th[d] = warm_start->node_v_angle[node_at[d]];
            }
        }
        const int sd = live[slack_node];
        th.array() -= th[sd];  // slack pins the angle reference
    }

    PFSolution out;
    out.node_v_mag = Eigen::VectorXd::Zero(n);
    out.node_v_angle = Eigen::VectorXd::Zero(n);
    out.line_current = Eigen::VectorXd::Zero(L);
    out.rho = Eigen::VectorXd::Zero(L);

    Eigen::VectorXd Pc(m), Qc(m);
    auto compute_pq = [&]() {
        for (int i = 0; i < m; ++i) {
            double p = 0.0, q = 0.0;
            for (int j = 0; j < m; ++j) {
                const double gij = Y(i, j).real(), bij = Y(i, j).imag();
                if (gij == 0.0 && bij == 0.0) continue;
                const double tij = th[i] - th[j];
                const double c = std::cos(tij), s = std::sin(tij);
                p += V[j] * (gij * c + bij * s);
                q += V[j] * (gij * s - bij * c);
            }
            Pc[i] = V[i] * p;
            Qc[i] = V[i] * q;
        }
    };

    bool converged = false;
    bool singular = false;
    int it = 0;
    double worst = 0.0;
    Eigen::VectorXd mis(na + nv);
    for (;; ++it) {
        compute_pq();
        for (int a = 0; a < na; ++a) mis[a] = spec[ang_nodes[a]].p - Pc[ang_nodes[a]];
        for (int b = 0; b < nv; ++b) mis[na + b] = spec[v_nodes[b]].q - Qc[v_nodes[b]];
        worst = (na + nv) ? mis.cwiseAbs().maxCoeff() : 0.0;
        if (!std::isfinite(worst)) break;
        if (worst < opt.tol) {
            converged = true;
            break;
        }
        if (it >= opt.max_iter) break;

        Eigen::MatrixXd J = Eigen::MatrixXd::Zero(na + nv, na + nv);
        for (int a = 0; a < na; ++a) {
            const int i = ang_nodes[a];
            for (int b = 0; b < na; ++b) {
                const int j = ang_nodes[b];
                if (i == j) {
                    J(a, b) = -Qc[i] - Y(i, i).imag() * V[i] * V[i];
                } else {
                    const double tij = th[i] - th[j];
                    J(a, b) = V[i] * V[j] *
                              (Y(i, j).real() * std::sin(tij) - Y(i, j).imag() * std::cos(tij));
                }
            }
            for (int b = 0; b < nv; ++b) {
                const int j = v_nodes[b];
                if (i == j) {
                    J(a, na + b) = Pc[i] / V[i] + Y(i, i).real() * V[i];
                } else {
                    const double tij = th[i] - th[j];
                    J(a, na + b) = V[i] * (Y(i, j).real() * std::cos(tij) +
                                           Y(i, j).imag() * std::sin(tij));
                }
            }
        }
        for (int a = 0; a < nv; ++a) {
            const int i = v_nodes[a];
            for (int b = 0; b < na; ++b) {
                const int j = ang_nodes[b];
                if (i == j) {
                    J(na + a, b) = Pc[i] - Y(i, i).real() * V[i] * V[i];
                } else {
                    const double tij = th[i] - th[j];
                    J(na + a, b) = -V[i] * V[j] * (Y(i, j).real() * std::cos(tij) +
                                                   Y(i, j).imag() * std::sin(tij));
                }
            }
            for (int b = 0; b < nv; ++b) {
                const int j = v_nodes[b];
                if (i == j) {
                    J(na + a, na + b) = Qc[i] / V[i] - Y(i, i).imag() * V[i];
                } else {
                    const double tij = th[i] - th[j];
                    J(na + a, na + b) = V[i] * (Y(i, j).real() * std::sin(tij) -
                                                Y(i, j).imag() * std::cos(tij));
                }
            }
        }
        Eigen::PartialPivLU<Eigen::MatrixXd> lu(J);
        Eigen::VectorXd dx = lu.solve(mis);
        if (!dx.allFinite()) {
            singular = true;
            break;
        }
        for (int a = 0; a < na; ++a) th[ang_nodes[a]] += dx[a];
        for (int b = 0; b < nv; ++b) V[v_nodes[b]] += dx[na + b];
        bool bad = false;
        for (int b = 0; b < nv; ++b)
            if (V[v_nodes[b]] <= 1e-4 || V[v_nodes[b]] > 4.0) bad = true;
        if (bad) break;  // iterate left the physical region; report divergence
    }

    out.iterations = it;
    out.max_mismatch = worst;
    out.converged = converged && !singular;
    if (!out.converged) return out;

    for (int d = 0; d < m; ++d) {
        out.node_v_mag[node_at[d]] = V[d];
        out.node_v_angle[node_at[d]] = th[d];
    }
    for (int l = 0; l < L; ++l) {
        if (g.line_node_from[l] < 0) continue;
        int i = live[g.line_node_from[l]];
        int j = live[g.line_node_to[l]];
        if (i < 0 || j < 0) continue;  // de-energized line stays at current 0
        const LineSpec& ln = grid.lines[l];
        const cplx ys = 1.0 / cplx(ln.r, ln.x);
        const cplx sh(0.0, ln.b / 2.0);
        const cplx vi = std::polar(V[i], th[i]);
        const cplx vj = std::polar(V[j], th[j]);
        const double If = std::abs(ys * (vi - vj) + sh * vi);
        const double It = std::abs(ys * (vj - vi) + sh * vj);
        out.line_current[l] = std::max(If, It);
        out.rho[l] = out.line_current[l] / ln.i_max;
    }
    // slack output: computed injection plus local load, minus other machines there
    {
        const int sd = live[slack_node];
        double p = Pc[sd];
        for (int ld = 0; ld < grid.num_loads(); ++ld)
            if (g.load_node[ld] == slack_node) p += inj.load_p[ld];
        for (int gi = 0; gi < grid.num_gens(); ++gi)
            if (gi != grid.slack_gen && g.gen_node[gi] == slack_node) p -= inj.gen_p[gi];
        out.slack_p = p;
    }
    return out;
}

Injections reference_nominal_injections(const GridSpec& grid) {
    const auto base = reference_base_load_p();
    if (grid.num_loads() != static_cast<int>(base.size()))
        throw StructuralError("reference snapshot requires the reference grid");
    Injections inj;
    const int G = grid.num_gens(), Ld = grid.num_loads();
    inj.load_p.resize(Ld);
    inj.load_q.resize(Ld);
    const double tanphi = std::sqrt(1.0 - 0.95 * 0.95) / 0.95;
    double total = 0.0;
    for (int d = 0; d < Ld; ++d) {
        inj.load_p[d] = base[d];
        inj.load_q[d] = base[d] * tanphi;
        total += base[d];
    }
    double pmax_all = 0.0;
    for (const auto& g : grid.generators) pmax_all += g.p_max;
    inj.gen_p.resize(G);
    inj.gen_v.resize(G);
    for (int gi = 0; gi < G; ++gi) {
        inj.gen_p[gi] = std::min(grid.generators[gi].p_max,
                                 total * 1.03 * grid.generators[gi].p_max / pmax_all);
        inj.gen_v[gi] = grid.generators[gi].v_set;
    }
    return inj;
}

}  // namespace gridtopo
