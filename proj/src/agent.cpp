#include "gridtopo/agent.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace gridtopo {

using nlohmann::json;

namespace {

// Orthogonal rows/columns from the QR of a seeded Gaussian matrix, scaled by
// `gain`.
Eigen::MatrixXd orthogonal_init(int rows, int cols, double gain, std::mt19937_64& rng) {
    std::normal_distribution<double> norm(0.0, 1.0);
    const int big = std::max(rows, cols);
    Eigen::MatrixXd a(big, big);
    for (int i = 0; i < big; ++i)
        for (int j = 0; j < big; ++j) a(i, j) = norm(rng);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
    Eigen::MatrixXd q = qr.householderQ();
    // fix the sign convention so the result is deterministic across BLAS paths
    Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int j = 0; j < big; ++j)
        if (r(j, j) < 0) q.col(j) *= -1.0;
    return gain * q.topLeftCorner(rows, cols);
}

}  // namespace

NetworkParams NetworkParams::init(int input, int actions, uint64_t seed, int shared_width,
                                  int head_width) {
    std::mt19937_64 rng(seed);
    NetworkParams p;
    const double relu_gain = std::sqrt(2.0);
    p.w_shared = orthogonal_init(shared_width, input, relu_gain, rng);
    p.b_shared = Eigen::VectorXd::Zero(shared_width);
    p.w_actor1 = orthogonal_init(head_width, shared_width, relu_gain, rng);
    p.b_actor1 = Eigen::VectorXd::Zero(head_width);
    p.w_actor2 = orthogonal_init(actions, head_width, 0.01, rng);  // near-uniform initial policy
    p.b_actor2 = Eigen::VectorXd::Zero(actions);
    p.w_critic1 = orthogonal_init(head_width, shared_width, relu_gain, rng);
    p.b_critic1 = Eigen::VectorXd::Zero(head_width);
    p.w_critic2 = orthogonal_init(1, head_width, 1.0, rng);
    p.b_critic2 = Eigen::VectorXd::Zero(1);
    return p;
}

NetworkParams NetworkParams::zeros_like(const NetworkParams& src) {
    NetworkParams p;
    p.w_shared = Eigen::MatrixXd::Zero(src.w_shared.rows(), src.w_shared.cols());
    p.b_shared = Eigen::VectorXd::Zero(src.b_shared.size());
    p.w_actor1 = Eigen::MatrixXd::Zero(src.w_actor1.rows(), src.w_actor1.cols());
    p.b_actor1 = Eigen::VectorXd::Zero(src.b_actor1.size());
    p.w_actor2 = Eigen::MatrixXd::Zero(src.w_actor2.rows(), src.w_actor2.cols());
    p.b_actor2 = Eigen::VectorXd::Zero(src.b_actor2.size());
    p.w_critic1 = Eigen::MatrixXd::Zero(src.w_critic1.rows(), src.w_critic1.cols());
    p.b_critic1 = Eigen::VectorXd::Zero(src.b_critic1.size());
    p.w_critic2 = Eigen::MatrixXd::Zero(src.w_critic2.rows(), src.w_critic2.cols());
    p.b_critic2 = Eigen::VectorXd::Zero(src.b_critic2.size());
    return p;
}

namespace {

struct Activations {
    Eigen::VectorXd shared_pre, shared;   // 200
    Eigen::VectorXd actor1_pre, actor1;   // 50
    Eigen::VectorXd logits, probs;        // actions
    Eigen::VectorXd critic1_pre, critic1; // 50
    double value = 0.0;
};

Activations run_forward(const NetworkParams& p, const Eigen::VectorXd& obs) {
    Activations a;
    a.shared_pre = p.w_shared * obs + p.b_shared;
    a.shared = a.shared_pre.cwiseMax(0.0);
    a.actor1_pre = p.w_actor1 * a.shared + p.b_actor1;
    a.actor1 = a.actor1_pre.cwiseMax(0.0);
    a.logits = p.w_actor2 * a.actor1 + p.b_actor2;
    const double zmax = a.logits.maxCoeff();
    a.probs = (a.logits.array() - zmax).exp().matrix();
    a.probs /= a.probs.sum();
    a.critic1_pre = p.w_critic1 * a.shared + p.b_critic1;
    a.critic1 = a.critic1_pre.cwiseMax(0.0);
    a.value = (p.w_critic2 * a.critic1 + p.b_critic2)(0);
    return a;
}

}  // namespace

ForwardResult forward(const NetworkParams& p, const Eigen::VectorXd& obs) {
    if (obs.size() != p.input_size())
        throw TrainingError("observation length " + std::to_string(obs.size()) +
                            " does not match network input " + std::to_string(p.input_size()));
    Activations a = run_forward(p, obs);
    return {std::move(a.probs), a.value};
}

int select_action(const Eigen::VectorXd& probs, SelectMode mode, std::mt19937_64* rng) {
    if (mode == SelectMode::argmax) {
        int best = 0;
        for (int i = 1; i < probs.size(); ++i)
            if (probs[i] > probs[best]) best = i;
        return best;
    }
    if (!rng) throw TrainingError("sample mode needs a generator");
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    double u = uni(*rng);
    double acc = 0.0;
    for (int i = 0; i < probs.size(); ++i) {
        acc += probs[i];
        if (u < acc) return i;
    }
    return static_cast<int>(probs.size()) - 1;
}

Eigen::VectorXd discounted_returns(const Eigen::VectorXd& rewards, double gamma,
                                   double bootstrap) {
    const int T = static_cast<int>(rewards.size());
    if (T == 0) throw TrainingError("empty reward sequence");
    Eigen::VectorXd q(T);
    double acc = bootstrap;
    for (int t = T - 1; t >= 0; --t) {
        acc = rewards[t] + gamma * acc;
        q[t] = acc;
    }
    return q;
}

GradBatch batch_from_trajectory(const Trajectory& traj, double gamma) {
    if (traj.rewards.empty()) throw TrainingError("empty trajectory");
    Eigen::VectorXd r(traj.rewards.size());
    for (size_t i = 0; i < traj.rewards.size(); ++i) r[i] = traj.rewards[i];
    const Eigen::VectorXd q = discounted_returns(r, gamma, traj.terminal ? 0.0 : traj.bootstrap);
    GradBatch b;
    b.obs = traj.decision_obs;
    b.actions = traj.decision_actions;
    b.returns.resize(traj.decision_steps.size());
    for (size_t i = 0; i < traj.decision_steps.size(); ++i)
        b.returns[i] = q[traj.decision_steps[i]];
    return b;
}

Gradients compute_gradients(const NetworkParams& p, const GradBatch& batch,
                            const TrainHyper& hyper) {
    const int n = static_cast<int>(batch.actions.size());
    if (n == 0 || batch.obs.cols() != n || batch.returns.size() != n)
        throw TrainingError("gradient batch is empty or inconsistently sized");

    Gradients out;
    out.g = NetworkParams::zeros_like(p);

    for (int i = 0; i < n; ++i) {
        const Eigen::VectorXd obs = batch.obs.col(i);
        const Activations a = run_forward(p, obs);
        const int act = batch.actions[i];
        if (act < 0 || act >= p.num_actions()) throw TrainingError("action index out of range");

        const double q = batch.returns[i];
        const double adv = q - a.value;  // constant in the actor term
        const double logp = std::log(std::max(a.probs[act], 1e-300));
        double entropy = 0.0;
        for (int k = 0; k < a.probs.size(); ++k)
            if (a.probs[k] > 0.0) entropy -= a.probs[k] * std::log(a.probs[k]);
        out.actor_loss += -logp * adv - hyper.entropy_coeff * entropy;
        out.critic_loss += adv * adv;
        out.entropy += entropy;

        // actor head: d(actor loss)/d(logits)
        Eigen::VectorXd dlogits = adv * a.probs;
        dlogits[act] -= adv;
        if (hyper.entropy_coeff != 0.0)
            for (int k = 0; k < a.probs.size(); ++k)
                if (a.probs[k] > 0.0)
                    dlogits[k] += hyper.entropy_coeff * a.probs[k] * (std::log(a.probs[k]) + entropy);

        out.g.w_actor2.noalias() += dlogits * a.actor1.transpose();
        out.g.b_actor2 += dlogits;
        Eigen::VectorXd dactor1 = p.w_actor2.transpose() * dlogits;
        for (int k = 0; k < dactor1.size(); ++k)
            if (a.actor1_pre[k] <= 0.0) dactor1[k] = 0.0;
        out.g.w_actor1.noalias() += dactor1 * a.shared.transpose();
        out.g.b_actor1 += dactor1;

        // critic head: d/dV of (q - V)^2 = -2 (q - V)
        const double dvalue = -2.0 * adv;
        out.g.w_critic2.noalias() += dvalue * a.critic1.transpose();
        out.g.b_critic2[0] += dvalue;
        Eigen::VectorXd dcritic1 = p.w_critic2.transpose() * dvalue;
        for (int k = 0; k < dcritic1.size(); ++k)
            if (a.critic1_pre[k] <= 0.0) dcritic1[k] = 0.0;
        out.g.w_critic1.noalias() += dcritic1 * a.shared.transpose();
        out.g.b_critic1 += dcritic1;

        // shared layer collects both paths
        Eigen::VectorXd dshared =
            p.w_actor1.transpose() * dactor1 + p.w_critic1.transpose() * dcritic1;
        for (int k = 0; k < dshared.size(); ++k)
            if (a.shared_pre[k] <= 0.0) dshared[k] = 0.0;
        out.g.w_shared.noalias() += dshared * obs.transpose();
        out.g.b_shared += dshared;
    }

    if (!std::isfinite(out.actor_loss) || !std::isfinite(out.critic_loss))
        throw TrainingError("non-finite loss; actor=" + std::to_string(out.actor_loss) +
                            " critic=" + std::to_string(out.critic_loss));

    double sq = 0.0;
    out.g.for_each(out.g, [&](auto& m, auto&) { sq += m.squaredNorm(); });
    out.grad_norm = std::sqrt(sq);
    if (hyper.clip_norm > 0.0 && out.grad_norm > hyper.clip_norm) {
        const double scale = hyper.clip_norm / out.grad_norm;
        out.g.for_each(out.g, [&](auto& m, auto&) { m *= scale; });
    }
    return out;
}

RmsPropState RmsPropState::zeros_like(const NetworkParams& p) {
    RmsPropState st;
    st.s = NetworkParams::zeros_like(p);
    return st;
}

void apply_update(NetworkParams& p, RmsPropState& rms, const Gradients& grads, double lr_actor,
                  double lr_critic) {
    const double lr_shared = 0.5 * (lr_actor + lr_critic);
    auto step = [&](Eigen::MatrixXd& param, Eigen::MatrixXd& acc, const Eigen::MatrixXd& g,
                    double lr) {
        if (param.rows() != g.rows() || param.cols() != g.cols())
            throw TrainingError("gradient shape does not match parameters");
        acc = rms.decay * acc + (1.0 - rms.decay) * g.cwiseProduct(g);
        param.array() -= lr * g.array() / (acc.array().sqrt() + rms.epsilon);
    };
    auto stepv = [&](Eigen::VectorXd& param, Eigen::VectorXd& acc, const Eigen::VectorXd& g,
                     double lr) {
        if (param.size() != g.size()) throw TrainingError("gradient shape does not match parameters");
        acc = rms.decay * acc + (1.0 - rms.decay) * g.cwiseProduct(g);
        param.array() -= lr * g.array() / (acc.array().sqrt() + rms.epsilon);
    };
    step(p.w_shared, rms.s.w_shared, grads.g.w_shared, lr_shared);
    stepv(p.b_shared, rms.s.b_shared, grads.g.b_shared, lr_shared);
    step(p.w_actor1, rms.s.w_actor1, grads.g.w_actor1, lr_actor);
    stepv(p.b_actor1, rms.s.b_actor1, grads.g.b_actor1, lr_actor);
    step(p.w_actor2, rms.s.w_actor2, grads.g.w_actor2, lr_actor);
    stepv(p.b_actor2, rms.s.b_actor2, grads.g.b_actor2, lr_actor);
    step(p.w_critic1, rms.s.w_critic1, grads.g.w_critic1, lr_critic);
    stepv(p.b_critic1, rms.s.b_critic1, grads.g.b_critic1, lr_critic);
    step(p.w_critic2, rms.s.w_critic2, grads.g.w_critic2, lr_critic);
    stepv(p.b_critic2, rms.s.b_critic2, grads.g.b_critic2, lr_critic);
}

namespace {

json mat_to_json(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (int r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

Eigen::MatrixXd mat_from_json(const json& rows) {
    const int nr = static_cast<int>(rows.size());
    const int nc = nr ? static_cast<int>(rows[0].size()) : 0;
    Eigen::MatrixXd m(nr, nc);
    for (int r = 0; r < nr; ++r)
        for (int c = 0; c < nc; ++c) m(r, c) = rows[r][c].get<double>();
    return m;
}

json vec_to_json(const Eigen::VectorXd& v) {
    return json(std::vector<double>(v.begin(), v.end()));
}

Eigen::VectorXd vec_from_json(const json& arr) {
    Eigen::VectorXd v(arr.size());
    for (size_t i = 0; i < arr.size(); ++i) v[i] = arr[i].get<double>();
    return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const NetworkParams& p,
                     const std::string& grid_hash, const std::string& catalog_hash) {
    json j;
    j["format"] = "gridtopo-checkpoint";
    j["version"] = 1;
    j["grid_hash"] = grid_hash;
    j["catalog_hash"] = catalog_hash;
    j["input"] = p.input_size();
    j["actions"] = p.num_actions();
    j["w_shared"] = mat_to_json(p.w_shared);
    j["b_shared"] = vec_to_json(p.b_shared);
    j["w_actor1"] = mat_to_json(p.w_actor1);
    j["b_actor1"] = vec_to_json(p.b_actor1);
    j["w_actor2"] = mat_to_json(p.w_actor2);
    j["b_actor2"] = vec_to_json(p.b_actor2);
    j["w_critic1"] = mat_to_json(p.w_critic1);
    j["b_critic1"] = vec_to_json(p.b_critic1);
    j["w_critic2"] = mat_to_json(p.w_critic2);
    j["b_critic2"] = vec_to_json(p.b_critic2);
    std::ofstream out(path);
    if (!out) throw TrainingError("cannot write checkpoint " + path);
    out << j.dump();
}

NetworkParams load_checkpoint(const std::string& path, const std::string& expect_catalog_hash,
                              std::string* grid_hash_out) {
    std::ifstream in(path);
    if (!in) throw TrainingError("cannot open checkpoint " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw TrainingError(std::string("bad checkpoint: ") + e.what());
    }
    if (j.value("format", std::string()) != "gridtopo-checkpoint")
        throw TrainingError("not a checkpoint file: " + path);
    const std::string hash = j.value("catalog_hash", std::string());
    if (!expect_catalog_hash.empty() && hash != expect_catalog_hash)
        throw TrainingError("checkpoint catalog hash " + hash + " does not match expected " +
                            expect_catalog_hash);
    if (grid_hash_out) *grid_hash_out = j.value("grid_hash", std::string());
    NetworkParams p;
    p.w_shared = mat_from_json(j.at("w_shared"));
    p.b_shared = vec_from_json(j.at("b_shared"));
    p.w_actor1 = mat_from_json(j.at("w_actor1"));
    p.b_actor1 = vec_from_json(j.at("b_actor1"));
    p.w_actor2 = mat_from_json(j.at("w_actor2"));
    p.b_actor2 = vec_from_json(j.at("b_actor2"));
    p.w_critic1 = mat_from_json(j.at("w_critic1"));
    p.b_critic1 = vec_from_json(j.at("b_critic1"));
    p.w_critic2 = mat_from_json(j.at("w_critic2"));
    p.b_critic2 = vec_from_json(j.at("b_critic2"));
    return p;
}

}  // namespace gridtopo
