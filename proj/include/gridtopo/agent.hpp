#pragma once

#include <Eigen/Dense>
#include <random>
#include <string>
#include <vector>

namespace gridtopo {

class TrainingError : public std::runtime_error {
public:
    explicit TrainingError(const std::string& what) : std::runtime_error(what) {}
};

// Actor-critic network: one shared rectifier layer (input -> 200), then a
// 50-unit rectifier hidden layer per head. Actor ends in softmax over the
// action catalog, critic in a scalar linear unit.
struct NetworkParams {
    Eigen::MatrixXd w_shared;   // 200 x input
    Eigen::VectorXd b_shared;   // 200
    Eigen::MatrixXd w_actor1;   // 50 x 200
    Eigen::VectorXd b_actor1;   // 50
    Eigen::MatrixXd w_actor2;   // actions x 50
    Eigen::VectorXd b_actor2;   // actions
    Eigen::MatrixXd w_critic1;  // 50 x 200
    Eigen::VectorXd b_critic1;  // 50
    Eigen::MatrixXd w_critic2;  // 1 x 50
    Eigen::VectorXd b_critic2;  // 1

    int input_size() const { return static_cast<int>(w_shared.cols()); }
    int num_actions() const { return static_cast<int>(w_actor2.rows()); }

    // Orthogonal-style scaled init, deterministic for a seed.
    static NetworkParams init(int input, int actions, uint64_t seed, int shared_width = 200,
                              int head_width = 50);
    static NetworkParams zeros_like(const NetworkParams& p);

    // Applies f to every parameter block, paired with `other`'s block.
    template <typename F>
    void for_each(NetworkParams& other, F&& f) {
        f(w_shared, other.w_shared);
        f(b_shared, other.b_shared);
        f(w_actor1, other.w_actor1);
        f(b_actor1, other.b_actor1);
        f(w_actor2, other.w_actor2);
        f(b_actor2, other.b_actor2);
        f(w_critic1, other.w_critic1);
        f(b_critic1, other.b_critic1);
        f(w_critic2, other.w_critic2);
        f(b_critic2, other.b_critic2);
    }
};

struct ForwardResult {
    Eigen::VectorXd probs;
    double value = 0.0;
};

ForwardResult forward(const NetworkParams& p, const Eigen::VectorXd& obs);

enum class SelectMode { sample, argmax };

// argmax breaks ties toward the lowest index; sample is reproducible for a
// seeded generator.
int select_action(const Eigen::VectorXd& probs, SelectMode mode, std::mt19937_64* rng = nullptr);

// Q_t = r_t + gamma * Q_{t+1}, with the bootstrap value standing in for
// Q_{T}. Pass bootstrap 0 at true terminals.
Eigen::VectorXd discounted_returns(const Eigen::VectorXd& rewards, double gamma,
                                   double bootstrap);

struct TrainHyper {
    double gamma = 0.95;
    double lr_actor = 0.0005;
    double lr_critic = 0.001;
    double entropy_coeff = 0.01;
    int rollout_len = 0;  // 0 = full-episode Monte-Carlo returns
    double clip_norm = 5.0;
};

struct GradBatch {
    Eigen::MatrixXd obs;           // one column per decision
    std::vector<int> actions;      // chosen catalog index per decision
    Eigen::VectorXd returns;       // Q per decision
};

struct Gradients {
    NetworkParams g;  // same shapes as the parameters
    double actor_loss = 0.0;
    double critic_loss = 0.0;
    double entropy = 0.0;
    double grad_norm = 0.0;  // global norm before clipping
};

// Analytic gradients of
//   actor loss  = -sum_i [ log pi(a_i|s_i) * (Q_i - V(s_i)) + entropy_coeff * H(pi(.|s_i)) ]
//   critic loss =  sum_i (Q_i - V(s_i))^2
// with the advantage treated as a constant in the actor term. The shared
// layer accumulates both heads. Global-norm clipping at hyper.clip_norm.
// Throws TrainingError on non-finite loss.
Gradients compute_gradients(const NetworkParams& p, const GradBatch& batch,
                            const TrainHyper& hyper);

// Root-mean-square propagation accumulator state.
struct RmsPropState {
    NetworkParams s;
    double decay = 0.99;
    double epsilon = 1e-8;

    static RmsPropState zeros_like(const NetworkParams& p);
};

// Per-parameter adaptive step. lr_actor drives the actor branch, lr_critic
// the critic branch, and their mean the shared layer.
void apply_update(NetworkParams& p, RmsPropState& rms, const Gradients& grads, double lr_actor,
                  double lr_critic);

// One trajectory of environment transitions for return computation. Decision
// steps (where the policy was queried) are a subset of reward steps when
// gating is active.
struct Trajectory {
    std::vector<double> rewards;         // one per environment step
    std::vector<int> decision_steps;     // indices into rewards
    std::vector<int> decision_actions;   // catalog index per decision
    Eigen::MatrixXd decision_obs;        // column per decision
    int scenario = 0;
    bool terminal = true;                // false only for truncated rollouts
    double bootstrap = 0.0;
};

// Builds the gradient batch for a trajectory: full-sequence discounted
// returns evaluated at the decision steps.
GradBatch batch_from_trajectory(const Trajectory& traj, double gamma);

// Versioned JSON checkpoint; refuses to load when the catalog hash differs.
void save_checkpoint(const std::string& path, const NetworkParams& p,
                     const std::string& grid_hash, const std::string& catalog_hash);
NetworkParams load_checkpoint(const std::string& path, const std::string& expect_catalog_hash,
                              std::string* grid_hash_out = nullptr);

}  // namespace gridtopo
