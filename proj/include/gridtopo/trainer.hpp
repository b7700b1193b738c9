#pragma once

#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "gridtopo/action_space.hpp"
#include "gridtopo/agent.hpp"
#include "gridtopo/environment.hpp"

namespace gridtopo {

enum class TrainMode { baseline, curriculum };

struct TrainConfig {
    int num_workers = 8;          // desk scale; the reference setup used 50
    long total_episodes = 2000;   // desk scale; the reference setup used 30000
    int steps_needed = 1000;      // curriculum gate: successful steps per scenario
    int scenarios_needed = 25;    // curriculum gate: distinct scenarios
    int log_window = 15;          // rolling median window
    long checkpoint_every = 500;  // episodes; 0 disables periodic checkpoints
    uint64_t seed = 1;
    TrainHyper hyper;
    EnvConfig env;  // level is driven by the scheduler / mode
    bool gate_decisions = true;   // query the policy only when some rho > gate
    double gate_threshold = 0.8;
    bool sample_actions = true;   // sample during training, argmax otherwise

    void apply_kv(const std::map<std::string, std::string>& kv);
    static TrainConfig from_file(const std::string& path);
};

struct EpisodeRecord {
    long episode = 0;  // completion order
    int scenario = 0;
    int level = 0;
    long steps = 0;
    double reward = 0.0;
    double actor_loss = 0.0;
    double critic_loss = 0.0;
    double rolling_median = 0.0;  // over the last log_window step counts
};

struct TrainLog {
    std::vector<EpisodeRecord> rows;

    void save_csv(const std::string& path) const;
    static double median(std::vector<double> v);
};

// Shared parameter storage. submit() serializes updates; fetch() returns a
// consistent snapshot that may lag behind concurrent submits.
class ParameterStore {
public:
    ParameterStore(NetworkParams initial, TrainHyper hyper);

    NetworkParams fetch() const;
    long fetch_counter() const;
    // Applies one update; returns the new update counter.
    long submit(const Gradients& grads);

private:
    mutable std::mutex mu_;
    NetworkParams params_;
    RmsPropState rms_;
    TrainHyper hyper_;
    long counter_ = 0;
};

// Table-driven level scheduler: advances when, among the most recent episode
// per distinct scenario since the last transition, at least scenarios_needed
// scenarios exceeded steps_needed successful steps. Never passes level 3.
class CurriculumScheduler {
public:
    CurriculumScheduler(TrainMode mode, int steps_needed, int scenarios_needed);

    int level() const;
    // Records an episode result; returns true when this call advanced the level.
    bool on_episode(int scenario, long steps);
    std::vector<long> transitions() const;  // episode counts at each advance
    void note_episode_count(long episodes_done);

private:
    bool check_locked() const;

    mutable std::mutex mu_;
    TrainMode mode_;
    int steps_needed_;
    int scenarios_needed_;
    int level_;
    long episodes_seen_ = 0;
    std::map<int, long> latest_steps_;  // per scenario since last transition
    std::vector<long> transitions_;
};

struct TrainResult {
    TrainLog log;
    NetworkParams final_params;
    std::vector<long> level_transitions;
    std::vector<std::string> checkpoints;
};

// Asynchronous multi-worker training over a scenario pool. Workers own
// private environments, fetch parameter snapshots, run one episode, and
// submit gradients. baseline mode pins level 3; curriculum mode starts at
// level 1 and advances via the scheduler. out_dir may be empty to skip
// checkpoint files.
TrainResult train(const GridSpec& grid, const ActionCatalog& catalog,
                  const std::vector<Chronics>& scenarios, const TrainConfig& config,
                  TrainMode mode, const std::string& out_dir = {});

}  // namespace gridtopo
