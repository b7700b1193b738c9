#include "gridtopo/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <thread>

#include "gridtopo/config.hpp"

namespace gridtopo {

namespace fs = std::filesystem;

void TrainConfig::apply_kv(const std::map<std::string, std::string>& kv) {
    auto get = [&](const char* key) -> const std::string* {
        auto it = kv.find(key);
        return it == kv.end() ? nullptr : &it->second;
    };
    if (const auto* v = get("num_workers")) num_workers = std::stoi(*v);
    if (const auto* v = get("total_episodes")) total_episodes = std::stol(*v);
    if (const auto* v = get("steps_needed")) steps_needed = std::stoi(*v);
    if (const auto* v = get("scenarios_needed")) scenarios_needed = std::stoi(*v);
    if (const auto* v = get("log_window")) log_window = std::stoi(*v);
    if (const auto* v = get("checkpoint_every")) checkpoint_every = std::stol(*v);
    if (const auto* v = get("seed")) seed = std::stoull(*v);
    if (const auto* v = get("gamma")) hyper.gamma = std::stod(*v);
    if (const auto* v = get("lr_actor")) hyper.lr_actor = std::stod(*v);
    if (const auto* v = get("lr_critic")) hyper.lr_critic = std::stod(*v);
    if (const auto* v = get("entropy_coeff")) hyper.entropy_coeff = std::stod(*v);
    if (const auto* v = get("rollout_len")) hyper.rollout_len = std::stoi(*v);
    if (const auto* v = get("clip_norm")) hyper.clip_norm = std::stod(*v);
    if (const auto* v = get("gate_decisions")) gate_decisions = (*v == "1" || *v == "true");
    if (const auto* v = get("gate_threshold")) gate_threshold = std::stod(*v);
    if (const auto* v = get("sample_actions")) sample_actions = (*v == "1" || *v == "true");
    env.apply_kv(kv);
}

TrainConfig TrainConfig::from_file(const std::string& path) {
    TrainConfig cfg;
    cfg.apply_kv(parse_kv_file(path));
    return cfg;
}

double TrainLog::median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

void TrainLog::save_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw TrainingError("cannot write train log " + path);
    out << "episode,scenario,level,steps,reward,actor_loss,critic_loss,rolling_median\n";
    out.precision(12);
    for (const auto& r : rows)
        out << r.episode << ',' << r.scenario << ',' << r.level << ',' << r.steps << ','
            << r.reward << ',' << r.actor_loss << ',' << r.critic_loss << ','
            << r.rolling_median << "\n";
}

ParameterStore::ParameterStore(NetworkParams initial, TrainHyper hyper)
    : params_(std::move(initial)), rms_(RmsPropState::zeros_like(params_)), hyper_(hyper) {}

NetworkParams ParameterStore::fetch() const {
    std::lock_guard lock(mu_);
    return params_;
}

long ParameterStore::fetch_counter() const {
    std::lock_guard lock(mu_);
    return counter_;
}

long ParameterStore::submit(const Gradients& grads) {
    std::lock_guard lock(mu_);
    apply_update(params_, rms_, grads, hyper_.lr_actor, hyper_.lr_critic);
    return ++counter_;
}

CurriculumScheduler::CurriculumScheduler(TrainMode mode, int steps_needed, int scenarios_needed)
    : mode_(mode),
      steps_needed_(steps_needed),
      scenarios_needed_(scenarios_needed),
      level_(mode == TrainMode::baseline ? 3 : 1) {}

int CurriculumScheduler::level() const {
    std::lock_guard lock(mu_);
    return level_;
}

bool CurriculumScheduler::check_locked() const {
    int good = 0;
    for (const auto& [sid, steps] : latest_steps_)
        if (steps > steps_needed_) ++good;
    return good >= scenarios_needed_;
}

bool CurriculumScheduler::on_episode(int scenario, long steps) {
    std::lock_guard lock(mu_);
    ++episodes_seen_;
    if (mode_ == TrainMode::baseline || level_ >= 3) return false;
    latest_steps_[scenario] = steps;
    if (!check_locked()) return false;
    ++level_;
    latest_steps_.clear();  // results from the easier level do not carry over
    transitions_.push_back(episodes_seen_);
    return true;
}

std::vector<long> CurriculumScheduler::transitions() const {
    std::lock_guard lock(mu_);
    return transitions_;
}

void CurriculumScheduler::note_episode_count(long) {}

namespace {

struct SharedLog {
    std::mutex mu;
    TrainLog log;
    int window = 15;

    // returns the appended record's episode index
    long append(EpisodeRecord r) {
        std::lock_guard lock(mu);
        r.episode = static_cast<long>(log.rows.size());
        std::vector<double> recent;
        const size_t n = log.rows.size();
        const size_t take = std::min<size_t>(window - 1, n);
        for (size_t i = n - take; i < n; ++i)
            recent.push_back(static_cast<double>(log.rows[i].steps));
        recent.push_back(static_cast<double>(r.steps));
        r.rolling_median = TrainLog::median(std::move(recent));
        log.rows.push_back(r);
        return r.episode;
    }
};

}  // namespace

TrainResult train(const GridSpec& grid, const ActionCatalog& catalog,
                  const std::vector<Chronics>& scenarios, const TrainConfig& config,
                  TrainMode mode, const std::string& out_dir) {
    if (scenarios.empty()) throw TrainingError("scenario pool is empty");
    if (config.num_workers < 1) throw TrainingError("need at least one worker");

    const int P = static_cast<int>(scenarios.size());
    const int W = config.num_workers;
    const std::string ghash = grid_hash(grid);
    const std::string chash = catalog_hash(catalog);

    NetworkParams initial =
        NetworkParams::init(observation_size(grid), catalog.size(), config.seed);
    ParameterStore store(std::move(initial), config.hyper);
    CurriculumScheduler sched(mode, config.steps_needed, config.scenarios_needed);
    SharedLog shared;
    shared.window = config.log_window;
    std::atomic<long> tickets{0};
    std::mutex ckpt_mu;
    std::vector<std::string> checkpoints;

    if (!out_dir.empty()) fs::create_directories(out_dir);

    auto save_ckpt = [&](const std::string& name) {
        if (out_dir.empty()) return;
        const std::string path = (fs::path(out_dir) / name).string();
        save_checkpoint(path, store.fetch(), ghash, chash);
        std::lock_guard lock(ckpt_mu);
        checkpoints.push_back(path);
    };

    auto worker = [&](int wid) {
        std::mt19937_64 rng(config.seed * 0x9e3779b97f4a7c15ull + wid + 1);
        // fixed scenario shard per worker, order reshuffled each pass
        std::vector<int> shard;
        if (P >= W) {
            for (int i = wid; i < P; i += W) shard.push_back(i);
        } else {
            shard.push_back(wid % P);
        }
        size_t shard_pos = 0;
        std::shuffle(shard.begin(), shard.end(), rng);

        while (true) {
            const long ticket = tickets.fetch_add(1);
            if (ticket >= config.total_episodes) break;
            if (shard_pos >= shard.size()) {
                shard_pos = 0;
                std::shuffle(shard.begin(), shard.end(), rng);
            }
            const int sid = shard[shard_pos++];
            const int level = sched.level();

            EnvConfig env_cfg = config.env;
            env_cfg.level = CurriculumLevel::preset(level);
            Environment env(grid, scenarios[sid], env_cfg);

            EpisodeRecord rec;
            rec.scenario = sid;
            rec.level = level;

            Eigen::VectorXd obs;
            try {
                obs = env.reset();
            } catch (const SetupError&) {
                shared.append(rec);  // scenario rejected; recorded with zero steps
                continue;
            }

            NetworkParams snap = store.fetch();
            Trajectory traj;
            traj.scenario = sid;
            std::vector<Eigen::VectorXd> dec_obs;
            double total_reward = 0.0;
            bool dropped_update = false;

            auto flush = [&](bool at_terminal, const Eigen::VectorXd& next_obs) {
                if (!dec_obs.empty()) {
                    traj.decision_obs.resize(dec_obs[0].size(), dec_obs.size());
                    for (size_t i = 0; i < dec_obs.size(); ++i)
                        traj.decision_obs.col(i) = dec_obs[i];
                    traj.terminal = at_terminal;
                    traj.bootstrap = at_terminal ? 0.0 : forward(snap, next_obs).value;
                    try {
                        GradBatch batch = batch_from_trajectory(traj, config.hyper.gamma);
                        Gradients grads = compute_gradients(snap, batch, config.hyper);
                        rec.actor_loss = grads.actor_loss;
                        rec.critic_loss = grads.critic_loss;
                        store.submit(grads);
                    } catch (const TrainingError&) {
                        dropped_update = true;  // non-finite gradients are discarded
                    }
                }
                traj = Trajectory{};
                traj.scenario = sid;
                dec_obs.clear();
                if (!at_terminal) snap = store.fetch();
            };

            while (!env.done()) {
                const bool gated =
                    !config.gate_decisions || env.max_rho() > config.gate_threshold;
                Action a = Action::noop();
                if (gated) {
                    ForwardResult fw = forward(snap, obs);
                    const int ai = select_action(
                        fw.probs, config.sample_actions ? SelectMode::sample : SelectMode::argmax,
                        &rng);
                    a = catalog.actions[ai];
                    traj.decision_steps.push_back(static_cast<int>(traj.rewards.size()));
                    traj.decision_actions.push_back(ai);
                    dec_obs.push_back(obs);
                }
                StepResult sr = env.step(a);
                traj.rewards.push_back(sr.reward);
                total_reward += sr.reward;
                obs = sr.obs;
                if (config.hyper.rollout_len > 0 && !env.done() &&
                    static_cast<int>(traj.rewards.size()) >= config.hyper.rollout_len)
                    flush(false, obs);
            }
            flush(true, obs);
            (void)dropped_update;

            rec.steps = env.successful_steps();
            rec.reward = total_reward;
            const long ep_index = shared.append(rec);

            if (mode == TrainMode::curriculum && sched.on_episode(sid, rec.steps))
                save_ckpt("checkpoint_level" + std::to_string(sched.level()) + "_transition.json");
            if (config.checkpoint_every > 0 && (ep_index + 1) % config.checkpoint_every == 0)
                save_ckpt("checkpoint_ep" + std::to_string(ep_index + 1) + ".json");
        }
    };

    if (W == 1) {
        worker(0);  // synchronous degenerate case, fully reproducible
    } else {
        std::vector<std::thread> threads;
        threads.reserve(W);
        for (int w = 0; w < W; ++w) threads.emplace_back(worker, w);
        for (auto& t : threads) t.join();
    }

    TrainResult result;
    result.log = std::move(shared.log);
    result.final_params = store.fetch();
    result.level_transitions = sched.transitions();
    save_ckpt("checkpoint_final.json");
    result.checkpoints = checkpoints;
    if (!out_dir.empty()) result.log.save_csv((fs::path(out_dir) / "trainlog.csv").string());
    return result;
}

}  // namespace gridtopo
