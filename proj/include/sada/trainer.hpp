// Copyright (c) 2026 The sada authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "sada/archive.hpp"
#include "sada/config.hpp"
#include "sada/evalmetrics.hpp"
#include "sada/replay.hpp"

namespace sada::trainer {

using nets::AgentNets;
using recipes::TransitionBatch;

/// Behavior action: uniform in the action box before exploration_steps, then
/// sampled from the policy.
template <class Real>
std::array<double, 2> collect_action(AgentNets<Real>& nets, const envs::Observation& obs,
                                     long long step_idx, long long exploration_steps,
                                     Rng& rng) {
    if (step_idx < exploration_steps) return {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
    ad::NoGradGuard ng;
    Tensor<Real> t = obs.to_tensor<Real>();
    Tensor<Real> batch({1, t.dim(0), t.dim(1), t.dim(2)});
    batch.data = t.data;
    auto feat = nets::encode(nets.encoder, nets::Var<Real>::constant(batch), true);
    auto [action, lp] = nets::act(nets.actor, feat, nets::ActMode::sample, &rng);
    return {double(action.at(0, 0)), double(action.at(0, 1))};
}

template <class Real>
class Trainer {
  public:
    explicit Trainer(const TrainConfig& cfg)
        : cfg_(cfg),
          recipe_(recipe_config(cfg)),
          env_(env_config(cfg)),
          rngs_(cfg.seed),
          buffer_(cfg.replay_capacity, 3 * cfg.frame_stack, cfg.obs_size, kActionDim) {
        nets_ = AgentNets<Real>(net_config(cfg), rngs_.init, cfg.init_temperature);
        rebuild_optimizers();
        ctx_.nets = &nets_;
        ctx_.critic_opt = &critic_opt_;
        ctx_.actor_opt = &actor_opt_;
        ctx_.alpha_opt = &alpha_opt_;
        ctx_.rngs = &rngs_;
        ctx_.recipe = recipe_;
    }

    struct RunResult {
        long long steps = 0;
        long long episodes = 0;
        double last_episode_reward = 0;
        std::string final_checkpoint;
    };

    /// Full Algorithm-1 style loop: collect, push, scheduled critic -> actor
    /// -> temperature -> target updates, periodic evaluation + checkpoints.
    RunResult run(const std::string& out_dir) {
        namespace fs = std::filesystem;
        fs::create_directories(out_dir);
        const std::string metrics_path = out_dir + "/train.csv";
        const std::string eval_path = out_dir + "/eval.csv";
        std::ofstream metrics(metrics_path, resumed_ ? std::ios::app : std::ios::out);
        std::ofstream evalcsv(eval_path, resumed_ ? std::ios::app : std::ios::out);
        if (!metrics || !evalcsv) throw IoError("cannot open metrics files in " + out_dir);
        if (!resumed_) {
            metrics << "step,episode,episode_reward,critic_loss,actor_loss,alpha,fps\n";
            evalcsv << "step,mean_reward,std_reward,success_rate\n";
            save_state(out_dir + "/ckpt_0.sada");
        }
        metrics.flush();

        bool need_reset = true;
        envs::Observation obs;
        double episode_reward = 0;
        bool pending_eval = false;
        auto wall_prev = std::chrono::steady_clock::now();
        long long steps_at_prev = step_;

        while (step_ < cfg_.total_steps) {
            if (need_reset) {
                obs = env_.reset(rngs_.env.next_u64());
                episode_reward = 0;
                need_reset = false;
            }
            auto action =
                collect_action(nets_, obs, step_, cfg_.exploration_steps, rngs_.explore);
            auto res = env_.step(action);
            const float discount = res.done ? 0.0f : float(cfg_.gamma);
            buffer_.push(obs, {float(action[0]), float(action[1])}, float(res.reward), res.obs,
                         discount);
            episode_reward += res.reward;
            obs = res.obs;

            if (step_ >= cfg_.seed_frames &&
                (step_ - cfg_.seed_frames) % cfg_.update_frequency == 0)
                do_update();

            ++step_;
            if (step_ % cfg_.eval_interval == 0) pending_eval = true;

            if (res.done) {
                ++episode_;
                const auto now = std::chrono::steady_clock::now();
                const double secs =
                    std::chrono::duration<double>(now - wall_prev).count();
                const double fps =
                    cfg_.log_fps && secs > 0 ? double(step_ - steps_at_prev) / secs : 0.0;
                wall_prev = now;
                steps_at_prev = step_;
                char row[256];
                std::snprintf(row, sizeof row, "%lld,%lld,%.6f,%.6f,%.6f,%.6f,%.1f\n", step_,
                              episode_, episode_reward, last_critic_loss_, last_actor_loss_,
                              nets_.alpha(), fps);
                metrics << row;
                metrics.flush();
                last_episode_reward_ = episode_reward;
                need_reset = true;

                if (pending_eval) {
                    pending_eval = false;
                    Rng eval_rng(cfg_.seed ^ (0x5eedull + std::uint64_t(step_)));
                    auto stats = evalmetrics::evaluate(nets_, env_config(cfg_),
                                                       envs::DistributionSpec{}, cfg_.eval_episodes,
                                                       eval_rng);
                    char erow[160];
                    std::snprintf(erow, sizeof erow, "%lld,%.6f,%.6f,%.6f\n", step_,
                                  stats.mean_reward, stats.std_reward, stats.success_rate);
                    evalcsv << erow;
                    evalcsv.flush();
                    save_state(out_dir + "/ckpt_" + std::to_string(step_) + ".sada");
                    if (cfg_.save_buffer) save_buffer(out_dir + "/buffer_" +
                                                      std::to_string(step_) + ".sada");
                }
            }
        }
        const std::string final_ckpt = out_dir + "/ckpt_final.sada";
        save_state(final_ckpt);
        if (cfg_.save_buffer) save_buffer(out_dir + "/buffer_final.sada");
        RunResult r;
        r.steps = step_;
        r.episodes = episode_;
        r.last_episode_reward = last_episode_reward_;
        r.final_checkpoint = final_ckpt;
        return r;
    }

    long long update_count() const { return updates_; }
    long long step_count() const { return step_; }
    AgentNets<Real>& agent() { return nets_; }
    replay::ReplayBuffer& buffer() { return buffer_; }
    const TrainConfig& config() const { return cfg_; }
    RngStreams& rngs() { return rngs_; }

    /// Parameter tensors, optimizer state, temperature, counters, and rng
    /// streams. Pair with save_buffer for exact resumption mid-run.
    void save_state(const std::string& path) {
        ArchiveWriter w(path);
        const std::string cfg_text = serialize_config(cfg_);
        w.put("config", {int(cfg_text.size())},
              reinterpret_cast<const std::uint8_t*>(cfg_text.data()), cfg_text.size());
        for (auto& [name, p] : nets_.named_params())
            w.put_tensor("param." + name, p->value());
        save_opt(w, "opt.critic.", critic_opt_);
        save_opt(w, "opt.actor.", actor_opt_);
        save_opt(w, "opt.alpha.", alpha_opt_);
        w.put_scalar<std::int64_t>("step", step_);
        w.put_scalar<std::int64_t>("episode", episode_);
        w.put_scalar<std::int64_t>("updates", updates_);
        const double lc = last_critic_loss_, la = last_actor_loss_;
        w.put_scalar<double>("last_critic_loss", lc);
        w.put_scalar<double>("last_actor_loss", la);
        save_rng(w, "rng.env", rngs_.env);
        save_rng(w, "rng.weak", rngs_.weak);
        save_rng(w, "rng.strong", rngs_.strong);
        save_rng(w, "rng.strong_target", rngs_.strong_target);
        save_rng(w, "rng.actor_noise", rngs_.actor_noise);
        save_rng(w, "rng.target_noise", rngs_.target_noise);
        save_rng(w, "rng.buffer", rngs_.buffer);
        save_rng(w, "rng.init", rngs_.init);
        save_rng(w, "rng.explore", rngs_.explore);
        w.save();
    }

    void save_buffer(const std::string& path) {
        ArchiveWriter w(path);
        buffer_.save(w);
        w.save();
    }

    void load_state(const std::string& path, const std::string& buffer_path = "") {
        ArchiveReader r(path);
        for (auto& [name, p] : nets_.named_params())
            p->value() = r.get_tensor<Real>("param." + name);
        load_opt(r, "opt.critic.", critic_opt_);
        load_opt(r, "opt.actor.", actor_opt_);
        load_opt(r, "opt.alpha.", alpha_opt_);
        step_ = r.get_scalar<std::int64_t>("step");
        episode_ = r.get_scalar<std::int64_t>("episode");
        updates_ = r.get_scalar<std::int64_t>("updates");
        last_critic_loss_ = r.get_scalar<double>("last_critic_loss");
        last_actor_loss_ = r.get_scalar<double>("last_actor_loss");
        load_rng(r, "rng.env", rngs_.env);
        load_rng(r, "rng.weak", rngs_.weak);
        load_rng(r, "rng.strong", rngs_.strong);
        load_rng(r, "rng.strong_target", rngs_.strong_target);
        load_rng(r, "rng.actor_noise", rngs_.actor_noise);
        load_rng(r, "rng.target_noise", rngs_.target_noise);
        load_rng(r, "rng.buffer", rngs_.buffer);
        load_rng(r, "rng.init", rngs_.init);
        load_rng(r, "rng.explore", rngs_.explore);
        if (!buffer_path.empty()) {
            ArchiveReader br(buffer_path);
            buffer_ = replay::ReplayBuffer::load(br);
        }
        resumed_ = true;
    }

  private:
    static constexpr int kActionDim = 2;

    TrainConfig cfg_;
    recipes::RecipeConfig recipe_;
    envs::PointGoalEnv env_;
    RngStreams rngs_;
    AgentNets<Real> nets_;
    replay::ReplayBuffer buffer_;
    nets::Adam<Real> critic_opt_, actor_opt_, alpha_opt_;
    recipes::UpdateContext<Real> ctx_;

    long long step_ = 0, episode_ = 0, updates_ = 0;
    double last_critic_loss_ = 0, last_actor_loss_ = 0, last_episode_reward_ = 0;
    bool resumed_ = false;

    void rebuild_optimizers() {
        std::vector<nets::Var<Real>*> critic_params, actor_params;
        for (auto& [name, p] : nets_.encoder.named_params("")) critic_params.push_back(p);
        for (auto& [name, p] : nets_.critic.named_params("")) critic_params.push_back(p);
        for (auto& [name, p] : nets_.actor.named_params("")) actor_params.push_back(p);
        critic_opt_ = nets::Adam<Real>(critic_params, cfg_.lr);
        actor_opt_ = nets::Adam<Real>(actor_params, cfg_.lr);
        alpha_opt_ = nets::Adam<Real>({&nets_.log_alpha}, cfg_.lr);
    }

    void do_update() {
        auto critic_batch = buffer_.sample<Real>(cfg_.batch_size, rngs_.buffer);
        const double closs = recipes::critic_update(ctx_, critic_batch);
        if (!std::isfinite(closs))
            throw TrainAbortError(step_, "critic_loss", rngs_.buffer.describe());
        auto actor_batch = buffer_.sample<Real>(cfg_.batch_size, rngs_.buffer);
        const double aloss = recipes::actor_update_variant(ctx_, actor_batch);
        if (!std::isfinite(aloss))
            throw TrainAbortError(step_, "actor_loss", rngs_.buffer.describe());
        nets::ema_update(nets_.target_critic, nets_.critic, cfg_.tau);
        last_critic_loss_ = closs;
        last_actor_loss_ = aloss;
        ++updates_;
    }

    void save_opt(ArchiveWriter& w, const std::string& prefix, nets::Adam<Real>& opt) {
        w.put_scalar<std::int64_t>(prefix + "t", opt.step_count());
        const auto& m = opt.moment1();
        const auto& v = opt.moment2();
        for (std::size_t i = 0; i < m.size(); ++i) {
            w.put_tensor(prefix + "m." + std::to_string(i), m[i]);
            w.put_tensor(prefix + "v." + std::to_string(i), v[i]);
        }
    }

    void load_opt(const ArchiveReader& r, const std::string& prefix, nets::Adam<Real>& opt) {
        std::vector<Tensor<Real>> m, v;
        for (std::size_t i = 0;; ++i) {
            const std::string mk = prefix + "m." + std::to_string(i);
            if (!r.has(mk)) break;
            m.push_back(r.get_tensor<Real>(mk));
            v.push_back(r.get_tensor<Real>(prefix + "v." + std::to_string(i)));
        }
        opt.restore(std::move(m), std::move(v), r.get_scalar<std::int64_t>(prefix + "t"));
    }

    static void save_rng(ArchiveWriter& w, const std::string& key, const Rng& rng) {
        auto st = rng.state();
        std::vector<std::uint64_t> words(st.begin(), st.end());
        words.push_back(rng.draw_count());
        w.put(key, {int(words.size())}, words.data(), words.size());
    }

    static void load_rng(const ArchiveReader& r, const std::string& key, Rng& rng) {
        auto t = r.get_tensor<std::uint64_t>(key);
        std::array<std::uint64_t, 4> st{t[0], t[1], t[2], t[3]};
        rng.set_state(st, t[4]);
    }
};

/// Configuration embedded in a checkpoint archive.
inline TrainConfig config_from_checkpoint(const ArchiveReader& r) {
    auto bytes = r.get_tensor<std::uint8_t>("config");
    return parse_config_text(std::string(bytes.data.begin(), bytes.data.end()));
}

/// Networks-only load (evaluation tools): rebuilds the agent from the
/// checkpoint's embedded config and parameter tensors.
template <class Real>
AgentNets<Real> load_agent(const std::string& checkpoint_path, TrainConfig* cfg_out = nullptr) {
    ArchiveReader r(checkpoint_path);
    TrainConfig cfg = config_from_checkpoint(r);
    if (cfg_out) *cfg_out = cfg;
    Rng init(cfg.seed);
    AgentNets<Real> agent(net_config(cfg), init, cfg.init_temperature);
    for (auto& [name, p] : agent.named_params())
        p->value() = r.get_tensor<Real>("param." + name);
    return agent;
}

}  // namespace sada::trainer
