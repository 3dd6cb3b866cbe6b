// Copyright (c) 2026 The sada authors
// SPDX-License-Identifier: Apache-2.0

// Oracle runner: executes each registered brute-force reference against the
// corresponding library operation and reports the maximum deviation.
//
//   oracle_suite [--filter substring]

#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "oracles/net_reference.hpp"
#include "oracles/oracles.hpp"
#include "sada/augment.hpp"
#include "sada/envs.hpp"
#include "sada/evalmetrics.hpp"
#include "sada/recipes.hpp"
#include "sada/stats.hpp"
#include "sada/trainer.hpp"

using namespace sada;

namespace {

struct OracleCase {
    std::string name;
    double tolerance;
    std::function<double()> max_deviation;
};

nets::NetConfig tiny_net_cfg() {
    nets::NetConfig c;
    c.obs_channels = 3;
    c.obs_size = 16;
    c.conv_filters = 4;
    c.features_dim = 8;
    c.hidden_dim = 16;
    c.action_dim = 2;
    return c;
}

Tensor<double> random_obs3(int channels, int size, Rng& rng) {
    Tensor<double> t({channels, size, size});
    for (auto& v : t.data) v = rng.uniform();
    return t;
}

Tensor<double> random_batch4(int n, const nets::NetConfig& c, Rng& rng) {
    Tensor<double> t({n, c.obs_channels, c.obs_size, c.obs_size});
    for (auto& v : t.data) v = rng.uniform();
    return t;
}

std::vector<OracleCase> build_cases() {
    std::vector<OracleCase> cases;

    cases.push_back({"augment.weak_shift_bookkeeping", 0.0, [] {
        Rng rng(3);
        auto obs = random_obs3(6, 8, rng);
        double dev = 0;
        for (int dx = -4; dx <= 4; ++dx)
            for (int dy = -4; dy <= 4; ++dy) {
                auto got = augment::apply_shift(obs, dx, dy, 4, augment::FillPolicy::edge);
                auto want = oracles::pad_crop_reference(obs, 4, 4 - dy, 4 - dx);
                dev = std::max(dev, double(max_abs_diff(got, want)));
            }
        return dev;
    }});

    cases.push_back({"augment.conv_golden", 1e-6, [] {
        Rng rng(13);
        auto obs = random_obs3(3, 8, rng);
        std::vector<double> kernel(9);
        Rng krng(101);
        for (auto& w : kernel) w = krng.normal() / 3.0;
        auto got = augment::apply_conv(obs, kernel);
        auto want = oracles::conv_reference(obs, kernel, 3);
        return double(max_abs_diff(got, want));
    }});

    cases.push_back({"augment.rotate90_permutation", 0.0, [] {
        Rng rng(9);
        auto obs = random_obs3(3, 16, rng);
        return double(max_abs_diff(augment::apply_rotate(obs, 90.0),
                                   oracles::rot90_reference(obs)));
    }});

    cases.push_back({"augment.composite_order", 0.0, [] {
        Rng rng(17);
        auto obs = random_obs3(3, 10, rng);
        augment::AugDraw rs;
        rs.name = augment::AugName::rotate_shift;
        rs.angle_deg = 90.0;
        rs.dx = 1;
        rs.dy = 0;
        auto got = augment::apply_composite(obs, rs);
        auto want = oracles::shift_reference(oracles::rot90_reference(obs), 1, 0, false);
        return double(max_abs_diff(got, want));
    }});

    cases.push_back({"augment.sampler_uniformity", oracles::binomial_5sigma(10000, 6.0), [] {
        auto pool = augment::make_pool(augment::PoolChoice::all);
        Rng rng(31);
        Tensor<double> obs({3, 4, 4}, 0.5);
        std::map<augment::AugName, int> counts;
        const int n = 10000;
        for (int i = 0; i < n; ++i) counts[augment::sample_strong(obs, pool, rng).second.name]++;
        double dev = 0;
        for (const auto& spec : pool)
            dev = std::max(dev, std::abs(counts[spec.name] - n / 6.0));
        return dev;
    }});

    cases.push_back({"envs.shift_wrapper_commutes", 0.0, [] {
        envs::EnvConfig cfg;
        cfg.obs_size = 24;
        cfg.episode_length = 8;
        envs::PointGoalEnv train(cfg);
        envs::PointGoalEnv shifted(cfg, envs::parse_distribution("shift_hard"));
        train.reset(90);
        shifted.reset(90);
        const auto draw = shifted.episode_draw();
        double dev = 0;
        for (int i = 0; i < 5; ++i) {
            auto rt = train.step({0.4, 0.2});
            auto rw = shifted.step({0.4, 0.2});
            Tensor<float> base({3, cfg.obs_size, cfg.obs_size});
            const std::size_t per = base.data.size();
            for (std::size_t j = 0; j < per; ++j)
                base.data[j] = float(rt.obs.pixels[j]) / 255.0f;
            auto want = oracles::shift_reference(base, draw.dx, draw.dy, false);
            for (std::size_t j = 0; j < per; ++j) {
                const auto q = std::uint8_t(std::clamp(want.data[j], 0.0f, 1.0f) * 255.0f + 0.5f);
                dev = std::max(dev, std::abs(double(q) - double(rw.obs.pixels[j])));
            }
        }
        return dev;
    }});

    cases.push_back({"networks.encoder_forward", 1e-10, [] {
        Rng rng(2);
        auto cfg = tiny_net_cfg();
        nets::AgentNets<double> agent(cfg, rng);
        auto batch = random_batch4(1, cfg, rng);
        auto feat = nets::encode(agent.encoder, nets::Var<double>::constant(batch), false);
        Tensor<double> one({cfg.obs_channels, cfg.obs_size, cfg.obs_size});
        one.data = batch.data;
        auto ref = oracles::encoder_ref(agent, one);
        double dev = 0;
        for (int f = 0; f < cfg.features_dim; ++f)
            dev = std::max(dev, std::abs(feat.value().at(0, f) - ref[std::size_t(f)]));
        return dev;
    }});

    cases.push_back({"networks.policy_density_quadrature", 1e-3, [] {
        auto cfg = tiny_net_cfg();
        cfg.action_dim = 1;
        Rng rng(7);
        nets::AgentNets<double> agent(cfg, rng);
        auto batch = random_batch4(1, cfg, rng);
        auto feat = nets::encode(agent.encoder, nets::Var<double>::constant(batch), true);
        Tensor<double> zero_noise({1, 1});
        auto out = agent.actor.forward(feat, zero_noise);
        const double mu = out.mean.value()[0], ls = out.log_std.value()[0];
        const double integral = oracles::integrate(
            [&](double a) {
                a = std::clamp(a, -1.0 + 1e-9, 1.0 - 1e-9);
                return std::exp(nets::squashed_gaussian_log_prob({mu}, {ls}, {a}));
            },
            -1.0 + 1e-9, 1.0 - 1e-9, 1e-11);
        return std::abs(integral - 1.0);
    }});

    cases.push_back({"networks.q_fd_gradient", 1e-4, [] {
        Rng rng(9);
        auto cfg = tiny_net_cfg();
        nets::AgentNets<double> agent(cfg, rng);
        Tensor<double> feat({1, cfg.features_dim}), acts({1, cfg.action_dim});
        Rng frng(21);
        for (auto& v : feat.data) v = frng.normal();
        for (auto& v : acts.data) v = 0.5 * frng.normal();
        auto eval_q1 = [&] {
            auto [q1, q2] = nets::q_values(agent.critic, nets::Var<double>::constant(feat),
                                           nets::Var<double>::constant(acts));
            return q1.value()[0];
        };
        agent.critic.q1_w1.zero_grad();
        {
            auto [q1, q2] = nets::q_values(agent.critic, nets::Var<double>::constant(feat),
                                           nets::Var<double>::constant(acts));
            ad::sum_v(q1).backward();
        }
        double dev = 0;
        for (std::int64_t idx : {0L, 7L, 31L}) {
            double& w = agent.critic.q1_w1.value().data[std::size_t(idx)];
            const double saved = w, h = 1e-6;
            w = saved + h;
            const double up = eval_q1();
            w = saved - h;
            const double down = eval_q1();
            w = saved;
            const double fd = (up - down) / (2 * h);
            const double analytic = agent.critic.q1_w1.grad().data[std::size_t(idx)];
            dev = std::max(dev,
                           std::abs(fd - analytic) / std::max({1.0, std::abs(fd), std::abs(analytic)}));
        }
        return dev;
    }});

    cases.push_back({"recipes.actor_loss_trace", 1e-9, [] {
        Rng rng(8);
        auto cfg = tiny_net_cfg();
        nets::AgentNets<double> agent(cfg, rng);
        auto obs = random_batch4(2, cfg, rng);
        auto rc = recipes::make_recipe("sada", {augment::make_spec(augment::AugName::shift)});
        Rng strong(13);
        auto streams = recipes::pack_actor_streams(obs, strong, rc);
        Tensor<double> noise({4, 2});
        Rng nrng(10);
        for (auto& v : noise.data) v = nrng.normal();
        auto res = recipes::actor_loss_sada(agent, streams.p, streams.m, noise, 0.17);
        const double ref =
            oracles::sada_actor_loss_ref(agent, streams.p.data, streams.m.data, noise, 0.17);
        return std::abs(res.loss.value()[0] - ref);
    }});

    cases.push_back({"recipes.critic_loss_trace", 1e-9, [] {
        Rng rng(13);
        auto cfg = tiny_net_cfg();
        nets::AgentNets<double> agent(cfg, rng);
        auto obs = random_batch4(2, cfg, rng);
        Tensor<double> actions({2, 2});
        actions.at(0, 0) = 0.3;
        actions.at(1, 1) = -0.6;
        Tensor<double> y({2});
        y[0] = 0.4;
        y[1] = -0.1;
        auto loss = recipes::critic_bellman_loss(agent, obs, actions, y);
        return std::abs(loss.value()[0] - oracles::critic_loss_ref(agent, obs, actions, y));
    }});

    cases.push_back({"recipes.q_target_trace", 1e-9, [] {
        Rng rng(10);
        auto cfg = tiny_net_cfg();
        nets::AgentNets<double> agent(cfg, rng);
        auto next_obs = random_batch4(3, cfg, rng);
        Tensor<double> rewards({3}), discounts({3}, 0.99);
        rewards[0] = 1.0;
        rewards[1] = 0.2;
        Tensor<double> noise({3, 2});
        Rng nrng(5);
        for (auto& v : noise.data) v = nrng.normal();
        auto y = recipes::q_target_sac(agent, next_obs, rewards, discounts, 0.07, noise);
        auto ref = oracles::q_target_sac_ref(agent, next_obs, rewards, discounts, 0.07, noise);
        double dev = 0;
        for (int i = 0; i < 3; ++i) dev = std::max(dev, std::abs(y[i] - ref[std::size_t(i)]));
        return dev;
    }});

    cases.push_back({"recipes.greedy_grid_target", 1e-9, [] {
        Rng rng(11);
        auto cfg = tiny_net_cfg();
        nets::AgentNets<double> agent(cfg, rng);
        auto next_obs = random_batch4(3, cfg, rng);
        Tensor<double> rewards({3}, 0.5), discounts({3}, 0.99);
        auto y = recipes::q_target_greedy(agent, next_obs, rewards, discounts, 7);
        auto ref = oracles::q_target_greedy_ref(agent, next_obs, rewards, discounts, 7);
        double dev = 0;
        for (int i = 0; i < 3; ++i) dev = std::max(dev, std::abs(y[i] - ref[std::size_t(i)]));
        return dev;
    }});

    cases.push_back({"recipes.temperature_gradient", 1e-12, [] {
        auto log_alpha = nets::Var<double>::leaf(Tensor<double>::scalar(std::log(0.1)), true);
        Tensor<double> low({4}, -5.0);
        log_alpha.zero_grad();
        recipes::temperature_loss(low, log_alpha, -2.0).backward();
        const double analytic = -0.1 * (-5.0 + -2.0);
        return std::abs(log_alpha.grad()[0] - analytic);
    }});

    cases.push_back({"trainer.exploration_ks", 1.95 / std::sqrt(10000.0), [] {
        TrainConfig cfg;
        cfg.obs_size = 16;
        cfg.conv_filters = 4;
        cfg.features_dim = 8;
        cfg.hidden_dim = 16;
        Rng init(1);
        nets::AgentNets<float> agent(net_config(cfg), init);
        envs::PointGoalEnv env(env_config(cfg));
        auto obs = env.reset(1);
        Rng rng(17);
        std::vector<double> xs;
        for (int i = 0; i < 10000; ++i)
            xs.push_back(trainer::collect_action(agent, obs, 0, 1000, rng)[0]);
        return oracles::ks_statistic_uniform(xs, -1.0, 1.0);
    }});

    cases.push_back({"replay.chisquare_uniformity", oracles::chisquare_crit_df9_p01(), [] {
        replay::ReplayBuffer buf(10, 3, 4, 2);
        envs::Observation o;
        o.frame_stack = 1;
        o.size = 4;
        o.pixels.assign(48, 0);
        for (int i = 0; i < 10; ++i) buf.push(o, {0.f, 0.f}, 0.f, o, 0.99f);
        Rng rng(2026);
        std::vector<int> counts(10, 0);
        for (auto idx : buf.sample_indices(100000, rng)) counts[std::size_t(idx)]++;
        double chi2 = 0;
        for (int c : counts) chi2 += (c - 10000.0) * (c - 10000.0) / 10000.0;
        return chi2;
    }});

    cases.push_back({"stats.welch_formula", 1e-10, [] {
        const std::vector<double> a{808, 958, 302, 870, 743}, b{278, 505, 127, 148, 295};
        auto got = stats::welch_one_tailed({"a", a}, {"b", b});
        auto want = oracles::welch_reference(a, b);
        return std::max({std::abs(got.t - want.t), std::abs(got.dof - want.dof),
                         std::abs(got.p - want.p)});
    }});

    cases.push_back({"stats.t_cdf_quadrature", 1e-10, [] {
        double dev = 0;
        int pairs = 0;
        for (double dof = 1.0; dof <= 100.0 && pairs < 50; dof *= 1.7) {
            for (double t : {-4.0, -1.2, 0.0, 0.6, 2.0, 5.5}) {
                dev = std::max(dev, std::abs(stats::student_t_upper_tail(t, dof) -
                                             oracles::student_t_upper_tail_reference(t, dof)));
                ++pairs;
            }
        }
        return dev;
    }});

    cases.push_back({"eval.optimal_trajectory", 0.05, [] {
        envs::EnvConfig env_cfg;
        env_cfg.obs_size = 16;
        env_cfg.episode_length = 60;
        oracles::PointGoalModel model{env_cfg.accel, env_cfg.friction, env_cfg.reward_scale,
                                      env_cfg.action_repeat, env_cfg.episode_length};
        Rng rng(11);
        double worst = 0;
        for (int trial = 0; trial < 4; ++trial) {
            const std::array<double, 2> start{rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8)};
            const std::array<double, 2> goal{rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8)};
            envs::PointGoalEnv env(env_cfg);
            env.reset_to(start, goal);
            double total = 0;
            while (!env.done()) {
                const auto pos = env.agent_pos();
                const auto vel = env.agent_vel();
                const double mu = env_cfg.friction, k = env_cfg.accel;
                const double denom = mu * k * (2.0 + mu);
                std::array<double, 2> act{0, 0};
                for (int d = 0; d < 2; ++d) {
                    const double want = goal[std::size_t(d)] - pos[std::size_t(d)];
                    act[std::size_t(d)] = std::clamp(
                        (want - (1.0 + mu) * mu * vel[std::size_t(d)]) / denom, -1.0, 1.0);
                }
                total += env.step(act).reward;
            }
            const double bound = oracles::optimal_reward_upper_bound(
                model, std::hypot(goal[0] - start[0], goal[1] - start[1]),
                oracles::action_box_support(goal[0] - start[0], goal[1] - start[1]));
            worst = std::max(worst, 1.0 - total / bound);
        }
        return worst;
    }});

    return cases;
}

}  // namespace

int main(int argc, char** argv) {
    std::string filter;
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--filter" && i + 1 < argc) filter = argv[++i];
    }
    auto cases = build_cases();
    int failures = 0, executed = 0;
    for (auto& c : cases) {
        if (!filter.empty() && c.name.find(filter) == std::string::npos) continue;
        ++executed;
        double dev = 0;
        bool threw = false;
        try {
            dev = c.max_deviation();
        } catch (const std::exception& e) {
            threw = true;
            std::printf("[FAIL] %-36s exception: %s\n", c.name.c_str(), e.what());
        }
        if (!threw) {
            const bool ok = dev <= c.tolerance;
            std::printf("[%s] %-36s max deviation %.3e (tolerance %.3e)\n",
                        ok ? "PASS" : "FAIL", c.name.c_str(), dev, c.tolerance);
            if (!ok) ++failures;
        } else {
            ++failures;
        }
    }
    if (executed == 0) {
        std::printf("no oracle cases matched filter '%s'\n", filter.c_str());
        return 1;
    }
    std::printf("%d/%d oracle cases passed\n", executed - failures, executed);
    return failures == 0 ? 0 : 1;
}
