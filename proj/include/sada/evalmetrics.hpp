// Copyright (c) 2026 The sada authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "sada/augment.hpp"
#include "sada/envs.hpp"
#include "sada/networks.hpp"

namespace sada::evalmetrics {

using envs::DistributionSpec;
using envs::EnvConfig;
using envs::Observation;
using nets::AgentNets;

struct DistributionStats {
    double mean_reward = 0;
    double std_reward = 0;
    int episodes = 0;
    double success_rate = 0;
};

struct EvalReport {
    std::string checkpoint_id;
    std::vector<std::uint64_t> seeds;
    std::vector<std::pair<std::string, DistributionStats>> per_distribution;
};

/// Deterministic policy mean action for one observation.
template <class Real>
std::array<double, 2> mean_action(AgentNets<Real>& nets, const Observation& obs) {
    ad::NoGradGuard ng;
    Tensor<Real> t = obs.to_tensor<Real>();
    Tensor<Real> batch({1, t.dim(0), t.dim(1), t.dim(2)});
    batch.data = t.data;
    auto feat = nets::encode(nets.encoder, nets::Var<Real>::constant(batch), true);
    auto [action, lp] = nets::act(nets.actor, feat, nets::ActMode::mean);
    std::array<double, 2> a{0, 0};
    for (int d = 0; d < std::min(2, nets.cfg.action_dim); ++d) a[std::size_t(d)] = double(action.at(0, d));
    return a;
}

/// Zero-shot evaluation of an arbitrary controller: runs episodes, returns
/// reward statistics and the success rate. Episode seeds come from the
/// supplied rng only.
template <class Policy>
DistributionStats evaluate_policy(Policy&& policy, const EnvConfig& env_cfg,
                                  const DistributionSpec& dist, int episodes, Rng& rng) {
    if (episodes < 1) throw ContractError("evaluate: episodes must be >= 1");
    envs::PointGoalEnv env(env_cfg, dist);
    std::vector<double> rewards;
    rewards.reserve(std::size_t(episodes));
    int successes = 0;
    for (int ep = 0; ep < episodes; ++ep) {
        Observation obs = env.reset(rng.next_u64());
        double total = 0;
        while (true) {
            auto res = env.step(policy(env, obs));
            total += res.reward;
            obs = res.obs;
            if (res.done) break;
        }
        rewards.push_back(total);
        if (env.success()) ++successes;
    }
    DistributionStats s;
    s.episodes = episodes;
    double sum = 0;
    for (double r : rewards) sum += r;
    s.mean_reward = sum / episodes;
    double var = 0;
    for (double r : rewards) var += (r - s.mean_reward) * (r - s.mean_reward);
    s.std_reward = episodes > 1 ? std::sqrt(var / (episodes - 1)) : 0.0;
    s.success_rate = double(successes) / episodes;
    return s;
}

/// Zero-shot evaluation with deterministic policy-mean actions and no
/// parameter updates.
template <class Real>
DistributionStats evaluate(AgentNets<Real>& nets, const EnvConfig& env_cfg,
                           const DistributionSpec& dist, int episodes, Rng& rng) {
    return evaluate_policy(
        [&nets](const envs::PointGoalEnv&, const Observation& obs) {
            return mean_action(nets, obs);
        },
        env_cfg, dist, episodes, rng);
}

/// Mean squared deviation of the policy mean between augmented and clean
/// observations, per augmentation family, normalized by action dimension.
/// Zero iff the policy mean is identical on every augmented/clean pair.
template <class Real>
std::vector<std::pair<std::string, double>> action_variance(
    AgentNets<Real>& nets, const std::vector<Observation>& obs_set,
    const std::vector<augment::AugmentationSpec>& families, Rng& rng, int draws_per_obs = 8) {
    if (obs_set.empty()) throw ContractError("action_variance: empty observation set");
    ad::NoGradGuard ng;
    const int A = nets.cfg.action_dim;
    std::vector<std::pair<std::string, double>> report;
    for (const auto& family : families) {
        double acc = 0;
        long long count = 0;
        for (const Observation& o : obs_set) {
            Tensor<Real> clean = o.to_tensor<Real>();
            Tensor<Real> cb({1, clean.dim(0), clean.dim(1), clean.dim(2)});
            cb.data = clean.data;
            auto feat_c = nets::encode(nets.encoder, nets::Var<Real>::constant(cb), true);
            auto [a_clean, lp_c] = nets::act(nets.actor, feat_c, nets::ActMode::mean);
            for (int d = 0; d < draws_per_obs; ++d) {
                auto draw = augment::sample_draw(family, rng);
                Tensor<Real> aug = augment::apply_draw(clean, draw);
                Tensor<Real> ab({1, aug.dim(0), aug.dim(1), aug.dim(2)});
                ab.data = aug.data;
                auto feat_a = nets::encode(nets.encoder, nets::Var<Real>::constant(ab), true);
                auto [a_aug, lp_a] = nets::act(nets.actor, feat_a, nets::ActMode::mean);
                double sq = 0;
                for (int k = 0; k < A; ++k) {
                    const double diff = double(a_aug.at(0, k)) - double(a_clean.at(0, k));
                    sq += diff * diff;
                }
                acc += sq / A;
                ++count;
            }
        }
        report.emplace_back(augment::to_string(family.name), acc / double(count));
    }
    return report;
}

/// Rows of (distribution label, feature vector) for external projection
/// tools. Observations come from mean-policy rollouts on each distribution.
template <class Real>
long long export_embeddings(AgentNets<Real>& nets, const EnvConfig& env_cfg,
                            const std::vector<std::string>& distributions,
                            int samples_per_dist, const std::string& out_path, Rng& rng) {
    std::ofstream f(out_path);
    if (!f) throw IoError("cannot open for write: " + out_path);
    f << "label";
    for (int i = 0; i < nets.cfg.features_dim; ++i) f << ",f" << i;
    f << "\n";
    long long rows = 0;
    for (const auto& name : distributions) {
        envs::PointGoalEnv env(env_cfg, envs::parse_distribution(name));
        Observation obs = env.reset(rng.next_u64());
        int taken = 0;
        const int stride = std::max(1, env_cfg.episode_length / std::max(1, samples_per_dist));
        int step = 0;
        while (taken < samples_per_dist) {
            if (step % stride == 0) {
                ad::NoGradGuard ng;
                Tensor<Real> t = obs.to_tensor<Real>();
                Tensor<Real> batch({1, t.dim(0), t.dim(1), t.dim(2)});
                batch.data = t.data;
                auto feat = nets::encode(nets.encoder, nets::Var<Real>::constant(batch), true);
                f << name;
                char num[32];
                for (int i = 0; i < nets.cfg.features_dim; ++i) {
                    std::snprintf(num, sizeof num, ",%.6g", double(feat.value().at(0, i)));
                    f << num;
                }
                f << "\n";
                ++taken;
                ++rows;
            }
            auto res = env.step(mean_action(nets, obs));
            obs = res.obs;
            ++step;
            if (res.done) obs = env.reset(rng.next_u64());
        }
    }
    if (!f) throw IoError("write failed: " + out_path);
    return rows;
}

}  // namespace sada::evalmetrics
