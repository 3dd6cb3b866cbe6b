// Copyright (c) 2026 The sada authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "sada/augment.hpp"
#include "sada/networks.hpp"

namespace sada::recipes {

using augment::AugDraw;
using augment::AugmentationSpec;
using nets::AgentNets;
using sada::ad::Var;

enum class AugMode { none, naive, selective };

inline const char* to_string(AugMode m) {
    switch (m) {
        case AugMode::none: return "none";
        case AugMode::naive: return "naive";
        case AugMode::selective: return "selective";
    }
    return "?";
}

enum class TargetForm { sac, greedy_max };

/// Where augmentation enters each update. The named recipes are fixed points
/// in this space; everything else (pool, weak shift amount, target form) is
/// orthogonal configuration.
struct RecipeConfig {
    std::string name = "drq";
    AugMode actor_aug = AugMode::none;
    AugMode critic_online_aug = AugMode::none;
    AugMode critic_target_aug = AugMode::none;  // never selective
    std::vector<AugmentationSpec> strong_pool;
    TargetForm target_form = TargetForm::sac;
    int greedy_grid = 11;
    int weak_pad_px = 4;
};

inline RecipeConfig make_recipe(const std::string& name,
                                std::vector<AugmentationSpec> pool,
                                int weak_pad_px = 4) {
    RecipeConfig c;
    c.name = name;
    c.strong_pool = std::move(pool);
    c.weak_pad_px = weak_pad_px;
    if (name == "drq") {
        c.actor_aug = AugMode::none;
        c.critic_online_aug = AugMode::none;
        c.critic_target_aug = AugMode::none;
    } else if (name == "drq_aug") {
        c.actor_aug = AugMode::naive;
        c.critic_online_aug = AugMode::naive;
        c.critic_target_aug = AugMode::naive;
    } else if (name == "svea") {
        c.actor_aug = AugMode::none;
        c.critic_online_aug = AugMode::selective;
        c.critic_target_aug = AugMode::none;
    } else if (name == "sada") {
        c.actor_aug = AugMode::selective;
        c.critic_online_aug = AugMode::selective;
        c.critic_target_aug = AugMode::none;
    } else if (name == "sada_naive_actor") {
        c.actor_aug = AugMode::naive;
        c.critic_online_aug = AugMode::selective;
        c.critic_target_aug = AugMode::none;
    } else if (name == "sada_naive_critic") {
        c.actor_aug = AugMode::selective;
        c.critic_online_aug = AugMode::naive;
        c.critic_target_aug = AugMode::naive;
    } else if (name == "sada_no_critic_aug") {
        c.actor_aug = AugMode::selective;
        c.critic_online_aug = AugMode::none;
        c.critic_target_aug = AugMode::none;
    } else {
        throw InvalidSpecError("unknown recipe '" + name + "'");
    }
    return c;
}

inline std::vector<std::string> recipe_names() {
    return {"drq", "drq_aug", "svea", "sada", "sada_naive_actor", "sada_naive_critic",
            "sada_no_critic_aug"};
}

// ---- stream packing ---------------------------------------------------------

/// Batch of leading dimension 2N: rows [0,N) are the clean stream, rows
/// [N,2N) the second stream. The layout tag (half) must always be present.
template <class Real>
struct PackedBatch {
    Tensor<Real> data;
    int half = 0;
    bool halves_identical = false;

    bool tagged() const {
        return half > 0 && data.ndim() >= 1 && data.dim(0) == 2 * half;
    }
};

template <class Real>
PackedBatch<Real> pack(const Tensor<Real>& clean, const Tensor<Real>& second) {
    if (clean.shape != second.shape) throw ContractError("pack: stream shape mismatch");
    if (clean.ndim() < 1 || clean.dim(0) < 1) throw ContractError("pack: empty stream");
    PackedBatch<Real> p;
    std::vector<int> s = clean.shape;
    s[0] *= 2;
    p.data = Tensor<Real>(s);
    std::copy(clean.data.begin(), clean.data.end(), p.data.data.begin());
    std::copy(second.data.begin(), second.data.end(), p.data.data.begin() + clean.numel());
    p.half = clean.dim(0);
    return p;
}

template <class Real>
PackedBatch<Real> pack_duplicate(const Tensor<Real>& clean) {
    PackedBatch<Real> p = pack(clean, clean);
    p.halves_identical = true;
    return p;
}

template <class Real>
std::pair<Tensor<Real>, Tensor<Real>> unpack(const PackedBatch<Real>& p) {
    if (!p.tagged()) throw ContractError("unpack: missing or inconsistent layout tag");
    std::vector<int> s = p.data.shape;
    s[0] = p.half;
    Tensor<Real> a(s), b(s);
    std::copy_n(p.data.data.begin(), a.numel(), a.data.begin());
    std::copy_n(p.data.data.begin() + a.numel(), b.numel(), b.data.begin());
    return {std::move(a), std::move(b)};
}

/// [q, q]_N duplication along the leading dimension.
template <class Real>
Tensor<Real> tile_rows(const Tensor<Real>& t) {
    std::vector<int> s = t.shape;
    s[0] *= 2;
    Tensor<Real> out(s);
    std::copy(t.data.begin(), t.data.end(), out.data.begin());
    std::copy(t.data.begin(), t.data.end(), out.data.begin() + t.numel());
    return out;
}

// ---- parameter freezing ------------------------------------------------------

/// Temporarily withholds gradients from a parameter set, so e.g. the actor
/// loss deposits nothing on critic parameters.
template <class Real>
class FreezeParams {
  public:
    explicit FreezeParams(nets::NamedParams<Real> params) : params_(std::move(params)) {
        for (auto& [name, p] : params_) {
            prev_.push_back(p->node()->requires_grad);
            p->node()->requires_grad = false;
        }
    }
    ~FreezeParams() {
        for (std::size_t i = 0; i < params_.size(); ++i)
            params_[i].second->node()->requires_grad = prev_[i];
    }
    FreezeParams(const FreezeParams&) = delete;

  private:
    nets::NamedParams<Real> params_;
    std::vector<bool> prev_;
};

// ---- packing for the actor update ---------------------------------------------

template <class Real>
struct ActorStreams {
    PackedBatch<Real> p;  // [obs, strong(obs)]
    PackedBatch<Real> m;  // [obs, obs]
    std::vector<AugDraw> draws;
};

/// obs_w must already carry the shared weak augmentation; the strong draw is
/// applied on top of it so both packs see the identical weak draw.
template <class Real>
ActorStreams<Real> pack_actor_streams(const Tensor<Real>& obs_w, Rng& strong_rng,
                                      const RecipeConfig& cfg) {
    auto [aug, draws] = augment::sample_strong_batch(obs_w, cfg.strong_pool, strong_rng);
    ActorStreams<Real> s;
    s.p = pack(obs_w, aug);
    s.m = pack_duplicate(obs_w);
    s.draws = std::move(draws);
    return s;
}

// ---- losses (pure: deterministic given pre-drawn noise and augmented inputs) ----

template <class Real>
struct ActorLossResult {
    Var<Real> loss;
    Tensor<Real> log_probs;  // sampled log pi(a|p), used by the temperature update
};

/// SAC actor loss L = E[alpha log pi(a|f(p)) - min(Q1,Q2)(f(m), a)], a ~ pi(.|f(p)).
/// Features are detached; critic parameters receive no gradient.
template <class Real>
ActorLossResult<Real> actor_loss_sada(AgentNets<Real>& nets, const PackedBatch<Real>& p_obs,
                                      const PackedBatch<Real>& m_obs, const Tensor<Real>& noise,
                                      double alpha) {
    using namespace sada::ad;
    if (!p_obs.tagged() || !m_obs.tagged() || p_obs.half != m_obs.half)
        throw ContractError("actor_loss: packed batches missing tags or misaligned");
    auto feat_p = nets::encode(nets.encoder, Var<Real>::constant(p_obs.data), true);
    Var<Real> feat_m;
    if (m_obs.halves_identical) {
        auto [clean, _] = unpack(m_obs);
        auto f = nets::encode(nets.encoder, Var<Real>::constant(clean), true);
        feat_m = concat_rows(f, f);
    } else {
        feat_m = nets::encode(nets.encoder, Var<Real>::constant(m_obs.data), true);
    }
    auto out = nets.actor.forward(feat_p, noise);
    FreezeParams<Real> freeze(nets.critic.named_params(""));
    auto [q1, q2] = nets.critic.forward(feat_m, out.action);
    auto qmin = min_elem(q1, q2);
    return {mean_v(sub(scale(out.log_prob, Real(alpha)), qmin)), out.log_prob.value()};
}

/// Plain SAC actor loss on a single stream (none / naive actor modes).
template <class Real>
ActorLossResult<Real> actor_loss_plain(AgentNets<Real>& nets, const Tensor<Real>& obs,
                                       const Tensor<Real>& noise, double alpha) {
    using namespace sada::ad;
    auto feat = nets::encode(nets.encoder, Var<Real>::constant(obs), true);
    auto out = nets.actor.forward(feat, noise);
    FreezeParams<Real> freeze(nets.critic.named_params(""));
    auto [q1, q2] = nets.critic.forward(feat, out.action);
    return {mean_v(sub(scale(out.log_prob, Real(alpha)), min_elem(q1, q2))),
            out.log_prob.value()};
}

/// L_alpha = E[-alpha log pi - alpha Hbar] with gradient w.r.t. alpha only.
template <class Real>
Var<Real> temperature_loss(const Tensor<Real>& log_probs, Var<Real>& log_alpha,
                           double target_entropy) {
    using namespace sada::ad;
    double mean_lp = 0;
    for (Real v : log_probs.data) mean_lp += double(v);
    mean_lp /= double(log_probs.numel());
    return scale(exp_v(log_alpha), Real(-(mean_lp + target_entropy)));
}

/// Soft Q-target: r + disc * (min Qbar(f(o'), a') - alpha log pi(a'|f(o'))),
/// a' ~ pi. No gradients anywhere.
template <class Real>
Tensor<Real> q_target_sac(AgentNets<Real>& nets, const Tensor<Real>& next_obs,
                          const Tensor<Real>& rewards, const Tensor<Real>& discounts,
                          double alpha, const Tensor<Real>& noise) {
    ad::NoGradGuard ng;
    auto feat = nets::encode(nets.encoder, Var<Real>::constant(next_obs), false);
    auto out = nets.actor.forward(feat, noise);
    auto [tq1, tq2] = nets.target_critic.forward(feat, out.action);
    const int N = next_obs.dim(0);
    Tensor<Real> y({N});
    for (int i = 0; i < N; ++i) {
        const Real v = std::min(tq1.value()[i], tq2.value()[i]) -
                       Real(alpha) * out.log_prob.value()[i];
        y[i] = rewards[i] + discounts[i] * v;
    }
    return y;
}

/// Literal greedy form: r + disc * max_{a'} min Qbar(f(o'), a') over an
/// exhaustive action grid. Supported for action_dim <= 2.
template <class Real>
Tensor<Real> q_target_greedy(AgentNets<Real>& nets, const Tensor<Real>& next_obs,
                             const Tensor<Real>& rewards, const Tensor<Real>& discounts,
                             int grid) {
    if (nets.cfg.action_dim > 2)
        throw ContractError("greedy-max target supports action_dim <= 2");
    if (grid < 2) throw RangeError("greedy grid must have at least 2 points");
    ad::NoGradGuard ng;
    auto feat = nets::encode(nets.encoder, Var<Real>::constant(next_obs), false);
    const int N = next_obs.dim(0), A = nets.cfg.action_dim;
    Tensor<Real> best({N}, Real(-1e30));
    const int n_candidates = A == 1 ? grid : grid * grid;
    for (int k = 0; k < n_candidates; ++k) {
        Tensor<Real> acts({N, A});
        const int i0 = A == 1 ? k : k / grid;
        const int i1 = A == 1 ? 0 : k % grid;
        const Real a0 = Real(-1.0 + 2.0 * i0 / (grid - 1));
        const Real a1 = Real(-1.0 + 2.0 * i1 / (grid - 1));
        for (int r = 0; r < N; ++r) {
            acts.at(r, 0) = a0;
            if (A == 2) acts.at(r, 1) = a1;
        }
        auto [tq1, tq2] = nets.target_critic.forward(feat, Var<Real>::constant(acts));
        for (int r = 0; r < N; ++r)
            best[r] = std::max(best[r], std::min(tq1.value()[r], tq2.value()[r]));
    }
    Tensor<Real> y({N});
    for (int r = 0; r < N; ++r) y[r] = rewards[r] + discounts[r] * best[r];
    return y;
}

/// Bellman regression: mean over rows of the summed squared error of both
/// heads. Gradients flow into the critic and the encoder.
template <class Real>
Var<Real> critic_bellman_loss(AgentNets<Real>& nets, const Tensor<Real>& obs,
                              const Tensor<Real>& actions, const Tensor<Real>& targets) {
    using namespace sada::ad;
    if (obs.dim(0) != actions.dim(0) || obs.dim(0) != targets.dim(0))
        throw ContractError("critic loss: row mismatch");
    auto feat = nets::encode(nets.encoder, Var<Real>::constant(obs), false);
    auto [q1, q2] = nets.critic.forward(feat, Var<Real>::constant(actions));
    auto y = Var<Real>::constant(targets);
    return add(mean_v(square(sub(q1, y))), mean_v(square(sub(q2, y))));
}

template <class Real>
struct CriticLossResult {
    Var<Real> loss;
    std::vector<AugDraw> draws;
};

/// Selective critic loss: p = [o, o_aug]_N, y = [q_tgt, q_tgt]_N, actions
/// duplicated likewise; targets stay clean.
template <class Real>
CriticLossResult<Real> critic_loss_sada(AgentNets<Real>& nets, const Tensor<Real>& obs_w,
                                        const Tensor<Real>& actions,
                                        const Tensor<Real>& q_tgt, Rng& strong_rng,
                                        const RecipeConfig& cfg) {
    if (q_tgt.dim(0) != obs_w.dim(0)) throw ContractError("critic loss: target length mismatch");
    auto [aug, draws] = augment::sample_strong_batch(obs_w, cfg.strong_pool, strong_rng);
    PackedBatch<Real> p = pack(obs_w, aug);
    if (!p.tagged()) throw ContractError("critic loss: packing failed");
    Tensor<Real> y = tile_rows(q_tgt);
    Tensor<Real> acts = tile_rows(actions);
    CriticLossResult<Real> res{critic_bellman_loss(nets, p.data, acts, y), std::move(draws)};
    return res;
}

// ---- full update steps -----------------------------------------------------------

template <class Real>
struct TransitionBatch {
    Tensor<Real> obs;        // [N,C,S,S], raw renders
    Tensor<Real> actions;    // [N,A]
    Tensor<Real> rewards;    // [N]
    Tensor<Real> next_obs;   // [N,C,S,S]
    Tensor<Real> discounts;  // [N]
    int size() const { return obs.dim(0); }
};

template <class Real>
struct UpdateContext {
    AgentNets<Real>* nets = nullptr;
    nets::Adam<Real>* critic_opt = nullptr;  // encoder + critic parameters
    nets::Adam<Real>* actor_opt = nullptr;   // actor parameters
    nets::Adam<Real>* alpha_opt = nullptr;   // temperature parameter
    RngStreams* rngs = nullptr;
    RecipeConfig recipe;
};

namespace detail {

template <class Real>
Tensor<Real> draw_noise(int rows, int action_dim, Rng& rng) {
    Tensor<Real> noise({rows, action_dim});
    for (auto& v : noise.data) v = Real(rng.normal());
    return noise;
}

}  // namespace detail

/// One critic update for any recipe. Returns the scalar loss.
template <class Real>
double critic_update(UpdateContext<Real>& ctx, const TransitionBatch<Real>& batch) {
    auto& nets = *ctx.nets;
    const auto& cfg = ctx.recipe;
    const int N = batch.size();
    const double alpha = nets.alpha();

    Tensor<Real> obs_w = augment::apply_weak_batch(batch.obs, ctx.rngs->weak, cfg.weak_pad_px);
    Tensor<Real> next_w =
        augment::apply_weak_batch(batch.next_obs, ctx.rngs->weak, cfg.weak_pad_px);

    // Target path: strongly augmented only in the naive mode. The selective
    // modes never consume strong draws here (target purity).
    Tensor<Real> next_in = next_w;
    if (cfg.critic_target_aug == AugMode::naive)
        next_in = augment::sample_strong_batch(next_w, cfg.strong_pool, ctx.rngs->strong_target)
                      .first;

    Tensor<Real> q_tgt;
    if (cfg.target_form == TargetForm::greedy_max) {
        q_tgt = q_target_greedy(nets, next_in, batch.rewards, batch.discounts, cfg.greedy_grid);
    } else {
        Tensor<Real> noise =
            detail::draw_noise<Real>(N, nets.cfg.action_dim, ctx.rngs->target_noise);
        q_tgt = q_target_sac(nets, next_in, batch.rewards, batch.discounts, alpha, noise);
    }

    Var<Real> loss;
    switch (cfg.critic_online_aug) {
        case AugMode::selective:
            loss = critic_loss_sada(nets, obs_w, batch.actions, q_tgt, ctx.rngs->strong, cfg)
                       .loss;
            break;
        case AugMode::naive: {
            Tensor<Real> obs_in =
                augment::sample_strong_batch(obs_w, cfg.strong_pool, ctx.rngs->strong).first;
            loss = critic_bellman_loss(nets, obs_in, batch.actions, q_tgt);
            break;
        }
        case AugMode::none:
            loss = critic_bellman_loss(nets, obs_w, batch.actions, q_tgt);
            break;
    }

    ctx.critic_opt->zero_grad();
    loss.backward();
    ctx.critic_opt->step();
    return double(loss.value()[0]);
}

/// One actor + temperature update for any recipe. Returns the actor loss.
template <class Real>
double actor_update_variant(UpdateContext<Real>& ctx, const TransitionBatch<Real>& batch) {
    auto& nets = *ctx.nets;
    const auto& cfg = ctx.recipe;
    const int N = batch.size();
    const double alpha = nets.alpha();

    Tensor<Real> obs_w = augment::apply_weak_batch(batch.obs, ctx.rngs->weak, cfg.weak_pad_px);
    // Base noise is drawn per clean sample and tiled to the packed batch so
    // a packed update with an identity pool reduces exactly to the plain one.
    Tensor<Real> noise = detail::draw_noise<Real>(N, nets.cfg.action_dim, ctx.rngs->actor_noise);

    ActorLossResult<Real> result;
    switch (cfg.actor_aug) {
        case AugMode::selective: {
            ActorStreams<Real> s = pack_actor_streams(obs_w, ctx.rngs->strong, cfg);
            result = actor_loss_sada(nets, s.p, s.m, tile_rows(noise), alpha);
            break;
        }
        case AugMode::naive: {
            Tensor<Real> obs_in =
                augment::sample_strong_batch(obs_w, cfg.strong_pool, ctx.rngs->strong).first;
            result = actor_loss_plain(nets, obs_in, noise, alpha);
            break;
        }
        case AugMode::none:
            result = actor_loss_plain(nets, obs_w, noise, alpha);
            break;
    }

    ctx.actor_opt->zero_grad();
    result.loss.backward();
    ctx.actor_opt->step();

    auto alpha_loss = temperature_loss(result.log_probs, nets.log_alpha, nets.target_entropy);
    ctx.alpha_opt->zero_grad();
    alpha_loss.backward();
    ctx.alpha_opt->step();

    return double(result.loss.value()[0]);
}

}  // namespace sada::recipes
