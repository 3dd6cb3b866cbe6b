// Copyright (c) 2026 The sada authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "sada/autodiff.hpp"
#include "sada/rng.hpp"

namespace sada::nets {

using sada::ad::Var;

struct NetConfig {
    int obs_channels = 9;
    int obs_size = 84;
    int conv_filters = 32;
    int features_dim = 50;
    int hidden_dim = 1024;
    int action_dim = 2;
    double log_std_min = -10.0;
    double log_std_max = 2.0;
};

namespace detail {

template <class Real>
Var<Real> init_weight(std::vector<int> shape, double std_dev, Rng& rng) {
    Tensor<Real> t(shape);
    for (auto& v : t.data) v = Real(std_dev * rng.normal());
    return Var<Real>::leaf(std::move(t), true);
}

template <class Real>
Var<Real> init_const(std::vector<int> shape, Real fill, bool requires_grad = true) {
    Tensor<Real> t(std::move(shape), fill);
    return Var<Real>::leaf(std::move(t), requires_grad);
}

}  // namespace detail

template <class Real>
using NamedParams = std::vector<std::pair<std::string, Var<Real>*>>;

/// Four 3x3 conv layers (stride 2 then 1), linear projection, layer norm,
/// tanh. Deterministic given parameters.
template <class Real>
struct Encoder {
    NetConfig cfg;
    Var<Real> w1, b1, w2, b2, w3, b3, w4, b4;
    Var<Real> proj_w, proj_b, ln_g, ln_b;
    int flat_dim = 0;

    Encoder() = default;
    Encoder(const NetConfig& c, Rng& rng) : cfg(c) {
        const int nf = c.conv_filters;
        auto conv_std = [](int ci) { return std::sqrt(2.0 / (ci * 9.0)); };
        w1 = detail::init_weight<Real>({nf, c.obs_channels, 3, 3}, conv_std(c.obs_channels), rng);
        b1 = detail::init_const<Real>({nf}, Real(0));
        w2 = detail::init_weight<Real>({nf, nf, 3, 3}, conv_std(nf), rng);
        b2 = detail::init_const<Real>({nf}, Real(0));
        w3 = detail::init_weight<Real>({nf, nf, 3, 3}, conv_std(nf), rng);
        b3 = detail::init_const<Real>({nf}, Real(0));
        w4 = detail::init_weight<Real>({nf, nf, 3, 3}, conv_std(nf), rng);
        b4 = detail::init_const<Real>({nf}, Real(0));
        flat_dim = nf * out_hw() * out_hw();
        proj_w = detail::init_weight<Real>({c.features_dim, flat_dim},
                                           std::sqrt(1.0 / flat_dim), rng);
        proj_b = detail::init_const<Real>({c.features_dim}, Real(0));
        ln_g = detail::init_const<Real>({c.features_dim}, Real(1));
        ln_b = detail::init_const<Real>({c.features_dim}, Real(0));
    }

    int out_hw() const {
        int s = (cfg.obs_size - 3) / 2 + 1;  // stride-2 layer
        s -= 2;                              // three valid stride-1 layers
        s -= 2;
        s -= 2;
        if (s <= 0) throw InvalidSpecError("encoder: obs_size too small for conv stack");
        return s;
    }

    /// [B, C, S, S] -> [B, features_dim]
    Var<Real> forward(const Var<Real>& obs) const {
        using namespace sada::ad;
        auto h = relu(conv2d(obs, w1, b1, 2));
        h = relu(conv2d(h, w2, b2, 1));
        h = relu(conv2d(h, w3, b3, 1));
        h = relu(conv2d(h, w4, b4, 1));
        h = reshape(h, {obs.value().dim(0), flat_dim});
        h = linear(h, proj_w, proj_b);
        h = layer_norm(h, ln_g, ln_b);
        return tanh_v(h);
    }

    NamedParams<Real> named_params(const std::string& prefix) {
        return {{prefix + "conv1.w", &w1}, {prefix + "conv1.b", &b1},
                {prefix + "conv2.w", &w2}, {prefix + "conv2.b", &b2},
                {prefix + "conv3.w", &w3}, {prefix + "conv3.b", &b3},
                {prefix + "conv4.w", &w4}, {prefix + "conv4.b", &b4},
                {prefix + "proj.w", &proj_w}, {prefix + "proj.b", &proj_b},
                {prefix + "ln.g", &ln_g}, {prefix + "ln.b", &ln_b}};
    }
};

/// Feature batch from the encoder. With detached = true no gradient flows
/// into the encoder through this call.
template <class Real>
Var<Real> encode(const Encoder<Real>& enc, const Var<Real>& obs_batch, bool detached) {
    if (obs_batch.value().ndim() != 4 || obs_batch.value().dim(0) < 1)
        throw ContractError("encode: expects a non-empty [B,C,H,W] batch");
    if (obs_batch.value().dim(1) != enc.cfg.obs_channels ||
        obs_batch.value().dim(2) != enc.cfg.obs_size)
        throw ContractError("encode: observation shape mismatch");
    if (detached) {
        ad::NoGradGuard ng;
        return enc.forward(obs_batch).detach();
    }
    return enc.forward(obs_batch);
}

/// Squashed-Gaussian policy head: MLP trunk to (mean, raw log-std), tanh
/// bounding of the log-std into [log_std_min, log_std_max], tanh squashing of
/// the sample with the exact log-det correction.
template <class Real>
struct Actor {
    NetConfig cfg;
    Var<Real> w1, b1, w2, b2, w3, b3;

    Actor() = default;
    Actor(const NetConfig& c, Rng& rng) : cfg(c) {
        const int H = c.hidden_dim;
        w1 = detail::init_weight<Real>({H, c.features_dim}, std::sqrt(2.0 / c.features_dim), rng);
        b1 = detail::init_const<Real>({H}, Real(0));
        w2 = detail::init_weight<Real>({H, H}, std::sqrt(2.0 / H), rng);
        b2 = detail::init_const<Real>({H}, Real(0));
        w3 = detail::init_weight<Real>({2 * c.action_dim, H}, 1e-2, rng);
        b3 = detail::init_const<Real>({2 * c.action_dim}, Real(0));
    }

    struct Output {
        Var<Real> action;    // [B, A], strictly inside (-1, 1)
        Var<Real> log_prob;  // [B]
        Var<Real> mean;      // [B, A] pre-squash mean
        Var<Real> log_std;   // [B, A]
    };

    /// Reparameterized sample with externally supplied standard-normal noise.
    /// Pass zero noise for the deterministic mean action.
    Output forward(const Var<Real>& features, const Tensor<Real>& noise) const {
        using namespace sada::ad;
        const int B = features.value().dim(0), A = cfg.action_dim;
        if (!features.value().all_finite()) throw ContractError("act: non-finite features");
        if (noise.ndim() != 2 || noise.dim(0) != B || noise.dim(1) != A)
            throw ContractError("act: noise shape mismatch");
        auto h = relu(linear(features, w1, b1));
        h = relu(linear(h, w2, b2));
        auto out = linear(h, w3, b3);
        auto mu = slice_cols(out, 0, A);
        auto raw = slice_cols(out, A, 2 * A);
        // bounded log-std: lsmin + 0.5 (lsmax - lsmin) (tanh(raw) + 1)
        const Real lo = Real(cfg.log_std_min), hi = Real(cfg.log_std_max);
        auto log_std = add_scalar(scale(add_scalar(tanh_v(raw), Real(1)),
                                        Real(0.5) * (hi - lo)), lo);
        auto std_dev = exp_v(log_std);
        auto eps = Var<Real>::constant(noise);
        auto u = add(mu, mul(std_dev, eps));
        auto action = tanh_v(u);
        // log pi(a) = sum_d [ -eps^2/2 - log_std - log(2 pi)/2
        //                     - 2 log 2 + 2 u + 2 softplus(-2u) ]
        Tensor<Real> c0({B, A});
        for (int r = 0; r < B; ++r)
            for (int c = 0; c < A; ++c) {
                const Real e = noise.at(r, c);
                c0.at(r, c) = Real(-0.5) * e * e - Real(0.9189385332046727) -
                              Real(2) * Real(0.6931471805599453);
            }
        auto terms = add(sub(Var<Real>::constant(std::move(c0)), log_std),
                         add(scale(u, Real(2)), scale(softplus(scale(u, Real(-2))), Real(2))));
        Output o;
        o.action = action;
        o.log_prob = row_sum(terms);
        o.mean = mu;
        o.log_std = log_std;
        return o;
    }

    NamedParams<Real> named_params(const std::string& prefix) {
        return {{prefix + "fc1.w", &w1}, {prefix + "fc1.b", &b1},
                {prefix + "fc2.w", &w2}, {prefix + "fc2.b", &b2},
                {prefix + "head.w", &w3}, {prefix + "head.b", &b3}};
    }
};

enum class ActMode { sample, mean };

/// (action batch, log-prob batch) per the requested mode.
template <class Real>
std::pair<Tensor<Real>, Tensor<Real>> act(const Actor<Real>& actor, const Var<Real>& features,
                                          ActMode mode, Rng* rng = nullptr) {
    const int B = features.value().dim(0), A = actor.cfg.action_dim;
    Tensor<Real> noise({B, A});
    if (mode == ActMode::sample) {
        if (!rng) throw ContractError("act: sample mode requires an rng");
        for (auto& v : noise.data) v = Real(rng->normal());
    }
    ad::NoGradGuard ng;
    auto out = actor.forward(features, noise);
    return {out.action.value(), out.log_prob.value()};
}

/// Exact log-density of the squashed Gaussian at an arbitrary action.
/// Used by integration checks; plain double math, no graph.
inline double squashed_gaussian_log_prob(const std::vector<double>& mu,
                                         const std::vector<double>& log_std,
                                         const std::vector<double>& action) {
    double lp = 0;
    for (std::size_t d = 0; d < mu.size(); ++d) {
        const double a = std::clamp(action[d], -1.0 + 1e-12, 1.0 - 1e-12);
        const double u = std::atanh(a);
        const double s = std::exp(log_std[d]);
        const double z = (u - mu[d]) / s;
        lp += -0.5 * z * z - log_std[d] - 0.9189385332046727;
        lp -= std::log1p(-a * a);
    }
    return lp;
}

/// Twin Q-heads over (feature, action).
template <class Real>
struct Critic {
    NetConfig cfg;
    Var<Real> q1_w1, q1_b1, q1_w2, q1_b2, q1_w3, q1_b3;
    Var<Real> q2_w1, q2_b1, q2_w2, q2_b2, q2_w3, q2_b3;

    Critic() = default;
    Critic(const NetConfig& c, Rng& rng) : cfg(c) {
        const int in = c.features_dim + c.action_dim, H = c.hidden_dim;
        auto mk = [&](Var<Real>& w1_, Var<Real>& b1_, Var<Real>& w2_, Var<Real>& b2_,
                      Var<Real>& w3_, Var<Real>& b3_) {
            w1_ = detail::init_weight<Real>({H, in}, std::sqrt(2.0 / in), rng);
            b1_ = detail::init_const<Real>({H}, Real(0));
            w2_ = detail::init_weight<Real>({H, H}, std::sqrt(2.0 / H), rng);
            b2_ = detail::init_const<Real>({H}, Real(0));
            w3_ = detail::init_weight<Real>({1, H}, 1e-2, rng);
            b3_ = detail::init_const<Real>({1}, Real(0));
        };
        mk(q1_w1, q1_b1, q1_w2, q1_b2, q1_w3, q1_b3);
        mk(q2_w1, q2_b1, q2_w2, q2_b2, q2_w3, q2_b3);
    }

    /// (q1 [B], q2 [B]); both heads always see identical inputs.
    std::pair<Var<Real>, Var<Real>> forward(const Var<Real>& features,
                                            const Var<Real>& actions) const {
        using namespace sada::ad;
        if (features.value().dim(0) != actions.value().dim(0))
            throw ContractError("critic: feature/action batch mismatch");
        auto x = concat_cols(features, actions);
        const int B = x.value().dim(0);
        auto head = [&](const Var<Real>& w1_, const Var<Real>& b1_, const Var<Real>& w2_,
                        const Var<Real>& b2_, const Var<Real>& w3_, const Var<Real>& b3_) {
            auto h = relu(linear(x, w1_, b1_));
            h = relu(linear(h, w2_, b2_));
            return reshape(linear(h, w3_, b3_), {B});
        };
        return {head(q1_w1, q1_b1, q1_w2, q1_b2, q1_w3, q1_b3),
                head(q2_w1, q2_b1, q2_w2, q2_b2, q2_w3, q2_b3)};
    }

    NamedParams<Real> named_params(const std::string& prefix) {
        return {{prefix + "q1.fc1.w", &q1_w1}, {prefix + "q1.fc1.b", &q1_b1},
                {prefix + "q1.fc2.w", &q1_w2}, {prefix + "q1.fc2.b", &q1_b2},
                {prefix + "q1.out.w", &q1_w3}, {prefix + "q1.out.b", &q1_b3},
                {prefix + "q2.fc1.w", &q2_w1}, {prefix + "q2.fc1.b", &q2_b1},
                {prefix + "q2.fc2.w", &q2_w2}, {prefix + "q2.fc2.b", &q2_b2},
                {prefix + "q2.out.w", &q2_w3}, {prefix + "q2.out.b", &q2_b3}};
    }
};

template <class Real>
std::pair<Var<Real>, Var<Real>> q_values(const Critic<Real>& critic, const Var<Real>& features,
                                         const Var<Real>& actions) {
    return critic.forward(features, actions);
}

/// target <- (1 - tau) * target + tau * online, elementwise over all critic
/// parameters. The only way target parameters ever change.
template <class Real>
void ema_update(Critic<Real>& target, Critic<Real>& online, double tau) {
    if (!(tau > 0.0) || tau > 1.0) throw RangeError("ema_update: tau must be in (0, 1]");
    auto tp = target.named_params("");
    auto op = online.named_params("");
    for (std::size_t i = 0; i < tp.size(); ++i) {
        auto& tv = tp[i].second->value();
        const auto& ov = op[i].second->value();
        for (std::size_t j = 0; j < tv.data.size(); ++j)
            tv.data[j] = Real((1.0 - tau) * double(tv.data[j]) + tau * double(ov.data[j]));
    }
}

/// Full parameter bundle for one agent. The target critic starts as a copy of
/// the online critic and is never registered with an optimizer.
template <class Real>
struct AgentNets {
    NetConfig cfg;
    Encoder<Real> encoder;
    Actor<Real> actor;
    Critic<Real> critic;
    Critic<Real> target_critic;
    Var<Real> log_alpha;
    double target_entropy = -2.0;

    AgentNets() = default;
    AgentNets(const NetConfig& c, Rng& rng, double init_temperature = 0.1)
        : cfg(c), encoder(c, rng), actor(c, rng), critic(c, rng), target_critic(c, rng) {
        // target starts equal to the online critic
        auto tp = target_critic.named_params("");
        auto op = critic.named_params("");
        for (std::size_t i = 0; i < tp.size(); ++i)
            tp[i].second->value() = op[i].second->value();
        log_alpha = Var<Real>::leaf(Tensor<Real>::scalar(Real(std::log(init_temperature))), true);
        target_entropy = -double(c.action_dim);
    }

    double alpha() const { return std::exp(double(log_alpha.value()[0])); }

    NamedParams<Real> named_params() {
        NamedParams<Real> all;
        for (auto& p : encoder.named_params("encoder.")) all.push_back(p);
        for (auto& p : actor.named_params("actor.")) all.push_back(p);
        for (auto& p : critic.named_params("critic.")) all.push_back(p);
        for (auto& p : target_critic.named_params("target_critic.")) all.push_back(p);
        all.push_back({"temperature.log_alpha", &log_alpha});
        return all;
    }

    std::uint64_t params_hash() {
        std::uint64_t h = 1469598103934665603ull;
        for (auto& [name, p] : named_params()) {
            h = fnv1a(name.data(), name.size(), h);
            h = fnv1a(p->value().data.data(), p->value().data.size() * sizeof(Real), h);
        }
        return h;
    }
};

/// Adam with the usual bias correction.
template <class Real>
class Adam {
  public:
    Adam() = default;
    Adam(std::vector<Var<Real>*> params, double lr, double beta1 = 0.9, double beta2 = 0.999,
         double eps = 1e-8)
        : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
        for (auto* p : params_) {
            m_.emplace_back(p->value().shape);
            v_.emplace_back(p->value().shape);
        }
    }

    void zero_grad() {
        for (auto* p : params_) p->zero_grad();
    }

    void step() {
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, double(t_));
        const double bc2 = 1.0 - std::pow(beta2_, double(t_));
        for (std::size_t i = 0; i < params_.size(); ++i) {
            auto& val = params_[i]->value();
            auto& g = params_[i]->grad();
            for (std::size_t j = 0; j < val.data.size(); ++j) {
                const double gj = double(g.data[j]);
                double mj = beta1_ * double(m_[i].data[j]) + (1 - beta1_) * gj;
                double vj = beta2_ * double(v_[i].data[j]) + (1 - beta2_) * gj * gj;
                m_[i].data[j] = Real(mj);
                v_[i].data[j] = Real(vj);
                val.data[j] -= Real(lr_ * (mj / bc1) / (std::sqrt(vj / bc2) + eps_));
            }
        }
    }

    long long step_count() const { return t_; }
    const std::vector<Tensor<Real>>& moment1() const { return m_; }
    const std::vector<Tensor<Real>>& moment2() const { return v_; }
    void restore(std::vector<Tensor<Real>> m, std::vector<Tensor<Real>> v, long long t) {
        m_ = std::move(m);
        v_ = std::move(v);
        t_ = t;
    }

  private:
    std::vector<Var<Real>*> params_;
    std::vector<Tensor<Real>> m_, v_;
    double lr_ = 1e-3, beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
    long long t_ = 0;
};

}  // namespace sada::nets
