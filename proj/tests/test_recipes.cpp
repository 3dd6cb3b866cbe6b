// Copyright (c) 2026 The sada authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include "oracles/net_reference.hpp"
#include "sada/recipes.hpp"

using namespace sada;
using namespace sada::recipes;
using nets::AgentNets;
using nets::NetConfig;

namespace {

NetConfig tiny_cfg() {
    NetConfig c;
    c.obs_channels = 3;
    c.obs_size = 16;
    c.conv_filters = 4;
    c.features_dim = 8;
    c.hidden_dim = 16;
    c.action_dim = 2;
    return c;
}

template <class Real>
TransitionBatch<Real> synthetic_batch(int n, const NetConfig& c, Rng& rng, double gamma = 0.99) {
    TransitionBatch<Real> b;
    b.obs = Tensor<Real>({n, c.obs_channels, c.obs_size, c.obs_size});
    b.next_obs = Tensor<Real>({n, c.obs_channels, c.obs_size, c.obs_size});
    b.actions = Tensor<Real>({n, c.action_dim});
    b.rewards = Tensor<Real>({n});
    b.discounts = Tensor<Real>({n});
    for (auto& v : b.obs.data) v = Real(rng.uniform());
    for (auto& v : b.next_obs.data) v = Real(rng.uniform());
    for (auto& v : b.actions.data) v = Real(rng.uniform(-0.9, 0.9));
    for (auto& v : b.rewards.data) v = Real(rng.uniform());
    for (auto& v : b.discounts.data) v = Real(gamma);
    return b;
}

/// Everything one update step needs, owned together so recipes can be
/// compared under identical randomness.
struct Harness {
    AgentNets<double> nets;
    nets::Adam<double> critic_opt, actor_opt, alpha_opt;
    RngStreams rngs;
    UpdateContext<double> ctx;

    explicit Harness(const std::string& recipe_name,
                     std::vector<augment::AugmentationSpec> pool, std::uint64_t seed = 1)
        : rngs(seed) {
        Rng init(99);
        nets = AgentNets<double>(tiny_cfg(), init, 0.1);
        std::vector<nets::Var<double>*> cp, ap;
        for (auto& [n, p] : nets.encoder.named_params("")) cp.push_back(p);
        for (auto& [n, p] : nets.critic.named_params("")) cp.push_back(p);
        for (auto& [n, p] : nets.actor.named_params("")) ap.push_back(p);
        critic_opt = nets::Adam<double>(cp, 1e-3);
        actor_opt = nets::Adam<double>(ap, 1e-3);
        alpha_opt = nets::Adam<double>({&nets.log_alpha}, 1e-3);
        ctx.nets = &nets;
        ctx.critic_opt = &critic_opt;
        ctx.actor_opt = &actor_opt;
        ctx.alpha_opt = &alpha_opt;
        ctx.rngs = &rngs;
        ctx.recipe = make_recipe(recipe_name, std::move(pool));
    }

    std::vector<double> flat_params() {
        std::vector<double> out;
        for (auto& [n, p] : nets.named_params())
            out.insert(out.end(), p->value().data.begin(), p->value().data.end());
        return out;
    }
};

std::vector<augment::AugmentationSpec> identity_pool() {
    return {augment::make_spec(augment::AugName::identity)};
}

double max_abs(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

}  // namespace

TEST_CASE("recipe matrix matches the published ablation grid") {
    auto pool = identity_pool();
    auto check = [&](const char* name, AugMode actor, AugMode online, AugMode target) {
        auto r = make_recipe(name, pool);
        CHECK(r.actor_aug == actor);
        CHECK(r.critic_online_aug == online);
        CHECK(r.critic_target_aug == target);
    };
    check("drq", AugMode::none, AugMode::none, AugMode::none);
    check("drq_aug", AugMode::naive, AugMode::naive, AugMode::naive);
    check("svea", AugMode::none, AugMode::selective, AugMode::none);
    check("sada", AugMode::selective, AugMode::selective, AugMode::none);
    check("sada_naive_actor", AugMode::naive, AugMode::selective, AugMode::none);
    check("sada_naive_critic", AugMode::selective, AugMode::naive, AugMode::naive);
    check("sada_no_critic_aug", AugMode::selective, AugMode::none, AugMode::none);
    CHECK_THROWS_AS(make_recipe("svea2", pool), InvalidSpecError);
}

TEST_CASE("pack/unpack round-trips bit-identically") {
    Rng rng(4);
    for (int trial = 0; trial < 8; ++trial) {
        const int n = 1 + int(rng.uniform_index(5));
        Tensor<double> a({n, 3, 5, 5}), b({n, 3, 5, 5});
        for (auto& v : a.data) v = rng.normal();
        for (auto& v : b.data) v = rng.normal();
        auto p = pack(a, b);
        CHECK(p.tagged());
        CHECK(p.half == n);
        auto [ra, rb] = unpack(p);
        CHECK(ra.data == a.data);
        CHECK(rb.data == b.data);
    }
    PackedBatch<double> untagged;
    untagged.data = Tensor<double>({4, 2});
    untagged.half = 0;
    CHECK_THROWS_AS(unpack(untagged), ContractError);
}

TEST_CASE("pack_actor_streams: ordering, shared weak draw, m duplication") {
    Rng rng(5);
    const auto cfg = tiny_cfg();
    Tensor<double> obs({2, cfg.obs_channels, cfg.obs_size, cfg.obs_size});
    for (auto& v : obs.data) v = rng.uniform();

    RecipeConfig rc = make_recipe("sada", identity_pool());
    Rng strong(7);
    auto s = pack_actor_streams(obs, strong, rc);
    // identity pool: p's halves identical and p == m
    auto [p_clean, p_aug] = unpack(s.p);
    CHECK(p_clean.data == obs.data);
    CHECK(p_aug.data == obs.data);
    CHECK(s.p.data.data == s.m.data.data);
    CHECK(s.m.halves_identical);

    // row order (o1, o2, a1, a2) with a real augmentation
    RecipeConfig shift_rc = make_recipe("sada", {augment::make_spec(augment::AugName::shift)});
    Rng strong2(11);
    auto s2 = pack_actor_streams(obs, strong2, shift_rc);
    auto [clean2, aug2] = unpack(s2.p);
    CHECK(clean2.data == obs.data);  // clean halves in rows [0, N)
    CHECK(aug2.data != obs.data);
    auto [m1, m2] = unpack(s2.m);
    CHECK(m1.data == obs.data);
    CHECK(m2.data == obs.data);  // m halves bit-identical for any pool
}

TEST_CASE("actor loss: identity pool equals plain SAC loss on the doubled batch") {
    Harness h("sada", identity_pool());
    Rng rng(6);
    auto batch = synthetic_batch<double>(3, tiny_cfg(), rng);
    Tensor<double> obs_w = batch.obs;

    Rng strong(3);
    auto s = pack_actor_streams(obs_w, strong, h.ctx.recipe);
    Tensor<double> noise({3, 2});
    Rng nrng(8);
    for (auto& v : noise.data) v = nrng.normal();
    auto packed = actor_loss_sada(h.nets, s.p, s.m, tile_rows(noise), 0.1);
    auto plain = actor_loss_plain(h.nets, obs_w, noise, 0.1);
    CHECK(packed.loss.value()[0] == doctest::Approx(plain.loss.value()[0]).epsilon(1e-12));
}

TEST_CASE("actor loss: zero gradient on critic and encoder, nonzero on actor") {
    Harness h("sada", identity_pool());
    Rng rng(7);
    auto batch = synthetic_batch<double>(2, tiny_cfg(), rng);
    Rng strong(3);
    auto s = pack_actor_streams(batch.obs, strong, h.ctx.recipe);
    Tensor<double> noise({4, 2});
    Rng nrng(9);
    for (auto& v : noise.data) v = nrng.normal();

    for (auto& [n, p] : h.nets.named_params()) p->zero_grad();
    auto res = actor_loss_sada(h.nets, s.p, s.m, noise, 0.1);
    res.loss.backward();

    for (auto& [n, p] : h.nets.critic.named_params(""))
        CHECK(double(l2_norm(p->grad())) == 0.0);
    for (auto& [n, p] : h.nets.encoder.named_params(""))
        CHECK(double(l2_norm(p->grad())) == 0.0);
    double actor_grad = 0;
    for (auto& [n, p] : h.nets.actor.named_params("")) actor_grad += double(l2_norm(p->grad()));
    CHECK(actor_grad > 0.0);
}

TEST_CASE("actor loss value matches the scalar trace") {
    Harness h("sada", {augment::make_spec(augment::AugName::shift)});
    Rng rng(8);
    auto batch = synthetic_batch<double>(2, tiny_cfg(), rng);
    Rng strong(13);
    auto s = pack_actor_streams(batch.obs, strong, h.ctx.recipe);
    Tensor<double> noise({4, 2});
    Rng nrng(10);
    for (auto& v : noise.data) v = nrng.normal();
    auto res = actor_loss_sada(h.nets, s.p, s.m, noise, 0.17);
    const double ref = oracles::sada_actor_loss_ref(h.nets, s.p.data, s.m.data, noise, 0.17);
    CHECK(res.loss.value()[0] == doctest::Approx(ref).epsilon(1e-9));
}

TEST_CASE("actor loss rejects untagged batches") {
    Harness h("sada", identity_pool());
    PackedBatch<double> bad;
    bad.data = Tensor<double>({4, 3, 16, 16});
    bad.half = 0;
    Tensor<double> noise({4, 2});
    CHECK_THROWS_AS(actor_loss_sada(h.nets, bad, bad, noise, 0.1), ContractError);
}

TEST_CASE("temperature loss: stationarity, analytic gradient, positivity") {
    auto log_alpha = nets::Var<double>::leaf(Tensor<double>::scalar(std::log(0.1)), true);
    const double target_entropy = -2.0;

    // L = -alpha (mean_lp + H); the gradient vanishes when log_prob == -H
    Tensor<double> stationary({4}, -target_entropy);
    log_alpha.zero_grad();
    auto l0 = temperature_loss(stationary, log_alpha, target_entropy);
    l0.backward();
    CHECK(log_alpha.grad()[0] == doctest::Approx(0.0).epsilon(1e-12));

    // analytic derivative dL/dalpha = -(mean_lp + H), mapped through the log
    // parameterization: dL/d(log alpha) = -alpha (mean_lp + H)
    Tensor<double> low({4}, -5.0);
    log_alpha.zero_grad();
    auto l1 = temperature_loss(low, log_alpha, target_entropy);
    l1.backward();
    const double analytic = -std::exp(std::log(0.1)) * (-5.0 + target_entropy);
    CHECK(log_alpha.grad()[0] == doctest::Approx(analytic).epsilon(1e-12));
    CHECK(log_alpha.grad()[0] > 0.0);  // entropy above target pushes alpha down

    // alpha parameterized by its log stays positive after any update
    nets::Adam<double> opt({&log_alpha}, 0.5);
    for (int i = 0; i < 50; ++i) {
        opt.zero_grad();
        auto l = temperature_loss(low, log_alpha, target_entropy);
        l.backward();
        opt.step();
        CHECK(std::exp(log_alpha.value()[0]) > 0.0);
    }
}

TEST_CASE("q-target: forced arithmetic and terminal transitions") {
    Harness h("drq", identity_pool());
    // force both target heads to output exactly 2 for any input
    for (auto& [n, p] : h.nets.target_critic.named_params("")) p->value().fill(0.0);
    h.nets.target_critic.q1_b3.value().fill(2.0);
    h.nets.target_critic.q2_b3.value().fill(2.0);

    Rng rng(9);
    auto batch = synthetic_batch<double>(3, tiny_cfg(), rng);
    batch.rewards.fill(1.0);
    batch.discounts.fill(0.99);
    Tensor<double> noise({3, 2});
    auto y = q_target_sac(h.nets, batch.next_obs, batch.rewards, batch.discounts,
                          /*alpha=*/0.0, noise);
    for (int i = 0; i < 3; ++i) CHECK(y[i] == doctest::Approx(2.98).epsilon(1e-12));

    batch.discounts.fill(0.0);  // terminal
    auto y0 = q_target_sac(h.nets, batch.next_obs, batch.rewards, batch.discounts, 0.0, noise);
    for (int i = 0; i < 3; ++i) CHECK(y0[i] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("q-target matches the scalar trace with a real critic") {
    Harness h("drq", identity_pool());
    Rng rng(10);
    auto batch = synthetic_batch<double>(3, tiny_cfg(), rng);
    Tensor<double> noise({3, 2});
    Rng nrng(5);
    for (auto& v : noise.data) v = nrng.normal();
    auto y = q_target_sac(h.nets, batch.next_obs, batch.rewards, batch.discounts, 0.07, noise);
    auto ref = oracles::q_target_sac_ref(h.nets, batch.next_obs, batch.rewards, batch.discounts,
                                         0.07, noise);
    for (int i = 0; i < 3; ++i) CHECK(y[i] == doctest::Approx(ref[std::size_t(i)]).epsilon(1e-9));
}

TEST_CASE("greedy-max target matches the exhaustive grid oracle") {
    Harness h("drq", identity_pool());
    Rng rng(11);
    auto batch = synthetic_batch<double>(3, tiny_cfg(), rng);
    auto y = q_target_greedy(h.nets, batch.next_obs, batch.rewards, batch.discounts, 7);
    auto ref =
        oracles::q_target_greedy_ref(h.nets, batch.next_obs, batch.rewards, batch.discounts, 7);
    for (int i = 0; i < 3; ++i) CHECK(y[i] == doctest::Approx(ref[std::size_t(i)]).epsilon(1e-9));
    CHECK_THROWS_AS(q_target_greedy(h.nets, batch.next_obs, batch.rewards, batch.discounts, 1),
                    RangeError);
}

TEST_CASE("critic loss: y duplication and identity-pool equivalence") {
    Harness h("sada", identity_pool());
    Rng rng(12);
    auto batch = synthetic_batch<double>(3, tiny_cfg(), rng);
    Tensor<double> q_tgt({3});
    for (int i = 0; i < 3; ++i) q_tgt[i] = 0.3 * i;

    auto y2 = tile_rows(q_tgt);
    for (int i = 0; i < 3; ++i) CHECK(y2[i] == y2[i + 3]);

    Rng strong(3);
    auto res = critic_loss_sada(h.nets, batch.obs, batch.actions, q_tgt, strong, h.ctx.recipe);
    auto plain = critic_bellman_loss(h.nets, batch.obs, batch.actions, q_tgt);
    CHECK(res.loss.value()[0] == doctest::Approx(plain.value()[0]).epsilon(1e-12));
}

TEST_CASE("critic loss value matches the scalar trace") {
    Harness h("sada", {augment::make_spec(augment::AugName::conv)});
    Rng rng(13);
    auto batch = synthetic_batch<double>(2, tiny_cfg(), rng);
    Tensor<double> q_tgt({2});
    q_tgt[0] = 0.4;
    q_tgt[1] = -0.1;
    Rng strong(21);
    auto [aug, draws] =
        augment::sample_strong_batch(batch.obs, h.ctx.recipe.strong_pool, strong);
    auto p = pack(batch.obs, aug);
    auto loss = critic_bellman_loss(h.nets, p.data, tile_rows(batch.actions), tile_rows(q_tgt));
    const double ref =
        oracles::critic_loss_ref(h.nets, p.data, tile_rows(batch.actions), tile_rows(q_tgt));
    CHECK(loss.value()[0] == doctest::Approx(ref).epsilon(1e-9));
}

TEST_CASE("critic update: gradients flow into encoder and critic") {
    Harness h("drq", identity_pool());
    Rng rng(14);
    auto batch = synthetic_batch<double>(3, tiny_cfg(), rng);
    Tensor<double> q_tgt({3}, 0.5);
    for (auto& [n, p] : h.nets.named_params()) p->zero_grad();
    auto loss = critic_bellman_loss(h.nets, batch.obs, batch.actions, q_tgt);
    loss.backward();
    double enc = 0, cri = 0, act = 0;
    for (auto& [n, p] : h.nets.encoder.named_params("")) enc += double(l2_norm(p->grad()));
    for (auto& [n, p] : h.nets.critic.named_params("")) cri += double(l2_norm(p->grad()));
    for (auto& [n, p] : h.nets.actor.named_params("")) act += double(l2_norm(p->grad()));
    CHECK(enc > 0.0);
    CHECK(cri > 0.0);
    CHECK(act == 0.0);
}

TEST_CASE("update routing: parameter sets touched per update type") {
    Harness h("sada", identity_pool());
    Rng rng(15);
    auto batch = synthetic_batch<double>(3, tiny_cfg(), rng);

    auto snapshot = [&](auto& module) {
        std::vector<double> out;
        for (auto& [n, p] : module.named_params(""))
            out.insert(out.end(), p->value().data.begin(), p->value().data.end());
        return out;
    };
    auto enc0 = snapshot(h.nets.encoder);
    auto cri0 = snapshot(h.nets.critic);
    auto tgt0 = snapshot(h.nets.target_critic);
    auto act0 = snapshot(h.nets.actor);
    const double alpha0 = h.nets.log_alpha.value()[0];

    critic_update(h.ctx, batch);
    CHECK(snapshot(h.nets.encoder) != enc0);
    CHECK(snapshot(h.nets.critic) != cri0);
    CHECK(snapshot(h.nets.target_critic) == tgt0);  // optimizer never touches the target
    CHECK(snapshot(h.nets.actor) == act0);
    CHECK(h.nets.log_alpha.value()[0] == alpha0);

    auto enc1 = snapshot(h.nets.encoder);
    auto cri1 = snapshot(h.nets.critic);
    actor_update_variant(h.ctx, batch);
    CHECK(snapshot(h.nets.encoder) == enc1);
    CHECK(snapshot(h.nets.critic) == cri1);
    CHECK(snapshot(h.nets.target_critic) == tgt0);
    CHECK(snapshot(h.nets.actor) != act0);
    CHECK(h.nets.log_alpha.value()[0] != alpha0);  // temperature folded into the actor tick

    auto tgt_before = snapshot(h.nets.target_critic);
    nets::ema_update(h.nets.target_critic, h.nets.critic, 0.01);
    CHECK(snapshot(h.nets.target_critic) != tgt_before);
}

TEST_CASE("svea actor update consumes zero strong draws") {
    Harness h("svea", {augment::make_spec(augment::AugName::shift)});
    Rng rng(16);
    auto batch = synthetic_batch<double>(3, tiny_cfg(), rng);
    const auto before = h.rngs.strong.draw_count();
    actor_update_variant(h.ctx, batch);
    CHECK(h.rngs.strong.draw_count() == before);
    // while the critic path does consume strong draws
    critic_update(h.ctx, batch);
    CHECK(h.rngs.strong.draw_count() > before);
}

TEST_CASE("target purity: selective modes never augment the target path") {
    for (const char* name : {"svea", "sada", "sada_naive_actor", "sada_no_critic_aug"}) {
        Harness h(name, {augment::make_spec(augment::AugName::rotate)});
        Rng rng(17);
        auto batch = synthetic_batch<double>(3, tiny_cfg(), rng);
        critic_update(h.ctx, batch);
        CHECK(h.rngs.strong_target.draw_count() == 0);
    }
    // the naive baseline does augment the target stream, with an independent rng
    Harness naive("drq_aug", {augment::make_spec(augment::AugName::rotate)});
    Rng rng(18);
    auto batch = synthetic_batch<double>(3, tiny_cfg(), rng);
    critic_update(naive.ctx, batch);
    CHECK(naive.rngs.strong_target.draw_count() > 0);
    CHECK(naive.rngs.strong.draw_count() > 0);
}

TEST_CASE("recipe reduction: identity pool collapses every recipe to the plain update") {
    Rng brng(19);
    auto batch = synthetic_batch<double>(3, tiny_cfg(), brng);

    Harness ref("drq", identity_pool());
    critic_update(ref.ctx, batch);
    actor_update_variant(ref.ctx, batch);
    auto base = ref.flat_params();

    for (const char* name : {"drq_aug", "svea", "sada", "sada_naive_actor",
                             "sada_naive_critic", "sada_no_critic_aug"}) {
        Harness h(name, identity_pool());
        critic_update(h.ctx, batch);
        actor_update_variant(h.ctx, batch);
        CHECK(max_abs(h.flat_params(), base) < 1e-6);
    }
}

TEST_CASE("finite-difference agreement of both losses on a tiny network") {
    Harness h("sada", identity_pool());
    Rng rng(20);
    auto batch = synthetic_batch<double>(2, tiny_cfg(), rng);
    Tensor<double> q_tgt({2});
    q_tgt[0] = 0.2;
    q_tgt[1] = -0.4;

    // L_Q through encoder + critic parameters
    auto eval_lq = [&] {
        return critic_bellman_loss(h.nets, batch.obs, batch.actions, q_tgt).value()[0];
    };
    for (auto& [n, p] : h.nets.named_params()) p->zero_grad();
    critic_bellman_loss(h.nets, batch.obs, batch.actions, q_tgt).backward();
    struct Probe {
        nets::Var<double>* param;
        std::int64_t idx;
    };
    std::vector<Probe> lq_probes{{&h.nets.encoder.w1, 5},
                                 {&h.nets.encoder.proj_w, 3},
                                 {&h.nets.critic.q1_w1, 11},
                                 {&h.nets.critic.q2_w2, 7}};
    for (auto& probe : lq_probes) {
        double& w = probe.param->value().data[std::size_t(probe.idx)];
        const double saved = w, step = 1e-6;
        w = saved + step;
        const double up = eval_lq();
        w = saved - step;
        const double down = eval_lq();
        w = saved;
        const double fd = (up - down) / (2 * step);
        const double analytic = probe.param->grad().data[std::size_t(probe.idx)];
        const double scale = std::max({1.0, std::abs(fd), std::abs(analytic)});
        CHECK(std::abs(fd - analytic) / scale < 1e-4);
    }

    // L_pi through actor parameters with frozen draws
    Rng strong(31);
    auto streams = pack_actor_streams(batch.obs, strong, h.ctx.recipe);
    Tensor<double> noise({4, 2});
    Rng nrng(32);
    for (auto& v : noise.data) v = nrng.normal();
    auto eval_lpi = [&] {
        return actor_loss_sada(h.nets, streams.p, streams.m, noise, 0.1).loss.value()[0];
    };
    for (auto& [n, p] : h.nets.named_params()) p->zero_grad();
    actor_loss_sada(h.nets, streams.p, streams.m, noise, 0.1).loss.backward();
    std::vector<Probe> lpi_probes{{&h.nets.actor.w1, 9}, {&h.nets.actor.w3, 2}};
    for (auto& probe : lpi_probes) {
        double& w = probe.param->value().data[std::size_t(probe.idx)];
        const double saved = w, step = 1e-6;
        w = saved + step;
        const double up = eval_lpi();
        w = saved - step;
        const double down = eval_lpi();
        w = saved;
        const double fd = (up - down) / (2 * step);
        const double analytic = probe.param->grad().data[std::size_t(probe.idx)];
        const double scale = std::max({1.0, std::abs(fd), std::abs(analytic)});
        CHECK(std::abs(fd - analytic) / scale < 1e-4);
    }
}
