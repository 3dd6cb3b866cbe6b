// Copyright (c) 2026 The sada authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cstring>
#include <filesystem>

#include "oracles/oracles.hpp"
#include "sada/replay.hpp"

using namespace sada;
using replay::ReplayBuffer;

namespace {

envs::Observation make_obs(int channels, int size, std::uint8_t fill) {
    envs::Observation o;
    o.frame_stack = channels / 3;
    o.size = size;
    o.pixels.assign(std::size_t(channels) * size * size, fill);
    return o;
}

}  // namespace

TEST_CASE("empty buffer, then FIFO overwrite once full") {
    ReplayBuffer buf(4, 3, 4, 2);
    CHECK(buf.size() == 0);
    Rng rng(1);
    CHECK_THROWS_AS(buf.sample_indices(1, rng), InsufficientDataError);

    for (int i = 0; i < 5; ++i)
        buf.push(make_obs(3, 4, std::uint8_t(i)), {float(i), 0.f}, float(i),
                 make_obs(3, 4, std::uint8_t(i + 100)), 0.99f);
    CHECK(buf.size() == 4);
    // slot 0 was overwritten by item 4: item 0 is gone
    CHECK(buf.raw_obs(0)[0] == 4);
    CHECK(buf.raw_reward(0) == 4.0f);
    // items 1..3 still present in their original slots
    for (int i = 1; i < 4; ++i) CHECK(buf.raw_obs(i)[0] == i);
}

TEST_CASE("pushed transitions round-trip bit-identically") {
    ReplayBuffer buf(8, 6, 5, 2);
    Rng rng(7);
    envs::Observation obs = make_obs(6, 5, 0), next = make_obs(6, 5, 0);
    for (auto& p : obs.pixels) p = std::uint8_t(rng.uniform_index(256));
    for (auto& p : next.pixels) p = std::uint8_t(rng.uniform_index(256));
    buf.push(obs, {0.25f, -0.75f}, 0.125f, next, 0.99f);
    CHECK(std::memcmp(buf.raw_obs(0), obs.pixels.data(), obs.pixels.size()) == 0);
    CHECK(std::memcmp(buf.raw_next_obs(0), next.pixels.data(), next.pixels.size()) == 0);
    CHECK(buf.raw_action(0)[0] == 0.25f);
    CHECK(buf.raw_action(0)[1] == -0.75f);
    CHECK(buf.raw_reward(0) == 0.125f);
    CHECK(buf.raw_discount(0) == 0.99f);

    // sampling converts to unit-interval reals
    auto batch = buf.sample<float>(2, rng);
    CHECK(batch.obs.data[0] == doctest::Approx(obs.pixels[0] / 255.0).epsilon(1e-7));
}

TEST_CASE("single stored item can be drawn many times") {
    ReplayBuffer buf(16, 3, 4, 2);
    buf.push(make_obs(3, 4, 9), {0.5f, 0.5f}, 1.0f, make_obs(3, 4, 10), 0.0f);
    Rng rng(3);
    auto batch = buf.sample<float>(4, rng);
    CHECK(batch.size() == 4);
    for (int r = 0; r < 4; ++r) {
        CHECK(batch.rewards[r] == 1.0f);
        CHECK(batch.discounts[r] == 0.0f);
        CHECK(batch.obs.at(r, 0, 0, 0) == doctest::Approx(9.0 / 255.0));
    }
}

TEST_CASE("sampling is deterministic under a fixed seed") {
    ReplayBuffer buf(32, 3, 4, 2);
    for (int i = 0; i < 20; ++i)
        buf.push(make_obs(3, 4, std::uint8_t(i)), {0.f, 0.f}, 0.f, make_obs(3, 4, 0), 0.99f);
    Rng a(11), b(11);
    CHECK(buf.sample_indices(64, a) == buf.sample_indices(64, b));
}

TEST_CASE("uniformity: chi-square over 100k draws from a 10-item buffer") {
    ReplayBuffer buf(10, 3, 4, 2);
    for (int i = 0; i < 10; ++i)
        buf.push(make_obs(3, 4, std::uint8_t(i)), {0.f, 0.f}, 0.f, make_obs(3, 4, 0), 0.99f);
    Rng rng(2026);
    const int n = 100000;
    std::vector<int> counts(10, 0);
    for (std::int64_t idx : buf.sample_indices(n, rng)) counts[std::size_t(idx)]++;
    double chi2 = 0;
    const double expected = n / 10.0;
    for (int c : counts) chi2 += (c - expected) * (c - expected) / expected;
    CHECK(chi2 < oracles::chisquare_crit_df9_p01());  // p > 0.01
}

TEST_CASE("snapshot to archive and back preserves contents") {
    namespace fs = std::filesystem;
    ReplayBuffer buf(8, 3, 4, 2);
    Rng rng(5);
    for (int i = 0; i < 6; ++i) {
        auto obs = make_obs(3, 4, 0);
        for (auto& p : obs.pixels) p = std::uint8_t(rng.uniform_index(256));
        buf.push(obs, {float(i) / 7, -0.5f}, float(i), make_obs(3, 4, std::uint8_t(i)), 0.99f);
    }
    const std::string path = (fs::temp_directory_path() / "buf_snapshot.sada").string();
    {
        ArchiveWriter w(path);
        buf.save(w);
        w.save();
    }
    ArchiveReader r(path);
    ReplayBuffer loaded = ReplayBuffer::load(r);
    CHECK(loaded.size() == buf.size());
    for (int i = 0; i < 6; ++i) {
        CHECK(std::memcmp(loaded.raw_obs(i), buf.raw_obs(i), 48) == 0);
        CHECK(loaded.raw_reward(i) == buf.raw_reward(i));
        CHECK(loaded.raw_action(i)[0] == buf.raw_action(i)[0]);
    }
    fs::remove(path);
}
