// Copyright (c) 2026 The sada authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "sada/archive.hpp"
#include "sada/envs.hpp"
#include "sada/recipes.hpp"
#include "sada/rng.hpp"

namespace sada::replay {

/// Fixed-capacity FIFO transition store with uniform sampling (with
/// replacement). Observations are stored as raw 8-bit renders; augmentation
/// happens at sampling time, never here. Storage grows lazily toward the
/// configured capacity.
class ReplayBuffer {
  public:
    ReplayBuffer(std::int64_t capacity, int channels, int size, int action_dim)
        : capacity_(capacity), channels_(channels), img_size_(size), action_dim_(action_dim) {
        if (capacity < 1) throw InvalidSpecError("replay capacity must be positive");
        obs_bytes_ = std::int64_t(channels) * size * size;
    }

    std::int64_t size() const { return size_; }
    std::int64_t capacity() const { return capacity_; }
    int channels() const { return channels_; }
    int image_size() const { return img_size_; }
    int action_dim() const { return action_dim_; }

    void push(const envs::Observation& obs, const std::vector<float>& action, float reward,
              const envs::Observation& next_obs, float discount) {
        if (std::int64_t(obs.pixels.size()) != obs_bytes_ ||
            std::int64_t(next_obs.pixels.size()) != obs_bytes_)
            throw ContractError("replay push: observation size mismatch");
        if (int(action.size()) != action_dim_)
            throw ContractError("replay push: action size mismatch");
        const std::int64_t slot = cursor_;
        ensure_slot(slot);
        std::copy(obs.pixels.begin(), obs.pixels.end(), obs_store_.begin() + slot * obs_bytes_);
        std::copy(next_obs.pixels.begin(), next_obs.pixels.end(),
                  next_store_.begin() + slot * obs_bytes_);
        std::copy(action.begin(), action.end(), actions_.begin() + slot * action_dim_);
        rewards_[std::size_t(slot)] = reward;
        discounts_[std::size_t(slot)] = discount;
        cursor_ = (cursor_ + 1) % capacity_;
        if (size_ < capacity_) ++size_;
    }

    /// n uniform draws with replacement; deterministic under a fixed rng.
    std::vector<std::int64_t> sample_indices(int n, Rng& rng) const {
        if (size_ == 0) throw InsufficientDataError("replay sample: buffer is empty");
        std::vector<std::int64_t> idx(static_cast<std::size_t>(n));
        for (auto& i : idx) i = std::int64_t(rng.uniform_index(std::uint64_t(size_)));
        return idx;
    }

    template <class Real>
    recipes::TransitionBatch<Real> gather(const std::vector<std::int64_t>& idx) const {
        recipes::TransitionBatch<Real> b;
        const int n = int(idx.size());
        b.obs = Tensor<Real>({n, channels_, img_size_, img_size_});
        b.next_obs = Tensor<Real>({n, channels_, img_size_, img_size_});
        b.actions = Tensor<Real>({n, action_dim_});
        b.rewards = Tensor<Real>({n});
        b.discounts = Tensor<Real>({n});
        for (int r = 0; r < n; ++r) {
            const std::int64_t i = idx[std::size_t(r)];
            if (i < 0 || i >= size_) throw ContractError("replay gather: index out of range");
            const std::uint8_t* o = obs_store_.data() + i * obs_bytes_;
            const std::uint8_t* no = next_store_.data() + i * obs_bytes_;
            Real* ob = b.obs.data.data() + std::int64_t(r) * obs_bytes_;
            Real* nob = b.next_obs.data.data() + std::int64_t(r) * obs_bytes_;
            for (std::int64_t j = 0; j < obs_bytes_; ++j) {
                ob[j] = Real(o[j]) / Real(255);
                nob[j] = Real(no[j]) / Real(255);
            }
            for (int a = 0; a < action_dim_; ++a)
                b.actions.at(r, a) = Real(actions_[std::size_t(i * action_dim_ + a)]);
            b.rewards[r] = Real(rewards_[std::size_t(i)]);
            b.discounts[r] = Real(discounts_[std::size_t(i)]);
        }
        return b;
    }

    template <class Real>
    recipes::TransitionBatch<Real> sample(int n, Rng& rng) const {
        return gather<Real>(sample_indices(n, rng));
    }

    // raw accessors for round-trip checks
    const std::uint8_t* raw_obs(std::int64_t i) const { return obs_store_.data() + i * obs_bytes_; }
    const std::uint8_t* raw_next_obs(std::int64_t i) const {
        return next_store_.data() + i * obs_bytes_;
    }
    float raw_reward(std::int64_t i) const { return rewards_[std::size_t(i)]; }
    float raw_discount(std::int64_t i) const { return discounts_[std::size_t(i)]; }
    const float* raw_action(std::int64_t i) const { return actions_.data() + i * action_dim_; }

    void save(ArchiveWriter& w, const std::string& prefix = "buffer.") const {
        w.put_scalar<std::int64_t>(prefix + "capacity", capacity_);
        w.put_scalar<std::int64_t>(prefix + "size", size_);
        w.put_scalar<std::int64_t>(prefix + "cursor", cursor_);
        w.put_scalar<std::int64_t>(prefix + "channels", channels_);
        w.put_scalar<std::int64_t>(prefix + "image_size", img_size_);
        w.put_scalar<std::int64_t>(prefix + "action_dim", action_dim_);
        const int n = int(size_);
        w.put(prefix + "obs", {n, channels_, img_size_, img_size_}, obs_store_.data(),
              std::size_t(size_ * obs_bytes_));
        w.put(prefix + "next_obs", {n, channels_, img_size_, img_size_}, next_store_.data(),
              std::size_t(size_ * obs_bytes_));
        w.put(prefix + "actions", {n, action_dim_}, actions_.data(),
              std::size_t(size_ * action_dim_));
        w.put(prefix + "rewards", {n}, rewards_.data(), std::size_t(size_));
        w.put(prefix + "discounts", {n}, discounts_.data(), std::size_t(size_));
    }

    static ReplayBuffer load(const ArchiveReader& r, const std::string& prefix = "buffer.") {
        ReplayBuffer buf(r.get_scalar<std::int64_t>(prefix + "capacity"),
                         int(r.get_scalar<std::int64_t>(prefix + "channels")),
                         int(r.get_scalar<std::int64_t>(prefix + "image_size")),
                         int(r.get_scalar<std::int64_t>(prefix + "action_dim")));
        buf.size_ = r.get_scalar<std::int64_t>(prefix + "size");
        buf.cursor_ = r.get_scalar<std::int64_t>(prefix + "cursor");
        buf.ensure_slot(buf.size_ - 1);
        auto obs = r.get_tensor<std::uint8_t>(prefix + "obs");
        auto nobs = r.get_tensor<std::uint8_t>(prefix + "next_obs");
        auto acts = r.get_tensor<float>(prefix + "actions");
        auto rews = r.get_tensor<float>(prefix + "rewards");
        auto discs = r.get_tensor<float>(prefix + "discounts");
        std::copy(obs.data.begin(), obs.data.end(), buf.obs_store_.begin());
        std::copy(nobs.data.begin(), nobs.data.end(), buf.next_store_.begin());
        std::copy(acts.data.begin(), acts.data.end(), buf.actions_.begin());
        std::copy(rews.data.begin(), rews.data.end(), buf.rewards_.begin());
        std::copy(discs.data.begin(), discs.data.end(), buf.discounts_.begin());
        return buf;
    }

  private:
    std::int64_t capacity_, size_ = 0, cursor_ = 0;
    int channels_, img_size_, action_dim_;
    std::int64_t obs_bytes_ = 0;
    std::vector<std::uint8_t> obs_store_, next_store_;
    std::vector<float> actions_, rewards_, discounts_;

    void ensure_slot(std::int64_t slot) {
        if (slot < 0) return;
        const std::size_t need = std::size_t(slot + 1);
        if (rewards_.size() >= need) return;
        const std::size_t grown =
            std::min<std::size_t>(std::size_t(capacity_),
                                  std::max<std::size_t>(need, rewards_.size() * 2 + 64));
        obs_store_.resize(grown * std::size_t(obs_bytes_));
        next_store_.resize(grown * std::size_t(obs_bytes_));
        actions_.resize(grown * std::size_t(action_dim_));
        rewards_.resize(grown);
        discounts_.resize(grown);
    }
};

}  // namespace sada::replay
