// Copyright (c) 2026 The sada authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cmath>
#include <deque>
#include <map>
#include <string>
#include <vector>

#include "sada/augment.hpp"
#include "sada/rng.hpp"
#include "sada/tensor.hpp"

namespace sada::envs {

// A 2-D point-goal reaching task rendered as colored shapes (red disc agent,
// green square goal) on a gradient background with a floor band. The floor
// band doubles as an orientation cue so that frame rotations are in principle
// invertible by a policy. All perturbation wrappers change rendering only;
// dynamics, actions, and rewards are untouched.

enum class Family { train, color, video, color_video, rotate, shift, rotate_shift };
enum class Level { easy, hard };

inline const char* to_string(Family f) {
    switch (f) {
        case Family::train: return "train";
        case Family::color: return "color";
        case Family::video: return "video";
        case Family::color_video: return "color_video";
        case Family::rotate: return "rotate";
        case Family::shift: return "shift";
        case Family::rotate_shift: return "rotate_shift";
    }
    return "?";
}

struct DistributionSpec {
    Family family = Family::train;
    Level level = Level::easy;
    std::map<std::string, double> parameters;  // optional intensity overrides
    std::uint64_t seed = 0;                    // perturbation stream seed base

    std::string name() const {
        if (family == Family::train) return "train";
        return std::string(to_string(family)) + (level == Level::easy ? "_easy" : "_hard");
    }
};

/// Parse "train", "<family>_easy" or "<family>_hard".
inline DistributionSpec parse_distribution(const std::string& s) {
    DistributionSpec spec;
    if (s == "train") return spec;
    auto match = [&](const std::string& prefix, Family f) {
        if (s == prefix + "_easy") {
            spec.family = f;
            spec.level = Level::easy;
            return true;
        }
        if (s == prefix + "_hard") {
            spec.family = f;
            spec.level = Level::hard;
            return true;
        }
        return false;
    };
    if (match("color", Family::color) || match("video", Family::video) ||
        match("color_video", Family::color_video) || match("rotate", Family::rotate) ||
        match("shift", Family::shift) || match("rotate_shift", Family::rotate_shift))
        return spec;
    throw InvalidSpecError("unknown distribution '" + s + "'");
}

/// Canonical ordering: train followed by the 12 test distributions.
inline std::vector<std::string> all_distribution_names() {
    return {"train",
            "rotate_easy", "rotate_hard",
            "shift_easy", "shift_hard",
            "rotate_shift_easy", "rotate_shift_hard",
            "color_easy", "color_hard",
            "video_easy", "video_hard",
            "color_video_easy", "color_video_hard"};
}

struct EnvConfig {
    int obs_size = 84;
    int frame_stack = 3;
    int episode_length = 200;  // agent steps, counted after action repeat
    int action_repeat = 2;
    double accel = 0.05;           // per-substep acceleration scale
    double friction = 0.6;         // velocity retention per substep
    double reward_scale = 3.0;     // r = exp(-reward_scale * distance)
    double success_radius = 0.1;   // closed ball
    double agent_radius = 0.085;   // render size, arena units
    double goal_half_side = 0.085;
    double min_separation = 0.3;
};

/// Stacked u8 observation, newest frame in channels [0,3).
struct Observation {
    int frame_stack = 0;
    int size = 0;
    std::vector<std::uint8_t> pixels;  // planar [3k, S, S]

    int channels() const { return 3 * frame_stack; }

    template <class Real>
    Tensor<Real> to_tensor() const {
        Tensor<Real> t({channels(), size, size});
        for (std::size_t i = 0; i < pixels.size(); ++i) t.data[i] = Real(pixels[i]) / Real(255);
        return t;
    }
};

struct StepResult {
    Observation obs;
    double reward = 0;
    bool done = false;
    std::map<std::string, double> info;
};

struct Palette {
    std::array<double, 3> bg_top{0.30, 0.50, 0.85};
    std::array<double, 3> bg_bottom{0.85, 0.90, 0.97};
    std::array<double, 3> floor{0.26, 0.21, 0.15};
    std::array<double, 3> agent{0.88, 0.12, 0.10};
    std::array<double, 3> goal{0.08, 0.75, 0.20};
    std::array<double, 3> sun{1.0, 0.92, 0.35};  // fixed beacon, orientation cue
};

/// Per-episode perturbation draws (fixed within an episode).
struct EpisodeDraw {
    double angle_deg = 0.0;
    int dx = 0, dy = 0;
    Palette palette;
    // video background parameters, one sinusoid component per channel
    double video_amp = 0.0;
    double video_omega = 0.0;
    std::array<double, 3> video_phase{};
    double video_fx = 2.0, video_fy = 2.0;
};

class PointGoalEnv {
  public:
    explicit PointGoalEnv(EnvConfig cfg = {}, DistributionSpec dist = {})
        : cfg_(cfg), dist_(dist) {
        if (cfg_.obs_size < 8) throw InvalidSpecError("obs_size too small");
        if (cfg_.frame_stack < 1) throw InvalidSpecError("frame_stack must be >= 1");
        resolve_intensities();
    }

    const EnvConfig& config() const { return cfg_; }
    const DistributionSpec& distribution() const { return dist_; }
    const EpisodeDraw& episode_draw() const { return draw_; }
    std::array<double, 2> agent_pos() const { return pos_; }
    std::array<double, 2> agent_vel() const { return vel_; }
    std::array<double, 2> goal_pos() const { return goal_; }
    int step_index() const { return step_idx_; }
    bool done() const { return done_; }

    Observation reset(std::uint64_t seed) {
        episode_rng_.reseed(mix_seed(seed, 0x01));
        perturb_rng_.reseed(mix_seed(seed ^ dist_.seed, 0xd1));
        pos_ = draw_position(episode_rng_);
        for (int tries = 0; tries < 256; ++tries) {
            goal_ = draw_position(episode_rng_);
            const double d = std::hypot(goal_[0] - pos_[0], goal_[1] - pos_[1]);
            if (d >= cfg_.min_separation) break;
        }
        vel_ = {0.0, 0.0};
        step_idx_ = 0;
        done_ = false;
        reached_ = distance() <= cfg_.success_radius;
        draw_episode_perturbation();
        frames_.clear();
        auto first = render_frame();
        for (int i = 0; i < cfg_.frame_stack; ++i) frames_.push_back(first);
        return stacked();
    }

    /// Reset to explicit positions (scripted-policy evaluation and tests).
    Observation reset_to(std::array<double, 2> agent, std::array<double, 2> goal,
                         std::uint64_t seed = 0) {
        Observation o = reset(seed);
        pos_ = agent;
        goal_ = goal;
        vel_ = {0.0, 0.0};
        reached_ = distance() <= cfg_.success_radius;
        frames_.clear();
        auto first = render_frame();
        for (int i = 0; i < cfg_.frame_stack; ++i) frames_.push_back(first);
        return stacked();
    }

    StepResult step(std::array<double, 2> action) {
        if (done_) throw ContractError("step called on a finished episode");
        if (frames_.empty()) throw ContractError("step called before reset");
        action[0] = std::clamp(action[0], -1.0, 1.0);
        action[1] = std::clamp(action[1], -1.0, 1.0);
        double reward_sum = 0;
        for (int rep = 0; rep < cfg_.action_repeat; ++rep) {
            vel_[0] = cfg_.friction * (vel_[0] + cfg_.accel * action[0]);
            vel_[1] = cfg_.friction * (vel_[1] + cfg_.accel * action[1]);
            pos_[0] = std::clamp(pos_[0] + vel_[0], kMargin, 1.0 - kMargin);
            pos_[1] = std::clamp(pos_[1] + vel_[1], kMargin, 1.0 - kMargin);
            const double d = distance();
            reward_sum += std::exp(-cfg_.reward_scale * d);
            if (d <= cfg_.success_radius) reached_ = true;
        }
        ++step_idx_;
        done_ = step_idx_ >= cfg_.episode_length;
        frames_.push_front(render_frame());
        frames_.pop_back();
        StepResult res;
        res.obs = stacked();
        res.reward = reward_sum / cfg_.action_repeat;
        res.done = done_;
        res.info["distance"] = distance();
        res.info["reached"] = reached_ ? 1.0 : 0.0;
        return res;
    }

    /// True iff the agent entered the closed success ball at any step.
    bool success() const {
        if (!done_) throw ContractError("success queried mid-episode");
        return reached_;
    }

    double distance() const { return std::hypot(goal_[0] - pos_[0], goal_[1] - pos_[1]); }

  private:
    static constexpr double kMargin = 0.08;

    EnvConfig cfg_;
    DistributionSpec dist_;
    Rng episode_rng_, perturb_rng_;
    std::array<double, 2> pos_{0.5, 0.5}, vel_{0, 0}, goal_{0.5, 0.5};
    int step_idx_ = 0;
    bool done_ = true;
    bool reached_ = false;
    EpisodeDraw draw_;
    std::deque<std::vector<std::uint8_t>> frames_;  // each [3,S,S] planar u8

    // resolved intensities
    double rot_max_deg_ = 0;
    int shift_max_px_ = 0;
    double color_jitter_ = 0;
    bool color_full_ = false;
    double video_amp_base_ = 0, video_omega_base_ = 0;

    static std::uint64_t mix_seed(std::uint64_t s, std::uint64_t salt) {
        std::uint64_t z = s + 0x9e3779b97f4a7c15ull * (salt + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        return z ^ (z >> 31);
    }

    double param_or(const std::string& key, double fallback) const {
        auto it = dist_.parameters.find(key);
        return it == dist_.parameters.end() ? fallback : it->second;
    }

    void resolve_intensities() {
        const bool hard = dist_.level == Level::hard;
        const double px_scale = cfg_.obs_size / 84.0;
        switch (dist_.family) {
            case Family::train: break;
            case Family::rotate:
                rot_max_deg_ = param_or("max_rotate_deg", hard ? 180.0 : 45.0);
                break;
            case Family::shift:
                shift_max_px_ = int(param_or(
                    "max_shift_px", std::round((hard ? 16.0 : 8.0) * px_scale)));
                break;
            case Family::rotate_shift:
                rot_max_deg_ = param_or("max_rotate_deg", hard ? 180.0 : 45.0);
                shift_max_px_ = int(param_or(
                    "max_shift_px", std::round((hard ? 16.0 : 8.0) * px_scale)));
                break;
            case Family::color:
                color_full_ = hard;
                color_jitter_ = param_or("color_jitter", 0.1);
                break;
            case Family::video:
                video_amp_base_ = param_or("video_amp", hard ? 0.40 : 0.12);
                video_omega_base_ = param_or("video_omega", hard ? 0.60 : 0.15);
                break;
            case Family::color_video:
                color_full_ = hard;
                color_jitter_ = param_or("color_jitter", 0.1);
                video_amp_base_ = param_or("video_amp", hard ? 0.40 : 0.12);
                video_omega_base_ = param_or("video_omega", hard ? 0.60 : 0.15);
                break;
        }
    }

    std::array<double, 2> draw_position(Rng& rng) {
        return {rng.uniform(0.15, 0.85), rng.uniform(0.15, 0.85)};
    }

    void draw_episode_perturbation() {
        draw_ = EpisodeDraw{};
        const Family f = dist_.family;
        if (f == Family::rotate || f == Family::rotate_shift)
            draw_.angle_deg = perturb_rng_.uniform(-rot_max_deg_, rot_max_deg_);
        if (f == Family::shift || f == Family::rotate_shift) {
            draw_.dx = int(perturb_rng_.uniform_int(-shift_max_px_, shift_max_px_));
            draw_.dy = int(perturb_rng_.uniform_int(-shift_max_px_, shift_max_px_));
        }
        if (f == Family::color || f == Family::color_video) {
            if (color_full_) {
                auto rand_color = [&] {
                    return std::array<double, 3>{perturb_rng_.uniform(), perturb_rng_.uniform(),
                                                 perturb_rng_.uniform()};
                };
                draw_.palette.bg_top = rand_color();
                draw_.palette.bg_bottom = rand_color();
                draw_.palette.floor = rand_color();
                draw_.palette.sun = rand_color();
                auto contrasting = [&](const std::array<double, 3>& against) {
                    for (int tries = 0; tries < 64; ++tries) {
                        auto c = rand_color();
                        double d = std::abs(c[0] - against[0]) + std::abs(c[1] - against[1]) +
                                   std::abs(c[2] - against[2]);
                        if (d >= 0.45) return c;
                    }
                    return rand_color();
                };
                std::array<double, 3> bg_mean{
                    0.5 * (draw_.palette.bg_top[0] + draw_.palette.bg_bottom[0]),
                    0.5 * (draw_.palette.bg_top[1] + draw_.palette.bg_bottom[1]),
                    0.5 * (draw_.palette.bg_top[2] + draw_.palette.bg_bottom[2])};
                draw_.palette.agent = contrasting(bg_mean);
                draw_.palette.goal = contrasting(bg_mean);
            } else {
                auto jitter = [&](std::array<double, 3>& c) {
                    for (auto& v : c)
                        v = std::clamp(v + perturb_rng_.uniform(-color_jitter_, color_jitter_),
                                       0.0, 1.0);
                };
                jitter(draw_.palette.bg_top);
                jitter(draw_.palette.bg_bottom);
                jitter(draw_.palette.floor);
                jitter(draw_.palette.agent);
                jitter(draw_.palette.goal);
                jitter(draw_.palette.sun);
            }
        }
        if (f == Family::video || f == Family::color_video) {
            draw_.video_amp = video_amp_base_;
            draw_.video_omega = video_omega_base_ * perturb_rng_.uniform(0.75, 1.25);
            draw_.video_fx = perturb_rng_.uniform(1.0, 3.0);
            draw_.video_fy = perturb_rng_.uniform(1.0, 3.0);
            for (auto& p : draw_.video_phase) p = perturb_rng_.uniform(0, 6.283185307179586);
        }
    }

    std::vector<std::uint8_t> render_frame() const {
        const int S = cfg_.obs_size;
        std::vector<double> rgb(std::size_t(3) * S * S);
        const Palette& pal = draw_.palette;
        const bool video =
            dist_.family == Family::video || dist_.family == Family::color_video;
        const double t = double(step_idx_);
        const double floor_y = 0.78;  // floor band below this arena height

        for (int r = 0; r < S; ++r) {
            const double y = (r + 0.5) / S;
            for (int c = 0; c < S; ++c) {
                const double x = (c + 0.5) / S;
                double col[3];
                if (y >= floor_y) {
                    // faint checker texture keeps the floor band oriented
                    const bool odd = (int(x * 8) + int((y - floor_y) * 16)) % 2 != 0;
                    for (int ch = 0; ch < 3; ++ch)
                        col[ch] = pal.floor[ch] * (odd ? 1.0 : 0.85);
                } else if (video) {
                    for (int ch = 0; ch < 3; ++ch) {
                        const double base =
                            pal.bg_top[ch] + (pal.bg_bottom[ch] - pal.bg_top[ch]) * (y / floor_y);
                        const double wave = std::sin(
                            6.283185307179586 * (draw_.video_fx * x + draw_.video_fy * y) +
                            draw_.video_phase[ch] + draw_.video_omega * t);
                        col[ch] = base + draw_.video_amp * wave;
                    }
                } else {
                    for (int ch = 0; ch < 3; ++ch)
                        col[ch] = pal.bg_top[ch] + (pal.bg_bottom[ch] - pal.bg_top[ch]) *
                                                       (std::min(y, floor_y) / floor_y);
                }
                // fixed sky beacon: a strong orientation cue under rotations
                const double sd = std::hypot(x - 0.5, y - 0.12);
                if (sd < 0.07) {
                    const double cov = std::clamp((0.07 - sd) * S * 2.0, 0.0, 1.0);
                    for (int ch = 0; ch < 3; ++ch)
                        col[ch] = col[ch] * (1 - cov) + pal.sun[ch] * cov;
                }
                // goal square
                const double gx = std::abs(x - goal_[0]), gy = std::abs(y - goal_[1]);
                const double half = cfg_.goal_half_side;
                if (gx < half && gy < half) {
                    const double edge = std::max(gx, gy) / half;
                    const double cov = std::clamp((1.0 - edge) * S * half * 2.0, 0.0, 1.0);
                    for (int ch = 0; ch < 3; ++ch)
                        col[ch] = col[ch] * (1 - cov) + pal.goal[ch] * cov;
                }
                // agent disc on top
                const double ad = std::hypot(x - pos_[0], y - pos_[1]);
                if (ad < cfg_.agent_radius) {
                    const double cov =
                        std::clamp((cfg_.agent_radius - ad) * S * 2.0, 0.0, 1.0);
                    for (int ch = 0; ch < 3; ++ch)
                        col[ch] = col[ch] * (1 - cov) + pal.agent[ch] * cov;
                }
                for (int ch = 0; ch < 3; ++ch)
                    rgb[(std::size_t(ch) * S + r) * S + c] = std::clamp(col[ch], 0.0, 1.0);
            }
        }

        std::vector<std::uint8_t> frame(rgb.size());
        for (std::size_t i = 0; i < rgb.size(); ++i)
            frame[i] = std::uint8_t(rgb[i] * 255.0 + 0.5);

        // Geometric families post-transform the quantized frame through the
        // shared operators so wrapped frames match the operators bit-exactly.
        const Family f = dist_.family;
        if (f == Family::rotate || f == Family::shift || f == Family::rotate_shift) {
            Tensor<float> ft({3, S, S});
            for (std::size_t i = 0; i < frame.size(); ++i) ft.data[i] = float(frame[i]) / 255.0f;
            if (f == Family::rotate || f == Family::rotate_shift)
                ft = augment::apply_rotate(ft, draw_.angle_deg, 180.0);
            if (f == Family::shift || f == Family::rotate_shift)
                ft = augment::apply_shift(ft, draw_.dx, draw_.dy, std::max(1, shift_max_px_),
                                          augment::FillPolicy::zero);
            for (std::size_t i = 0; i < frame.size(); ++i)
                frame[i] = std::uint8_t(std::clamp(ft.data[i], 0.0f, 1.0f) * 255.0f + 0.5f);
        }
        return frame;
    }

    Observation stacked() const {
        Observation o;
        o.frame_stack = cfg_.frame_stack;
        o.size = cfg_.obs_size;
        o.pixels.reserve(frames_.size() * frames_.front().size());
        for (const auto& f : frames_) o.pixels.insert(o.pixels.end(), f.begin(), f.end());
        return o;
    }
};

/// Returned environment renders base frames then applies the family transform
/// with per-episode parameters. Dynamics, actions, and rewards are untouched.
inline PointGoalEnv wrap_distribution(const PointGoalEnv& env, DistributionSpec spec) {
    return PointGoalEnv(env.config(), std::move(spec));
}

}  // namespace sada::envs
