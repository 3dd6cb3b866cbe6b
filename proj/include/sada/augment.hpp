// Copyright (c) 2026 The sada authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "sada/rng.hpp"
#include "sada/tensor.hpp"

namespace sada::augment {

// Observations are [C,H,W] tensors in the unit interval, C = 3 * frame_stack.
// Every operator applies one transform identically to all stacked frames.

enum class AugName {
    shift,
    rotate,
    rotate_shift,
    conv,
    overlay,
    conv_overlay,
    weak_shift,
    identity,
};

enum class AugClass { geometric, photometric, weak };

inline const char* to_string(AugName n) {
    switch (n) {
        case AugName::shift: return "shift";
        case AugName::rotate: return "rotate";
        case AugName::rotate_shift: return "rotate_shift";
        case AugName::conv: return "conv";
        case AugName::overlay: return "overlay";
        case AugName::conv_overlay: return "conv_overlay";
        case AugName::weak_shift: return "weak_shift";
        case AugName::identity: return "identity";
    }
    return "?";
}

inline AugClass class_of(AugName n) {
    switch (n) {
        case AugName::shift:
        case AugName::rotate:
        case AugName::rotate_shift: return AugClass::geometric;
        case AugName::conv:
        case AugName::overlay:
        case AugName::conv_overlay: return AugClass::photometric;
        case AugName::weak_shift: return AugClass::weak;
        case AugName::identity: return AugClass::photometric;  // moves nothing
    }
    return AugClass::photometric;
}

/// Sampling ranges for the stochastic operators.
struct AugParams {
    int max_shift_px = 16;
    double max_rotate_deg = 180.0;
    double overlay_alpha = 0.5;
    int conv_kernel_size = 3;
    double conv_weight_scale = 1.0;  // multiplies the variance-preserving std 1/k
    int weak_pad_px = 4;

    std::map<std::string, double> as_map() const {
        return {{"max_shift_px", double(max_shift_px)},
                {"max_rotate_deg", max_rotate_deg},
                {"overlay_alpha", overlay_alpha},
                {"conv_kernel_size", double(conv_kernel_size)},
                {"weight_scale", conv_weight_scale},
                {"pad_px", double(weak_pad_px)}};
    }
};

struct AugmentationSpec {
    AugName name = AugName::identity;
    AugClass cls = AugClass::photometric;
    AugParams params;
};

inline AugmentationSpec make_spec(AugName name, AugParams params = {}) {
    return {name, class_of(name), params};
}

enum class DistractorKind { value_noise, gradient, checker };

/// One resolved stochastic draw. Re-applying the same draw to the same
/// observation is bit-identical.
struct AugDraw {
    AugName name = AugName::identity;
    int dx = 0, dy = 0;                      // shift / weak_shift
    double angle_deg = 0.0;                  // rotate
    std::vector<double> kernel;              // conv (row-major k*k)
    DistractorKind overlay_kind = DistractorKind::value_noise;
    std::uint64_t overlay_seed = 0;          // procedural bank index
    int overlay_user_index = -1;             // >=0 selects a user-supplied image
    double alpha = 0.0;                      // overlay
    AugParams params;                        // ranges in effect at draw time
};

namespace detail {

template <class Real>
void check_obs(const Tensor<Real>& obs) {
    if (obs.ndim() != 3 || obs.dim(0) % 3 != 0)
        throw ContractError("observation must be [3k,H,W]");
}

}  // namespace detail

// ---- shift -----------------------------------------------------------------

enum class FillPolicy { zero, edge };

/// Translate content by (dx right, dy down). Vacated pixels follow `fill`.
template <class Real>
Tensor<Real> apply_shift(const Tensor<Real>& obs, int dx, int dy,
                         int max_shift_px = 16, FillPolicy fill = FillPolicy::zero) {
    detail::check_obs(obs);
    if (std::abs(dx) > max_shift_px || std::abs(dy) > max_shift_px)
        throw RangeError("shift exceeds max_shift_px=" + std::to_string(max_shift_px));
    const int C = obs.dim(0), H = obs.dim(1), W = obs.dim(2);
    Tensor<Real> out(obs.shape);
    for (int c = 0; c < C; ++c)
        for (int r = 0; r < H; ++r)
            for (int col = 0; col < W; ++col) {
                int sr = r - dy, sc = col - dx;
                if (fill == FillPolicy::edge) {
                    sr = std::clamp(sr, 0, H - 1);
                    sc = std::clamp(sc, 0, W - 1);
                    out.at(c, r, col) = obs.at(c, sr, sc);
                } else if (sr >= 0 && sr < H && sc >= 0 && sc < W) {
                    out.at(c, r, col) = obs.at(c, sr, sc);
                }  // else stays zero
            }
    return out;
}

// ---- rotate ----------------------------------------------------------------

/// Rotate about the image center, positive = counter-clockwise. Bilinear with
/// zero fill; exact index permutation for multiples of 90 degrees on square
/// frames.
template <class Real>
Tensor<Real> apply_rotate(const Tensor<Real>& obs, double angle_deg,
                          double max_rotate_deg = 180.0) {
    detail::check_obs(obs);
    if (std::abs(angle_deg) > max_rotate_deg + 1e-12)
        throw RangeError("rotation exceeds max_rotate_deg");
    const int C = obs.dim(0), H = obs.dim(1), W = obs.dim(2);
    Tensor<Real> out(obs.shape);

    const double quarter = angle_deg / 90.0;
    const bool exact = H == W && std::abs(quarter - std::round(quarter)) < 1e-9;
    if (exact) {
        int q = int(std::llround(quarter)) % 4;
        if (q < 0) q += 4;
        const int N = H;
        for (int c = 0; c < C; ++c)
            for (int r = 0; r < N; ++r)
                for (int col = 0; col < N; ++col) {
                    Real v;
                    switch (q) {
                        case 0: v = obs.at(c, r, col); break;
                        case 1: v = obs.at(c, col, N - 1 - r); break;
                        case 2: v = obs.at(c, N - 1 - r, N - 1 - col); break;
                        default: v = obs.at(c, N - 1 - col, r); break;
                    }
                    out.at(c, r, col) = v;
                }
        return out;
    }

    const double th = angle_deg * 3.14159265358979323846 / 180.0;
    const double cs = std::cos(th), sn = std::sin(th);
    const double rc = (H - 1) * 0.5, cc = (W - 1) * 0.5;
    for (int r = 0; r < H; ++r)
        for (int col = 0; col < W; ++col) {
            const double src_c = cs * (col - cc) - sn * (r - rc) + cc;
            const double src_r = sn * (col - cc) + cs * (r - rc) + rc;
            const int r0 = int(std::floor(src_r)), c0 = int(std::floor(src_c));
            const double fr = src_r - r0, fc = src_c - c0;
            for (int c = 0; c < C; ++c) {
                auto sample = [&](int rr, int cc2) -> double {
                    if (rr < 0 || rr >= H || cc2 < 0 || cc2 >= W) return 0.0;
                    return double(obs.at(c, rr, cc2));
                };
                double v = (1 - fr) * ((1 - fc) * sample(r0, c0) + fc * sample(r0, c0 + 1)) +
                           fr * ((1 - fc) * sample(r0 + 1, c0) + fc * sample(r0 + 1, c0 + 1));
                out.at(c, r, col) = Real(v);
            }
        }
    return out;
}

// ---- random convolution ------------------------------------------------------

/// One k x k kernel applied depthwise to every channel of every frame, with
/// edge-replication padding, then clipped to [0,1].
template <class Real>
Tensor<Real> apply_conv(const Tensor<Real>& obs, const std::vector<double>& kernel,
                        int kernel_size = 3) {
    detail::check_obs(obs);
    if (kernel_size < 1 || kernel_size % 2 == 0)
        throw InvalidSpecError("conv kernel size must be odd and positive");
    if (static_cast<int>(kernel.size()) != kernel_size * kernel_size)
        throw InvalidSpecError("conv kernel size mismatch");
    const int C = obs.dim(0), H = obs.dim(1), W = obs.dim(2);
    const int half = kernel_size / 2;
    Tensor<Real> out(obs.shape);
    for (int c = 0; c < C; ++c)
        for (int r = 0; r < H; ++r)
            for (int col = 0; col < W; ++col) {
                double acc = 0;
                for (int kr = 0; kr < kernel_size; ++kr)
                    for (int kc = 0; kc < kernel_size; ++kc) {
                        const int sr = std::clamp(r + kr - half, 0, H - 1);
                        const int sc = std::clamp(col + kc - half, 0, W - 1);
                        acc += kernel[kr * kernel_size + kc] * double(obs.at(c, sr, sc));
                    }
                out.at(c, r, col) = Real(std::clamp(acc, 0.0, 1.0));
            }
    return out;
}

// ---- overlay -----------------------------------------------------------------

/// out = (1 - alpha) * obs + alpha * distractor, the same 3-channel distractor
/// blended onto every frame of the stack.
template <class Real>
Tensor<Real> apply_overlay(const Tensor<Real>& obs, const Tensor<Real>& distractor,
                           double alpha) {
    detail::check_obs(obs);
    if (alpha < 0.0 || alpha > 1.0) throw RangeError("overlay alpha must be in [0,1]");
    if (distractor.ndim() != 3 || distractor.dim(0) != 3 || distractor.dim(1) != obs.dim(1) ||
        distractor.dim(2) != obs.dim(2))
        throw InvalidSpecError("overlay distractor size mismatch");
    const int C = obs.dim(0), H = obs.dim(1), W = obs.dim(2);
    Tensor<Real> out(obs.shape);
    for (int c = 0; c < C; ++c)
        for (int r = 0; r < H; ++r)
            for (int col = 0; col < W; ++col)
                out.at(c, r, col) = Real((1.0 - alpha) * double(obs.at(c, r, col)) +
                                            alpha * double(distractor.at(c % 3, r, col)));
    return out;
}

// ---- procedural distractor bank ----------------------------------------------

/// Procedural 3 x H x W distractor image; the (kind, seed) pair fully
/// determines the pixels.
template <class Real>
Tensor<Real> make_distractor(DistractorKind kind, std::uint64_t seed, int H, int W) {
    Rng rng(seed ^ 0xd157ull);
    Tensor<Real> img({3, H, W});
    switch (kind) {
        case DistractorKind::value_noise: {
            // two octaves of bilinearly upsampled value noise
            for (int octave = 0; octave < 2; ++octave) {
                const int g = octave == 0 ? 4 : 8;
                const double amp = octave == 0 ? 0.65 : 0.35;
                std::vector<double> grid(std::size_t(3) * (g + 1) * (g + 1));
                for (auto& v : grid) v = rng.uniform();
                for (int c = 0; c < 3; ++c)
                    for (int r = 0; r < H; ++r)
                        for (int col = 0; col < W; ++col) {
                            const double gy = double(r) / H * g, gx = double(col) / W * g;
                            const int y0 = int(gy), x0 = int(gx);
                            const double fy = gy - y0, fx = gx - x0;
                            auto at = [&](int y, int x) {
                                return grid[(std::size_t(c) * (g + 1) + y) * (g + 1) + x];
                            };
                            double v = (1 - fy) * ((1 - fx) * at(y0, x0) + fx * at(y0, x0 + 1)) +
                                       fy * ((1 - fx) * at(y0 + 1, x0) + fx * at(y0 + 1, x0 + 1));
                            img.at(c, r, col) += Real(amp * v);
                        }
            }
            break;
        }
        case DistractorKind::gradient: {
            double a[3], b[3];
            for (int c = 0; c < 3; ++c) {
                a[c] = rng.uniform();
                b[c] = rng.uniform();
            }
            const double ang = rng.uniform(0, 6.283185307179586);
            const double dxv = std::cos(ang), dyv = std::sin(ang);
            for (int r = 0; r < H; ++r)
                for (int col = 0; col < W; ++col) {
                    double t = 0.5 + 0.5 * ((col / double(W) - 0.5) * dxv +
                                            (r / double(H) - 0.5) * dyv) / 0.70710678;
                    t = std::clamp(t, 0.0, 1.0);
                    for (int c = 0; c < 3; ++c)
                        img.at(c, r, col) = Real(a[c] + (b[c] - a[c]) * t);
                }
            break;
        }
        case DistractorKind::checker: {
            const int cell = int(rng.uniform_int(3, std::max(4LL, (long long)H / 4)));
            double a[3], b[3];
            for (int c = 0; c < 3; ++c) {
                a[c] = rng.uniform();
                b[c] = rng.uniform();
            }
            for (int r = 0; r < H; ++r)
                for (int col = 0; col < W; ++col) {
                    const bool odd = ((r / cell) + (col / cell)) % 2 != 0;
                    for (int c = 0; c < 3; ++c)
                        img.at(c, r, col) = Real(odd ? a[c] : b[c]);
                }
            break;
        }
    }
    for (auto& v : img.data) v = Real(std::clamp(double(v), 0.0, 1.0));
    return img;
}

// ---- weak augmentation --------------------------------------------------------

/// Pad-and-crop random shift of at most pad_px pixels with edge-replication
/// fill; the DrQ-style regularizer treated as "unaugmented" everywhere else.
template <class Real>
Tensor<Real> apply_weak(const Tensor<Real>& obs, Rng& rng, int pad_px = 4) {
    detail::check_obs(obs);
    if (pad_px >= obs.dim(1) || pad_px >= obs.dim(2))
        throw InvalidSpecError("weak pad_px must be smaller than the image");
    const int dx = int(rng.uniform_int(-pad_px, pad_px));
    const int dy = int(rng.uniform_int(-pad_px, pad_px));
    return apply_shift(obs, dx, dy, pad_px, FillPolicy::edge);
}

// ---- draw sampling / application ----------------------------------------------

/// Sample the stochastic parameters for `spec` without touching pixels.
inline AugDraw sample_draw(const AugmentationSpec& spec, Rng& rng, int user_bank_size = 0) {
    AugDraw d;
    d.name = spec.name;
    d.params = spec.params;
    auto draw_shift = [&] {
        d.dx = int(rng.uniform_int(-spec.params.max_shift_px, spec.params.max_shift_px));
        d.dy = int(rng.uniform_int(-spec.params.max_shift_px, spec.params.max_shift_px));
    };
    auto draw_rotate = [&] {
        d.angle_deg = rng.uniform(-spec.params.max_rotate_deg, spec.params.max_rotate_deg);
    };
    auto draw_conv = [&] {
        const int k = spec.params.conv_kernel_size;
        const double std_dev = spec.params.conv_weight_scale / double(k);
        d.kernel.resize(std::size_t(k) * k);
        for (auto& w : d.kernel) w = std_dev * rng.normal();
    };
    auto draw_overlay = [&] {
        if (user_bank_size > 0) {
            d.overlay_user_index = int(rng.uniform_index(std::uint64_t(user_bank_size)));
        } else {
            d.overlay_kind = DistractorKind(rng.uniform_index(3));
            d.overlay_seed = rng.next_u64();
        }
        d.alpha = spec.params.overlay_alpha;
    };
    switch (spec.name) {
        case AugName::shift: draw_shift(); break;
        case AugName::rotate: draw_rotate(); break;
        case AugName::rotate_shift:
            draw_rotate();
            draw_shift();
            break;
        case AugName::conv: draw_conv(); break;
        case AugName::overlay: draw_overlay(); break;
        case AugName::conv_overlay:
            draw_conv();
            draw_overlay();
            break;
        case AugName::weak_shift:
            d.dx = int(rng.uniform_int(-spec.params.weak_pad_px, spec.params.weak_pad_px));
            d.dy = int(rng.uniform_int(-spec.params.weak_pad_px, spec.params.weak_pad_px));
            break;
        case AugName::identity: break;
    }
    return d;
}

/// Apply a resolved draw. Deterministic: same draw + same obs -> same bits.
template <class Real>
Tensor<Real> apply_draw(const Tensor<Real>& obs, const AugDraw& d,
                        const std::vector<Tensor<Real>>* user_bank = nullptr) {
    switch (d.name) {
        case AugName::identity: return obs;
        case AugName::shift:
            return apply_shift(obs, d.dx, d.dy, d.params.max_shift_px, FillPolicy::zero);
        case AugName::rotate: return apply_rotate(obs, d.angle_deg, d.params.max_rotate_deg);
        case AugName::rotate_shift:
            return apply_shift(apply_rotate(obs, d.angle_deg, d.params.max_rotate_deg), d.dx,
                               d.dy, d.params.max_shift_px, FillPolicy::zero);
        case AugName::weak_shift:
            return apply_shift(obs, d.dx, d.dy, d.params.weak_pad_px, FillPolicy::edge);
        case AugName::conv: return apply_conv(obs, d.kernel, d.params.conv_kernel_size);
        case AugName::overlay:
        case AugName::conv_overlay: {
            Tensor<Real> cur =
                d.name == AugName::conv_overlay
                    ? apply_conv(obs, d.kernel, d.params.conv_kernel_size)
                    : obs;
            Tensor<Real> distractor;
            if (d.overlay_user_index >= 0) {
                if (!user_bank || d.overlay_user_index >= int(user_bank->size()))
                    throw InvalidSpecError("overlay draw references a missing user image");
                distractor = (*user_bank)[std::size_t(d.overlay_user_index)];
            } else {
                distractor =
                    make_distractor<Real>(d.overlay_kind, d.overlay_seed, obs.dim(1), obs.dim(2));
            }
            return apply_overlay(cur, distractor, d.alpha);
        }
    }
    throw InvalidSpecError("unknown composite");
}

/// Composite application per the declared order (rotate->shift, conv->overlay).
template <class Real>
Tensor<Real> apply_composite(const Tensor<Real>& obs, const AugDraw& draw,
                             const std::vector<Tensor<Real>>* user_bank = nullptr) {
    if (draw.name != AugName::rotate_shift && draw.name != AugName::conv_overlay)
        throw InvalidSpecError("apply_composite: draw is not a composite spec");
    return apply_draw(obs, draw, user_bank);
}

/// Uniformly choose one spec from the pool, draw its parameters, apply it.
template <class Real>
std::pair<Tensor<Real>, AugDraw> sample_strong(const Tensor<Real>& obs,
                                               const std::vector<AugmentationSpec>& pool,
                                               Rng& rng,
                                               const std::vector<Tensor<Real>>* user_bank = nullptr) {
    if (pool.empty()) throw InvalidSpecError("sample_strong: empty augmentation pool");
    const auto& spec = pool[rng.uniform_index(pool.size())];
    AugDraw d = sample_draw(spec, rng, user_bank ? int(user_bank->size()) : 0);
    return {apply_draw(obs, d, user_bank), d};
}

/// Batch helpers: one independent draw per sample, applied identically to all
/// frames of that sample ([B,C,H,W] layout).

template <class Real>
Tensor<Real> apply_weak_batch(const Tensor<Real>& batch, Rng& rng, int pad_px = 4) {
    if (batch.ndim() != 4) throw ContractError("apply_weak_batch: expects [B,C,H,W]");
    Tensor<Real> out(batch.shape);
    const std::int64_t per = batch.numel() / batch.dim(0);
    Tensor<Real> one({batch.dim(1), batch.dim(2), batch.dim(3)});
    for (int b = 0; b < batch.dim(0); ++b) {
        std::copy_n(batch.data.begin() + b * per, per, one.data.begin());
        Tensor<Real> shifted = apply_weak(one, rng, pad_px);
        std::copy_n(shifted.data.begin(), per, out.data.begin() + b * per);
    }
    return out;
}

template <class Real>
std::pair<Tensor<Real>, std::vector<AugDraw>> sample_strong_batch(
    const Tensor<Real>& batch, const std::vector<AugmentationSpec>& pool, Rng& rng,
    const std::vector<Tensor<Real>>* user_bank = nullptr) {
    if (batch.ndim() != 4) throw ContractError("sample_strong_batch: expects [B,C,H,W]");
    Tensor<Real> out(batch.shape);
    std::vector<AugDraw> draws;
    draws.reserve(std::size_t(batch.dim(0)));
    const std::int64_t per = batch.numel() / batch.dim(0);
    Tensor<Real> one({batch.dim(1), batch.dim(2), batch.dim(3)});
    for (int b = 0; b < batch.dim(0); ++b) {
        std::copy_n(batch.data.begin() + b * per, per, one.data.begin());
        auto [aug, d] = sample_strong(one, pool, rng, user_bank);
        std::copy_n(aug.data.begin(), per, out.data.begin() + b * per);
        draws.push_back(std::move(d));
    }
    return {std::move(out), std::move(draws)};
}

// ---- pool construction ---------------------------------------------------------

enum class PoolChoice { geometric, photometric, all, none };

inline std::vector<AugmentationSpec> make_pool(PoolChoice choice, AugParams params = {}) {
    std::vector<AugName> names;
    switch (choice) {
        case PoolChoice::geometric:
            names = {AugName::shift, AugName::rotate, AugName::rotate_shift};
            break;
        case PoolChoice::photometric:
            names = {AugName::conv, AugName::overlay, AugName::conv_overlay};
            break;
        case PoolChoice::all:
            names = {AugName::shift, AugName::rotate, AugName::rotate_shift,
                     AugName::conv,  AugName::overlay, AugName::conv_overlay};
            break;
        case PoolChoice::none: names = {AugName::identity}; break;
    }
    std::vector<AugmentationSpec> pool;
    pool.reserve(names.size());
    for (AugName n : names) pool.push_back(make_spec(n, params));
    return pool;
}

inline PoolChoice pool_choice_from_string(const std::string& s) {
    if (s == "geometric") return PoolChoice::geometric;
    if (s == "photometric") return PoolChoice::photometric;
    if (s == "all") return PoolChoice::all;
    if (s == "none") return PoolChoice::none;
    throw ValidationError("augs", "unknown pool '" + s + "'");
}

}  // namespace sada::augment
