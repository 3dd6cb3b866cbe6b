// Copyright (c) 2026 The sada authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <vector>

#include "sada/common.hpp"

namespace sada {

/// Dense row-major tensor with value semantics. Rank <= 4 in practice
/// ([B,C,H,W] for image batches, [B,F] for features, [F] for vectors).
template <class Real>
struct Tensor {
    std::vector<int> shape;
    std::vector<Real> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s) : shape(std::move(s)), data(count(shape), Real(0)) {}
    Tensor(std::vector<int> s, Real fill) : shape(std::move(s)), data(count(shape), fill) {}
    Tensor(std::vector<int> s, std::vector<Real> d) : shape(std::move(s)), data(std::move(d)) {
        if (static_cast<std::int64_t>(data.size()) != count(shape))
            throw ContractError("tensor: data size does not match shape");
    }

    static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }
    static Tensor scalar(Real v) { return Tensor({1}, std::vector<Real>{v}); }

    static std::int64_t count(const std::vector<int>& s) {
        std::int64_t n = 1;
        for (int d : s) {
            if (d < 0) throw ContractError("tensor: negative dimension");
            n *= d;
        }
        return n;
    }

    std::int64_t numel() const { return static_cast<std::int64_t>(data.size()); }
    int ndim() const { return static_cast<int>(shape.size()); }
    int dim(int i) const { return shape.at(static_cast<std::size_t>(i)); }

    Real& operator[](std::int64_t i) { return data[static_cast<std::size_t>(i)]; }
    const Real& operator[](std::int64_t i) const { return data[static_cast<std::size_t>(i)]; }

    // 4-d accessor for [B,C,H,W] layouts
    Real& at(int b, int c, int h, int w) {
        return data[((std::int64_t(b) * shape[1] + c) * shape[2] + h) * shape[3] + w];
    }
    const Real& at(int b, int c, int h, int w) const {
        return data[((std::int64_t(b) * shape[1] + c) * shape[2] + h) * shape[3] + w];
    }
    // 3-d accessor for [C,H,W]
    Real& at(int c, int h, int w) {
        return data[(std::int64_t(c) * shape[1] + h) * shape[2] + w];
    }
    const Real& at(int c, int h, int w) const {
        return data[(std::int64_t(c) * shape[1] + h) * shape[2] + w];
    }
    // 2-d accessor for [B,F]
    Real& at(int r, int c) { return data[std::int64_t(r) * shape[1] + c]; }
    const Real& at(int r, int c) const { return data[std::int64_t(r) * shape[1] + c]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    void fill(Real v) { std::fill(data.begin(), data.end(), v); }

    Tensor reshaped(std::vector<int> s) const {
        if (count(s) != numel()) throw ContractError("reshape: element count mismatch");
        Tensor o;
        o.shape = std::move(s);
        o.data = data;
        return o;
    }

    template <class Other>
    Tensor<Other> cast() const {
        Tensor<Other> o;
        o.shape = shape;
        o.data.resize(data.size());
        for (std::size_t i = 0; i < data.size(); ++i) o.data[i] = static_cast<Other>(data[i]);
        return o;
    }

    Real abs_max() const {
        Real m = 0;
        for (Real v : data) m = std::max(m, std::abs(v));
        return m;
    }

    bool all_finite() const {
        for (Real v : data)
            if (!std::isfinite(double(v))) return false;
        return true;
    }
};

template <class Real>
inline Real l2_norm(const Tensor<Real>& t) {
    double s = 0;
    for (Real v : t.data) s += double(v) * double(v);
    return Real(std::sqrt(s));
}

template <class Real>
inline Real max_abs_diff(const Tensor<Real>& a, const Tensor<Real>& b) {
    if (!a.same_shape(b)) throw ContractError("max_abs_diff: shape mismatch");
    Real m = 0;
    for (std::size_t i = 0; i < a.data.size(); ++i)
        m = std::max(m, std::abs(a.data[i] - b.data[i]));
    return m;
}

}  // namespace sada
