// Copyright (c) 2026 The sada authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <functional>
#include <memory>
#include <unordered_set>
#include <vector>

#include "sada/tensor.hpp"

namespace sada::ad {

inline bool& grad_mode() {
    thread_local bool enabled = true;
    return enabled;
}

/// RAII scope that disables graph recording (used for target computation
/// and any pure inference pass).
struct NoGradGuard {
    bool prev;
    NoGradGuard() : prev(grad_mode()) { grad_mode() = false; }
    ~NoGradGuard() { grad_mode() = prev; }
};

template <class Real>
struct Node {
    Tensor<Real> value;
    Tensor<Real> grad;
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward_fn;

    void ensure_grad() {
        if (grad.shape != value.shape) grad = Tensor<Real>(value.shape);
    }
};

/// Handle to a node in the computation graph. Cheap to copy.
template <class Real>
class Var {
  public:
    Var() = default;
    explicit Var(std::shared_ptr<Node<Real>> n) : n_(std::move(n)) {}

    static Var leaf(Tensor<Real> v, bool requires_grad) {
        auto n = std::make_shared<Node<Real>>();
        n->value = std::move(v);
        n->requires_grad = requires_grad;
        return Var(std::move(n));
    }
    static Var constant(Tensor<Real> v) { return leaf(std::move(v), false); }

    bool valid() const { return n_ != nullptr; }
    const Tensor<Real>& value() const { return n_->value; }
    Tensor<Real>& value() { return n_->value; }
    Tensor<Real>& grad() {
        n_->ensure_grad();
        return n_->grad;
    }
    bool requires_grad() const { return n_ && n_->requires_grad; }
    void zero_grad() {
        if (n_) {
            n_->ensure_grad();
            n_->grad.fill(Real(0));
        }
    }

    /// Value copy with no history.
    Var detach() const { return leaf(n_->value, false); }

    /// Reverse pass from a scalar node. Accumulates into .grad of every
    /// reachable node that required gradients when the graph was built.
    void backward() {
        if (!n_ || n_->value.numel() != 1)
            throw ContractError("backward: root must be a scalar");
        std::vector<Node<Real>*> order;
        std::unordered_set<Node<Real>*> seen;
        std::vector<std::pair<Node<Real>*, std::size_t>> stack;
        stack.push_back({n_.get(), 0});
        seen.insert(n_.get());
        while (!stack.empty()) {
            auto& [node, idx] = stack.back();
            if (idx < node->parents.size()) {
                Node<Real>* p = node->parents[idx++].get();
                if (!p->parents.empty() || p->backward_fn || p->requires_grad) {
                    if (!seen.count(p)) {
                        seen.insert(p);
                        stack.push_back({p, 0});
                    }
                }
            } else {
                order.push_back(node);
                stack.pop_back();
            }
        }
        n_->ensure_grad();
        n_->grad.data[0] += Real(1);
        for (auto it = order.rbegin(); it != order.rend(); ++it) {
            Node<Real>* node = *it;
            if (node->backward_fn) node->backward_fn(*node);
        }
    }

    std::shared_ptr<Node<Real>> node() const { return n_; }

  private:
    std::shared_ptr<Node<Real>> n_;
};

namespace detail {

/// Captured graph input: the node plus whether it required gradients at
/// build time. Backward routing is decided by the build-time flag, so later
/// freezing or unfreezing a parameter cannot change an existing graph.
template <class Real>
struct Src {
    std::shared_ptr<Node<Real>> n;
    bool rg = false;

    const Tensor<Real>& value() const { return n->value; }

    void accum(const Tensor<Real>& g) const {
        if (!rg) return;
        n->ensure_grad();
        for (std::size_t i = 0; i < g.data.size(); ++i) n->grad.data[i] += g.data[i];
    }
    Tensor<Real>* grad_or_null() const {
        if (!rg) return nullptr;
        n->ensure_grad();
        return &n->grad;
    }
};

template <class Real>
Src<Real> src(const Var<Real>& v) {
    return {v.node(), v.requires_grad()};
}

template <class Real>
Var<Real> make_op(Tensor<Real> value, std::initializer_list<Var<Real>> inputs,
                  std::function<void(Node<Real>&)> backward_fn) {
    auto n = std::make_shared<Node<Real>>();
    n->value = std::move(value);
    if (grad_mode()) {
        for (const auto& in : inputs)
            if (in.requires_grad()) n->requires_grad = true;
        if (n->requires_grad) {
            for (const auto& in : inputs) n->parents.push_back(in.node());
            n->backward_fn = std::move(backward_fn);
        }
    }
    return Var<Real>(std::move(n));
}

}  // namespace detail

// ---- elementwise ----------------------------------------------------------

template <class Real>
Var<Real> add(const Var<Real>& a, const Var<Real>& b) {
    if (!a.value().same_shape(b.value())) throw ContractError("add: shape mismatch");
    Tensor<Real> out = a.value();
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += b.value().data[i];
    auto an = detail::src(a), bn = detail::src(b);
    return detail::make_op<Real>(std::move(out), {a, b}, [an, bn](Node<Real>& n) {
        an.accum(n.grad);
        bn.accum(n.grad);
    });
}

template <class Real>
Var<Real> sub(const Var<Real>& a, const Var<Real>& b) {
    if (!a.value().same_shape(b.value())) throw ContractError("sub: shape mismatch");
    Tensor<Real> out = a.value();
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] -= b.value().data[i];
    auto an = detail::src(a), bn = detail::src(b);
    return detail::make_op<Real>(std::move(out), {a, b}, [an, bn](Node<Real>& n) {
        an.accum(n.grad);
        if (auto* g = bn.grad_or_null())
            for (std::size_t i = 0; i < n.grad.data.size(); ++i) g->data[i] -= n.grad.data[i];
    });
}

template <class Real>
Var<Real> mul(const Var<Real>& a, const Var<Real>& b) {
    if (!a.value().same_shape(b.value())) throw ContractError("mul: shape mismatch");
    Tensor<Real> out = a.value();
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= b.value().data[i];
    auto an = detail::src(a), bn = detail::src(b);
    return detail::make_op<Real>(std::move(out), {a, b}, [an, bn](Node<Real>& n) {
        if (auto* g = an.grad_or_null())
            for (std::size_t i = 0; i < n.grad.data.size(); ++i)
                g->data[i] += n.grad.data[i] * bn.value().data[i];
        if (auto* g = bn.grad_or_null())
            for (std::size_t i = 0; i < n.grad.data.size(); ++i)
                g->data[i] += n.grad.data[i] * an.value().data[i];
    });
}

template <class Real>
Var<Real> scale(const Var<Real>& a, Real c) {
    Tensor<Real> out = a.value();
    for (auto& v : out.data) v *= c;
    auto an = detail::src(a);
    return detail::make_op<Real>(std::move(out), {a}, [an, c](Node<Real>& n) {
        if (auto* g = an.grad_or_null())
            for (std::size_t i = 0; i < n.grad.data.size(); ++i)
                g->data[i] += n.grad.data[i] * c;
    });
}

template <class Real>
Var<Real> add_scalar(const Var<Real>& a, Real c) {
    Tensor<Real> out = a.value();
    for (auto& v : out.data) v += c;
    auto an = detail::src(a);
    return detail::make_op<Real>(std::move(out), {a},
                                 [an](Node<Real>& n) { an.accum(n.grad); });
}

template <class Real>
Var<Real> relu(const Var<Real>& a) {
    Tensor<Real> out = a.value();
    for (auto& v : out.data) v = v > Real(0) ? v : Real(0);
    auto an = detail::src(a);
    return detail::make_op<Real>(std::move(out), {a}, [an](Node<Real>& n) {
        if (auto* g = an.grad_or_null())
            for (std::size_t i = 0; i < n.grad.data.size(); ++i)
                if (an.value().data[i] > Real(0)) g->data[i] += n.grad.data[i];
    });
}

template <class Real>
Var<Real> tanh_v(const Var<Real>& a) {
    Tensor<Real> out = a.value();
    for (auto& v : out.data) v = std::tanh(v);
    auto an = detail::src(a);
    return detail::make_op<Real>(std::move(out), {a}, [an](Node<Real>& n) {
        if (auto* g = an.grad_or_null())
            for (std::size_t i = 0; i < n.grad.data.size(); ++i) {
                const Real y = n.value.data[i];
                g->data[i] += n.grad.data[i] * (Real(1) - y * y);
            }
    });
}

template <class Real>
Var<Real> exp_v(const Var<Real>& a) {
    Tensor<Real> out = a.value();
    for (auto& v : out.data) v = std::exp(v);
    auto an = detail::src(a);
    return detail::make_op<Real>(std::move(out), {a}, [an](Node<Real>& n) {
        if (auto* g = an.grad_or_null())
            for (std::size_t i = 0; i < n.grad.data.size(); ++i)
                g->data[i] += n.grad.data[i] * n.value.data[i];
    });
}

template <class Real>
Var<Real> softplus(const Var<Real>& a) {
    Tensor<Real> out = a.value();
    for (auto& v : out.data)
        v = v > Real(0) ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v));
    auto an = detail::src(a);
    return detail::make_op<Real>(std::move(out), {a}, [an](Node<Real>& n) {
        if (auto* g = an.grad_or_null())
            for (std::size_t i = 0; i < n.grad.data.size(); ++i) {
                const Real x = an.value().data[i];
                const Real sig = Real(1) / (Real(1) + std::exp(-x));
                g->data[i] += n.grad.data[i] * sig;
            }
    });
}

template <class Real>
Var<Real> square(const Var<Real>& a) {
    Tensor<Real> out = a.value();
    for (auto& v : out.data) v = v * v;
    auto an = detail::src(a);
    return detail::make_op<Real>(std::move(out), {a}, [an](Node<Real>& n) {
        if (auto* g = an.grad_or_null())
            for (std::size_t i = 0; i < n.grad.data.size(); ++i)
                g->data[i] += n.grad.data[i] * Real(2) * an.value().data[i];
    });
}

/// Elementwise minimum; gradient routed to the smaller input (ties -> a).
template <class Real>
Var<Real> min_elem(const Var<Real>& a, const Var<Real>& b) {
    if (!a.value().same_shape(b.value())) throw ContractError("min_elem: shape mismatch");
    Tensor<Real> out = a.value();
    for (std::size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = std::min(out.data[i], b.value().data[i]);
    auto an = detail::src(a), bn = detail::src(b);
    return detail::make_op<Real>(std::move(out), {a, b}, [an, bn](Node<Real>& n) {
        for (std::size_t i = 0; i < n.grad.data.size(); ++i) {
            const bool take_a = an.value().data[i] <= bn.value().data[i];
            const auto& p = take_a ? an : bn;
            if (p.rg) {
                p.n->ensure_grad();
                p.n->grad.data[i] += n.grad.data[i];
            }
        }
    });
}

// ---- shape ops -------------------------------------------------------------

template <class Real>
Var<Real> reshape(const Var<Real>& a, std::vector<int> s) {
    Tensor<Real> out = a.value().reshaped(std::move(s));
    auto an = detail::src(a);
    return detail::make_op<Real>(std::move(out), {a}, [an](Node<Real>& n) {
        if (auto* g = an.grad_or_null())
            for (std::size_t i = 0; i < n.grad.data.size(); ++i) g->data[i] += n.grad.data[i];
    });
}

/// Concatenate along the leading (batch) dimension.
template <class Real>
Var<Real> concat_rows(const Var<Real>& a, const Var<Real>& b) {
    const auto& av = a.value();
    const auto& bv = b.value();
    if (av.ndim() != bv.ndim()) throw ContractError("concat_rows: rank mismatch");
    for (int i = 1; i < av.ndim(); ++i)
        if (av.dim(i) != bv.dim(i)) throw ContractError("concat_rows: trailing shape mismatch");
    std::vector<int> s = av.shape;
    s[0] += bv.dim(0);
    Tensor<Real> out(s);
    std::copy(av.data.begin(), av.data.end(), out.data.begin());
    std::copy(bv.data.begin(), bv.data.end(), out.data.begin() + av.numel());
    auto an = detail::src(a), bn = detail::src(b);
    const std::size_t na = av.data.size();
    return detail::make_op<Real>(std::move(out), {a, b}, [an, bn, na](Node<Real>& n) {
        if (auto* g = an.grad_or_null())
            for (std::size_t i = 0; i < na; ++i) g->data[i] += n.grad.data[i];
        if (auto* g = bn.grad_or_null())
            for (std::size_t i = 0; i < bn.value().data.size(); ++i)
                g->data[i] += n.grad.data[na + i];
    });
}

/// Concatenate two [B, X] matrices along dim 1.
template <class Real>
Var<Real> concat_cols(const Var<Real>& a, const Var<Real>& b) {
    const auto& av = a.value();
    const auto& bv = b.value();
    if (av.ndim() != 2 || bv.ndim() != 2 || av.dim(0) != bv.dim(0))
        throw ContractError("concat_cols: expects [B,X] with equal B");
    const int B = av.dim(0), ca = av.dim(1), cb = bv.dim(1);
    Tensor<Real> out({B, ca + cb});
    for (int r = 0; r < B; ++r) {
        for (int c = 0; c < ca; ++c) out.at(r, c) = av.at(r, c);
        for (int c = 0; c < cb; ++c) out.at(r, ca + c) = bv.at(r, c);
    }
    auto an = detail::src(a), bn = detail::src(b);
    return detail::make_op<Real>(std::move(out), {a, b}, [an, bn, B, ca, cb](Node<Real>& n) {
        if (auto* g = an.grad_or_null())
            for (int r = 0; r < B; ++r)
                for (int c = 0; c < ca; ++c) g->at(r, c) += n.grad.at(r, c);
        if (auto* g = bn.grad_or_null())
            for (int r = 0; r < B; ++r)
                for (int c = 0; c < cb; ++c) g->at(r, c) += n.grad.at(r, ca + c);
    });
}

/// Column slice [c0, c1) of a [B, C] matrix.
template <class Real>
Var<Real> slice_cols(const Var<Real>& a, int c0, int c1) {
    const auto& av = a.value();
    if (av.ndim() != 2 || c0 < 0 || c1 > av.dim(1) || c0 >= c1)
        throw ContractError("slice_cols: bad range");
    const int B = av.dim(0), w = c1 - c0;
    Tensor<Real> out({B, w});
    for (int r = 0; r < B; ++r)
        for (int c = 0; c < w; ++c) out.at(r, c) = av.at(r, c0 + c);
    auto an = detail::src(a);
    return detail::make_op<Real>(std::move(out), {a}, [an, B, w, c0](Node<Real>& n) {
        if (auto* g = an.grad_or_null())
            for (int r = 0; r < B; ++r)
                for (int c = 0; c < w; ++c) g->at(r, c0 + c) += n.grad.at(r, c);
    });
}

// ---- reductions ------------------------------------------------------------

/// [B, D] -> [B]: sum over the feature dimension.
template <class Real>
Var<Real> row_sum(const Var<Real>& a) {
    const auto& av = a.value();
    if (av.ndim() != 2) throw ContractError("row_sum: expects [B,D]");
    const int B = av.dim(0), D = av.dim(1);
    Tensor<Real> out({B});
    for (int r = 0; r < B; ++r) {
        Real s = 0;
        for (int c = 0; c < D; ++c) s += av.at(r, c);
        out[r] = s;
    }
    auto an = detail::src(a);
    return detail::make_op<Real>(std::move(out), {a}, [an, B, D](Node<Real>& n) {
        if (auto* g = an.grad_or_null())
            for (int r = 0; r < B; ++r)
                for (int c = 0; c < D; ++c) g->at(r, c) += n.grad[r];
    });
}

template <class Real>
Var<Real> sum_v(const Var<Real>& a) {
    Real s = 0;
    for (Real v : a.value().data) s += v;
    auto an = detail::src(a);
    return detail::make_op<Real>(Tensor<Real>::scalar(s), {a}, [an](Node<Real>& n) {
        if (auto* g = an.grad_or_null())
            for (auto& gv : g->data) gv += n.grad.data[0];
    });
}

template <class Real>
Var<Real> mean_v(const Var<Real>& a) {
    const Real inv = Real(1) / Real(a.value().numel());
    Real s = 0;
    for (Real v : a.value().data) s += v;
    auto an = detail::src(a);
    return detail::make_op<Real>(Tensor<Real>::scalar(s * inv), {a}, [an, inv](Node<Real>& n) {
        if (auto* g = an.grad_or_null())
            for (auto& gv : g->data) gv += n.grad.data[0] * inv;
    });
}

// ---- linear / conv / norm ---------------------------------------------------

/// x [B,I] @ w [O,I]^T + b [O] -> [B,O]
template <class Real>
Var<Real> linear(const Var<Real>& x, const Var<Real>& w, const Var<Real>& b) {
    const auto& xv = x.value();
    const auto& wv = w.value();
    const auto& bv = b.value();
    if (xv.ndim() != 2 || wv.ndim() != 2 || xv.dim(1) != wv.dim(1) || bv.dim(0) != wv.dim(0))
        throw ContractError("linear: shape mismatch");
    const int B = xv.dim(0), I = xv.dim(1), O = wv.dim(0);
    Tensor<Real> out({B, O});
    for (int r = 0; r < B; ++r) {
        const Real* xr = xv.data.data() + std::int64_t(r) * I;
        Real* orow = out.data.data() + std::int64_t(r) * O;
        for (int o = 0; o < O; ++o) {
            const Real* wr = wv.data.data() + std::int64_t(o) * I;
            Real s = bv[o];
            for (int i = 0; i < I; ++i) s += xr[i] * wr[i];
            orow[o] = s;
        }
    }
    auto xn = detail::src(x), wn = detail::src(w), bn = detail::src(b);
    return detail::make_op<Real>(std::move(out), {x, w, b}, [xn, wn, bn, B, I, O](Node<Real>& n) {
        if (auto* xg = xn.grad_or_null()) {
            for (int r = 0; r < B; ++r) {
                const Real* gr = n.grad.data.data() + std::int64_t(r) * O;
                Real* row = xg->data.data() + std::int64_t(r) * I;
                for (int o = 0; o < O; ++o) {
                    const Real g = gr[o];
                    if (g == Real(0)) continue;
                    const Real* wr = wn.value().data.data() + std::int64_t(o) * I;
                    for (int i = 0; i < I; ++i) row[i] += g * wr[i];
                }
            }
        }
        if (auto* wg = wn.grad_or_null()) {
            for (int o = 0; o < O; ++o) {
                Real* row = wg->data.data() + std::int64_t(o) * I;
                for (int r = 0; r < B; ++r) {
                    const Real g = n.grad.data[std::int64_t(r) * O + o];
                    if (g == Real(0)) continue;
                    const Real* xr = xn.value().data.data() + std::int64_t(r) * I;
                    for (int i = 0; i < I; ++i) row[i] += g * xr[i];
                }
            }
        }
        if (auto* bg = bn.grad_or_null()) {
            for (int r = 0; r < B; ++r)
                for (int o = 0; o < O; ++o)
                    bg->data[std::size_t(o)] += n.grad.data[std::int64_t(r) * O + o];
        }
    });
}

/// x [B,Ci,H,W], w [Co,Ci,K,K], b [Co], valid padding -> [B,Co,OH,OW]
template <class Real>
Var<Real> conv2d(const Var<Real>& x, const Var<Real>& w, const Var<Real>& b, int stride) {
    const auto& xv = x.value();
    const auto& wv = w.value();
    if (xv.ndim() != 4 || wv.ndim() != 4 || xv.dim(1) != wv.dim(1))
        throw ContractError("conv2d: shape mismatch");
    const int B = xv.dim(0), Ci = xv.dim(1), H = xv.dim(2), W = xv.dim(3);
    const int Co = wv.dim(0), K = wv.dim(2);
    const int OH = (H - K) / stride + 1, OW = (W - K) / stride + 1;
    if (OH <= 0 || OW <= 0) throw ContractError("conv2d: kernel larger than input");
    Tensor<Real> out({B, Co, OH, OW});
    const auto& bv = b.value();
    for (int bi = 0; bi < B; ++bi) {
        for (int co = 0; co < Co; ++co) {
            Real* oplane = &out.at(bi, co, 0, 0);
            const Real bias = bv[co];
            for (std::int64_t i = 0; i < std::int64_t(OH) * OW; ++i) oplane[i] = bias;
            for (int ci = 0; ci < Ci; ++ci) {
                const Real* iplane = &xv.at(bi, ci, 0, 0);
                for (int kh = 0; kh < K; ++kh) {
                    for (int kw = 0; kw < K; ++kw) {
                        const Real wt = wv.at(co, ci, kh, kw);
                        for (int oh = 0; oh < OH; ++oh) {
                            const Real* irow = iplane + std::int64_t(oh * stride + kh) * W + kw;
                            Real* orow = oplane + std::int64_t(oh) * OW;
                            for (int ow = 0; ow < OW; ++ow) orow[ow] += wt * irow[ow * stride];
                        }
                    }
                }
            }
        }
    }
    auto xn = detail::src(x), wn = detail::src(w), bn = detail::src(b);
    return detail::make_op<Real>(
        std::move(out), {x, w, b},
        [xn, wn, bn, B, Ci, H, W, Co, K, OH, OW, stride](Node<Real>& n) {
            if (auto* xg = xn.grad_or_null()) {
                for (int bi = 0; bi < B; ++bi)
                    for (int co = 0; co < Co; ++co) {
                        const Real* gplane = &n.grad.at(bi, co, 0, 0);
                        for (int ci = 0; ci < Ci; ++ci) {
                            Real* igplane =
                                xg->data.data() + (std::int64_t(bi) * Ci + ci) * H * W;
                            for (int kh = 0; kh < K; ++kh)
                                for (int kw = 0; kw < K; ++kw) {
                                    const Real wt = wn.value().at(co, ci, kh, kw);
                                    for (int oh = 0; oh < OH; ++oh) {
                                        Real* igrow =
                                            igplane + std::int64_t(oh * stride + kh) * W + kw;
                                        const Real* grow = gplane + std::int64_t(oh) * OW;
                                        for (int ow = 0; ow < OW; ++ow)
                                            igrow[ow * stride] += wt * grow[ow];
                                    }
                                }
                        }
                    }
            }
            if (auto* wg = wn.grad_or_null()) {
                for (int co = 0; co < Co; ++co)
                    for (int ci = 0; ci < Ci; ++ci)
                        for (int kh = 0; kh < K; ++kh)
                            for (int kw = 0; kw < K; ++kw) {
                                Real acc = 0;
                                for (int bi = 0; bi < B; ++bi) {
                                    const Real* gplane = &n.grad.at(bi, co, 0, 0);
                                    const Real* iplane = &xn.value().at(bi, ci, 0, 0);
                                    for (int oh = 0; oh < OH; ++oh) {
                                        const Real* irow =
                                            iplane + std::int64_t(oh * stride + kh) * W + kw;
                                        const Real* grow = gplane + std::int64_t(oh) * OW;
                                        for (int ow = 0; ow < OW; ++ow)
                                            acc += grow[ow] * irow[ow * stride];
                                    }
                                }
                                wg->at(co, ci, kh, kw) += acc;
                            }
            }
            if (auto* bg = bn.grad_or_null()) {
                for (int bi = 0; bi < B; ++bi)
                    for (int co = 0; co < Co; ++co) {
                        const Real* gplane = &n.grad.at(bi, co, 0, 0);
                        Real acc = 0;
                        for (std::int64_t i = 0; i < std::int64_t(OH) * OW; ++i) acc += gplane[i];
                        bg->data[std::size_t(co)] += acc;
                    }
            }
        });
}

/// Per-row layer normalization over the feature dimension of [B, F].
template <class Real>
Var<Real> layer_norm(const Var<Real>& x, const Var<Real>& gamma, const Var<Real>& beta,
                     Real eps = Real(1e-5)) {
    const auto& xv = x.value();
    if (xv.ndim() != 2) throw ContractError("layer_norm: expects [B,F]");
    const int B = xv.dim(0), F = xv.dim(1);
    if (gamma.value().dim(0) != F || beta.value().dim(0) != F)
        throw ContractError("layer_norm: gamma/beta size mismatch");
    Tensor<Real> out({B, F});
    Tensor<Real> xhat({B, F});
    Tensor<Real> inv_std({B});
    for (int r = 0; r < B; ++r) {
        Real mu = 0;
        for (int c = 0; c < F; ++c) mu += xv.at(r, c);
        mu /= Real(F);
        Real var = 0;
        for (int c = 0; c < F; ++c) {
            const Real d = xv.at(r, c) - mu;
            var += d * d;
        }
        var /= Real(F);
        const Real is = Real(1) / std::sqrt(var + eps);
        inv_std[r] = is;
        for (int c = 0; c < F; ++c) {
            const Real xh = (xv.at(r, c) - mu) * is;
            xhat.at(r, c) = xh;
            out.at(r, c) = xh * gamma.value()[c] + beta.value()[c];
        }
    }
    auto xn = detail::src(x), gn = detail::src(gamma), bn = detail::src(beta);
    auto xhat_p = std::make_shared<Tensor<Real>>(std::move(xhat));
    auto istd_p = std::make_shared<Tensor<Real>>(std::move(inv_std));
    return detail::make_op<Real>(
        std::move(out), {x, gamma, beta}, [xn, gn, bn, xhat_p, istd_p, B, F](Node<Real>& n) {
            const auto& xh = *xhat_p;
            if (auto* gg = gn.grad_or_null()) {
                for (int r = 0; r < B; ++r)
                    for (int c = 0; c < F; ++c)
                        gg->data[std::size_t(c)] += n.grad.at(r, c) * xh.at(r, c);
            }
            if (auto* bg = bn.grad_or_null()) {
                for (int r = 0; r < B; ++r)
                    for (int c = 0; c < F; ++c) bg->data[std::size_t(c)] += n.grad.at(r, c);
            }
            if (auto* xg = xn.grad_or_null()) {
                for (int r = 0; r < B; ++r) {
                    Real sum_dxhat = 0, sum_dxhat_xhat = 0;
                    for (int c = 0; c < F; ++c) {
                        const Real dxh = n.grad.at(r, c) * gn.value()[c];
                        sum_dxhat += dxh;
                        sum_dxhat_xhat += dxh * xh.at(r, c);
                    }
                    const Real is = (*istd_p)[r];
                    for (int c = 0; c < F; ++c) {
                        const Real dxh = n.grad.at(r, c) * gn.value()[c];
                        xg->at(r, c) += is * (dxh - sum_dxhat / Real(F) -
                                              xh.at(r, c) * sum_dxhat_xhat / Real(F));
                    }
                }
            }
        });
}

}  // namespace sada::ad
