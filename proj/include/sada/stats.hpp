// Copyright (c) 2026 The sada authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "sada/common.hpp"

namespace sada::stats {

struct SampleSet {
    std::string label;
    std::vector<double> values;
};

struct TestResult {
    double t = 0;
    double p = 1;
    double dof = 0;
    bool reject = false;
};

inline double mean_of(const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x;
    return s / double(v.size());
}

/// Sample variance with the n-1 denominator.
inline double sample_variance(const std::vector<double>& v) {
    const double m = mean_of(v);
    double s = 0;
    for (double x : v) s += (x - m) * (x - m);
    return s / double(v.size() - 1);
}

/// Regularized incomplete beta I_x(a, b) via the Lentz continued fraction.
inline double regularized_incomplete_beta(double a, double b, double x) {
    if (x < 0.0 || x > 1.0) throw RangeError("ibeta: x outside [0,1]");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    const double ln_front =
        std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
        b * std::log1p(-x);
    auto cont_frac = [](double a_, double b_, double x_) {
        const double tiny = 1e-300;
        double c = 1.0, d = 1.0 - (a_ + b_) * x_ / (a_ + 1.0);
        if (std::abs(d) < tiny) d = tiny;
        d = 1.0 / d;
        double h = d;
        for (int m = 1; m <= 400; ++m) {
            const double m2 = 2.0 * m;
            double num = m * (b_ - m) * x_ / ((a_ + m2 - 1.0) * (a_ + m2));
            d = 1.0 + num * d;
            if (std::abs(d) < tiny) d = tiny;
            c = 1.0 + num / c;
            if (std::abs(c) < tiny) c = tiny;
            d = 1.0 / d;
            h *= d * c;
            num = -(a_ + m) * (a_ + b_ + m) * x_ / ((a_ + m2) * (a_ + m2 + 1.0));
            d = 1.0 + num * d;
            if (std::abs(d) < tiny) d = tiny;
            c = 1.0 + num / c;
            if (std::abs(c) < tiny) c = tiny;
            d = 1.0 / d;
            const double del = d * c;
            h *= del;
            if (std::abs(del - 1.0) < 1e-16) break;
        }
        return h;
    };
    if (x < (a + 1.0) / (a + b + 2.0))
        return std::exp(ln_front) * cont_frac(a, b, x) / a;
    return 1.0 - std::exp(std::lgamma(a + b) - std::lgamma(b) - std::lgamma(a) +
                          b * std::log1p(-x) + a * std::log(x)) *
                     cont_frac(b, a, 1.0 - x) / b;
}

/// P(T > t) for Student's t with `dof` degrees of freedom.
inline double student_t_upper_tail(double t, double dof) {
    if (dof <= 0) throw RangeError("student t: dof must be positive");
    if (std::isinf(t)) return t > 0 ? 0.0 : 1.0;
    const double x = dof / (dof + t * t);
    const double half = 0.5 * regularized_incomplete_beta(0.5 * dof, 0.5, x);
    return t >= 0 ? half : 1.0 - half;
}

/// One-tailed Welch t-test of H_a: mean(a) > mean(b). p is the upper-tail
/// probability of the Welch-Satterthwaite t distribution at the statistic.
inline TestResult welch_one_tailed(const SampleSet& a, const SampleSet& b,
                                   double alpha = 0.05) {
    if (a.values.size() < 2 || b.values.size() < 2)
        throw DegenerateInputError("welch: both samples need n >= 2");
    for (const auto& v : a.values)
        if (!std::isfinite(v)) throw DegenerateInputError("welch: non-finite value in " + a.label);
    for (const auto& v : b.values)
        if (!std::isfinite(v)) throw DegenerateInputError("welch: non-finite value in " + b.label);
    const double na = double(a.values.size()), nb = double(b.values.size());
    const double ma = mean_of(a.values), mb = mean_of(b.values);
    const double va = sample_variance(a.values), vb = sample_variance(b.values);
    const double sa = va / na, sb = vb / nb;
    TestResult r;
    if (sa + sb == 0.0) {
        if (ma == mb)
            throw DegenerateInputError("welch: zero variance in both samples with equal means");
        r.t = ma > mb ? std::numeric_limits<double>::infinity()
                      : -std::numeric_limits<double>::infinity();
        r.dof = na + nb - 2;
        r.p = ma > mb ? 0.0 : 1.0;
        r.reject = r.p < alpha;
        return r;
    }
    r.t = (ma - mb) / std::sqrt(sa + sb);
    r.dof = (sa + sb) * (sa + sb) / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    r.p = student_t_upper_tail(r.t, r.dof);
    r.reject = r.p < alpha;
    return r;
}

struct HolmEntry {
    double p = 1;
    double adjusted_alpha = 0;
    bool reject = false;
};

/// Step-down Holm-Bonferroni: the i-th smallest p-value is compared against
/// alpha / (m - i + 1); rejection stops at the first failure. Results are
/// returned in the original order.
inline std::vector<HolmEntry> holm_bonferroni(const std::vector<double>& p_values,
                                              double alpha) {
    if (!(alpha > 0.0) || !(alpha < 1.0)) throw RangeError("holm: alpha must be in (0, 1)");
    for (double p : p_values)
        if (!(p >= 0.0) || !(p <= 1.0)) throw RangeError("holm: p-value outside [0, 1]");
    const std::size_t m = p_values.size();
    std::vector<std::size_t> order(m);
    for (std::size_t i = 0; i < m; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t i, std::size_t j) { return p_values[i] < p_values[j]; });
    std::vector<HolmEntry> out(m);
    bool stopped = false;
    for (std::size_t rank = 0; rank < m; ++rank) {
        const std::size_t idx = order[rank];
        HolmEntry e;
        e.p = p_values[idx];
        e.adjusted_alpha = alpha / double(m - rank);
        e.reject = !stopped && e.p < e.adjusted_alpha;
        if (!e.reject) stopped = true;
        out[idx] = e;
    }
    return out;
}

}  // namespace sada::stats
