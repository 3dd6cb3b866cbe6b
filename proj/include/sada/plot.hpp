// Copyright (c) 2026 The sada authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "sada/imageio.hpp"

namespace sada::plot {

/// 95% confidence half-width via the normal approximation (1.96 * sem).
inline double ci_halfwidth(const std::vector<double>& values) {
    const std::size_t n = values.size();
    if (n < 2) return 0.0;
    double mean = 0;
    for (double v : values) mean += v;
    mean /= double(n);
    double var = 0;
    for (double v : values) var += (v - mean) * (v - mean);
    var /= double(n - 1);
    return 1.96 * std::sqrt(var / double(n));
}

// ---- tiny raster canvas -------------------------------------------------------

struct Color {
    std::uint8_t r = 0, g = 0, b = 0;
};

class Canvas {
  public:
    Canvas(int height, int width, Color bg = {255, 255, 255})
        : h_(height), w_(width), px_(std::size_t(height) * width * 3) {
        for (int i = 0; i < height * width; ++i) set_index(i, bg);
    }

    int height() const { return h_; }
    int width() const { return w_; }

    void set(int r, int c, Color col) {
        if (r < 0 || r >= h_ || c < 0 || c >= w_) return;
        set_index(r * w_ + c, col);
    }

    void blend(int r, int c, Color col, double a) {
        if (r < 0 || r >= h_ || c < 0 || c >= w_) return;
        auto* p = &px_[(std::size_t(r) * w_ + c) * 3];
        p[0] = std::uint8_t(p[0] * (1 - a) + col.r * a);
        p[1] = std::uint8_t(p[1] * (1 - a) + col.g * a);
        p[2] = std::uint8_t(p[2] * (1 - a) + col.b * a);
    }

    void fill_rect(int r0, int c0, int r1, int c1, Color col) {
        for (int r = std::max(0, r0); r < std::min(h_, r1); ++r)
            for (int c = std::max(0, c0); c < std::min(w_, c1); ++c) set(r, c, col);
    }

    void line(int r0, int c0, int r1, int c1, Color col) {
        int dr = std::abs(r1 - r0), dc = std::abs(c1 - c0);
        int sr = r0 < r1 ? 1 : -1, sc = c0 < c1 ? 1 : -1;
        int err = (dc > dr ? dc : -dr) / 2;
        while (true) {
            set(r0, c0, col);
            if (r0 == r1 && c0 == c1) break;
            int e2 = err;
            if (e2 > -dc) {
                err -= dr;
                c0 += sc;
            }
            if (e2 < dr) {
                err += dc;
                r0 += sr;
            }
        }
    }

    void text(int r, int c, const std::string& s, Color col) {
        for (char ch : s) {
            draw_glyph(r, c, std::toupper(static_cast<unsigned char>(ch)), col);
            c += 6;
        }
    }

    void save(const std::string& path) const { write_ppm(path, h_, w_, px_); }

  private:
    int h_, w_;
    std::vector<std::uint8_t> px_;

    void set_index(int i, Color col) {
        px_[std::size_t(i) * 3 + 0] = col.r;
        px_[std::size_t(i) * 3 + 1] = col.g;
        px_[std::size_t(i) * 3 + 2] = col.b;
    }

    static const std::uint8_t* glyph(char ch) {
        // 5x7 font, one byte per row, low 5 bits used
        static const std::map<char, std::array<std::uint8_t, 7>> table = {
            {'0', {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}},
            {'1', {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E}},
            {'2', {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}},
            {'3', {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E}},
            {'4', {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}},
            {'5', {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E}},
            {'6', {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}},
            {'7', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
            {'8', {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}},
            {'9', {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}},
            {'A', {0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
            {'B', {0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E}},
            {'C', {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E}},
            {'D', {0x1C, 0x12, 0x11, 0x11, 0x11, 0x12, 0x1C}},
            {'E', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F}},
            {'F', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10}},
            {'G', {0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F}},
            {'H', {0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
            {'I', {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E}},
            {'J', {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C}},
            {'K', {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11}},
            {'L', {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F}},
            {'M', {0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11}},
            {'N', {0x11, 0x19, 0x15, 0x13, 0x11, 0x11, 0x11}},
            {'O', {0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}},
            {'P', {0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10}},
            {'Q', {0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D}},
            {'R', {0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11}},
            {'S', {0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E}},
            {'T', {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04}},
            {'U', {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}},
            {'V', {0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04}},
            {'W', {0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0A}},
            {'X', {0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11}},
            {'Y', {0x11, 0x11, 0x0A, 0x04, 0x04, 0x04, 0x04}},
            {'Z', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F}},
            {'.', {0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C}},
            {',', {0x00, 0x00, 0x00, 0x00, 0x0C, 0x04, 0x08}},
            {'-', {0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00}},
            {'_', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x1F}},
            {':', {0x00, 0x0C, 0x0C, 0x00, 0x0C, 0x0C, 0x00}},
            {'%', {0x18, 0x19, 0x02, 0x04, 0x08, 0x13, 0x03}},
            {'/', {0x01, 0x02, 0x02, 0x04, 0x08, 0x08, 0x10}},
            {'+', {0x00, 0x04, 0x04, 0x1F, 0x04, 0x04, 0x00}},
            {' ', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00}},
        };
        auto it = table.find(ch);
        return it == table.end() ? table.at(' ').data() : it->second.data();
    }

    void draw_glyph(int r, int c, char ch, Color col) {
        const std::uint8_t* g = glyph(ch);
        for (int gr = 0; gr < 7; ++gr)
            for (int gc = 0; gc < 5; ++gc)
                if (g[gr] & (1 << (4 - gc))) set(r + gr, c + gc, col);
    }
};

// ---- metric CSV reading ---------------------------------------------------------

struct TrainRow {
    long long step = 0;
    double episode_reward = 0;
};

inline std::vector<TrainRow> read_train_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot read metrics csv: " + path);
    std::string line;
    if (!std::getline(f, line)) throw IoError("empty metrics csv: " + path);
    if (line.rfind("step,episode,", 0) != 0) throw IoError("unrecognized csv header: " + path);
    std::vector<TrainRow> rows;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        TrainRow r;
        int col = 0;
        while (std::getline(ss, cell, ',')) {
            try {
                if (col == 0) r.step = std::stoll(cell);
                if (col == 2) r.episode_reward = std::stod(cell);
            } catch (const std::exception&) {
                throw IoError("corrupt csv cell in " + path);
            }
            ++col;
        }
        if (col < 7) throw IoError("corrupt csv row in " + path);
        rows.push_back(r);
    }
    return rows;
}

/// Bin per-episode rewards onto a fixed step grid (mean per bin).
inline std::vector<double> bin_rewards(const std::vector<TrainRow>& rows, long long bin_width,
                                       long long max_step) {
    const std::size_t bins = std::size_t((max_step + bin_width - 1) / bin_width);
    std::vector<double> sums(bins, 0), counts(bins, 0);
    for (const auto& r : rows) {
        std::size_t b = std::min(bins - 1, std::size_t(std::max(0LL, (r.step - 1) / bin_width)));
        sums[b] += r.episode_reward;
        counts[b] += 1;
    }
    std::vector<double> out(bins, std::nan(""));
    double last = std::nan("");
    for (std::size_t b = 0; b < bins; ++b) {
        if (counts[b] > 0) last = sums[b] / counts[b];
        out[b] = last;
    }
    return out;
}

// ---- figures ---------------------------------------------------------------------

/// Training curve: mean episode reward vs step across runs, with a 1.96 sem
/// band. One curve aggregated over all given run directories.
inline void render_training_curves(const std::vector<std::string>& run_dirs,
                                   const std::string& out_path, long long bin_width = 1000) {
    if (run_dirs.empty()) throw ContractError("no run directories given");
    std::vector<std::vector<TrainRow>> all;
    long long max_step = 0;
    for (const auto& dir : run_dirs) {
        all.push_back(read_train_csv(dir + "/train.csv"));
        for (const auto& r : all.back()) max_step = std::max(max_step, r.step);
    }
    if (max_step == 0) throw IoError("metrics contain no finished episodes");
    std::vector<std::vector<double>> binned;
    for (const auto& rows : all) binned.push_back(bin_rewards(rows, bin_width, max_step));
    const std::size_t bins = binned.front().size();

    std::vector<double> mean(bins, std::nan("")), half(bins, 0);
    double ymax = 1e-9;
    for (std::size_t b = 0; b < bins; ++b) {
        std::vector<double> vals;
        for (const auto& run : binned)
            if (b < run.size() && !std::isnan(run[b])) vals.push_back(run[b]);
        if (vals.empty()) continue;
        double m = 0;
        for (double v : vals) m += v;
        mean[b] = m / double(vals.size());
        half[b] = ci_halfwidth(vals);
        ymax = std::max(ymax, mean[b] + half[b]);
    }

    const int H = 320, W = 480, ml = 52, mb = 32, mt = 14, mr = 12;
    Canvas cv(H, W);
    const Color axis{40, 40, 40}, curve{30, 90, 200}, band{130, 170, 235};
    auto to_r = [&](double y) { return int(H - mb - (y / ymax) * (H - mb - mt)); };
    auto to_c = [&](double b) {
        return int(ml + (b / double(std::max<std::size_t>(1, bins - 1))) * (W - ml - mr));
    };
    for (std::size_t b = 0; b + 1 < bins; ++b) {
        if (std::isnan(mean[b]) || std::isnan(mean[b + 1])) continue;
        const int c0 = to_c(double(b)), c1 = to_c(double(b + 1));
        for (int c = c0; c <= c1; ++c) {
            const double f = c1 == c0 ? 0 : double(c - c0) / (c1 - c0);
            const double m = mean[b] + f * (mean[b + 1] - mean[b]);
            const double hw = half[b] + f * (half[b + 1] - half[b]);
            for (int r = to_r(m + hw); r <= to_r(std::max(0.0, m - hw)); ++r)
                cv.blend(r, c, band, 0.55);
        }
    }
    for (std::size_t b = 0; b + 1 < bins; ++b)
        if (!std::isnan(mean[b]) && !std::isnan(mean[b + 1]))
            cv.line(to_r(mean[b]), to_c(double(b)), to_r(mean[b + 1]), to_c(double(b + 1)), curve);
    cv.line(H - mb, ml, H - mb, mt, axis);
    cv.line(H - mb, ml, H - mb, W - mr, axis);
    for (int k = 0; k <= 4; ++k) {
        const double y = ymax * k / 4;
        char label[32];
        std::snprintf(label, sizeof label, "%.0f", y);
        cv.text(to_r(y) - 3, 6, label, axis);
        cv.line(to_r(y), ml - 3, to_r(y), ml, axis);
    }
    for (int k = 0; k <= 4; ++k) {
        const long long s = max_step * k / 4;
        char label[32];
        std::snprintf(label, sizeof label, "%lld", s);
        cv.text(H - mb + 8, to_c(double(bins - 1) * k / 4) - 10, label, axis);
    }
    cv.text(2, W / 2 - 40, "REWARD VS STEP", axis);
    cv.save(out_path);
}

/// Per-distribution bar chart: one group per distribution, mean of the given
/// per-run means with a 1.96 sem whisker.
inline void render_eval_bars(const std::vector<std::string>& labels,
                             const std::vector<std::vector<double>>& per_label_values,
                             const std::string& out_path) {
    if (labels.empty() || labels.size() != per_label_values.size())
        throw ContractError("render_eval_bars: label/value mismatch");
    double ymax = 1e-9;
    std::vector<double> means(labels.size()), halves(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto& vals = per_label_values[i];
        if (vals.empty()) throw ContractError("render_eval_bars: empty value set");
        double m = 0;
        for (double v : vals) m += v;
        means[i] = m / double(vals.size());
        halves[i] = ci_halfwidth(vals);
        ymax = std::max(ymax, means[i] + halves[i]);
    }
    const int H = 340, W = std::max(480, int(labels.size()) * 64 + 80);
    const int ml = 52, mb = 90, mt = 14, mr = 12;
    Canvas cv(H, W);
    const Color axis{40, 40, 40}, bar{70, 140, 90}, whisk{20, 20, 20};
    auto to_r = [&](double y) { return int(H - mb - (y / ymax) * (H - mb - mt)); };
    const double slot = double(W - ml - mr) / double(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int c0 = int(ml + slot * i + slot * 0.2);
        const int c1 = int(ml + slot * i + slot * 0.8);
        cv.fill_rect(to_r(means[i]), c0, H - mb, c1, bar);
        const int cc = (c0 + c1) / 2;
        cv.line(to_r(means[i] + halves[i]), cc, to_r(std::max(0.0, means[i] - halves[i])), cc,
                whisk);
        // vertical-ish label: truncate to fit
        std::string lab = labels[i];
        if (lab.size() > 14) lab = lab.substr(0, 14);
        cv.text(H - mb + 10 + int(i % 2) * 12, c0 - 8, lab, axis);
        char val[32];
        std::snprintf(val, sizeof val, "%.0f", means[i]);
        cv.text(to_r(means[i]) - 10, cc - 8, val, axis);
    }
    cv.line(H - mb, ml, H - mb, mt, axis);
    cv.line(H - mb, ml, H - mb, W - mr, axis);
    for (int k = 0; k <= 4; ++k) {
        const double y = ymax * k / 4;
        char label[32];
        std::snprintf(label, sizeof label, "%.0f", y);
        cv.text(to_r(y) - 3, 6, label, axis);
    }
    cv.save(out_path);
}

}  // namespace sada::plot
