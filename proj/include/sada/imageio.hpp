// Copyright (c) 2026 The sada authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "sada/common.hpp"
#include "sada/tensor.hpp"

namespace sada {

/// Write a binary PPM (P6) from interleaved RGB bytes.
inline void write_ppm(const std::string& path, int height, int width,
                      const std::vector<std::uint8_t>& rgb) {
    if (rgb.size() != std::size_t(height) * width * 3)
        throw ContractError("write_ppm: buffer size mismatch");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for write: " + path);
    f << "P6\n" << width << " " << height << "\n255\n";
    f.write(reinterpret_cast<const char*>(rgb.data()), std::streamsize(rgb.size()));
    if (!f) throw IoError("write failed: " + path);
}

/// Write the newest 3-channel frame of a planar [C,H,W] unit-interval tensor.
template <class Real>
void write_frame_ppm(const std::string& path, const Tensor<Real>& obs, int frame = 0) {
    if (obs.ndim() != 3 || obs.dim(0) < 3 * (frame + 1))
        throw ContractError("write_frame_ppm: bad tensor");
    const int H = obs.dim(1), W = obs.dim(2);
    std::vector<std::uint8_t> rgb(std::size_t(H) * W * 3);
    for (int r = 0; r < H; ++r)
        for (int c = 0; c < W; ++c)
            for (int ch = 0; ch < 3; ++ch) {
                double v = double(obs.at(3 * frame + ch, r, c));
                v = v < 0 ? 0 : (v > 1 ? 1 : v);
                rgb[(std::size_t(r) * W + c) * 3 + ch] = std::uint8_t(v * 255.0 + 0.5);
            }
    write_ppm(path, H, W, rgb);
}

/// Read a binary PPM (P6) into a planar [3,H,W] unit-interval tensor.
template <class Real>
Tensor<Real> read_ppm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open: " + path);
    std::string magic;
    f >> magic;
    if (magic != "P6") throw IoError("not a P6 ppm: " + path);
    auto next_token = [&]() -> long {
        // skips whitespace and '#' comment lines
        while (true) {
            int ch = f.peek();
            if (ch == '#') {
                std::string line;
                std::getline(f, line);
            } else if (std::isspace(ch)) {
                f.get();
            } else {
                break;
            }
        }
        long v;
        f >> v;
        return v;
    };
    const long w = next_token(), h = next_token(), maxval = next_token();
    if (maxval != 255 || w <= 0 || h <= 0) throw IoError("unsupported ppm: " + path);
    f.get();  // single whitespace after header
    std::vector<std::uint8_t> rgb(std::size_t(h) * w * 3);
    f.read(reinterpret_cast<char*>(rgb.data()), std::streamsize(rgb.size()));
    if (!f) throw IoError("short read: " + path);
    Tensor<Real> out({3, int(h), int(w)});
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
            for (int ch = 0; ch < 3; ++ch)
                out.at(ch, r, c) = Real(rgb[(std::size_t(r) * w + c) * 3 + ch]) / Real(255);
    return out;
}

}  // namespace sada
