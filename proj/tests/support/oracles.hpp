#pragma once

// Brute-force reference implementations used only by the test suite. These
// deliberately avoid the library's integral-image and stamping shortcuts so
// agreement is meaningful.

#include <cmath>
#include <random>
#include <vector>

#include "fpforge/image.hpp"
#include "fpforge/sauvola.hpp"

namespace oracle {

// Clipped-window mean and stddev by direct summation.
inline fpforge::WindowStats naive_window_stats(const fpforge::GrayImage& img,
                                               int x, int y, int w) {
    const int half = w / 2;
    double sum = 0.0, sumsq = 0.0;
    int n = 0;
    for (int j = y - half; j <= y + half; ++j) {
        for (int i = x - half; i <= x + half; ++i) {
            if (i < 0 || i >= img.width || j < 0 || j >= img.height) continue;
            const double v = img.at(i, j);
            sum += v;
            sumsq += v * v;
            ++n;
        }
    }
    fpforge::WindowStats ws;
    ws.mean = sum / n;
    ws.stddev = std::sqrt(std::max(0.0, sumsq / n - ws.mean * ws.mean));
    return ws;
}

inline double naive_sauvola_threshold(const fpforge::GrayImage& img, int x, int y,
                                      const fpforge::SauvolaParams& p) {
    const auto ws = naive_window_stats(img, x, y, p.window);
    return ws.mean * (1.0 + p.k * (ws.stddev / p.range - 1.0));
}

inline fpforge::BinaryMap naive_binarize_no_open(const fpforge::GrayImage& img,
                                                 const fpforge::ForegroundMask& mask,
                                                 const fpforge::SauvolaParams& p) {
    fpforge::BinaryMap bm(img.width, img.height, 255);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            if (mask.at(x, y) && img.at(x, y) > naive_sauvola_threshold(img, x, y, p))
                bm.at(x, y) = 0;
    return bm;
}

// Opening by definition: a pixel is foreground iff some translate of the
// solid element covers it and lies entirely in the input foreground.
inline fpforge::BinaryMap naive_open(const fpforge::BinaryMap& bm, int sw, int sh) {
    fpforge::BinaryMap out(bm.width, bm.height, 255);
    for (int ty = 0; ty + sh <= bm.height; ++ty) {
        for (int tx = 0; tx + sw <= bm.width; ++tx) {
            bool fits = true;
            for (int j = 0; j < sh && fits; ++j)
                for (int i = 0; i < sw; ++i)
                    if (bm.at(tx + i, ty + j) != 0) { fits = false; break; }
            if (!fits) continue;
            for (int j = 0; j < sh; ++j)
                for (int i = 0; i < sw; ++i)
                    out.at(tx + i, ty + j) = 0;
        }
    }
    return out;
}

inline fpforge::GrayImage random_image(int w, int h, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> d(0, 255);
    fpforge::GrayImage img(w, h);
    for (auto& v : img.data) v = static_cast<double>(d(rng));
    return img;
}

inline fpforge::BinaryMap random_map(int w, int h, std::uint64_t seed,
                                     double fg_prob = 0.4) {
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution d(fg_prob);
    fpforge::BinaryMap bm(w, h, 255);
    for (auto& v : bm.data) v = d(rng) ? 0 : 255;
    return bm;
}

} // namespace oracle
