#pragma once

// Grayscale raster types, summed-area statistics, connected components and
// binary morphology. Convention throughout: row-major storage, foreground in
// a BinaryMap is the value 0 (dark ridge on light background).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "fpforge/errors.hpp"

namespace fpforge {

struct GrayImage {
    int width = 0;
    int height = 0;
    double ppi = 500.0;
    std::vector<double> data; // intensities in [0,255]

    GrayImage() = default;
    GrayImage(int w, int h, double fill = 0.0, double dpi = 500.0)
        : width(w), height(h), ppi(dpi) {
        if (w <= 0 || h <= 0)
            throw BadDimension("GrayImage: non-positive size");
        data.assign(static_cast<size_t>(w) * h, fill);
    }

    bool empty() const { return data.empty(); }
    double& at(int x, int y) { return data[static_cast<size_t>(y) * width + x]; }
    double at(int x, int y) const { return data[static_cast<size_t>(y) * width + x]; }
    bool in_bounds(int x, int y) const {
        return x >= 0 && x < width && y >= 0 && y < height;
    }
};

struct BinaryMap {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data; // 0 = foreground, 255 = background

    BinaryMap() = default;
    BinaryMap(int w, int h, std::uint8_t fill = 255) : width(w), height(h) {
        if (w <= 0 || h <= 0)
            throw BadDimension("BinaryMap: non-positive size");
        data.assign(static_cast<size_t>(w) * h, fill);
    }

    std::uint8_t& at(int x, int y) { return data[static_cast<size_t>(y) * width + x]; }
    std::uint8_t at(int x, int y) const { return data[static_cast<size_t>(y) * width + x]; }
};

struct ForegroundMask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data; // 1 = inside region of interest

    ForegroundMask() = default;
    ForegroundMask(int w, int h, bool fill = false) : width(w), height(h) {
        if (w <= 0 || h <= 0)
            throw BadDimension("ForegroundMask: non-positive size");
        data.assign(static_cast<size_t>(w) * h, fill ? 1 : 0);
    }

    std::uint8_t& at(int x, int y) { return data[static_cast<size_t>(y) * width + x]; }
    std::uint8_t at(int x, int y) const { return data[static_cast<size_t>(y) * width + x]; }
};

// Summed-area tables over intensity and squared intensity, one row and one
// column larger than the source so any rectangle is four lookups.
struct IntegralPair {
    int width = 0;  // source image size
    int height = 0;
    std::vector<double> sum;   // (width+1) * (height+1)
    std::vector<double> sumsq;

    double rect_sum(int x0, int y0, int x1, int y1) const { // inclusive corners
        const int W = width + 1;
        return sum[static_cast<size_t>(y1 + 1) * W + (x1 + 1)] -
               sum[static_cast<size_t>(y0) * W + (x1 + 1)] -
               sum[static_cast<size_t>(y1 + 1) * W + x0] +
               sum[static_cast<size_t>(y0) * W + x0];
    }
    double rect_sumsq(int x0, int y0, int x1, int y1) const {
        const int W = width + 1;
        return sumsq[static_cast<size_t>(y1 + 1) * W + (x1 + 1)] -
               sumsq[static_cast<size_t>(y0) * W + (x1 + 1)] -
               sumsq[static_cast<size_t>(y1 + 1) * W + x0] +
               sumsq[static_cast<size_t>(y0) * W + x0];
    }
};

inline IntegralPair build_integral(const GrayImage& img) {
    if (img.empty())
        throw BadDimension("build_integral: empty image");
    IntegralPair ip;
    ip.width = img.width;
    ip.height = img.height;
    const int W = img.width + 1;
    ip.sum.assign(static_cast<size_t>(W) * (img.height + 1), 0.0);
    ip.sumsq.assign(static_cast<size_t>(W) * (img.height + 1), 0.0);
    // horizontal prefix per row, then a columnwise top-down pass; splitting
    // the directions keeps the second pass vectorizable
    for (int y = 0; y < img.height; ++y) {
        const double* src = img.data.data() + static_cast<size_t>(y) * img.width;
        double* s = ip.sum.data() + static_cast<size_t>(y + 1) * W;
        double* q = ip.sumsq.data() + static_cast<size_t>(y + 1) * W;
        double row = 0.0, rowsq = 0.0;
        for (int x = 0; x < img.width; ++x) {
            const double v = src[x];
            row += v;
            rowsq += v * v;
            s[x + 1] = row;
            q[x + 1] = rowsq;
        }
    }
    for (int y = 1; y < img.height; ++y) {
        const double* __restrict sp = ip.sum.data() + static_cast<size_t>(y) * W;
        double* __restrict s = ip.sum.data() + static_cast<size_t>(y + 1) * W;
        const double* __restrict qp = ip.sumsq.data() + static_cast<size_t>(y) * W;
        double* __restrict q = ip.sumsq.data() + static_cast<size_t>(y + 1) * W;
        for (int x = 1; x <= img.width; ++x) {
            s[x] += sp[x];
            q[x] += qp[x];
        }
    }
    return ip;
}

struct WindowStats {
    double mean = 0.0;
    double stddev = 0.0;
};

// Local mean and standard deviation over a w x w window centered at (x, y).
// Windows are clipped at the borders and the clipped pixel count is the
// divisor; the variance is clamped at zero before the square root.
inline WindowStats window_stats(const IntegralPair& ip, int x, int y, int w) {
    if (w < 3 || w % 2 == 0)
        throw BadParameter("window_stats: window must be odd and >= 3");
    if (x < 0 || x >= ip.width || y < 0 || y >= ip.height)
        throw OutOfBounds("window_stats: center outside image");
    const int half = w / 2;
    const int x0 = std::max(0, x - half);
    const int y0 = std::max(0, y - half);
    const int x1 = std::min(ip.width - 1, x + half);
    const int y1 = std::min(ip.height - 1, y + half);
    const double n = static_cast<double>(x1 - x0 + 1) * (y1 - y0 + 1);
    const double m = ip.rect_sum(x0, y0, x1, y1) / n;
    const double m2 = ip.rect_sumsq(x0, y0, x1, y1) / n;
    WindowStats ws;
    ws.mean = m;
    ws.stddev = std::sqrt(std::max(0.0, m2 - m * m));
    return ws;
}

namespace detail {

inline void check_se(const BinaryMap& bm, int se_w, int se_h) {
    if (bm.data.empty())
        throw BadDimension("morphology: empty map");
    if (se_w < 1 || se_h < 1)
        throw BadParameter("morphology: non-positive structuring element");
}

} // namespace detail

// Erosion with a solid se_w x se_h rectangle anchored at its top-left corner.
// Out-of-bounds pixels count as background, so foreground touching the border
// erodes away on the far sides.
inline BinaryMap morph_erode(const BinaryMap& bm, int se_w, int se_h) {
    detail::check_se(bm, se_w, se_h);
    BinaryMap out(bm.width, bm.height, 255);
    for (int y = 0; y + se_h <= bm.height; ++y) {
        for (int x = 0; x + se_w <= bm.width; ++x) {
            bool all_fg = true;
            for (int j = 0; j < se_h && all_fg; ++j)
                for (int i = 0; i < se_w; ++i)
                    if (bm.at(x + i, y + j) != 0) { all_fg = false; break; }
            if (all_fg) out.at(x, y) = 0;
        }
    }
    return out;
}

inline BinaryMap morph_dilate(const BinaryMap& bm, int se_w, int se_h) {
    detail::check_se(bm, se_w, se_h);
    BinaryMap out(bm.width, bm.height, 255);
    for (int y = 0; y < bm.height; ++y) {
        for (int x = 0; x < bm.width; ++x) {
            if (bm.at(x, y) != 0) continue;
            const int x1 = std::min(bm.width, x + se_w);
            const int y1 = std::min(bm.height, y + se_h);
            for (int j = y; j < y1; ++j)
                for (int i = x; i < x1; ++i)
                    out.at(i, j) = 0;
        }
    }
    return out;
}

// Opening = erosion then dilation; keeps exactly the union of element
// translates fully contained in the foreground.
inline BinaryMap morph_open(const BinaryMap& bm, int se_w, int se_h) {
    return morph_dilate(morph_erode(bm, se_w, se_h), se_w, se_h);
}

inline double foreground_ratio(const ForegroundMask& mask) {
    if (mask.data.empty())
        throw BadDimension("foreground_ratio: empty mask");
    size_t n = 0;
    for (std::uint8_t v : mask.data)
        if (v) ++n;
    return static_cast<double>(n) / static_cast<double>(mask.data.size());
}

struct ComponentLabels {
    std::vector<int> label; // -1 where mask is false
    int count = 0;
};

// 4-connected components of the true region, iterative flood fill.
inline ComponentLabels label_components(const ForegroundMask& mask) {
    if (mask.data.empty())
        throw BadDimension("label_components: empty mask");
    ComponentLabels cl;
    cl.label.assign(mask.data.size(), -1);
    std::vector<int> stack;
    for (size_t seed = 0; seed < mask.data.size(); ++seed) {
        if (!mask.data[seed] || cl.label[seed] >= 0) continue;
        const int id = cl.count++;
        stack.push_back(static_cast<int>(seed));
        cl.label[seed] = id;
        while (!stack.empty()) {
            const int idx = stack.back();
            stack.pop_back();
            const int x = idx % mask.width;
            const int y = idx / mask.width;
            const int nb[4][2] = {{x - 1, y}, {x + 1, y}, {x, y - 1}, {x, y + 1}};
            for (auto& [nx, ny] : nb) {
                if (nx < 0 || nx >= mask.width || ny < 0 || ny >= mask.height)
                    continue;
                const size_t nidx = static_cast<size_t>(ny) * mask.width + nx;
                if (mask.data[nidx] && cl.label[nidx] < 0) {
                    cl.label[nidx] = id;
                    stack.push_back(static_cast<int>(nidx));
                }
            }
        }
    }
    return cl;
}

inline ForegroundMask largest_component(const ForegroundMask& mask) {
    const ComponentLabels cl = label_components(mask);
    ForegroundMask out(mask.width, mask.height, false);
    if (cl.count == 0) return out;
    std::vector<size_t> sizes(cl.count, 0);
    for (int l : cl.label)
        if (l >= 0) ++sizes[l];
    const int best = static_cast<int>(
        std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
    for (size_t i = 0; i < cl.label.size(); ++i)
        out.data[i] = cl.label[i] == best ? 1 : 0;
    return out;
}

// Fills enclosed background: any 4-connected false region not reaching the
// border becomes foreground.
inline ForegroundMask fill_holes(const ForegroundMask& mask) {
    ForegroundMask inv(mask.width, mask.height, false);
    for (size_t i = 0; i < mask.data.size(); ++i)
        inv.data[i] = mask.data[i] ? 0 : 1;
    const ComponentLabels cl = label_components(inv);
    std::vector<std::uint8_t> touches(static_cast<size_t>(std::max(cl.count, 1)), 0);
    for (int x = 0; x < mask.width; ++x) {
        for (int y : {0, mask.height - 1}) {
            const int l = cl.label[static_cast<size_t>(y) * mask.width + x];
            if (l >= 0) touches[l] = 1;
        }
    }
    for (int y = 0; y < mask.height; ++y) {
        for (int x : {0, mask.width - 1}) {
            const int l = cl.label[static_cast<size_t>(y) * mask.width + x];
            if (l >= 0) touches[l] = 1;
        }
    }
    ForegroundMask out = mask;
    for (size_t i = 0; i < out.data.size(); ++i)
        if (cl.label[i] >= 0 && !touches[cl.label[i]])
            out.data[i] = 1;
    return out;
}

} // namespace fpforge
