#pragma once

// Deterministic DDIM sampling core and codebook quantization. The noise
// predictor is an interface so the analytic oracle used by the tests and a
// real network model plug in the same way. No training happens here.

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "fpforge/errors.hpp"

namespace fpforge {

struct NoiseSchedule {
    int T = 0;
    std::vector<double> betas;      // per step, index 0 holds t = 1
    std::vector<double> alphas;     // 1 - beta
    std::vector<double> alpha_bars; // running product of alphas

    // cumulative coefficient with the t = 0 base case pinned to 1
    double alpha_bar(int t) const {
        if (t < 0 || t > T)
            throw BadParameter("NoiseSchedule: step out of range");
        return t == 0 ? 1.0 : alpha_bars[t - 1];
    }

    void validate() const {
        if (T < 1 || betas.size() != static_cast<size_t>(T) ||
            alphas.size() != static_cast<size_t>(T) ||
            alpha_bars.size() != static_cast<size_t>(T))
            throw BadParameter("NoiseSchedule: inconsistent sizes");
        double prev = 1.0;
        for (int t = 1; t <= T; ++t) {
            const double b = betas[t - 1];
            if (!(b > 0.0) || !(b < 1.0))
                throw BadParameter("NoiseSchedule: beta outside (0, 1)");
            const double a = alphas[t - 1];
            const double ab = alpha_bars[t - 1];
            if (!(ab < prev))
                throw BadParameter("NoiseSchedule: alpha_bar not strictly decreasing");
            if (std::abs(a * prev - ab) > 1e-12)
                throw BadParameter("NoiseSchedule: product identity violated");
            prev = ab;
        }
        if (!(prev > 0.0) || !(prev < 1.0))
            throw BadParameter("NoiseSchedule: alpha_bar(T) outside (0, 1)");
    }
};

inline NoiseSchedule linear_schedule(int T, double beta_start = 1e-4,
                                     double beta_end = 0.02) {
    if (T < 1)
        throw BadParameter("linear_schedule: T must be >= 1");
    if (!(beta_start > 0.0) || !(beta_start <= beta_end) || !(beta_end < 1.0))
        throw BadParameter("linear_schedule: need 0 < beta_start <= beta_end < 1");
    NoiseSchedule s;
    s.T = T;
    s.betas.resize(T);
    s.alphas.resize(T);
    s.alpha_bars.resize(T);
    double run = 1.0;
    for (int i = 0; i < T; ++i) {
        s.betas[i] =
            T == 1 ? beta_start : beta_start + (beta_end - beta_start) * i / (T - 1.0);
        s.alphas[i] = 1.0 - s.betas[i];
        run *= s.alphas[i];
        s.alpha_bars[i] = run;
    }
    s.validate();
    return s;
}

struct LatentGrid {
    int channels = 0, height = 0, width = 0;
    std::vector<double> values; // channel-major

    LatentGrid() = default;
    LatentGrid(int c, int h, int w, double fill = 0.0)
        : channels(c), height(h), width(w) {
        if (c < 1 || h < 1 || w < 1)
            throw BadDimension("LatentGrid: non-positive shape");
        values.assign(static_cast<size_t>(c) * h * w, fill);
    }

    size_t size() const { return values.size(); }
    bool same_shape(const LatentGrid& o) const {
        return channels == o.channels && height == o.height && width == o.width;
    }
    double& at(int c, int y, int x) {
        return values[(static_cast<size_t>(c) * height + y) * width + x];
    }
    double at(int c, int y, int x) const {
        return values[(static_cast<size_t>(c) * height + y) * width + x];
    }

    void validate() const {
        if (values.size() != static_cast<size_t>(channels) * height * width)
            throw BadDimension("LatentGrid: value count does not match shape");
        for (double v : values)
            if (!std::isfinite(v))
                throw BadParameter("LatentGrid: non-finite value");
    }
};

namespace detail {

inline void check_step(const NoiseSchedule& s, int t) {
    if (t < 1 || t > s.T)
        throw BadParameter("diffusion: step must be in [1, T]");
}

inline void check_same_shape(const LatentGrid& a, const LatentGrid& b,
                             const char* where) {
    if (!a.same_shape(b))
        throw BadDimension(std::string(where) + ": grid shapes differ");
}

} // namespace detail

// z_t = sqrt(abar_t) z0 + sqrt(1 - abar_t) eps
inline LatentGrid forward_noise(const LatentGrid& z0, int t, const LatentGrid& eps,
                                const NoiseSchedule& sched) {
    detail::check_step(sched, t);
    detail::check_same_shape(z0, eps, "forward_noise");
    const double ab = sched.alpha_bar(t);
    const double ca = std::sqrt(ab);
    const double ce = std::sqrt(1.0 - ab);
    LatentGrid out = z0;
    for (size_t i = 0; i < out.values.size(); ++i)
        out.values[i] = ca * z0.values[i] + ce * eps.values[i];
    return out;
}

// zhat_0 = (z_t - sqrt(1 - abar_t) eps) / sqrt(abar_t)
inline LatentGrid predict_z0(const LatentGrid& zt, int t, const LatentGrid& eps_pred,
                             const NoiseSchedule& sched) {
    detail::check_step(sched, t);
    detail::check_same_shape(zt, eps_pred, "predict_z0");
    const double ab = sched.alpha_bar(t);
    const double ca = std::sqrt(ab);
    const double ce = std::sqrt(1.0 - ab);
    LatentGrid out = zt;
    for (size_t i = 0; i < out.values.size(); ++i)
        out.values[i] = (zt.values[i] - ce * eps_pred.values[i]) / ca;
    return out;
}

struct NoisePredictor {
    virtual ~NoisePredictor() = default;
    virtual LatentGrid predict(const LatentGrid& zt, int t,
                               const LatentGrid* cond) const = 0;
};

// One deterministic reverse step (the stochastic variance term is zero):
// z_{t-1} = sqrt(abar_{t-1}) zhat_0 + sqrt(1 - abar_{t-1}) eps_pred
inline LatentGrid ddim_step(const LatentGrid& zt, int t, const NoisePredictor& pred,
                            const LatentGrid* cond, const NoiseSchedule& sched) {
    detail::check_step(sched, t);
    const LatentGrid eps = pred.predict(zt, t, cond);
    detail::check_same_shape(zt, eps, "ddim_step");
    const LatentGrid zhat0 = predict_z0(zt, t, eps, sched);
    const double ab_prev = sched.alpha_bar(t - 1);
    const double ca = std::sqrt(ab_prev);
    const double ce = std::sqrt(1.0 - ab_prev);
    LatentGrid out = zt;
    for (size_t i = 0; i < out.values.size(); ++i)
        out.values[i] = ca * zhat0.values[i] + ce * eps.values[i];
    return out;
}

inline LatentGrid ddim_sample(LatentGrid zt, const NoisePredictor& pred,
                              const LatentGrid* cond, const NoiseSchedule& sched) {
    zt.validate();
    for (int t = sched.T; t >= 1; --t) zt = ddim_step(zt, t, pred, cond, sched);
    return zt;
}

// Analytic oracle: with the clean latent in hand the true residual noise is
// eps = (z_t - sqrt(abar_t) z0) / sqrt(1 - abar_t), which a perfect network
// would return. Ignores the condition input.
struct ExactPredictor : NoisePredictor {
    LatentGrid z0;
    const NoiseSchedule* sched = nullptr;

    ExactPredictor(LatentGrid clean, const NoiseSchedule& s)
        : z0(std::move(clean)), sched(&s) {}

    LatentGrid predict(const LatentGrid& zt, int t,
                       const LatentGrid*) const override {
        detail::check_step(*sched, t);
        detail::check_same_shape(zt, z0, "ExactPredictor");
        const double ab = sched->alpha_bar(t);
        const double ca = std::sqrt(ab);
        const double ce = std::sqrt(1.0 - ab);
        LatentGrid out = zt;
        for (size_t i = 0; i < out.values.size(); ++i)
            out.values[i] = (zt.values[i] - ca * z0.values[i]) / ce;
        return out;
    }
};

// Mean squared residual between true and predicted noise, the training
// objective evaluated as a plain scalar.
inline double noise_prediction_loss(const LatentGrid& eps_true,
                                    const LatentGrid& eps_pred) {
    detail::check_same_shape(eps_true, eps_pred, "noise_prediction_loss");
    if (eps_true.values.empty())
        throw BadDimension("noise_prediction_loss: empty grid");
    double acc = 0.0;
    for (size_t i = 0; i < eps_true.values.size(); ++i) {
        const double d = eps_true.values[i] - eps_pred.values[i];
        acc += d * d;
    }
    return acc / static_cast<double>(eps_true.values.size());
}

struct Codebook {
    int dim = 3;
    std::vector<double> entries; // flattened, count() * dim

    int count() const { return dim > 0 ? static_cast<int>(entries.size()) / dim : 0; }
    const double* entry(int i) const { return entries.data() + static_cast<size_t>(i) * dim; }

    void validate() const {
        if (dim < 1 || entries.empty() || entries.size() % dim != 0)
            throw BadParameter("Codebook: bad entry layout");
        for (double v : entries)
            if (!std::isfinite(v))
                throw BadParameter("Codebook: non-finite entry");
        const int n = count();
        for (int i = 0; i < n; ++i) {
            for (int j = i + 1; j < n; ++j) {
                double d = 0.0;
                for (int k = 0; k < dim; ++k) {
                    const double diff = entry(i)[k] - entry(j)[k];
                    d += diff * diff;
                }
                if (d == 0.0)
                    throw BadParameter("Codebook: duplicate entries");
            }
        }
    }
};

inline Codebook random_codebook(int n, int dim, std::uint64_t seed) {
    if (n < 1 || dim < 1)
        throw BadParameter("random_codebook: need n >= 1 and dim >= 1");
    Codebook cb;
    cb.dim = dim;
    cb.entries.resize(static_cast<size_t>(n) * dim);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    for (double& v : cb.entries) v = g(rng);
    return cb;
}

struct VqResult {
    std::vector<int> indices; // height * width, row-major
    LatentGrid quantized;
};

// Nearest entry by Euclidean distance per spatial location; exact ties keep
// the smallest index.
inline VqResult vq_quantize(const LatentGrid& z, const Codebook& cb) {
    if (cb.dim != z.channels)
        throw BadDimension("vq_quantize: codebook dimension mismatch");
    if (cb.count() < 1)
        throw BadParameter("vq_quantize: empty codebook");
    VqResult r;
    r.indices.assign(static_cast<size_t>(z.height) * z.width, 0);
    r.quantized = z;
    const int n = cb.count();
    for (int y = 0; y < z.height; ++y) {
        for (int x = 0; x < z.width; ++x) {
            int best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (int i = 0; i < n; ++i) {
                double d = 0.0;
                for (int c = 0; c < z.channels; ++c) {
                    const double diff = z.at(c, y, x) - cb.entry(i)[c];
                    d += diff * diff;
                }
                if (d < best_d) {
                    best_d = d;
                    best = i;
                }
            }
            r.indices[static_cast<size_t>(y) * z.width + x] = best;
            for (int c = 0; c < z.channels; ++c)
                r.quantized.at(c, y, x) = cb.entry(best)[c];
        }
    }
    return r;
}

} // namespace fpforge
