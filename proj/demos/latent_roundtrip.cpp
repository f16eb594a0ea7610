// Diffusion sampler sanity walk: noise a latent forward, reverse it with the
// analytic predictor, then snap the result onto a random codebook.

#include <cmath>
#include <cstdio>
#include <random>

#include "fpforge/diffusion.hpp"

using namespace fpforge;

int main() {
    const NoiseSchedule sched = linear_schedule(250);
    LatentGrid z0(3, 16, 16), eps(3, 16, 16);
    std::mt19937_64 rng(11);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (double& v : z0.values) v = gauss(rng);
    for (double& v : eps.values) v = gauss(rng);

    const LatentGrid zT = forward_noise(z0, sched.T, eps, sched);
    const ExactPredictor pred(z0, sched);
    const LatentGrid rec = ddim_sample(zT, pred, nullptr, sched);

    double err = 0.0;
    for (size_t i = 0; i < rec.values.size(); ++i)
        err = std::max(err, std::abs(rec.values[i] - z0.values[i]));
    std::printf("T=%d reverse pass, max |rec - z0| = %.3e\n", sched.T, err);

    const Codebook cb = random_codebook(32, 3, 5);
    const VqResult vq = vq_quantize(rec, cb);
    double dist = 0.0;
    for (size_t i = 0; i < vq.quantized.values.size(); ++i) {
        const double d = vq.quantized.values[i] - rec.values[i];
        dist += d * d;
    }
    int used = 0;
    std::vector<int> hits(cb.count(), 0);
    for (int idx : vq.indices)
        if (hits[idx]++ == 0) ++used;
    std::printf("vq: %d/%d codes used, mean squared snap %.4f\n", used,
                cb.count(), dist / vq.quantized.values.size());
    return 0;
}
