#pragma once

// Synthetic phantoms: analytic clouds and ridge textures used by the test
// suite, the demos and anyone exercising the pipeline without scanner data.

#include <algorithm>
#include <cmath>
#include <random>

#include "fpforge/image.hpp"
#include "fpforge/pointcloud.hpp"

namespace fpforge::synth {

// Vertical sinusoidal ridge pattern, even about the texture center column.
inline GrayImage ridge_texture(int w, int h, double period = 9.0,
                               double amplitude = 60.0, double offset = 128.0) {
    GrayImage img(w, h);
    const double cx = w / 2.0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            img.at(x, y) = offset + amplitude * std::cos(2.0 * kPi * (x - cx) / period);
    return img;
}

// Horizontal intensity ramp centered on the middle column.
inline GrayImage ramp_texture(int w, int h, double gradient, double offset = 128.0) {
    GrayImage img(w, h);
    const double cx = w / 2.0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            img.at(x, y) = std::clamp(offset + gradient * (x - cx), 0.0, 255.0);
    return img;
}

// Flat background with a noisy square spanning [lo, hi] on both axes.
inline GrayImage textured_square(int w, int h, int lo, int hi,
                                 double background = 200.0,
                                 std::uint64_t seed = 1234) {
    GrayImage img(w, h, background);
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> d(0, 255);
    for (int y = lo; y <= hi && y < h; ++y)
        for (int x = lo; x <= hi && x < w; ++x)
            img.at(x, y) = static_cast<double>(d(rng));
    return img;
}

// Ridge pattern inside a centered ellipse, white elsewhere. rx and ry are the
// semi-axes in pixels.
inline GrayImage ellipse_ridge_texture(int w, int h, double rx, double ry,
                                       double period = 9.0) {
    GrayImage img(w, h, 255.0);
    const double cx = w / 2.0, cy = h / 2.0;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double ex = (x - cx) / rx, ey = (y - cy) / ry;
            if (ex * ex + ey * ey <= 1.0)
                img.at(x, y) = 128.0 + 60.0 * std::cos(2.0 * kPi * (x - cx) / period);
        }
    }
    return img;
}

// Cylinder sector of the given radius and length along y, surface toward +z.
// half_angle pi/2 gives the standard half cylinder. Points lie on an exact
// (ring, angle) grid unless jitter is nonzero.
inline FingerPointCloud partial_cylinder(double radius, double length, int rings,
                                         int per_ring, double half_angle = kPi / 2.0,
                                         double jitter = 0.0,
                                         std::uint64_t seed = 99) {
    FingerPointCloud pc;
    pc.points.reserve(static_cast<size_t>(rings) * per_ring);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> j(-jitter, jitter);
    for (int r = 0; r < rings; ++r) {
        const double y = -length / 2.0 + length * r / (rings - 1.0);
        for (int a = 0; a < per_ring; ++a) {
            const double phi = -half_angle + 2.0 * half_angle * a / (per_ring - 1.0);
            Vec3 p{radius * std::sin(phi), y, radius * std::cos(phi)};
            if (jitter > 0.0) {
                p.x += j(rng);
                p.y += j(rng);
                p.z += j(rng);
            }
            pc.points.push_back(p);
        }
    }
    return pc;
}

inline FingerPointCloud half_cylinder(double radius, double length, int rings,
                                      int per_ring) {
    return partial_cylinder(radius, length, rings, per_ring);
}

// Planar grid at constant z spanning [-width/2, width/2] x [-length/2, length/2].
inline FingerPointCloud flat_slab(double width, double length, int nx, int ny,
                                  double z = 0.0) {
    FingerPointCloud pc;
    pc.points.reserve(static_cast<size_t>(nx) * ny);
    for (int r = 0; r < ny; ++r) {
        const double y = -length / 2.0 + length * r / (ny - 1.0);
        for (int c = 0; c < nx; ++c) {
            const double x = -width / 2.0 + width * c / (nx - 1.0);
            pc.points.push_back({x, y, z});
        }
    }
    return pc;
}

// Half-cylinder shaft blending into an elliptical tip at +y. Rows carry a
// point count proportional to their arc length, so surface density is roughly
// uniform and the tip is the sparse tail of the y distribution.
inline FingerPointCloud finger_phantom(double radius = 8.0, double length = 40.0,
                                       int rows = 160, double spacing = 0.25,
                                       double jitter = 0.0,
                                       std::uint64_t seed = 7) {
    FingerPointCloud pc;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> j(-jitter, jitter);
    const double tip_start = length * 0.3; // cap occupies the last fifth
    for (int r = 0; r < rows; ++r) {
        const double y = -length / 2.0 + length * r / (rows - 1.0);
        double rad = radius;
        if (y > tip_start) {
            const double t = (y - tip_start) / (length / 2.0 - tip_start);
            rad = radius * std::sqrt(std::max(0.0, 1.0 - t * t));
        }
        if (rad < spacing) continue;
        const int per_ring = std::max(5, static_cast<int>(std::lround(kPi * rad / spacing)));
        for (int a = 0; a < per_ring; ++a) {
            const double phi = -kPi / 2.0 + kPi * a / (per_ring - 1.0);
            Vec3 p{rad * std::sin(phi), y, rad * std::cos(phi)};
            if (jitter > 0.0) {
                p.x += j(rng);
                p.y += j(rng);
                p.z += j(rng);
            }
            pc.points.push_back(p);
        }
    }
    return pc;
}

} // namespace fpforge::synth
