#pragma once

// Roll-pose simulation: rigid rotation about the finger axis, the horizontal
// displacement compensation delta_u, and orthographic z-buffer rendering.
// Positive theta rotates the +x side of the surface toward the camera on +z,
// so delta_u comes out negative on a convex section.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "fpforge/errors.hpp"
#include "fpforge/image.hpp"
#include "fpforge/unfold.hpp"

namespace fpforge {

inline constexpr double kMaxRollDeg = 60.0;

struct RollPose {
    double theta_deg = 0.0;

    RollPose() = default;
    explicit RollPose(double deg) : theta_deg(deg) {
        if (!std::isfinite(deg) || std::abs(deg) > kMaxRollDeg)
            throw BadParameter("RollPose: |theta| must be <= 60 degrees");
    }
    double radians() const { return theta_deg * kPi / 180.0; }
};

inline FingerPointCloud rotate_cloud(const FingerPointCloud& pc, const RollPose& pose) {
    const double c = std::cos(pose.radians());
    const double s = std::sin(pose.radians());
    FingerPointCloud out;
    out.points.reserve(pc.points.size());
    for (const Vec3& p : pc.points)
        out.points.push_back({p.x * c - p.z * s, p.y, p.x * s + p.z * c});
    out.normals.reserve(pc.normals.size());
    for (const Vec3& n : pc.normals)
        out.normals.push_back({n.x * c - n.z * s, n.y, n.x * s + n.z * c});
    return out;
}

// Displacement compensation. The central reference section is unfolded twice
// with the same parameterization: as stored, and re-based on where the
// rotated arc crosses the current x=0 plane. Both minima run over the same
// point set, the part of the section whose outward direction faces the camera
// after rotation; the difference of minima is delta_u, converted to pixels.
inline double compute_delta_u(const UnfoldedSurface& surf, const RollPose& pose) {
    if (surf.sections.empty())
        throw EmptySections("compute_delta_u: surface has no sections");

    const CrossSection* ref = nullptr;
    for (const CrossSection& cs : surf.sections) {
        if (!ref || std::abs(cs.y_center) < std::abs(ref->y_center) ||
            (std::abs(cs.y_center) == std::abs(ref->y_center) &&
             cs.y_center < ref->y_center))
            ref = &cs;
    }

    const double c = std::cos(pose.radians());
    const double s = std::sin(pose.radians());
    const size_t nv = ref->arc_x.size();
    std::vector<double> rx(nv), rz(nv);
    for (size_t i = 0; i < nv; ++i) {
        rx[i] = ref->arc_x[i] * c - ref->arc_z[i] * s;
        rz[i] = ref->arc_x[i] * s + ref->arc_z[i] * c;
    }
    std::vector<double> rebased;
    if (!detail::rebase_at_crossing(rx, rz, rebased))
        throw NotVisible("compute_delta_u: rotated section never crosses x=0");

    double cx = 0.0, cz = 0.0;
    for (size_t i = 0; i < nv; ++i) {
        cx += rx[i];
        cz += rz[i];
    }
    cx /= static_cast<double>(nv);
    cz /= static_cast<double>(nv);

    double min_new = std::numeric_limits<double>::infinity();
    double min_old = std::numeric_limits<double>::infinity();
    bool any = false;
    for (size_t i = 0; i < nv; ++i) {
        if (rz[i] - cz < 0.0) continue; // faces away from the camera
        any = true;
        min_new = std::min(min_new, rebased[i]);
        min_old = std::min(min_old, ref->cumulative_geodesic[i]);
    }
    if (!any)
        throw NotVisible("compute_delta_u: no part of the section faces the camera");
    return (min_new - min_old) * surf.ppi / kMmPerInch;
}

struct ProjectedImage {
    GrayImage img;             // 255 where nothing rendered
    ForegroundMask visibility; // rendered pixels plus filled pinholes
    double delta_u_px = 0.0;
    double theta_deg = 0.0;
    size_t rendered_pixels = 0; // pixels that received a splat directly
};

// Orthographic splat with a max-z buffer; equal depths resolve to the later
// point index. Pinholes inside the silhouette are filled from the nearest
// rendered pixel within 2 px.
inline ProjectedImage project(const FingerPointCloud& pc,
                              const std::vector<double>& intensity,
                              double delta_u_px, int canvas_w = 512,
                              int canvas_h = 512, double ppi = 500.0) {
    if (pc.points.size() != intensity.size())
        throw BadDimension("project: intensity count mismatch");
    if (canvas_w <= 0 || canvas_h <= 0)
        throw BadParameter("project: non-positive canvas");
    const double scale = ppi / kMmPerInch;
    const double cx = canvas_w / 2.0;
    const double cy = canvas_h / 2.0;

    ProjectedImage out;
    out.img = GrayImage(canvas_w, canvas_h, 255.0, ppi);
    out.visibility = ForegroundMask(canvas_w, canvas_h, false);
    out.delta_u_px = delta_u_px;

    std::vector<double> zbuf(static_cast<size_t>(canvas_w) * canvas_h,
                             -std::numeric_limits<double>::infinity());
    std::vector<std::uint8_t> hit(zbuf.size(), 0);
    for (size_t i = 0; i < pc.points.size(); ++i) {
        const Vec3& p = pc.points[i];
        const long col = std::lround(p.x * scale + delta_u_px + cx);
        const long row = std::lround(-p.y * scale + cy);
        if (col < 0 || col >= canvas_w || row < 0 || row >= canvas_h)
            throw OutOfBounds("project: canvas smaller than the shifted projection");
        const size_t at = static_cast<size_t>(row) * canvas_w + col;
        if (p.z >= zbuf[at]) {
            zbuf[at] = p.z;
            out.img.data[at] = intensity[i];
            hit[at] = 1;
        }
    }
    for (std::uint8_t h : hit)
        if (h) ++out.rendered_pixels;

    // silhouette closure with a 5x5 square, then nearest-neighbor fill
    BinaryMap rb(canvas_w, canvas_h, 255);
    for (size_t i = 0; i < hit.size(); ++i)
        if (hit[i]) rb.data[i] = 0;
    const BinaryMap closed = morph_erode(morph_dilate(rb, 5, 5), 5, 5);

    // offsets within Euclidean distance 2, nearest first
    static constexpr int kFill[12][2] = {{0, -1}, {-1, 0}, {1, 0},  {0, 1},
                                         {-1, -1}, {1, -1}, {-1, 1}, {1, 1},
                                         {0, -2}, {-2, 0}, {2, 0},  {0, 2}};
    for (int y = 0; y < canvas_h; ++y) {
        for (int x = 0; x < canvas_w; ++x) {
            const size_t at = static_cast<size_t>(y) * canvas_w + x;
            if (hit[at]) {
                out.visibility.data[at] = 1;
                continue;
            }
            if (closed.data[at] != 0) continue;
            for (auto& [dx, dy] : kFill) {
                const int nx = x + dx, ny = y + dy;
                if (nx < 0 || nx >= canvas_w || ny < 0 || ny >= canvas_h) continue;
                const size_t nat = static_cast<size_t>(ny) * canvas_w + nx;
                if (hit[nat]) {
                    out.img.data[at] = out.img.data[nat];
                    out.visibility.data[at] = 1;
                    break;
                }
            }
        }
    }
    return out;
}

// Full single-pose render: texture lookup in the stored UV chart, rigid
// rotation, displacement compensation, orthographic projection.
inline ProjectedImage render_pose(const UnfoldedSurface& surf, const GrayImage& tex,
                                  const RollPose& pose, int canvas_w = 512,
                                  int canvas_h = 512) {
    const double delta_u = compute_delta_u(surf, pose);

    FingerPointCloud cloud;
    std::vector<double> intensity;
    for (const CrossSection& cs : surf.sections) {
        for (size_t k = 0; k < cs.point_index.size(); ++k) {
            cloud.points.push_back({cs.px[k], cs.py[k], cs.pz[k]});
            intensity.push_back(sample_texture(surf, tex, cs.point_index[k]));
        }
    }
    const FingerPointCloud rotated = rotate_cloud(cloud, pose);
    ProjectedImage out =
        project(rotated, intensity, delta_u, canvas_w, canvas_h, surf.ppi);
    out.theta_deg = pose.theta_deg;
    return out;
}

} // namespace fpforge
