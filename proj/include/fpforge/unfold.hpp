#pragma once

// Cross-section slicing and UV unfolding. A rectified cloud is cut into y
// slabs; each slab's points are ordered angularly about the slab centroid and
// joined into a polyline. u is the signed arc length from where the polyline
// crosses the x=0 plane (front crossing, negative on the x<0 side), v is y.
// Both are stored in pixels at the surface's pixel density.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include <json.hpp>

#include "fpforge/errors.hpp"
#include "fpforge/image.hpp"
#include "fpforge/pointcloud.hpp"

namespace fpforge {

inline constexpr double kMmPerInch = 25.4;
inline constexpr size_t kMinSlabPoints = 8;
inline constexpr size_t kMinCloudPoints = 1000;

struct CrossSection {
    double y_center = 0.0;
    // member points in arc order
    std::vector<int> point_index;
    std::vector<double> px, py, pz;
    std::vector<double> geodesic; // per member, mm, signed when has_reference
    std::vector<int> vertex_of;   // member -> polyline vertex
    // deduplicated polyline
    std::vector<double> arc_x, arc_z;
    std::vector<double> cumulative_geodesic; // per vertex, strictly increasing
    bool has_reference = false;
};

namespace detail {

// Cumulative polyline length and the signed re-basing at the front x=0
// crossing. Returns false when the polyline never crosses x=0.
inline bool rebase_at_crossing(const std::vector<double>& ax,
                               const std::vector<double>& az,
                               std::vector<double>& cum) {
    cum.assign(ax.size(), 0.0);
    for (size_t i = 1; i < ax.size(); ++i)
        cum[i] = cum[i - 1] + std::hypot(ax[i] - ax[i - 1], az[i] - az[i - 1]);

    bool found = false;
    double best_z = -std::numeric_limits<double>::infinity();
    double best_s = 0.0;
    for (size_t i = 0; i < ax.size(); ++i) {
        if (ax[i] == 0.0 && az[i] > best_z) {
            best_z = az[i];
            best_s = cum[i];
            found = true;
        }
    }
    for (size_t i = 0; i + 1 < ax.size(); ++i) {
        if (ax[i] * ax[i + 1] < 0.0) {
            const double t = ax[i] / (ax[i] - ax[i + 1]);
            const double z = az[i] + t * (az[i + 1] - az[i]);
            if (z > best_z) {
                best_z = z;
                best_s = cum[i] + t * (cum[i + 1] - cum[i]);
                found = true;
            }
        }
    }
    if (!found) return false;
    for (double& s : cum) s -= best_s;
    return true;
}

} // namespace detail

// Cut the rectified cloud into y slabs of the given width. Slabs with fewer
// than kMinSlabPoints points are dropped; if nothing survives the cloud is
// unusable. Sections that never cross x=0 keep has_reference false and their
// geodesic measured from the arc start.
inline std::vector<CrossSection> slice_sections(const FingerPointCloud& pc,
                                                double slab = 0.25) {
    pc.validate();
    if (!(slab > 0.0) || !std::isfinite(slab))
        throw BadParameter("slice_sections: slab must be positive");
    if (pc.points.empty())
        throw EmptySections("slice_sections: empty cloud");

    double y_min = pc.points[0].y, y_max = pc.points[0].y;
    for (const Vec3& p : pc.points) {
        y_min = std::min(y_min, p.y);
        y_max = std::max(y_max, p.y);
    }
    const int nbins = std::max(1, static_cast<int>(std::ceil((y_max - y_min) / slab)));
    std::vector<std::vector<int>> bins(nbins);
    for (size_t i = 0; i < pc.points.size(); ++i) {
        int b = static_cast<int>((pc.points[i].y - y_min) / slab);
        b = std::clamp(b, 0, nbins - 1);
        bins[b].push_back(static_cast<int>(i));
    }

    std::vector<CrossSection> sections;
    for (int b = 0; b < nbins; ++b) {
        const auto& members = bins[b];
        if (members.size() < kMinSlabPoints) continue;

        double cx = 0.0, cz = 0.0;
        for (int idx : members) {
            cx += pc.points[idx].x;
            cz += pc.points[idx].z;
        }
        cx /= members.size();
        cz /= members.size();

        // angular order about the centroid; ties (collinear sections) fall
        // back to radius so a flat slab comes out in x order
        struct Key {
            double angle, radial;
            int idx;
        };
        std::vector<Key> keys;
        keys.reserve(members.size());
        for (int idx : members) {
            const double dx = pc.points[idx].x - cx;
            const double dz = pc.points[idx].z - cz;
            const double angle = std::atan2(dx, dz);
            const double r = std::hypot(dx, dz);
            const double sign = angle > 0.0 ? 1.0 : (angle < 0.0 ? -1.0 : 0.0);
            keys.push_back({angle, sign * r, idx});
        }
        std::sort(keys.begin(), keys.end(), [](const Key& a, const Key& b) {
            if (a.angle != b.angle) return a.angle < b.angle;
            if (a.radial != b.radial) return a.radial < b.radial;
            return a.idx < b.idx;
        });

        CrossSection cs;
        cs.y_center = y_min + (b + 0.5) * slab;
        for (const Key& k : keys) {
            const Vec3& p = pc.points[k.idx];
            cs.point_index.push_back(k.idx);
            cs.px.push_back(p.x);
            cs.py.push_back(p.y);
            cs.pz.push_back(p.z);
            if (cs.arc_x.empty() || cs.arc_x.back() != p.x || cs.arc_z.back() != p.z) {
                cs.arc_x.push_back(p.x);
                cs.arc_z.push_back(p.z);
            }
            cs.vertex_of.push_back(static_cast<int>(cs.arc_x.size()) - 1);
        }
        cs.has_reference =
            detail::rebase_at_crossing(cs.arc_x, cs.arc_z, cs.cumulative_geodesic);
        cs.geodesic.reserve(cs.point_index.size());
        for (int v : cs.vertex_of) cs.geodesic.push_back(cs.cumulative_geodesic[v]);
        sections.push_back(std::move(cs));
    }
    if (sections.empty())
        throw EmptySections("slice_sections: no slab has enough points");
    return sections;
}

struct UnfoldedSurface {
    std::vector<CrossSection> sections; // only sections with a reference
    // per original point index; has_uv marks retained points
    std::vector<double> u, v; // px
    std::vector<std::uint8_t> has_uv;
    double u_min = 0.0, u_max = 0.0, v_min = 0.0, v_max = 0.0; // px
    double ppi = 500.0;
    int skipped_sections = 0; // sections dropped for never crossing x=0
    size_t retained = 0;
};

inline UnfoldedSurface unfold_to_uv(std::vector<CrossSection> sections,
                                    double ppi = 500.0) {
    if (!(ppi > 0.0) || !std::isfinite(ppi))
        throw BadParameter("unfold_to_uv: ppi must be positive");
    if (sections.empty())
        throw EmptySections("unfold_to_uv: no sections");

    UnfoldedSurface surf;
    surf.ppi = ppi;
    int max_index = -1;
    size_t total = 0;
    for (auto& cs : sections) {
        if (!cs.has_reference) {
            ++surf.skipped_sections;
            continue;
        }
        total += cs.point_index.size();
        for (int idx : cs.point_index) max_index = std::max(max_index, idx);
        surf.sections.push_back(std::move(cs));
    }
    if (surf.sections.empty())
        throw EmptySections("unfold_to_uv: no section crosses the x=0 plane");
    if (total < kMinCloudPoints)
        throw DegenerateCloud("unfold_to_uv: cloud below minimum size");

    const double scale = ppi / kMmPerInch;
    surf.u.assign(max_index + 1, 0.0);
    surf.v.assign(max_index + 1, 0.0);
    surf.has_uv.assign(max_index + 1, 0);
    surf.u_min = surf.v_min = std::numeric_limits<double>::infinity();
    surf.u_max = surf.v_max = -std::numeric_limits<double>::infinity();
    for (const CrossSection& cs : surf.sections) {
        for (size_t k = 0; k < cs.point_index.size(); ++k) {
            const int idx = cs.point_index[k];
            const double u = cs.geodesic[k] * scale;
            const double v = cs.py[k] * scale;
            surf.u[idx] = u;
            surf.v[idx] = v;
            surf.has_uv[idx] = 1;
            surf.u_min = std::min(surf.u_min, u);
            surf.u_max = std::max(surf.u_max, u);
            surf.v_min = std::min(surf.v_min, v);
            surf.v_max = std::max(surf.v_max, v);
        }
    }
    surf.retained = total;
    return surf;
}

// Bilinear texture lookup for a retained point. The texture center sits on the
// UV origin; +u runs along +column, +v along -row. Outside the texture the
// background intensity 255 comes back.
inline double sample_texture(const UnfoldedSurface& surf, const GrayImage& tex,
                             int point_index) {
    if (tex.empty())
        throw BadDimension("sample_texture: empty texture");
    if (point_index < 0 || point_index >= static_cast<int>(surf.has_uv.size()) ||
        !surf.has_uv[point_index])
        throw OutOfBounds("sample_texture: point not retained by unfolding");
    const double fx = surf.u[point_index] + tex.width / 2.0;
    const double fy = tex.height / 2.0 - surf.v[point_index];
    if (fx < 0.0 || fy < 0.0 || fx > tex.width - 1.0 || fy > tex.height - 1.0)
        return 255.0;
    const int x0 = static_cast<int>(fx);
    const int y0 = static_cast<int>(fy);
    const int x1 = std::min(x0 + 1, tex.width - 1);
    const int y1 = std::min(y0 + 1, tex.height - 1);
    const double ax = fx - x0;
    const double ay = fy - y0;
    const double top = tex.at(x0, y0) * (1.0 - ax) + tex.at(x1, y0) * ax;
    const double bot = tex.at(x0, y1) * (1.0 - ax) + tex.at(x1, y1) * ax;
    return top * (1.0 - ay) + bot * ay;
}

// uvmap file: one JSON header line, then per retained point a 24-byte record
// of (point index, u, v) as little-endian 64-bit floats, ascending index.

namespace detail {

inline void put_le_double(std::ofstream& out, double d) {
    const std::uint64_t bits = std::bit_cast<std::uint64_t>(d);
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
    out.write(b, 8);
}

inline double get_le_double(std::ifstream& in) {
    char b[8];
    in.read(b, 8);
    if (in.gcount() != 8)
        throw FormatError("uvmap: truncated record");
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i)
        bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(b[i])) << (8 * i);
    return std::bit_cast<double>(bits);
}

} // namespace detail

inline void write_uvmap(const std::string& path, const UnfoldedSurface& surf) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw FormatError("uvmap: cannot write " + path);
    nlohmann::json header;
    header["point_count"] = surf.retained;
    header["ppi"] = surf.ppi;
    header["bounds"] = {{"u_min", surf.u_min},
                        {"u_max", surf.u_max},
                        {"v_min", surf.v_min},
                        {"v_max", surf.v_max}};
    header["skipped_sections"] = surf.skipped_sections;
    out << header.dump() << "\n";
    for (size_t idx = 0; idx < surf.has_uv.size(); ++idx) {
        if (!surf.has_uv[idx]) continue;
        detail::put_le_double(out, static_cast<double>(idx));
        detail::put_le_double(out, surf.u[idx]);
        detail::put_le_double(out, surf.v[idx]);
    }
    if (!out)
        throw FormatError("uvmap: write failed for " + path);
}

struct UvMapFile {
    size_t point_count = 0;
    double ppi = 500.0;
    double u_min = 0.0, u_max = 0.0, v_min = 0.0, v_max = 0.0;
    int skipped_sections = 0;
    std::vector<int> point_index;
    std::vector<double> u, v;
};

inline UvMapFile read_uvmap(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw FormatError("uvmap: cannot open " + path);
    std::string line;
    if (!std::getline(in, line))
        throw FormatError("uvmap: missing header in " + path);
    UvMapFile f;
    try {
        const auto header = nlohmann::json::parse(line);
        f.point_count = header.at("point_count").get<size_t>();
        f.ppi = header.at("ppi").get<double>();
        f.u_min = header.at("bounds").at("u_min").get<double>();
        f.u_max = header.at("bounds").at("u_max").get<double>();
        f.v_min = header.at("bounds").at("v_min").get<double>();
        f.v_max = header.at("bounds").at("v_max").get<double>();
        f.skipped_sections = header.value("skipped_sections", 0);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("uvmap: bad header in " + path + ": " + e.what());
    }
    for (size_t i = 0; i < f.point_count; ++i) {
        f.point_index.push_back(static_cast<int>(detail::get_le_double(in)));
        f.u.push_back(detail::get_le_double(in));
        f.v.push_back(detail::get_le_double(in));
    }
    return f;
}

} // namespace fpforge
