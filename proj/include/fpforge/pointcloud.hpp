#pragma once

// Finger surface point clouds: ASCII PLY / XYZ input and output, and PCA pose
// rectification into the canonical frame (finger axis +y with the tip up,
// lateral +x, outward surface bulge +z).

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "fpforge/errors.hpp"

namespace fpforge {

inline constexpr double kPi = 3.14159265358979323846;

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    Vec3 cross(const Vec3& o) const {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
    double norm() const { return std::sqrt(dot(*this)); }
};

struct FingerPointCloud {
    std::vector<Vec3> points;
    std::vector<Vec3> normals; // empty, or one per point

    size_t size() const { return points.size(); }

    void validate() const {
        if (!normals.empty() && normals.size() != points.size())
            throw BadDimension("FingerPointCloud: normal count mismatch");
        for (const Vec3& p : points)
            if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z))
                throw BadParameter("FingerPointCloud: non-finite coordinate");
    }
};

inline FingerPointCloud load_xyz(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw FormatError("xyz: cannot open " + path);
    FingerPointCloud pc;
    std::string line;
    while (std::getline(in, line)) {
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        std::istringstream ls(line);
        Vec3 p;
        if (!(ls >> p.x >> p.y >> p.z))
            throw FormatError("xyz: malformed line in " + path);
        pc.points.push_back(p);
    }
    pc.validate();
    return pc;
}

inline void save_xyz(const std::string& path, const FingerPointCloud& pc) {
    std::ofstream out(path, std::ios::trunc);
    if (!out)
        throw FormatError("xyz: cannot write " + path);
    out.precision(17);
    for (const Vec3& p : pc.points)
        out << p.x << " " << p.y << " " << p.z << "\n";
}

inline FingerPointCloud load_ply(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw FormatError("ply: cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line.rfind("ply", 0) != 0)
        throw FormatError("ply: missing magic in " + path);

    size_t vertex_count = 0;
    bool in_vertex_element = false;
    std::vector<std::string> props; // vertex property names in file order
    bool saw_format = false;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string word;
        ls >> word;
        if (word == "format") {
            std::string kind;
            ls >> kind;
            if (kind != "ascii")
                throw FormatError("ply: only ascii format supported: " + path);
            saw_format = true;
        } else if (word == "element") {
            std::string name;
            size_t count = 0;
            ls >> name >> count;
            in_vertex_element = name == "vertex";
            if (in_vertex_element) vertex_count = count;
        } else if (word == "property" && in_vertex_element) {
            std::string type, name;
            ls >> type >> name;
            if (type == "list")
                throw FormatError("ply: list property on vertices: " + path);
            props.push_back(name);
        } else if (word == "end_header") {
            break;
        }
    }
    if (!saw_format)
        throw FormatError("ply: missing format line in " + path);

    auto index_of = [&](const std::string& name) {
        for (size_t i = 0; i < props.size(); ++i)
            if (props[i] == name) return static_cast<int>(i);
        return -1;
    };
    const int ix = index_of("x"), iy = index_of("y"), iz = index_of("z");
    if (ix < 0 || iy < 0 || iz < 0)
        throw FormatError("ply: vertex lacks x/y/z in " + path);
    const int inx = index_of("nx"), iny = index_of("ny"), inz = index_of("nz");
    const bool has_normals = inx >= 0 && iny >= 0 && inz >= 0;

    FingerPointCloud pc;
    pc.points.reserve(vertex_count);
    std::vector<double> row(props.size());
    for (size_t v = 0; v < vertex_count; ++v) {
        if (!std::getline(in, line))
            throw FormatError("ply: truncated vertex list in " + path);
        std::istringstream ls(line);
        for (double& r : row)
            if (!(ls >> r))
                throw FormatError("ply: malformed vertex line in " + path);
        pc.points.push_back({row[ix], row[iy], row[iz]});
        if (has_normals)
            pc.normals.push_back({row[inx], row[iny], row[inz]});
    }
    pc.validate();
    return pc;
}

inline void save_ply(const std::string& path, const FingerPointCloud& pc) {
    std::ofstream out(path, std::ios::trunc);
    if (!out)
        throw FormatError("ply: cannot write " + path);
    const bool n = !pc.normals.empty();
    out << "ply\nformat ascii 1.0\nelement vertex " << pc.points.size() << "\n";
    out << "property double x\nproperty double y\nproperty double z\n";
    if (n)
        out << "property double nx\nproperty double ny\nproperty double nz\n";
    out << "end_header\n";
    out.precision(17);
    for (size_t i = 0; i < pc.points.size(); ++i) {
        const Vec3& p = pc.points[i];
        out << p.x << " " << p.y << " " << p.z;
        if (n) {
            const Vec3& v = pc.normals[i];
            out << " " << v.x << " " << v.y << " " << v.z;
        }
        out << "\n";
    }
}

// Loads by extension: .ply or .xyz.
inline FingerPointCloud load_cloud(const std::string& path) {
    const auto dot = path.find_last_of('.');
    const std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
    if (ext == "ply") return load_ply(path);
    if (ext == "xyz") return load_xyz(path);
    throw FormatError("cloud: unsupported extension on " + path);
}

// Rigid transform into the canonical frame. The principal axis becomes +y
// with the fingertip (the sparse tail of the point density) toward +y, the
// second axis becomes +x, and the surface bulge faces +z. Sign choices come
// from third moments along the axes, so the map is a fixed point on already
// rectified clouds.
inline FingerPointCloud rectify_pose(const FingerPointCloud& pc) {
    pc.validate();
    const size_t n = pc.size();
    if (n < 4)
        throw DegenerateCloud("rectify_pose: too few points");

    Eigen::Vector3d c = Eigen::Vector3d::Zero();
    for (const Vec3& p : pc.points) c += Eigen::Vector3d(p.x, p.y, p.z);
    c /= static_cast<double>(n);

    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (const Vec3& p : pc.points) {
        const Eigen::Vector3d d = Eigen::Vector3d(p.x, p.y, p.z) - c;
        cov += d * d.transpose();
    }
    cov /= static_cast<double>(n);

    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
    if (es.info() != Eigen::Success)
        throw DegenerateCloud("rectify_pose: eigensolver failed");
    const Eigen::Vector3d ev = es.eigenvalues(); // ascending
    if (!(ev[2] > 0.0) || ev[0] < 1e-12 * ev[2])
        throw DegenerateCloud("rectify_pose: covariance not rank 3");

    Eigen::Vector3d axis_y = es.eigenvectors().col(2);
    Eigen::Vector3d axis_z = es.eigenvectors().col(0);

    double skew_y = 0.0, skew_z = 0.0;
    for (const Vec3& p : pc.points) {
        const Eigen::Vector3d d = Eigen::Vector3d(p.x, p.y, p.z) - c;
        const double dy = axis_y.dot(d);
        const double dz = axis_z.dot(d);
        skew_y += dy * dy * dy;
        skew_z += dz * dz * dz;
    }
    if (skew_y < 0.0) axis_y = -axis_y; // tip is the sparse tail
    if (skew_z > 0.0) axis_z = -axis_z; // surface mass toward +z
    const Eigen::Vector3d axis_x = axis_y.cross(axis_z);

    FingerPointCloud out;
    out.points.reserve(n);
    for (const Vec3& p : pc.points) {
        const Eigen::Vector3d d = Eigen::Vector3d(p.x, p.y, p.z) - c;
        out.points.push_back({axis_x.dot(d), axis_y.dot(d), axis_z.dot(d)});
    }
    if (!pc.normals.empty()) {
        out.normals.reserve(n);
        for (const Vec3& v : pc.normals) {
            const Eigen::Vector3d d(v.x, v.y, v.z);
            out.normals.push_back({axis_x.dot(d), axis_y.dot(d), axis_z.dot(d)});
        }
    }
    return out;
}

} // namespace fpforge
