#pragma once

// Binary PGM (P5, maxval 255) readers and writers. Files written here use the
// canonical header "P5\n<w> <h>\n255\n" so a read/write cycle is bit exact.

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "fpforge/errors.hpp"
#include "fpforge/image.hpp"

namespace fpforge {

namespace detail {

inline int pgm_token(std::istream& in) {
    // next integer token, skipping whitespace and '#' comments
    int c = in.get();
    while (c != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = in.get();
        } else if (std::isspace(c)) {
            c = in.get();
        } else {
            break;
        }
    }
    if (c == EOF || !std::isdigit(c))
        throw FormatError("pgm: malformed header");
    int v = 0;
    while (c != EOF && std::isdigit(c)) {
        v = v * 10 + (c - '0');
        c = in.get();
    }
    if (c != EOF) in.unget();
    return v;
}

inline std::vector<std::uint8_t> pgm_read_raw(const std::string& path, int& w, int& h) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw FormatError("pgm: cannot open " + path);
    char magic[2] = {0, 0};
    in.read(magic, 2);
    if (magic[0] != 'P' || magic[1] != '5')
        throw FormatError("pgm: not a P5 file: " + path);
    w = pgm_token(in);
    h = pgm_token(in);
    const int maxval = pgm_token(in);
    if (w <= 0 || h <= 0)
        throw FormatError("pgm: bad dimensions in " + path);
    if (maxval != 255)
        throw FormatError("pgm: only maxval 255 supported: " + path);
    in.get(); // single whitespace byte before the raster
    std::vector<std::uint8_t> px(static_cast<size_t>(w) * h);
    in.read(reinterpret_cast<char*>(px.data()), static_cast<std::streamsize>(px.size()));
    if (static_cast<size_t>(in.gcount()) != px.size())
        throw FormatError("pgm: truncated raster in " + path);
    return px;
}

inline void pgm_write_raw(const std::string& path, int w, int h,
                          const std::uint8_t* px) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw FormatError("pgm: cannot write " + path);
    out << "P5\n" << w << " " << h << "\n255\n";
    out.write(reinterpret_cast<const char*>(px), static_cast<std::streamsize>(w) * h);
    if (!out)
        throw FormatError("pgm: write failed for " + path);
}

} // namespace detail

inline GrayImage read_pgm(const std::string& path, double ppi = 500.0) {
    int w = 0, h = 0;
    const auto px = detail::pgm_read_raw(path, w, h);
    GrayImage img(w, h, 0.0, ppi);
    for (size_t i = 0; i < px.size(); ++i)
        img.data[i] = static_cast<double>(px[i]);
    return img;
}

inline void write_pgm(const std::string& path, const GrayImage& img) {
    if (img.empty())
        throw BadDimension("write_pgm: empty image");
    std::vector<std::uint8_t> px(img.data.size());
    for (size_t i = 0; i < px.size(); ++i) {
        const double v = img.data[i];
        const double q = v < 0.0 ? 0.0 : (v > 255.0 ? 255.0 : v);
        px[i] = static_cast<std::uint8_t>(q + 0.5);
    }
    detail::pgm_write_raw(path, img.width, img.height, px.data());
}

inline BinaryMap read_binary_pgm(const std::string& path) {
    int w = 0, h = 0;
    const auto px = detail::pgm_read_raw(path, w, h);
    BinaryMap bm(w, h);
    for (size_t i = 0; i < px.size(); ++i) {
        if (px[i] != 0 && px[i] != 255)
            throw FormatError("pgm: map is not strictly {0,255}: " + path);
        bm.data[i] = px[i];
    }
    return bm;
}

inline void write_pgm(const std::string& path, const BinaryMap& bm) {
    if (bm.data.empty())
        throw BadDimension("write_pgm: empty map");
    detail::pgm_write_raw(path, bm.width, bm.height, bm.data.data());
}

// Masks travel as PGM with 255 = inside, 0 = outside.
inline ForegroundMask read_mask_pgm(const std::string& path) {
    int w = 0, h = 0;
    const auto px = detail::pgm_read_raw(path, w, h);
    ForegroundMask m(w, h);
    for (size_t i = 0; i < px.size(); ++i) {
        if (px[i] != 0 && px[i] != 255)
            throw FormatError("pgm: mask is not strictly {0,255}: " + path);
        m.data[i] = px[i] ? 1 : 0;
    }
    return m;
}

inline void write_mask_pgm(const std::string& path, const ForegroundMask& m) {
    if (m.data.empty())
        throw BadDimension("write_mask_pgm: empty mask");
    std::vector<std::uint8_t> px(m.data.size());
    for (size_t i = 0; i < px.size(); ++i)
        px[i] = m.data[i] ? 255 : 0;
    detail::pgm_write_raw(path, m.width, m.height, px.data());
}

} // namespace fpforge
