#pragma once

// Batch orchestration: per-identity filtering, the seeded 9-pose sweep plan,
// rendering via poseproject, and a reproducible JSON manifest. Identities are
// independent jobs, so the runner fans them out over a small thread pool and
// assembles the manifest serially afterwards. Nothing here writes timestamps;
// reruns with the same inputs and seed must be byte-identical.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fpforge/errors.hpp"
#include "fpforge/image.hpp"
#include "fpforge/pgm.hpp"
#include "fpforge/pointcloud.hpp"
#include "fpforge/poseproject.hpp"
#include "fpforge/sauvola.hpp"
#include "fpforge/unfold.hpp"
#include "fpforge/version.hpp"

namespace fpforge {

inline constexpr double kQualityThreshold = 0.55;

struct SweepSpec {
    int n_positive = 4;
    int n_negative = 4;
    double max_angle = 60.0;
    bool include_frontal = true;

    int total_renders() const {
        return n_positive + n_negative + (include_frontal ? 1 : 0);
    }

    void validate() const {
        if (n_positive < 0 || n_negative < 0)
            throw BadParameter("SweepSpec: negative render count");
        if (!(max_angle > 0.0) || max_angle > kMaxRollDeg)
            throw BadParameter("SweepSpec: max_angle outside (0, 60]");
        const int grid = static_cast<int>(max_angle);
        if (n_positive > grid || n_negative > grid)
            throw BadParameter("SweepSpec: more renders per side than grid angles");
    }
};

struct IdentityRecord {
    std::string identity_id;
    std::string texture_path;
    std::string cloud_path;
};

struct FilterResult {
    bool passed = false;
    double foreground_ratio = 0.0;
    bool quality_checked = false;
    double quality_score = std::numeric_limits<double>::quiet_NaN();
    std::vector<std::string> reasons;
};

using QualityHook = std::function<double(const GrayImage&)>;

// Foreground coverage must strictly exceed fg_threshold; a supplied quality
// hook must strictly exceed 0.55. Hook exceptions propagate untouched.
inline FilterResult filter_identity(const GrayImage& tex, double fg_threshold = 0.6,
                                    const QualityHook& quality_hook = {}) {
    if (!(fg_threshold > 0.0) || !(fg_threshold < 1.0))
        throw BadParameter("filter_identity: fg_threshold outside (0, 1)");
    if (tex.empty())
        throw BadDimension("filter_identity: empty texture");

    FilterResult r;
    r.foreground_ratio = foreground_ratio(estimate_foreground(tex));
    if (!(r.foreground_ratio > fg_threshold)) r.reasons.push_back("foreground");
    if (quality_hook) {
        r.quality_checked = true;
        r.quality_score = quality_hook(tex);
        if (!(r.quality_score > kQualityThreshold)) r.reasons.push_back("quality");
    }
    r.passed = r.reasons.empty();
    return r;
}

// Stable across platforms, unlike std::hash.
inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::uint64_t identity_seed(std::string_view identity_id,
                                   std::uint64_t batch_seed) {
    return fnv1a(identity_id) ^ batch_seed;
}

// Frontal pose first, then the positive angles ascending, then the negative
// ones. Each side draws its angles without replacement from the whole-degree
// grid (0, max_angle].
inline std::vector<RollPose> plan_sweep(const SweepSpec& spec, std::uint64_t seed) {
    spec.validate();
    const int grid = static_cast<int>(spec.max_angle);
    std::mt19937_64 rng(seed);

    auto draw = [&](int n) {
        std::vector<int> deck(grid);
        for (int i = 0; i < grid; ++i) deck[i] = i + 1;
        for (int i = 0; i < n; ++i) {
            const int j = i + static_cast<int>(rng() % (grid - i));
            std::swap(deck[i], deck[j]);
        }
        deck.resize(n);
        std::sort(deck.begin(), deck.end());
        return deck;
    };

    std::vector<RollPose> poses;
    poses.reserve(spec.total_renders());
    if (spec.include_frontal) poses.emplace_back(0.0);
    for (int a : draw(spec.n_positive)) poses.emplace_back(static_cast<double>(a));
    for (int a : draw(spec.n_negative)) poses.emplace_back(static_cast<double>(-a));
    return poses;
}

struct BatchOptions {
    double fg_threshold = 0.6;
    QualityHook quality_hook;
    int workers = 0; // 0: FPFORGE_WORKERS env, else hardware concurrency
    int canvas_w = 512;
    int canvas_h = 512;
    double ppi = 500.0;
};

inline int resolve_workers(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("FPFORGE_WORKERS")) {
        const int v = std::atoi(env);
        if (v > 0) return v;
    }
    const unsigned hc = std::thread::hardware_concurrency();
    return hc > 0 ? static_cast<int>(hc) : 1;
}

namespace detail {

inline void check_identity_ids(const std::vector<IdentityRecord>& records) {
    std::vector<std::string_view> seen;
    for (const auto& rec : records) {
        if (rec.identity_id.empty())
            throw BadParameter("run_batch: empty identity id");
        if (rec.identity_id.find('/') != std::string::npos ||
            rec.identity_id.find('\\') != std::string::npos ||
            rec.identity_id.find("..") != std::string::npos)
            throw BadParameter("run_batch: identity id is not a plain name: " +
                               rec.identity_id);
        for (auto s : seen)
            if (s == rec.identity_id)
                throw BadParameter("run_batch: duplicate identity id: " +
                                   rec.identity_id);
        seen.push_back(rec.identity_id);
    }
}

inline std::string angle_file_name(double theta_deg) {
    return std::to_string(static_cast<long long>(std::llround(theta_deg))) + ".pgm";
}

// Runs one identity end to end and returns its manifest entry. Never throws;
// failures end up in the "status"/"error" fields so the batch keeps going.
inline nlohmann::json process_identity(const IdentityRecord& rec,
                                       const SweepSpec& spec,
                                       const std::filesystem::path& out_dir,
                                       std::uint64_t batch_seed,
                                       const BatchOptions& opt) {
    nlohmann::json entry;
    entry["identity_id"] = rec.identity_id;
    entry["texture_path"] = rec.texture_path;
    entry["cloud_path"] = rec.cloud_path;
    entry["renders"] = nlohmann::json::array();

    try {
        const GrayImage tex = read_pgm(rec.texture_path, opt.ppi);
        const FilterResult filt =
            filter_identity(tex, opt.fg_threshold, opt.quality_hook);
        entry["foreground_ratio"] = filt.foreground_ratio;
        entry["filter_reasons"] = filt.reasons;
        entry["passed_filter"] = filt.passed;
        if (filt.quality_checked) entry["quality_score"] = filt.quality_score;
        if (!filt.passed) {
            entry["status"] = "filtered";
            return entry;
        }

        const FingerPointCloud cloud = rectify_pose(load_cloud(rec.cloud_path));
        const UnfoldedSurface surf = unfold_to_uv(slice_sections(cloud), opt.ppi);

        const std::uint64_t seed = identity_seed(rec.identity_id, batch_seed);
        entry["seed"] = seed;
        std::vector<RollPose> poses = plan_sweep(spec, seed);
        std::sort(poses.begin(), poses.end(),
                  [](const RollPose& a, const RollPose& b) {
                      return a.theta_deg < b.theta_deg;
                  });

        const std::filesystem::path dir = out_dir / rec.identity_id;
        std::filesystem::create_directories(dir);
        for (const RollPose& pose : poses) {
            const ProjectedImage pi =
                render_pose(surf, tex, pose, opt.canvas_w, opt.canvas_h);
            const std::string name = angle_file_name(pose.theta_deg);
            write_pgm((dir / name).string(), pi.img);

            size_t visible = 0;
            for (auto b : pi.visibility.data) visible += b ? 1 : 0;
            nlohmann::json rj;
            rj["theta"] = pose.theta_deg;
            rj["image_path"] = rec.identity_id + "/" + name;
            rj["delta_u"] = pi.delta_u_px;
            rj["foreground_ratio"] =
                static_cast<double>(visible) / (static_cast<double>(opt.canvas_w) *
                                                opt.canvas_h);
            entry["renders"].push_back(std::move(rj));
        }
        entry["status"] = "ok";
    } catch (const HookError& e) {
        entry["status"] = "error";
        entry["error"] = e.what();
        entry["hook"] = e.hook;
    } catch (const std::exception& e) {
        entry["status"] = "error";
        entry["error"] = e.what();
    }
    return entry;
}

} // namespace detail

// Renders every passing identity under out_dir, writes a JSON record next to
// each identity's images, and returns the top-level manifest (also written to
// out_dir/manifest.json). An unusable out_dir throws; per-identity trouble is
// recorded in the manifest instead.
inline nlohmann::json run_batch(const std::vector<IdentityRecord>& records,
                                const SweepSpec& spec,
                                const std::filesystem::path& out_dir,
                                std::uint64_t seed,
                                const BatchOptions& opt = {}) {
    spec.validate();
    if (!(opt.fg_threshold > 0.0) || !(opt.fg_threshold < 1.0))
        throw BadParameter("run_batch: fg_threshold outside (0, 1)");
    if (opt.canvas_w < 1 || opt.canvas_h < 1)
        throw BadParameter("run_batch: bad canvas size");
    detail::check_identity_ids(records);

    std::filesystem::create_directories(out_dir);

    std::vector<nlohmann::json> entries(records.size());
    std::atomic<size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const size_t i = next.fetch_add(1);
            if (i >= records.size()) return;
            entries[i] =
                detail::process_identity(records[i], spec, out_dir, seed, opt);
        }
    };

    const int nw =
        std::max(1, std::min(resolve_workers(opt.workers),
                             static_cast<int>(std::max<size_t>(records.size(), 1))));
    if (nw <= 1 || records.size() <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < nw; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    size_t passed = 0, filtered = 0, errors = 0, images = 0;
    for (const auto& e : entries) {
        const std::string status = e.at("status").get<std::string>();
        if (status == "ok")
            ++passed;
        else if (status == "filtered")
            ++filtered;
        else
            ++errors;
        images += e.at("renders").size();
    }

    nlohmann::json manifest;
    manifest["tool"] = kToolName;
    manifest["version"] = kToolVersion;
    manifest["seed"] = seed;
    manifest["spec"] = {{"n_positive", spec.n_positive},
                        {"n_negative", spec.n_negative},
                        {"max_angle", spec.max_angle},
                        {"include_frontal", spec.include_frontal}};
    manifest["fg_threshold"] = opt.fg_threshold;
    manifest["quality_hook"] = static_cast<bool>(opt.quality_hook);
    manifest["canvas"] = {opt.canvas_w, opt.canvas_h};
    manifest["ppi"] = opt.ppi;
    manifest["counts"] = {{"total", records.size()},
                          {"passed", passed},
                          {"filtered", filtered},
                          {"errors", errors},
                          {"images", images}};
    manifest["identities"] = entries;

    for (size_t i = 0; i < records.size(); ++i) {
        if (entries[i].at("status") == "filtered" ||
            entries[i].at("status") == "ok") {
            const std::filesystem::path dir = out_dir / records[i].identity_id;
            std::filesystem::create_directories(dir);
            std::ofstream f(dir / "identity.json");
            f << entries[i].dump(2) << "\n";
        }
    }
    std::ofstream mf(out_dir / "manifest.json");
    if (!mf) throw FormatError("run_batch: cannot write manifest");
    mf << manifest.dump(2) << "\n";
    return manifest;
}

} // namespace fpforge
