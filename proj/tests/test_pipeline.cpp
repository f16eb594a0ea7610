#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fpforge/pipeline.hpp"
#include "fpforge/synthetic.hpp"

using namespace fpforge;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / "fpforge_pipeline" / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    EXPECT_TRUE(f.good()) << p;
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

int count_pgms(const fs::path& dir) {
    int n = 0;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.path().extension() == ".pgm") ++n;
    return n;
}

struct Assets {
    fs::path dir;
    std::string dense_tex, sparse_tex, small_cloud, big_cloud;
};

// One shared asset set per process: two textures (one clearly above and one
// clearly below the default foreground threshold) and two clouds (one that
// fits the default canvas, one that overflows it).
const Assets& assets() {
    static const Assets a = [] {
        Assets as;
        as.dir = fresh_dir("assets");
        as.dense_tex = (as.dir / "dense.pgm").string();
        as.sparse_tex = (as.dir / "sparse.pgm").string();
        as.small_cloud = (as.dir / "small.ply").string();
        as.big_cloud = (as.dir / "big.ply").string();
        write_pgm(as.dense_tex, synth::ridge_texture(128, 128));
        write_pgm(as.sparse_tex, synth::textured_square(128, 128, 40, 88));
        save_ply(as.small_cloud, synth::finger_phantom(4.0, 20.0, 120));
        save_ply(as.big_cloud, synth::finger_phantom(8.0, 40.0, 160));
        return as;
    }();
    return a;
}

} // namespace

TEST(Plan, DefaultSpecGivesNinePoses) {
    const SweepSpec spec;
    const std::vector<RollPose> poses = plan_sweep(spec, 42);
    ASSERT_EQ(poses.size(), 9u);
    EXPECT_EQ(poses[0].theta_deg, 0.0);

    std::set<double> pos, neg;
    for (size_t i = 1; i < poses.size(); ++i) {
        const double t = poses[i].theta_deg;
        EXPECT_EQ(t, std::floor(t)) << "angles come from a whole-degree grid";
        if (t > 0) {
            EXPECT_LE(t, 60.0);
            pos.insert(t);
        } else {
            EXPECT_LT(t, 0.0);
            EXPECT_GE(t, -60.0);
            neg.insert(t);
        }
    }
    EXPECT_EQ(pos.size(), 4u); // sets also prove no duplicates per side
    EXPECT_EQ(neg.size(), 4u);
}

TEST(Plan, DeterministicPerSeed) {
    const SweepSpec spec;
    const auto a = plan_sweep(spec, 7);
    const auto b = plan_sweep(spec, 7);
    ASSERT_EQ(a.size(), b.size());
    for (size_t i = 0; i < a.size(); ++i)
        EXPECT_EQ(a[i].theta_deg, b[i].theta_deg);

    const auto c = plan_sweep(spec, 8);
    bool differs = false;
    for (size_t i = 0; i < a.size(); ++i)
        if (a[i].theta_deg != c[i].theta_deg) differs = true;
    EXPECT_TRUE(differs);
}

TEST(Plan, FrontalOnly) {
    SweepSpec spec;
    spec.n_positive = 0;
    spec.n_negative = 0;
    const auto poses = plan_sweep(spec, 1);
    ASSERT_EQ(poses.size(), 1u);
    EXPECT_EQ(poses[0].theta_deg, 0.0);
}

TEST(Plan, NarrowGridStaysInRange) {
    SweepSpec spec;
    spec.max_angle = 10.0;
    spec.n_positive = 10;
    spec.n_negative = 3;
    spec.include_frontal = false;
    const auto poses = plan_sweep(spec, 5);
    ASSERT_EQ(poses.size(), 13u);
    std::set<double> pos;
    for (const auto& p : poses) {
        EXPECT_LE(std::abs(p.theta_deg), 10.0);
        EXPECT_NE(p.theta_deg, 0.0);
        if (p.theta_deg > 0) pos.insert(p.theta_deg);
    }
    EXPECT_EQ(pos.size(), 10u); // drew every positive grid angle exactly once
}

TEST(Plan, RejectsBadSpecs) {
    SweepSpec spec;
    spec.n_positive = 61;
    EXPECT_THROW(plan_sweep(spec, 1), BadParameter);
    spec.n_positive = 4;
    spec.n_negative = -1;
    EXPECT_THROW(plan_sweep(spec, 1), BadParameter);
    spec.n_negative = 4;
    spec.max_angle = 0.0;
    EXPECT_THROW(plan_sweep(spec, 1), BadParameter);
    spec.max_angle = 75.0;
    EXPECT_THROW(plan_sweep(spec, 1), BadParameter);
    spec.max_angle = 5.0;
    spec.n_positive = 6;
    EXPECT_THROW(plan_sweep(spec, 1), BadParameter);
}

TEST(Seed, FnvReferenceVectors) {
    EXPECT_EQ(fnv1a(""), 14695981039346656037ULL);
    EXPECT_EQ(fnv1a("a"), 0xaf63dc4c8601ec8cULL);
    EXPECT_EQ(fnv1a("foobar"), 0x85944171f73967e8ULL);

    EXPECT_EQ(identity_seed("id7", 0), fnv1a("id7"));
    EXPECT_EQ(identity_seed("id7", 0xffffULL), fnv1a("id7") ^ 0xffffULL);
    EXPECT_NE(identity_seed("id7", 1), identity_seed("id8", 1));
}

TEST(Filter, ForegroundThresholdIsStrict) {
    const GrayImage sparse = synth::textured_square(128, 128, 40, 88);
    const FilterResult base = filter_identity(sparse, 0.6);
    EXPECT_FALSE(base.passed);
    ASSERT_EQ(base.reasons.size(), 1u);
    EXPECT_EQ(base.reasons[0], "foreground");
    EXPECT_GT(base.foreground_ratio, 0.05);
    EXPECT_LT(base.foreground_ratio, 0.5);
    EXPECT_FALSE(base.quality_checked);

    // a threshold equal to the measured ratio must fail, just below must pass
    const double r = base.foreground_ratio;
    EXPECT_FALSE(filter_identity(sparse, r).passed);
    EXPECT_TRUE(filter_identity(sparse, r - 0.01).passed);

    const GrayImage dense = synth::ridge_texture(128, 128);
    const FilterResult ok = filter_identity(dense, 0.6);
    EXPECT_TRUE(ok.passed);
    EXPECT_GT(ok.foreground_ratio, 0.9);
    EXPECT_TRUE(ok.reasons.empty());
}

TEST(Filter, QualityHookIsStrictAtThreshold) {
    const GrayImage dense = synth::ridge_texture(128, 128);

    const FilterResult at = filter_identity(dense, 0.6, [](const GrayImage&) {
        return 0.55;
    });
    EXPECT_FALSE(at.passed);
    ASSERT_EQ(at.reasons.size(), 1u);
    EXPECT_EQ(at.reasons[0], "quality");
    EXPECT_TRUE(at.quality_checked);
    EXPECT_DOUBLE_EQ(at.quality_score, 0.55);

    const FilterResult above = filter_identity(dense, 0.6, [](const GrayImage&) {
        return 0.56;
    });
    EXPECT_TRUE(above.passed);

    // both checks can fail at once; reasons accumulate
    const GrayImage sparse = synth::textured_square(128, 128, 40, 88);
    const FilterResult both = filter_identity(sparse, 0.6, [](const GrayImage&) {
        return 0.1;
    });
    EXPECT_FALSE(both.passed);
    ASSERT_EQ(both.reasons.size(), 2u);
    EXPECT_EQ(both.reasons[0], "foreground");
    EXPECT_EQ(both.reasons[1], "quality");
}

TEST(Filter, HookErrorsPassThroughWithIdentity) {
    const GrayImage dense = synth::ridge_texture(64, 64);
    try {
        filter_identity(dense, 0.6, [](const GrayImage&) -> double {
            throw HookError("nfiq-mock", "exec failed");
        });
        FAIL() << "expected HookError";
    } catch (const HookError& e) {
        EXPECT_EQ(e.hook, "nfiq-mock");
        EXPECT_NE(std::string(e.what()).find("nfiq-mock"), std::string::npos);
    }
}

TEST(Filter, RaisingThresholdNeverRescuesAnIdentity) {
    const GrayImage tex = synth::textured_square(128, 128, 16, 104);
    bool prev = true;
    for (double t = 0.05; t < 0.96; t += 0.05) {
        const bool now = filter_identity(tex, t).passed;
        EXPECT_TRUE(prev || !now) << "pass state recovered at threshold " << t;
        prev = now;
    }
}

TEST(Filter, RejectsBadInputs) {
    const GrayImage dense = synth::ridge_texture(64, 64);
    EXPECT_THROW(filter_identity(dense, 0.0), BadParameter);
    EXPECT_THROW(filter_identity(dense, 1.0), BadParameter);
    EXPECT_THROW(filter_identity(dense, -0.2), BadParameter);
    EXPECT_THROW(filter_identity(GrayImage{}, 0.6), BadDimension);
}

TEST(Workers, ResolutionOrder) {
    EXPECT_EQ(resolve_workers(3), 3);

    setenv("FPFORGE_WORKERS", "5", 1);
    EXPECT_EQ(resolve_workers(0), 5);
    EXPECT_EQ(resolve_workers(2), 2); // explicit request beats the env

    setenv("FPFORGE_WORKERS", "not-a-number", 1);
    EXPECT_GE(resolve_workers(0), 1);

    unsetenv("FPFORGE_WORKERS");
    EXPECT_GE(resolve_workers(0), 1);
}

TEST(Batch, TwoIdentitiesOneFiltered) {
    const Assets& as = assets();
    const fs::path out = fresh_dir("two_ids");
    const std::vector<IdentityRecord> recs = {
        {"alpha", as.dense_tex, as.small_cloud},
        {"beta", as.sparse_tex, as.small_cloud},
    };
    BatchOptions opt;
    opt.workers = 2;
    const nlohmann::json m = run_batch(recs, SweepSpec{}, out, 777, opt);

    EXPECT_EQ(m["counts"]["total"].get<int>(), 2);
    EXPECT_EQ(m["counts"]["passed"].get<int>(), 1);
    EXPECT_EQ(m["counts"]["filtered"].get<int>(), 1);
    EXPECT_EQ(m["counts"]["errors"].get<int>(), 0);
    EXPECT_EQ(m["counts"]["images"].get<int>(), 9);
    EXPECT_EQ(m["tool"].get<std::string>(), "fpforge");
    EXPECT_EQ(m["version"].get<std::string>(), kToolVersion);
    EXPECT_EQ(m["seed"].get<std::uint64_t>(), 777u);
    EXPECT_EQ(m["spec"]["n_positive"].get<int>(), 4);
    EXPECT_FALSE(m.contains("timestamp"));

    ASSERT_EQ(m["identities"].size(), 2u);
    const auto& alpha = m["identities"][0];
    EXPECT_EQ(alpha["identity_id"].get<std::string>(), "alpha");
    EXPECT_EQ(alpha["status"].get<std::string>(), "ok");
    EXPECT_EQ(alpha["seed"].get<std::uint64_t>(), identity_seed("alpha", 777));
    ASSERT_EQ(alpha["renders"].size(), 9u);

    // renders sorted ascending and matching the per-identity plan
    std::set<double> planned;
    for (const auto& p : plan_sweep(SweepSpec{}, identity_seed("alpha", 777)))
        planned.insert(p.theta_deg);
    double prev = -1e9;
    for (const auto& r : alpha["renders"]) {
        const double t = r["theta"].get<double>();
        EXPECT_GT(t, prev);
        prev = t;
        EXPECT_TRUE(planned.count(t)) << t;
    }

    const auto& beta = m["identities"][1];
    EXPECT_EQ(beta["status"].get<std::string>(), "filtered");
    EXPECT_EQ(beta["filter_reasons"][0].get<std::string>(), "foreground");
    EXPECT_EQ(beta["renders"].size(), 0u);

    EXPECT_EQ(count_pgms(out / "alpha"), 9);
    EXPECT_TRUE(fs::exists(out / "alpha" / "identity.json"));
    EXPECT_TRUE(fs::exists(out / "beta" / "identity.json"));
    EXPECT_FALSE(fs::exists(out / "beta" / "0.pgm"));
    EXPECT_TRUE(fs::exists(out / "manifest.json"));
}

TEST(Batch, ManifestEntriesSurviveIntegrityAudit) {
    const Assets& as = assets();
    const fs::path out = fresh_dir("audit");
    const std::vector<IdentityRecord> recs = {{"probe", as.dense_tex, as.small_cloud}};
    const nlohmann::json m = run_batch(recs, SweepSpec{}, out, 31337);

    const FingerPointCloud cloud = rectify_pose(load_cloud(as.small_cloud));
    const UnfoldedSurface surf = unfold_to_uv(slice_sections(cloud));

    const auto& entry = m["identities"][0];
    ASSERT_EQ(entry["status"].get<std::string>(), "ok");
    for (const auto& r : entry["renders"]) {
        const fs::path img_path = out / r["image_path"].get<std::string>();
        ASSERT_TRUE(fs::exists(img_path)) << img_path;
        const GrayImage img = read_pgm(img_path.string());
        EXPECT_EQ(img.width, 512);
        EXPECT_EQ(img.height, 512);

        const double theta = r["theta"].get<double>();
        EXPECT_DOUBLE_EQ(r["delta_u"].get<double>(),
                         compute_delta_u(surf, RollPose(theta)));
        if (theta == 0.0) EXPECT_EQ(r["delta_u"].get<double>(), 0.0);

        const double fg = r["foreground_ratio"].get<double>();
        EXPECT_GT(fg, 0.0);
        EXPECT_LT(fg, 1.0);
    }
}

TEST(Batch, RerunIsByteIdentical) {
    const Assets& as = assets();
    const std::vector<IdentityRecord> recs = {
        {"alpha", as.dense_tex, as.small_cloud},
        {"beta", as.sparse_tex, as.small_cloud},
    };
    const fs::path out1 = fresh_dir("rerun_a");
    const fs::path out2 = fresh_dir("rerun_b");

    BatchOptions serial;
    serial.workers = 1;
    BatchOptions parallel;
    parallel.workers = 2;
    run_batch(recs, SweepSpec{}, out1, 99, serial);
    run_batch(recs, SweepSpec{}, out2, 99, parallel);

    EXPECT_EQ(slurp(out1 / "manifest.json"), slurp(out2 / "manifest.json"));
    EXPECT_EQ(slurp(out1 / "alpha" / "identity.json"),
              slurp(out2 / "alpha" / "identity.json"));
    int compared = 0;
    for (const auto& e : fs::directory_iterator(out1 / "alpha")) {
        if (e.path().extension() != ".pgm") continue;
        EXPECT_EQ(slurp(e.path()), slurp(out2 / "alpha" / e.path().filename()));
        ++compared;
    }
    EXPECT_EQ(compared, 9);
}

TEST(Batch, EmptyInputYieldsZeroCountManifest) {
    const fs::path out = fresh_dir("empty");
    const nlohmann::json m = run_batch({}, SweepSpec{}, out, 5);
    EXPECT_EQ(m["counts"]["total"].get<int>(), 0);
    EXPECT_EQ(m["counts"]["passed"].get<int>(), 0);
    EXPECT_EQ(m["counts"]["images"].get<int>(), 0);
    EXPECT_TRUE(m["identities"].empty());
    EXPECT_TRUE(fs::exists(out / "manifest.json"));
}

TEST(Batch, RenderErrorIsRecordedWithoutAborting) {
    const Assets& as = assets();
    const fs::path out = fresh_dir("render_error");
    const std::vector<IdentityRecord> recs = {
        {"big", as.dense_tex, as.big_cloud}, // overflows the 512 canvas
        {"ok", as.dense_tex, as.small_cloud},
    };
    const nlohmann::json m = run_batch(recs, SweepSpec{}, out, 12);

    EXPECT_EQ(m["counts"]["passed"].get<int>(), 1);
    EXPECT_EQ(m["counts"]["errors"].get<int>(), 1);
    EXPECT_EQ(m["counts"]["images"].get<int>(), 9);
    EXPECT_EQ(m["identities"][0]["status"].get<std::string>(), "error");
    EXPECT_FALSE(m["identities"][0]["error"].get<std::string>().empty());
    EXPECT_EQ(m["identities"][1]["status"].get<std::string>(), "ok");
    EXPECT_EQ(count_pgms(out / "ok"), 9);
}

TEST(Batch, MissingInputsAreRecorded) {
    const Assets& as = assets();
    const fs::path out = fresh_dir("missing");
    const std::vector<IdentityRecord> recs = {
        {"ghost", (as.dir / "no_such.pgm").string(), as.small_cloud}};
    const nlohmann::json m = run_batch(recs, SweepSpec{}, out, 3);
    EXPECT_EQ(m["counts"]["errors"].get<int>(), 1);
    EXPECT_EQ(m["identities"][0]["status"].get<std::string>(), "error");
}

TEST(Batch, HookFailureRecordsHookIdentity) {
    const Assets& as = assets();
    const fs::path out = fresh_dir("hook_fail");
    BatchOptions opt;
    opt.workers = 1;
    opt.quality_hook = [](const GrayImage&) -> double {
        throw HookError("nfiq-mock", "spawn failed");
    };
    const nlohmann::json m = run_batch({{"alpha", as.dense_tex, as.small_cloud}},
                                       SweepSpec{}, out, 4, opt);
    EXPECT_EQ(m["counts"]["errors"].get<int>(), 1);
    EXPECT_EQ(m["identities"][0]["status"].get<std::string>(), "error");
    EXPECT_EQ(m["identities"][0]["hook"].get<std::string>(), "nfiq-mock");
}

TEST(Batch, QualityHookFiltersAtThreshold) {
    const Assets& as = assets();
    const fs::path out = fresh_dir("hook_filter");
    BatchOptions opt;
    opt.quality_hook = [](const GrayImage&) { return 0.55; };
    const nlohmann::json m = run_batch({{"alpha", as.dense_tex, as.small_cloud}},
                                       SweepSpec{}, out, 4, opt);
    EXPECT_EQ(m["counts"]["filtered"].get<int>(), 1);
    const auto& e = m["identities"][0];
    EXPECT_EQ(e["status"].get<std::string>(), "filtered");
    EXPECT_EQ(e["filter_reasons"][0].get<std::string>(), "quality");
    EXPECT_DOUBLE_EQ(e["quality_score"].get<double>(), 0.55);
}

TEST(Batch, RejectsBadArguments) {
    const Assets& as = assets();
    const fs::path out = fresh_dir("bad_args");
    const IdentityRecord good{"alpha", as.dense_tex, as.small_cloud};

    EXPECT_THROW(run_batch({{"a/b", as.dense_tex, as.small_cloud}}, SweepSpec{},
                           out, 1),
                 BadParameter);
    EXPECT_THROW(run_batch({{"..", as.dense_tex, as.small_cloud}}, SweepSpec{},
                           out, 1),
                 BadParameter);
    EXPECT_THROW(run_batch({good, good}, SweepSpec{}, out, 1), BadParameter);
    EXPECT_THROW(run_batch({{"", as.dense_tex, as.small_cloud}}, SweepSpec{},
                           out, 1),
                 BadParameter);

    BatchOptions opt;
    opt.fg_threshold = 1.0;
    EXPECT_THROW(run_batch({good}, SweepSpec{}, out, 1, opt), BadParameter);

    SweepSpec bad;
    bad.n_positive = -2;
    EXPECT_THROW(run_batch({good}, bad, out, 1), BadParameter);
}
