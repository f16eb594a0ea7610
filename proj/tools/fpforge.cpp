// fpforge: command line front end over the library. Subcommands map 1:1 onto
// the library modules; all heavy lifting lives in the headers. Logging goes
// to stderr so stdout stays clean for data, and every run is reproducible
// from its flags plus the seed.

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <CLI11.hpp>
#include <json.hpp>

#include "fpforge/diffusion.hpp"
#include "fpforge/errors.hpp"
#include "fpforge/image.hpp"
#include "fpforge/pgm.hpp"
#include "fpforge/pipeline.hpp"
#include "fpforge/pointcloud.hpp"
#include "fpforge/poseproject.hpp"
#include "fpforge/sauvola.hpp"
#include "fpforge/unfold.hpp"
#include "fpforge/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Logger {
    bool as_json = false;

    void event(const std::string& name,
               std::initializer_list<std::pair<const char*, json>> fields) const {
        if (as_json) {
            json j;
            j["event"] = name;
            for (const auto& [k, v] : fields) j[k] = v;
            std::cerr << j.dump() << "\n";
        } else {
            std::cerr << "[" << name << "]";
            for (const auto& [k, v] : fields)
                std::cerr << " " << k << "="
                          << (v.is_string() ? v.get<std::string>() : v.dump());
            std::cerr << "\n";
        }
    }
};

json load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw fpforge::FormatError("config: cannot open " + path);
    try {
        return json::parse(f);
    } catch (const json::exception& e) {
        throw fpforge::FormatError("config: " + path + ": " + e.what());
    }
}

// Config values only fill in flags the user left at their defaults.
template <typename T>
void overlay(const json& cfg, const char* key, const CLI::Option* opt, T& target) {
    if (opt != nullptr && opt->count() > 0) return;
    if (!cfg.contains(key)) return;
    try {
        target = cfg.at(key).get<T>();
    } catch (const json::exception& e) {
        throw fpforge::FormatError(std::string("config: bad value for '") + key +
                                   "': " + e.what());
    }
}

// External scorer protocol: the command gets a PGM path as its one argument
// and prints a numeric score on stdout.
fpforge::QualityHook make_command_hook(const std::string& cmd) {
    return [cmd](const fpforge::GrayImage& img) -> double {
        static std::atomic<std::uint64_t> counter{0};
        const fs::path tmp =
            fs::temp_directory_path() /
            ("fpforge_hook_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter.fetch_add(1)) + ".pgm");
        try {
            fpforge::write_pgm(tmp.string(), img);
        } catch (const std::exception& e) {
            throw fpforge::HookError(cmd, std::string("cannot stage image: ") +
                                              e.what());
        }
        const std::string full = cmd + " '" + tmp.string() + "'";
        FILE* pipe = ::popen(full.c_str(), "r");
        if (pipe == nullptr) {
            std::error_code ec;
            fs::remove(tmp, ec);
            throw fpforge::HookError(cmd, "cannot spawn");
        }
        std::string out;
        char buf[256];
        while (::fgets(buf, sizeof buf, pipe) != nullptr) out += buf;
        const int rc = ::pclose(pipe);
        std::error_code ec;
        fs::remove(tmp, ec);
        if (rc != 0)
            throw fpforge::HookError(cmd, "exit status " + std::to_string(rc));
        try {
            return std::stod(out);
        } catch (const std::exception&) {
            throw fpforge::HookError(cmd, "unparseable score: '" + out + "'");
        }
    };
}

fpforge::UnfoldedSurface unfold_cloud_file(const std::string& path, double ppi) {
    const fpforge::FingerPointCloud cloud =
        fpforge::rectify_pose(fpforge::load_cloud(path));
    return fpforge::unfold_to_uv(fpforge::slice_sections(cloud), ppi);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"contactless fingerprint unfolding and rendering toolkit"};
    app.require_subcommand(1);

    std::string config_path;
    app.add_option("--config", config_path,
                   "JSON file supplying defaults for unset flags");
    Logger log;
    app.add_flag("--json-log", log.as_json, "emit JSON log lines on stderr");
    app.set_version_flag("--version",
                         std::string(fpforge::kToolName) + " " +
                             fpforge::kToolVersion +
                             " (formats: manifest 1, uvmap 1)");

    auto* bin =
        app.add_subcommand("binarize", "Adaptive ridge binarization of a PGM image");
    struct {
        std::string in, out, mask;
        int window = 11;
        double k = 0.007;
        double range = 128.0;
    } b;
    bin->add_option("--in", b.in, "input grayscale PGM")->required();
    bin->add_option("--out", b.out, "output binary PGM (0 ridge, 255 background)")
        ->required();
    bin->add_option("--mask", b.mask,
                    "foreground mask PGM (255 inside); estimated when absent");
    auto* b_window =
        bin->add_option("--window", b.window, "odd window size")->capture_default_str();
    auto* b_k = bin->add_option("--k", b.k, "sensitivity")->capture_default_str();
    auto* b_range =
        bin->add_option("--range", b.range, "dynamic range of the standard deviation")
            ->capture_default_str();

    auto* unf = app.add_subcommand("unfold",
                                   "Slice a finger point cloud and write its UV map");
    struct {
        std::string cloud, out;
        double ppi = 500.0;
    } u;
    unf->add_option("--cloud", u.cloud, "point cloud (.ply or .xyz)")->required();
    unf->add_option("--out", u.out, "output UV map file")->required();
    auto* u_ppi = unf->add_option("--ppi", u.ppi, "target resolution")
                      ->capture_default_str();

    auto* prj = app.add_subcommand(
        "project", "Render a textured cloud at a roll angle with compensation");
    struct {
        std::string cloud, texture, out;
        double theta = 0.0;
        int canvas = 512;
        double ppi = 500.0;
    } pj;
    prj->add_option("--cloud", pj.cloud, "point cloud (.ply or .xyz)")->required();
    prj->add_option("--texture", pj.texture, "UV texture PGM")->required();
    prj->add_option("--theta", pj.theta, "roll angle in degrees, |theta| <= 60")
        ->required();
    prj->add_option("--out", pj.out, "output PGM; a .json sidecar is written too")
        ->required();
    auto* p_canvas =
        prj->add_option("--canvas", pj.canvas, "square canvas size in px")
            ->capture_default_str();
    auto* p_ppi =
        prj->add_option("--ppi", pj.ppi, "target resolution")->capture_default_str();

    auto* sw = app.add_subcommand("sweep",
                                  "Run the 9-pose dataset sweep over identities");
    struct {
        std::string manifest_in, out, quality_cmd;
        std::uint64_t seed = 0;
        int workers = 0;
        double fg_threshold = 0.6;
        int canvas = 512;
    } s;
    sw->add_option("--manifest-in", s.manifest_in,
                   "JSON list of identities (id, texture, cloud)")
        ->required();
    sw->add_option("--out", s.out, "output directory")->required();
    sw->add_option("--seed", s.seed, "batch seed")->required();
    auto* s_workers =
        sw->add_option("--workers", s.workers, "worker threads (0: auto)")
            ->capture_default_str();
    auto* s_fg = sw->add_option("--fg-threshold", s.fg_threshold,
                                "strict foreground lower bound")
                     ->capture_default_str();
    auto* s_quality = sw->add_option("--quality-cmd", s.quality_cmd,
                                     "external quality scorer command");
    auto* s_canvas = sw->add_option("--canvas", s.canvas, "square canvas size in px")
                         ->capture_default_str();

    auto* dd = app.add_subcommand(
        "ddim-demo", "Reverse-diffusion round trip with the analytic predictor");
    struct {
        int steps = 50;
        std::string grid = "3x16x16";
        std::uint64_t seed = 0;
    } d;
    auto* d_steps =
        dd->add_option("--steps", d.steps, "schedule length T")->capture_default_str();
    dd->add_option("--grid", d.grid, "latent shape CxHxW")->capture_default_str();
    dd->add_option("--seed", d.seed, "RNG seed")->capture_default_str();

    // let --config and --json-log appear after the subcommand too
    for (CLI::App* sub : app.get_subcommands([](const CLI::App*) { return true; }))
        sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e, std::cout, std::cerr);
        std::cerr << app.help();
        return 2;
    }

    try {
        json cfg = json::object();
        if (!config_path.empty()) cfg = load_config(config_path);

        if (app.got_subcommand(bin)) {
            overlay(cfg, "window", b_window, b.window);
            overlay(cfg, "k", b_k, b.k);
            overlay(cfg, "range", b_range, b.range);

            const fpforge::GrayImage img = fpforge::read_pgm(b.in);
            const fpforge::ForegroundMask mask =
                b.mask.empty() ? fpforge::estimate_foreground(img)
                               : fpforge::read_mask_pgm(b.mask);
            fpforge::SauvolaParams params;
            params.window = b.window;
            params.k = b.k;
            params.range = b.range;
            const fpforge::BinaryMap bm = fpforge::binarize(img, mask, params);
            fpforge::write_pgm(b.out, bm);
            log.event("binarize", {{"in", b.in},
                                   {"out", b.out},
                                   {"window", b.window},
                                   {"k", b.k},
                                   {"range", b.range},
                                   {"mask", b.mask.empty() ? "estimated" : b.mask}});
        } else if (app.got_subcommand(unf)) {
            overlay(cfg, "ppi", u_ppi, u.ppi);
            const fpforge::UnfoldedSurface surf = unfold_cloud_file(u.cloud, u.ppi);
            fpforge::write_uvmap(u.out, surf);
            log.event("unfold", {{"cloud", u.cloud},
                                 {"out", u.out},
                                 {"points", surf.retained},
                                 {"sections", surf.sections.size()},
                                 {"skipped_sections", surf.skipped_sections}});
        } else if (app.got_subcommand(prj)) {
            overlay(cfg, "canvas", p_canvas, pj.canvas);
            overlay(cfg, "ppi", p_ppi, pj.ppi);

            const fpforge::RollPose pose(pj.theta);
            const fpforge::GrayImage tex = fpforge::read_pgm(pj.texture);
            const fpforge::UnfoldedSurface surf = unfold_cloud_file(pj.cloud, pj.ppi);
            const fpforge::ProjectedImage pi =
                fpforge::render_pose(surf, tex, pose, pj.canvas, pj.canvas);
            fpforge::write_pgm(pj.out, pi.img);

            json side;
            side["theta"] = pi.theta_deg;
            side["delta_u_px"] = pi.delta_u_px;
            side["rendered_pixel_count"] = pi.rendered_pixels;
            const fs::path side_path = fs::path(pj.out).replace_extension(".json");
            std::ofstream sf(side_path);
            if (!sf) throw fpforge::FormatError("project: cannot write " +
                                                side_path.string());
            sf << side.dump(2) << "\n";
            log.event("project", {{"out", pj.out},
                                  {"theta", pi.theta_deg},
                                  {"delta_u_px", pi.delta_u_px},
                                  {"rendered_pixels", pi.rendered_pixels}});
        } else if (app.got_subcommand(sw)) {
            overlay(cfg, "workers", s_workers, s.workers);
            overlay(cfg, "fg_threshold", s_fg, s.fg_threshold);
            overlay(cfg, "quality_cmd", s_quality, s.quality_cmd);
            overlay(cfg, "canvas", s_canvas, s.canvas);

            fpforge::SweepSpec spec;
            if (cfg.contains("sweep")) {
                const json& js = cfg.at("sweep");
                if (js.contains("n_positive")) spec.n_positive = js.at("n_positive");
                if (js.contains("n_negative")) spec.n_negative = js.at("n_negative");
                if (js.contains("max_angle")) spec.max_angle = js.at("max_angle");
                if (js.contains("include_frontal"))
                    spec.include_frontal = js.at("include_frontal");
            }

            std::ifstream mf(s.manifest_in);
            if (!mf)
                throw fpforge::FormatError("sweep: cannot open " + s.manifest_in);
            json jin;
            try {
                jin = json::parse(mf);
            } catch (const json::exception& e) {
                throw fpforge::FormatError("sweep: " + s.manifest_in + ": " +
                                           e.what());
            }
            std::vector<fpforge::IdentityRecord> records;
            if (!jin.contains("identities") || !jin.at("identities").is_array())
                throw fpforge::FormatError(
                    "sweep: manifest needs an 'identities' array");
            for (const json& ent : jin.at("identities")) {
                fpforge::IdentityRecord rec;
                try {
                    rec.identity_id = ent.at("id").get<std::string>();
                    rec.texture_path = ent.at("texture").get<std::string>();
                    rec.cloud_path = ent.at("cloud").get<std::string>();
                } catch (const json::exception& e) {
                    throw fpforge::FormatError(
                        std::string("sweep: bad identity entry: ") + e.what());
                }
                records.push_back(std::move(rec));
            }

            fpforge::BatchOptions opt;
            opt.fg_threshold = s.fg_threshold;
            opt.workers = s.workers;
            opt.canvas_w = s.canvas;
            opt.canvas_h = s.canvas;
            if (!s.quality_cmd.empty())
                opt.quality_hook = make_command_hook(s.quality_cmd);

            const json manifest =
                fpforge::run_batch(records, spec, s.out, s.seed, opt);
            const json& counts = manifest.at("counts");
            log.event("sweep", {{"out", s.out},
                                {"seed", s.seed},
                                {"total", counts.at("total")},
                                {"passed", counts.at("passed")},
                                {"filtered", counts.at("filtered")},
                                {"errors", counts.at("errors")},
                                {"images", counts.at("images")}});
            std::cout << counts.dump() << "\n";
        } else if (app.got_subcommand(dd)) {
            int c = 0, h = 0, w = 0;
            char tail = '\0';
            if (std::sscanf(d.grid.c_str(), "%dx%dx%d%c", &c, &h, &w, &tail) != 3 ||
                c < 1 || h < 1 || w < 1)
                throw fpforge::BadParameter("ddim-demo: grid must look like 3x16x16");

            const fpforge::NoiseSchedule sched = fpforge::linear_schedule(d.steps);
            fpforge::LatentGrid z0(c, h, w);
            fpforge::LatentGrid eps(c, h, w);
            std::mt19937_64 rng(d.seed);
            std::normal_distribution<double> g(0.0, 1.0);
            for (double& v : z0.values) v = g(rng);
            for (double& v : eps.values) v = g(rng);

            const fpforge::LatentGrid zT =
                fpforge::forward_noise(z0, sched.T, eps, sched);
            const fpforge::ExactPredictor oracle(z0, sched);
            const fpforge::LatentGrid rec =
                fpforge::ddim_sample(zT, oracle, nullptr, sched);
            double worst = 0.0;
            for (size_t i = 0; i < rec.values.size(); ++i)
                worst = std::max(worst, std::abs(rec.values[i] - z0.values[i]));

            std::cout << "rng=mt19937_64 seed=" << d.seed << "\n";
            std::cout << "steps=" << sched.T << " grid=" << c << "x" << h << "x" << w
                      << "\n";
            char line[64];
            std::snprintf(line, sizeof line, "max_reconstruction_error=%.6e", worst);
            std::cout << line << "\n";
            log.event("ddim-demo", {{"steps", sched.T},
                                    {"seed", d.seed},
                                    {"max_error", worst}});
        }
    } catch (const fpforge::BadParameter& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const fpforge::BadDimension& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
