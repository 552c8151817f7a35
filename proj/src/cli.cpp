#include "spectralium/cli.hpp"

#include "spectralium/ddm.hpp"
#include "spectralium/error.hpp"
#include "spectralium/render.hpp"
#include "spectralium/scene.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <bit>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

namespace spectralium::cli {

namespace {

// Bad flag values; reported like parse errors.
struct ConfigError : Error {
    using Error::Error;
};

void add_render_flags(CLI::App* cmd, RenderConfig& c) {
    cmd->add_option("--scene", c.scene_path, "Scene file")->required();
    cmd->add_option("--width", c.width, "Image width (default: camera)");
    cmd->add_option("--height", c.height, "Image height (default: camera)");
    cmd->add_option("--spp", c.samples_per_pixel, "Samples per pixel");
    cmd->add_option("--photons", c.n_photons, "Photons per light (0 disables photon maps)");
    cmd->add_option("--max-depth", c.max_depth, "Maximum path depth");
    cmd->add_option("--seed", c.seed, "Random seed");
    cmd->add_option("--subdomains", c.n_subdomains, "Number of sub-domains (power of two)");
    cmd->add_option("--workers", c.n_workers, "Worker threads");
    cmd->add_option("--max-resident", c.max_resident, "Sub-domains kept in memory (default: all)");
    cmd->add_option("--load-cost-ms", c.load_cost_ms, "Synthetic load time for the whole scene");
    cmd->add_option("--out", c.output_path, "Output image (.png or .ppm)");
}

void check_counts(const RenderConfig& c) {
    if (c.width < 0 || c.height < 0) throw ConfigError("--width/--height must be >= 1");
    if (c.samples_per_pixel < 1) throw ConfigError("--spp must be >= 1");
    if (c.n_photons < 0) throw ConfigError("--photons must be >= 0");
    if (c.max_depth < 0) throw ConfigError("--max-depth must be >= 0");
    if (c.n_subdomains < 1 || !std::has_single_bit(static_cast<unsigned>(c.n_subdomains))) {
        throw ConfigError("--subdomains must be a power of two");
    }
    if (c.n_workers < 1) throw ConfigError("--workers must be >= 1");
    if (c.max_resident < 0) throw ConfigError("--max-resident must be >= 1");
    if (c.load_cost_ms < 0.0) throw ConfigError("--load-cost-ms must be >= 0");
}

void apply_thread_override(RenderConfig& c) {
    const char* env = std::getenv("SPECTRALIUM_THREADS");
    if (!env || !*env) return;
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (*end != '\0' || n < 1 || n > 4096) throw ConfigError("SPECTRALIUM_THREADS must be a positive integer");
    c.n_workers = static_cast<int>(n);
}

void check_output(const std::filesystem::path& p) {
    const auto ext = p.extension().string();
    if (ext != ".png" && ext != ".ppm") throw ConfigError("--out must end in .png or .ppm");
}

RenderSettings make_settings(const RenderConfig& c, const Scene& scene) {
    RenderSettings s;
    s.width = c.width > 0 ? c.width : scene.camera.width;
    s.height = c.height > 0 ? c.height : scene.camera.height;
    s.samples_per_pixel = c.samples_per_pixel;
    s.photons_per_light = c.n_photons;
    s.max_depth = c.max_depth;
    s.seed = c.seed;
    s.threads = c.n_workers;
    return s;
}

ddm::DdmSettings make_ddm(const RenderConfig& c, int subdomains, int workers) {
    ddm::DdmSettings d;
    d.n_subdomains = subdomains;
    d.n_workers = workers;
    d.max_resident = c.max_resident > 0 ? std::min(c.max_resident, subdomains) : subdomains;
    d.load_cost_ms = c.load_cost_ms;
    return d;
}

void print_metrics(std::ostream& out, const ddm::ScheduleMetrics& m, int subdomains) {
    out << std::fixed << std::setprecision(3);
    out << "wall " << m.wall_time << " s, subdomains " << subdomains << ", workers " << m.workers.size() << '\n';
    out << "busy " << m.busy_total() << " s, idle " << m.idle_total() << " s, load " << m.load_total() << " s\n";
    out << "migrations " << m.migrations << ", loads " << m.load_events << ", unloads " << m.unload_events
        << ", max resident " << m.max_resident_observed << '\n';
    out << "rays seeded " << m.seeded << ", spawned " << m.spawned << ", retired " << m.retired << '\n';
    out.unsetf(std::ios::floatfield);
}

int cmd_render(RenderConfig c, std::ostream& out) {
    check_counts(c);
    apply_thread_override(c);
    check_output(c.output_path);
    const Scene scene = parse_scene(c.scene_path);
    const RenderSettings settings = make_settings(c, scene);
    if (c.max_resident > c.n_subdomains) throw ConfigError("--max-resident must not exceed --subdomains");

    ImageAccumulator image;
    if (c.n_subdomains == 1 && c.n_workers == 1) {
        RenderStats stats;
        image = render_image(scene, settings, &stats);
        out << std::fixed << std::setprecision(3) << "wall " << stats.seconds
            << " s, single domain, 1 worker\n";
        out.unsetf(std::ios::floatfield);
        out << "camera rays " << stats.camera_rays << ", photons stored " << stats.photons_stored << '\n';
    } else {
        ddm::DdmResult r = run_ddm(scene, settings, make_ddm(c, c.n_subdomains, c.n_workers));
        print_metrics(out, r.metrics, c.n_subdomains);
        image = std::move(r.image);
    }
    write_image(c.output_path, image.width(), image.height(), to_srgb8(image, display_white_luminance(scene)));
    out << "wrote " << c.output_path.string() << " (" << image.width() << "x" << image.height() << ")\n";
    return kOk;
}

int cmd_bench(BenchConfig b, std::ostream& out) {
    RenderConfig& c = b.render;
    check_counts(c);
    if (b.reps < 1) throw ConfigError("--reps must be >= 1");
    if (b.workers.empty() || b.subdomains.empty()) throw ConfigError("worker and sub-domain lists must be non-empty");
    for (int w : b.workers) {
        if (w < 1) throw ConfigError("--workers-list entries must be >= 1");
    }
    for (int s : b.subdomains) {
        if (s < 1 || !std::has_single_bit(static_cast<unsigned>(s))) {
            throw ConfigError("--subdomains-list entries must be powers of two");
        }
    }
    const Scene scene = parse_scene(c.scene_path);
    const RenderSettings base = make_settings(c, scene);

    std::ostringstream csv;
    csv << "subdomains,workers,rep,wall_seconds,busy,idle,load,migrations\n";
    std::map<std::pair<int, int>, std::vector<double>> walls;
    for (int s : b.subdomains) {
        for (int w : b.workers) {
            for (int rep = 0; rep < b.reps; ++rep) {
                RenderSettings settings = base;
                settings.threads = w;
                const ddm::DdmResult r = run_ddm(scene, settings, make_ddm(c, s, w));
                const std::string wall = format_seconds(r.metrics.wall_time);
                csv << s << ',' << w << ',' << rep << ',' << wall << ',' << format_seconds(r.metrics.busy_total())
                    << ',' << format_seconds(r.metrics.idle_total()) << ',' << format_seconds(r.metrics.load_total())
                    << ',' << r.metrics.migrations << '\n';
                // Medians come from the printed values so the CSV reproduces them.
                walls[{s, w}].push_back(std::stod(wall));
            }
        }
    }

    if (b.csv_path.empty()) {
        out << csv.str();
    } else {
        std::ofstream f(b.csv_path);
        if (!f) throw IoError("cannot write '" + b.csv_path.string() + "'");
        f << csv.str();
        if (!f) throw IoError("write failed for '" + b.csv_path.string() + "'");
    }

    out << "median wall time (s), rows: sub-domains, columns: workers\n";
    out << std::setw(12) << "";
    for (int w : b.workers) out << std::setw(14) << w;
    out << '\n';
    for (int s : b.subdomains) {
        out << std::setw(12) << s;
        for (int w : b.workers) out << std::setw(14) << format_seconds(median(walls[{s, w}]));
        out << '\n';
    }
    return kOk;
}

}  // namespace

double median(std::vector<double> values) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::string format_seconds(double seconds) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.6f", seconds);
    return buf;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Spectral renderer with domain-decomposed parallel scheduling", "spectralium"};
    app.require_subcommand(1);

    RenderConfig render_cfg;
    auto* render = app.add_subcommand("render", "Render a scene to a PNG or PPM image");
    add_render_flags(render, render_cfg);

    BenchConfig bench_cfg;
    bench_cfg.render.output_path.clear();
    auto* bench = app.add_subcommand("bench", "Time renders over sub-domain and worker counts");
    add_render_flags(bench, bench_cfg.render);
    bench->add_option("--workers-list", bench_cfg.workers, "Comma-separated worker counts")->delimiter(',');
    bench->add_option("--subdomains-list", bench_cfg.subdomains, "Comma-separated sub-domain counts")->delimiter(',');
    bench->add_option("--reps", bench_cfg.reps, "Repetitions per configuration");
    bench->add_option("--csv", bench_cfg.csv_path, "CSV output file (default: standard output)");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kParseError;
    }

    try {
        if (render->parsed()) return cmd_render(render_cfg, out);
        return cmd_bench(bench_cfg, out);
    } catch (const ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kParseError;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return kParseError;
    } catch (const IoError& e) {
        err << "error: " << e.what() << '\n';
        return kIoError;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return kIoError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kRenderError;
    }
}

}  // namespace spectralium::cli
