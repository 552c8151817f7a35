// Runs every acceptance criterion and prints one PASS/FAIL line for each.
// Usage: spectralium_acceptance [criterion numbers...]

#include "spectralium/cli.hpp"
#include "spectralium/colorimetry.hpp"
#include "spectralium/ddm.hpp"
#include "spectralium/error.hpp"
#include "spectralium/render.hpp"
#include "spectralium/spectral.hpp"
#include "spectralium/sunlight.hpp"
#include "support.hpp"
#include "uniform_plane.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

using namespace spectralium;
namespace ts = testing_support;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* pattern, auto... values) {
    char buf[512];
    std::snprintf(buf, sizeof buf, pattern, values...);
    return buf;
}

Outcome fresnel_analytics() {
    const double glass = fresnel_reflectance(1.0, 1.5, 0.0, 1.0);
    const double gold = fresnel_reflectance(1.0, 0.47, 2.9, 1.0);
    const double gold_oracle = ts::normal_incidence_oracle(0.47, 2.9);
    const double e1 = std::abs(glass - 0.04), e2 = std::abs(gold - gold_oracle);
    return {e1 <= 1e-9 && e2 <= 1e-9,
            fmt("R(1.5) = %.12f (err %.1e), R(0.47+2.9i) = %.12f vs %.12f (err %.1e)", glass, e1, gold, gold_oracle, e2)};
}

Outcome energy_conservation() {
    const WavelengthGrid g;
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> n(1.0, 3.0), c(0.0, 1.0);
    const ComplexIOR air(g, 1.0, 0.0);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const ComplexIOR medium(g, n(rng), 0.0);
        const double cos_i = c(rng);
        const std::size_t w = rng() % g.count();
        // Alternate entering and leaving so total internal reflection is covered.
        const ComplexIOR& outside = i % 2 ? medium : air;
        const ComplexIOR& inside = i % 2 ? air : medium;
        const double sum = fresnel_reflectance(outside, inside, cos_i, w) + fresnel_transmittance(outside, inside, cos_i, w);
        worst = std::max(worst, std::abs(sum - 1.0));
    }
    return {worst <= 1e-9, fmt("max |R + T - 1| = %.2e over 1000 cases", worst)};
}

Outcome direct_lighting_oracle() {
    const WavelengthGrid g;
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> u(0.0, 1.0), v(-1.0, 1.0);
    auto random_unit = [&] {
        for (;;) {
            const Vec3 p{v(rng), v(rng), v(rng)};
            if (length(p) > 0.1 && length(p) <= 1.0) return normalize(p);
        }
    };
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        Scene s;
        Spectrum refl(g);
        for (std::size_t i = 0; i < g.count(); ++i) refl[i] = u(rng);
        s.materials.push_back(Material::lambertian("m", refl));
        const int n_lights = 1 + static_cast<int>(rng() % 8);
        for (int l = 0; l < n_lights; ++l) {
            SunLight light;
            light.direction = -random_unit();
            light.emission = Spectrum(g);
            for (std::size_t i = 0; i < g.count(); ++i) light.emission[i] = 5.0 * u(rng);
            s.lights.push_back(light);
        }
        s.finalize();
        const RenderSettings settings;
        const ShadingContext ctx(s, settings);
        Hit hit;
        hit.normal = random_unit();
        hit.shading_normal = hit.normal;
        const Spectrum got = direct_illumination(ctx, hit, hit.normal);
        for (std::size_t i = 0; i < g.count(); ++i) {
            double expect = 0.0;
            for (const SunLight& light : s.lights) {
                const double c = dot(hit.normal, -light.direction);
                if (c > 0.0) expect += refl[i] / std::numbers::pi * light.emission[i] * c;
            }
            const double err = std::abs(got[i] - expect);
            if (err > 0.0) worst = std::max(worst, err / std::max(std::abs(expect), 1e-300));
        }
    }
    return {worst <= 1e-12, fmt("max relative error %.2e over 1000 cases", worst)};
}

Outcome colorimetry() {
    const auto cmf = ts::read_table(ts::kSourceDir / "data" / "cie1931_2deg_5nm.cmf");
    const auto d65 = ts::read_table(ts::kSourceDir / "data" / "d65_5nm.spd");
    const WavelengthGrid g;

    double X = 0, Y = 0, Z = 0;
    for (const auto& row : cmf) {
        X += row[1];
        Y += row[2];
        Z += row[3];
    }
    const XYZ ee = spectrum_to_xyz(Spectrum(g, 1.0));
    const Chromaticity c = chromaticity(ee);
    const double ex = std::abs(c.x - 1.0 / 3.0), ey = std::abs(c.y - 1.0 / 3.0);
    const double oracle_x = X / (X + Y + Z), oracle_y = Y / (X + Y + Z);
    const bool ee_ok = ex < 0.01 && ey < 0.01 && std::abs(c.x - oracle_x) < 1e-12 && std::abs(c.y - oracle_y) < 1e-12;

    // D65 through the library, checked against the tables summed here.
    double wx = 0, wy = 0, wz = 0;
    for (std::size_t i = 0; i < cmf.size(); ++i) {
        wx += 5.0 * d65[i][1] * cmf[i][1];
        wy += 5.0 * d65[i][1] * cmf[i][2];
        wz += 5.0 * d65[i][1] * cmf[i][3];
    }
    const double scale = 3.0;
    const XYZ white = spectrum_to_xyz(d65_illuminant() * scale);
    const bool xyz_ok = std::abs(white.X - scale * wx) <= 1e-9 * scale * wx &&
                        std::abs(white.Y - scale * wy) <= 1e-9 * scale * wy &&
                        std::abs(white.Z - scale * wz) <= 1e-9 * scale * wz;
    const RGB rgb = xyz_to_srgb(white, white.Y);
    const double worst = std::max({std::abs(rgb.r - 1.0), std::abs(rgb.g - 1.0), std::abs(rgb.b - 1.0)});
    return {ee_ok && xyz_ok && worst <= 1.0 / 255.0,
            fmt("E chromaticity (%.5f, %.5f); D65 white sRGB (%.5f, %.5f, %.5f), worst channel error %.2e", c.x, c.y,
                rgb.r, rgb.g, rgb.b, worst)};
}

Outcome sunset_reddening() {
    const WavelengthGrid g;
    const std::size_t blue = g.nearest_index(450.0), red = g.nearest_index(650.0);
    const double elevations[] = {90.0, 30.0, std::asin(1.0 / 5.0) * 180.0 / std::numbers::pi};
    bool ok = true;
    std::string detail;
    for (double tau : {0.05, 0.1, 0.3}) {
        double previous = INFINITY;
        detail += fmt("tau %.2f:", tau);
        for (double elev : elevations) {
            const Spectrum s = solar_spectrum(5778.0, elev, tau, 1.0);
            const double ratio = s[blue] / s[red];
            ok = ok && ratio < previous;
            previous = ratio;
            detail += fmt(" %.4f", ratio);
        }
        detail += "; ";
    }
    detail += fmt("airmass %.3f %.3f %.3f", airmass(elevations[0]), airmass(elevations[1]), airmass(elevations[2]));
    return {ok, detail};
}

Outcome photon_consistency() {
    const double E = 2.0, rho = 0.5;
    const double exact = rho * E / std::numbers::pi;
    double err = 0.0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        err = std::max(err, uniform_plane::relative_error(uniform_plane::stratified(100000, 2.0, E, seed), 100, rho, exact));
    }

    bool flux_ok = true;
    for (const char* name : {"cornell.scn", "nave.scn"}) {
        RenderSettings settings;
        settings.photons_per_light = 20000;
        PhotonAudit audit;
        trace_photons(ts::sample_scene(name), settings, &audit);
        for (const Spectrum& stored : audit.stored_by_depth) {
            for (std::size_t i = 0; i < stored.size(); ++i) flux_ok = flux_ok && stored[i] <= audit.emitted[i];
        }
        for (std::size_t i = 0; i < audit.caustic_stored.size(); ++i) {
            flux_ok = flux_ok && audit.caustic_stored[i] <= audit.emitted[i];
        }
    }
    return {err < 0.05 && flux_ok,
            fmt("uniform plane worst relative error %.4f over 10 seeds (1e5 photons, k = 100); stored <= emitted per bounce: %s", err,
                flux_ok ? "yes" : "no")};
}

Outcome ddm_equivalence() {
    int configs = 0, bad_pixels = 0, ledger_errors = 0, deadlocks = 0;
    double worst = 0.0;
    std::uint64_t migrations = 0;
    for (const char* name : {"cornell.scn", "nave.scn"}) {
        const Scene scene = ts::sample_scene(name);
        RenderSettings settings;
        settings.width = 64;
        settings.height = 64;
        settings.samples_per_pixel = 4;
        settings.photons_per_light = 20000;
        const ImageAccumulator reference = render_image(scene, settings);
        for (int subs : {1, 2, 4, 8}) {
            for (int workers : {1, 2, 4, 8}) {
                for (int resident : {1, 2, 4}) {
                    ddm::DdmSettings d;
                    d.n_subdomains = subs;
                    d.n_workers = workers;
                    // More slots than sub-domains changes nothing.
                    d.max_resident = std::min(resident, subs);
                    settings.threads = workers;
                    ++configs;
                    try {
                        const ddm::DdmResult r = ddm::run_ddm(scene, settings, d);
                        const auto& m = r.metrics;
                        if (m.seeded + m.spawned != m.retired || m.in_flight_at_end != 0) ++ledger_errors;
                        migrations += m.migrations;
                        for (std::size_t p = 0; p < reference.pixel_count(); ++p) {
                            const XYZ a = reference.mean(p), b = r.image.mean(p);
                            for (auto [x, y] : {std::pair{a.X, b.X}, {a.Y, b.Y}, {a.Z, b.Z}}) {
                                const double diff = std::abs(x - y);
                                if (diff <= 1e-12) continue;
                                const double rel = diff / std::max(std::abs(x), 1e-300);
                                worst = std::max(worst, rel);
                                if (rel > 1e-6) ++bad_pixels;
                            }
                        }
                    } catch (const DeadlockError&) {
                        ++deadlocks;
                    }
                }
            }
        }
    }
    return {bad_pixels == 0 && ledger_errors == 0 && deadlocks == 0,
            fmt("%d configurations, worst relative difference %.2e, %d values above 1e-6, ledger errors %d, "
                "deadlocks %d, migrations %llu",
                configs, worst, bad_pixels, ledger_errors, deadlocks, static_cast<unsigned long long>(migrations))};
}

Outcome scaling_trend() {
    ts::TempDir dir;
    const auto csv = dir / "bench.csv";
    std::ostringstream out, err;
    const int code = cli::run({"bench", "--scene", (ts::kSourceDir / "scenes" / "nave.scn").string(), "--width", "64",
                               "--height", "64", "--spp", "4", "--load-cost-ms", "200", "--max-resident", "2",
                               "--workers-list", "8", "--subdomains-list", "1,8", "--reps", "5", "--csv", csv.string()},
                              out, err);
    if (code != cli::kOk) return {false, "bench exited with " + std::to_string(code) + ": " + err.str()};

    std::map<int, std::vector<double>> walls;
    std::istringstream rows(ts::read_file(csv));
    std::string line;
    std::getline(rows, line);
    while (std::getline(rows, line)) {
        std::istringstream f(line);
        std::string subs, workers, rep, wall;
        std::getline(f, subs, ',');
        std::getline(f, workers, ',');
        std::getline(f, rep, ',');
        std::getline(f, wall, ',');
        walls[std::stoi(subs)].push_back(std::stod(wall));
    }
    const double one = cli::median(walls[1]), eight = cli::median(walls[8]);
    return {walls[1].size() == 5 && walls[8].size() == 5 && eight < one,
            fmt("median wall at 8 workers: 1 sub-domain %.3f s, 8 sub-domains %.3f s (%u hardware threads)", one, eight,
                std::thread::hardware_concurrency())};
}

Outcome determinism() {
    ts::TempDir dir;
    auto render = [&](const std::string& file, const char* workers) {
        std::ostringstream out, err;
        const int code = cli::run({"render", "--scene", (ts::kSourceDir / "scenes" / "cornell.scn").string(), "--width",
                                   "64", "--height", "64", "--spp", "4", "--workers", workers, "--out",
                                   (dir / file).string()},
                                  out, err);
        if (code != cli::kOk) throw std::runtime_error("render failed: " + err.str());
        return ts::read_file(dir / file);
    };
    const std::string a1 = render("a1.ppm", "1"), b1 = render("b1.ppm", "1");
    const std::string a8 = render("a8.ppm", "8"), b8 = render("b8.ppm", "8");
    const bool ok = !a1.empty() && a1 == b1 && a8 == b8;
    return {ok, fmt("1 worker: %s, 8 workers: %s (1 vs 8 workers %s)", a1 == b1 ? "identical" : "differ",
                    a8 == b8 ? "identical" : "differ", a1 == a8 ? "identical" : "differ")};
}

Outcome wire_codec() {
    const WavelengthGrid g;
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(-1e3, 1e3), f(0.0, 1e3);
    int mismatches = 0;
    for (int i = 0; i < 1000; ++i) {
        ddm::RayMessage m;
        m.entry_point = {u(rng), u(rng), u(rng)};
        m.partial_t = f(rng);
        m.ray.origin = m.entry_point;
        m.ray.direction = normalize(Vec3{u(rng), u(rng), u(rng)});
        m.ray.depth = static_cast<int>(rng() % 64);
        m.ray.pixel_id = rng();
        m.ray.kind = static_cast<RayKind>(rng() % 4);
        m.ray.throughput = Spectrum(g);
        for (std::size_t k = 0; k < g.count(); ++k) m.ray.throughput[k] = static_cast<float>(f(rng));
        const auto bytes = ddm::encode(m);
        const ddm::RayMessage back = ddm::decode(bytes, g);
        if (bytes.size() != ddm::kWireSize || ddm::encode(back) != bytes || back.entry_point != m.entry_point ||
            back.partial_t != m.partial_t || back.ray.direction != m.ray.direction || back.ray.depth != m.ray.depth ||
            back.ray.pixel_id != m.ray.pixel_id || back.ray.kind != m.ray.kind || back.ray.throughput != m.ray.throughput) {
            ++mismatches;
        }
    }
    return {mismatches == 0, fmt("%d of 1000 messages failed to round-trip (%zu bytes each)", mismatches, ddm::kWireSize)};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"Fresnel normal incidence", fresnel_analytics},
        {"Fresnel energy conservation", energy_conservation},
        {"direct lighting oracle", direct_lighting_oracle},
        {"colorimetry", colorimetry},
        {"sunset reddening", sunset_reddening},
        {"photon map consistency", photon_consistency},
        {"domain decomposition equivalence", ddm_equivalence},
        {"scaling trend", scaling_trend},
        {"render determinism", determinism},
        {"wire codec", wire_codec},
    };
    std::set<int> selected;
    for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int number = static_cast<int>(i) + 1;
        if (!selected.empty() && !selected.count(number)) continue;
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (!o.pass) ++failures;
        std::cout << "criterion " << number << " (" << criteria[i].first << "): " << (o.pass ? "PASS" : "FAIL") << "  "
                  << o.detail << fmt("  [%.2f s]", secs) << std::endl;
    }
    std::cout << failures << " failed" << std::endl;
    return failures == 0 ? 0 : 1;
}
