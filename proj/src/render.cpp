#include "spectralium/render.hpp"

#include "spectralium/colorimetry.hpp"
#include "spectralium/error.hpp"
#include "spectralium/rng.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <mutex>
#include <numbers>
#include <thread>

namespace spectralium {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr std::uint64_t kPhotonStream = 0x70686f746f6e0000ULL;

std::uint64_t photon_stream(std::uint64_t key) { return hash_combine(kPhotonStream, key); }

// Counter slots: emission uses 0 and 1; bounce d uses 16 + 8d onwards.
std::uint64_t bounce_counter(int depth, int slot) {
    return 16 + static_cast<std::uint64_t>(depth) * 8 + static_cast<std::uint64_t>(slot);
}

Vec3 cosine_direction(Vec3 normal, double u1, double u2) {
    Vec3 t, b;
    make_frame(normal, t, b);
    const double r = std::sqrt(u1);
    const double phi = 2.0 * kPi * u2;
    return normalize(t * (r * std::cos(phi)) + b * (r * std::sin(phi)) + normal * std::sqrt(std::max(0.0, 1.0 - u1)));
}

double incidence_cosine(const Ray& ray, const Hit& hit) {
    return std::clamp(-dot(ray.direction, hit.normal), 1e-12, 1.0);
}

Spectrum fresnel_spectrum(const Material& m, double cos_i) {
    Spectrum r(m.ior.grid());
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = fresnel_reflectance(1.0, m.ior.n(i), m.ior.k(i), cos_i);
    return r;
}

Spectrum sheet_transmission(const Material& m, const Spectrum& reflectance, const Hit& hit) {
    Spectrum t = m.bulk ? sample_transmittance_map(*m.bulk, hit.uv.u, hit.uv.v) : Spectrum(reflectance.grid(), 1.0);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] *= 1.0 - reflectance[i];
    return t;
}

Ray child(const ShadingContext& ctx, const Ray& parent, const Hit& hit, Vec3 direction, Spectrum throughput,
          RayKind kind) {
    Ray r;
    r.origin = hit.point;
    r.direction = direction;
    r.throughput = std::move(throughput);
    r.depth = parent.depth + 1;
    r.pixel_id = parent.pixel_id;
    r.kind = kind;
    r.t_min = ctx.epsilon;
    r.diffuse_history = parent.diffuse_history;
    return r;
}

void shade_camera_hit(const ShadingContext& ctx, const Ray& ray, const Hit& hit, PathSink& sink) {
    const Material& m = ctx.scene.materials[static_cast<std::size_t>(hit.material_id)];
    const bool may_recurse = ray.depth + 1 <= ctx.settings.max_depth;
    switch (m.kind) {
        case MaterialKind::lambertian: {
            for (std::size_t l = 0; l < ctx.scene.lights.size(); ++l) {
                Spectrum term = direct_term(ctx, hit, l);
                if (term.is_zero()) continue;
                term *= ray.throughput;
                Ray shadow;
                shadow.origin = hit.point;
                shadow.direction = -ctx.scene.lights[l].direction;
                shadow.throughput = std::move(term);
                shadow.depth = ray.depth;
                shadow.pixel_id = ray.pixel_id;
                shadow.kind = RayKind::shadow;
                shadow.t_min = ctx.epsilon;
                sink.spawn(std::move(shadow));
            }
            if (ctx.maps) {
                const Vec3 outgoing = -ray.direction;
                const auto k = static_cast<std::size_t>(ctx.settings.gather_k);
                Spectrum indirect =
                    estimate_radiance(ctx.maps->caustic, hit, outgoing, k, ctx.gather_radius, m.reflectance);
                indirect += estimate_radiance(ctx.maps->global, hit, outgoing, k, ctx.gather_radius, m.reflectance);
                if (!indirect.is_zero()) sink.deposit(ray.pixel_id, indirect * ray.throughput);
            }
            return;
        }
        case MaterialKind::fresnel_dielectric: {
            if (!may_recurse) return;
            const Spectrum r = fresnel_spectrum(m, incidence_cosine(ray, hit));
            Spectrum reflected = ray.throughput * r;
            Spectrum transmitted = ray.throughput * sheet_transmission(m, r, hit);
            if (!reflected.is_zero()) {
                sink.spawn(child(ctx, ray, hit, reflect(ray.direction, hit.normal), std::move(reflected),
                                 RayKind::specular));
            }
            if (!transmitted.is_zero()) {
                sink.spawn(child(ctx, ray, hit, ray.direction, std::move(transmitted), RayKind::specular));
            }
            return;
        }
        case MaterialKind::fresnel_conductor: {
            if (!may_recurse) return;
            Spectrum reflected = ray.throughput * fresnel_spectrum(m, incidence_cosine(ray, hit));
            if (!reflected.is_zero()) {
                sink.spawn(child(ctx, ray, hit, reflect(ray.direction, hit.normal), std::move(reflected),
                                 RayKind::specular));
            }
            return;
        }
    }
}

void scatter_photon(const ShadingContext& ctx, const Ray& ray, const Hit& hit, PathSink& sink) {
    const Material& m = ctx.scene.materials[static_cast<std::size_t>(hit.material_id)];
    const std::uint64_t stream = photon_stream(ray.pixel_id);
    const std::uint64_t seed = ctx.settings.seed;
    const bool may_continue = ray.depth + 1 <= ctx.settings.max_depth;

    switch (m.kind) {
        case MaterialKind::lambertian: {
            if (ray.depth >= 1) {
                sink.store({ray.pixel_id, ray.depth, !ray.diffuse_history,
                            Photon{hit.point, ray.direction, ray.throughput}});
            }
            if (!may_continue) return;
            Spectrum flux = ray.throughput * m.reflectance;
            if (ray.depth >= ctx.settings.roulette_depth) {
                const double p = std::min(1.0, m.reflectance.average());
                if (!(uniform01(seed, stream, bounce_counter(ray.depth, 0)) < p)) return;
                flux *= 1.0 / p;
            }
            if (flux.is_zero()) return;
            const Vec3 dir = cosine_direction(hit.normal, uniform01(seed, stream, bounce_counter(ray.depth, 1)),
                                              uniform01(seed, stream, bounce_counter(ray.depth, 2)));
            Ray next = child(ctx, ray, hit, dir, std::move(flux), RayKind::photon);
            next.diffuse_history = true;
            sink.spawn(std::move(next));
            return;
        }
        case MaterialKind::fresnel_dielectric: {
            if (!may_continue) return;
            const Spectrum r = fresnel_spectrum(m, incidence_cosine(ray, hit));
            const double p_reflect = r.average();
            const double u = uniform01(seed, stream, bounce_counter(ray.depth, 0));
            if (u < p_reflect) {
                sink.spawn(child(ctx, ray, hit, reflect(ray.direction, hit.normal),
                                 ray.throughput * r * (1.0 / p_reflect), RayKind::photon));
            } else {
                Spectrum flux = ray.throughput * sheet_transmission(m, r, hit) * (1.0 / (1.0 - p_reflect));
                if (!flux.is_zero()) sink.spawn(child(ctx, ray, hit, ray.direction, std::move(flux), RayKind::photon));
            }
            return;
        }
        case MaterialKind::fresnel_conductor: {
            if (!may_continue) return;
            const Spectrum r = fresnel_spectrum(m, incidence_cosine(ray, hit));
            const double p = r.average();
            if (!(uniform01(seed, stream, bounce_counter(ray.depth, 0)) < p)) return;
            sink.spawn(
                child(ctx, ray, hit, reflect(ray.direction, hit.normal), ray.throughput * r * (1.0 / p), RayKind::photon));
            return;
        }
    }
}

// Runs a ray and everything it spawns to completion against ctx.index.
class SerialTracer final : public PathSink {
  public:
    SerialTracer(const ShadingContext& ctx, PathSink& out) : ctx_(ctx), out_(out) {}

    void run(Ray ray) {
        stack_.push_back(std::move(ray));
        while (!stack_.empty()) {
            Ray r = std::move(stack_.back());
            stack_.pop_back();
            ++rays_;
            if (r.kind == RayKind::shadow) {
                if (!ctx_.index->occluded(r.origin, r.direction, r.t_min, kInfinity)) process_escape(ctx_, r, *this);
                continue;
            }
            if (auto hit = ctx_.index->intersect(r.origin, r.direction, r.t_min, kInfinity)) {
                process_hit(ctx_, r, *hit, *this);
            } else {
                process_escape(ctx_, r, *this);
            }
        }
    }

    void deposit(std::uint64_t pixel_id, const Spectrum& radiance) override { out_.deposit(pixel_id, radiance); }
    void spawn(Ray ray) override { stack_.push_back(std::move(ray)); }
    void store(const StoredPhoton& photon) override { out_.store(photon); }

    std::uint64_t rays() const { return rays_; }

  private:
    static constexpr double kInfinity = std::numeric_limits<double>::infinity();

    const ShadingContext& ctx_;
    PathSink& out_;
    std::vector<Ray> stack_;
    std::uint64_t rays_ = 0;
};

template <class Fn>
void parallel_for(int threads, Fn&& fn) {
    if (threads <= 1) {
        fn(0);
        return;
    }
    std::vector<std::jthread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) pool.emplace_back([&fn, t] { fn(t); });
}

PhotonMaps trace_photons_with(const ShadingContext& ctx, PhotonAudit* audit) {
    const Scene& scene = ctx.scene;
    const auto n = static_cast<std::uint64_t>(std::max(0, ctx.settings.photons_per_light));
    const std::uint64_t total = n * scene.lights.size();
    if (audit) {
        audit->emitted = Spectrum(scene.grid);
        for (std::size_t l = 0; l < scene.lights.size() && n > 0; ++l) {
            audit->emitted += photon_flux(ctx, l) * static_cast<double>(n);
        }
    }
    if (total == 0 || scene.triangles().empty()) return build_photon_maps({}, total, audit, scene.grid);

    std::mutex merge_mutex;
    std::vector<StoredPhoton> stored;
    std::atomic<std::uint64_t> next{0};
    constexpr std::uint64_t kChunk = 256;

    parallel_for(ctx.settings.threads, [&](int) {
        struct Collector final : PathSink {
            std::vector<StoredPhoton> photons;
            void deposit(std::uint64_t, const Spectrum&) override {}
            void spawn(Ray) override {}
            void store(const StoredPhoton& p) override { photons.push_back(p); }
        } collector;
        SerialTracer tracer(ctx, collector);
        for (;;) {
            const std::uint64_t begin = next.fetch_add(kChunk);
            if (begin >= total) break;
            const std::uint64_t end = std::min(total, begin + kChunk);
            for (std::uint64_t i = begin; i < end; ++i) tracer.run(emit_photon(ctx, i / n, i % n));
        }
        std::lock_guard lock(merge_mutex);
        stored.insert(stored.end(), collector.photons.begin(), collector.photons.end());
    });
    return build_photon_maps(std::move(stored), total, audit, scene.grid);
}

}  // namespace

const char* to_string(RayKind kind) {
    switch (kind) {
        case RayKind::camera: return "camera";
        case RayKind::specular: return "specular";
        case RayKind::shadow: return "shadow";
        case RayKind::photon: return "photon";
    }
    return "?";
}

void RenderSettings::validate() const {
    if (width < 1 || height < 1) throw DomainError("render: image size must be positive");
    if (samples_per_pixel < 1) throw DomainError("render: samples per pixel must be >= 1");
    if (photons_per_light < 0) throw DomainError("render: photon count must be >= 0");
    if (max_depth < 0) throw DomainError("render: max depth must be >= 0");
    if (threads < 1) throw DomainError("render: thread count must be >= 1");
    if (gather_k < 1) throw DomainError("render: gather k must be >= 1");
    if (gather_radius < 0.0) throw DomainError("render: gather radius must be >= 0");
}

ShadingContext::ShadingContext(const Scene& scene_, const RenderSettings& settings_, const PhotonMaps* maps_,
                               const SpatialIndex* index_)
    : scene(scene_), settings(settings_), maps(maps_), index(index_) {
    const double diag = scene.bounds().diagonal();
    epsilon = 1e-6 * std::max(1.0, diag);
    gather_radius = settings.gather_radius > 0.0 ? settings.gather_radius : (diag > 0.0 ? diag / 20.0 : 1.0);
}

Ray camera_ray(const ShadingContext& ctx, int x, int y, int sample) {
    Camera cam = ctx.scene.camera;
    cam.width = ctx.settings.width;
    cam.height = ctx.settings.height;
    const int n = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(ctx.settings.samples_per_pixel))));
    const int sx = sample % n;
    const int sy = (sample / n) % n;
    const std::uint64_t pixel = static_cast<std::uint64_t>(y) * static_cast<std::uint64_t>(cam.width) +
                                static_cast<std::uint64_t>(x);
    const std::uint64_t stream = hash_combine(pixel, static_cast<std::uint64_t>(sample));
    const Vec2 jitter{(sx + uniform01(ctx.settings.seed, stream, 0)) / n,
                      (sy + uniform01(ctx.settings.seed, stream, 1)) / n};
    const CameraRay cr = generate_ray(cam, x, y, jitter);

    Ray r;
    r.origin = cr.origin;
    r.direction = cr.direction;
    r.throughput = Spectrum(ctx.scene.grid, 1.0);
    r.pixel_id = pixel;
    r.kind = RayKind::camera;
    return r;
}

Spectrum photon_flux(const ShadingContext& ctx, std::size_t light) {
    const double radius = std::max(0.5 * ctx.scene.bounds().diagonal(), ctx.epsilon);
    const auto n = static_cast<double>(std::max(1, ctx.settings.photons_per_light));
    return ctx.scene.lights[light].emission * (kPi * radius * radius / n);
}

Ray emit_photon(const ShadingContext& ctx, std::size_t light, std::uint64_t index) {
    const Box3 box = ctx.scene.bounds();
    const double radius = std::max(0.5 * box.diagonal(), ctx.epsilon);
    const Vec3 d = ctx.scene.lights[light].direction;
    Vec3 t, b;
    make_frame(d, t, b);

    Ray r;
    r.pixel_id = (static_cast<std::uint64_t>(light) << 32) | index;
    const std::uint64_t stream = photon_stream(r.pixel_id);
    const double rr = radius * std::sqrt(uniform01(ctx.settings.seed, stream, 0));
    const double phi = 2.0 * kPi * uniform01(ctx.settings.seed, stream, 1);
    r.origin = box.center() - d * (1.01 * radius + ctx.epsilon) + t * (rr * std::cos(phi)) + b * (rr * std::sin(phi));
    r.direction = d;
    r.throughput = photon_flux(ctx, light);
    r.kind = RayKind::photon;
    return r;
}

Spectrum direct_term(const ShadingContext& ctx, const Hit& hit, std::size_t light) {
    const Material& m = ctx.scene.materials[static_cast<std::size_t>(hit.material_id)];
    const SunLight& sun = ctx.scene.lights[light];
    if (m.kind != MaterialKind::lambertian) return Spectrum(sun.emission.grid());
    const Vec3 ws = -sun.direction;
    const double cos_s = dot(hit.shading_normal, ws);
    if (dot(hit.normal, ws) <= 0.0 || cos_s <= 0.0) return Spectrum(sun.emission.grid());
    return m.reflectance * sun.emission * (cos_s / kPi);
}

void process_hit(const ShadingContext& ctx, const Ray& ray, const Hit& hit, PathSink& sink) {
    switch (ray.kind) {
        case RayKind::shadow: return;
        case RayKind::photon: scatter_photon(ctx, ray, hit, sink); return;
        case RayKind::camera:
        case RayKind::specular: shade_camera_hit(ctx, ray, hit, sink); return;
    }
}

void process_escape(const ShadingContext&, const Ray& ray, PathSink& sink) {
    if (ray.kind == RayKind::shadow) sink.deposit(ray.pixel_id, ray.throughput);
}

Spectrum estimate_radiance(const PhotonMap& map, const Hit& hit, Vec3, std::size_t k, double r_max,
                           const Spectrum& reflectance) {
    Spectrum out(reflectance.grid());
    if (map.empty() || k == 0) return out;
    const Vec3 n = hit.normal;
    const auto found =
        map.nearest_if(hit.point, k, r_max, [n](const Photon& p) { return dot(p.incident_direction, n) < 0.0; });
    if (found.empty()) return out;
    const double r2 = (found.size() == k || !std::isfinite(r_max)) ? found.back().distance_squared : r_max * r_max;
    if (!(r2 > 0.0)) return out;
    for (const auto& nb : found) out += map.photon(nb.index).flux;
    out *= reflectance;
    out *= 1.0 / (kPi * kPi * r2);
    return out;
}

Spectrum direct_illumination(const ShadingContext& ctx, const Hit& hit, Vec3) {
    Spectrum total(ctx.scene.grid);
    for (std::size_t l = 0; l < ctx.scene.lights.size(); ++l) {
        const Spectrum term = direct_term(ctx, hit, l);
        if (term.is_zero()) continue;
        if (ctx.index &&
            ctx.index->occluded(hit.point, -ctx.scene.lights[l].direction, ctx.epsilon,
                                std::numeric_limits<double>::infinity())) {
            continue;
        }
        total += term;
    }
    return total;
}

Spectrum shade(const ShadingContext& ctx, const Ray& ray) {
    struct Sum final : PathSink {
        Spectrum total;
        void deposit(std::uint64_t, const Spectrum& s) override { total += s; }
        void spawn(Ray) override {}
        void store(const StoredPhoton&) override {}
    } sum;
    sum.total = Spectrum(ctx.scene.grid);
    SerialTracer(ctx, sum).run(ray);
    return sum.total;
}

PhotonMaps build_photon_maps(std::vector<StoredPhoton> stored, std::size_t emitted_count, PhotonAudit* audit,
                             const WavelengthGrid& grid) {
    std::sort(stored.begin(), stored.end(), [](const StoredPhoton& a, const StoredPhoton& b) {
        return a.key != b.key ? a.key < b.key : a.depth < b.depth;
    });
    std::vector<Photon> global, caustic;
    if (audit) {
        audit->stored_by_depth.clear();
        audit->caustic_stored = Spectrum(grid);
    }
    for (auto& s : stored) {
        if (audit) {
            const auto d = static_cast<std::size_t>(s.depth);
            if (audit->stored_by_depth.size() <= d) audit->stored_by_depth.resize(d + 1, Spectrum(grid));
            audit->stored_by_depth[d] += s.photon.flux;
            if (s.caustic) audit->caustic_stored += s.photon.flux;
        }
        (s.caustic ? caustic : global).push_back(std::move(s.photon));
    }
    return {PhotonMap(std::move(global), emitted_count), PhotonMap(std::move(caustic), emitted_count)};
}

PhotonMaps trace_photons(const Scene& scene, const RenderSettings& settings, PhotonAudit* audit) {
    settings.validate();
    const SpatialIndex index(scene.triangles());
    const ShadingContext ctx(scene, settings, nullptr, &index);
    return trace_photons_with(ctx, audit);
}

ImageAccumulator render_image(const Scene& scene, const RenderSettings& settings, RenderStats* stats) {
    settings.validate();
    const auto start = std::chrono::steady_clock::now();
    const SpatialIndex index(scene.triangles());

    PhotonMaps maps;
    bool have_maps = false;
    if (settings.photons_per_light > 0 && !scene.lights.empty()) {
        maps = trace_photons_with(ShadingContext(scene, settings, nullptr, &index), nullptr);
        have_maps = true;
    }
    const ShadingContext ctx(scene, settings, have_maps ? &maps : nullptr, &index);

    ImageAccumulator image(settings.width, settings.height);
    std::atomic<int> next_row{0};
    std::atomic<std::uint64_t> camera_rays{0};

    parallel_for(settings.threads, [&](int) {
        struct ToImage final : PathSink {
            ImageAccumulator* image;
            void deposit(std::uint64_t pixel, const Spectrum& s) override { image->add(pixel, spectrum_to_xyz(s)); }
            void spawn(Ray) override {}
            void store(const StoredPhoton&) override {}
        } out;
        out.image = &image;
        SerialTracer tracer(ctx, out);
        std::uint64_t local_rays = 0;
        // Scanlines are handed out top to bottom.
        for (int y; (y = next_row.fetch_add(1)) < settings.height;) {
            for (int x = 0; x < settings.width; ++x) {
                for (int s = 0; s < settings.samples_per_pixel; ++s) {
                    tracer.run(camera_ray(ctx, x, y, s));
                    ++local_rays;
                }
                image.add_samples(static_cast<std::size_t>(y) * static_cast<std::size_t>(settings.width) +
                                      static_cast<std::size_t>(x),
                                  static_cast<std::uint64_t>(settings.samples_per_pixel));
            }
        }
        camera_rays += local_rays;
    });

    if (stats) {
        stats->camera_rays = camera_rays.load();
        stats->photons_stored = maps.global.size() + maps.caustic.size();
        stats->seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
    return image;
}

double display_white_luminance(const Scene& scene) {
    Spectrum total(scene.grid);
    for (const SunLight& sun : scene.lights) total += sun.emission;
    const double y = spectrum_to_xyz(total * (1.0 / kPi)).Y;
    return y > 0.0 ? y : 1.0;
}

}  // namespace spectralium
