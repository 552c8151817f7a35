#pragma once

#include "spectralium/geometry.hpp"
#include "spectralium/image.hpp"
#include "spectralium/photon_map.hpp"
#include "spectralium/scene.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace spectralium {

enum class RayKind : std::uint8_t { camera = 0, specular = 1, shadow = 2, photon = 3 };

const char* to_string(RayKind kind);

struct Ray {
    Vec3 origin;
    Vec3 direction;
    Spectrum throughput;  // importance, or the pending payload of a shadow ray, or photon flux
    int depth = 0;
    std::uint64_t pixel_id = 0;  // photons: light << 32 | photon index
    RayKind kind = RayKind::camera;
    double t_min = 0.0;
    bool diffuse_history = false;  // photons only: a diffuse bounce happened since emission
};

struct RenderSettings {
    int width = 64;
    int height = 64;
    int samples_per_pixel = 1;
    int photons_per_light = 0;
    int max_depth = 8;
    int roulette_depth = 3;
    std::uint64_t seed = 1;
    int threads = 1;
    int gather_k = 100;
    double gather_radius = 0.0;  // 0: scene diagonal / 20

    // Throws DomainError for non-positive counts.
    void validate() const;
};

struct PhotonMaps {
    PhotonMap global;
    PhotonMap caustic;
};

// Photon recorded by the tracing kernel before the maps are built.
struct StoredPhoton {
    std::uint64_t key = 0;
    int depth = 0;
    bool caustic = false;
    Photon photon;
};

// Stored flux per bounce depth, for energy audits.
struct PhotonAudit {
    Spectrum emitted;
    std::vector<Spectrum> stored_by_depth;
    Spectrum caustic_stored;
};

// Receives everything a path step produces. The single-domain renderer and
// the domain-decomposed scheduler implement this differently but run the
// same shading code, which is what keeps their images equal.
class PathSink {
  public:
    virtual ~PathSink() = default;
    virtual void deposit(std::uint64_t pixel_id, const Spectrum& radiance) = 0;
    virtual void spawn(Ray ray) = 0;
    virtual void store(const StoredPhoton& photon) = 0;
};

struct ShadingContext {
    ShadingContext(const Scene& scene, const RenderSettings& settings, const PhotonMaps* maps = nullptr,
                   const SpatialIndex* index = nullptr);

    const Scene& scene;
    RenderSettings settings;
    const PhotonMaps* maps;
    const SpatialIndex* index;  // only needed by the recursive helpers below
    double epsilon;
    double gather_radius;
};

// Stratified, jittered primary ray for one sample of pixel (x, y).
Ray camera_ray(const ShadingContext& ctx, int x, int y, int sample);

// Photon `index` of light `light`, launched from a disk covering the scene.
Ray emit_photon(const ShadingContext& ctx, std::size_t light, std::uint64_t index);

// Flux carried by each photon of a light.
Spectrum photon_flux(const ShadingContext& ctx, std::size_t light);

// Unoccluded contribution of one light at a lambertian hit:
// (rho/pi) * L_s * max(0, n.w_s).
Spectrum direct_term(const ShadingContext& ctx, const Hit& hit, std::size_t light);

// One path step at a surface hit: deposits local radiance and spawns
// continuation and shadow rays (camera paths), or stores and scatters
// photons (photon paths). Shadow rays that hit anything are dropped.
void process_hit(const ShadingContext& ctx, const Ray& ray, const Hit& hit, PathSink& sink);

// A ray left the scene. Shadow rays deposit their payload; others carry nothing.
void process_escape(const ShadingContext& ctx, const Ray& ray, PathSink& sink);

// Radiance estimate from the k nearest photons within r_max that arrived on
// the side of the surface facing the viewer.
Spectrum estimate_radiance(const PhotonMap& map, const Hit& hit, Vec3 outgoing, std::size_t k, double r_max,
                           const Spectrum& reflectance);

// Direct lighting at a lambertian hit with shadow-ray visibility (needs ctx.index).
Spectrum direct_illumination(const ShadingContext& ctx, const Hit& hit, Vec3 outgoing);

// Full radiance along a camera or specular ray (needs ctx.index).
Spectrum shade(const ShadingContext& ctx, const Ray& ray);

// Sorts kernel output into a canonical order and builds both maps.
PhotonMaps build_photon_maps(std::vector<StoredPhoton> stored, std::size_t emitted_count,
                             PhotonAudit* audit = nullptr, const WavelengthGrid& grid = {});

PhotonMaps trace_photons(const Scene& scene, const RenderSettings& settings, PhotonAudit* audit = nullptr);

struct RenderStats {
    std::uint64_t camera_rays = 0;
    std::uint64_t photons_stored = 0;
    double seconds = 0.0;
};

ImageAccumulator render_image(const Scene& scene, const RenderSettings& settings, RenderStats* stats = nullptr);

// Luminance that maps to display white: the Y of a perfect white diffuser
// lit head-on by every light.
double display_white_luminance(const Scene& scene);

}  // namespace spectralium
