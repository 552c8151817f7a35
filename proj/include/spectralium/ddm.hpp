#pragma once

#include "spectralium/geometry.hpp"
#include "spectralium/image.hpp"
#include "spectralium/render.hpp"
#include "spectralium/scene.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace spectralium::ddm {

struct Interface {
    std::uint32_t neighbor = 0;
    int axis = 0;
    int side = 0;  // -1: low face of the box, +1: high face
    Box3 face;

    friend bool operator==(const Interface&, const Interface&) = default;
};

struct SubDomain {
    std::uint32_t id = 0;
    Box3 box;
    std::array<int, 3> cell{0, 0, 0};
    std::vector<Interface> interfaces;
    std::vector<std::uint32_t> triangle_ids;  // ids into Scene::triangles()
};

/// Regular grid of sub-domains obtained by halving the (slightly padded)
/// scene bounds along the longest axis, level after level. Cell (i,j,k)
/// has id i + nx*(j + ny*k).
class Partition {
  public:
    Partition(const Scene& scene, int n_subdomains);

    const Box3& bounds() const { return bounds_; }
    const std::array<int, 3>& dims() const { return dims_; }
    std::size_t size() const { return subdomains_.size(); }
    const SubDomain& operator[](std::size_t id) const { return subdomains_[id]; }
    std::span<const SubDomain> subdomains() const { return subdomains_; }

    // Splitting planes per axis; plane 0 and plane dims[a] are the bounds.
    const std::vector<double>& planes(int axis) const { return planes_[static_cast<std::size_t>(axis)]; }

    std::uint32_t cell_id(int ix, int iy, int iz) const;
    // Sub-domain whose box contains p (clamped to the grid).
    std::uint32_t locate(Vec3 p) const;

  private:
    Box3 bounds_;
    std::array<int, 3> dims_{1, 1, 1};
    std::array<std::vector<double>, 3> planes_;
    std::vector<SubDomain> subdomains_;
};

struct RayMessage {
    Vec3 entry_point;
    double partial_t = 0.0;  // ray parameter at entry_point
    Ray ray;                 // origin stays where the segment started
};

// Byte layout, little-endian: entry (3 f64), direction (3 f64), depth (u32),
// pixel_id (u64), kind (u8), partial_t (f64), throughput (81 f32).
inline constexpr std::size_t kWireSamples = 81;
inline constexpr std::size_t kWireSize = 3 * 8 + 3 * 8 + 4 + 8 + 1 + 8 + kWireSamples * 4;

std::vector<std::uint8_t> encode(const RayMessage& msg);
// Throws ProtocolError on a short buffer or an unknown ray kind.
RayMessage decode(std::span<const std::uint8_t> bytes, const WavelengthGrid& grid = {});

enum class AdvanceKind { hit, exit, escape };

struct AdvanceResult {
    AdvanceKind kind = AdvanceKind::escape;
    Hit hit;                    // kind == hit (shadow rays: unused)
    std::uint32_t neighbor = 0;  // kind == exit
    RayMessage next;            // kind == exit
};

// Entry of a ray into the partition, or nothing when it misses the bounds.
std::optional<RayMessage> enter(const Partition& partition, const Ray& ray);

// Moves a message through one sub-domain. Shadow rays report any hit,
// other rays the nearest one. Throws ProtocolError when the entry point
// lies outside the box by more than 1e-6.
AdvanceResult advance_ray(const RayMessage& msg, const SubDomain& sub, const SpatialIndex& index,
                          const Partition& partition);

// Partition files: `subdomain_<id>.part`.
std::filesystem::path partition_file(const std::filesystem::path& dir, std::uint32_t id);
void write_partition_files(const Partition& partition, const Scene& scene, const std::filesystem::path& dir);

struct LoadedSubDomain {
    std::uint32_t id = 0;
    Box3 box;
    std::vector<std::uint32_t> neighbors;
    std::vector<Triangle> triangles;
};

// Throws IoError for a missing file and ParseError for a malformed one.
LoadedSubDomain read_partition_file(const std::filesystem::path& path, const Scene& scene);

struct DdmSettings {
    int n_subdomains = 1;
    int n_workers = 1;
    int max_resident = 1;
    double load_cost_ms = 0.0;  // full-scene cost; each sub-domain pays its triangle share
    double theta_fraction = 0.01;
    std::size_t theta_min = 16;
    std::size_t batch = 64;
    double deadlock_timeout_s = 60.0;
    std::filesystem::path work_dir;  // empty: a private temporary directory
    bool disable_loads_for_testing = false;  // starves the scheduler to exercise the deadlock detector

    void validate() const;
};

struct WorkerMetrics {
    double busy = 0.0;
    double idle = 0.0;
    double load = 0.0;  // waiting while a sub-domain load was in progress
};

struct ScheduleMetrics {
    double wall_time = 0.0;
    std::vector<WorkerMetrics> workers;
    std::uint64_t migrations = 0;
    std::size_t max_resident_observed = 0;
    std::uint64_t load_events = 0;
    std::uint64_t unload_events = 0;
    double loader_seconds = 0.0;
    std::vector<std::uint32_t> loads_per_subdomain;
    // Ray ledger: every seeded or spawned ray is retired exactly once.
    std::uint64_t seeded = 0;
    std::uint64_t spawned = 0;
    std::uint64_t retired = 0;
    std::int64_t in_flight_at_end = 0;

    double busy_total() const;
    double idle_total() const;
    double load_total() const;
};

struct DdmResult {
    ImageAccumulator image;
    ScheduleMetrics metrics;
};

// Throws DeadlockError if no progress is made for deadlock_timeout_s while
// rays remain in flight.
DdmResult run_ddm(const Scene& scene, const RenderSettings& settings, const DdmSettings& ddm);

}  // namespace spectralium::ddm
