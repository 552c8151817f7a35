#include "spectralium/ddm.hpp"

#include "spectralium/colorimetry.hpp"
#include "spectralium/error.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdio>
#include <cstring>
#include <deque>
#include <exception>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <sstream>
#include <thread>

#include <unistd.h>

namespace spectralium::ddm {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

// ---------------------------------------------------------------- partition

Partition::Partition(const Scene& scene, int n_subdomains) {
    if (n_subdomains < 1 || !std::has_single_bit(static_cast<unsigned>(n_subdomains))) {
        throw DomainError("partition: sub-domain count must be a power of two, got " + std::to_string(n_subdomains));
    }
    const auto& tris = scene.triangles();
    const Box3 scene_box = scene.bounds();
    if (tris.empty() || scene_box.empty()) {
        subdomains_.push_back(SubDomain{});
        for (auto& p : planes_) p = {0.0, 0.0};
        return;
    }

    const double diag = scene_box.diagonal();
    const double pad = 1e-3 * diag + 1e-6;
    bounds_ = {scene_box.lo - Vec3{pad, pad, pad}, scene_box.hi + Vec3{pad, pad, pad}};

    // Halving a box along its longest axis yields two boxes of equal shape,
    // so every level of the recursion is a regular grid.
    const Vec3 extent = bounds_.extent();
    for (int levels = std::countr_zero(static_cast<unsigned>(n_subdomains)); levels > 0; --levels) {
        const Box3 cell{{0, 0, 0}, {extent.x / dims_[0], extent.y / dims_[1], extent.z / dims_[2]}};
        dims_[static_cast<std::size_t>(cell.longest_axis())] *= 2;
    }
    for (int a = 0; a < 3; ++a) {
        auto& p = planes_[static_cast<std::size_t>(a)];
        const int d = dims_[static_cast<std::size_t>(a)];
        p.resize(static_cast<std::size_t>(d) + 1);
        for (int i = 0; i < d; ++i) p[static_cast<std::size_t>(i)] = bounds_.lo[a] + extent[a] * i / d;
        p[static_cast<std::size_t>(d)] = bounds_.hi[a];
    }

    subdomains_.resize(static_cast<std::size_t>(dims_[0] * dims_[1] * dims_[2]));
    for (int k = 0; k < dims_[2]; ++k) {
        for (int j = 0; j < dims_[1]; ++j) {
            for (int i = 0; i < dims_[0]; ++i) {
                SubDomain& sd = subdomains_[cell_id(i, j, k)];
                sd.id = cell_id(i, j, k);
                sd.cell = {i, j, k};
                for (int a = 0; a < 3; ++a) {
                    const auto c = static_cast<std::size_t>(sd.cell[static_cast<std::size_t>(a)]);
                    sd.box.lo[a] = planes_[static_cast<std::size_t>(a)][c];
                    sd.box.hi[a] = planes_[static_cast<std::size_t>(a)][c + 1];
                }
                for (int a = 0; a < 3; ++a) {
                    for (int side : {-1, 1}) {
                        std::array<int, 3> n = sd.cell;
                        n[static_cast<std::size_t>(a)] += side;
                        if (n[static_cast<std::size_t>(a)] < 0 ||
                            n[static_cast<std::size_t>(a)] >= dims_[static_cast<std::size_t>(a)]) {
                            continue;
                        }
                        Interface f{cell_id(n[0], n[1], n[2]), a, side, sd.box};
                        const double plane = side < 0 ? sd.box.lo[a] : sd.box.hi[a];
                        f.face.lo[a] = plane;
                        f.face.hi[a] = plane;
                        sd.interfaces.push_back(f);
                    }
                }
            }
        }
    }

    const double tol = 1e-9 * diag;
    for (const Triangle& tri : tris) {
        const Box3 tb = tri.bounds();
        std::array<int, 3> first{}, last{};
        for (int a = 0; a < 3; ++a) {
            const auto& p = planes_[static_cast<std::size_t>(a)];
            const int d = dims_[static_cast<std::size_t>(a)];
            int f = 0;
            while (f + 1 < d && p[static_cast<std::size_t>(f) + 1] < tb.lo[a] - tol) ++f;
            int l = d - 1;
            while (l > 0 && p[static_cast<std::size_t>(l)] > tb.hi[a] + tol) --l;
            first[static_cast<std::size_t>(a)] = f;
            last[static_cast<std::size_t>(a)] = std::max(f, l);
        }
        for (int k = first[2]; k <= last[2]; ++k) {
            for (int j = first[1]; j <= last[1]; ++j) {
                for (int i = first[0]; i <= last[0]; ++i) subdomains_[cell_id(i, j, k)].triangle_ids.push_back(tri.id);
            }
        }
    }
}

std::uint32_t Partition::cell_id(int ix, int iy, int iz) const {
    return static_cast<std::uint32_t>(ix + dims_[0] * (iy + dims_[1] * iz));
}

std::uint32_t Partition::locate(Vec3 p) const {
    std::array<int, 3> c{};
    for (int a = 0; a < 3; ++a) {
        const auto& planes = planes_[static_cast<std::size_t>(a)];
        // Interior planes at or below the coordinate.
        const auto it = std::upper_bound(planes.begin() + 1, planes.end() - 1, p[a]);
        c[static_cast<std::size_t>(a)] = static_cast<int>(it - (planes.begin() + 1));
    }
    return cell_id(c[0], c[1], c[2]);
}

// ---------------------------------------------------------------- codec

namespace {

void put_bits(std::vector<std::uint8_t>& out, std::uint64_t v, int bytes) {
    for (int i = 0; i < bytes; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64(std::vector<std::uint8_t>& out, double v) { put_bits(out, std::bit_cast<std::uint64_t>(v), 8); }

class Reader {
  public:
    explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::uint64_t bits(int n) {
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_++]) << (8 * i);
        return v;
    }
    double f64() { return std::bit_cast<double>(bits(8)); }
    float f32() { return std::bit_cast<float>(static_cast<std::uint32_t>(bits(4))); }
    Vec3 vec3() {
        const double x = f64(), y = f64(), z = f64();
        return {x, y, z};
    }

  private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode(const RayMessage& msg) {
    const Ray& r = msg.ray;
    if (r.throughput.size() != kWireSamples) {
        throw ProtocolError("wire codec: throughput must have " + std::to_string(kWireSamples) + " samples");
    }
    if (r.depth < 0) throw ProtocolError("wire codec: negative depth");
    std::vector<std::uint8_t> out;
    out.reserve(kWireSize);
    for (int a = 0; a < 3; ++a) put_f64(out, msg.entry_point[a]);
    for (int a = 0; a < 3; ++a) put_f64(out, r.direction[a]);
    put_bits(out, static_cast<std::uint32_t>(r.depth), 4);
    put_bits(out, r.pixel_id, 8);
    put_bits(out, static_cast<std::uint8_t>(r.kind), 1);
    put_f64(out, msg.partial_t);
    for (double v : r.throughput.values()) put_bits(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)), 4);
    return out;
}

RayMessage decode(std::span<const std::uint8_t> bytes, const WavelengthGrid& grid) {
    if (bytes.size() != kWireSize) {
        throw ProtocolError("wire codec: expected " + std::to_string(kWireSize) + " bytes, got " +
                            std::to_string(bytes.size()));
    }
    if (grid.count() != kWireSamples) throw ProtocolError("wire codec: grid must have 81 samples");
    Reader in(bytes);
    RayMessage msg;
    msg.entry_point = in.vec3();
    msg.ray.direction = in.vec3();
    msg.ray.depth = static_cast<int>(in.bits(4));
    msg.ray.pixel_id = in.bits(8);
    const auto kind = in.bits(1);
    if (kind > static_cast<std::uint64_t>(RayKind::photon)) {
        throw ProtocolError("wire codec: unknown ray kind " + std::to_string(kind));
    }
    msg.ray.kind = static_cast<RayKind>(kind);
    msg.partial_t = in.f64();
    msg.ray.throughput = Spectrum(grid);
    for (std::size_t i = 0; i < kWireSamples; ++i) msg.ray.throughput[i] = in.f32();
    msg.ray.origin = msg.entry_point - msg.ray.direction * msg.partial_t;
    return msg;
}

// ---------------------------------------------------------------- ray advance

std::optional<RayMessage> enter(const Partition& partition, const Ray& ray) {
    const Box3& b = partition.bounds();
    if (b.empty()) return std::nullopt;
    if (b.contains(ray.origin)) return RayMessage{ray.origin, 0.0, ray};
    double t0, t1;
    if (!slab_interval(b, ray.origin, ray.direction, t0, t1)) return std::nullopt;
    const double t = std::max(t0, ray.t_min);
    if (t1 < t) return std::nullopt;
    const Vec3 entry = max(b.lo, min(b.hi, ray.origin + ray.direction * t));
    return RayMessage{entry, t, ray};
}

AdvanceResult advance_ray(const RayMessage& msg, const SubDomain& sub, const SpatialIndex& index,
                          const Partition& partition) {
    if (!sub.box.contains(msg.entry_point, 1e-6)) {
        std::ostringstream m;
        m << "sub-domain " << sub.id << ": entry point (" << msg.entry_point.x << ", " << msg.entry_point.y << ", "
          << msg.entry_point.z << ") lies outside the box";
        throw ProtocolError(m.str());
    }
    const Ray& ray = msg.ray;
    const Vec3 o = ray.origin;
    const Vec3 d = ray.direction;

    double t0, t1;
    if (!slab_interval(sub.box, o, d, t0, t1)) t1 = msg.partial_t;
    // Overlap the neighbours' intervals slightly so no hit falls in a gap.
    const double overlap = 1e-9 * std::max(1.0, std::abs(t1));
    const double lo = std::max(ray.t_min, msg.partial_t - overlap);
    const double hi = t1 + overlap;

    AdvanceResult result;
    if (hi > lo) {
        if (ray.kind == RayKind::shadow) {
            if (index.occluded(o, d, lo, hi)) {
                result.kind = AdvanceKind::hit;
                return result;
            }
        } else if (auto hit = index.intersect(o, d, lo, hi)) {
            result.kind = AdvanceKind::hit;
            result.hit = *hit;
            return result;
        }
    }

    // Step into the cell(s) whose face the ray leaves through.
    std::array<int, 3> cell = sub.cell;
    bool stepped = false;
    for (int a = 0; a < 3; ++a) {
        if (d[a] == 0.0) continue;
        const double plane = d[a] > 0.0 ? sub.box.hi[a] : sub.box.lo[a];
        const double tf = (plane - o[a]) * (1.0 / d[a]);
        if (tf <= t1) {
            cell[static_cast<std::size_t>(a)] += d[a] > 0.0 ? 1 : -1;
            stepped = true;
        }
    }
    if (!stepped) {
        int a = 0;
        for (int b = 1; b < 3; ++b) {
            if (std::abs(d[b]) > std::abs(d[a])) a = b;
        }
        cell[static_cast<std::size_t>(a)] += d[a] > 0.0 ? 1 : -1;
    }
    const auto& dims = partition.dims();
    for (int a = 0; a < 3; ++a) {
        if (cell[static_cast<std::size_t>(a)] < 0 || cell[static_cast<std::size_t>(a)] >= dims[static_cast<std::size_t>(a)]) {
            result.kind = AdvanceKind::escape;
            return result;
        }
    }
    result.kind = AdvanceKind::exit;
    result.neighbor = partition.cell_id(cell[0], cell[1], cell[2]);
    const Box3& nb = partition[result.neighbor].box;
    result.next.entry_point = max(nb.lo, min(nb.hi, o + d * t1));
    result.next.partial_t = t1;
    result.next.ray = ray;
    return result;
}

// ---------------------------------------------------------------- partition files

std::filesystem::path partition_file(const std::filesystem::path& dir, std::uint32_t id) {
    return dir / ("subdomain_" + std::to_string(id) + ".part");
}

void write_partition_files(const Partition& partition, const Scene& scene, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const auto& all = scene.triangles();
    for (const SubDomain& sd : partition.subdomains()) {
        const auto path = partition_file(dir, sd.id);
        std::ofstream out(path);
        if (!out) throw IoError("cannot write '" + path.string() + "'");
        out << "subdomain " << sd.id;
        for (const Vec3& c : {sd.box.lo, sd.box.hi}) out << ' ' << num(c.x) << ' ' << num(c.y) << ' ' << num(c.z);
        out << " interfaces";
        for (const Interface& f : sd.interfaces) out << ' ' << f.neighbor;
        out << '\n';

        for (std::size_t m = 0; m < scene.materials.size(); ++m) {
            std::vector<Triangle> group;
            for (std::uint32_t id : sd.triangle_ids) {
                if (all[id].material_id == static_cast<int>(m)) group.push_back(all[id]);
            }
            if (!group.empty()) write_mesh_block(out, scene.materials[m].name, group, true);
        }
        if (!out) throw IoError("write failed for '" + path.string() + "'");
    }
}

LoadedSubDomain read_partition_file(const std::filesystem::path& path, const Scene& scene) {
    const std::string text = read_text_file(path);
    const std::string source = path.string();
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    bool have_header = false;
    LoadedSubDomain out;

    auto fail = [&](const std::string& what) -> void { throw ParseError(source, line_no, what); };

    std::optional<Mesh> mesh;
    std::string mesh_material;
    std::vector<std::uint32_t> ids;
    while (std::getline(in, line)) {
        ++line_no;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        std::istringstream words(line);
        std::string key;
        words >> key;
        if (!have_header) {
            if (key != "subdomain") fail("expected 'subdomain' header");
            std::string tag;
            if (!(words >> out.id >> out.box.lo.x >> out.box.lo.y >> out.box.lo.z >> out.box.hi.x >> out.box.hi.y >>
                  out.box.hi.z >> tag) ||
                tag != "interfaces") {
                fail("malformed 'subdomain' header");
            }
            for (std::uint32_t n; words >> n;) out.neighbors.push_back(n);
            if (!words.eof()) fail("malformed interface list");
            have_header = true;
        } else if (key == "mesh") {
            if (mesh) fail("nested 'mesh'");
            if (!(words >> mesh_material)) fail("'mesh' needs a material name");
            if (scene.find_material(mesh_material) < 0) fail("unknown material '" + mesh_material + "'");
            mesh.emplace();
            mesh->material_id = scene.find_material(mesh_material);
            ids.clear();
        } else if (key == "end") {
            if (!mesh) fail("'end' without 'mesh'");
            if (ids.size() != mesh->triangles.size()) fail("every face needs a 'tid'");
            for (std::size_t f = 0; f < mesh->triangles.size(); ++f) {
                Triangle tri = mesh_triangle(*mesh, f);
                tri.id = ids[f];
                out.triangles.push_back(tri);
            }
            mesh.reset();
        } else if (key == "tid") {
            std::uint32_t id;
            if (!mesh || !(words >> id)) fail("malformed 'tid'");
            if (mesh->triangles.size() != ids.size() + 1) fail("'tid' must follow exactly one face");
            ids.push_back(id);
        } else if (!mesh || !parse_mesh_directive(line, *mesh, source, line_no, false)) {
            fail("unknown directive '" + key + "'");
        }
    }
    if (!have_header) fail("missing 'subdomain' header");
    if (mesh) fail("unterminated 'mesh' block");
    std::sort(out.triangles.begin(), out.triangles.end(),
              [](const Triangle& a, const Triangle& b) { return a.id < b.id; });
    return out;
}

// ---------------------------------------------------------------- settings & metrics

void DdmSettings::validate() const {
    if (n_subdomains < 1 || !std::has_single_bit(static_cast<unsigned>(n_subdomains))) {
        throw DomainError("ddm: sub-domain count must be a power of two");
    }
    if (n_workers < 1) throw DomainError("ddm: worker count must be >= 1");
    if (max_resident < 1 || max_resident > n_subdomains) {
        throw DomainError("ddm: max resident must be in [1, sub-domain count]");
    }
    if (load_cost_ms < 0.0) throw DomainError("ddm: load cost must be >= 0");
    if (batch < 1) throw DomainError("ddm: batch size must be >= 1");
    if (!(deadlock_timeout_s > 0.0)) throw DomainError("ddm: deadlock timeout must be positive");
}

double ScheduleMetrics::busy_total() const {
    double s = 0.0;
    for (const auto& w : workers) s += w.busy;
    return s;
}

double ScheduleMetrics::idle_total() const {
    double s = 0.0;
    for (const auto& w : workers) s += w.idle;
    return s;
}

double ScheduleMetrics::load_total() const {
    double s = 0.0;
    for (const auto& w : workers) s += w.load;
    return s;
}

// ---------------------------------------------------------------- scheduler

namespace {

struct DomainState {
    std::mutex queue_mutex;
    std::deque<RayMessage> queue;
    std::atomic<std::size_t> size{0};
    std::atomic<std::size_t> hist_max{0};
    std::size_t triangle_count = 0;

    // Guarded by the scheduler mutex.
    std::shared_ptr<const SpatialIndex> index;
    bool loading = false;
    bool retiring = false;
    int active = 0;
    std::uint64_t last_used = 0;  // batch counter value at last use
};

class TempDir {
  public:
    explicit TempDir(std::filesystem::path requested) {
        if (!requested.empty()) {
            path_ = std::move(requested);
            return;
        }
        static std::atomic<unsigned> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("spectralium-ddm-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        owned_ = true;
    }
    ~TempDir() {
        if (owned_) {
            std::error_code ec;
            std::filesystem::remove_all(path_, ec);
        }
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }

  private:
    std::filesystem::path path_;
    bool owned_ = false;
};

class Scheduler {
  public:
    Scheduler(const Scene& scene, const Partition& partition, const DdmSettings& settings,
              std::filesystem::path dir, ImageAccumulator& image, ScheduleMetrics& metrics)
        : scene_(scene),
          partition_(partition),
          settings_(settings),
          dir_(std::move(dir)),
          image_(image),
          metrics_(metrics),
          domains_(partition.size()),
          last_progress_(Clock::now()) {
        total_triangles_ = std::max<std::size_t>(1, scene.triangles().size());
        for (std::size_t i = 0; i < partition.size(); ++i) domains_[i].triangle_count = partition[i].triangle_ids.size();
        metrics_.workers.assign(static_cast<std::size_t>(settings.n_workers), WorkerMetrics{});
        metrics_.loads_per_subdomain.assign(partition.size(), 0);
        loader_ = std::jthread([this] { loader_loop(); });
    }

    ~Scheduler() {
        {
            std::lock_guard lk(mutex_);
            stop_ = true;
        }
        loader_cv_.notify_all();
        work_cv_.notify_all();
    }

    // Routes a new ray into the partition, or retires it at once if it
    // misses the bounds.
    void route(const ShadingContext& ctx, Ray ray, PathSink& sink) {
        if (auto msg = enter(partition_, ray)) {
            push(partition_.locate(msg->entry_point), std::move(*msg));
        } else {
            process_escape(ctx, ray, sink);
            ++retired_;
        }
    }

    void run_phase(const ShadingContext& ctx, const std::function<void(PathSink&)>& seed,
                   std::vector<StoredPhoton>* stored) {
        ctx_ = &ctx;
        {
            std::lock_guard lk(mutex_);
            last_progress_ = Clock::now();
        }
        {
            PhaseSink sink(*this, nullptr, true);
            seed(sink);
        }
        std::vector<std::vector<StoredPhoton>> per_worker(static_cast<std::size_t>(settings_.n_workers));
        {
            std::vector<std::jthread> workers;
            for (int w = 0; w < settings_.n_workers; ++w) {
                workers.emplace_back([this, w, &per_worker] {
                    try {
                        worker_loop(static_cast<std::size_t>(w), per_worker[static_cast<std::size_t>(w)]);
                    } catch (...) {
                        fail(std::current_exception());
                    }
                });
            }
        }
        if (error_) std::rethrow_exception(error_);
        if (stored) {
            for (auto& v : per_worker) stored->insert(stored->end(), v.begin(), v.end());
        }
    }

    std::int64_t in_flight() const { return in_flight_.load(); }
    std::uint64_t retired() const { return retired_.load(); }
    std::uint64_t spawned() const { return spawned_.load(); }
    std::uint64_t seeded() const { return seeded_.load(); }

    void shutdown() {
        {
            std::lock_guard lk(mutex_);
            stop_ = true;
        }
        loader_cv_.notify_all();
        if (loader_.joinable()) loader_.join();
        if (error_) std::rethrow_exception(error_);
    }

  private:
    class PhaseSink final : public PathSink {
      public:
        PhaseSink(Scheduler& s, std::vector<StoredPhoton>* photons, bool seeding)
            : s_(s), photons_(photons), seeding_(seeding) {}
        void deposit(std::uint64_t pixel, const Spectrum& radiance) override {
            s_.image_.add(pixel, spectrum_to_xyz(radiance));
        }
        void spawn(Ray ray) override {
            ++(seeding_ ? s_.seeded_ : s_.spawned_);
            s_.route(*s_.ctx_, std::move(ray), *this);
        }
        void store(const StoredPhoton& photon) override {
            if (photons_) photons_->push_back(photon);
        }

      private:
        Scheduler& s_;
        std::vector<StoredPhoton>* photons_;
        bool seeding_;
    };

    void push(std::uint32_t d, RayMessage msg) {
        ++in_flight_;
        DomainState& ds = domains_[d];
        bool was_empty;
        {
            std::lock_guard lk(ds.queue_mutex);
            was_empty = ds.queue.empty();
            ds.queue.push_back(std::move(msg));
            const std::size_t n = ds.queue.size();
            ds.size.store(n);
            if (n > ds.hist_max.load()) ds.hist_max.store(n);
        }
        if (was_empty) {
            work_cv_.notify_all();
            loader_cv_.notify_one();
        }
    }

    std::size_t pop_batch(std::uint32_t d, std::vector<RayMessage>& out) {
        DomainState& ds = domains_[d];
        std::lock_guard lk(ds.queue_mutex);
        const std::size_t n = std::min(settings_.batch, ds.queue.size());
        for (std::size_t i = 0; i < n; ++i) {
            out.push_back(std::move(ds.queue.front()));
            ds.queue.pop_front();
        }
        ds.size.store(ds.queue.size());
        return n;
    }

    void fail(std::exception_ptr e) {
        {
            std::lock_guard lk(mutex_);
            if (!error_) error_ = e;
            abort_ = true;
        }
        work_cv_.notify_all();
        loader_cv_.notify_all();
    }

    std::string dump_locked() const {
        std::ostringstream out;
        out << "in_flight=" << in_flight_.load() << " resident=" << resident_count_ << " loading=" << loading_count_
            << '\n';
        for (std::size_t i = 0; i < domains_.size(); ++i) {
            const DomainState& ds = domains_[i];
            out << "  subdomain " << i << ": queue=" << ds.size.load() << " resident=" << (ds.index ? 1 : 0)
                << " loading=" << ds.loading << " retiring=" << ds.retiring << " active=" << ds.active << '\n';
        }
        return out.str();
    }

    // Resident, non-retiring sub-domain with the longest queue.
    std::optional<std::uint32_t> pick_locked() const {
        std::optional<std::uint32_t> best;
        std::size_t best_size = 0;
        for (std::size_t i = 0; i < domains_.size(); ++i) {
            const DomainState& ds = domains_[i];
            const std::size_t n = ds.size.load();
            if (!ds.index || ds.retiring || n == 0) continue;
            if (n > best_size) {
                best = static_cast<std::uint32_t>(i);
                best_size = n;
            }
        }
        return best;
    }

    std::size_t theta(const DomainState& ds) const {
        const auto hist = static_cast<double>(ds.hist_max.load());
        return std::max(settings_.theta_min, static_cast<std::size_t>(std::ceil(settings_.theta_fraction * hist)));
    }

    // Load policy: fill free slots with the longest non-resident queue.
    // When full, start a load as soon as some resident sub-domain has
    // drained below its threshold and the candidate has more work; the
    // drained one is unloaded once the load completes, so processing of
    // the other resident sub-domains overlaps the load.
    std::optional<std::uint32_t> load_candidate_locked() const {
        if (settings_.disable_loads_for_testing) return std::nullopt;
        std::optional<std::uint32_t> cand;
        std::size_t cand_size = 0;
        for (std::size_t i = 0; i < domains_.size(); ++i) {
            const DomainState& ds = domains_[i];
            const std::size_t n = ds.size.load();
            if (ds.index || ds.loading || n == 0) continue;
            if (n > cand_size) {
                cand = static_cast<std::uint32_t>(i);
                cand_size = n;
            }
        }
        if (!cand) return std::nullopt;
        if (resident_count_ < static_cast<std::size_t>(settings_.max_resident)) return cand;

        const DomainState* drained = victim_locked();
        if (!drained) return std::nullopt;
        const std::size_t n = drained->size.load();
        if (n >= theta(*drained) || n >= cand_size) return std::nullopt;
        return cand;
    }

    // Resident sub-domain with the shortest queue.
    const DomainState* victim_locked() const {
        const DomainState* victim = nullptr;
        for (const DomainState& ds : domains_) {
            if (!ds.index || ds.retiring) continue;
            if (!victim || ds.size.load() < victim->size.load()) victim = &ds;
        }
        return victim;
    }

    void loader_loop() {
        std::unique_lock lk(mutex_);
        while (!stop_ && !abort_) {
            const auto cand = load_candidate_locked();
            if (!cand) {
                loader_cv_.wait_for(lk, std::chrono::milliseconds(5));
                continue;
            }
            DomainState& target = domains_[*cand];
            target.loading = true;
            ++loading_count_;
            lk.unlock();

            const auto start = Clock::now();
            std::shared_ptr<const SpatialIndex> index;
            try {
                LoadedSubDomain loaded = read_partition_file(partition_file(dir_, *cand), scene_);
                index = std::make_shared<const SpatialIndex>(std::move(loaded.triangles));
                const double delay_ms = settings_.load_cost_ms * static_cast<double>(target.triangle_count) /
                                        static_cast<double>(total_triangles_);
                if (delay_ms > 0.0) std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(delay_ms));
            } catch (...) {
                lk.lock();
                target.loading = false;
                --loading_count_;
                lk.unlock();
                fail(std::current_exception());
                lk.lock();
                break;
            }
            const double elapsed = seconds_since(start);

            lk.lock();
            if (resident_count_ >= static_cast<std::size_t>(settings_.max_resident)) {
                // Unload a resident sub-domain once its queue has drained and
                // the workers on it have let go. Every resident queue empties
                // eventually, so this wait ends.
                DomainState* victim = nullptr;
                while (!victim && !abort_) {
                    for (DomainState& ds : domains_) {
                        if (!ds.index || ds.retiring || ds.size.load() != 0) continue;
                        if (!victim || ds.last_used < victim->last_used) victim = &ds;
                    }
                    if (!victim) loader_cv_.wait_for(lk, std::chrono::milliseconds(1));
                }
                if (victim) {
                    victim->retiring = true;
                    loader_cv_.wait(lk, [&] { return victim->active == 0 || abort_; });
                    victim->index.reset();
                    victim->retiring = false;
                    --resident_count_;
                    ++metrics_.unload_events;
                }
            }
            target.index = std::move(index);
            target.last_used = ++batches_;
            target.loading = false;
            --loading_count_;
            ++resident_count_;
            ++metrics_.load_events;
            ++metrics_.loads_per_subdomain[*cand];
            metrics_.loader_seconds += elapsed;
            metrics_.max_resident_observed = std::max(metrics_.max_resident_observed, resident_count_);
            last_progress_ = Clock::now();
            work_cv_.notify_all();
        }
    }

    void worker_loop(std::size_t w, std::vector<StoredPhoton>& photons) {
        WorkerMetrics& wm = metrics_.workers[w];
        PhaseSink sink(*this, &photons, false);
        std::vector<RayMessage> batch;
        batch.reserve(settings_.batch);

        for (;;) {
            if (in_flight_.load() == 0) {
                work_cv_.notify_all();
                return;
            }
            std::uint32_t d = 0;
            std::shared_ptr<const SpatialIndex> index;
            {
                std::unique_lock lk(mutex_);
                if (abort_) return;
                const auto pick = pick_locked();
                if (!pick) {
                    loader_cv_.notify_one();
                    const bool loading = loading_count_ > 0;
                    const auto start = Clock::now();
                    work_cv_.wait_for(lk, std::chrono::milliseconds(2));
                    (loading ? wm.load : wm.idle) += seconds_since(start);
                    if (in_flight_.load() > 0 &&
                        std::chrono::duration<double>(Clock::now() - last_progress_).count() >
                            settings_.deadlock_timeout_s) {
                        abort_ = true;
                        if (!error_) {
                            error_ = std::make_exception_ptr(
                                DeadlockError("ddm: no progress for " + std::to_string(settings_.deadlock_timeout_s) +
                                              " s with rays in flight\n" + dump_locked()));
                        }
                        loader_cv_.notify_all();
                        work_cv_.notify_all();
                        return;
                    }
                    continue;
                }
                d = *pick;
                ++domains_[d].active;
                index = domains_[d].index;
            }

            const auto start = Clock::now();
            batch.clear();
            pop_batch(d, batch);
            for (const RayMessage& msg : batch) process(msg, partition_[d], *index, sink);
            wm.busy += seconds_since(start);

            {
                std::lock_guard lk(mutex_);
                --domains_[d].active;
                domains_[d].last_used = ++batches_;
                last_progress_ = Clock::now();
            }
            loader_cv_.notify_all();
        }
    }

    void process(const RayMessage& msg, const SubDomain& sub, const SpatialIndex& index, PhaseSink& sink) {
        const AdvanceResult r = advance_ray(msg, sub, index, partition_);
        switch (r.kind) {
            case AdvanceKind::hit:
                process_hit(*ctx_, msg.ray, r.hit, sink);
                ++retired_;
                break;
            case AdvanceKind::exit:
                ++migrations_;
                push(r.neighbor, r.next);
                break;
            case AdvanceKind::escape:
                process_escape(*ctx_, msg.ray, sink);
                ++retired_;
                break;
        }
        // Children were enqueued above, so the count cannot touch zero early.
        --in_flight_;
    }

  public:
    std::uint64_t migrations() const { return migrations_.load(); }

  private:
    const Scene& scene_;
    const Partition& partition_;
    const DdmSettings& settings_;
    std::filesystem::path dir_;
    ImageAccumulator& image_;
    ScheduleMetrics& metrics_;
    std::vector<DomainState> domains_;
    std::size_t total_triangles_ = 1;
    const ShadingContext* ctx_ = nullptr;

    std::mutex mutex_;
    std::condition_variable work_cv_;
    std::condition_variable loader_cv_;
    std::size_t resident_count_ = 0;
    std::size_t loading_count_ = 0;
    std::uint64_t batches_ = 0;
    bool stop_ = false;
    bool abort_ = false;
    std::exception_ptr error_;
    Clock::time_point last_progress_;

    std::atomic<std::int64_t> in_flight_{0};
    std::atomic<std::uint64_t> seeded_{0};
    std::atomic<std::uint64_t> spawned_{0};
    std::atomic<std::uint64_t> retired_{0};
    std::atomic<std::uint64_t> migrations_{0};

    std::jthread loader_;
};

}  // namespace

DdmResult run_ddm(const Scene& scene, const RenderSettings& settings, const DdmSettings& ddm) {
    settings.validate();
    ddm.validate();
    const auto start = Clock::now();

    const Partition partition(scene, ddm.n_subdomains);
    const TempDir dir(ddm.work_dir);
    write_partition_files(partition, scene, dir.path());

    DdmResult result{ImageAccumulator(settings.width, settings.height), {}};
    ScheduleMetrics& metrics = result.metrics;
    {
        Scheduler scheduler(scene, partition, ddm, dir.path(), result.image, metrics);

        PhotonMaps maps;
        bool have_maps = false;
        if (settings.photons_per_light > 0 && !scene.lights.empty()) {
            const ShadingContext photon_ctx(scene, settings);
            std::vector<StoredPhoton> stored;
            const auto n = static_cast<std::uint64_t>(settings.photons_per_light);
            scheduler.run_phase(
                photon_ctx,
                [&](PathSink& sink) {
                    if (scene.triangles().empty()) return;
                    for (std::size_t l = 0; l < scene.lights.size(); ++l) {
                        for (std::uint64_t i = 0; i < n; ++i) sink.spawn(emit_photon(photon_ctx, l, i));
                    }
                },
                &stored);
            maps = build_photon_maps(std::move(stored), n * scene.lights.size(), nullptr, scene.grid);
            have_maps = true;
        }

        const ShadingContext ctx(scene, settings, have_maps ? &maps : nullptr);
        ImageAccumulator& image = result.image;
        scheduler.run_phase(
            ctx,
            [&](PathSink& sink) {
                for (int y = 0; y < settings.height; ++y) {
                    for (int x = 0; x < settings.width; ++x) {
                        for (int s = 0; s < settings.samples_per_pixel; ++s) sink.spawn(camera_ray(ctx, x, y, s));
                        image.add_samples(static_cast<std::size_t>(y) * static_cast<std::size_t>(settings.width) +
                                              static_cast<std::size_t>(x),
                                          static_cast<std::uint64_t>(settings.samples_per_pixel));
                    }
                }
            },
            nullptr);

        scheduler.shutdown();
        metrics.migrations = scheduler.migrations();
        metrics.seeded = scheduler.seeded();
        metrics.spawned = scheduler.spawned();
        metrics.retired = scheduler.retired();
        metrics.in_flight_at_end = scheduler.in_flight();
    }
    metrics.wall_time = seconds_since(start);
    return result;
}

}  // namespace spectralium::ddm
