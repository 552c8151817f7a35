#include "spectralium/ddm.hpp"
#include "spectralium/error.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

using namespace spectralium;
using namespace spectralium::ddm;

namespace {

// Tiny triangles in two opposite corners pin the scene bounds to [0,8]^3;
// one more sits in the plane x = 2.
Scene cube_scene(bool with_wall) {
    std::string text =
        "material m lambertian reflectance 0.5\n"
        "sun 60 30 5778 0.1 1\n"
        "camera 4 4 20  4 4 0  0 1 0  40 8 8\n"
        "mesh m\n"
        "v 0 0 0\nv 0.01 0 0\nv 0 0.01 0\nf 1 2 3\n"
        "v 8 8 8\nv 7.99 8 8\nv 8 7.99 8\nf 4 5 6\n";
    if (with_wall) text += "v 2 1 1\nv 2 7 1\nv 2 1 7\nf 7 8 9\n";
    text += "end\n";
    return parse_scene_text(text, ".");
}

Ray make_ray(Vec3 o, Vec3 d, RayKind kind = RayKind::camera) {
    Ray r;
    r.origin = o;
    r.direction = normalize(d);
    r.throughput = Spectrum(WavelengthGrid{}, 1.0);
    r.kind = kind;
    return r;
}

RenderSettings small_settings(int size, int spp, int photons) {
    RenderSettings s;
    s.width = size;
    s.height = size;
    s.samples_per_pixel = spp;
    s.photons_per_light = photons;
    return s;
}

double worst_relative(const ImageAccumulator& a, const ImageAccumulator& b) {
    double worst = 0.0;
    for (std::size_t p = 0; p < a.pixel_count(); ++p) {
        const XYZ x = a.mean(p), y = b.mean(p);
        for (auto [u, v] : {std::pair{x.X, y.X}, {x.Y, y.Y}, {x.Z, y.Z}}) {
            const double diff = std::abs(u - v);
            if (diff > 1e-12) worst = std::max(worst, diff / std::max(std::abs(u), 1e-300));
        }
    }
    return worst;
}

}  // namespace

TEST_CASE("partition shapes") {
    const Scene s = cube_scene(false);
    const Partition one(s, 1);
    REQUIRE(one.size() == 1);
    CHECK(one[0].interfaces.empty());

    const Partition two(s, 2);
    REQUIRE(two.size() == 2);
    for (const SubDomain& d : two.subdomains()) CHECK(d.interfaces.size() == 1);

    const Partition eight(s, 8);
    REQUIRE(eight.size() == 8);
    CHECK(eight.dims() == std::array<int, 3>{2, 2, 2});
    for (const SubDomain& d : eight.subdomains()) {
        CHECK(d.interfaces.size() == 3);
        for (const Interface& f : d.interfaces) {
            // The neighbour lists the same face back.
            bool found = false;
            for (const Interface& g : eight[f.neighbor].interfaces) {
                if (g.neighbor == d.id && g.axis == f.axis && g.side == -f.side && g.face == f.face) found = true;
            }
            CHECK(found);
        }
    }
    CHECK_THROWS(Partition(s, 3));
    CHECK_THROWS(Partition(s, 0));
}

TEST_CASE("partition covers the scene") {
    const Scene s = testing_support::sample_scene("cornell.scn");
    for (int n : {1, 2, 4, 8}) {
        const Partition p(s, n);
        std::set<std::uint32_t> owned;
        for (const SubDomain& d : p.subdomains()) {
            CHECK(p.locate(d.box.center()) == d.id);
            for (std::uint32_t t : d.triangle_ids) owned.insert(t);
        }
        CHECK(owned.size() == s.triangles().size());
        for (const Triangle& t : s.triangles()) {
            const SubDomain& d = p[p.locate(t.centroid())];
            bool listed = false;
            for (std::uint32_t id : d.triangle_ids) listed = listed || id == t.id;
            CHECK(listed);
        }
    }
}

TEST_CASE("advance_ray examples") {
    const Scene s = cube_scene(true);
    const Partition p(s, 8);
    REQUIRE(p.planes(0).size() == 3);
    CHECK(p.planes(0)[1] == doctest::Approx(4.0).epsilon(1e-12));

    std::vector<SpatialIndex> indices;
    for (const SubDomain& d : p.subdomains()) {
        std::vector<Triangle> tris;
        for (std::uint32_t id : d.triangle_ids) tris.push_back(s.triangles()[id]);
        indices.emplace_back(std::move(tris));
    }

    SUBCASE("a ray leaving through the shared corner") {
        const Ray r = make_ray({3, 3, 3}, {1, 1, 1});
        const auto msg = enter(p, r);
        REQUIRE(msg);
        const std::uint32_t start = p.locate(msg->entry_point);
        const AdvanceResult res = advance_ray(*msg, p[start], indices[start], p);
        REQUIRE(res.kind == AdvanceKind::exit);
        CHECK(res.next.entry_point.x == doctest::Approx(4.0));
        CHECK(res.next.entry_point.y == doctest::Approx(4.0));
        CHECK(res.next.entry_point.z == doctest::Approx(4.0));
        CHECK(res.next.partial_t == doctest::Approx(std::sqrt(3.0)));
        CHECK(res.neighbor != start);
    }
    SUBCASE("a wall inside the first box is hit") {
        const Ray r = make_ray({1, 3, 3}, {1, 0, 0});
        const auto msg = enter(p, r);
        REQUIRE(msg);
        const std::uint32_t start = p.locate(msg->entry_point);
        const AdvanceResult res = advance_ray(*msg, p[start], indices[start], p);
        REQUIRE(res.kind == AdvanceKind::hit);
        CHECK(res.hit.t == doctest::Approx(1.0));
    }
    SUBCASE("a ray heading out of the scene escapes") {
        const Ray r = make_ray({6, 6, 6}, {0, 1, 0});
        const auto msg = enter(p, r);
        REQUIRE(msg);
        const std::uint32_t start = p.locate(msg->entry_point);
        CHECK(advance_ray(*msg, p[start], indices[start], p).kind == AdvanceKind::escape);
    }
    SUBCASE("a ray outside the bounds never enters") {
        CHECK_FALSE(enter(p, make_ray({20, 20, 20}, {1, 0, 0})));
    }
    SUBCASE("an entry point outside the box is a protocol error") {
        const Ray r = make_ray({1, 1, 1}, {1, 0, 0});
        auto msg = enter(p, r);
        REQUIRE(msg);
        const std::uint32_t far = p.locate({7, 7, 7});
        CHECK_THROWS_AS(advance_ray(*msg, p[far], indices[far], p), ProtocolError);
    }
}

TEST_CASE("migrating rays stay on their line and end in the right place") {
    const Scene s = testing_support::sample_scene("cornell.scn");
    const Partition p(s, 8);
    std::vector<SpatialIndex> indices;
    for (const SubDomain& d : p.subdomains()) {
        std::vector<Triangle> tris;
        for (std::uint32_t id : d.triangle_ids) tris.push_back(s.triangles()[id]);
        indices.emplace_back(std::move(tris));
    }
    const SpatialIndex whole(s.triangles());

    std::mt19937_64 rng(5);
    const Box3 b = p.bounds();
    std::uniform_real_distribution<double> ux(b.lo.x, b.hi.x), uy(b.lo.y, b.hi.y), uz(b.lo.z, b.hi.z), dir(-1, 1);
    for (int i = 0; i < 2000; ++i) {
        Vec3 d{dir(rng), dir(rng), dir(rng)};
        if (length(d) < 1e-3) continue;
        const Ray r = make_ray({ux(rng), uy(rng), uz(rng)}, d);
        auto msg = enter(p, r);
        REQUIRE(msg);
        std::uint32_t at = p.locate(msg->entry_point);
        int steps = 0;
        for (;;) {
            REQUIRE(++steps < 64);
            const AdvanceResult res = advance_ray(*msg, p[at], indices[at], p);
            if (res.kind == AdvanceKind::exit) {
                const Vec3 expect = r.origin + res.next.partial_t * r.direction;
                CHECK(length(res.next.entry_point - expect) < 1e-9);
                CHECK(res.next.partial_t >= msg->partial_t);
                msg = res.next;
                at = res.neighbor;
                continue;
            }
            const auto direct = whole.intersect(r.origin, r.direction, 0.0, INFINITY);
            if (res.kind == AdvanceKind::hit) {
                REQUIRE(direct);
                CHECK(res.hit.t == doctest::Approx(direct->t).epsilon(1e-9));
            } else {
                CHECK_FALSE(direct);
            }
            break;
        }
    }
}

TEST_CASE("wire codec round trip") {
    const WavelengthGrid g;
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(-100.0, 100.0), f(0.0, 10.0);
    for (int i = 0; i < 1000; ++i) {
        RayMessage m;
        m.entry_point = {u(rng), u(rng), u(rng)};
        m.partial_t = f(rng);
        m.ray.origin = m.entry_point;
        m.ray.direction = normalize(Vec3{u(rng), u(rng), u(rng)});
        m.ray.depth = static_cast<int>(rng() % 16);
        m.ray.pixel_id = rng();
        m.ray.kind = static_cast<RayKind>(rng() % 4);
        m.ray.throughput = Spectrum(g);
        for (std::size_t k = 0; k < g.count(); ++k) m.ray.throughput[k] = static_cast<float>(f(rng));
        const auto bytes = encode(m);
        REQUIRE(bytes.size() == kWireSize);
        const RayMessage back = decode(bytes, g);
        CHECK(encode(back) == bytes);
        CHECK(back.ray.pixel_id == m.ray.pixel_id);
        CHECK(back.ray.kind == m.ray.kind);
        CHECK(back.entry_point == m.entry_point);
    }

    RayMessage m;
    m.ray.throughput = Spectrum(g, 1.0);
    auto bytes = encode(m);
    CHECK_THROWS_AS(decode(std::span(bytes).first(bytes.size() - 1), g), ProtocolError);
    bytes[3 * 8 + 3 * 8 + 4 + 8] = 9;
    CHECK_THROWS_AS(decode(bytes, g), ProtocolError);
}

TEST_CASE("partition files") {
    const Scene s = testing_support::sample_scene("cornell.scn");
    const Partition p(s, 4);
    testing_support::TempDir dir;
    write_partition_files(p, s, dir.path());
    for (const SubDomain& d : p.subdomains()) {
        const LoadedSubDomain loaded = read_partition_file(partition_file(dir.path(), d.id), s);
        CHECK(loaded.id == d.id);
        CHECK(loaded.box == d.box);
        REQUIRE(loaded.triangles.size() == d.triangle_ids.size());
        for (std::size_t i = 0; i < loaded.triangles.size(); ++i) {
            CHECK(loaded.triangles[i] == s.triangles()[d.triangle_ids[i]]);
        }
        CHECK(loaded.neighbors.size() == d.interfaces.size());
    }
    CHECK_THROWS_AS(read_partition_file(dir / "nothing.part", s), IoError);
    testing_support::write_file(dir / "bad.part", "not a partition\n");
    CHECK_THROWS_AS(read_partition_file(dir / "bad.part", s), ParseError);
}

TEST_CASE("ddm matches the single-domain render") {
    const Scene s = testing_support::sample_scene("cornell.scn");
    const RenderSettings settings = small_settings(16, 2, 2000);
    const ImageAccumulator reference = render_image(s, settings);

    DdmSettings one;
    const DdmResult single = run_ddm(s, settings, one);
    CHECK(single.image.identical(reference));
    CHECK(single.metrics.migrations == 0);

    DdmSettings split;
    split.n_subdomains = 4;
    split.n_workers = 4;
    split.max_resident = 2;
    const DdmResult r = run_ddm(s, settings, split);
    CHECK(worst_relative(r.image, reference) <= 1e-6);
    CHECK(r.metrics.migrations > 0);
    CHECK(r.metrics.seeded + r.metrics.spawned == r.metrics.retired);
    CHECK(r.metrics.in_flight_at_end == 0);
    CHECK(r.metrics.max_resident_observed <= 2);
}

TEST_CASE("ddm bookkeeping") {
    SUBCASE("empty scene") {
        DdmSettings d;
        d.n_subdomains = 4;
        d.n_workers = 2;
        d.max_resident = 4;
        const DdmResult r = run_ddm(testing_support::sample_scene("empty.scn"), small_settings(4, 1, 100), d);
        CHECK(r.metrics.migrations == 0);
        CHECK(r.metrics.in_flight_at_end == 0);
    }
    SUBCASE("each sub-domain loads once when all may stay resident") {
        DdmSettings d;
        d.n_subdomains = 8;
        d.n_workers = 3;
        d.max_resident = 8;
        const DdmResult r = run_ddm(testing_support::sample_scene("cornell.scn"), small_settings(12, 1, 500), d);
        for (std::uint32_t n : r.metrics.loads_per_subdomain) CHECK(n <= 1);
        CHECK(r.metrics.unload_events == 0);
        CHECK(r.metrics.seeded + r.metrics.spawned == r.metrics.retired);
    }
    SUBCASE("worker time never exceeds the wall clock") {
        DdmSettings d;
        d.n_subdomains = 4;
        d.n_workers = 4;
        d.max_resident = 1;
        d.load_cost_ms = 20.0;
        const DdmResult r = run_ddm(testing_support::sample_scene("cornell.scn"), small_settings(12, 1, 0), d);
        REQUIRE(r.metrics.workers.size() == 4);
        for (const WorkerMetrics& w : r.metrics.workers) {
            CHECK(w.busy + w.idle + w.load <= r.metrics.wall_time * 1.001 + 1e-3);
        }
        CHECK(r.metrics.max_resident_observed <= 1);
    }
}

TEST_CASE("random small scenes always terminate") {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> pos(-3.0, 3.0), off(-1.0, 1.0);
    const int n_subs[] = {1, 2, 4, 8};
    for (int trial = 0; trial < 1000; ++trial) {
        std::string text =
            "material m lambertian reflectance 0.6\n"
            "material g dielectric ior 1.5 0\n"
            "material c conductor ior 0.47 2.9\n"
            "sun 50 20 5778 0.1 1\n"
            "camera 0 0 9  0 0 0  0 1 0  50 3 3\n";
        const char* mats[] = {"m", "g", "c"};
        for (int t = 0; t < 1 + static_cast<int>(rng() % 6); ++t) {
            text += std::string("mesh ") + mats[rng() % 3] + "\n";
            const Vec3 c{pos(rng), pos(rng), pos(rng)};
            for (int v = 0; v < 3; ++v) {
                text += "v " + std::to_string(c.x + off(rng)) + " " + std::to_string(c.y + off(rng)) + " " +
                        std::to_string(c.z + off(rng)) + "\n";
            }
            text += "f 1 2 3\nend\n";
        }
        Scene s;
        try {
            s = parse_scene_text(text, ".");
        } catch (const Error&) {
            continue;  // degenerate triangle
        }
        DdmSettings d;
        d.n_subdomains = n_subs[trial % 4];
        d.n_workers = 1 + trial % 3;
        d.max_resident = 1 + static_cast<int>(rng() % static_cast<unsigned>(d.n_subdomains));
        d.deadlock_timeout_s = 10.0;
        const DdmResult r = run_ddm(s, small_settings(3, 1, trial % 2 ? 50 : 0), d);
        CHECK(r.metrics.in_flight_at_end == 0);
        CHECK(r.metrics.seeded + r.metrics.spawned == r.metrics.retired);
    }
}

TEST_CASE("deadlock detector") {
    DdmSettings d;
    d.n_subdomains = 2;
    d.n_workers = 2;
    d.max_resident = 1;
    d.deadlock_timeout_s = 0.3;
    d.disable_loads_for_testing = true;
    CHECK_THROWS_AS(run_ddm(testing_support::sample_scene("cornell.scn"), small_settings(8, 1, 0), d), DeadlockError);
}

TEST_CASE("ddm settings validation") {
    DdmSettings d;
    d.n_subdomains = 3;
    CHECK_THROWS(d.validate());
    d = {};
    d.max_resident = 0;
    CHECK_THROWS(d.validate());
    d = {};
    d.n_workers = 0;
    CHECK_THROWS(d.validate());
}
