#include "spectralium/geometry.hpp"

#include <algorithm>
#include <numeric>

namespace spectralium {

Box3 Triangle::bounds() const {
    Box3 b;
    for (const Vec3& v : p) b.expand(v);
    return b;
}

bool intersect_triangle(const Triangle& tri, Vec3 origin, Vec3 dir, double t_min, double t_max, double& t,
                        double& b1, double& b2) {
    const Vec3 e1 = tri.p[1] - tri.p[0];
    const Vec3 e2 = tri.p[2] - tri.p[0];
    const Vec3 pv = cross(dir, e2);
    const double det = dot(e1, pv);
    if (std::abs(det) <= 1e-14 * length(e1) * length(e2)) return false;
    const double inv = 1.0 / det;
    const Vec3 tv = origin - tri.p[0];
    const double u = dot(tv, pv) * inv;
    if (u < 0.0 || u > 1.0) return false;
    const Vec3 qv = cross(tv, e1);
    const double v = dot(dir, qv) * inv;
    if (v < 0.0 || u + v > 1.0) return false;
    const double tt = dot(e2, qv) * inv;
    if (!(tt > t_min && tt < t_max)) return false;
    t = tt;
    b1 = u;
    b2 = v;
    return true;
}

Hit make_hit(const Triangle& tri, Vec3 origin, Vec3 dir, double t, double b1, double b2) {
    const double b0 = 1.0 - b1 - b2;
    Hit h;
    h.t = t;
    h.point = origin + dir * t;
    h.normal = tri.geometric_normal();
    if (dot(h.normal, dir) > 0.0) h.normal = -h.normal;
    Vec3 ns = tri.n[0] * b0 + tri.n[1] * b1 + tri.n[2] * b2;
    const double len = length(ns);
    ns = len > 0.0 ? ns / len : h.normal;
    if (dot(ns, h.normal) < 0.0) ns = -ns;
    h.shading_normal = ns;
    h.uv = tri.uv[0] * b0 + tri.uv[1] * b1 + tri.uv[2] * b2;
    h.material_id = tri.material_id;
    h.triangle_id = tri.id;
    return h;
}

SpatialIndex::SpatialIndex(std::vector<Triangle> triangles) : triangles_(std::move(triangles)) {
    if (triangles_.empty()) return;
    nodes_.reserve(2 * triangles_.size() / kMaxLeafSize + 1);
    build(0, triangles_.size());
}

std::uint32_t SpatialIndex::build(std::size_t begin, std::size_t end) {
    const auto index = static_cast<std::uint32_t>(nodes_.size());
    nodes_.emplace_back();
    Box3 box, centroids;
    for (std::size_t i = begin; i < end; ++i) {
        box.expand(triangles_[i].bounds());
        centroids.expand(triangles_[i].centroid());
    }
    nodes_[index].box = box;
    if (end - begin <= kMaxLeafSize) {
        nodes_[index].first = static_cast<std::uint32_t>(begin);
        nodes_[index].count = static_cast<std::uint32_t>(end - begin);
        return index;
    }
    const int axis = centroids.longest_axis();
    std::sort(triangles_.begin() + static_cast<long>(begin), triangles_.begin() + static_cast<long>(end),
              [axis](const Triangle& a, const Triangle& b) {
                  const double ca = a.centroid()[axis], cb = b.centroid()[axis];
                  return ca < cb || (ca == cb && a.id < b.id);
              });
    const std::size_t mid = begin + (end - begin) / 2;
    build(begin, mid);
    const std::uint32_t right = build(mid, end);
    nodes_[index].first = right;
    return index;
}

namespace {

// Slab test with a small inflation so that geometry lying on a node face
// is never culled by rounding.
bool hit_box(const Box3& box, Vec3 origin, Vec3 inv_dir, double t_min, double t_max, double& t_entry) {
    double t0 = t_min, t1 = t_max;
    for (int a = 0; a < 3; ++a) {
        double tn = (box.lo[a] - origin[a]) * inv_dir[a];
        double tf = (box.hi[a] - origin[a]) * inv_dir[a];
        if (tn > tf) std::swap(tn, tf);
        tf *= 1.0 + 4.0 * std::numeric_limits<double>::epsilon();
        // NaN from 0 * inf (origin on a slab plane of a flat box) keeps the bound unchanged.
        if (tn > t0) t0 = tn;
        if (tf < t1) t1 = tf;
        if (t0 > t1) return false;
    }
    t_entry = t0;
    return true;
}

}  // namespace

template <bool AnyHit>
bool SpatialIndex::traverse(Vec3 origin, Vec3 dir, double t_min, double t_max, std::uint32_t& best_index,
                            double& best_t, double& best_b1, double& best_b2) const {
    if (nodes_.empty()) return false;
    const Vec3 inv{1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z};
    bool found = false;
    best_t = t_max;
    std::uint32_t best_id = std::numeric_limits<std::uint32_t>::max();
    std::uint32_t stack[128];
    int top = 0;
    stack[top++] = 0;
    while (top > 0) {
        const Node& node = nodes_[stack[--top]];
        double t_entry;
        // Nodes entered exactly at best_t may still hold a lower-id tie.
        if (!hit_box(node.box, origin, inv, t_min, found ? best_t : t_max, t_entry)) continue;
        if (node.count > 0) {
            for (std::uint32_t i = node.first; i < node.first + node.count; ++i) {
                double t, b1, b2;
                const double limit = found ? std::nextafter(best_t, std::numeric_limits<double>::infinity()) : t_max;
                if (!intersect_triangle(triangles_[i], origin, dir, t_min, limit, t, b1, b2)) continue;
                if (found && !closer(t, triangles_[i].id, best_t, best_id)) continue;
                found = true;
                best_t = t;
                best_id = triangles_[i].id;
                best_index = i;
                best_b1 = b1;
                best_b2 = b2;
                if constexpr (AnyHit) return true;
            }
        } else {
            const std::uint32_t left = static_cast<std::uint32_t>(&node - nodes_.data()) + 1;
            // Visit the child nearer along the ray first.
            const Vec3 lc = nodes_[left].box.center() - origin;
            const Vec3 rc = nodes_[node.first].box.center() - origin;
            if (dot(lc, dir) <= dot(rc, dir)) {
                stack[top++] = node.first;
                stack[top++] = left;
            } else {
                stack[top++] = left;
                stack[top++] = node.first;
            }
        }
    }
    return found;
}

std::optional<Hit> SpatialIndex::intersect(Vec3 origin, Vec3 dir, double t_min, double t_max) const {
    std::uint32_t index = 0;
    double t = 0.0, b1 = 0.0, b2 = 0.0;
    if (!traverse<false>(origin, dir, t_min, t_max, index, t, b1, b2)) return std::nullopt;
    return make_hit(triangles_[index], origin, dir, t, b1, b2);
}

bool SpatialIndex::occluded(Vec3 origin, Vec3 dir, double t_min, double t_max) const {
    std::uint32_t index = 0;
    double t = 0.0, b1 = 0.0, b2 = 0.0;
    return traverse<true>(origin, dir, t_min, t_max, index, t, b1, b2);
}

}  // namespace spectralium
