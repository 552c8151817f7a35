#pragma once

#include "spectralium/vec.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace spectralium {

struct Triangle {
    std::array<Vec3, 3> p;
    std::array<Vec3, 3> n;  // shading normals at the vertices
    std::array<Vec2, 3> uv;
    int material_id = 0;
    std::uint32_t id = 0;  // scene-global triangle id

    Box3 bounds() const;
    Vec3 centroid() const { return (p[0] + p[1] + p[2]) / 3.0; }
    Vec3 geometric_normal() const { return normalize(cross(p[1] - p[0], p[2] - p[0])); }
    double area() const { return 0.5 * length(cross(p[1] - p[0], p[2] - p[0])); }

    friend bool operator==(const Triangle&, const Triangle&) = default;
};

struct Hit {
    double t = 0.0;
    Vec3 point;
    Vec3 normal;          // geometric, facing the incoming ray
    Vec3 shading_normal;  // interpolated, on the same side as `normal`
    Vec2 uv;
    int material_id = 0;
    std::uint32_t triangle_id = 0;
};

// Moller-Trumbore. On success writes the ray parameter and barycentrics.
bool intersect_triangle(const Triangle& tri, Vec3 origin, Vec3 dir, double t_min, double t_max, double& t,
                        double& b1, double& b2);

Hit make_hit(const Triangle& tri, Vec3 origin, Vec3 dir, double t, double b1, double b2);

// Nearest-hit preference: smaller t wins, exact ties go to the lower id.
inline bool closer(double t, std::uint32_t id, double best_t, std::uint32_t best_id) {
    return t < best_t || (t == best_t && id < best_id);
}

/// Bounding-volume hierarchy over triangles. Internal nodes split at the
/// centroid median along the longest axis; leaves hold at most four
/// triangles. Immutable after construction.
class SpatialIndex {
  public:
    struct Node {
        Box3 box;
        std::uint32_t first = 0;  // leaf: first triangle; interior: right child
        std::uint32_t count = 0;  // 0 for interior nodes
    };

    static constexpr std::size_t kMaxLeafSize = 4;

    SpatialIndex() = default;
    explicit SpatialIndex(std::vector<Triangle> triangles);

    std::optional<Hit> intersect(Vec3 origin, Vec3 dir, double t_min, double t_max) const;
    bool occluded(Vec3 origin, Vec3 dir, double t_min, double t_max) const;

    bool empty() const { return triangles_.empty(); }
    std::size_t size() const { return triangles_.size(); }
    Box3 bounds() const { return nodes_.empty() ? Box3{} : nodes_.front().box; }
    std::span<const Triangle> triangles() const { return triangles_; }
    std::span<const Node> nodes() const { return nodes_; }

  private:
    std::uint32_t build(std::size_t begin, std::size_t end);
    template <bool AnyHit>
    bool traverse(Vec3 origin, Vec3 dir, double t_min, double t_max, std::uint32_t& best_index, double& best_t,
                  double& best_b1, double& best_b2) const;

    std::vector<Triangle> triangles_;
    std::vector<Node> nodes_;
};

}  // namespace spectralium
