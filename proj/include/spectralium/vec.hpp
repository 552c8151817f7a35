#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace spectralium {

struct Vec2 {
    double u = 0.0;
    double v = 0.0;

    friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.u + b.u, a.v + b.v}; }
    friend Vec2 operator*(Vec2 a, double s) { return {a.u * s, a.v * s}; }
    friend Vec2 operator*(double s, Vec2 a) { return a * s; }
    friend bool operator==(const Vec2&, const Vec2&) = default;
};

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    double operator[](int axis) const { return axis == 0 ? x : (axis == 1 ? y : z); }
    double& operator[](int axis) { return axis == 0 ? x : (axis == 1 ? y : z); }

    Vec3 operator-() const { return {-x, -y, -z}; }
    Vec3& operator+=(Vec3 o) { x += o.x; y += o.y; z += o.z; return *this; }
    Vec3& operator-=(Vec3 o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
    Vec3& operator*=(double s) { x *= s; y *= s; z *= s; return *this; }

    friend Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
    friend Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
    friend Vec3 operator*(Vec3 a, double s) { return {a.x * s, a.y * s, a.z * s}; }
    friend Vec3 operator*(double s, Vec3 a) { return a * s; }
    friend Vec3 operator/(Vec3 a, double s) { return {a.x / s, a.y / s, a.z / s}; }
    friend bool operator==(const Vec3&, const Vec3&) = default;
};

inline double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

inline Vec3 cross(Vec3 a, Vec3 b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

inline double length(Vec3 a) { return std::sqrt(dot(a, a)); }
inline double length_squared(Vec3 a) { return dot(a, a); }
inline Vec3 normalize(Vec3 a) { return a / length(a); }

inline Vec3 min(Vec3 a, Vec3 b) { return {std::min(a.x, b.x), std::min(a.y, b.y), std::min(a.z, b.z)}; }
inline Vec3 max(Vec3 a, Vec3 b) { return {std::max(a.x, b.x), std::max(a.y, b.y), std::max(a.z, b.z)}; }

// Mirror reflection of an incoming direction about a normal.
inline Vec3 reflect(Vec3 d, Vec3 n) { return d - n * (2.0 * dot(d, n)); }

// Right-handed orthonormal frame around a unit vector.
inline void make_frame(Vec3 n, Vec3& t, Vec3& b) {
    const Vec3 helper = std::abs(n.x) > 0.9 ? Vec3{0.0, 1.0, 0.0} : Vec3{1.0, 0.0, 0.0};
    t = normalize(cross(helper, n));
    b = cross(n, t);
}

struct Box3 {
    Vec3 lo{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
            std::numeric_limits<double>::infinity()};
    Vec3 hi{-std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
            -std::numeric_limits<double>::infinity()};

    bool empty() const { return lo.x > hi.x || lo.y > hi.y || lo.z > hi.z; }
    void expand(Vec3 p) { lo = min(lo, p); hi = max(hi, p); }
    void expand(const Box3& b) { lo = min(lo, b.lo); hi = max(hi, b.hi); }
    Vec3 extent() const { return hi - lo; }
    Vec3 center() const { return (lo + hi) * 0.5; }
    double diagonal() const { return empty() ? 0.0 : length(hi - lo); }

    int longest_axis() const {
        const Vec3 e = extent();
        if (e.x >= e.y && e.x >= e.z) return 0;
        return e.y >= e.z ? 1 : 2;
    }

    bool contains(Vec3 p, double tolerance = 0.0) const {
        for (int a = 0; a < 3; ++a) {
            if (p[a] < lo[a] - tolerance || p[a] > hi[a] + tolerance) return false;
        }
        return true;
    }

    bool contains(const Box3& b) const { return contains(b.lo) && contains(b.hi); }

    bool overlaps(const Box3& b, double tolerance = 0.0) const {
        for (int a = 0; a < 3; ++a) {
            if (b.hi[a] < lo[a] - tolerance || b.lo[a] > hi[a] + tolerance) return false;
        }
        return true;
    }

    friend bool operator==(const Box3&, const Box3&) = default;
};

// Parametric interval of a ray inside a box. Returns false on a miss.
// `far_axis` receives the axis whose far plane bounds the interval.
inline bool slab_interval(const Box3& box, Vec3 origin, Vec3 dir, double& t0, double& t1,
                          int* far_axis = nullptr) {
    t0 = -std::numeric_limits<double>::infinity();
    t1 = std::numeric_limits<double>::infinity();
    int axis_hit = -1;
    for (int a = 0; a < 3; ++a) {
        if (dir[a] == 0.0) {
            if (origin[a] < box.lo[a] || origin[a] > box.hi[a]) return false;
            continue;
        }
        const double inv = 1.0 / dir[a];
        double tn = (box.lo[a] - origin[a]) * inv;
        double tf = (box.hi[a] - origin[a]) * inv;
        if (tn > tf) std::swap(tn, tf);
        t0 = std::max(t0, tn);
        if (tf < t1) {
            t1 = tf;
            axis_hit = a;
        }
    }
    if (far_axis) *far_axis = axis_hit;
    return t0 <= t1;
}

}  // namespace spectralium
