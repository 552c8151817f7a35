#pragma once

#include "spectralium/spectral.hpp"
#include "spectralium/vec.hpp"

#include <algorithm>
#include <cstdint>
#include <limits>
#include <queue>
#include <vector>

namespace spectralium {

struct Photon {
    Vec3 position;
    Vec3 incident_direction;  // direction of travel when the photon landed
    Spectrum flux;
};

/// Balanced kd-tree over stored photons. Built once, then read-only.
class PhotonMap {
  public:
    struct Neighbor {
        std::uint32_t index;
        double distance_squared;
    };

    PhotonMap() = default;
    PhotonMap(std::vector<Photon> photons, std::size_t emitted_count);

    std::size_t size() const { return photons_.size(); }
    bool empty() const { return photons_.empty(); }
    std::size_t emitted_count() const { return emitted_count_; }
    const Photon& photon(std::size_t i) const { return photons_[i]; }
    const std::vector<Photon>& photons() const { return photons_; }

    // The min(k, size) nearest photons within r_max, sorted by distance
    // (ties by index).
    std::vector<Neighbor> nearest(Vec3 p, std::size_t k,
                                  double r_max = std::numeric_limits<double>::infinity()) const {
        return nearest_if(p, k, r_max, [](const Photon&) { return true; });
    }

    template <class Predicate>
    std::vector<Neighbor> nearest_if(Vec3 p, std::size_t k, double r_max, Predicate&& accept) const;

  private:
    void build(std::size_t begin, std::size_t end);

    std::vector<Photon> photons_;
    std::vector<std::uint8_t> split_axis_;
    std::size_t emitted_count_ = 0;
};

template <class Predicate>
std::vector<PhotonMap::Neighbor> PhotonMap::nearest_if(Vec3 p, std::size_t k, double r_max,
                                                       Predicate&& accept) const {
    std::vector<Neighbor> out;
    if (k == 0 || photons_.empty()) return out;
    auto worse = [](const Neighbor& a, const Neighbor& b) {
        return a.distance_squared < b.distance_squared ||
               (a.distance_squared == b.distance_squared && a.index < b.index);
    };
    std::priority_queue<Neighbor, std::vector<Neighbor>, decltype(worse)> heap(worse);
    double bound = r_max * r_max;

    struct Range {
        std::size_t begin, end;
    };
    std::vector<Range> stack;
    stack.push_back({0, photons_.size()});
    while (!stack.empty()) {
        const Range r = stack.back();
        stack.pop_back();
        if (r.begin >= r.end) continue;
        const std::size_t mid = r.begin + (r.end - r.begin) / 2;
        const Photon& ph = photons_[mid];
        const int axis = split_axis_[mid];
        const double delta = p[axis] - ph.position[axis];

        const double d2 = length_squared(ph.position - p);
        if (d2 <= bound && accept(ph)) {
            const Neighbor n{static_cast<std::uint32_t>(mid), d2};
            if (heap.size() < k) {
                heap.push(n);
            } else if (worse(n, heap.top())) {
                heap.pop();
                heap.push(n);
            }
            if (heap.size() == k) bound = std::min(bound, heap.top().distance_squared);
        }

        const Range near = delta < 0.0 ? Range{r.begin, mid} : Range{mid + 1, r.end};
        const Range far = delta < 0.0 ? Range{mid + 1, r.end} : Range{r.begin, mid};
        if (delta * delta <= bound) stack.push_back(far);
        stack.push_back(near);
    }
    out.reserve(heap.size());
    while (!heap.empty()) {
        out.push_back(heap.top());
        heap.pop();
    }
    std::reverse(out.begin(), out.end());
    return out;
}

}  // namespace spectralium
