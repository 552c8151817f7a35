#include "spectralium/photon_map.hpp"

#include <algorithm>
#include <numeric>

namespace spectralium {

PhotonMap::PhotonMap(std::vector<Photon> photons, std::size_t emitted_count)
    : photons_(std::move(photons)), split_axis_(photons_.size(), 0), emitted_count_(emitted_count) {
    build(0, photons_.size());
}

void PhotonMap::build(std::size_t begin, std::size_t end) {
    // Photons are permuted in place into an implicit tree: the median of
    // each range is the node, the halves on either side its subtrees.
    while (end - begin > 1) {
        Box3 box;
        for (std::size_t i = begin; i < end; ++i) box.expand(photons_[i].position);
        const int axis = box.longest_axis();
        const std::size_t mid = begin + (end - begin) / 2;
        std::nth_element(photons_.begin() + static_cast<long>(begin), photons_.begin() + static_cast<long>(mid),
                         photons_.begin() + static_cast<long>(end), [axis](const Photon& a, const Photon& b) {
                             return a.position[axis] < b.position[axis];
                         });
        split_axis_[mid] = static_cast<std::uint8_t>(axis);
        build(begin, mid);
        begin = mid + 1;
    }
}

}  // namespace spectralium
