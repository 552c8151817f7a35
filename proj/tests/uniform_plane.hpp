#pragma once

// Photons spread uniformly over a square on the plane y = 0, arriving from
// above with total irradiance E. Shared by the unit and acceptance tests.

#include "spectralium/photon_map.hpp"
#include "spectralium/render.hpp"

#include <cmath>
#include <random>

namespace uniform_plane {

using namespace spectralium;

inline PhotonMap build(std::vector<Vec3> positions, double half_size, double E) {
    const WavelengthGrid g;
    const double area = 4.0 * half_size * half_size;
    const Spectrum flux(g, E * area / static_cast<double>(positions.size()));
    std::vector<Photon> photons;
    photons.reserve(positions.size());
    for (const Vec3& p : positions) photons.push_back({p, {0, -1, 0}, flux});
    const std::size_t emitted = photons.size();
    return PhotonMap(std::move(photons), emitted);
}

// One jittered photon per cell of a square grid (n is rounded up to a square).
inline PhotonMap stratified(int n, double half_size, double E, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const int side = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n))));
    const double cell = 2.0 * half_size / side;
    std::vector<Vec3> pos;
    for (int i = 0; i < side; ++i) {
        for (int j = 0; j < side; ++j) {
            pos.push_back({-half_size + (i + u(rng)) * cell, 0.0, -half_size + (j + u(rng)) * cell});
        }
    }
    return build(std::move(pos), half_size, E);
}

inline PhotonMap random(int n, double half_size, double E, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-half_size, half_size);
    std::vector<Vec3> pos;
    for (int i = 0; i < n; ++i) pos.push_back({u(rng), 0.0, u(rng)});
    return build(std::move(pos), half_size, E);
}

// |estimate - exact| / exact at the plane centre, worst over wavelengths.
inline double relative_error(const PhotonMap& map, std::size_t k, double rho, double exact) {
    const WavelengthGrid g;
    Hit hit;
    hit.normal = {0, 1, 0};
    hit.shading_normal = hit.normal;
    const Spectrum L = estimate_radiance(map, hit, {0, 1, 0}, k, INFINITY, Spectrum(g, rho));
    double worst = 0.0;
    for (std::size_t i = 0; i < L.size(); ++i) worst = std::max(worst, std::abs(L[i] - exact) / exact);
    return worst;
}

}  // namespace uniform_plane
