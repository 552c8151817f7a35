#pragma once

#include "spectralium/spectral.hpp"
#include "spectralium/vec.hpp"

namespace spectralium {

struct SunParameters {
    double elevation_deg = 45.0;
    double azimuth_deg = 0.0;
    double temperature_K = 5778.0;
    double tau_550 = 0.1;
    double power_scale = 1.0;

    friend bool operator==(const SunParameters&, const SunParameters&) = default;
};

// Ideal directional source. `direction` points from the sun toward the scene.
struct SunLight {
    Vec3 direction;
    Spectrum emission;
    SunParameters parameters;
};

// Planck radiance at each grid wavelength, scaled so the largest sample is 1.
Spectrum blackbody_spectrum(double temperature_K, const WavelengthGrid& grid = {});

// exp(-tau_550 * (550/lambda)^4 * airmass)
double rayleigh_transmission(double wavelength_nm, double airmass, double tau_550);

// Plane-parallel atmosphere, 1/sin(elevation), capped at 40.
double airmass(double sun_elevation_deg);

Spectrum solar_spectrum(double temperature_K, double sun_elevation_deg, double tau_550, double power_scale,
                        const WavelengthGrid& grid = {});

// Unit vector from the scene toward the sun; +y is up, azimuth is measured
// from +z toward +x.
Vec3 sun_vector(double elevation_deg, double azimuth_deg);

SunLight make_sun(const SunParameters& p, const WavelengthGrid& grid = {});

}  // namespace spectralium
