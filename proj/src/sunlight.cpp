#include "spectralium/sunlight.hpp"

#include "spectralium/error.hpp"

#include <cmath>
#include <numbers>

namespace spectralium {

namespace {

constexpr double kPlanck = 6.62607015e-34;
constexpr double kLightSpeed = 2.99792458e8;
constexpr double kBoltzmann = 1.380649e-23;
constexpr double kMaxAirmass = 40.0;

double radians(double deg) { return deg * std::numbers::pi / 180.0; }

}  // namespace

Spectrum blackbody_spectrum(double temperature_K, const WavelengthGrid& grid) {
    if (!(temperature_K > 0.0)) throw DomainError("blackbody: temperature must be positive");
    Spectrum s(grid);
    for (std::size_t i = 0; i < grid.count(); ++i) {
        const double lambda = grid.wavelength(i) * 1e-9;
        const double x = kPlanck * kLightSpeed / (lambda * kBoltzmann * temperature_K);
        s[i] = 2.0 * kPlanck * kLightSpeed * kLightSpeed / std::pow(lambda, 5) / std::expm1(x);
    }
    const double peak = s.max_value();
    if (peak > 0.0) s *= 1.0 / peak;
    return s;
}

double rayleigh_transmission(double wavelength_nm, double airmass_value, double tau_550) {
    if (!(wavelength_nm > 0.0)) throw DomainError("rayleigh: wavelength must be positive");
    if (!(airmass_value >= 1.0)) throw DomainError("rayleigh: airmass must be >= 1");
    if (!(tau_550 >= 0.0)) throw DomainError("rayleigh: tau_550 must be >= 0");
    const double ratio = 550.0 / wavelength_nm;
    return std::exp(-tau_550 * ratio * ratio * ratio * ratio * airmass_value);
}

double airmass(double sun_elevation_deg) {
    if (!(sun_elevation_deg > 0.0)) throw DomainError("airmass: sun is below the horizon");
    if (sun_elevation_deg > 90.0) throw DomainError("airmass: elevation exceeds 90 degrees");
    return std::min(1.0 / std::sin(radians(sun_elevation_deg)), kMaxAirmass);
}

Spectrum solar_spectrum(double temperature_K, double sun_elevation_deg, double tau_550, double power_scale,
                        const WavelengthGrid& grid) {
    if (!(power_scale >= 0.0)) throw DomainError("solar_spectrum: power_scale must be >= 0");
    const double m = airmass(sun_elevation_deg);
    Spectrum s = blackbody_spectrum(temperature_K, grid);
    for (std::size_t i = 0; i < grid.count(); ++i) {
        s[i] *= power_scale * rayleigh_transmission(grid.wavelength(i), m, tau_550);
    }
    return s;
}

Vec3 sun_vector(double elevation_deg, double azimuth_deg) {
    const double e = radians(elevation_deg);
    const double a = radians(azimuth_deg);
    return normalize(Vec3{std::cos(e) * std::sin(a), std::sin(e), std::cos(e) * std::cos(a)});
}

SunLight make_sun(const SunParameters& p, const WavelengthGrid& grid) {
    return SunLight{-sun_vector(p.elevation_deg, p.azimuth_deg),
                    solar_spectrum(p.temperature_K, p.elevation_deg, p.tau_550, p.power_scale, grid), p};
}

}  // namespace spectralium
