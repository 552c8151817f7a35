#pragma once

#include "spectralium/spectral.hpp"

#include <array>
#include <filesystem>

namespace spectralium {

// Colour-matching functions of a standard observer, on the session grid.
struct ObserverCMF {
    WavelengthGrid grid;
    std::vector<double> xbar;
    std::vector<double> ybar;
    std::vector<double> zbar;

    // CIE 1931 2-degree observer from the table shipped in data/.
    static const ObserverCMF& cie1931();
};

struct XYZ {
    double X = 0.0;
    double Y = 0.0;
    double Z = 0.0;

    friend XYZ operator+(XYZ a, XYZ b) { return {a.X + b.X, a.Y + b.Y, a.Z + b.Z}; }
    friend XYZ operator*(XYZ a, double s) { return {a.X * s, a.Y * s, a.Z * s}; }
    friend bool operator==(const XYZ&, const XYZ&) = default;
};

struct RGB {
    double r = 0.0;
    double g = 0.0;
    double b = 0.0;
};

ObserverCMF parse_cmf(std::string_view text, const WavelengthGrid& grid, const std::string& source = "<cmf>");
ObserverCMF load_cmf(const std::filesystem::path& path, const WavelengthGrid& grid = {});

// CIE D65 relative spectral power, from the shipped table.
const Spectrum& d65_illuminant();

// Rectangle-rule integration against the CMFs; no normalization.
XYZ spectrum_to_xyz(const Spectrum& radiance, const ObserverCMF& cmf = ObserverCMF::cie1931());

// Linear sRGB (D65) before clamping and encoding.
RGB xyz_to_linear_srgb(const XYZ& xyz);

// Normalize by white_luminance, convert to linear sRGB, clamp each channel
// into [0,1] and apply the sRGB transfer curve.
RGB xyz_to_srgb(const XYZ& xyz, double white_luminance);

double srgb_encode(double linear);

struct Chromaticity {
    double x;
    double y;
};

Chromaticity chromaticity(const XYZ& xyz);

}  // namespace spectralium
