#include "spectralium/colorimetry.hpp"

#include "embedded_data.hpp"
#include "spectralium/error.hpp"

#include <algorithm>
#include <cmath>

namespace spectralium {

ObserverCMF parse_cmf(std::string_view text, const WavelengthGrid& grid, const std::string& source) {
    const auto rows = parse_tabulated(text, 3, source);
    return ObserverCMF{grid, resample(rows, 0, grid), resample(rows, 1, grid), resample(rows, 2, grid)};
}

ObserverCMF load_cmf(const std::filesystem::path& path, const WavelengthGrid& grid) {
    return parse_cmf(read_text_file(path), grid, path.string());
}

const ObserverCMF& ObserverCMF::cie1931() {
    static const ObserverCMF cmf = parse_cmf(embedded::cie1931_cmf, WavelengthGrid{}, "cie1931_2deg_5nm.cmf");
    return cmf;
}

const Spectrum& d65_illuminant() {
    static const Spectrum d65 = parse_spd(embedded::d65_spd, WavelengthGrid{}, "d65_5nm.spd");
    return d65;
}

XYZ spectrum_to_xyz(const Spectrum& radiance, const ObserverCMF& cmf) {
    if (!(radiance.grid() == cmf.grid)) throw DomainError("spectrum_to_xyz: grid mismatch");
    XYZ out;
    for (std::size_t i = 0; i < radiance.size(); ++i) {
        out.X += radiance[i] * cmf.xbar[i];
        out.Y += radiance[i] * cmf.ybar[i];
        out.Z += radiance[i] * cmf.zbar[i];
    }
    const double step = cmf.grid.step_nm();
    return out * step;
}

RGB xyz_to_linear_srgb(const XYZ& c) {
    return {3.2404542 * c.X - 1.5371385 * c.Y - 0.4985314 * c.Z,
            -0.9692660 * c.X + 1.8760108 * c.Y + 0.0415560 * c.Z,
            0.0556434 * c.X - 0.2040259 * c.Y + 1.0572252 * c.Z};
}

double srgb_encode(double linear) {
    if (linear <= 0.0031308) return 12.92 * linear;
    return 1.055 * std::pow(linear, 1.0 / 2.4) - 0.055;
}

RGB xyz_to_srgb(const XYZ& xyz, double white_luminance) {
    if (!(white_luminance > 0.0)) throw DomainError("xyz_to_srgb: white luminance must be positive");
    const RGB lin = xyz_to_linear_srgb(xyz * (1.0 / white_luminance));
    auto encode = [](double v) { return srgb_encode(std::clamp(v, 0.0, 1.0)); };
    return {encode(lin.r), encode(lin.g), encode(lin.b)};
}

Chromaticity chromaticity(const XYZ& xyz) {
    const double sum = xyz.X + xyz.Y + xyz.Z;
    if (!(sum > 0.0)) throw DomainError("chromaticity: X+Y+Z must be positive");
    return {xyz.X / sum, xyz.Y / sum};
}

}  // namespace spectralium
