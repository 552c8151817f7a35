#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace spectralium {

/// Uniform sampling of the visible band shared by every spectrum of a
/// computation. The default is 380-780 nm at 5 nm (81 samples).
class WavelengthGrid {
  public:
    WavelengthGrid() = default;
    WavelengthGrid(double start_nm, double step_nm, std::size_t count);

    double start_nm() const { return start_nm_; }
    double step_nm() const { return step_nm_; }
    std::size_t count() const { return count_; }
    double wavelength(std::size_t i) const { return start_nm_ + static_cast<double>(i) * step_nm_; }
    double end_nm() const { return wavelength(count_ - 1); }

    // Index of the sample nearest to a wavelength, clamped to the grid.
    std::size_t nearest_index(double nm) const;

    friend bool operator==(const WavelengthGrid&, const WavelengthGrid&) = default;

  private:
    double start_nm_ = 380.0;
    double step_nm_ = 5.0;
    std::size_t count_ = 81;
};

class Spectrum {
  public:
    Spectrum() : Spectrum(WavelengthGrid{}) {}
    explicit Spectrum(const WavelengthGrid& grid, double fill = 0.0)
        : grid_(grid), values_(grid.count(), fill) {}
    Spectrum(const WavelengthGrid& grid, std::vector<double> values);

    static Spectrum constant(const WavelengthGrid& grid, double value) { return Spectrum(grid, value); }

    const WavelengthGrid& grid() const { return grid_; }
    std::size_t size() const { return values_.size(); }
    double operator[](std::size_t i) const { return values_[i]; }
    double& operator[](std::size_t i) { return values_[i]; }
    std::span<const double> values() const { return values_; }
    std::span<double> values() { return values_; }

    double average() const;
    double max_value() const;
    double min_value() const;
    bool is_zero() const;

    // Value at an arbitrary wavelength by linear interpolation, clamped at the ends.
    double at_wavelength(double nm) const;

    Spectrum& operator+=(const Spectrum& o);
    Spectrum& operator*=(const Spectrum& o);
    Spectrum& operator*=(double s);

    friend Spectrum operator+(Spectrum a, const Spectrum& b) { return a += b; }
    friend Spectrum operator*(Spectrum a, const Spectrum& b) { return a *= b; }
    friend Spectrum operator*(Spectrum a, double s) { return a *= s; }
    friend Spectrum operator*(double s, Spectrum a) { return a *= s; }
    friend bool operator==(const Spectrum&, const Spectrum&) = default;

  private:
    void check_grid(const Spectrum& o) const;

    WavelengthGrid grid_;
    std::vector<double> values_;
};

/// Complex index of refraction n + ik sampled on the grid.
class ComplexIOR {
  public:
    ComplexIOR() : ComplexIOR(WavelengthGrid{}, 1.0, 0.0) {}
    ComplexIOR(const WavelengthGrid& grid, std::vector<double> n, std::vector<double> k);
    ComplexIOR(const WavelengthGrid& grid, double n, double k)
        : ComplexIOR(grid, std::vector<double>(grid.count(), n), std::vector<double>(grid.count(), k)) {}

    const WavelengthGrid& grid() const { return grid_; }
    double n(std::size_t i) const { return n_[i]; }
    double k(std::size_t i) const { return k_[i]; }
    // Index of absorption: k / n.
    double kappa(std::size_t i) const { return k_[i] / n_[i]; }
    bool absorbing() const;

    std::span<const double> n_values() const { return n_; }
    std::span<const double> k_values() const { return k_; }

    friend bool operator==(const ComplexIOR&, const ComplexIOR&) = default;

  private:
    WavelengthGrid grid_;
    std::vector<double> n_;
    std::vector<double> k_;
};

/// Per-texel spectral transmittance, addressed by texture coordinates.
class TransmittanceMap {
  public:
    TransmittanceMap() = default;
    TransmittanceMap(std::size_t width, std::size_t height, std::vector<Spectrum> texels);

    static TransmittanceMap uniform(const WavelengthGrid& grid, double value);

    std::size_t width() const { return width_; }
    std::size_t height() const { return height_; }
    const Spectrum& texel(std::size_t x, std::size_t y) const { return texels_[y * width_ + x]; }
    std::span<const Spectrum> texels() const { return texels_; }

    friend bool operator==(const TransmittanceMap&, const TransmittanceMap&) = default;

  private:
    std::size_t width_ = 0;
    std::size_t height_ = 0;
    std::vector<Spectrum> texels_;
};

// One tabulated row of a wavelength-keyed text file.
struct TabulatedRow {
    double wavelength_nm;
    std::vector<double> values;
};

// Parses `wavelength, v1[, v2 ...]` lines. `#` starts a comment; blank
// lines are skipped. Wavelengths must be strictly ascending.
std::vector<TabulatedRow> parse_tabulated(std::string_view text, std::size_t value_columns,
                                          const std::string& source, int first_line = 1);

// Linear interpolation of tabulated data onto the grid with endpoint clamping.
std::vector<double> resample(std::span<const TabulatedRow> rows, std::size_t column,
                             const WavelengthGrid& grid);

Spectrum parse_spd(std::string_view text, const WavelengthGrid& grid, const std::string& source = "<spd>");
Spectrum load_spd(const std::filesystem::path& path, const WavelengthGrid& grid = {});

// IOR files carry two value columns: `wavelength, n, k`.
ComplexIOR load_ior(const std::filesystem::path& path, const WavelengthGrid& grid = {});

// Header `width height`, then width*height SPD blocks in row-major order
// separated by blank lines.
TransmittanceMap load_transmittance_map(const std::filesystem::path& path, const WavelengthGrid& grid = {});

void write_spd(const std::filesystem::path& path, const Spectrum& s);
void write_ior(const std::filesystem::path& path, const ComplexIOR& ior);
void write_transmittance_map(const std::filesystem::path& path, const TransmittanceMap& map);

std::string read_text_file(const std::filesystem::path& path);

// Unpolarized power reflectance at an interface, from the exact complex
// Fresnel amplitudes for s and p polarization. `outside` is the medium the
// ray travels in and must be non-absorbing at the sample.
double fresnel_reflectance(const ComplexIOR& outside, const ComplexIOR& inside, double cos_theta_i,
                           std::size_t wavelength_index);

// 1 - R; only defined for a non-absorbing inside medium.
double fresnel_transmittance(const ComplexIOR& outside, const ComplexIOR& inside, double cos_theta_i,
                             std::size_t wavelength_index);

// Scalar form used by both of the above.
double fresnel_reflectance(double n_outside, double n_inside, double k_inside, double cos_theta_i);

// Bilinear, repeat-wrapped lookup.
Spectrum sample_transmittance_map(const TransmittanceMap& map, double u, double v);

}  // namespace spectralium
