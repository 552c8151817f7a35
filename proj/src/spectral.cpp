#include "spectralium/spectral.hpp"

#include "spectralium/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace spectralium {

WavelengthGrid::WavelengthGrid(double start_nm, double step_nm, std::size_t count)
    : start_nm_(start_nm), step_nm_(step_nm), count_(count) {
    if (!(step_nm > 0.0)) throw DomainError("wavelength grid step must be positive");
    if (count < 2) throw DomainError("wavelength grid needs at least two samples");
}

std::size_t WavelengthGrid::nearest_index(double nm) const {
    const double x = std::round((nm - start_nm_) / step_nm_);
    if (x <= 0.0) return 0;
    return std::min(static_cast<std::size_t>(x), count_ - 1);
}

Spectrum::Spectrum(const WavelengthGrid& grid, std::vector<double> values)
    : grid_(grid), values_(std::move(values)) {
    if (values_.size() != grid_.count()) throw DomainError("spectrum length does not match its grid");
}

void Spectrum::check_grid(const Spectrum& o) const {
    if (!(grid_ == o.grid_)) throw DomainError("spectra sampled on different wavelength grids");
}

double Spectrum::average() const {
    double sum = 0.0;
    for (double v : values_) sum += v;
    return sum / static_cast<double>(values_.size());
}

double Spectrum::max_value() const { return *std::max_element(values_.begin(), values_.end()); }
double Spectrum::min_value() const { return *std::min_element(values_.begin(), values_.end()); }

bool Spectrum::is_zero() const {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return v == 0.0; });
}

double Spectrum::at_wavelength(double nm) const {
    const double x = (nm - grid_.start_nm()) / grid_.step_nm();
    if (x <= 0.0) return values_.front();
    const auto last = static_cast<double>(values_.size() - 1);
    if (x >= last) return values_.back();
    const auto i = static_cast<std::size_t>(x);
    const double f = x - static_cast<double>(i);
    return values_[i] + f * (values_[i + 1] - values_[i]);
}

Spectrum& Spectrum::operator+=(const Spectrum& o) {
    check_grid(o);
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += o.values_[i];
    return *this;
}

Spectrum& Spectrum::operator*=(const Spectrum& o) {
    check_grid(o);
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] *= o.values_[i];
    return *this;
}

Spectrum& Spectrum::operator*=(double s) {
    for (double& v : values_) v *= s;
    return *this;
}

ComplexIOR::ComplexIOR(const WavelengthGrid& grid, std::vector<double> n, std::vector<double> k)
    : grid_(grid), n_(std::move(n)), k_(std::move(k)) {
    if (n_.size() != grid_.count() || k_.size() != grid_.count()) {
        throw DomainError("IOR arrays do not match the wavelength grid");
    }
    for (std::size_t i = 0; i < n_.size(); ++i) {
        if (!(n_[i] > 0.0) || !std::isfinite(n_[i])) throw DomainError("optical index n must be positive");
        if (!(k_[i] >= 0.0) || !std::isfinite(k_[i])) throw DomainError("index of absorption k must be >= 0");
    }
}

bool ComplexIOR::absorbing() const {
    return std::any_of(k_.begin(), k_.end(), [](double k) { return k > 0.0; });
}

TransmittanceMap::TransmittanceMap(std::size_t width, std::size_t height, std::vector<Spectrum> texels)
    : width_(width), height_(height), texels_(std::move(texels)) {
    if (width_ == 0 || height_ == 0) throw DomainError("transmittance map must be at least 1x1");
    if (texels_.size() != width_ * height_) throw DomainError("transmittance map texel count mismatch");
    const WavelengthGrid& grid = texels_.front().grid();
    for (const Spectrum& t : texels_) {
        if (!(t.grid() == grid)) throw DomainError("transmittance map texels on different grids");
        if (t.min_value() < 0.0 || t.max_value() > 1.0) {
            throw DomainError("transmittance values must lie in [0,1]");
        }
    }
}

TransmittanceMap TransmittanceMap::uniform(const WavelengthGrid& grid, double value) {
    return TransmittanceMap(1, 1, {Spectrum(grid, value)});
}

namespace {

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string_view strip_comment(std::string_view line) {
    const auto hash = line.find('#');
    return trim(hash == std::string_view::npos ? line : line.substr(0, hash));
}

bool parse_double(std::string_view token, double& out) {
    token = trim(token);
    if (token.empty()) return false;
    if (token.front() == '+') token.remove_prefix(1);
    const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), out);
    return ec == std::errc{} && ptr == token.data() + token.size() && std::isfinite(out);
}

// Fields are comma separated; surrounding whitespace is ignored.
std::vector<std::string_view> split_fields(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t pos = 0;
    while (true) {
        const auto comma = line.find(',', pos);
        fields.push_back(trim(line.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos)));
        if (comma == std::string_view::npos) break;
        pos = comma + 1;
    }
    return fields;
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

std::vector<TabulatedRow> parse_tabulated(std::string_view text, std::size_t value_columns,
                                          const std::string& source, int first_line) {
    std::vector<TabulatedRow> rows;
    int line_no = first_line;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        const auto raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        const auto line = strip_comment(raw);
        if (!line.empty()) {
            const auto fields = split_fields(line);
            if (fields.size() != value_columns + 1) {
                throw ParseError(source, line_no,
                                 "expected " + std::to_string(value_columns + 1) + " fields, got " +
                                     std::to_string(fields.size()));
            }
            TabulatedRow row{0.0, std::vector<double>(value_columns)};
            if (!parse_double(fields[0], row.wavelength_nm)) {
                throw ParseError(source, line_no, "malformed wavelength '" + std::string(fields[0]) + "'");
            }
            for (std::size_t c = 0; c < value_columns; ++c) {
                if (!parse_double(fields[c + 1], row.values[c])) {
                    throw ParseError(source, line_no, "malformed value '" + std::string(fields[c + 1]) + "'");
                }
            }
            if (!rows.empty() && !(row.wavelength_nm > rows.back().wavelength_nm)) {
                throw FormatError(source + ":" + std::to_string(line_no) + ": wavelengths must be ascending");
            }
            rows.push_back(std::move(row));
        }
        if (nl == std::string_view::npos) break;
        pos = nl + 1;
        ++line_no;
    }
    if (rows.empty()) throw FormatError(source + ": no spectral data");
    return rows;
}

std::vector<double> resample(std::span<const TabulatedRow> rows, std::size_t column, const WavelengthGrid& grid) {
    std::vector<double> out(grid.count());
    for (std::size_t i = 0; i < grid.count(); ++i) {
        const double nm = grid.wavelength(i);
        if (nm <= rows.front().wavelength_nm) {
            out[i] = rows.front().values[column];
        } else if (nm >= rows.back().wavelength_nm) {
            out[i] = rows.back().values[column];
        } else {
            const auto hi = std::upper_bound(rows.begin(), rows.end(), nm,
                                             [](double w, const TabulatedRow& r) { return w < r.wavelength_nm; });
            const auto lo = hi - 1;
            const double f = (nm - lo->wavelength_nm) / (hi->wavelength_nm - lo->wavelength_nm);
            out[i] = lo->values[column] + f * (hi->values[column] - lo->values[column]);
        }
    }
    return out;
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Spectrum parse_spd(std::string_view text, const WavelengthGrid& grid, const std::string& source) {
    const auto rows = parse_tabulated(text, 1, source);
    return Spectrum(grid, resample(rows, 0, grid));
}

Spectrum load_spd(const std::filesystem::path& path, const WavelengthGrid& grid) {
    return parse_spd(read_text_file(path), grid, path.string());
}

ComplexIOR load_ior(const std::filesystem::path& path, const WavelengthGrid& grid) {
    const auto rows = parse_tabulated(read_text_file(path), 2, path.string());
    return ComplexIOR(grid, resample(rows, 0, grid), resample(rows, 1, grid));
}

TransmittanceMap load_transmittance_map(const std::filesystem::path& path, const WavelengthGrid& grid) {
    const std::string text = read_text_file(path);
    const std::string source = path.string();
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    long width = -1, height = -1;
    std::vector<Spectrum> texels;
    std::string block;
    int block_start = 0;

    auto flush = [&] {
        if (block.empty()) return;
        const auto rows = parse_tabulated(block, 1, source, block_start);
        texels.emplace_back(grid, resample(rows, 0, grid));
        block.clear();
    };

    while (std::getline(in, line)) {
        ++line_no;
        const auto content = strip_comment(line);
        if (width < 0) {
            if (content.empty()) continue;
            std::istringstream hs{std::string(content)};
            std::string extra;
            if (!(hs >> width >> height) || (hs >> extra) || width <= 0 || height <= 0) {
                throw ParseError(source, line_no, "expected header 'width height'");
            }
            continue;
        }
        if (trim(line).empty()) {
            flush();
            continue;
        }
        if (content.empty()) {
            if (!block.empty()) block += '\n';
            continue;
        }
        if (block.empty()) block_start = line_no;
        block.append(content);
        block += '\n';
    }
    flush();
    if (width < 0) throw FormatError(source + ": missing header");
    if (texels.size() != static_cast<std::size_t>(width * height)) {
        throw FormatError(source + ": expected " + std::to_string(width * height) + " texel blocks, found " +
                          std::to_string(texels.size()));
    }
    return TransmittanceMap(static_cast<std::size_t>(width), static_cast<std::size_t>(height), std::move(texels));
}

void write_spd(const std::filesystem::path& path, const Spectrum& s) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    for (std::size_t i = 0; i < s.size(); ++i) {
        out << format_double(s.grid().wavelength(i)) << ',' << format_double(s[i]) << '\n';
    }
}

void write_ior(const std::filesystem::path& path, const ComplexIOR& ior) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    for (std::size_t i = 0; i < ior.grid().count(); ++i) {
        out << format_double(ior.grid().wavelength(i)) << ',' << format_double(ior.n(i)) << ','
            << format_double(ior.k(i)) << '\n';
    }
}

void write_transmittance_map(const std::filesystem::path& path, const TransmittanceMap& map) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << map.width() << ' ' << map.height() << '\n';
    for (const Spectrum& t : map.texels()) {
        out << '\n';
        for (std::size_t i = 0; i < t.size(); ++i) {
            out << format_double(t.grid().wavelength(i)) << ',' << format_double(t[i]) << '\n';
        }
    }
}

double fresnel_reflectance(double n_outside, double n_inside, double k_inside, double cos_theta_i) {
    if (!(cos_theta_i > 0.0)) throw DomainError("fresnel: cos_theta_i must be in (0,1]");
    if (cos_theta_i > 1.0) {
        if (cos_theta_i > 1.0 + 1e-9) throw DomainError("fresnel: cos_theta_i must be in (0,1]");
        cos_theta_i = 1.0;
    }
    const double sin2_i = std::max(0.0, 1.0 - cos_theta_i * cos_theta_i);
    if (k_inside == 0.0) {
        const double ratio = n_outside / n_inside;
        if (ratio * ratio * sin2_i >= 1.0) return 1.0;
    }

    using C = std::complex<double>;
    const C eta_o(n_outside, 0.0);
    const C eta_i(n_inside, k_inside);
    const C sin_t = n_outside * std::sqrt(sin2_i) / eta_i;
    const C cos_t = std::sqrt(C(1.0, 0.0) - sin_t * sin_t);

    const C rs = (eta_o * cos_theta_i - eta_i * cos_t) / (eta_o * cos_theta_i + eta_i * cos_t);
    const C rp = (eta_i * cos_theta_i - eta_o * cos_t) / (eta_i * cos_theta_i + eta_o * cos_t);
    const double r = 0.5 * (std::norm(rs) + std::norm(rp));
    return std::clamp(r, 0.0, 1.0);
}

double fresnel_reflectance(const ComplexIOR& outside, const ComplexIOR& inside, double cos_theta_i,
                           std::size_t wavelength_index) {
    if (wavelength_index >= outside.grid().count() || wavelength_index >= inside.grid().count()) {
        throw DomainError("fresnel: wavelength index out of range");
    }
    if (outside.k(wavelength_index) != 0.0) throw DomainError("fresnel: outside medium must be non-absorbing");
    return fresnel_reflectance(outside.n(wavelength_index), inside.n(wavelength_index), inside.k(wavelength_index),
                               cos_theta_i);
}

double fresnel_transmittance(const ComplexIOR& outside, const ComplexIOR& inside, double cos_theta_i,
                             std::size_t wavelength_index) {
    if (wavelength_index < inside.grid().count() && inside.k(wavelength_index) > 0.0) {
        throw UnsupportedError("fresnel: absorbing media do not transmit through the Fresnel path");
    }
    return 1.0 - fresnel_reflectance(outside, inside, cos_theta_i, wavelength_index);
}

Spectrum sample_transmittance_map(const TransmittanceMap& map, double u, double v) {
    const auto w = static_cast<long>(map.width());
    const auto h = static_cast<long>(map.height());
    u -= std::floor(u);
    v -= std::floor(v);
    const double x = u * static_cast<double>(w) - 0.5;
    const double y = v * static_cast<double>(h) - 0.5;
    const double fx0 = std::floor(x);
    const double fy0 = std::floor(y);
    const double fx = x - fx0;
    const double fy = y - fy0;
    auto wrap = [](long i, long n) { return static_cast<std::size_t>(((i % n) + n) % n); };
    const auto x0 = wrap(static_cast<long>(fx0), w), x1 = wrap(static_cast<long>(fx0) + 1, w);
    const auto y0 = wrap(static_cast<long>(fy0), h), y1 = wrap(static_cast<long>(fy0) + 1, h);

    const Spectrum& a = map.texel(x0, y0);
    const Spectrum& b = map.texel(x1, y0);
    const Spectrum& c = map.texel(x0, y1);
    const Spectrum& d = map.texel(x1, y1);
    Spectrum out(a.grid());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double top = a[i] + fx * (b[i] - a[i]);
        const double bottom = c[i] + fx * (d[i] - c[i]);
        out[i] = std::clamp(top + fy * (bottom - top), 0.0, 1.0);
    }
    return out;
}

}  // namespace spectralium
