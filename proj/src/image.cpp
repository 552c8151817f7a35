#include "spectralium/image.hpp"

#include "spectralium/error.hpp"

#include <zlib.h>

#include <cmath>
#include <fstream>
#include <mutex>

namespace spectralium {

ImageAccumulator::ImageAccumulator(int width, int height)
    : width_(width), height_(height), cells_(std::make_unique<Cell[]>(pixel_count())) {
    if (width < 1 || height < 1) throw DomainError("image size must be positive");
}

void ImageAccumulator::add(std::size_t pixel, const XYZ& value) {
    __int128 fixed[3];
    const double comps[3] = {value.X, value.Y, value.Z};
    for (int c = 0; c < 3; ++c) {
        if (!(std::abs(comps[c]) < 1e18)) throw DomainError("image contribution out of accumulator range");
        fixed[c] = static_cast<__int128>(std::nearbyint(comps[c] * kScale));
    }
    Cell& cell = cells_[pixel];
    std::lock_guard guard(cell.lock);
    for (int c = 0; c < 3; ++c) cell.sum[c] += fixed[c];
}

void ImageAccumulator::add_samples(std::size_t pixel, std::uint64_t count) {
    Cell& cell = cells_[pixel];
    std::lock_guard guard(cell.lock);
    cell.samples += count;
}

XYZ ImageAccumulator::sum(std::size_t pixel) const {
    const Cell& cell = cells_[pixel];
    return {static_cast<double>(cell.sum[0]) / kScale, static_cast<double>(cell.sum[1]) / kScale,
            static_cast<double>(cell.sum[2]) / kScale};
}

std::uint64_t ImageAccumulator::samples(std::size_t pixel) const { return cells_[pixel].samples; }

XYZ ImageAccumulator::mean(std::size_t pixel) const {
    const std::uint64_t n = samples(pixel);
    if (n == 0) return {};
    return sum(pixel) * (1.0 / static_cast<double>(n));
}

std::vector<XYZ> ImageAccumulator::resolve() const {
    std::vector<XYZ> out(pixel_count());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = mean(i);
    return out;
}

bool ImageAccumulator::identical(const ImageAccumulator& other) const {
    if (width_ != other.width_ || height_ != other.height_) return false;
    for (std::size_t i = 0; i < pixel_count(); ++i) {
        const Cell& a = cells_[i];
        const Cell& b = other.cells_[i];
        if (a.samples != b.samples) return false;
        for (int c = 0; c < 3; ++c) {
            if (a.sum[c] != b.sum[c]) return false;
        }
    }
    return true;
}

std::vector<std::uint8_t> to_srgb8(const ImageAccumulator& image, double white_luminance) {
    std::vector<std::uint8_t> rgb;
    rgb.reserve(image.pixel_count() * 3);
    for (std::size_t i = 0; i < image.pixel_count(); ++i) {
        const RGB c = xyz_to_srgb(image.mean(i), white_luminance);
        for (double v : {c.r, c.g, c.b}) rgb.push_back(static_cast<std::uint8_t>(std::lround(v * 255.0)));
    }
    return rgb;
}

void write_ppm(const std::filesystem::path& path, int width, int height, const std::vector<std::uint8_t>& rgb) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << "P6\n" << width << ' ' << height << "\n255\n";
    out.write(reinterpret_cast<const char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>(v >> shift));
}

void put_chunk(std::vector<std::uint8_t>& out, const char* type, const std::vector<std::uint8_t>& data) {
    put_u32(out, static_cast<std::uint32_t>(data.size()));
    const std::size_t start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), data.begin(), data.end());
    const auto crc = crc32(0L, out.data() + start, static_cast<uInt>(out.size() - start));
    put_u32(out, static_cast<std::uint32_t>(crc));
}

}  // namespace

void write_png(const std::filesystem::path& path, int width, int height, const std::vector<std::uint8_t>& rgb) {
    std::vector<std::uint8_t> raw;
    raw.reserve(static_cast<std::size_t>(height) * (1 + static_cast<std::size_t>(width) * 3));
    for (int y = 0; y < height; ++y) {
        raw.push_back(0);  // filter: none
        const auto row = rgb.begin() + static_cast<long>(y) * width * 3;
        raw.insert(raw.end(), row, row + width * 3);
    }
    uLongf packed_size = compressBound(static_cast<uLong>(raw.size()));
    std::vector<std::uint8_t> packed(packed_size);
    if (compress2(packed.data(), &packed_size, raw.data(), static_cast<uLong>(raw.size()), 9) != Z_OK) {
        throw IoError("png: deflate failed");
    }
    packed.resize(packed_size);

    std::vector<std::uint8_t> file = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    std::vector<std::uint8_t> header;
    put_u32(header, static_cast<std::uint32_t>(width));
    put_u32(header, static_cast<std::uint32_t>(height));
    header.insert(header.end(), {8, 2, 0, 0, 0});  // 8-bit RGB, deflate, no interlace
    put_chunk(file, "IHDR", header);
    put_chunk(file, "IDAT", packed);
    put_chunk(file, "IEND", {});

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out.write(reinterpret_cast<const char*>(file.data()), static_cast<std::streamsize>(file.size()));
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

void write_image(const std::filesystem::path& path, int width, int height, const std::vector<std::uint8_t>& rgb) {
    const auto ext = path.extension().string();
    if (ext == ".ppm") {
        write_ppm(path, width, height, rgb);
    } else if (ext == ".png") {
        write_png(path, width, height, rgb);
    } else {
        throw IoError("unsupported image extension '" + ext + "' (use .png or .ppm)");
    }
}

}  // namespace spectralium
