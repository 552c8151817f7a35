#pragma once

#include "spectralium/colorimetry.hpp"

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <thread>
#include <vector>

namespace spectralium {

class SpinLock {
  public:
    void lock() {
        while (flag_.test_and_set(std::memory_order_acquire)) {
            while (flag_.test(std::memory_order_relaxed)) std::this_thread::yield();
        }
    }
    void unlock() { flag_.clear(std::memory_order_release); }

  private:
    std::atomic_flag flag_ = ATOMIC_FLAG_INIT;
};

/// Per-pixel XYZ sums and sample counts. Each cell carries its own spin
/// lock, so writers to different pixels never contend. Sums are kept in
/// 128-bit fixed point, which makes the result independent of the order
/// in which contributions arrive.
class ImageAccumulator {
  public:
    // Resolution of the fixed-point sums (2^-60).
    static constexpr double kScale = 0x1.0p60;

    ImageAccumulator() = default;
    ImageAccumulator(int width, int height);

    int width() const { return width_; }
    int height() const { return height_; }
    std::size_t pixel_count() const { return static_cast<std::size_t>(width_) * static_cast<std::size_t>(height_); }

    void add(std::size_t pixel, const XYZ& value);
    void add_samples(std::size_t pixel, std::uint64_t count);

    XYZ sum(std::size_t pixel) const;
    std::uint64_t samples(std::size_t pixel) const;
    // Sum divided by sample count; zero for pixels without samples.
    XYZ mean(std::size_t pixel) const;
    std::vector<XYZ> resolve() const;

    // Bitwise equality of every cell.
    bool identical(const ImageAccumulator& other) const;

  private:
    struct Cell {
        SpinLock lock;
        __int128 sum[3] = {0, 0, 0};
        std::uint64_t samples = 0;
    };

    int width_ = 0;
    int height_ = 0;
    std::unique_ptr<Cell[]> cells_;
};

// 8-bit sRGB triplets, row-major from the top-left pixel.
std::vector<std::uint8_t> to_srgb8(const ImageAccumulator& image, double white_luminance);

void write_ppm(const std::filesystem::path& path, int width, int height, const std::vector<std::uint8_t>& rgb);
void write_png(const std::filesystem::path& path, int width, int height, const std::vector<std::uint8_t>& rgb);

// Picks PNG or PPM from the file extension.
void write_image(const std::filesystem::path& path, int width, int height, const std::vector<std::uint8_t>& rgb);

}  // namespace spectralium
