#include "spectralium/error.hpp"
#include "spectralium/image.hpp"
#include "support.hpp"

#include <doctest.h>

#include <thread>
#include <zlib.h>

using namespace spectralium;

namespace {

std::uint32_t be32(const std::string& s, std::size_t at) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | static_cast<unsigned char>(s[at + static_cast<std::size_t>(i)]);
    return v;
}

}  // namespace

TEST_CASE("accumulator sums are independent of order") {
    ImageAccumulator a(3, 2), b(3, 2);
    const XYZ v[] = {{0.1, 0.2, 0.3}, {1e-9, 5.0, 0.25}, {0.7, 0.0, 1e-3}};
    for (int i = 0; i < 3; ++i) a.add(4, v[i]);
    for (int i = 2; i >= 0; --i) b.add(4, v[i]);
    a.add_samples(4, 3);
    b.add_samples(4, 3);
    CHECK(a.identical(b));
    CHECK(a.samples(4) == 3);
    CHECK(a.mean(4).Y == doctest::Approx((0.2 + 5.0) / 3.0).epsilon(1e-15));
    CHECK(a.mean(0) == XYZ{});
    CHECK_THROWS_AS(ImageAccumulator(0, 1), DomainError);
    CHECK_THROWS_AS(a.add(0, {1e30, 0, 0}), DomainError);
}

TEST_CASE("concurrent adds to one pixel") {
    ImageAccumulator img(1, 1);
    std::vector<std::thread> threads;
    for (int t = 0; t < 4; ++t) {
        threads.emplace_back([&] {
            for (int i = 0; i < 10000; ++i) {
                img.add(0, {0.5, 0.25, 1.0});
                img.add_samples(0, 1);
            }
        });
    }
    for (auto& t : threads) t.join();
    CHECK(img.samples(0) == 40000);
    CHECK(img.sum(0).X == 20000.0);
}

TEST_CASE("ppm and png writers") {
    testing_support::TempDir dir;
    const std::vector<std::uint8_t> rgb{255, 0, 0, 0, 255, 0, 0, 0, 255, 10, 20, 30, 40, 50, 60, 70, 80, 90};
    write_image(dir / "a.ppm", 3, 2, rgb);
    const std::string ppm = testing_support::read_file(dir / "a.ppm");
    CHECK(ppm == "P6\n3 2\n255\n" + std::string(rgb.begin(), rgb.end()));

    write_image(dir / "a.png", 3, 2, rgb);
    const std::string png = testing_support::read_file(dir / "a.png");
    REQUIRE(png.substr(0, 8) == "\x89PNG\r\n\x1a\n");
    CHECK(be32(png, 16) == 3);
    CHECK(be32(png, 20) == 2);
    // Walk the chunks, check each CRC and inflate the image data.
    std::size_t at = 8;
    std::string idat;
    while (at < png.size()) {
        const std::uint32_t len = be32(png, at);
        const std::string type = png.substr(at + 4, 4);
        const auto* bytes = reinterpret_cast<const Bytef*>(png.data() + at + 4);
        CHECK(crc32(0L, bytes, len + 4) == be32(png, at + 8 + len));
        if (type == "IDAT") idat += png.substr(at + 8, len);
        at += 12 + len;
    }
    CHECK(at == png.size());
    std::vector<std::uint8_t> raw(2 * (1 + 9));
    uLongf raw_size = raw.size();
    REQUIRE(uncompress(raw.data(), &raw_size, reinterpret_cast<const Bytef*>(idat.data()), idat.size()) == Z_OK);
    REQUIRE(raw_size == raw.size());
    CHECK(raw[0] == 0);
    CHECK(std::equal(rgb.begin(), rgb.begin() + 9, raw.begin() + 1));
    CHECK(std::equal(rgb.begin() + 9, rgb.end(), raw.begin() + 11));

    CHECK_THROWS_AS(write_image(dir / "a.gif", 3, 2, rgb), IoError);
    CHECK_THROWS_AS(write_image(dir / "no" / "a.png", 3, 2, rgb), IoError);
}
