#pragma once

#include "spectralium/scene.hpp"

#include <atomic>
#include <cmath>
#include <complex>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

namespace testing_support {

inline const std::filesystem::path kSourceDir = SPECTRALIUM_SOURCE_DIR;

class TempDir {
  public:
    TempDir() {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("spectralium-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

  private:
    std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

// Unpolarized Fresnel reflectance written from the textbook amplitude
// formulas with std::complex, independent of the library code.
inline double fresnel_oracle(double n1, double n2, double k2, double cos_i) {
    using C = std::complex<double>;
    const C eta1(n1, 0.0);
    const C eta2(n2, k2);
    const double sin2 = 1.0 - cos_i * cos_i;
    C cos_t = std::sqrt(C(1.0, 0.0) - (eta1 * eta1 / (eta2 * eta2)) * sin2);
    if (cos_t.imag() < 0.0) cos_t = -cos_t;
    const C rs = (eta1 * cos_i - eta2 * cos_t) / (eta1 * cos_i + eta2 * cos_t);
    const C rp = (eta2 * cos_i - eta1 * cos_t) / (eta2 * cos_i + eta1 * cos_t);
    return 0.5 * (std::norm(rs) + std::norm(rp));
}

inline double normal_incidence_oracle(double n, double k) {
    return ((n - 1.0) * (n - 1.0) + k * k) / ((n + 1.0) * (n + 1.0) + k * k);
}

// Rows of a comma-separated data file with `#` comments.
inline std::vector<std::vector<double>> read_table(const std::filesystem::path& p) {
    std::vector<std::vector<double>> rows;
    std::ifstream in(p);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        rows.push_back(row);
    }
    return rows;
}

// A 10 m square lambertian floor at y = 0 under an overhead sun, seen from
// straight above. `extra` is appended verbatim.
inline std::string floor_scene_text(double reflectance = 0.5, const std::string& extra = "") {
    std::ostringstream s;
    s << "material floor lambertian reflectance " << reflectance << "\n"
      << "sun 90 0 5778 0 1\n"
      << "camera 0 4 0  0 0 0  0 0 -1  20 8 8\n"
      << "mesh floor\n"
      << "v -5 0 -5\nv 5 0 -5\nv 5 0 5\nv -5 0 5\n"
      << "f 1 4 3 2\n"
      << "end\n"
      << extra;
    return s.str();
}

inline spectralium::Scene floor_scene(double reflectance = 0.5, const std::string& extra = "") {
    return spectralium::parse_scene_text(floor_scene_text(reflectance, extra), kSourceDir);
}

inline spectralium::Scene sample_scene(const std::string& name) {
    return spectralium::parse_scene(kSourceDir / "scenes" / name);
}

}  // namespace testing_support
