#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace spectralium::cli {

enum ExitCode : int { kOk = 0, kParseError = 1, kRenderError = 2, kIoError = 3 };

struct RenderConfig {
    std::filesystem::path scene_path;
    int width = 0;   // 0: take the camera's size
    int height = 0;
    int samples_per_pixel = 1;
    int n_photons = 20000;  // per light; 0 disables photon mapping
    int max_depth = 8;
    std::uint64_t seed = 1;
    int n_subdomains = 1;
    int n_workers = 1;
    int max_resident = 0;  // 0: every sub-domain may stay resident
    double load_cost_ms = 0.0;
    std::filesystem::path output_path = "out.png";
};

struct BenchConfig {
    RenderConfig render;
    std::vector<int> workers{1};
    std::vector<int> subdomains{1};
    int reps = 1;
    std::filesystem::path csv_path;  // empty: CSV goes to standard output
};

// Entry point shared by the executable and the tests. `args` excludes the
// program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Median used for the benchmark matrix.
double median(std::vector<double> values);

// Number formatting shared by the CSV and the matrix.
std::string format_seconds(double seconds);

}  // namespace spectralium::cli
