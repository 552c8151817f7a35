#include "spectralium/colorimetry.hpp"
#include "spectralium/ddm.hpp"
#include "spectralium/error.hpp"
#include "spectralium/render.hpp"
#include "spectralium/scene.hpp"
#include "spectralium/spectral.hpp"
#include "spectralium/sunlight.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace spectralium;

namespace {

Spectrum to_spectrum(const std::vector<double>& values) {
    const WavelengthGrid grid;
    if (values.size() != grid.count()) {
        throw py::value_error("spectrum must have " + std::to_string(grid.count()) + " samples (380-780 nm, 5 nm)");
    }
    return Spectrum(grid, values);
}

std::vector<double> from_spectrum(const Spectrum& s) { return {s.values().begin(), s.values().end()}; }

py::array_t<double> image_array(const ImageAccumulator& image) {
    py::array_t<double> out({image.height(), image.width(), 3});
    auto view = out.mutable_unchecked<3>();
    for (int y = 0; y < image.height(); ++y) {
        for (int x = 0; x < image.width(); ++x) {
            const XYZ c = image.mean(static_cast<std::size_t>(y) * static_cast<std::size_t>(image.width()) +
                                     static_cast<std::size_t>(x));
            view(y, x, 0) = c.X;
            view(y, x, 1) = c.Y;
            view(y, x, 2) = c.Z;
        }
    }
    return out;
}

RenderSettings make_settings(const Scene& scene, int width, int height, int spp, int photons, int max_depth,
                             std::uint64_t seed, int threads) {
    RenderSettings s;
    s.width = width > 0 ? width : scene.camera.width;
    s.height = height > 0 ? height : scene.camera.height;
    s.samples_per_pixel = spp;
    s.photons_per_light = photons;
    s.max_depth = max_depth;
    s.seed = seed;
    s.threads = threads;
    return s;
}

py::dict metrics_dict(const ddm::ScheduleMetrics& m) {
    py::dict d;
    d["wall_time"] = m.wall_time;
    d["busy"] = m.busy_total();
    d["idle"] = m.idle_total();
    d["load"] = m.load_total();
    d["migrations"] = m.migrations;
    d["load_events"] = m.load_events;
    d["unload_events"] = m.unload_events;
    d["max_resident_observed"] = m.max_resident_observed;
    d["seeded"] = m.seeded;
    d["spawned"] = m.spawned;
    d["retired"] = m.retired;
    d["in_flight_at_end"] = m.in_flight_at_end;
    d["loads_per_subdomain"] = m.loads_per_subdomain;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Spectral rendering core";

    // Translators run newest first, so the base class goes in first.
    py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
    py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);

    const WavelengthGrid grid;
    std::vector<double> wavelengths;
    for (std::size_t i = 0; i < grid.count(); ++i) wavelengths.push_back(grid.wavelength(i));
    m.attr("wavelengths") = wavelengths;

    m.def("fresnel_reflectance", py::overload_cast<double, double, double, double>(&fresnel_reflectance),
          py::arg("n_outside"), py::arg("n_inside"), py::arg("k_inside"), py::arg("cos_theta"),
          "Unpolarized reflectance of an interface with complex index n + ik");

    m.def(
        "spectrum_to_xyz",
        [](const std::vector<double>& values) {
            const XYZ c = spectrum_to_xyz(to_spectrum(values));
            return py::make_tuple(c.X, c.Y, c.Z);
        },
        py::arg("spectrum"));
    m.def(
        "xyz_to_srgb",
        [](double X, double Y, double Z, double white) {
            const RGB c = xyz_to_srgb({X, Y, Z}, white);
            return py::make_tuple(c.r, c.g, c.b);
        },
        py::arg("X"), py::arg("Y"), py::arg("Z"), py::arg("white_luminance"));
    m.def(
        "chromaticity",
        [](double X, double Y, double Z) {
            const Chromaticity c = chromaticity({X, Y, Z});
            return py::make_tuple(c.x, c.y);
        },
        py::arg("X"), py::arg("Y"), py::arg("Z"));
    m.def("d65", [] { return from_spectrum(d65_illuminant()); });

    m.def("airmass", &airmass, py::arg("elevation_deg"));
    m.def(
        "solar_spectrum",
        [](double temperature, double elevation, double tau, double power) {
            return from_spectrum(solar_spectrum(temperature, elevation, tau, power));
        },
        py::arg("temperature_K") = 5778.0, py::arg("elevation_deg") = 45.0, py::arg("tau_550") = 0.1,
        py::arg("power_scale") = 1.0);
    m.def(
        "sun_vector",
        [](double elevation, double azimuth) {
            const Vec3 v = sun_vector(elevation, azimuth);
            return py::make_tuple(v.x, v.y, v.z);
        },
        py::arg("elevation_deg"), py::arg("azimuth_deg"));

    py::class_<Scene>(m, "Scene")
        .def_property_readonly("triangle_count", [](const Scene& s) { return s.triangles().size(); })
        .def_property_readonly("material_names",
                               [](const Scene& s) {
                                   std::vector<std::string> names;
                                   for (const auto& mat : s.materials) names.push_back(mat.name);
                                   return names;
                               })
        .def_property_readonly("light_count", [](const Scene& s) { return s.lights.size(); })
        .def_property_readonly("bounds",
                               [](const Scene& s) {
                                   const Box3 b = s.bounds();
                                   return py::make_tuple(py::make_tuple(b.lo.x, b.lo.y, b.lo.z),
                                                         py::make_tuple(b.hi.x, b.hi.y, b.hi.z));
                               })
        .def_property_readonly("camera_size",
                               [](const Scene& s) { return py::make_tuple(s.camera.width, s.camera.height); });

    m.def("load_scene", &parse_scene, py::arg("path"));
    m.def(
        "parse_scene_text",
        [](const std::string& text, const std::filesystem::path& base_dir) { return parse_scene_text(text, base_dir); },
        py::arg("text"), py::arg("base_dir") = std::filesystem::path("."));

    m.def(
        "render",
        [](const Scene& scene, int width, int height, int spp, int photons, int max_depth, std::uint64_t seed,
           int threads) {
            const RenderSettings s = make_settings(scene, width, height, spp, photons, max_depth, seed, threads);
            ImageAccumulator image;
            {
                py::gil_scoped_release release;
                image = render_image(scene, s);
            }
            return image_array(image);
        },
        py::arg("scene"), py::arg("width") = 0, py::arg("height") = 0, py::arg("spp") = 1, py::arg("photons") = 0,
        py::arg("max_depth") = 8, py::arg("seed") = 1, py::arg("threads") = 1,
        "Single-domain render; returns an (height, width, 3) array of CIE XYZ");

    m.def(
        "render_ddm",
        [](const Scene& scene, int subdomains, int workers, int max_resident, double load_cost_ms, int width,
           int height, int spp, int photons, int max_depth, std::uint64_t seed) {
            const RenderSettings s = make_settings(scene, width, height, spp, photons, max_depth, seed, workers);
            ddm::DdmSettings d;
            d.n_subdomains = subdomains;
            d.n_workers = workers;
            d.max_resident = max_resident > 0 ? max_resident : subdomains;
            d.load_cost_ms = load_cost_ms;
            ddm::DdmResult r;
            {
                py::gil_scoped_release release;
                r = ddm::run_ddm(scene, s, d);
            }
            return py::make_tuple(image_array(r.image), metrics_dict(r.metrics));
        },
        py::arg("scene"), py::arg("subdomains") = 1, py::arg("workers") = 1, py::arg("max_resident") = 0,
        py::arg("load_cost_ms") = 0.0, py::arg("width") = 0, py::arg("height") = 0, py::arg("spp") = 1,
        py::arg("photons") = 0, py::arg("max_depth") = 8, py::arg("seed") = 1,
        "Domain-decomposed render; returns (XYZ array, schedule metrics)");

    m.def(
        "srgb8",
        [](py::array_t<double, py::array::c_style | py::array::forcecast> xyz, double white) {
            if (xyz.ndim() != 3 || xyz.shape(2) != 3) throw py::value_error("expected an (h, w, 3) array");
            auto in = xyz.unchecked<3>();
            py::array_t<std::uint8_t> out({xyz.shape(0), xyz.shape(1), py::ssize_t{3}});
            auto o = out.mutable_unchecked<3>();
            for (py::ssize_t y = 0; y < xyz.shape(0); ++y) {
                for (py::ssize_t x = 0; x < xyz.shape(1); ++x) {
                    const RGB c = xyz_to_srgb({in(y, x, 0), in(y, x, 1), in(y, x, 2)}, white);
                    o(y, x, 0) = static_cast<std::uint8_t>(std::lround(c.r * 255.0));
                    o(y, x, 1) = static_cast<std::uint8_t>(std::lround(c.g * 255.0));
                    o(y, x, 2) = static_cast<std::uint8_t>(std::lround(c.b * 255.0));
                }
            }
            return out;
        },
        py::arg("xyz"), py::arg("white_luminance"));
    m.def("display_white_luminance", &display_white_luminance, py::arg("scene"));
}
