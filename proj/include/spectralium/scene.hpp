#pragma once

#include "spectralium/geometry.hpp"
#include "spectralium/spectral.hpp"
#include "spectralium/sunlight.hpp"
#include "spectralium/vec.hpp"

#include <array>
#include <filesystem>
#include <memory>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace spectralium {

struct Mesh {
    struct Corner {
        int vertex = 0;
        int normal = -1;  // -1: use the geometric normal
        int uv = -1;      // -1: (0,0)

        friend bool operator==(const Corner&, const Corner&) = default;
    };

    std::vector<Vec3> vertices;
    std::vector<Vec3> normals;
    std::vector<Vec2> uvs;
    std::vector<std::array<Corner, 3>> triangles;
    int material_id = 0;

    friend bool operator==(const Mesh&, const Mesh&) = default;
};

enum class MaterialKind { lambertian, fresnel_dielectric, fresnel_conductor };

const char* to_string(MaterialKind kind);

struct Material {
    std::string name;
    MaterialKind kind = MaterialKind::lambertian;
    Spectrum reflectance;                          // lambertian
    ComplexIOR ior;                                // dielectric, conductor
    std::shared_ptr<const TransmittanceMap> bulk;  // dielectric
    std::string bulk_name;

    static Material lambertian(std::string name, Spectrum reflectance);
    static Material dielectric(std::string name, ComplexIOR ior, std::shared_ptr<const TransmittanceMap> bulk,
                               std::string bulk_name = "");
    static Material conductor(std::string name, ComplexIOR ior);

    friend bool operator==(const Material& a, const Material& b);
};

struct Camera {
    Vec3 position{0.0, 0.0, 5.0};
    Vec3 look_at{0.0, 0.0, 0.0};
    Vec3 up{0.0, 1.0, 0.0};
    double vertical_fov = 45.0;  // degrees
    int width = 64;
    int height = 64;

    // Throws DomainError when the camera frame is degenerate.
    void validate() const;

    friend bool operator==(const Camera&, const Camera&) = default;
};

struct CameraRay {
    Vec3 origin;
    Vec3 direction;
};

// Pinhole ray through pixel (x, y) at sub-pixel offset `jitter` in [0,1)^2.
// Pixel (0, 0) is the top-left corner of the image.
CameraRay generate_ray(const Camera& camera, int pixel_x, int pixel_y, Vec2 jitter);

struct NamedTexture {
    std::string name;
    std::shared_ptr<const TransmittanceMap> map;
};

class Scene {
  public:
    WavelengthGrid grid;
    std::vector<Material> materials;
    std::vector<NamedTexture> textures;
    std::vector<Mesh> meshes;
    std::vector<SunLight> lights;
    Camera camera;

    // Flattens meshes into triangles with global ids; call after editing meshes.
    void finalize();

    const std::vector<Triangle>& triangles() const { return triangles_; }
    Box3 bounds() const { return bounds_; }
    int find_material(const std::string& name) const;

    friend bool operator==(const Scene& a, const Scene& b);

  private:
    std::vector<Triangle> triangles_;
    Box3 bounds_;
};

Scene parse_scene(const std::filesystem::path& path);
Scene parse_scene_text(const std::string& text, const std::filesystem::path& base_dir,
                       const std::string& source = "<scene>");

// Writes `scene_file` plus one data file per material and texture into `dir`.
void write_scene(const Scene& scene, const std::filesystem::path& dir, const std::string& scene_file = "scene.scn");

// Mesh-block syntax shared with the partition files. Each triangle is
// written with its own three vertices; `with_ids` appends a `tid` line
// after every face.
void write_mesh_block(std::ostream& out, const std::string& material_name, std::span<const Triangle> triangles,
                      bool with_ids = false);

// Applies one `v`, `vn`, `vt` or `f` line to `mesh`. Returns false when the
// keyword is not mesh syntax. Polygons are fan-triangulated.
bool parse_mesh_directive(std::string_view line, Mesh& mesh, const std::string& source, int line_no,
                          bool normalize_normals = true);

// Triangle from a mesh face, with shading normals taken verbatim.
Triangle mesh_triangle(const Mesh& mesh, std::size_t face);

}  // namespace spectralium
