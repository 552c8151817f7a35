#include "spectralium/scene.hpp"

#include "spectralium/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

namespace spectralium {

const char* to_string(MaterialKind kind) {
    switch (kind) {
        case MaterialKind::lambertian: return "lambertian";
        case MaterialKind::fresnel_dielectric: return "dielectric";
        case MaterialKind::fresnel_conductor: return "conductor";
    }
    return "?";
}

Material Material::lambertian(std::string name, Spectrum reflectance) {
    if (reflectance.min_value() < 0.0 || reflectance.max_value() > 1.0) {
        throw DomainError("lambertian reflectance must lie in [0,1]");
    }
    Material m;
    m.name = std::move(name);
    m.kind = MaterialKind::lambertian;
    m.reflectance = std::move(reflectance);
    return m;
}

Material Material::dielectric(std::string name, ComplexIOR ior, std::shared_ptr<const TransmittanceMap> bulk,
                              std::string bulk_name) {
    if (ior.absorbing()) throw DomainError("dielectric IOR must have k = 0 at every sample");
    Material m;
    m.name = std::move(name);
    m.kind = MaterialKind::fresnel_dielectric;
    m.reflectance = Spectrum(ior.grid());
    m.ior = std::move(ior);
    m.bulk = bulk ? std::move(bulk) : std::make_shared<const TransmittanceMap>(TransmittanceMap::uniform(m.ior.grid(), 1.0));
    m.bulk_name = std::move(bulk_name);
    return m;
}

Material Material::conductor(std::string name, ComplexIOR ior) {
    Material m;
    m.name = std::move(name);
    m.kind = MaterialKind::fresnel_conductor;
    m.reflectance = Spectrum(ior.grid());
    m.ior = std::move(ior);
    return m;
}

bool operator==(const Material& a, const Material& b) {
    if (a.name != b.name || a.kind != b.kind) return false;
    switch (a.kind) {
        case MaterialKind::lambertian: return a.reflectance == b.reflectance;
        case MaterialKind::fresnel_conductor: return a.ior == b.ior;
        case MaterialKind::fresnel_dielectric:
            return a.ior == b.ior && a.bulk_name == b.bulk_name && a.bulk && b.bulk && *a.bulk == *b.bulk;
    }
    return false;
}

void Camera::validate() const {
    const Vec3 view = look_at - position;
    if (length(view) == 0.0) throw DomainError("camera: look_at equals position");
    if (length(cross(normalize(view), up)) < 1e-9) throw DomainError("camera: up is parallel to the view direction");
    if (!(vertical_fov > 0.0 && vertical_fov < 180.0)) throw DomainError("camera: vertical fov must be in (0,180)");
    if (width < 1 || height < 1) throw DomainError("camera: image size must be positive");
}

CameraRay generate_ray(const Camera& camera, int pixel_x, int pixel_y, Vec2 jitter) {
    const Vec3 forward = normalize(camera.look_at - camera.position);
    const Vec3 right = normalize(cross(forward, camera.up));
    const Vec3 up = cross(right, forward);
    const double tan_half = std::tan(camera.vertical_fov * std::numbers::pi / 360.0);
    const double aspect = static_cast<double>(camera.width) / static_cast<double>(camera.height);
    const double sx = 2.0 * (pixel_x + jitter.u) / camera.width - 1.0;
    const double sy = 1.0 - 2.0 * (pixel_y + jitter.v) / camera.height;
    const Vec3 dir = forward + right * (sx * tan_half * aspect) + up * (sy * tan_half);
    return {camera.position, normalize(dir)};
}

Triangle mesh_triangle(const Mesh& mesh, std::size_t face) {
    const auto& corners = mesh.triangles[face];
    Triangle tri;
    for (int c = 0; c < 3; ++c) {
        tri.p[c] = mesh.vertices[static_cast<std::size_t>(corners[c].vertex)];
        tri.uv[c] = corners[c].uv >= 0 ? mesh.uvs[static_cast<std::size_t>(corners[c].uv)] : Vec2{};
    }
    const Vec3 ng = tri.geometric_normal();
    for (int c = 0; c < 3; ++c) {
        tri.n[c] = corners[c].normal >= 0 ? mesh.normals[static_cast<std::size_t>(corners[c].normal)] : ng;
    }
    tri.material_id = mesh.material_id;
    return tri;
}

void Scene::finalize() {
    triangles_.clear();
    bounds_ = Box3{};
    for (const Mesh& mesh : meshes) {
        for (std::size_t f = 0; f < mesh.triangles.size(); ++f) {
            Triangle tri = mesh_triangle(mesh, f);
            tri.id = static_cast<std::uint32_t>(triangles_.size());
            bounds_.expand(tri.bounds());
            triangles_.push_back(tri);
        }
    }
}

int Scene::find_material(const std::string& name) const {
    for (std::size_t i = 0; i < materials.size(); ++i) {
        if (materials[i].name == name) return static_cast<int>(i);
    }
    return -1;
}

bool operator==(const Scene& a, const Scene& b) {
    if (!(a.grid == b.grid) || !(a.materials == b.materials) || !(a.meshes == b.meshes) || !(a.camera == b.camera)) {
        return false;
    }
    if (a.textures.size() != b.textures.size() || a.lights.size() != b.lights.size()) return false;
    for (std::size_t i = 0; i < a.textures.size(); ++i) {
        if (a.textures[i].name != b.textures[i].name || !(*a.textures[i].map == *b.textures[i].map)) return false;
    }
    for (std::size_t i = 0; i < a.lights.size(); ++i) {
        const auto& la = a.lights[i];
        const auto& lb = b.lights[i];
        if (!(la.parameters == lb.parameters) || !(la.direction == lb.direction) || !(la.emission == lb.emission)) {
            return false;
        }
    }
    return true;
}

namespace {

std::vector<std::string_view> tokenize(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (pos < line.size()) {
        const auto b = line.find_first_not_of(" \t\r", pos);
        if (b == std::string_view::npos) break;
        const auto e = line.find_first_of(" \t\r", b);
        out.push_back(line.substr(b, e == std::string_view::npos ? std::string_view::npos : e - b));
        pos = e == std::string_view::npos ? line.size() : e;
    }
    return out;
}

bool to_double(std::string_view s, double& v) {
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    return ec == std::errc{} && ptr == s.data() + s.size() && std::isfinite(v);
}

bool to_int(std::string_view s, long& v) {
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    return ec == std::errc{} && ptr == s.data() + s.size();
}

struct LineContext {
    const std::string& source;
    int line;

    [[noreturn]] void fail(const std::string& what) const { throw ParseError(source, line, what); }

    double number(std::string_view tok) const {
        double v;
        if (!to_double(tok, v)) fail("expected a number, got '" + std::string(tok) + "'");
        return v;
    }

    long integer(std::string_view tok) const {
        long v;
        if (!to_int(tok, v)) fail("expected an integer, got '" + std::string(tok) + "'");
        return v;
    }

    Vec3 vec3(const std::vector<std::string_view>& t, std::size_t at) const {
        return {number(t[at]), number(t[at + 1]), number(t[at + 2])};
    }
};

// Normalizes only when not already unit length, so re-reading written
// output reproduces the same bits.
Vec3 unit(Vec3 v) { return std::abs(length(v) - 1.0) > 1e-12 ? normalize(v) : v; }

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fmt(Vec3 v) { return fmt(v.x) + " " + fmt(v.y) + " " + fmt(v.z); }

Mesh::Corner parse_corner(std::string_view tok, const Mesh& mesh, const LineContext& ctx) {
    Mesh::Corner c;
    std::array<std::string_view, 3> parts{};
    std::size_t count = 0, pos = 0;
    while (count < 3) {
        const auto slash = tok.find('/', pos);
        parts[count++] = tok.substr(pos, slash == std::string_view::npos ? std::string_view::npos : slash - pos);
        if (slash == std::string_view::npos) break;
        pos = slash + 1;
    }
    auto index = [&](std::string_view s, std::size_t size, const char* what) {
        const long i = ctx.integer(s);
        if (i < 1 || static_cast<std::size_t>(i) > size) {
            ctx.fail(std::string(what) + " index " + std::string(s) + " out of range");
        }
        return static_cast<int>(i - 1);
    };
    c.vertex = index(parts[0], mesh.vertices.size(), "vertex");
    if (count > 1 && !parts[1].empty()) c.uv = index(parts[1], mesh.uvs.size(), "uv");
    if (count > 2 && !parts[2].empty()) c.normal = index(parts[2], mesh.normals.size(), "normal");
    return c;
}

}  // namespace

bool parse_mesh_directive(std::string_view line, Mesh& mesh, const std::string& source, int line_no,
                          bool normalize_normals) {
    const auto t = tokenize(line);
    if (t.empty()) return false;
    const LineContext ctx{source, line_no};
    const std::string_view key = t[0];
    if (key == "v") {
        if (t.size() != 4) ctx.fail("'v' expects 3 coordinates");
        mesh.vertices.push_back(ctx.vec3(t, 1));
    } else if (key == "vn") {
        if (t.size() != 4) ctx.fail("'vn' expects 3 components");
        Vec3 n = ctx.vec3(t, 1);
        if (length(n) == 0.0) ctx.fail("zero-length normal");
        mesh.normals.push_back(normalize_normals ? unit(n) : n);
    } else if (key == "vt") {
        if (t.size() != 3) ctx.fail("'vt' expects 2 components");
        mesh.uvs.push_back({ctx.number(t[1]), ctx.number(t[2])});
    } else if (key == "f") {
        if (t.size() < 4) ctx.fail("'f' needs at least 3 corners");
        std::vector<Mesh::Corner> corners;
        for (std::size_t i = 1; i < t.size(); ++i) corners.push_back(parse_corner(t[i], mesh, ctx));
        for (std::size_t i = 1; i + 1 < corners.size(); ++i) {
            const Vec3 a = mesh.vertices[static_cast<std::size_t>(corners[0].vertex)];
            const Vec3 b = mesh.vertices[static_cast<std::size_t>(corners[i].vertex)];
            const Vec3 c = mesh.vertices[static_cast<std::size_t>(corners[i + 1].vertex)];
            if (0.5 * length(cross(b - a, c - a)) <= 1e-12) ctx.fail("degenerate triangle");
            mesh.triangles.push_back({corners[0], corners[i], corners[i + 1]});
        }
    } else {
        return false;
    }
    return true;
}

Scene parse_scene_text(const std::string& text, const std::filesystem::path& base_dir, const std::string& source) {
    Scene scene;
    struct PendingMaterial {
        std::string texture;
        int line;
    };
    std::map<std::string, int> material_lines, texture_lines;
    std::vector<PendingMaterial> pending_textures;
    std::vector<std::pair<std::string, int>> mesh_refs;  // material name, line
    bool in_mesh = false;
    bool camera_seen = false;

    auto resolve = [&](std::string_view p) { return base_dir / std::filesystem::path(std::string(p)); };

    std::istringstream in(text);
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const auto hash = raw.find('#');
        const std::string line = hash == std::string::npos ? raw : raw.substr(0, hash);
        const auto t = tokenize(line);
        if (t.empty()) continue;
        const LineContext ctx{source, line_no};

        // Data files are reported against the scene line that references them.
        auto load = [&](auto&& fn) {
            try {
                return fn();
            } catch (const Error& e) {
                ctx.fail(e.what());
            }
        };

        if (in_mesh) {
            if (t[0] == "end") {
                if (t.size() != 1) ctx.fail("'end' takes no arguments");
                in_mesh = false;
                continue;
            }
            if (!parse_mesh_directive(line, scene.meshes.back(), source, line_no)) {
                ctx.fail("unknown mesh directive '" + std::string(t[0]) + "'");
            }
            continue;
        }

        const std::string_view key = t[0];
        if (key == "mesh") {
            if (t.size() != 2) ctx.fail("usage: mesh MATERIAL");
            scene.meshes.emplace_back();
            mesh_refs.emplace_back(std::string(t[1]), line_no);
            in_mesh = true;
        } else if (key == "texture") {
            if (t.size() != 3) ctx.fail("usage: texture NAME (VALUE | FILE)");
            const std::string name(t[1]);
            if (auto it = texture_lines.find(name); it != texture_lines.end()) {
                ctx.fail("duplicate texture '" + name + "' (first defined at line " + std::to_string(it->second) + ")");
            }
            texture_lines[name] = line_no;
            double value;
            TransmittanceMap map = to_double(t[2], value)
                                       ? load([&] { return TransmittanceMap::uniform(scene.grid, value); })
                                       : load([&] { return load_transmittance_map(resolve(t[2]), scene.grid); });
            scene.textures.push_back({name, std::make_shared<const TransmittanceMap>(std::move(map))});
        } else if (key == "material") {
            if (t.size() < 3) ctx.fail("usage: material NAME KIND ...");
            const std::string name(t[1]);
            if (auto it = material_lines.find(name); it != material_lines.end()) {
                ctx.fail("duplicate material '" + name + "' at line " + std::to_string(line_no) +
                         " (first defined at line " + std::to_string(it->second) + ")");
            }
            material_lines[name] = line_no;
            const std::string_view kind = t[2];

            auto parse_ior = [&](std::size_t at, std::size_t& next) {
                if (at >= t.size() || t[at] != "ior") ctx.fail("expected 'ior'");
                double n, k;
                if (at + 2 < t.size() && to_double(t[at + 1], n) && to_double(t[at + 2], k)) {
                    next = at + 3;
                    return load([&] { return ComplexIOR(scene.grid, n, k); });
                }
                if (at + 1 >= t.size()) ctx.fail("'ior' needs 'N K' or a file");
                next = at + 2;
                return load([&] { return load_ior(resolve(t[at + 1]), scene.grid); });
            };

            if (kind == "lambertian") {
                if (t.size() != 5 || t[3] != "reflectance") ctx.fail("usage: material NAME lambertian reflectance (VALUE | FILE)");
                double value;
                Spectrum refl = to_double(t[4], value) ? Spectrum(scene.grid, value)
                                                       : load([&] { return load_spd(resolve(t[4]), scene.grid); });
                scene.materials.push_back(load([&] { return Material::lambertian(name, std::move(refl)); }));
            } else if (kind == "dielectric") {
                std::size_t next = 0;
                ComplexIOR ior = parse_ior(3, next);
                std::string texture;
                if (next < t.size()) {
                    if (t[next] != "map" || next + 2 != t.size()) ctx.fail("usage: ... dielectric ior (N K | FILE) [map TEXTURE]");
                    texture = std::string(t[next + 1]);
                }
                scene.materials.push_back(load([&] { return Material::dielectric(name, std::move(ior), nullptr, texture); }));
                pending_textures.push_back({texture, line_no});
            } else if (kind == "conductor") {
                std::size_t next = 0;
                ComplexIOR ior = parse_ior(3, next);
                if (next != t.size()) ctx.fail("usage: material NAME conductor ior (N K | FILE)");
                scene.materials.push_back(Material::conductor(name, std::move(ior)));
            } else {
                ctx.fail("unknown material kind '" + std::string(kind) + "'");
            }
            if (kind != "dielectric") pending_textures.push_back({"", line_no});
        } else if (key == "sun") {
            if (t.size() != 6) ctx.fail("usage: sun ELEVATION_DEG AZIMUTH_DEG TEMPERATURE_K TAU_550 POWER_SCALE");
            SunParameters p{ctx.number(t[1]), ctx.number(t[2]), ctx.number(t[3]), ctx.number(t[4]), ctx.number(t[5])};
            scene.lights.push_back(load([&] { return make_sun(p, scene.grid); }));
        } else if (key == "camera") {
            if (t.size() != 13) ctx.fail("usage: camera PX PY PZ LX LY LZ UX UY UZ FOV WIDTH HEIGHT");
            if (camera_seen) ctx.fail("camera defined twice");
            camera_seen = true;
            Camera cam;
            cam.position = ctx.vec3(t, 1);
            cam.look_at = ctx.vec3(t, 4);
            cam.up = ctx.vec3(t, 7);
            cam.vertical_fov = ctx.number(t[10]);
            cam.width = static_cast<int>(ctx.integer(t[11]));
            cam.height = static_cast<int>(ctx.integer(t[12]));
            if (length(cam.up) == 0.0) ctx.fail("camera up vector is zero");
            cam.up = unit(cam.up);
            load([&] { cam.validate(); return 0; });
            scene.camera = cam;
        } else {
            ctx.fail("unknown directive '" + std::string(key) + "'");
        }
    }
    if (in_mesh) throw ParseError(source, line_no, "mesh block not terminated by 'end'");

    for (std::size_t i = 0; i < scene.materials.size(); ++i) {
        const auto& pending = pending_textures[i];
        if (pending.texture.empty()) continue;
        auto it = std::find_if(scene.textures.begin(), scene.textures.end(),
                               [&](const NamedTexture& nt) { return nt.name == pending.texture; });
        if (it == scene.textures.end()) {
            throw ParseError(source, pending.line, "unknown texture '" + pending.texture + "'");
        }
        scene.materials[i].bulk = it->map;
    }
    for (std::size_t i = 0; i < scene.meshes.size(); ++i) {
        const int id = scene.find_material(mesh_refs[i].first);
        if (id < 0) throw ParseError(source, mesh_refs[i].second, "unknown material '" + mesh_refs[i].first + "'");
        scene.meshes[i].material_id = id;
    }
    scene.finalize();
    return scene;
}

Scene parse_scene(const std::filesystem::path& path) {
    std::string text;
    try {
        text = read_text_file(path);
    } catch (const IoError&) {
        throw ParseError(path.string(), 0, "cannot open scene file");
    }
    return parse_scene_text(text, path.parent_path(), path.string());
}

void write_mesh_block(std::ostream& out, const std::string& material_name, std::span<const Triangle> triangles,
                      bool with_ids) {
    out << "mesh " << material_name << '\n';
    std::size_t base = 1;
    for (const Triangle& tri : triangles) {
        for (const Vec3& p : tri.p) out << "v " << fmt(p) << '\n';
        for (const Vec3& n : tri.n) out << "vn " << fmt(n) << '\n';
        for (const Vec2& uv : tri.uv) out << "vt " << fmt(uv.u) << ' ' << fmt(uv.v) << '\n';
        out << "f";
        for (std::size_t c = 0; c < 3; ++c) {
            const auto i = std::to_string(base + c);
            out << ' ' << i << '/' << i << '/' << i;
        }
        out << '\n';
        if (with_ids) out << "tid " << tri.id << '\n';
        base += 3;
    }
    out << "end\n";
}

namespace {

void write_mesh(std::ostream& out, const Mesh& mesh, const std::string& material) {
    out << "mesh " << material << '\n';
    for (const Vec3& v : mesh.vertices) out << "v " << fmt(v) << '\n';
    for (const Vec3& n : mesh.normals) out << "vn " << fmt(n) << '\n';
    for (const Vec2& uv : mesh.uvs) out << "vt " << fmt(uv.u) << ' ' << fmt(uv.v) << '\n';
    for (const auto& tri : mesh.triangles) {
        out << 'f';
        for (const auto& c : tri) {
            out << ' ' << c.vertex + 1;
            if (c.uv >= 0 || c.normal >= 0) {
                out << '/';
                if (c.uv >= 0) out << c.uv + 1;
                if (c.normal >= 0) out << '/' << c.normal + 1;
            }
        }
        out << '\n';
    }
    out << "end\n";
}

}  // namespace

void write_scene(const Scene& scene, const std::filesystem::path& dir, const std::string& scene_file) {
    std::filesystem::create_directories(dir);
    std::ofstream out(dir / scene_file);
    if (!out) throw IoError("cannot write '" + (dir / scene_file).string() + "'");
    for (const NamedTexture& tex : scene.textures) {
        const std::string file = "texture_" + tex.name + ".tmap";
        write_transmittance_map(dir / file, *tex.map);
        out << "texture " << tex.name << ' ' << file << '\n';
    }
    for (const Material& m : scene.materials) {
        switch (m.kind) {
            case MaterialKind::lambertian: {
                const std::string file = "material_" + m.name + ".spd";
                write_spd(dir / file, m.reflectance);
                out << "material " << m.name << " lambertian reflectance " << file << '\n';
                break;
            }
            case MaterialKind::fresnel_dielectric:
            case MaterialKind::fresnel_conductor: {
                const std::string file = "material_" + m.name + ".ior";
                write_ior(dir / file, m.ior);
                out << "material " << m.name << ' ' << to_string(m.kind) << " ior " << file;
                if (m.kind == MaterialKind::fresnel_dielectric && !m.bulk_name.empty()) out << " map " << m.bulk_name;
                out << '\n';
                break;
            }
        }
    }
    for (const SunLight& sun : scene.lights) {
        const auto& p = sun.parameters;
        out << "sun " << fmt(p.elevation_deg) << ' ' << fmt(p.azimuth_deg) << ' ' << fmt(p.temperature_K) << ' '
            << fmt(p.tau_550) << ' ' << fmt(p.power_scale) << '\n';
    }
    const Camera& c = scene.camera;
    out << "camera " << fmt(c.position) << ' ' << fmt(c.look_at) << ' ' << fmt(c.up) << ' ' << fmt(c.vertical_fov)
        << ' ' << c.width << ' ' << c.height << '\n';
    for (const Mesh& mesh : scene.meshes) {
        write_mesh(out, mesh, scene.materials[static_cast<std::size_t>(mesh.material_id)].name);
    }
}

}  // namespace spectralium
