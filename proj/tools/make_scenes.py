#!/usr/bin/env python3
"""Regenerates the sample scenes in scenes/ (geometry and data files)."""

import math
import pathlib

ROOT = pathlib.Path(__file__).resolve().parent.parent / "scenes"
DATA = ROOT / "data"
WAVELENGTHS = range(380, 781, 10)
TILE = 0.5  # nave tessellation, metres


def dist(p, q):
    return math.sqrt(sum((p[k] - q[k]) ** 2 for k in range(3)))


class MeshWriter:
    def __init__(self, material):
        self.material = material
        self.lines = []
        self.nv = 0
        self.nt = 0

    def quad(self, a, b, c, d, uv=False, tile=None):
        # Optionally split into a grid of tiles no larger than `tile` metres,
        # so big surfaces stay local to the sub-domains they pass through.
        if tile:
            nu = max(1, math.ceil(dist(a, b) / tile - 1e-9))
            nv = max(1, math.ceil(dist(a, d) / tile - 1e-9))
            if nu > 1 or nv > 1:
                def at(u, v):
                    return tuple(a[k] + u * (b[k] - a[k]) + v * (d[k] - a[k]) for k in range(3))
                for i in range(nu):
                    for j in range(nv):
                        u0, u1, v0, v1 = i / nu, (i + 1) / nu, j / nv, (j + 1) / nv
                        self.quad(at(u0, v0), at(u1, v0), at(u1, v1), at(u0, v1), uv=uv)
                return
        for p in (a, b, c, d):
            self.lines.append("v %g %g %g" % p)
        base = self.nv + 1
        self.nv += 4
        if uv:
            for t in ((0, 0), (1, 0), (1, 1), (0, 1)):
                self.lines.append("vt %g %g" % t)
            tb = self.nt + 1
            self.nt += 4
            self.lines.append("f " + " ".join("%d/%d" % (base + i, tb + i) for i in range(4)))
        else:
            self.lines.append("f %d %d %d %d" % (base, base + 1, base + 2, base + 3))

    def box(self, lo, hi, skip=(), tile=None):
        x0, y0, z0 = lo
        x1, y1, z1 = hi
        faces = {
            "-x": ((x0, y0, z0), (x0, y0, z1), (x0, y1, z1), (x0, y1, z0)),
            "+x": ((x1, y0, z0), (x1, y1, z0), (x1, y1, z1), (x1, y0, z1)),
            "-y": ((x0, y0, z0), (x1, y0, z0), (x1, y0, z1), (x0, y0, z1)),
            "+y": ((x0, y1, z0), (x0, y1, z1), (x1, y1, z1), (x1, y1, z0)),
            "-z": ((x0, y0, z0), (x0, y1, z0), (x1, y1, z0), (x1, y0, z0)),
            "+z": ((x0, y0, z1), (x1, y0, z1), (x1, y1, z1), (x0, y1, z1)),
        }
        for name, q in faces.items():
            if name not in skip:
                self.quad(*q, tile=tile)

    def text(self):
        return "mesh %s\n%s\nend\n" % (self.material, "\n".join(self.lines))


def write_spd(name, fn, comment):
    rows = ["# %s" % comment, "# wavelength_nm, value"]
    rows += ["%d, %.4f" % (w, fn(w)) for w in WAVELENGTHS]
    (DATA / name).write_text("\n".join(rows) + "\n")


def write_copper():
    # Rough smooth fit to tabulated copper optical constants.
    rows = ["# copper, approximate", "# wavelength_nm, n, k"]
    for w in WAVELENGTHS:
        s = 1.0 / (1.0 + math.exp(-(w - 580.0) / 18.0))
        n = 1.15 - 0.9 * s
        k = 2.3 + 0.0045 * (w - 380.0) + 0.4 * s
        rows.append("%d, %.4f, %.4f" % (w, n, k))
    (DATA / "copper.ior").write_text("\n".join(rows) + "\n")


def write_stained():
    # 4 x 2 texels of coloured glass, row-major from v = 0.
    def band(center, width, floor, peak):
        return lambda w: floor + (peak - floor) * math.exp(-(((w - center) / width) ** 2))

    texels = [
        band(460, 40, 0.05, 0.85), band(620, 60, 0.05, 0.9), band(580, 50, 0.1, 0.9), band(530, 40, 0.05, 0.8),
        band(640, 70, 0.05, 0.85), band(470, 50, 0.05, 0.8), band(540, 60, 0.1, 0.85), band(600, 80, 0.2, 0.9),
    ]
    out = ["# stained glass transmittance, 4 x 2 texels", "4 2", ""]
    for fn in texels:
        out += ["%d, %.4f" % (w, fn(w)) for w in WAVELENGTHS]
        out.append("")
    (DATA / "stained.tmap").write_text("\n".join(out))


def cornell():
    white = MeshWriter("white")
    white.quad((0, 0, 0), (2, 0, 0), (2, 0, 2), (0, 0, 2))  # floor
    white.quad((0, 0, 0), (0, 2, 0), (2, 2, 0), (2, 0, 0))  # back wall
    # Ceiling around a 0.8 m square skylight.
    white.quad((0, 2, 0), (0.6, 2, 0), (0.6, 2, 2), (0, 2, 2))
    white.quad((1.4, 2, 0), (2, 2, 0), (2, 2, 2), (1.4, 2, 2))
    white.quad((0.6, 2, 0), (1.4, 2, 0), (1.4, 2, 0.6), (0.6, 2, 0.6))
    white.quad((0.6, 2, 1.4), (1.4, 2, 1.4), (1.4, 2, 2), (0.6, 2, 2))
    white.box((0.25, 0, 0.35), (0.85, 1.1, 0.95), skip=("-y",))  # tall block

    red = MeshWriter("red")
    red.quad((0, 0, 0), (0, 0, 2), (0, 2, 2), (0, 2, 0))
    green = MeshWriter("green")
    green.quad((2, 0, 0), (2, 2, 0), (2, 2, 2), (2, 0, 2))
    copper = MeshWriter("copper")
    copper.box((1.15, 0, 1.0), (1.7, 0.55, 1.55), skip=("-y",))
    glass = MeshWriter("glass")
    glass.quad((0.6, 2, 0.6), (1.4, 2, 0.6), (1.4, 2, 1.4), (0.6, 2, 1.4), uv=True)

    text = "\n".join([
        "# Cornell-style box lit through a stained-glass skylight; the front is open.",
        "texture stained data/stained.tmap",
        "material white lambertian reflectance 0.75",
        "material red lambertian reflectance data/red.spd",
        "material green lambertian reflectance data/green.spd",
        "material copper conductor ior data/copper.ior",
        "material glass dielectric ior 1.5 0 map stained",
        "",
        "sun 65 30 5778 0.1 1",
        "camera 1 1 5.2  1 1 1  0 1 0  40 64 64",
        "",
        white.text(), red.text(), green.text(), copper.text(), glass.text(),
    ])
    (ROOT / "cornell.scn").write_text(text)


def nave():
    half_w, length, height = 4.0, 16.0, 6.0
    windows_z = [(2.0, 4.0), (7.0, 9.0), (12.0, 14.0)]
    sill, lintel = 2.0, 4.5

    stone = MeshWriter("stone")
    stone.quad((-half_w, 0, 0), (half_w, 0, 0), (half_w, 0, length), (-half_w, 0, length), tile=TILE)  # floor
    stone.quad((-half_w, height, 0), (-half_w, height, length), (half_w, height, length), (half_w, height, 0), tile=TILE)
    stone.quad((-half_w, 0, 0), (-half_w, height, 0), (half_w, height, 0), (half_w, 0, 0), tile=TILE)  # apse wall
    stone.quad((-half_w, 0, length), (half_w, 0, length), (half_w, height, length), (-half_w, height, length), tile=TILE)

    glass = MeshWriter("glass")
    for x in (-half_w, half_w):
        # Side wall: full-height piers between windows, spandrels above and below.
        edges = [0.0] + [z for w in windows_z for z in w] + [length]
        for i in range(0, len(edges) - 1, 2):
            z0, z1 = edges[i], edges[i + 1]
            stone.quad((x, 0, z0), (x, height, z0), (x, height, z1), (x, 0, z1), tile=TILE)
        for z0, z1 in windows_z:
            stone.quad((x, 0, z0), (x, sill, z0), (x, sill, z1), (x, 0, z1), tile=TILE)
            stone.quad((x, lintel, z0), (x, height, z0), (x, height, z1), (x, lintel, z1), tile=TILE)
            glass.quad((x, sill, z0), (x, sill, z1), (x, lintel, z1), (x, lintel, z0), uv=True)

    pillars = MeshWriter("pillar")
    for x in (-2.2, 2.2):
        for z in (3.0, 6.0, 9.0, 12.0):
            pillars.box((x - 0.25, 0, z - 0.25), (x + 0.25, height, z + 0.25), skip=("-y", "+y"), tile=TILE)

    altar = MeshWriter("gilt")
    altar.box((-0.8, 0, 0.8), (0.8, 1.0, 1.6), skip=("-y",))

    text = "\n".join([
        "# Church nave with stained-glass windows on both side walls, lit by a low",
        "# afternoon sun from the west.",
        "texture stained data/stained.tmap",
        "material stone lambertian reflectance data/stone.spd",
        "material pillar lambertian reflectance 0.6",
        "material gilt conductor ior data/copper.ior",
        "material glass dielectric ior 1.52 0 map stained",
        "",
        "sun 30 -80 5000 0.2 1",
        "camera 0 2.2 15.5  0 2.0 0  0 1 0  60 64 64",
        "",
        stone.text(), pillars.text(), altar.text(), glass.text(),
    ])
    (ROOT / "nave.scn").write_text(text)


def main():
    DATA.mkdir(parents=True, exist_ok=True)
    write_spd("red.spd", lambda w: 0.05 + 0.6 / (1 + math.exp(-(w - 590) / 15)), "red wall reflectance")
    write_spd("green.spd", lambda w: 0.06 + 0.5 * math.exp(-(((w - 530) / 45) ** 2)), "green wall reflectance")
    write_spd("stone.spd", lambda w: 0.45 + 0.15 * (w - 380) / 400, "warm limestone reflectance")
    write_copper()
    write_stained()
    cornell()
    nave()
    (ROOT / "empty.scn").write_text("# No geometry and no lights: renders black.\ncamera 0 0 5  0 0 0  0 1 0  45 4 4\n")


if __name__ == "__main__":
    main()
