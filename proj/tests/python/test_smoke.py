import math
import os
from pathlib import Path

import numpy as np
import pytest

import spectralium as sp

SOURCE_DIR = Path(os.environ.get("SPECTRALIUM_SOURCE_DIR", Path(__file__).resolve().parents[2]))
SCENES = SOURCE_DIR / "scenes"


def test_wavelength_grid():
    w = sp.wavelengths
    assert len(w) == 81
    assert w[0] == 380.0 and w[-1] == 780.0


def test_fresnel_normal_incidence():
    assert sp.fresnel_reflectance(1.0, 1.5, 0.0, 1.0) == pytest.approx(0.04, abs=1e-12)
    n, k = 0.47, 2.9
    expect = ((n - 1) ** 2 + k**2) / ((n + 1) ** 2 + k**2)
    assert sp.fresnel_reflectance(1.0, n, k, 1.0) == pytest.approx(expect, abs=1e-12)


def test_colour_pipeline():
    X, Y, Z = sp.spectrum_to_xyz([1.0] * 81)
    x, y = sp.chromaticity(X, Y, Z)
    assert abs(x - 1 / 3) < 0.01 and abs(y - 1 / 3) < 0.01
    white = sp.spectrum_to_xyz(sp.d65())
    rgb = sp.xyz_to_srgb(*white, white[1])
    assert all(abs(c - 1.0) <= 1 / 255 for c in rgb)
    with pytest.raises(ValueError):
        sp.spectrum_to_xyz([1.0] * 10)
    with pytest.raises(sp.DomainError):
        sp.xyz_to_srgb(1.0, 1.0, 1.0, 0.0)


def test_sunlight():
    assert sp.airmass(30.0) == pytest.approx(2.0)
    high = sp.solar_spectrum(5778.0, 60.0, 0.1, 1.0)
    low = sp.solar_spectrum(5778.0, 5.0, 0.1, 1.0)
    i450, i650 = 14, 54
    assert low[i450] / low[i650] < high[i450] / high[i650]
    v = sp.sun_vector(90.0, 0.0)
    assert v[1] == pytest.approx(1.0)


def test_scene_loading_and_errors():
    scene = sp.load_scene(str(SCENES / "cornell.scn"))
    assert scene.triangle_count > 0
    assert "glass" in scene.material_names
    assert scene.light_count == 1
    with pytest.raises(sp.ParseError):
        sp.parse_scene_text("bogus 1 2 3\n")


def test_render_and_ddm_agree():
    scene = sp.load_scene(str(SCENES / "cornell.scn"))
    ref = sp.render(scene, width=12, height=12, spp=1, photons=500)
    assert ref.shape == (12, 12, 3)
    assert np.all(np.isfinite(ref)) and ref.max() > 0
    img, metrics = sp.render_ddm(scene, subdomains=4, workers=2, max_resident=2, width=12, height=12, photons=500)
    assert np.allclose(img, ref, rtol=1e-6, atol=1e-12)
    assert metrics["seeded"] + metrics["spawned"] == metrics["retired"]
    assert metrics["migrations"] > 0
    rgb = sp.srgb8(img, sp.display_white_luminance(scene))
    assert rgb.dtype == np.uint8 and rgb.shape == (12, 12, 3)


def test_empty_scene_is_black():
    scene = sp.load_scene(str(SCENES / "empty.scn"))
    img = sp.render(scene, width=2, height=2)
    assert not img.any()
    assert math.isfinite(sp.display_white_luminance(scene))
