"""Python bindings for the spectralium spectral renderer."""

from ._core import (
    DomainError,
    Error,
    ParseError,
    Scene,
    airmass,
    chromaticity,
    d65,
    display_white_luminance,
    fresnel_reflectance,
    load_scene,
    parse_scene_text,
    render,
    render_ddm,
    solar_spectrum,
    spectrum_to_xyz,
    srgb8,
    sun_vector,
    wavelengths,
    xyz_to_srgb,
)

__all__ = [
    "DomainError",
    "Error",
    "ParseError",
    "Scene",
    "airmass",
    "chromaticity",
    "d65",
    "display_white_luminance",
    "fresnel_reflectance",
    "load_scene",
    "parse_scene_text",
    "render",
    "render_ddm",
    "solar_spectrum",
    "spectrum_to_xyz",
    "srgb8",
    "sun_vector",
    "wavelengths",
    "xyz_to_srgb",
]
