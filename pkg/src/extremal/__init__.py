"""Slant-extremal contours, Morse-Smale complexes and orientation flows on 2D grids."""

from .field import FieldError, NormalField, RenderSpec, ScalarField, normals_from_height, render, slant_of_height
from .morse import MsComplex, build_ms_complex, simplify
from .contours import critical_contours, extremal_rings, label_normals
from .flow import closed_flow_loops, orientation_field
from .reconstruct import flatten, harmonic_inpaint, skeleton_mask

__all__ = [
    "FieldError", "NormalField", "RenderSpec", "ScalarField", "normals_from_height", "render", "slant_of_height",
    "MsComplex", "build_ms_complex", "simplify", "critical_contours", "extremal_rings", "label_normals",
    "closed_flow_loops", "orientation_field", "flatten", "harmonic_inpaint", "skeleton_mask",
]
