"""Radiance meshes: Delaunay tetrahedra with per-cell density and linear color."""

from ._core import (
    Camera,
    Checkpoint,
    Error,
    Mesh,
    SyntheticScene,
    Trainer,
    integrate_segment,
    load_checkpoint,
    orbit_cameras,
    random_teacher,
    render,
    selftest,
    synthetic_scene,
    triangulate,
)

__all__ = [
    "Camera",
    "Checkpoint",
    "Error",
    "Mesh",
    "SyntheticScene",
    "Trainer",
    "integrate_segment",
    "load_checkpoint",
    "orbit_cameras",
    "random_teacher",
    "render",
    "selftest",
    "synthetic_scene",
    "triangulate",
]
