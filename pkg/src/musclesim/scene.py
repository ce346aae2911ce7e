"""Graspable object primitives and signed-distance queries.

Objects live in the hand frame (x distal, y radial, z palmar) and stay fixed
during a simulation: the hand closes around them, they do not move.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

GRAVITY_M_PER_S2 = 9.81


@dataclass(frozen=True)
class Sphere:
    center_mm: tuple[float, float, float]
    radius_mm: float
    mass_g: float = 0.0
    name: str = "sphere"


@dataclass(frozen=True)
class Cylinder:
    """Cylinder with axis parallel to y (lying across the palm)."""

    center_mm: tuple[float, float, float]
    radius_mm: float
    half_length_mm: float = 60.0
    mass_g: float = 0.0
    name: str = "cylinder"


@dataclass(frozen=True)
class Box:
    center_mm: tuple[float, float, float]
    half_extents_mm: tuple[float, float, float]
    mass_g: float = 0.0
    name: str = "box"

SceneObject = Sphere | Cylinder | Box


def signed_distance(obj: SceneObject, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Signed distance (negative inside) and outward unit normal per point.

    points: (n, 3). Returns (d (n,), normal (n, 3)).
    """
    p = np.atleast_2d(np.asarray(points, dtype=float))
    c = np.asarray(obj.center_mm, dtype=float)
    if isinstance(obj, Sphere):
        rel = p - c
        dist = np.linalg.norm(rel, axis=1)
        safe = np.where(dist > 1e-12, dist, 1.0)
        normal = rel / safe[:, None]
        normal[dist <= 1e-12] = (0.0, 0.0, 1.0)
        return dist - obj.radius_mm, normal
    if isinstance(obj, Cylinder):
        rel = p - c
        radial = rel[:, [0, 2]]
        dist = np.linalg.norm(radial, axis=1)
        safe = np.where(dist > 1e-12, dist, 1.0)
        normal = np.zeros_like(p)
        normal[:, 0] = radial[:, 0] / safe
        normal[:, 2] = radial[:, 1] / safe
        normal[dist <= 1e-12] = (0.0, 0.0, 1.0)
        d = dist - obj.radius_mm
        # Outside the finite extent along the axis: treat as no contact.
        outside = np.abs(rel[:, 1]) > obj.half_length_mm
        d = np.where(outside, np.maximum(d, np.abs(rel[:, 1]) - obj.half_length_mm), d)
        return d, normal
    if isinstance(obj, Box):
        h = np.asarray(obj.half_extents_mm, dtype=float)
        rel = p - c
        q = np.abs(rel) - h
        outside = np.maximum(q, 0.0)
        d_out = np.linalg.norm(outside, axis=1)
        d_in = np.minimum(np.max(q, axis=1), 0.0)
        d = d_out + d_in
        normal = np.zeros_like(p)
        is_out = d_out > 1e-12
        normal[is_out] = np.sign(rel[is_out]) * outside[is_out]
        norms = np.linalg.norm(normal, axis=1)
        ok = norms > 1e-12
        normal[ok] /= norms[ok, None]
        # Inside: push out through the nearest face.
        inside = ~is_out
        if np.any(inside):
            face = np.argmax(q[inside], axis=1)
            n_in = np.zeros((int(np.sum(inside)), 3))
            rows = np.arange(n_in.shape[0])
            n_in[rows, face] = np.sign(rel[inside][rows, face])
            n_in[n_in[rows, face] == 0.0] = (0.0, 0.0, 1.0)
            normal[inside] = n_in
        return d, normal
    raise TypeError(f"unknown scene object {type(obj)!r}")


def required_hold_force_n(obj: SceneObject, friction_coefficient: float) -> float:
    """Total normal force needed to hold the object against gravity."""
    weight_n = obj.mass_g / 1000.0 * GRAVITY_M_PER_S2
    return weight_n / friction_coefficient


# Default object library for the grasp suite (sizes in mm, masses in g).
def tennis_ball() -> Sphere:
    return Sphere(center_mm=(52.0, 0.0, 30.0), radius_mm=33.5, mass_g=57.0, name="sphere67")


def can_272g() -> Box:
    return Box(center_mm=(52.0, 0.0, 26.0), half_extents_mm=(26.0, 40.0, 26.0),
               mass_g=272.0, name="box272")


def heavy_box_5kg() -> Box:
    return Box(center_mm=(52.0, 0.0, 26.0), half_extents_mm=(26.0, 40.0, 26.0),
               mass_g=5000.0, name="box5000")


OBJECT_LIBRARY = {
    "sphere67": tennis_ball,
    "box272": can_272g,
    "box5000": heavy_box_5kg,
}
