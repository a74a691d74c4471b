"""Polygonal cross-sections used by the fixtures, tests and sweeps."""
from __future__ import annotations

import numpy as np

from .xsection import CrossSection


def circle(center, radius: float, n: int = 512) -> np.ndarray:
    """CCW n-gon inscribed in a circle, vertex 0 at angle 0 (n even puts one at angle pi)."""
    th = 2.0 * np.pi * np.arange(n) / n
    return np.column_stack([center[0] + radius * np.cos(th), center[1] + radius * np.sin(th)])


def ellipse(center, a: float, b: float, n: int = 512) -> np.ndarray:
    th = 2.0 * np.pi * np.arange(n) / n
    return np.column_stack([center[0] + a * np.cos(th), center[1] + b * np.sin(th)])


def rectangle(r0: float, r1: float, z0: float, z1: float) -> np.ndarray:
    return np.array([[r0, z0], [r1, z0], [r1, z1], [r0, z1]], dtype=float)


def half_disc(radius: float = 1.0, n_arc: int = 1024) -> np.ndarray:
    """Cross-section of a ball centred on the axis: semicircle plus the axis chord.

    Only the two poles sit on the axis; the chord between them is a single
    edge that resampling subdivides.
    """
    th = np.linspace(-0.5 * np.pi, 0.5 * np.pi, n_arc + 1)
    arc = np.column_stack([radius * np.cos(th), radius * np.sin(th)])
    arc[0] = (0.0, -radius)
    arc[-1] = (0.0, radius)
    return arc


def d_shape(n_arc: int = 1024) -> np.ndarray:
    """Segment r = 1, z in [-1, 1] closed by the right semicircle of radius 1 about (1, 0)."""
    th = np.linspace(-0.5 * np.pi, 0.5 * np.pi, n_arc + 1)
    arc = np.column_stack([1.0 + np.cos(th), np.sin(th)])
    arc[0] = (1.0, -1.0)
    arc[-1] = (1.0, 1.0)
    return arc


def ball(radius: float = 1.0, n_arc: int = 1024) -> CrossSection:
    return CrossSection(half_disc(radius, n_arc))


def torus(center=(2.0, 0.0), radius: float = 0.5, n: int = 512) -> CrossSection:
    return CrossSection(circle(center, radius, n))


def star(center, base: float, amps, phases, n: int = 256) -> np.ndarray:
    """Star-shaped curve rho(t) = base * (1 + sum a_k cos(k t + p_k))."""
    th = 2.0 * np.pi * np.arange(n) / n
    rho = np.full(n, base)
    for k, (a, p) in enumerate(zip(amps, phases), start=2):
        rho += base * a * np.cos(k * th + p)
    return np.column_stack([center[0] + rho * np.cos(th), center[1] + rho * np.sin(th)])
