"""Named, deterministic field and shape collections used by the checks and the CLI."""

from __future__ import annotations

import numpy as np

from .fields import (
    FRAME_WIDTH,
    DiscreteMeasure,
    GridSpec,
    ScalarField,
    _zero_frame,
    make_test_field,
    smooth_indicator,
)
from .errors import ValidationError

FIELD_NAMES = (
    "gauss_wide",
    "gauss_narrow",
    "gauss_offset",
    "disk",
    "annulus",
    "two_bumps",
    "random_1",
    "random_2",
    "random_3",
    "random_4",
)
SHAPE_NAMES = ("disk", "ellipse", "annulus", "two_disks", "thin_bar")


def _room(grid):
    """Usable radius around the centre: the frame-free half-width, capped at 0.4 L."""
    L = min(grid.lengths)
    return min(0.5 * L - (FRAME_WIDTH + 1) * grid.h, 0.4 * L)


def corpus_field(name, grid):
    """One of the ten corpus fields, sized to fit ``grid`` (down to 16 nodes per axis)."""
    H = _room(grid)
    h = grid.h
    c = grid.center
    width = max(h, 0.1 * H)
    if name == "gauss_wide":
        return make_test_field("gauss_bump", grid, {"sigma": H / 3})
    if name == "gauss_narrow":
        return make_test_field("gauss_bump", grid, {"sigma": H / 5})
    if name == "gauss_offset":
        shifted = (c[0] + H / 4,) + tuple(c[1:])
        return make_test_field("gauss_bump", grid, {"sigma": H / 4, "center": shifted})
    if name == "disk":
        return make_test_field("smoothed_disk", grid, {"radius": 0.6 * H, "width": max(2 * h, width)})
    if name == "annulus":
        return make_test_field(
            "annulus", grid, {"radius": 0.75 * H, "inner": 0.4 * H, "width": width}
        )
    if name == "two_bumps":
        return make_test_field("two_bumps", grid, {"radius": 0.45 * H, "separation": H})
    if name.startswith("random_"):
        seed = int(name.split("_", 1)[1])
        params = {"radius_min": 0.3 * H, "radius_max": 0.5 * H, "spread": H, "count": 4}
        return make_test_field("random_smooth", grid, params, seed=seed)
    raise ValidationError(f"unknown corpus field {name!r}")


def field_corpus(grid, names=FIELD_NAMES):
    """``[(name, field)]`` for the requested corpus members."""
    return [(name, corpus_field(name, grid)) for name in names]


def near_indicator_disks(grid, widths_in_h=(2, 4, 8), radius_fraction=0.3):
    """Smoothed disks whose transition widths are the given multiples of ``h``."""
    L = min(grid.lengths)
    return [
        (
            f"disk_w{w}h",
            make_test_field("smoothed_disk", grid, {"radius": radius_fraction * L, "width": w * grid.h}),
        )
        for w in widths_in_h
    ]


# --- shapes for the boxing comparison ------------------------------------------


def shape_field(name, grid, scale=1.0):
    """Smooth field whose 1/2-superlevel set is the named shape.

    ``scale`` multiplies every length of the shape about the grid centre; the
    transition width scales with it so that doubling ``scale`` on a grid with
    half the spacing reproduces the same picture.
    """
    if grid.d != 2:
        raise ValidationError("the shape corpus is two-dimensional")
    x, y = grid.coordinates()
    cx, cy = grid.center
    L = min(grid.lengths)
    s = scale * L / 8  # base length unit
    w = 2 * scale * L / 64
    dx, dy = x - cx, y - cy
    if name == "disk":
        dist = np.hypot(dx, dy) - 1.5 * s
    elif name == "ellipse":
        a, b = 2.0 * s, 1.0 * s
        dist = b * (np.hypot(dx / a, dy / b) - 1.0)
    elif name == "annulus":
        r = np.hypot(dx, dy)
        dist = np.maximum(r - 2.0 * s, 1.0 * s - r)
    elif name == "two_disks":
        d1 = np.hypot(dx + 1.2 * s, dy) - 0.8 * s
        d2 = np.hypot(dx - 1.2 * s, dy) - 0.8 * s
        dist = np.minimum(d1, d2)
    elif name == "thin_bar":
        half_len, half_th = 2.5 * s, 0.25 * s
        px = np.clip(dx, -half_len, half_len)
        dist = np.hypot(dx - px, dy) - half_th
    else:
        raise ValidationError(f"unknown shape {name!r}")
    f = smooth_indicator(dist, w)
    if np.any(f[:FRAME_WIDTH]) or np.any(f[-FRAME_WIDTH:]) or np.any(f[:, :FRAME_WIDTH]) or np.any(f[:, -FRAME_WIDTH:]):
        raise ValidationError(f"shape {name!r} at scale {scale} leaves the grid interior")
    return ScalarField(grid, _zero_frame(f))


def shape_pairs(base_resolution=64, names=SHAPE_NAMES):
    """Each shape on a ``base_resolution`` grid and, doubled in size, on a grid with
    the same spacing and twice the nodes per axis."""
    coarse = GridSpec.square(base_resolution)
    fine = GridSpec.square(2 * base_resolution, h=coarse.h)
    return [(name, shape_field(name, coarse), shape_field(name, fine)) for name in names]


# --- random measures --------------------------------------------------------------


def random_measure(grid, seed, n_atoms=None):
    """Sparse non-negative point masses plus a smooth background, frame kept empty."""
    rng = np.random.default_rng(seed)
    n_atoms = int(rng.integers(3, 12)) if n_atoms is None else n_atoms
    masses = np.zeros(grid.dims)
    lo, hi = FRAME_WIDTH, [n - FRAME_WIDTH for n in grid.dims]
    for _ in range(n_atoms):
        idx = tuple(int(rng.integers(lo, m)) for m in hi)
        masses[idx] += rng.uniform(0.2, 1.0) * grid.cell_volume ** ((grid.d - 1) / grid.d)
    if rng.random() < 0.5:
        bg = make_test_field(
            "gauss_bump", grid, {"sigma": rng.uniform(0.05, 0.15) * min(grid.lengths)}
        ).samples
        masses += rng.uniform(0.1, 1.0) * bg * grid.cell_volume
    return DiscreteMeasure(grid, masses)


def measure_corpus(grid, seed=1, count=20):
    """``count`` random measures with seeds ``seed, seed + 1, ...``."""
    return [random_measure(grid, seed + k) for k in range(count)]
