"""Hat functions, atoms ``(-Delta)^(1/2) theta_R``, set majorants and the
level-set decomposition ``F = sum_j Omega_j`` with its verification."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from .capacity import BallCover, hausdorff_content, superlevel_set
from .errors import ValidationError
from .fields import Report, ScalarField, save_field, smooth_step
from .maximal import MaximalConfig, h1_norm
from .spectral import SpectralConfig, gradient_l1, half_laplacian, riesz_potential

MIN_TRANSITION = 0.25


@dataclass(frozen=True)
class HatSpec:
    """``theta = 1`` on the unit ball, 0 outside radius ``1 + transition_width``."""

    transition_width: float = 1.0

    def __post_init__(self):
        if not 0 < self.transition_width <= 1:
            raise ValidationError("transition_width must lie in (0, 1]")

    def profile(self, rho):
        """Radial profile as a function of ``|x| / R``."""
        w = self.transition_width
        rho = np.asarray(rho, dtype=float)
        return np.where(rho <= 1.0, 1.0, smooth_step(1.0 - (rho - 1.0) / w))


@dataclass(frozen=True, eq=False)
class DecompositionResult:
    F: ScalarField
    levels: list
    delta: float
    h1_estimate: float
    tv: float
    ratio: float
    domination_margin: float
    hats: ScalarField = field(default=None, repr=False)


@lru_cache(maxsize=256)
def _hat_patch(R, h, w, d, frac):
    """Hat samples on the node block around a centre offset by ``frac`` nodes (read-only)."""
    spec = HatSpec(w)
    n = int(math.ceil(R * (1 + w) / h)) + 1
    sub = [(np.arange(-n, n + 1) - f) * h for f in frac]
    pos = np.meshgrid(*sub, indexing="ij")
    patch = spec.profile(np.sqrt(sum(p**2 for p in pos)) / R)
    patch.setflags(write=False)
    return n, patch


def _add_hat(out, R, center, grid, spec):
    """Accumulate one hat into the periodic box array ``out`` in place."""
    c = [(x - o) / grid.h for x, o in zip(center, grid.origin)]
    base = [int(math.floor(v + 0.5)) for v in c]
    frac = tuple(round(v - b, 12) for v, b in zip(c, base))
    n, patch = _hat_patch(float(R), grid.h, spec.transition_width, grid.d, frac)
    idx = [np.arange(b - n, b + n + 1) % m for b, m in zip(base, out.shape)]
    out[np.ix_(*idx)] += patch
    return out


def _hat_box(R, center, grid, spec, shape):
    """Hat samples on the periodic box of ``shape`` (grid occupies the leading block)."""
    return _add_hat(np.zeros(shape), R, center, grid, spec)


def _check_inside(R, center, grid, spec, margin_nodes=4):
    support = R * (1 + spec.transition_width)
    for ax in range(grid.d):
        lo = grid.origin[ax] + margin_nodes * grid.h
        hi = grid.origin[ax] + (grid.dims[ax] - 1 - margin_nodes) * grid.h
        if center[ax] - support < lo - 1e-12 or center[ax] + support > hi + 1e-12:
            raise ValidationError(
                f"hat of radius {R:g} at {tuple(center)} leaves the grid interior"
            )


def hat_function(R, center, grid, spec=HatSpec()):
    """``theta_R`` centred at ``center``, supported inside the grid interior."""
    if R <= 0:
        raise ValidationError("hat radius must be positive")
    _check_inside(R, center, grid, spec)
    box = _hat_box(R, center, grid, spec, grid.dims)
    return ScalarField(grid, box)


def make_atom(R, center, grid, spec=HatSpec(), cfg=SpectralConfig()):
    """``Theta_R = (-Delta)^(1/2) theta_R``; its Riesz potential is ``theta_R`` again."""
    return half_laplacian(hat_function(R, center, grid, spec), cfg)


def decay_envelope(atom, R, center):
    """``max_{|x - c| >= 2R} |Theta_R(x)| (R + |x - c|)^(d+1) / R^d`` over grid nodes."""
    grid = atom.grid
    r = np.sqrt(sum((x - c) ** 2 for x, c in zip(grid.coordinates(), center)))
    far = r >= 2 * R
    if not far.any():
        raise ValidationError("no grid nodes outside B_2R")
    env = np.abs(atom.samples[far]) * (R + r[far]) ** (grid.d + 1) / R**grid.d
    return float(env.max())


def decay_check(R, grid, spec=HatSpec(), cfg=SpectralConfig()):
    """Far-field envelope of the atom at ``grid`` and at the refined grid.

    The envelope is normalised by ``R^d`` so that it is invariant under
    dilation of the atom.
    """
    half = min(grid.lengths) / 2
    if 8 * R > half * (1 + 1e-12):
        raise ValidationError(f"grid half-width {half:g} does not reach 8R = {8 * R:g}")
    rep = Report()
    values = []
    for g in (grid, grid.refine()):
        center = g.center
        values.append(decay_envelope(make_atom(R, center, g, spec, cfg), R, center))
    rep["envelope_sup"] = values[0]
    rep["envelope_sup_refined"] = values[1]
    rep["resolution_ratio"] = values[1] / values[0]
    rep["resolution_stable"] = 0.5 <= values[1] / values[0] <= 2.0
    return rep


def _box_support_ok(center_idx, support_nodes, grid, shape):
    """The hat must not wrap around the periodic box back onto the grid."""
    return all(
        c + s < m and c - s > n - m
        for c, s, n, m in zip(center_idx, support_nodes, grid.dims, shape)
    )


def hat_sum(cover, grid, spec=HatSpec(), cfg=SpectralConfig()):
    """Sum of the cover's hats on the padded box.

    Hats may extend past the grid into the zero padding.  A hat that would
    wrap around the box onto the grid has its transition width shrunk (down to
    ``MIN_TRANSITION``) before an error is raised.
    """
    shape = cfg.box_shape(grid)
    out = np.zeros(shape)
    for b in cover.balls:
        cidx = [(c - o) / grid.h for c, o in zip(b.center, grid.origin)]
        w = spec.transition_width
        while not _box_support_ok(cidx, [b.radius * (1 + w) / grid.h] * grid.d, grid, shape):
            w /= 2
            if w < MIN_TRANSITION:
                raise ValidationError(f"cover ball {b} cannot be fitted into the padded box")
        _add_hat(out, b.radius, b.center, grid, HatSpec(w))
    return ScalarField(grid, out[tuple(slice(0, n) for n in grid.dims)], out)


def set_majorant(mask, grid=None, spec=HatSpec(), cfg=SpectralConfig()):
    """``Omega = sum_j Theta_{r_j, x_j}`` over a greedy ``(d-1)``-content cover of ``mask``.

    Returns ``(Omega, cover)``; ``riesz_potential(Omega, 1)`` equals the hat sum,
    which is at least 1 on every true node.
    """
    grid = mask.grid if grid is None else grid
    if mask.grid != grid:
        raise ValidationError("mask and grid disagree")
    if mask.is_empty():
        raise ValidationError("set_majorant needs a non-empty mask")
    cover = hausdorff_content(mask, grid.d - 1)
    return half_laplacian(hat_sum(cover, grid, spec, cfg), cfg), cover


def decompose(f, n_levels=32, spec=HatSpec(), cfg=SpectralConfig(), mcfg=None):
    """Build ``F = delta * sum_j Omega_{j delta}`` with ``delta = max f / n_levels``.

    ``Omega_t`` majorises the strict superlevel set ``{f > t}``, so
    ``I_1[F] >= delta * #{j : j delta < f} >= f`` up to round-off.
    """
    if n_levels < 8:
        raise ValidationError("n_levels must be at least 8")
    if f.samples.min() < 0:
        raise ValidationError(
            "decompose needs a non-negative field; split f = f+ - f- and decompose the positive part"
        )
    grid = f.grid
    mcfg = MaximalConfig.for_grid(grid) if mcfg is None else mcfg
    top = float(f.samples.max())
    if top == 0:
        zero = ScalarField.zeros(grid)
        return DecompositionResult(zero, [], 0.0, 0.0, 0.0, 0.0, 0.0, zero)
    delta = top / n_levels
    levels = []
    hats = ScalarField(grid, np.zeros(grid.dims), np.zeros(cfg.box_shape(grid)))
    seen = {}
    for j in range(n_levels):
        t = j * delta
        mask = superlevel_set(f, t)
        if mask.is_empty():
            break
        key = mask.bits.tobytes()
        if key not in seen:
            cover = hausdorff_content(mask, grid.d - 1)
            seen[key] = (cover, hat_sum(cover, grid, spec, cfg))
        cover, level_hats = seen[key]
        levels.append((t, cover))
        hats = hats + delta * level_hats
    F = half_laplacian(hats, cfg)
    margin = float((riesz_potential(F, 1, cfg).samples - f.samples).min())
    h1 = h1_norm(F, mcfg, cfg)
    tv = gradient_l1(f)
    ratio = h1 / tv if tv > 0 else 0.0
    return DecompositionResult(F, levels, delta, h1, tv, ratio, margin, hats)


def verify_decomposition(f, result, cfg=SpectralConfig(), mcfg=None):
    """Re-evaluate ``I_1[F] >= f - delta`` and the norm chain for a decomposition."""
    if result.F.grid != f.grid:
        raise ValidationError("decomposition and field live on different grids")
    mcfg = MaximalConfig.for_grid(f.grid) if mcfg is None else mcfg
    rep = Report()
    potential = riesz_potential(result.F, 1, cfg)
    margin = float((potential.samples - f.samples).min())
    tol = result.delta + 1e-6
    tv = gradient_l1(f)
    h1 = h1_norm(result.F, mcfg, cfg)
    rep["delta"] = result.delta
    rep["domination_margin"] = margin
    rep["domination_ok"] = margin >= -tol
    rep["h1_estimate"] = h1
    rep["tv"] = tv
    rep["n_levels_used"] = len(result.levels)
    rep["n_balls"] = sum(len(c) for _, c in result.levels)
    if tv > 0:
        rep["ratio"] = h1 / tv
        level_sum = result.delta * math.fsum(c.cost for _, c in result.levels)
        base = result.delta * result.levels[0][1].cost if result.levels else 0.0
        rep["level_content_sum"] = level_sum
        rep["gustin_chain_ratio"] = level_sum / (tv + base)
    rep["ratio_defined"] = tv > 0
    return rep


def save_decomposition(result, report, out_dir):
    """Write ``F.doro``, ``report.txt``, ``report.json`` and ``levels.csv`` into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_field(result.F, out / "F.doro")
    (out / "report.txt").write_text(report.to_text())
    (out / "report.json").write_text(report.to_json())
    lines = ["level,n_balls,cost"]
    for t, cover in result.levels:
        lines.append(f"{t!r},{len(cover)},{cover.cost!r}")
    (out / "levels.csv").write_text("\n".join(lines) + "\n")
    balls = ["level," + ",".join(f"x{i}" for i in range(result.F.grid.d)) + ",radius"]
    for t, cover in result.levels:
        for row in cover.to_csv_rows():
            balls.append(",".join(repr(float(v)) for v in (t,) + row))
    (out / "balls.csv").write_text("\n".join(balls) + "\n")
    (out / "metrics.json").write_text(
        json.dumps(
            {"delta": result.delta, "h1_estimate": result.h1_estimate, "tv": result.tv,
             "ratio": result.ratio, "domination_margin": result.domination_margin},
            indent=2,
        )
        + "\n"
    )
