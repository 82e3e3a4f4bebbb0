"""Level sets, Hausdorff content by ball coverings, isocontour measure,
coarea consistency and the boxing-inequality checker."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.fft as sfft
from scipy.spatial import ConvexHull, QhullError

from .errors import SizeError, ValidationError
from .fields import BinaryMask, Report, ScalarField
from .maximal import disk_stencil
from .spectral import gradient_l1


@dataclass(frozen=True)
class Ball:
    center: tuple
    radius: float


@dataclass(frozen=True)
class BallCover:
    balls: tuple
    alpha: float
    cost: float

    def __post_init__(self):
        object.__setattr__(self, "balls", tuple(self.balls))
        recomputed = math.fsum(b.radius**self.alpha for b in self.balls)
        if abs(recomputed - self.cost) > 1e-12 * max(1.0, abs(recomputed)):
            raise ValidationError("cover cost disagrees with its balls")

    @classmethod
    def from_balls(cls, balls, alpha):
        balls = tuple(balls)
        return cls(balls, alpha, math.fsum(b.radius**alpha for b in balls))

    def __len__(self):
        return len(self.balls)

    def to_csv_rows(self):
        return [tuple(b.center) + (b.radius,) for b in self.balls]


def superlevel_set(f, t):
    """Nodes where ``f > t`` (strict)."""
    return BinaryMask(f.grid, f.samples > t)


def dyadic_radii(grid):
    """Candidate radii ``h 2^k`` in node units, from 1 up to half the shortest side."""
    top = min(grid.dims) // 2
    return [2**k for k in range(int(math.log2(top)) + 1)]


def _ball_slices(center, rho, dims):
    """Grid slice around ``center`` and the matching slice of the stencil."""
    n = int(rho)
    gs, ss = [], []
    for c, size in zip(center, dims):
        lo, hi = c - n, c + n + 1
        gs.append(slice(max(lo, 0), min(hi, size)))
        ss.append(slice(max(lo, 0) - lo, 2 * n + 1 - (hi - min(hi, size))))
    return tuple(gs), tuple(ss)


def _count_in_ball(arr, center, rho):
    gs, ss = _ball_slices(center, rho, arr.shape)
    return int(np.count_nonzero(arr[gs] & disk_stencil(float(rho), arr.ndim)[ss]))


@lru_cache(maxsize=64)
def _stencil_spectrum(rho, shape):
    """rfft of the centred disk stencil, laid out for circular correlation on ``shape``."""
    st = disk_stencil(float(rho), len(shape))
    n = int(rho)
    buf = np.zeros(shape)
    offs = np.argwhere(st) - n
    buf[tuple((offs % np.array(shape)).T)] = 1.0
    spec = sfft.rfftn(buf)
    spec.setflags(write=False)
    return spec


def _all_counts(arr, radii):
    """Number of true nodes of ``arr`` inside each closed ball, for every centre and radius."""
    pad = tuple(int(2 ** math.ceil(math.log2(n + max(radii)))) for n in arr.shape)
    spec = sfft.rfftn(arr.astype(float), s=pad)
    crop = tuple(slice(0, n) for n in arr.shape)
    return [
        np.rint(sfft.irfftn(spec * _stencil_spectrum(rho, pad), s=pad)[crop]).astype(np.int64)
        for rho in radii
    ]


def _cover_from_nodes(grid, picks, alpha):
    balls = [Ball(grid.node_position(c), rho * grid.h) for c, rho in picks]
    return BallCover.from_balls(balls, alpha)


class _BlockMin:
    """Flat score array with cached block minima: ``argmin`` and point updates
    cost one block plus the block-minimum array instead of a full scan."""

    BLOCK = 256

    def __init__(self, values):
        self.size = values.size
        pad = -values.size % self.BLOCK
        self.values = np.concatenate([values, np.full(pad, np.inf)]).reshape(-1, self.BLOCK)
        self.mins = self.values.min(axis=1)

    def argmin(self):
        b = int(np.argmin(self.mins))
        return b * self.BLOCK + int(np.argmin(self.values[b]))

    def set(self, j, value):
        b, o = divmod(j, self.BLOCK)
        self.values[b, o] = value
        self.mins[b] = self.values[b].min()


def hausdorff_content(mask, alpha, refresh_after=256, consolidate=True):
    """Greedy covering estimate of ``H^alpha_inf`` for the true nodes of ``mask``.

    Candidates are closed balls centred on grid nodes with dyadic radii in
    ``[h, L/2]``.  Each round takes the candidate minimising
    ``r^alpha / (newly covered true nodes)``; ties go to the smaller radius,
    then to the lower node index.  Scores are evaluated lazily (a stale score
    is a lower bound) with a full FFT refresh when laziness stops paying off.
    With ``consolidate`` the greedy cover is then improved by merging picks
    (see :func:`_consolidate`); the result is never more expensive.
    """
    grid = mask.grid
    if not 0 <= alpha <= grid.d:
        raise ValidationError(f"content exponent must lie in [0, {grid.d}]")
    if mask.is_empty():
        return BallCover((), alpha, 0.0)
    radii = dyadic_radii(grid)
    uncovered = np.array(mask.bits)
    nodes = np.arange(grid.n_nodes)
    coords = np.array(np.unravel_index(nodes, grid.dims)).T
    weights = np.array([(rho * grid.h) ** alpha for rho in radii])

    n = len(nodes)

    def refresh():
        counts = np.stack([c.ravel()[nodes] for c in _all_counts(uncovered, radii)])
        with np.errstate(divide="ignore"):
            return _BlockMin(np.where(counts > 0, weights[:, None] / counts, np.inf).ravel())

    scores = refresh()
    fresh = np.ones(scores.size, dtype=bool)
    picks, hits = [], []
    stale_evals = 0
    remaining = int(np.count_nonzero(uncovered))
    while remaining:
        j = scores.argmin()
        k, i = divmod(j, n)
        if not fresh[j]:
            stale_evals += 1
            if stale_evals > refresh_after:
                scores = refresh()
                fresh[:] = True
                stale_evals = 0
                continue
            c = _count_in_ball(uncovered, coords[i], radii[k])
            scores.set(j, weights[k] / c if c else np.inf)
            fresh[j] = True
            continue
        center = tuple(int(v) for v in coords[i])
        gs, ss = _ball_slices(center, radii[k], grid.dims)
        hit = uncovered[gs] & disk_stencil(float(radii[k]), grid.d)[ss]
        remaining -= int(np.count_nonzero(hit))
        hits.append(np.argwhere(hit) + [s.start for s in gs])
        uncovered[gs] &= ~hit
        picks.append((center, radii[k]))
        fresh[:] = False
        stale_evals = 0
    if consolidate:
        picks = _consolidate(coords, picks, hits, radii, grid.h, alpha)
    return _cover_from_nodes(grid, picks, alpha)


def _extreme_points(pts):
    """Hull vertices of a node set (all points when the hull is degenerate)."""
    if len(pts) <= pts.shape[1] + 1:
        return pts
    try:
        return pts[ConvexHull(pts).vertices]
    except QhullError:
        return pts


def _far_sq(cands, pts):
    """Squared distance from every candidate centre to the farthest point of ``pts``."""
    ext = _extreme_points(pts).astype(np.int32)
    out = np.zeros(len(cands), dtype=np.int32)
    for p in ext:
        np.maximum(out, ((cands - p) ** 2).sum(axis=1, dtype=np.int32), out=out)
    return out


def _consolidate(cands, picks, hits, radii, h, alpha):
    """Local improvement of a greedy cover.

    Every true node belongs to exactly one pick's ``hits``.  A candidate ball
    that contains the hit sets of several picks replaces them whenever it is
    cheaper; the best such move is repeated until none saves anything, so the
    cost only decreases and the cover stays valid.
    """
    cands = cands.astype(np.int32)
    costs = [(rho * h) ** alpha for _, rho in picks]
    far = [_far_sq(cands, p) for p in hits]
    while len(picks) > 1:
        F = np.stack(far)
        c_arr = np.array(costs)
        best_gain, best = 0.0, None
        for rho in radii:
            w = (rho * h) ** alpha
            gain = c_arr @ (F <= rho * rho) - w
            i = int(np.argmax(gain))
            if gain[i] > best_gain + 1e-12 * w:
                best_gain, best = gain[i], (i, rho)
        if best is None:
            break
        i, rho = best
        gone = F[:, i] <= rho * rho
        merged = np.concatenate([p for p, g in zip(hits, gone) if g])
        keep = np.flatnonzero(~gone)
        picks = [picks[j] for j in keep] + [(tuple(int(v) for v in cands[i]), rho)]
        hits = [hits[j] for j in keep] + [merged]
        costs = [costs[j] for j in keep] + [(rho * h) ** alpha]
        far = [far[j] for j in keep] + [_far_sq(cands, merged)]
    return picks


def covers(mask, cover):
    """True when every true node of ``mask`` lies in some closed ball of ``cover``."""
    grid = mask.grid
    hit = np.zeros(grid.dims, dtype=bool)
    xs = grid.coordinates()
    for b in cover.balls:
        r2 = sum((x - c) ** 2 for x, c in zip(xs, b.center))
        hit |= r2 <= b.radius**2 * (1 + 1e-12)
    return bool(np.all(hit[mask.bits]))


def hausdorff_content_exact(mask, alpha, max_balls=3):
    """Exact minimum of ``sum r^alpha`` over covers by at most ``max_balls`` candidates.

    Same candidate family as :func:`hausdorff_content`.  Branch and bound over
    the first uncovered node; meant as a test oracle on grids of at most
    32 nodes per axis.  Returns ``inf`` if no cover with that many balls exists.
    """
    grid = mask.grid
    if max(grid.dims) > 32:
        raise SizeError("exact content is limited to 32 nodes per axis")
    if not 1 <= max_balls <= 3:
        raise SizeError("exact content supports at most 3 balls")
    if mask.is_empty():
        return 0.0
    radii = dyadic_radii(grid)
    coords = np.argwhere(mask.bits)
    centers = np.argwhere(np.ones(grid.dims, dtype=bool))
    n = len(coords)
    d2 = ((centers[:, None, :] - coords[None, :, :]) ** 2).sum(-1)
    # coverage matrix over true nodes, one row per candidate; candidates with
    # the same footprint on the mask are merged, keeping the cheapest
    cover_sets = {}
    for rho in radii:
        w = (rho * grid.h) ** alpha
        for row in np.packbits(d2 <= rho * rho, axis=1):
            key = row.tobytes()
            if row.any() and (key not in cover_sets or cover_sets[key][0] > w):
                cover_sets[key] = (w, row)
    cost = np.array([w for w, _ in cover_sets.values()])
    packed = np.array([row for _, row in cover_sets.values()])
    cov = np.unpackbits(packed, axis=1, count=n).astype(bool)
    by_node = []
    for j in range(n):
        ids = np.flatnonzero(cov[:, j])
        by_node.append(ids[np.argsort(cost[ids], kind="stable")])
    min_cost = cost.min()
    best = [math.inf]

    def search(rem, depth, spent):
        if not rem.any():
            best[0] = min(best[0], spent)
            return
        if depth == max_balls:
            return
        u = int(np.flatnonzero(np.unpackbits(rem, count=n))[0])
        ids = by_node[u]
        if depth == max_balls - 1:
            ok = ids[cost[ids] + spent < best[0]]
            if ok.size:
                full = np.all((packed[ok] & rem) == rem, axis=1)
                if full.any():
                    best[0] = min(best[0], spent + cost[ok[full]].min())
            return
        for c in ids:
            nxt = rem & ~packed[c]
            bound = spent + cost[c] + (min_cost if nxt.any() else 0.0)
            if bound >= best[0]:
                if cost[c] + spent >= best[0]:
                    break
                continue
            search(nxt, depth + 1, spent + cost[c])

    search(np.packbits(np.ones(n, dtype=bool)), 0, 0.0)
    return best[0]


# ------------------------------------------------------------ isocontours


def _marching_squares_length(f, t, h):
    v = [f[:-1, :-1], f[1:, :-1], f[1:, 1:], f[:-1, 1:]]
    pos = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]
    inside = [vi > t for vi in v]
    pts = []
    cross = []
    for e in range(4):
        a, b = e, (e + 1) % 4
        c = inside[a] != inside[b]
        with np.errstate(divide="ignore", invalid="ignore"):
            s = np.where(c, (t - v[a]) / (v[b] - v[a]), 0.0)
        px = pos[a][0] + s * (pos[b][0] - pos[a][0])
        py = pos[a][1] + s * (pos[b][1] - pos[a][1])
        pts.append((px, py))
        cross.append(c)
    cross = np.stack(cross)
    ncross = cross.sum(axis=0)

    def seg(e1, e2):
        return np.hypot(pts[e1][0] - pts[e2][0], pts[e1][1] - pts[e2][1])

    total = 0.0
    # two crossings: exactly one segment joining them
    two = ncross == 2
    if two.any():
        order = np.argsort(~cross[:, two], axis=0, kind="stable")
        e1, e2 = order[0], order[1]
        px = np.stack([p[0][two] for p in pts])
        py = np.stack([p[1][two] for p in pts])
        cols = np.arange(two.sum())
        total += np.hypot(px[e1, cols] - px[e2, cols], py[e1, cols] - py[e2, cols]).sum()
    # saddles: resolve with the average of the four corners
    four = ncross == 4
    if four.any():
        centre_in = (sum(v) / 4.0 > t)[four]
        c0_in = inside[0][four]
        joined = centre_in == c0_in  # c0 and c2 connected through the centre
        lens_a = seg(0, 1)[four] + seg(2, 3)[four]
        lens_b = seg(3, 0)[four] + seg(1, 2)[four]
        total += np.where(joined, lens_a, lens_b).sum()
    return float(total * h)


def boundary_measure(f, t):
    """Length (d=2) or area (d=3) of the piecewise-linear isocontour ``f = t``."""
    s = f.samples
    if not (s.min() < t < s.max()):
        return 0.0
    if f.grid.d == 2:
        return _marching_squares_length(s, t, f.grid.h)
    from skimage.measure import marching_cubes, mesh_surface_area

    verts, faces, _, _ = marching_cubes(s, level=t, spacing=(f.grid.h,) * 3)
    return float(mesh_surface_area(verts, faces))


def coarea_tv(f, n_levels=64):
    """Compare ``||grad f||_1`` with ``sum_k boundary(f = t_k) dt`` over uniform levels."""
    if n_levels < 8:
        raise ValidationError("coarea_tv needs at least 8 levels")
    lo, hi = float(f.samples.min()), float(f.samples.max())
    rep = Report()
    tv_grad = gradient_l1(f)
    if hi <= lo:
        tv_co = 0.0
    else:
        dt = (hi - lo) / n_levels
        tv_co = dt * math.fsum(boundary_measure(f, lo + (k + 0.5) * dt) for k in range(n_levels))
    rep["tv_gradient"] = tv_grad
    rep["tv_coarea"] = tv_co
    rep["ratio_defined"] = tv_grad > 0
    if tv_grad > 0:
        rep["ratio"] = tv_co / tv_grad
    return rep


def boxing_check(mask, f_and_level=None):
    """Content ``H^{d-1}_inf`` of ``mask`` against the measure of its boundary.

    With ``f_and_level`` the boundary is the isocontour of that field (the mask
    must be its superlevel set); otherwise the mask's own 0/1 indicator is
    contoured at 1/2.
    """
    grid = mask.grid
    if f_and_level is not None:
        f, level = f_and_level
        if not np.array_equal(superlevel_set(f, level).bits, mask.bits):
            raise ValidationError("mask is not the superlevel set of the supplied field")
    else:
        f, level = ScalarField(grid, mask.bits.astype(float)), 0.5
    rep = Report()
    if mask.is_empty():
        rep["content"] = 0.0
        rep["boundary"] = 0.0
        rep["ratio_defined"] = False
        return rep
    cover = hausdorff_content(mask, grid.d - 1)
    boundary = boundary_measure(f, level)
    rep["content"] = cover.cost
    rep["boundary"] = boundary
    rep["n_balls"] = len(cover)
    rep["ratio_defined"] = boundary > 0
    if boundary > 0:
        rep["ratio"] = cover.cost / boundary
    return rep
