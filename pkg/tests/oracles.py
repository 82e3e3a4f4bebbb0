"""Independent reference computations shared by the test modules."""

import itertools

import numpy as np
from scipy import ndimage
from scipy.optimize import Bounds, LinearConstraint, milp

from majorant.capacity import dyadic_radii
from majorant.fields import BinaryMask, GridSpec


def milp_content(mask, alpha):
    """Minimum ``sum r^alpha`` over covers by node-centred dyadic balls, any count.

    Solved as a 0/1 set-cover integer program.  Returns ``(cost, n_balls)``.
    """
    g = mask.grid
    pts = np.argwhere(mask.bits)
    centers = np.argwhere(np.ones(g.dims, dtype=bool))
    d2 = ((centers[:, None, :] - pts[None, :, :]) ** 2).sum(-1)
    cols, cost = [], []
    for rho in dyadic_radii(g):
        cols.append(d2 <= rho * rho)
        cost += [(rho * g.h) ** alpha] * len(centers)
    A = np.concatenate(cols).T.astype(float)
    res = milp(
        np.array(cost),
        constraints=LinearConstraint(A, 1, np.inf),
        integrality=np.ones(len(cost)),
        bounds=Bounds(0, 1),
    )
    assert res.success
    return float(res.fun), int(round(res.x.sum()))


def random_masks(count, seed=0, sizes=(8, 16, 32)):
    """Blobby masks from thresholded smoothed noise on small square grids."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        n = int(rng.choice(sizes))
        noise = ndimage.gaussian_filter(rng.standard_normal((n, n)), rng.uniform(1, 3))
        bits = noise > np.quantile(noise, rng.uniform(0.6, 0.95))
        out.append(BinaryMask(GridSpec.square(n), bits))
    return out


def lp_vertex_optimum(c, A, b):
    """max c.x subject to A x <= b by enumerating every vertex of the polytope."""
    n = len(c)
    best = -np.inf
    for rows in itertools.combinations(range(len(b)), n):
        M = A[list(rows)]
        if abs(np.linalg.det(M)) < 1e-10:
            continue
        x = np.linalg.solve(M, b[list(rows)])
        if np.all(A @ x <= b + 1e-9):
            best = max(best, float(c @ x))
    return best
