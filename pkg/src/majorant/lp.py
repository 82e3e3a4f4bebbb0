"""Dense two-phase tableau simplex for small linear programs.

Problems are reduced to ``min c.x  s.t.  G x >= g, E x = e, x >= 0`` and
solved either directly or through their dual, whichever has fewer rows.
The final basis is re-solved with the original data, and the primal and
dual objective values are compared before a solution is returned.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg.blas import dger

from .errors import MajorantError, ValidationError

RELATIONS = ("<=", ">=", "=")
PIVOT_TOL = 1e-9
FEAS_TOL = 1e-8
GAP_TOL = 1e-7
DEGENERATE_STREAK = 50  # Dantzig pivots with zero step before switching to Bland
REINVERT_EVERY = 400
HARRIS_TOL = 1e-12
PERTURB = 1e-7  # relative size of the anti-degeneracy perturbation of b


class CertificationError(MajorantError):
    """The final basis does not certify optimality (numerical breakdown)."""


@dataclass(frozen=True, eq=False)
class LinearProgram:
    """``objective . x`` subject to ``matrix[i] . x  relations[i]  rhs[i]`` and bounds.

    ``lower``/``upper`` default to ``0`` and ``+inf``; use ``-inf`` for free variables.
    """

    objective: np.ndarray
    matrix: np.ndarray
    relations: tuple
    rhs: np.ndarray
    lower: np.ndarray = None
    upper: np.ndarray = None
    maximize: bool = False

    def __post_init__(self):
        c = np.asarray(self.objective, dtype=float).ravel()
        n = c.size
        A = np.asarray(self.matrix, dtype=float).reshape(-1, n) if n else np.zeros((0, 0))
        b = np.asarray(self.rhs, dtype=float).ravel()
        rel = tuple(self.relations)
        lo = np.zeros(n) if self.lower is None else np.broadcast_to(np.asarray(self.lower, float), (n,)).copy()
        hi = np.full(n, np.inf) if self.upper is None else np.broadcast_to(np.asarray(self.upper, float), (n,)).copy()
        if n == 0:
            raise ValidationError("linear program needs at least one variable")
        if A.shape[0] != b.size or len(rel) != b.size:
            raise ValidationError("matrix rows, relations and rhs must have equal length")
        if any(r not in RELATIONS for r in rel):
            raise ValidationError(f"relations must be among {RELATIONS}")
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
            raise ValidationError("objective, matrix and rhs must be finite")
        if np.any(np.isnan(lo)) or np.any(np.isnan(hi)) or np.any(lo == np.inf) or np.any(hi == -np.inf):
            raise ValidationError("invalid variable bounds")
        for name, val in (("objective", c), ("matrix", A), ("rhs", b), ("lower", lo), ("upper", hi)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)
        object.__setattr__(self, "relations", rel)

    @property
    def n_vars(self):
        return self.objective.size

    @property
    def n_rows(self):
        return self.rhs.size

    def residuals(self, x):
        """Largest violation over constraint rows and variable bounds."""
        ax = self.matrix @ x - self.rhs
        viol = [0.0]
        for rel, r in zip(self.relations, ax):
            viol.append(max(r, 0.0) if rel == "<=" else max(-r, 0.0) if rel == ">=" else abs(r))
        viol.append(float(np.max(np.maximum(self.lower - x, 0.0), initial=0.0)))
        viol.append(float(np.max(np.maximum(x - self.upper, 0.0), initial=0.0)))
        return max(viol)


@dataclass(frozen=True, eq=False)
class LPSolution:
    """``duals`` holds one multiplier per constraint row (``None`` unless optimal)."""

    status: str
    x: np.ndarray = None
    value: float = None
    duals: np.ndarray = None
    gap: float = None
    iterations: int = 0

    @property
    def optimal(self):
        return self.status == "optimal"


# --- canonical form ------------------------------------------------------


@dataclass
class _Canonical:
    """``min c.x + offset`` s.t. ``G x >= g``, ``E x = e``, ``x >= 0``."""

    c: np.ndarray
    G: np.ndarray
    g: np.ndarray
    E: np.ndarray
    e: np.ndarray
    offset: float
    recover: object  # canonical x -> original x
    row_map: list  # original row -> (block, index, sign)
    free_pairs: list  # k such that columns k, k+1 split one free variable


def _canonicalize(lp):
    n = lp.n_vars
    cols = []  # per original var: list of (canonical col, coefficient)
    shift = np.zeros(n)
    ncol = 0
    bound_rows = []
    for j in range(n):
        lo, hi = lp.lower[j], lp.upper[j]
        if np.isfinite(lo):
            shift[j] = lo
            cols.append([(ncol, 1.0)])
            if np.isfinite(hi):
                bound_rows.append((ncol, hi - lo))
            ncol += 1
        elif np.isfinite(hi):
            shift[j] = hi
            cols.append([(ncol, -1.0)])
            ncol += 1
        else:
            cols.append([(ncol, 1.0), (ncol + 1, -1.0)])
            ncol += 2
    free_pairs = [entries[0][0] for entries in cols if len(entries) == 2]
    T = np.zeros((n, ncol))  # x = shift + T z
    for j, entries in enumerate(cols):
        for k, s in entries:
            T[j, k] = s
    sign = -1.0 if lp.maximize else 1.0
    c = sign * (T.T @ lp.objective)
    offset = sign * float(lp.objective @ shift)
    A = lp.matrix @ T
    b = lp.rhs - lp.matrix @ shift
    G_rows, g_vals, E_rows, e_vals, row_map = [], [], [], [], []
    for i, rel in enumerate(lp.relations):
        if rel == "=":
            row_map.append(("E", len(E_rows), 1.0))
            E_rows.append(A[i])
            e_vals.append(b[i])
        else:
            s = 1.0 if rel == ">=" else -1.0
            row_map.append(("G", len(G_rows), s))
            G_rows.append(s * A[i])
            g_vals.append(s * b[i])
    for k, width in bound_rows:
        row = np.zeros(ncol)
        row[k] = -1.0
        G_rows.append(row)
        g_vals.append(-width)
    G = np.array(G_rows).reshape(-1, ncol)
    E = np.array(E_rows).reshape(-1, ncol)
    return _Canonical(
        c, G, np.array(g_vals), E, np.array(e_vals), offset, lambda z: shift + T @ z, row_map,
        free_pairs,
    )


# --- tableau simplex on  min c.x, A x = b, x >= 0 ---------------------------


class _Tableau:
    """Dense tableau ``B^-1 [A | b]`` with reduced costs, refreshed from ``A`` periodically."""

    def __init__(self, A, b, c, basis):
        self.A, self.b, self.c = A, b, c
        self.basis = list(basis)
        self.iterations = 0
        self.reinvert()

    def reinvert(self, b=None):
        if b is not None:
            self.b = b
        B = self.A[:, self.basis]
        self.T = np.asfortranarray(np.linalg.solve(B, np.column_stack([self.A, self.b])))
        y = np.linalg.solve(B.T, self.c[self.basis])
        self.cost = self.c - y @ self.A
        self.since_reinvert = 0

    @property
    def rhs(self):
        return self.T[:, -1]

    def pivot(self, r, q):
        T = self.T
        T[r] /= T[r, q]
        col = T[:, q].copy()
        col[r] = 0.0
        self.T = T = dger(-1.0, col, T[r].copy(), a=T, overwrite_a=1)  # in-place rank-1 update
        self.cost -= self.cost[q] * T[r, :-1]
        self.cost[q] = 0.0
        self.basis[r] = q
        self.iterations += 1
        self.since_reinvert += 1
        if self.since_reinvert >= REINVERT_EVERY:
            self.reinvert()

    def _check_budget(self, max_iter):
        if self.iterations >= max_iter:
            raise CertificationError("simplex iteration limit reached")

    def primal(self, max_iter):
        """Primal simplex to optimality; returns 'optimal' or 'unbounded'.

        Dantzig pricing with a Harris two-pass ratio test; after a run of
        degenerate pivots, Bland's rule takes over until progress resumes.
        """
        streak = 0
        scale = max(1.0, float(np.abs(self.c).max(initial=0.0)))
        while True:
            self._check_budget(max_iter)
            neg = self.cost < -PIVOT_TOL * scale
            if not neg.any():
                return "optimal"
            bland = streak >= DEGENERATE_STREAK
            q = int(np.flatnonzero(neg)[0]) if bland else int(np.argmin(self.cost))
            col = self.T[:, q]
            pos = col > PIVOT_TOL * max(1.0, float(np.abs(col).max()))
            if not pos.any():
                return "unbounded"
            rhs = np.maximum(self.rhs[pos], 0.0)
            rows = np.flatnonzero(pos)
            if bland:
                ratios = rhs / col[pos]
                ties = rows[ratios <= ratios.min() * (1 + 1e-12) + 1e-15]
                r = int(ties[np.argmin(np.asarray(self.basis)[ties])])
            else:
                bound = ((rhs + HARRIS_TOL) / col[pos]).min()
                ok = rows[rhs / col[pos] <= bound]
                r = int(ok[np.argmax(col[ok])])
            streak = streak + 1 if self.rhs[r] <= 1e-12 else 0
            self.pivot(r, q)

    def dual(self, max_iter):
        """Dual simplex until the basis is primal feasible; returns 'feasible' or 'infeasible'."""
        while True:
            self._check_budget(max_iter)
            rhs = self.rhs
            tol = FEAS_TOL * max(1.0, float(np.abs(self.b).max(initial=0.0)))
            r = int(np.argmin(rhs))
            if rhs[r] >= -tol:
                return "feasible"
            row = self.T[r, :-1]
            cand = np.flatnonzero(row < -PIVOT_TOL * max(1.0, float(np.abs(row).max())))
            if cand.size == 0:
                return "infeasible"
            ratios = np.maximum(self.cost[cand], 0.0) / -row[cand]
            best = ratios.min()
            ties = cand[ratios <= best + 1e-12 * max(1.0, best)]
            self.pivot(r, int(ties[np.argmax(-row[ties])]))

    def finish(self, b, max_iter):
        """Swap in the exact right-hand side and restore primal and dual feasibility."""
        self.reinvert(b)
        for _ in range(5):
            if self.dual(max_iter) == "infeasible":
                return "infeasible"
            status = self.primal(max_iter)
            if status != "optimal":
                return status
            self.reinvert()
            tol = FEAS_TOL * max(1.0, float(np.abs(b).max(initial=0.0)))
            scale = max(1.0, float(np.abs(self.c).max(initial=0.0)))
            if self.rhs.min() >= -tol and self.cost.min() >= -PIVOT_TOL * scale:
                return "optimal"
        raise CertificationError("simplex failed to settle on an optimal basis")


def _perturbation(b, seed=0):
    rng = np.random.default_rng(seed)
    return PERTURB * (1.0 + np.abs(b)) * rng.uniform(0.5, 1.0, size=b.shape)


def _simplex(A, b, c, max_iter):
    """Two-phase simplex on standard form.  Returns (status, x, y, iterations).

    Both phases run on a slightly perturbed right-hand side to avoid
    degenerate stalling; each phase then finishes on the exact data.
    """
    m, n = A.shape
    if m == 0:
        if np.any(c < -PIVOT_TOL):
            return "unbounded", None, None, 0
        return "optimal", np.zeros(n), np.zeros(0), 0
    # reuse slack-like unit columns as the starting basis; rows with b = 0 may
    # be negated freely, which saves an artificial when the unit entry is -1
    flip = b < 0
    basis = [-1] * m
    unit = np.flatnonzero((A != 0).sum(axis=0) == 1)
    for j in unit:
        i = int(np.flatnonzero(A[:, j])[0])
        if basis[i] >= 0:
            continue
        if (A[i, j] > 0) != flip[i]:
            basis[i] = int(j)
        elif b[i] == 0:
            flip[i] = not flip[i]
            basis[i] = int(j)
    A = np.where(flip[:, None], -A, A)
    b = np.abs(b)
    bp = b + _perturbation(b)
    need = [i for i in range(m) if basis[i] < 0]
    iterations = 0
    if need:
        A1 = np.hstack([A, np.zeros((m, len(need)))])
        for k, i in enumerate(need):
            A1[i, n + k] = 1.0
            basis[i] = n + k
        tab = _Tableau(A1, bp, np.where(np.arange(n + len(need)) < n, 0.0, 1.0), basis)
        tab.primal(max_iter)
        tab.finish(b, max_iter)
        iterations = tab.iterations
        infeas = float(tab.rhs[[k for k, j in enumerate(tab.basis) if j >= n]].sum())
        if infeas > FEAS_TOL * max(1.0, float(b.max())):
            return "infeasible", None, None, iterations
        # drive zero-level artificials out of the basis; drop redundant rows
        keep = list(range(m))
        for r in range(m):
            if tab.basis[r] >= n:
                cand = np.flatnonzero(np.abs(tab.T[r, :n]) > 1e-7)
                if cand.size:
                    tab.pivot(r, int(cand[np.argmax(np.abs(tab.T[r, cand]))]))
                else:
                    keep.remove(r)
        if len(keep) < m:
            status, x, y_sub, it = _simplex(A[keep], b[keep], c, max_iter)
            if status != "optimal":
                return status, x, None, iterations + it
            y = np.zeros(m)
            y[keep] = y_sub
            return status, x, np.where(flip, -y, y), iterations + it
        basis = tab.basis
    final = _Tableau(A, b, c, basis)
    final.iterations = iterations
    # perturb the basic solution itself so the start stays feasible
    bp = b + A[:, final.basis] @ _perturbation(np.maximum(final.rhs, 0.0))
    final.reinvert(bp)
    if final.primal(max_iter) == "unbounded":
        return "unbounded", None, None, final.iterations
    status = final.finish(b, max_iter)
    if status != "optimal":
        return status, None, None, final.iterations
    x = np.zeros(n)
    x[final.basis] = np.maximum(final.rhs, 0.0)
    y = np.linalg.solve(A[:, final.basis].T, c[final.basis])
    return "optimal", x, np.where(flip, -y, y), final.iterations


def _solve_canonical(cf, max_iter):
    """Solve the canonical problem directly.  Returns (status, z, y_G, y_E, iters)."""
    mg, me = cf.G.shape[0], cf.E.shape[0]
    ncol = cf.c.size
    A = np.zeros((mg + me, ncol + mg))
    A[:mg, :ncol] = cf.G
    A[:mg, ncol:] = -np.eye(mg)
    A[mg:, :ncol] = cf.E
    b = np.concatenate([cf.g, cf.e])
    c = np.concatenate([cf.c, np.zeros(mg)])
    status, x, y, it = _simplex(A, b, c, max_iter)
    if status != "optimal":
        return status, None, None, None, it
    return status, x[:ncol], y[:mg], y[mg:], it


def _solve_via_dual(cf, max_iter):
    """Solve ``max g.y + e.w  s.t.  G^T y + E^T w <= c, y >= 0`` and read off the primal.

    A split free variable ``z+ - z-`` turns into a single equality row.
    """
    mg, me = cf.G.shape[0], cf.E.shape[0]
    ncol = cf.c.size
    M = np.hstack([cf.G.T, cf.E.T])  # ncol x (mg + me)
    rhs = np.concatenate([cf.g, cf.e])
    minus = {k + 1 for k in cf.free_pairs}
    plain = [k for k in range(ncol) if k not in minus and k not in cf.free_pairs]
    pairs = list(cf.free_pairs)
    # canonical dual over (y >= 0, w+ >= 0, w- >= 0): min -rhs.(y, w)
    Mx = np.hstack([M, -M[:, mg:]])
    obj = np.concatenate([-rhs, cf.e])
    dual = _Canonical(
        obj,
        -Mx[plain],
        -cf.c[plain],
        -Mx[pairs].reshape(len(pairs), Mx.shape[1]),
        -cf.c[pairs],
        0.0,
        None,
        [],
        [],
    )
    status, v, zG, zE, it = _solve_canonical(dual, max_iter)
    if status == "unbounded":
        return "infeasible", None, None, None, it
    if status == "infeasible":
        return None, None, None, None, it  # primal unbounded or infeasible
    z = np.zeros(ncol)
    z[plain] = zG
    for k, w in zip(pairs, zE):
        z[k], z[k + 1] = max(w, 0.0), max(-w, 0.0)
    return "optimal", z, v[:mg], v[mg : mg + me] - v[mg + me :], it


def solve_lp(lp, max_iter=200_000, orient=True):
    """Optimise ``lp`` by dense simplex; infeasible or unbounded problems are a status.

    With ``orient`` the smaller of the primal and dual tableaux is used.  The
    returned solution carries the row duals and the certified duality gap.
    """
    cf = _canonicalize(lp)
    rows_primal = cf.G.shape[0] + cf.E.shape[0]
    rows_dual = cf.c.size - len(cf.free_pairs)
    status = None
    iters = 0
    if orient and rows_dual < rows_primal:
        status, z, yG, yE, iters = _solve_via_dual(cf, max_iter)
    if status is None:
        status, z, yG, yE, it = _solve_canonical(cf, max_iter)
        iters += it
    if status != "optimal":
        return LPSolution(status, iterations=iters)
    z = np.maximum(z, 0.0)
    primal = float(cf.c @ z)
    dual = float(cf.g @ yG + cf.e @ yE)
    gap = abs(primal - dual)
    sign = -1.0 if lp.maximize else 1.0
    value = sign * (primal + cf.offset)
    x = cf.recover(z)
    if gap > GAP_TOL * max(1.0, abs(primal)):
        raise CertificationError(f"primal {primal!r} and dual {dual!r} disagree")
    viol = lp.residuals(x)
    if viol > FEAS_TOL * max(1.0, float(np.abs(lp.rhs).max(initial=0.0))):
        raise CertificationError(f"solution violates a constraint by {viol:.3e}")
    duals = np.zeros(lp.n_rows)
    for i, (block, k, s) in enumerate(cf.row_map):
        duals[i] = sign * s * (yG[k] if block == "G" else yE[k])
    return LPSolution("optimal", x, value, duals, gap, iters)
