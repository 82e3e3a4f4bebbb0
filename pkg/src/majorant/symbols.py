"""Constant-coefficient operators ``A(d)`` given by homogeneous matrix symbols,
the elliptic and cancelling checkers, and the pair of small linear programs
comparing an H^1 minimisation with a fractional-maximal maximisation."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
import scipy.fft as sfft
from scipy.optimize import minimize, minimize_scalar
from scipy.spatial.transform import Rotation

from .errors import ConfigError, MajorantError, ValidationError
from .fields import DiscreteMeasure, GridSpec, Report, ScalarField, VectorField, grid_integral
from .lp import LinearProgram, solve_lp
from .maximal import MaximalConfig
from .spectral import (
    SpectralConfig,
    gaussian_multiplier,
    riesz_potential,
    spectral_derivative,
    wavenumbers,
)

RANK_TOL = 1e-8
IMAG_TOL = 1e-10
MAX_LP_AXIS = 20


@dataclass(frozen=True, eq=False)
class OperatorSymbol:
    """``A(xi, e) = sum_{|beta| = m} xi^beta coeffs[beta] e``.

    ``coeffs`` maps multi-indices (tuples of length ``d``) to ``dim_f x dim_e``
    real matrices.
    """

    m: int
    dim_e: int
    dim_f: int
    coeffs: dict

    def __post_init__(self):
        if not self.coeffs:
            raise ValidationError("symbol needs at least one coefficient")
        clean = {}
        lengths = set()
        for beta, mat in self.coeffs.items():
            beta = tuple(int(b) for b in beta)
            if any(b < 0 for b in beta):
                raise ValidationError(f"multi-index {beta} has a negative entry")
            if sum(beta) != self.m:
                raise ValidationError(f"multi-index {beta} does not have order {self.m}")
            mat = np.array(mat, dtype=float).reshape(self.dim_f, self.dim_e)
            if not np.all(np.isfinite(mat)):
                raise ValidationError("symbol coefficients must be finite")
            mat.setflags(write=False)
            clean[beta] = clean[beta] + mat if beta in clean else mat
            lengths.add(len(beta))
        if len(lengths) != 1 or lengths.pop() not in (2, 3):
            raise ValidationError("multi-indices must all have length 2 or 3")
        if not any(np.any(v != 0) for v in clean.values()):
            raise ValidationError("symbol is identically zero")
        if self.m < 1:
            raise ValidationError("symbol order must be at least 1")
        object.__setattr__(self, "coeffs", clean)

    @property
    def d(self):
        return len(next(iter(self.coeffs)))

    def matrix(self, xi):
        """``A(xi, .)`` as a ``dim_f x dim_e`` array for real ``xi``."""
        xi = np.asarray(xi, dtype=float)
        out = np.zeros((self.dim_f, self.dim_e))
        for beta, mat in self.coeffs.items():
            out += np.prod(xi ** np.array(beta)) * mat
        return out

    def matrices(self, xis):
        """Stack of ``A(xi_k, .)`` for an ``(n, d)`` array of frequencies."""
        xis = np.asarray(xis, dtype=float)
        out = np.zeros((xis.shape[0], self.dim_f, self.dim_e))
        for beta, mat in self.coeffs.items():
            out += np.prod(xis ** np.array(beta), axis=1)[:, None, None] * mat
        return out


def _unit(d, i):
    beta = [0] * d
    beta[i] = 1
    return tuple(beta)


def gradient_symbol(d):
    """``A(xi, e) = xi e`` from scalars to ``R^d``."""
    return OperatorSymbol(1, 1, d, {_unit(d, i): np.eye(d)[:, [i]] for i in range(d)})


def laplacian_symbol(d):
    """``A(xi, e) = |xi|^2 e`` on scalars: elliptic, not cancelling."""
    return OperatorSymbol(2, 1, 1, {tuple(2 * np.array(_unit(d, i))): [[1.0]] for i in range(d)})


def hessian_symbol(d):
    """``A(xi, e) = xi xi^T e`` from scalars to ``d x d`` matrices (row-major)."""
    coeffs = {}
    for i, j in itertools.product(range(d), repeat=2):
        beta = tuple(np.array(_unit(d, i)) + np.array(_unit(d, j)))
        col = np.zeros((d * d, 1))
        col[i * d + j] = 1.0
        coeffs[beta] = coeffs.get(beta, 0) + col
    return OperatorSymbol(2, 1, d * d, coeffs)


def direct_sum(a, b):
    """Block-diagonal symbol acting on ``E_a + E_b``; both must share ``d`` and ``m``."""
    if a.d != b.d or a.m != b.m:
        raise ValidationError("direct sum needs symbols of equal dimension and order")
    coeffs = {}
    for beta in set(a.coeffs) | set(b.coeffs):
        mat = np.zeros((a.dim_f + b.dim_f, a.dim_e + b.dim_e))
        if beta in a.coeffs:
            mat[: a.dim_f, : a.dim_e] = a.coeffs[beta]
        if beta in b.coeffs:
            mat[a.dim_f :, a.dim_e :] = b.coeffs[beta]
        coeffs[beta] = mat
    return OperatorSymbol(a.m, a.dim_e + b.dim_e, a.dim_f + b.dim_f, coeffs)


def load_symbol(path):
    """Read a symbol file.

    Format::

        # comment
        dimE: 1
        dimF: 2
        beta: 1 0 | matrix: 1 0
        beta: 0 1 | matrix: 0 1

    Matrices are row-major ``dimF x dimE``; the order ``m`` is ``|beta|``.
    """
    text = Path(path).read_text()
    header = {}
    rows = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            if line.startswith("beta:"):
                left, right = line.split("|", 1)
                beta = tuple(int(v) for v in left[len("beta:"):].split())
                key, _, vals = right.partition(":")
                if key.strip() != "matrix":
                    raise ValueError("expected 'matrix:' after '|'")
                rows.append((lineno, beta, [float(v) for v in vals.split()]))
            else:
                key, _, val = line.partition(":")
                if key.strip() not in ("dimE", "dimF"):
                    raise ValueError(f"unknown key {key.strip()!r}")
                header[key.strip()] = int(val)
        except ValueError as exc:
            raise ValidationError(f"{path}:{lineno}: {exc}") from None
    if "dimE" not in header or "dimF" not in header:
        raise ValidationError(f"{path}: missing dimE/dimF header")
    if not rows:
        raise ValidationError(f"{path}: no 'beta:' lines")
    dim_e, dim_f = header["dimE"], header["dimF"]
    orders = {sum(b) for _, b, _ in rows}
    if len(orders) != 1:
        raise ValidationError(f"{path}: multi-indices have mixed orders {sorted(orders)}")
    coeffs = {}
    for lineno, beta, vals in rows:
        if len(vals) != dim_e * dim_f:
            raise ValidationError(f"{path}:{lineno}: expected {dim_e * dim_f} matrix entries")
        coeffs[beta] = coeffs.get(beta, 0) + np.array(vals).reshape(dim_f, dim_e)
    return OperatorSymbol(orders.pop(), dim_e, dim_f, coeffs)


def save_symbol(A, path):
    lines = [f"dimE: {A.dim_e}", f"dimF: {A.dim_f}"]
    for beta, mat in sorted(A.coeffs.items()):
        entries = " ".join(repr(float(v)) for v in mat.ravel())
        lines.append(f"beta: {' '.join(map(str, beta))} | matrix: {entries}")
    Path(path).write_text("\n".join(lines) + "\n")


# --- operator application --------------------------------------------------


def apply_symbol(A, phi, cfg=SpectralConfig()):
    """``A(d) phi`` with the multiplier ``A(i xi, .)`` on the padded box."""
    if phi.k != A.dim_e:
        raise ValidationError(f"field has {phi.k} channels, symbol expects {A.dim_e}")
    if phi.grid.d != A.d:
        raise ValidationError("field and symbol dimensions differ")
    grid = phi.grid
    shape = cfg.box_shape(grid)
    ks = wavenumbers(shape, grid.h, real=False)
    spectra = [sfft.fftn(np.pad(c, [(0, m - n) for n, m in zip(grid.dims, shape)])) for c in phi.components]
    out = []
    for f in range(A.dim_f):
        acc = np.zeros(shape, dtype=complex)
        for beta, mat in A.coeffs.items():
            mono = 1j**A.m
            for ax, (k, b) in enumerate(zip(ks, beta)):
                factor = k**b
                if b % 2 == 1:
                    # an odd power of xi_ax is not Hermitian on that axis's Nyquist plane
                    factor = factor.copy()
                    sl = [slice(None)] * len(shape)
                    sl[ax] = shape[ax] // 2
                    factor[tuple(sl)] = 0
                mono = mono * factor
            for e in range(A.dim_e):
                if mat[f, e] != 0:
                    acc += mat[f, e] * mono * spectra[e]
        u = sfft.ifftn(acc)
        scale = max(1.0, float(np.abs(u.real).max()))
        if np.abs(u.imag).max() > IMAG_TOL * scale:
            raise MajorantError("symbol application left an imaginary residue")
        out.append(u.real[tuple(slice(0, n) for n in grid.dims)])
    return VectorField(grid, np.stack(out))


def operator_l1(A, phi, cfg=SpectralConfig()):
    """``||A(d) phi||_{L^1}`` with the Euclidean norm on ``F``."""
    return grid_integral(apply_symbol(A, phi, cfg).magnitude(), 1)


# --- sphere sampling and the two checkers ------------------------------------------


def sphere_samples(d, n, seed=0):
    """Quasi-uniform unit vectors: shifted uniform angles (d=2), rotated Fibonacci lattice (d=3)."""
    rng = np.random.default_rng(seed)
    if d == 2:
        theta = 2 * np.pi * (np.arange(n) + rng.random()) / n
        return np.column_stack([np.cos(theta), np.sin(theta)])
    if d == 3:
        i = np.arange(n) + 0.5
        z = 1 - 2 * i / n
        phi = np.pi * (3 - math.sqrt(5)) * i
        s = np.sqrt(1 - z**2)
        pts = np.column_stack([s * np.cos(phi), s * np.sin(phi), z])
        return Rotation.random(random_state=seed).apply(pts)
    raise ValidationError("sphere sampling supports d = 2 or 3")


def _smin(A, xi):
    if A.dim_f < A.dim_e:
        return 0.0
    xi = xi / np.linalg.norm(xi)
    return float(np.linalg.svd(A.matrix(xi), compute_uv=False)[-1])


def _polish(A, xi, step):
    """Local minimum of the smallest singular value near the unit vector ``xi``.

    The search runs in tangent coordinates centred at ``xi`` so that the
    optimiser's relative tolerance does not cap the attainable accuracy.
    """
    basis = np.linalg.svd(xi[None, :])[2][1:]  # orthonormal tangent directions
    if len(xi) == 2:
        res = minimize_scalar(
            lambda s: _smin(A, xi + s * basis[0]), bounds=(-step, step), method="bounded",
            options={"xatol": 1e-14},
        )
        return float(res.fun)
    res = minimize(
        lambda st: _smin(A, xi + st @ basis), np.zeros(len(xi) - 1), method="Nelder-Mead",
        options={"xatol": 1e-14, "fatol": 1e-16, "initial_simplex": step * np.vstack(
            [np.zeros(len(xi) - 1), np.eye(len(xi) - 1)])},
    )
    return float(res.fun)


def is_elliptic(A, n_samples=512, seed=0, n_polish=4):
    """Smallest singular value of ``A(xi, .)`` over the unit sphere.

    The minimum over ``n_samples`` quasi-uniform directions is refined by a
    local search around the ``n_polish`` best samples, so isolated zeros of
    the symbol are located to round-off rather than to the sample spacing.
    """
    if n_samples < 100:
        raise ValidationError("is_elliptic needs at least 100 samples")
    xis = sphere_samples(A.d, n_samples, seed)
    mats = A.matrices(xis)
    sv = np.linalg.svd(mats, compute_uv=False)
    smin = sv[:, -1] if A.dim_f >= A.dim_e else np.zeros(n_samples)
    smax = float(sv[:, 0].max())
    step = 2 * math.pi / n_samples if A.d == 2 else 4 / math.sqrt(n_samples)
    best = float(smin.min())
    for k in np.argsort(smin, kind="stable")[:n_polish]:
        best = min(best, _polish(A, xis[k], step))
    rep = Report()
    rep["min_singular_value"] = best
    rep["max_singular_value"] = smax
    rep["elliptic"] = bool(smax > 0 and best > RANK_TOL * smax)
    return rep


def _range_basis(mat):
    u, s, _ = np.linalg.svd(mat, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        return u[:, :0]
    return u[:, s > RANK_TOL * s[0]]


def _intersect(U, Q):
    """Orthonormal basis of ``span U`` intersected with ``span Q`` (both orthonormal)."""
    if U.shape[1] == 0 or Q.shape[1] == 0:
        return U[:, :0]
    M = np.hstack([U, -Q])
    _, s, vt = np.linalg.svd(M)
    rank = int(np.sum(s > RANK_TOL * max(s[0], 1.0)))
    null = vt[rank:].T
    if null.shape[1] == 0:
        return U[:, :0]
    return _range_basis(U @ null[: U.shape[1]])


def is_cancelling(A, n_samples=512, seed=0):
    """Dimension of the running intersection of the ranges ``A(xi_k, E)``."""
    if n_samples < 100:
        raise ValidationError("is_cancelling needs at least 100 samples")
    mats = A.matrices(sphere_samples(A.d, n_samples, seed))
    basis = _range_basis(mats[0])
    for mat in mats[1:]:
        basis = _intersect(basis, _range_basis(mat))
        if basis.shape[1] == 0:
            break
    rep = Report()
    rep["intersection_dimension"] = int(basis.shape[1])
    rep["elliptic_precondition"] = is_elliptic(A, n_samples, seed)["elliptic"]
    rep["cancelling"] = basis.shape[1] == 0
    return rep


# --- the two linear programs ---------------------------------------------------


@dataclass(frozen=True)
class DualityConfig:
    """Functional ``l`` on ``E``, derivative axis ``j`` (1-based) and the LP grid."""

    l: tuple
    j: int
    lp_grid: GridSpec
    scales: tuple = None
    radii: tuple = None

    def __post_init__(self):
        l = tuple(float(v) for v in np.atleast_1d(self.l))
        object.__setattr__(self, "l", l)
        if not any(l):
            raise ConfigError("the functional l must be non-zero")
        if not 1 <= self.j <= self.lp_grid.d:
            raise ConfigError(f"axis j must lie in 1..{self.lp_grid.d}")
        if max(self.lp_grid.dims) > MAX_LP_AXIS:
            raise ConfigError(f"LP grids are limited to {MAX_LP_AXIS} nodes per axis")
        default = MaximalConfig.for_grid(self.lp_grid)
        scales = default.scales if self.scales is None else self.scales
        radii = default.radii if self.radii is None else self.radii
        cfg = MaximalConfig(scales, radii)
        object.__setattr__(self, "scales", cfg.scales)
        object.__setattr__(self, "radii", cfg.radii)

    @property
    def maximal(self):
        return MaximalConfig(self.scales, self.radii)


def _basis_images(grid, op):
    """Dense matrix whose column ``k`` is ``op`` applied to the unit spike at node ``k``."""
    n = grid.n_nodes
    out = np.empty((n, n))
    spike = np.zeros(n)
    for k in range(n):
        spike[k] = 1.0
        out[:, k] = op(spike.reshape(grid.dims)).ravel()
        spike[k] = 0.0
    return out


@lru_cache(maxsize=8)
def _primal_operators(grid, scales, scfg):
    shape = scfg.box_shape(grid)
    crop = tuple(slice(0, n) for n in grid.dims)
    riesz = _basis_images(grid, lambda s: riesz_potential(ScalarField(grid, s), 1, scfg).samples)
    convs = []
    for t in scales:
        mult = gaussian_multiplier(shape, grid.h, t)
        convs.append(_basis_images(grid, lambda s: sfft.irfftn(sfft.rfftn(s, s=shape) * mult, s=shape)[crop]))
    return riesz, tuple(convs)


@lru_cache(maxsize=8)
def _ball_matrices(grid, radii):
    pts = np.array(np.unravel_index(np.arange(grid.n_nodes), grid.dims)).T.astype(float)
    d2 = ((pts[:, None, :] - pts[None, :, :]) ** 2).sum(-1)
    out = []
    for r in radii:
        rho = r / grid.h
        out.append((d2 <= rho * rho + 1e-9).astype(float))
    return tuple(out)


def _check_lp_field(g, cfg):
    if g.grid != cfg.lp_grid:
        raise ValidationError("field does not live on the LP grid")


def primal_value(g, cfg, scfg=SpectralConfig()):
    """``min sum_x u(x) h^d`` over ``(Phi, u)`` with ``u >= |Phi * psi_t|`` and ``I_1 Phi >= g``.

    Returns the optimum and the minimising ``Phi``.
    """
    _check_lp_field(g, cfg)
    grid = g.grid
    n = grid.n_nodes
    riesz, convs = _primal_operators(grid, cfg.scales, scfg)
    eye = np.eye(n)
    blocks = [riesz_block for C in convs for riesz_block in (np.hstack([-C, eye]), np.hstack([C, eye]))]
    blocks.append(np.hstack([riesz, np.zeros((n, n))]))
    matrix = np.vstack(blocks)
    rhs = np.concatenate([np.zeros(2 * n * len(convs)), g.samples.ravel()])
    lp = LinearProgram(
        np.concatenate([np.zeros(n), np.full(n, grid.cell_volume)]),
        matrix,
        (">=",) * matrix.shape[0],
        rhs,
        lower=np.concatenate([np.full(n, -np.inf), np.zeros(n)]),
    )
    sol = solve_lp(lp)
    if not sol.optimal:
        raise MajorantError(f"primal LP reported {sol.status}; it is always feasible and bounded")
    return sol.value, ScalarField(grid, sol.x[:n].reshape(grid.dims))


def dual_value(g, cfg):
    """``max sum_x g(x) mu(x)`` over ``mu >= 0`` with ``r^(1-d) mu(B_r(x)) <= 1``.

    Returns the optimum and the maximising measure.
    """
    _check_lp_field(g, cfg)
    grid = g.grid
    balls = _ball_matrices(grid, cfg.radii)
    matrix = np.vstack([r ** (1 - grid.d) * B for r, B in zip(cfg.radii, balls)])
    lp = LinearProgram(
        g.samples.ravel(), matrix, ("<=",) * matrix.shape[0], np.ones(matrix.shape[0]), maximize=True
    )
    sol = solve_lp(lp)
    if not sol.optimal:
        raise MajorantError(f"dual LP reported {sol.status}; it is always feasible and bounded")
    mu = np.maximum(sol.x, 0.0).reshape(grid.dims)
    return sol.value, DiscreteMeasure(grid, mu)


def pairing_field(phi, A, cfg, scfg=SpectralConfig()):
    """``g = <d_j^(m-1) phi, l>`` (real by construction)."""
    if len(cfg.l) != A.dim_e or phi.k != A.dim_e:
        raise ValidationError("functional, field and symbol disagree on dim E")
    g = np.zeros(phi.grid.dims)
    for e, coef in enumerate(cfg.l):
        if coef:
            chan = ScalarField(phi.grid, phi.components[e])
            g += coef * spectral_derivative(chan, cfg.j - 1, A.m - 1, scfg).samples
    return ScalarField(phi.grid, g)


def duality_gap_check(phi, A, cfg, scfg=SpectralConfig()):
    """Primal and dual optima for ``g = <d_j^(m-1) phi, l>`` against ``||A(d) phi||_1``."""
    if phi.grid != cfg.lp_grid:
        raise ValidationError("field does not live on the LP grid")
    g = pairing_field(phi, A, cfg, scfg)
    rhs = operator_l1(A, phi, scfg)
    primal, _ = primal_value(g, cfg, scfg)
    dual, _ = dual_value(g, cfg)
    rep = Report()
    rep["primal"] = primal
    rep["dual"] = dual
    rep["rhs"] = rhs
    defined = rhs > 0 and dual > 0
    rep["ratios_defined"] = defined
    if defined:
        rep["ratio_primal"] = primal / rhs
        rep["ratio_dual"] = dual / rhs
        rep["gap"] = primal / dual
    return rep


def derivative_magnitude(phi, order, cfg=SpectralConfig()):
    """Euclidean magnitude of the tensor of all ``order``-th partial derivatives."""
    grid = phi.grid
    total = np.zeros(grid.dims)
    for chan in phi.components:
        f = ScalarField(grid, chan)
        for axes in itertools.product(range(grid.d), repeat=order):
            u = f
            for ax in axes:
                u = spectral_derivative(u, ax, 1, cfg)
            total += u.samples**2
    return ScalarField(grid, np.sqrt(total))


def embedding_ratio(phi, A, scfg=SpectralConfig(), n_samples=512):
    """``||grad^(m-1) phi||_{L^(d/(d-1))} / ||A(d) phi||_{L^1}``, with the symbol checks recorded."""
    d = phi.grid.d
    rep = Report()
    rep["elliptic"] = is_elliptic(A, n_samples)["elliptic"]
    rep["cancelling"] = is_cancelling(A, n_samples)["cancelling"]
    num = grid_integral(derivative_magnitude(phi, A.m - 1, scfg), d / (d - 1))
    den = operator_l1(A, phi, scfg)
    rep["derivative_norm"] = num
    rep["operator_l1"] = den
    rep["ratio_defined"] = den > 0
    if den > 0:
        rep["ratio"] = num / den
    return rep
