"""Norm estimators: grand-maximal H^1 surrogate, BMO, fractional maximal
functions, the Lorentz L_{p,1} norm and the Adams comparison."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.fft as sfft
from numpy.lib.stride_tricks import sliding_window_view
from scipy import ndimage

from .errors import ConfigError, DomainError, ValidationError
from .fields import DiscreteMeasure, Report, ScalarField
from .spectral import SpectralConfig, gaussian_multiplier, riesz_potential


class NonZeroMeanWarning(UserWarning):
    """The field passed to :func:`h1_norm` does not integrate to zero."""


@dataclass(frozen=True)
class MaximalConfig:
    """Dyadic smoothing scales (for ``h1_norm``) and radii (for ``M_a`` and BMO windows)."""

    scales: tuple
    radii: tuple

    def __post_init__(self):
        for name in ("scales", "radii"):
            vals = tuple(float(v) for v in getattr(self, name))
            object.__setattr__(self, name, vals)
            if not vals:
                raise ConfigError(f"{name} must be non-empty")
            if any(b <= a for a, b in zip(vals, vals[1:])) or vals[0] <= 0:
                raise ConfigError(f"{name} must be positive and strictly increasing")

    @classmethod
    def for_grid(cls, grid):
        """``t_k = h 2^k`` for ``k = 0..log2(min dims) - 2`` (largest = side / 4)."""
        K = int(math.log2(min(grid.dims))) - 2
        vals = tuple(grid.h * 2**k for k in range(K + 1))
        return cls(vals, vals)

    def check_grid(self, grid):
        L = min(grid.lengths)
        if max(self.scales + self.radii) > L / 4 * (1 + 1e-12):
            raise ConfigError("largest scale exceeds a quarter of the domain")


def maximal_function(f, cfg, scfg=SpectralConfig()):
    """``max_t |f * psi_t|`` on the padded box (Gaussian ``psi`` of unit mass)."""
    if not cfg.scales:
        raise ConfigError("empty scale list")
    shape = scfg.box_shape(f.grid)
    spec = sfft.rfftn(f.padded(shape))
    out = np.zeros(shape)
    for t in cfg.scales:
        conv = sfft.irfftn(spec * gaussian_multiplier(shape, f.grid.h, t), s=shape)
        np.maximum(out, np.abs(conv), out=out)
    return out


def h1_norm(f, cfg, scfg=SpectralConfig()):
    """Grand-maximal H^1 surrogate: the L^1 norm of ``max_t |f * psi_t|``.

    The integral runs over the whole padded box so that the slowly decaying
    tails of the maximal function are counted.  Only ratios and scalings of
    this number are meaningful; its constant depends on ``psi``.
    """
    shape = scfg.box_shape(f.grid)
    data = f.padded(shape)
    l1 = np.abs(data).sum()
    if l1 > 0 and abs(data.sum()) > 1e-6 * l1:
        warnings.warn(
            f"field mean {data.sum() / data.size:.3e} is not zero; H^1 estimate is a surrogate only",
            NonZeroMeanWarning,
            stacklevel=2,
        )
    return float(maximal_function(f, cfg, scfg).sum() * f.grid.cell_volume)


def _summed_area(arr):
    sat = arr
    for ax in range(arr.ndim):
        sat = np.cumsum(sat, axis=ax)
    return np.pad(sat, [(1, 0)] * arr.ndim)


def _window_sums(sat, side, stride, dims):
    """Sums over all ``side^d`` windows whose corners lie on a ``stride`` lattice."""
    d = len(dims)
    starts = [np.arange(0, n - side + 1, stride) for n in dims]
    total = 0.0
    # inclusion-exclusion over the 2^d corners of each window
    for corner in range(2**d):
        idx = []
        sign = 1
        for ax in range(d):
            hi = (corner >> ax) & 1
            idx.append(starts[ax] + (side if hi else 0))
            if not hi:
                sign = -sign
        total = total + sign * sat[np.ix_(*idx)]
    return total


def bmo_norm(f, cfg):
    """Largest mean oscillation ``|Q|^-1 sum_Q |f - f_Q| h^d`` over square windows.

    Window sides are the configured radii (rounded to whole nodes, sides of one
    node skipped); window corners sit on a lattice of stride ``side / 2``.
    Window means come from a summed-area table.
    """
    s = f.samples - f.samples.flat[0]  # constants give exactly zero
    dims = f.grid.dims
    sat = _summed_area(s)
    best = 0.0
    for r in cfg.radii:
        side = int(round(r / f.grid.h))
        if side < 2 or side > min(dims):
            continue
        stride = side // 2
        means = _window_sums(sat, side, stride, dims) / side ** f.grid.d
        windows = sliding_window_view(s, (side,) * f.grid.d)[tuple(slice(None, None, stride) for _ in dims)]
        expand = means.reshape(means.shape + (1,) * f.grid.d)
        axes = tuple(range(f.grid.d, 2 * f.grid.d))
        osc = np.abs(windows - expand).mean(axis=axes)
        best = max(best, float(osc.max()))
    return best


@lru_cache(maxsize=64)
def disk_stencil(radius_nodes, d):
    """Boolean footprint of the closed ball of radius ``radius_nodes`` (in node units)."""
    n = int(math.floor(radius_nodes + 1e-9))
    ax = np.arange(-n, n + 1)
    grids = np.meshgrid(*([ax] * d), indexing="ij")
    fp = sum(g.astype(float) ** 2 for g in grids) <= radius_nodes**2 + 1e-9
    fp.setflags(write=False)
    return fp


def ball_sums(values, radius_nodes):
    """Sum of ``values`` over the closed ball around every node (zero outside the grid)."""
    fp = disk_stencil(float(radius_nodes), values.ndim)
    return ndimage.correlate(values, fp.astype(float), mode="constant", cval=0.0)


def fractional_maximal(mu, a, cfg):
    """``M_a[mu](x) = max_r r^(a-d) mu(B_r(x))`` over the configured radii."""
    d = mu.grid.d
    if not 0 <= a < d:
        raise DomainError(f"fractional maximal order must lie in [0, {d}), got {a}")
    out = np.zeros(mu.grid.dims)
    for r in cfg.radii:
        sums = ball_sums(mu.masses, r / mu.grid.h)
        np.maximum(out, r ** (a - d) * sums, out=out)
    return ScalarField(mu.grid, out)


def lorentz_norm(f, p):
    """Layer-cake ``L_{p,1}`` norm ``int_0^inf |{|f| > t}|^(1/p) dt``, summed exactly."""
    if not p > 1:
        raise DomainError(f"Lorentz exponent must exceed 1, got {p}")
    v = np.sort(np.abs(f.samples).ravel())[::-1]
    v = v[v > 0]
    if v.size == 0:
        return 0.0
    steps = v - np.append(v[1:], 0.0)
    measure = np.arange(1, v.size + 1) * f.grid.cell_volume
    return float(np.sum(measure ** (1.0 / p) * steps))


def isoperimetric_constant(d):
    """``|B|^((d-1)/d) / |dB|`` for the unit ball: the sharp bound of
    ``lorentz_norm(f, d/(d-1)) / ||grad f||_1`` through coarea and isoperimetry."""
    vol = math.pi ** (d / 2) / math.gamma(d / 2 + 1)
    return vol ** ((d - 1) / d) / (d * vol)


def adams_check(mu, a, cfg_m, cfg_s=SpectralConfig()):
    """Compare ``||I_a mu||_BMO`` with ``||M_a mu||_inf`` for a non-negative measure."""
    if not isinstance(mu, DiscreteMeasure):
        raise ValidationError("adams_check needs a DiscreteMeasure")
    potential = riesz_potential(mu.to_density(), a, cfg_s)
    bmo = bmo_norm(potential, cfg_m)
    mmax = float(fractional_maximal(mu, a, cfg_m).samples.max())
    rep = Report()
    rep["bmo_of_riesz"] = bmo
    rep["max_frac_maximal"] = mmax
    defined = bmo > 0 and mmax > 0
    rep["ratios_defined"] = defined
    if defined:
        rep["ratio_upper"] = bmo / mmax
        rep["ratio_lower"] = mmax / bmo
    return rep
