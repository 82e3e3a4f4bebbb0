"""Fourier multipliers on a zero-padded periodic box: Riesz potentials,
the half-Laplacian, and finite-difference gradients."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.fft as sfft
from scipy.special import gamma

from .errors import ConfigError, DomainError
from .fields import ScalarField, VectorField


@dataclass(frozen=True)
class SpectralConfig:
    """``pad_factor``: per-axis multiple of the grid used as the periodic box."""

    pad_factor: int = 4
    zero_mode_policy: str = "zero"

    def __post_init__(self):
        if self.pad_factor not in (2, 4, 8):
            raise ConfigError(f"pad_factor must be 2, 4 or 8, got {self.pad_factor}")
        if self.zero_mode_policy != "zero":
            raise ConfigError("only the 'zero' zero-mode policy is supported")

    def box_shape(self, grid):
        return tuple(self.pad_factor * n for n in grid.dims)


@lru_cache(maxsize=32)
def _wavenumbers(shape, h, real):
    """Angular frequencies ``2 pi k / (N h)`` per axis, broadcastable (read-only)."""
    axes = []
    d = len(shape)
    for i, n in enumerate(shape):
        if real and i == d - 1:
            k = 2 * np.pi * np.fft.rfftfreq(n, d=h)
        else:
            k = 2 * np.pi * np.fft.fftfreq(n, d=h)
        view = [1] * d
        view[i] = k.size
        k = k.reshape(view)
        k.setflags(write=False)
        axes.append(k)
    return tuple(axes)


@lru_cache(maxsize=32)
def _abs_xi(shape, h):
    ks = _wavenumbers(shape, h, True)
    out = np.sqrt(sum(k**2 for k in ks))
    out.setflags(write=False)
    return out


def wavenumbers(shape, h, real=True):
    return _wavenumbers(tuple(shape), float(h), real)


def abs_xi(shape, h):
    return _abs_xi(tuple(shape), float(h))


def _crop(arr, grid):
    return arr[tuple(slice(0, n) for n in grid.dims)]


def apply_real_multiplier(f, multiplier, cfg):
    """Apply a real radial-type multiplier (array on the rfft grid) to ``f``.

    Returns the raw periodic-box result; callers wrap it into a field.
    """
    shape = cfg.box_shape(f.grid)
    spec = sfft.rfftn(f.padded(shape))
    return sfft.irfftn(spec * multiplier, s=shape)


def riesz_constant(d, a):
    """``c_a`` such that ``c_a |x|^(a-d)`` has Fourier transform ``|xi|^(-a)``."""
    if not 0 < a < d:
        raise DomainError(f"Riesz order must lie in (0, {d}), got {a}")
    return gamma((d - a) / 2) / (2**a * np.pi ** (d / 2) * gamma(a / 2))


def _antipode(grid, shape):
    """Box node farthest from the grid's centre, and its distance to that centre."""
    idx = tuple((n // 2 + m // 2) % m for n, m in zip(grid.dims, shape))
    dist = grid.h * math.sqrt(sum((m / 2) ** 2 for m in shape))
    return idx, dist


def riesz_potential(f, a, cfg=SpectralConfig()):
    """``I_a[f]`` via the multiplier ``|xi|^(-a)`` on the padded box.

    The zero-frequency coefficient of the multiplier is 0; the additive constant
    this leaves undetermined is fixed by the far field: the value at the
    antipodal box node is pinned to the monopole term
    ``c_a * (total mass) * dist^(a-d)``.  Mean-zero inputs are therefore pinned
    to 0 far away, which makes ``riesz_potential`` an exact inverse of
    :func:`half_laplacian` for compactly supported fields.
    """
    d = f.grid.d
    c_a = riesz_constant(d, a)
    shape = cfg.box_shape(f.grid)
    xi = abs_xi(shape, f.grid.h)
    with np.errstate(divide="ignore"):
        mult = np.where(xi > 0, xi ** (-float(a)), 0.0)
    padded = f.padded(shape)
    u = sfft.irfftn(sfft.rfftn(padded) * mult, s=shape)
    idx, dist = _antipode(f.grid, shape)
    mass = padded.sum() * f.grid.cell_volume
    u += c_a * mass * dist ** (a - d) - u[idx]
    return ScalarField(f.grid, _crop(u, f.grid), u)


def half_laplacian(f, cfg=SpectralConfig()):
    """``(-Delta)^(1/2) f`` via the multiplier ``|xi|`` on the padded box."""
    shape = cfg.box_shape(f.grid)
    u = apply_real_multiplier(f, abs_xi(shape, f.grid.h), cfg)
    return ScalarField(f.grid, _crop(u, f.grid), u)


def gaussian_multiplier(shape, h, t):
    """Fourier transform of the unit-mass Gaussian ``t^-d psi(x/t)``."""
    return np.exp(-0.5 * (t * abs_xi(shape, h)) ** 2)


def gradient(f):
    """Central differences; each component is zero on the two faces normal to its axis."""
    s = f.samples
    h = f.grid.h
    comps = []
    for ax in range(f.grid.d):
        g = np.zeros_like(s)
        inner = [slice(None)] * s.ndim
        fwd = [slice(None)] * s.ndim
        bwd = [slice(None)] * s.ndim
        inner[ax] = slice(1, -1)
        fwd[ax] = slice(2, None)
        bwd[ax] = slice(0, -2)
        g[tuple(inner)] = (s[tuple(fwd)] - s[tuple(bwd)]) / (2 * h)
        comps.append(g)
    return VectorField(f.grid, np.stack(comps))


def gradient_l1(f):
    """``||grad f||_{L^1}`` with the Euclidean magnitude of the central-difference gradient."""
    g = gradient(f)
    return float(np.sqrt(np.sum(g.components**2, axis=0)).sum() * f.grid.cell_volume)


def spectral_derivative(f, axis, order, cfg=SpectralConfig()):
    """``d^order f / dx_axis^order`` via the multiplier ``(i xi_axis)^order``."""
    if order == 0:
        return f
    shape = cfg.box_shape(f.grid)
    ks = wavenumbers(shape, f.grid.h, real=True)
    mult = np.array((1j * ks[axis]) ** order)
    if order % 2 == 1:
        # odd multipliers are not Hermitian at the Nyquist frequency
        nyq = [slice(None)] * len(shape)
        nyq[axis] = shape[axis] // 2
        mult[tuple(nyq)] = 0
    u = sfft.irfftn(sfft.rfftn(f.padded(shape)) * mult, s=shape)
    return ScalarField(f.grid, _crop(u, f.grid), u)
