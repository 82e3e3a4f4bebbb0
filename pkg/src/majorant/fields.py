"""Sampled fields on uniform grids, file I/O and the test-field corpus."""

from __future__ import annotations

import json
import math
import struct
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FieldFormatError, ValidationError

MAGIC = b"DORO"
FORMAT_VERSION = 1
FRAME_WIDTH = 4  # nodes forced to zero along every face of a corpus field


def _is_pow2(n):
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class GridSpec:
    """Uniform axis-aligned grid covering ``[origin, origin + dims*h)``."""

    d: int
    dims: tuple
    h: float
    origin: tuple = None

    def __post_init__(self):
        dims = tuple(int(n) for n in self.dims)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "h", float(self.h))
        origin = (0.0,) * self.d if self.origin is None else tuple(float(o) for o in self.origin)
        object.__setattr__(self, "origin", origin)
        if self.d not in (2, 3):
            raise ValidationError(f"grid dimension must be 2 or 3, got {self.d}")
        if len(dims) != self.d or len(origin) != self.d:
            raise ValidationError("dims and origin must have d entries")
        if not (self.h > 0 and math.isfinite(self.h)):
            raise ValidationError(f"grid spacing must be positive, got {self.h}")
        for n in dims:
            if n < 8 or not _is_pow2(n):
                raise ValidationError(f"every axis needs a power-of-two count >= 8, got {dims}")

    @classmethod
    def square(cls, n, d=2, h=None):
        """Grid with ``n`` nodes per axis on the unit cube (``h = 1/n`` unless given)."""
        return cls(d, (n,) * d, 1.0 / n if h is None else h)

    @property
    def shape(self):
        return self.dims

    @property
    def n_nodes(self):
        return int(np.prod(self.dims))

    @property
    def cell_volume(self):
        return self.h**self.d

    @property
    def lengths(self):
        return tuple(n * self.h for n in self.dims)

    @property
    def volume(self):
        return float(np.prod(self.lengths))

    @property
    def center(self):
        return tuple(o + 0.5 * n * self.h for o, n in zip(self.origin, self.dims))

    def axis(self, i):
        return self.origin[i] + self.h * np.arange(self.dims[i])

    def coordinates(self):
        """Coordinate arrays (``ij`` indexing), one per axis."""
        return np.meshgrid(*(self.axis(i) for i in range(self.d)), indexing="ij")

    def node_position(self, index):
        return tuple(o + self.h * i for o, i in zip(self.origin, index))

    def refine(self):
        """Same domain, twice the nodes per axis."""
        return GridSpec(self.d, tuple(2 * n for n in self.dims), self.h / 2, self.origin)

    def enlarge(self):
        """Twice the domain at the same spacing, keeping the domain centered."""
        origin = tuple(o - 0.5 * n * self.h for o, n in zip(self.origin, self.dims))
        return GridSpec(self.d, tuple(2 * n for n in self.dims), self.h, origin)


def _check_samples(grid, samples, name="samples"):
    arr = np.asarray(samples, dtype=float)
    if arr.ndim == 1 and arr.size == grid.n_nodes:
        arr = arr.reshape(grid.dims)
    if arr.shape != grid.dims:
        raise ValidationError(f"{name} shape {arr.shape} does not match grid {grid.dims}")
    bad = np.flatnonzero(~np.isfinite(arr))
    if bad.size:
        idx = np.unravel_index(bad[0], grid.dims)
        raise ValidationError(f"non-finite {name} value at node {tuple(int(i) for i in idx)}")
    return arr


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Real samples on a grid.

    ``exterior`` optionally holds the field on a zero-padded periodic box whose
    leading block is ``samples``.  Spectral operators fill it so that their
    composition stays lossless; everything else ignores it.
    """

    grid: GridSpec
    samples: np.ndarray
    exterior: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        arr = _check_samples(self.grid, self.samples)
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)
        if self.exterior is not None:
            ext = np.asarray(self.exterior, dtype=float)
            if any(m < n for m, n in zip(ext.shape, self.grid.dims)) or ext.ndim != self.grid.d:
                raise ValidationError("exterior must contain the grid block")
            ext.setflags(write=False)
            object.__setattr__(self, "exterior", ext)

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros(grid.dims))

    def padded(self, shape):
        """Samples on a periodic box of ``shape`` (exterior if it fits, else zero padding)."""
        if self.exterior is not None and self.exterior.shape == tuple(shape):
            return self.exterior
        out = np.zeros(shape)
        out[tuple(slice(0, n) for n in self.grid.dims)] = self.samples
        return out

    def with_samples(self, samples):
        return ScalarField(self.grid, samples)

    def _combine(self, other, op):
        if isinstance(other, ScalarField):
            if other.grid != self.grid:
                raise ValidationError("fields live on different grids")
            ext = None
            if self.exterior is not None or other.exterior is not None:
                shape = (self.exterior if self.exterior is not None else other.exterior).shape
                ext = op(self.padded(shape), other.padded(shape))
            return ScalarField(self.grid, op(self.samples, other.samples), ext)
        return NotImplemented

    def __add__(self, other):
        return self._combine(other, np.add)

    def __sub__(self, other):
        return self._combine(other, np.subtract)

    def __mul__(self, c):
        c = float(c)
        ext = None if self.exterior is None else c * self.exterior
        return ScalarField(self.grid, c * self.samples, ext)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def integral(self, include_exterior=False):
        data = self.exterior if include_exterior and self.exterior is not None else self.samples
        return float(data.sum() * self.grid.cell_volume)


@dataclass(frozen=True, eq=False)
class VectorField:
    """``k`` real channels sharing one grid; ``components`` has shape ``(k, *dims)``."""

    grid: GridSpec
    components: np.ndarray

    def __post_init__(self):
        comp = np.asarray(self.components, dtype=float)
        if comp.ndim != self.grid.d + 1 or comp.shape[1:] != self.grid.dims:
            raise ValidationError(f"components shape {comp.shape} does not match grid {self.grid.dims}")
        if not np.all(np.isfinite(comp)):
            raise ValidationError("non-finite vector field component")
        comp.setflags(write=False)
        object.__setattr__(self, "components", comp)

    @classmethod
    def from_channels(cls, channels):
        channels = list(channels)
        grid = channels[0].grid
        if any(c.grid != grid for c in channels):
            raise ValidationError("all channels must share one grid")
        return cls(grid, np.stack([c.samples for c in channels]))

    @property
    def k(self):
        return self.components.shape[0]

    @property
    def channels(self):
        return [ScalarField(self.grid, c) for c in self.components]

    def magnitude(self):
        return ScalarField(self.grid, np.sqrt(np.sum(self.components**2, axis=0)))


@dataclass(frozen=True, eq=False)
class BinaryMask:
    grid: GridSpec
    bits: np.ndarray

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=bool)
        if bits.ndim == 1 and bits.size == self.grid.n_nodes:
            bits = bits.reshape(self.grid.dims)
        if bits.shape != self.grid.dims:
            raise ValidationError(f"mask shape {bits.shape} does not match grid {self.grid.dims}")
        bits.setflags(write=False)
        object.__setattr__(self, "bits", bits)

    @property
    def count(self):
        return int(self.bits.sum())

    def is_empty(self):
        return not self.bits.any()


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Non-negative point masses sitting on grid nodes."""

    grid: GridSpec
    masses: np.ndarray

    def __post_init__(self):
        m = _check_samples(self.grid, self.masses, "mass")
        neg = np.flatnonzero(m < 0)
        if neg.size:
            idx = np.unravel_index(neg[0], self.grid.dims)
            raise ValidationError(f"negative mass at node {tuple(int(i) for i in idx)}")
        m.setflags(write=False)
        object.__setattr__(self, "masses", m)

    @property
    def total(self):
        return float(self.masses.sum())

    def to_density(self):
        return ScalarField(self.grid, self.masses / self.grid.cell_volume)

    def __mul__(self, c):
        return DiscreteMeasure(self.grid, self.masses * float(c))

    __rmul__ = __mul__


class Report:
    """Ordered ``key -> number or bool`` map produced by the verification pipelines."""

    def __init__(self, entries=None):
        self._entries = OrderedDict()
        for k, v in (entries or {}).items():
            self[k] = v

    def __setitem__(self, key, value):
        if key in self._entries:
            raise KeyError(f"duplicate report key {key!r}")
        if isinstance(value, (bool, np.bool_)):
            value = bool(value)
        else:
            value = float(value)
            if not math.isfinite(value):
                raise ValidationError(f"report value for {key!r} is not finite")
        self._entries[key] = value

    def __getitem__(self, key):
        return self._entries[key]

    def __contains__(self, key):
        return key in self._entries

    def __iter__(self):
        return iter(self._entries)

    def __len__(self):
        return len(self._entries)

    def get(self, key, default=None):
        return self._entries.get(key, default)

    def items(self):
        return self._entries.items()

    def update(self, other, prefix=""):
        for k, v in other.items():
            self[prefix + k] = v
        return self

    def verdicts(self):
        return {k: v for k, v in self._entries.items() if isinstance(v, bool)}

    @property
    def passed(self):
        return all(self.verdicts().values())

    def to_text(self):
        lines = []
        for k, v in self._entries.items():
            s = ("true" if v else "false") if isinstance(v, bool) else repr(v)
            lines.append(f"{k} = {s}")
        return "\n".join(lines) + "\n"

    def to_json(self):
        return json.dumps(self._entries, indent=2) + "\n"

    def __repr__(self):
        return f"Report({dict(self._entries)!r})"


# ---------------------------------------------------------------- file I/O


def save_field(f, path, format="binary"):
    path = Path(path)
    if format == "binary":
        g = f.grid
        head = MAGIC + struct.pack("<BBH", FORMAT_VERSION, g.d, 0)
        head += struct.pack(f"<{g.d}I", *g.dims)
        head += struct.pack("<d", g.h)
        head += struct.pack(f"<{g.d}d", *g.origin)
        payload = np.ascontiguousarray(f.samples, dtype="<f8").tobytes()
        path.write_bytes(head + payload)
    elif format == "csv":
        if f.grid.d != 2:
            raise ValidationError("csv format supports d = 2 only")
        np.savetxt(path, f.samples, delimiter=",", fmt="%.17g")
    else:
        raise ValidationError(f"unknown field format {format!r}")


def _unpack(fmt, data, offset, what):
    size = struct.calcsize(fmt)
    if offset + size > len(data):
        raise FieldFormatError(f"truncated header while reading {what}", offset)
    return struct.unpack_from(fmt, data, offset), offset + size


def load_field(path, format="binary", spacing=None):
    """Read a field written by :func:`save_field`.

    csv files carry no geometry, so ``spacing`` must be supplied for them.
    """
    path = Path(path)
    if format == "binary":
        data = path.read_bytes()
        if data[:4] != MAGIC:
            raise FieldFormatError("bad magic, expected b'DORO'", 0)
        (version, d, reserved), off = _unpack("<BBH", data, 4, "version/dimension")
        if version != FORMAT_VERSION:
            raise FieldFormatError(f"unsupported version {version}", 4)
        if d not in (2, 3):
            raise FieldFormatError(f"unsupported dimension {d}", 5)
        if reserved != 0:
            raise FieldFormatError("reserved bytes must be zero", 6)
        dims, off = _unpack(f"<{d}I", data, off, "dims")
        (h,), off = _unpack("<d", data, off, "spacing")
        origin, off = _unpack(f"<{d}d", data, off, "origin")
        n = int(np.prod(dims))
        if len(data) - off != 8 * n:
            raise FieldFormatError(
                f"payload holds {(len(data) - off) / 8:g} samples, header promises {n}", off
            )
        try:
            grid = GridSpec(d, dims, h, origin)
        except ValidationError as exc:
            raise FieldFormatError(f"invalid grid header: {exc}", 8) from exc
        samples = np.frombuffer(data, dtype="<f8", count=n, offset=off).astype(float)
        return ScalarField(grid, samples.reshape(dims))
    if format == "csv":
        if spacing is None:
            raise ValidationError("csv fields need an explicit spacing")
        rows = []
        for lineno, line in enumerate(path.read_text().splitlines(), 1):
            if not line.strip():
                continue
            try:
                rows.append([float(tok) for tok in line.split(",")])
            except ValueError as exc:
                raise FieldFormatError(f"unparseable value: {exc}", lineno) from exc
        if not rows or len({len(r) for r in rows}) != 1:
            raise FieldFormatError("csv rows are ragged or empty", len(rows))
        arr = np.array(rows)
        return ScalarField(GridSpec(2, arr.shape, spacing), arr)
    raise ValidationError(f"unknown field format {format!r}")


# ------------------------------------------------------------- quadrature


def grid_integral(f, p=1):
    """``(sum |f|^p h^d)^(1/p)`` over the grid nodes, or ``max |f|`` for ``p="sup"``."""
    a = np.abs(f.samples)
    if p == "sup":
        return float(a.max())
    p = float(p)
    if p < 1:
        raise ValidationError("grid_integral needs p >= 1")
    if p == 1:
        return float(a.sum() * f.grid.cell_volume)
    return float((np.sum(a**p) * f.grid.cell_volume) ** (1.0 / p))


# ----------------------------------------------------------------- corpus


def smooth_step(s):
    """C-infinity step: 0 for ``s <= 0``, 1 for ``s >= 1``, monotone in between."""
    s = np.asarray(s, dtype=float)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        a = np.where(s > 0, np.exp(-1.0 / np.where(s > 0, s, 1.0)), 0.0)
        b = np.where(s < 1, np.exp(-1.0 / np.where(s < 1, 1.0 - s, 1.0)), 0.0)
    return a / (a + b)


def smooth_indicator(dist, width):
    """1 where ``dist <= -width/2``, 0 where ``dist >= width/2``; level 1/2 at ``dist = 0``."""
    return smooth_step(0.5 - np.asarray(dist) / width)


def _radius(grid, center):
    xs = grid.coordinates()
    return np.sqrt(sum((x - c) ** 2 for x, c in zip(xs, center)))


def _inner_halfwidth(grid, center):
    """Distance from ``center`` to the edge of the non-frame region."""
    lo = [o + FRAME_WIDTH * grid.h for o in grid.origin]
    hi = [o + (n - 1 - FRAME_WIDTH) * grid.h for o, n in zip(grid.origin, grid.dims)]
    return min(min(c - a, b - c) for c, a, b in zip(center, lo, hi))


def _bump(r, rho):
    """Smooth compact bump of height 1 at ``r = 0`` vanishing for ``r >= rho``."""
    s = np.clip(r / rho, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        return np.where(s < 1, np.exp(1.0 - 1.0 / np.maximum(1.0 - s**2, 1e-300)), 0.0)


def _zero_frame(arr):
    w = FRAME_WIDTH
    for ax in range(arr.ndim):
        idx = [slice(None)] * arr.ndim
        idx[ax] = slice(0, w)
        arr[tuple(idx)] = 0.0
        idx[ax] = slice(arr.shape[ax] - w, None)
        arr[tuple(idx)] = 0.0
    return arr


def make_test_field(kind, grid, params=None, seed=0):
    """Deterministic smooth compactly supported test fields.

    Kinds: ``gauss_bump`` (params ``sigma``, ``center``), ``smoothed_disk``
    (``radius``, ``width``, ``center``), ``two_bumps`` (``radius``, ``separation``),
    ``random_smooth`` (``count``, ``signed``, ``radius_min``, ``radius_max``,
    ``spread``: bumps stay within ``spread`` of the grid centre) and ``annulus`` (``radius``,
    ``inner``, ``width``, ``center``).  Lengths are physical; defaults scale
    with the smallest domain side ``L``.
    """
    p = dict(params or {})
    L = min(grid.lengths)
    h = grid.h
    center = tuple(p.get("center", grid.center))
    if kind == "gauss_bump":
        sigma = p.get("sigma", L / 8)
        if sigma <= 0 or _inner_halfwidth(grid, center) <= 0:
            raise ValidationError("gauss_bump needs sigma > 0 and an interior center")
        r = _radius(grid, center)
        out = p.get("amplitude", 1.0) * np.exp(-(r**2) / (2 * sigma**2))
    elif kind == "smoothed_disk":
        R = p.get("radius", 0.3 * L)
        w = p.get("width", 4 * h)
        if R + w / 2 > _inner_halfwidth(grid, center) or R - w / 2 <= 0:
            raise ValidationError("smoothed_disk support leaves the interior")
        out = smooth_indicator(_radius(grid, center) - R, w)
    elif kind == "annulus":
        R = p.get("radius", 0.3 * L)
        inner = p.get("inner", R / 2)
        w = p.get("width", 4 * h)
        if R + w / 2 > _inner_halfwidth(grid, center) or inner - w / 2 <= 0 or inner + w >= R:
            raise ValidationError("annulus parameters invalid for this grid")
        r = _radius(grid, center)
        out = smooth_indicator(r - R, w) * smooth_indicator(inner - r, w)
    elif kind == "two_bumps":
        rho = p.get("radius", 0.12 * L)
        sep = p.get("separation", 0.45 * L)
        c1 = tuple(c - (sep / 2 if i == 0 else 0.0) for i, c in enumerate(center))
        c2 = tuple(c + (sep / 2 if i == 0 else 0.0) for i, c in enumerate(center))
        if min(_inner_halfwidth(grid, c1), _inner_halfwidth(grid, c2)) < rho:
            raise ValidationError("two_bumps support leaves the interior")
        out = _bump(_radius(grid, c1), rho) + p.get("ratio", 0.7) * _bump(_radius(grid, c2), rho)
    elif kind == "random_smooth":
        rng = np.random.default_rng(seed)
        count = int(p.get("count", 5))
        signed = bool(p.get("signed", False))
        rmin, rmax = p.get("radius_min", 0.08 * L), p.get("radius_max", 0.2 * L)
        half = p.get("spread", 0.5 * L - (FRAME_WIDTH + 1) * h)
        if not 0 < rmin <= rmax <= half:
            raise ValidationError("random_smooth needs 0 < radius_min <= radius_max <= spread")
        out = np.zeros(grid.dims)
        for _ in range(count):
            rho = rng.uniform(rmin, rmax)
            off = rng.uniform(-(half - rho), half - rho, size=grid.d)
            c = tuple(gc + o for gc, o in zip(grid.center, off))
            amp = rng.uniform(0.3, 1.0) * (rng.choice([-1.0, 1.0]) if signed else 1.0)
            out += amp * _bump(_radius(grid, c), rho)
    else:
        raise ValidationError(f"unknown test field kind {kind!r}")
    return ScalarField(grid, _zero_frame(np.array(out, dtype=float)))
