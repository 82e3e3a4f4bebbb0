import itertools
import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from majorant.construct import make_atom
from majorant.errors import ConfigError, DomainError, ValidationError
from majorant.fields import DiscreteMeasure, GridSpec, ScalarField, make_test_field
from majorant.maximal import (
    MaximalConfig,
    NonZeroMeanWarning,
    adams_check,
    bmo_norm,
    disk_stencil,
    fractional_maximal,
    h1_norm,
    isoperimetric_constant,
    lorentz_norm,
)

G8 = GridSpec.square(8)
G16 = GridSpec.square(16)


def brute_bmo(f, cfg):
    s = f.samples
    best = 0.0
    for r in cfg.radii:
        side = int(round(r / f.grid.h))
        if side < 2 or side > min(s.shape):
            continue
        stride = side // 2
        for i in range(0, s.shape[0] - side + 1, stride):
            for j in range(0, s.shape[1] - side + 1, stride):
                w = s[i : i + side, j : j + side]
                best = max(best, float(np.abs(w - w.mean()).mean()))
    return best


class TestConfig:
    def test_for_grid(self):
        cfg = MaximalConfig.for_grid(GridSpec.square(64))
        assert cfg.scales == tuple(2**k / 64 for k in range(5))
        assert max(cfg.scales) == pytest.approx(64 / 64 / 4)

    def test_rejects_bad_lists(self):
        with pytest.raises(ConfigError):
            MaximalConfig((), (1.0,))
        with pytest.raises(ConfigError):
            MaximalConfig((2.0, 1.0), (1.0,))


class TestH1:
    def test_zero(self, grid64):
        assert h1_norm(ScalarField.zeros(grid64), MaximalConfig.for_grid(grid64)) == 0.0

    @pytest.mark.parametrize("k", [8, 16])
    def test_atom_scaling(self, k):
        # the hat of radius 2R = 32h has support 64h, so this needs 256 nodes per axis
        g = GridSpec.square(256)
        cfg = MaximalConfig.for_grid(g)
        small = h1_norm(make_atom(k * g.h, g.center, g), cfg)
        big = h1_norm(make_atom(2 * k * g.h, g.center, g), cfg)
        assert 0.85 * 2 <= big / small <= 1.15 * 2

    def test_dominates_l1_for_mean_zero_pair(self, grid64):
        cfg = MaximalConfig.for_grid(grid64)
        a = np.zeros(grid64.dims)
        a[16, 16], a[48, 48] = 1.0, -1.0
        f = ScalarField(grid64, a)
        assert h1_norm(f, cfg) >= np.abs(a).sum() * grid64.cell_volume * 0.999
        # and the smallest scale alone already gives a near-delta smoothing
        small = MaximalConfig((grid64.h,), (grid64.h,))
        assert h1_norm(f, small) <= h1_norm(f, cfg)

    def test_homogeneous_and_translation_stable(self, grid128):
        cfg = MaximalConfig.for_grid(grid128)
        atom = make_atom(8 * grid128.h, grid128.center, grid128)
        base = h1_norm(atom, cfg)
        assert h1_norm(-3 * atom, cfg) == pytest.approx(3 * base, rel=1e-12)
        shifted = make_atom(8 * grid128.h, tuple(c + 5 * grid128.h for c in grid128.center), grid128)
        assert h1_norm(shifted, cfg) == pytest.approx(base, rel=0.02)

    def test_warns_on_nonzero_mean(self, grid64):
        with pytest.warns(NonZeroMeanWarning):
            h1_norm(make_test_field("gauss_bump", grid64), MaximalConfig.for_grid(grid64))

    def test_no_warning_for_atoms(self, grid64):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            h1_norm(make_atom(4 * grid64.h, grid64.center, grid64), MaximalConfig.for_grid(grid64))


class TestBMO:
    def test_constant(self):
        assert bmo_norm(ScalarField(G16, np.full((16, 16), 4.2)), MaximalConfig.for_grid(G16)) == 0.0

    def test_checkerboard(self):
        i, j = np.indices((8, 8))
        f = ScalarField(G8, np.where(((i // 2) + (j // 2)) % 2 == 0, 1.0, -1.0))
        cfg = MaximalConfig.for_grid(G8)
        assert brute_bmo(f, cfg) == 1.0
        assert bmo_norm(f, cfg) == pytest.approx(1.0, rel=0.1)

    @given(arrays(float, (16, 16), elements=st.floats(-10, 10)), st.floats(-100, 100))
    def test_matches_enumeration_and_shift(self, a, c):
        cfg = MaximalConfig.for_grid(G16)
        f = ScalarField(G16, a)
        v = bmo_norm(f, cfg)
        assert v == pytest.approx(brute_bmo(f, cfg), rel=1e-9, abs=1e-9)
        assert bmo_norm(ScalarField(G16, a + c), cfg) == pytest.approx(v, rel=1e-9, abs=1e-8)

    @given(st.sampled_from([-4.0, -0.5, 0.25, 2.0, 8.0]))
    def test_scaling_exact(self, c):
        f = make_test_field("random_smooth", GridSpec.square(64), seed=2)
        cfg = MaximalConfig.for_grid(f.grid)
        assert bmo_norm(c * f, cfg) == abs(c) * bmo_norm(f, cfg)


class TestFractionalMaximal:
    def test_point_mass(self, grid64):
        m = np.zeros(grid64.dims)
        m[20, 30] = 1.0
        out = fractional_maximal(DiscreteMeasure(grid64, m), 1, MaximalConfig.for_grid(grid64))
        assert out.samples[20, 30] == pytest.approx(1 / grid64.h, rel=1e-14)

    def test_uniform_measure_stencil_count(self, grid64):
        rho = 0.3
        mu = DiscreteMeasure(grid64, np.full(grid64.dims, rho))
        cfg = MaximalConfig.for_grid(grid64)
        out = fractional_maximal(mu, 0, cfg).samples
        h = grid64.h
        expected = max(rho * disk_stencil(r / h, 2).sum() / r**2 for r in cfg.radii)
        assert out[32, 32] == pytest.approx(expected, rel=1e-12)
        # and the per-radius normalised count is close to the density of a disk
        r = cfg.radii[-1]
        assert rho * disk_stencil(r / h, 2).sum() * h**2 / (math.pi * r**2) == pytest.approx(rho, rel=0.02)

    def test_domain(self, grid64):
        with pytest.raises(DomainError):
            fractional_maximal(DiscreteMeasure(grid64, np.zeros(grid64.dims)), 2, MaximalConfig.for_grid(grid64))

    @given(
        arrays(float, (16, 16), elements=st.floats(0, 5)),
        arrays(float, (16, 16), elements=st.floats(0, 5)),
        st.sampled_from([0.0, 0.5, 1.0, 1.5]),
    )
    def test_monotone_and_homogeneous(self, m1, extra, a):
        cfg = MaximalConfig.for_grid(G16)
        lo = fractional_maximal(DiscreteMeasure(G16, m1), a, cfg).samples
        hi = fractional_maximal(DiscreteMeasure(G16, m1 + extra), a, cfg).samples
        assert np.all(lo <= hi)
        doubled = fractional_maximal(DiscreteMeasure(G16, 2 * m1), a, cfg).samples
        np.testing.assert_allclose(doubled, 2 * lo, rtol=1e-12, atol=1e-300)


class TestLorentz:
    def test_single_layer(self, grid64):
        a = np.zeros(grid64.dims)
        a[10:15, 20:27] = 1.0
        assert lorentz_norm(ScalarField(grid64, a), 2) == pytest.approx(math.sqrt(35 * grid64.h**2), rel=1e-14)

    @given(st.floats(-50, 50).filter(lambda c: abs(c) > 1e-6))
    def test_homogeneous(self, c):
        f = make_test_field("two_bumps", GridSpec.square(64))
        assert lorentz_norm(c * f, 2) == pytest.approx(abs(c) * lorentz_norm(f, 2), rel=1e-12)

    def test_disk_against_area_and_explicit_levels(self, grid128):
        f = make_test_field("smoothed_disk", grid128, {"radius": 0.3})
        v = lorentz_norm(f, 2)
        assert v == pytest.approx(math.sqrt(math.pi) * 0.3, rel=0.05)
        levels = (np.arange(1000) + 0.5) / 1000 * f.samples.max()
        explicit = sum(math.sqrt(np.count_nonzero(f.samples > t) * grid128.h**2) for t in levels)
        assert v == pytest.approx(explicit * f.samples.max() / 1000, rel=1e-3)

    def test_exponent_domain(self, grid64):
        with pytest.raises(DomainError):
            lorentz_norm(ScalarField.zeros(grid64), 1)

    def test_isoperimetric_constant(self):
        assert isoperimetric_constant(2) == pytest.approx(1 / (2 * math.sqrt(math.pi)))
        assert isoperimetric_constant(3) == pytest.approx((36 * math.pi) ** (-1 / 3))


class TestAdams:
    def test_zero_measure(self, grid64):
        r = adams_check(DiscreteMeasure(grid64, np.zeros(grid64.dims)), 1, MaximalConfig.for_grid(grid64))
        assert r["bmo_of_riesz"] == 0 and r["max_frac_maximal"] == 0
        assert r["ratios_defined"] is False and "ratio_upper" not in r

    def test_single_atom_and_scaling(self, grid64):
        m = np.zeros(grid64.dims)
        m[32, 32] = grid64.h
        mu = DiscreteMeasure(grid64, m)
        cfg = MaximalConfig.for_grid(grid64)
        r = adams_check(mu, 1, cfg)
        r10 = adams_check(10 * mu, 1, cfg)
        assert r["ratios_defined"]
        assert r10["bmo_of_riesz"] == pytest.approx(10 * r["bmo_of_riesz"], rel=1e-10)
        assert r10["ratio_upper"] == pytest.approx(r["ratio_upper"], rel=1e-10)
        assert r["ratio_lower"] == pytest.approx(1 / r["ratio_upper"])

    def test_rejects_non_measure(self, grid64):
        with pytest.raises(ValidationError):
            adams_check(make_test_field("gauss_bump", grid64), 1, MaximalConfig.for_grid(grid64))
