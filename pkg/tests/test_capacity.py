import math

import numpy as np
import pytest

from majorant.capacity import (
    Ball,
    BallCover,
    boundary_measure,
    boxing_check,
    coarea_tv,
    covers,
    dyadic_radii,
    hausdorff_content,
    hausdorff_content_exact,
    superlevel_set,
)
from majorant.corpus import field_corpus, shape_field
from majorant.errors import SizeError, ValidationError
from majorant.fields import BinaryMask, GridSpec, ScalarField, make_test_field
from oracles import milp_content, random_masks


def disk_mask(grid, center, radius_nodes):
    idx = np.indices(grid.dims)
    r2 = sum((i - c) ** 2 for i, c in zip(idx, center))
    return BinaryMask(grid, r2 <= radius_nodes**2)


# ---------------------------------------------------------------- level sets


def test_superlevel_is_strict():
    g = GridSpec.square(16)
    s = np.zeros(g.dims)
    s[3, 3], s[4, 4] = 0.5, 0.75
    m = superlevel_set(ScalarField(g, s), 0.5)
    assert m.bits[4, 4] and not m.bits[3, 3]
    assert m.bits.sum() == 1


def test_superlevel_extremes(grid64):
    f = make_test_field("gauss_bump", grid64, {"sigma": 0.1})
    assert superlevel_set(f, f.samples.max()).is_empty()
    assert superlevel_set(f, f.samples.min() - 1).bits.all()


def test_gauss_level_radius():
    g = GridSpec.square(128)
    sigma = 0.08
    f = make_test_field("gauss_bump", g, {"sigma": sigma})
    bits = superlevel_set(f, 0.5 * f.samples.max()).bits
    r = np.sqrt(sum((x - c) ** 2 for x, c in zip(g.coordinates(), g.center)))
    expected = sigma * math.sqrt(2 * math.log(2))
    assert r[bits].max() <= expected + 2 * g.h
    assert r[~bits].min() >= expected - 2 * g.h


# ------------------------------------------------------------------- content


def test_ball_cover_cost_is_checked():
    with pytest.raises(ValidationError):
        BallCover((Ball((0.0, 0.0), 0.5),), 1.0, 1.0)
    cover = BallCover.from_balls([Ball((0.0, 0.0), 0.5), Ball((1.0, 0.0), 0.25)], 2.0)
    assert cover.cost == pytest.approx(0.3125)
    assert cover.to_csv_rows() == [(0.0, 0.0, 0.5), (1.0, 0.0, 0.25)]


def test_dyadic_radii():
    assert dyadic_radii(GridSpec.square(64)) == [1, 2, 4, 8, 16, 32]


def test_empty_mask_has_zero_content(grid64):
    cover = hausdorff_content(BinaryMask(grid64, np.zeros(grid64.dims, bool)), 1)
    assert cover.cost == 0 and len(cover) == 0


@pytest.mark.parametrize("alpha", [0.0, 1.0, 1.5, 2.0])
def test_single_node(alpha):
    g = GridSpec.square(32)
    bits = np.zeros(g.dims, bool)
    bits[7, 20] = True
    m = BinaryMask(g, bits)
    cover = hausdorff_content(m, alpha)
    assert len(cover) == 1 and cover.balls[0].radius == pytest.approx(g.h)
    assert cover.cost == pytest.approx(g.h**alpha)
    assert hausdorff_content_exact(m, alpha) == pytest.approx(g.h**alpha)


def test_exponent_domain(grid64):
    m = disk_mask(grid64, (32, 32), 3)
    with pytest.raises(ValidationError):
        hausdorff_content(m, 2.5)


@pytest.mark.parametrize("R", [8, 16])
def test_dyadic_disk_one_ball(R):
    g = GridSpec.square(64)
    m = disk_mask(g, (30, 33), R)
    cover = hausdorff_content(m, 1)
    assert covers(m, cover)
    assert len(cover) == 1
    assert R * g.h <= cover.cost <= (R + 1) * g.h * 1.1


def test_exact_disk_single_ball():
    g = GridSpec.square(32)
    m = disk_mask(g, (16, 16), 8)
    exact = hausdorff_content_exact(m, 1)
    assert 8 * g.h <= exact <= 10 * g.h
    assert exact == pytest.approx(milp_content(m, 1)[0])


def test_two_distant_disks_are_covered_separately():
    g = GridSpec.square(64)
    R = 4
    m = BinaryMask(g, disk_mask(g, (12, 32), R).bits | disk_mask(g, (52, 32), R).bits)
    cover = hausdorff_content(m, 1)
    assert covers(m, cover)
    assert len(cover) == 2
    assert cover.cost == pytest.approx(2 * R * g.h)


def test_exact_size_limits():
    big = GridSpec.square(64)
    with pytest.raises(SizeError):
        hausdorff_content_exact(disk_mask(big, (32, 32), 4), 1)
    small = GridSpec.square(16)
    with pytest.raises(SizeError):
        hausdorff_content_exact(disk_mask(small, (8, 8), 2), 1, max_balls=4)


def test_exact_reports_inf_when_balls_run_out():
    g = GridSpec.square(16)
    bits = np.zeros(g.dims, bool)
    bits[0, 0] = bits[15, 15] = True
    m = BinaryMask(g, bits)
    # opposite corners are 15*sqrt(2) nodes apart; the largest radius is 8
    assert hausdorff_content_exact(m, 1, max_balls=1) == math.inf
    assert hausdorff_content_exact(m, 1, max_balls=2) == pytest.approx(2 * g.h)


@pytest.mark.parametrize("mask", random_masks(12, seed=7), ids=lambda m: f"n{m.grid.dims[0]}")
def test_greedy_against_set_cover_optimum(mask):
    greedy = hausdorff_content(mask, 1)
    exact, n_balls = milp_content(mask, 1)
    N = int(mask.bits.sum())
    assert covers(mask, greedy)
    assert greedy.cost >= exact - 1e-12
    assert greedy.cost <= (1 + math.log(N)) * exact
    if n_balls <= 3:
        assert hausdorff_content_exact(mask, 1) == pytest.approx(exact, rel=1e-12)


def _nested_pair(rng):
    n = 16
    g = GridSpec.square(n)
    outer = rng.random(g.dims) < rng.uniform(0.05, 0.3)
    outer[rng.integers(n), rng.integers(n)] = True
    inner = outer & (rng.random(g.dims) < 0.6)
    inner[tuple(np.argwhere(outer)[0])] = True
    return BinaryMask(g, inner), BinaryMask(g, outer)


def test_greedy_monotone_within_factor_three():
    rng = np.random.default_rng(3)
    for _ in range(20):
        a, b = _nested_pair(rng)
        assert hausdorff_content(a, 1).cost <= 3 * hausdorff_content(b, 1).cost


def test_exact_monotone_and_subadditive():
    g = GridSpec.square(16)
    a = disk_mask(g, (5, 5), 2)
    b = disk_mask(g, (11, 10), 3)
    union = BinaryMask(g, a.bits | b.bits)
    part = BinaryMask(g, a.bits & (np.indices(g.dims)[0] <= 5))
    ea, eb, eu, ep = (hausdorff_content_exact(m, 1) for m in (a, b, union, part))
    assert ep <= ea + 1e-15
    assert ea <= eu + 1e-15 and eb <= eu + 1e-15
    assert eu <= ea + eb + 1e-15


def test_covers_detects_missing_node():
    g = GridSpec.square(16)
    m = disk_mask(g, (8, 8), 3)
    cover = hausdorff_content(m, 1)
    assert covers(m, cover)
    shrunk = BallCover.from_balls([Ball(b.center, b.radius / 2) for b in cover.balls], 1)
    assert not covers(m, shrunk)


# ------------------------------------------------------------ isocontours


def test_boundary_outside_range_is_zero(grid64):
    f = make_test_field("gauss_bump", grid64, {"sigma": 0.1})
    assert boundary_measure(f, 2.0) == 0.0
    assert boundary_measure(f, -1.0) == 0.0


def test_circle_length():
    g = GridSpec.square(128)
    R = 0.3
    f = make_test_field("smoothed_disk", g, {"radius": R, "width": 4 * g.h})
    assert boundary_measure(f, 0.5) == pytest.approx(2 * math.pi * R, rel=0.02)


def test_boundary_joint_scaling(grid64):
    f = make_test_field("two_bumps", grid64, {"radius": 0.15, "separation": 0.35})
    g = ScalarField(grid64, 3.7 * f.samples)
    assert boundary_measure(g, 3.7 * 0.4) == pytest.approx(boundary_measure(f, 0.4), rel=1e-12)


def test_sphere_area():
    g = GridSpec.square(32, d=3)
    R = 0.25
    f = make_test_field("smoothed_disk", g, {"radius": R, "width": 3 * g.h})
    assert boundary_measure(f, 0.5) == pytest.approx(4 * math.pi * R**2, rel=0.03)


def test_coarea_constant(grid64):
    rep = coarea_tv(ScalarField(grid64, np.zeros(grid64.dims)))
    assert rep["tv_gradient"] == 0 and rep["tv_coarea"] == 0
    assert rep["ratio_defined"] is False


def test_coarea_level_count():
    with pytest.raises(ValidationError):
        coarea_tv(ScalarField(GridSpec.square(16), np.zeros((16, 16))), n_levels=4)


def test_coarea_gauss(grid128):
    rep = coarea_tv(make_test_field("gauss_bump", grid128, {"sigma": 0.1}), n_levels=64)
    assert 0.95 <= rep["ratio"] <= 1.05


def test_coarea_ramp(grid128):
    # the ramp x1 on an interior window, tapered smoothly to zero outside it
    g = grid128
    x, y = g.coordinates()
    window = make_test_field("smoothed_disk", g, {"radius": 0.3, "width": 0.1}).samples
    f = ScalarField(g, (x - 0.5) * window)
    rep = coarea_tv(f, n_levels=64)
    assert rep["ratio"] == pytest.approx(1.0, abs=0.05)


# ---------------------------------------------------------------- boxing


def test_boxing_empty(grid64):
    rep = boxing_check(BinaryMask(grid64, np.zeros(grid64.dims, bool)))
    assert rep["content"] == 0 and rep["ratio_defined"] is False


def test_boxing_rejects_foreign_mask(grid64):
    f = make_test_field("gauss_bump", grid64, {"sigma": 0.1})
    with pytest.raises(ValidationError):
        boxing_check(disk_mask(grid64, (10, 10), 2), (f, 0.5))


def _shape_report(name, n=128):
    f = shape_field(name, GridSpec.square(n))
    return boxing_check(superlevel_set(f, 0.5), (f, 0.5))


def test_boxing_disk():
    rep = _shape_report("disk")
    assert rep["n_balls"] == 1
    assert rep["ratio"] == pytest.approx(1 / (2 * math.pi), rel=0.4)


def test_boxing_annulus_one_ball():
    # outer radius 2s with s = L/8: a single ball of radius R = 2s suffices
    rep = _shape_report("annulus")
    R = 2 * 1.0 / 8
    assert rep["content"] <= R + 1e-12
    assert rep["boundary"] == pytest.approx(3 * math.pi * R, rel=0.05)


def test_boxing_thin_bar_vs_hand_cover():
    g = GridSpec.square(256)
    X, Y = np.indices(g.dims)
    mask = BinaryMask(g, (np.abs(X - 128) < 64) & (np.abs(Y - 128) < 8))
    rep = boxing_check(mask)
    assert rep["content"] <= 2 * 8 * 16 * g.h
    assert rep["boundary"] == pytest.approx(2 * 144 * g.h, rel=0.05)


def test_boxing_ratio_bounded_over_corpus(grid128):
    ratios = []
    for name in ("disk", "ellipse", "annulus", "two_disks", "thin_bar"):
        ratios.append(_shape_report(name)["ratio"])
    for _, f in field_corpus(grid128)[:4]:
        t = 0.5 * f.samples.max()
        ratios.append(boxing_check(superlevel_set(f, t), (f, t))["ratio"])
    assert max(ratios) < 0.5
