"""Command-line front end: ``python -m majorant <subcommand> [flags]``.

Exit code 0 means every verdict in the report holds and 1 means a check
failed; usage or input errors give 2.
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import dataclass
from pathlib import Path

from .capacity import boxing_check, superlevel_set
from .construct import decompose, save_decomposition, verify_decomposition
from .corpus import (
    FIELD_NAMES,
    SHAPE_NAMES,
    corpus_field,
    field_corpus,
    measure_corpus,
    near_indicator_disks,
    shape_pairs,
)
from .errors import MajorantError, ValidationError
from .fields import GridSpec, Report, VectorField, load_field, make_test_field, save_field
from .maximal import MaximalConfig, adams_check, isoperimetric_constant, lorentz_norm
from .spectral import SpectralConfig, gradient_l1
from .symbols import (
    DualityConfig,
    duality_gap_check,
    gradient_symbol,
    is_cancelling,
    is_elliptic,
    load_symbol,
)

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

FIELD_KINDS = ("gauss_bump", "smoothed_disk", "two_bumps", "random_smooth", "annulus")
BOXING_TOL = 0.15
BOXING_CONTENT_TOL = 0.15
BOXING_BOUNDARY_TOL = 0.05
ADAMS_BAND = 50.0
HOMOGENEITY_TOL = 1e-9
DUALITY_SPREAD = 3.0
LORENTZ_SLACK = 1.05


class UsageError(MajorantError):
    pass


@dataclass(frozen=True)
class RunConfig:
    subcommand: str
    resolution: int = 128
    n_levels: int = 32
    seed: int = 0
    pad_factor: int = 4
    report_format: str = "text"

    def __post_init__(self):
        r = self.resolution
        if not (16 <= r <= 512 and r & (r - 1) == 0):
            raise ValidationError(f"resolution must be a power of two in [16, 512], got {r}")
        if not 8 <= self.n_levels <= 256:
            raise ValidationError(f"n-levels must lie in [8, 256], got {self.n_levels}")
        if self.report_format not in ("text", "json"):
            raise ValidationError("format must be 'text' or 'json'")

    @property
    def spectral(self):
        return SpectralConfig(self.pad_factor)


def _write_csv(path, header, rows):
    if path is None:
        return
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _spread(values):
    return max(values) / min(values)


# --- subcommands ----------------------------------------------------------------


def cmd_gen(args, rc):
    grid = GridSpec.square(rc.resolution)
    params = {}
    for item in args.param:
        key, sep, val = item.partition("=")
        if not sep:
            raise UsageError(f"--param expects key=value, got {item!r}")
        params[key] = float(val)
    if args.kind in FIELD_KINDS:
        if args.signed:
            params["signed"] = True
        f = make_test_field(args.kind, grid, params, seed=rc.seed)
    elif args.kind in FIELD_NAMES:
        f = corpus_field(args.kind, grid)
    else:
        raise UsageError(f"unknown kind {args.kind!r}")
    fmt = "csv" if Path(args.out).suffix == ".csv" else "binary"
    save_field(f, args.out, fmt)
    rep = Report()
    rep["resolution"] = rc.resolution
    rep["spacing"] = grid.h
    rep["min"] = float(f.samples.min())
    rep["max"] = float(f.samples.max())
    rep["tv"] = gradient_l1(f)
    return rep


def cmd_construct(args, rc):
    fmt = "csv" if Path(args.input).suffix == ".csv" else "binary"
    if fmt == "csv" and args.spacing is None:
        raise UsageError("csv input needs --spacing")
    f = load_field(args.input, fmt, spacing=args.spacing)
    result = decompose(f, rc.n_levels, cfg=rc.spectral)
    rep = verify_decomposition(f, result, rc.spectral)
    if args.out is not None:
        save_decomposition(result, rep, args.out)
    return rep


def cmd_boxing(args, rc):
    names = SHAPE_NAMES if args.shapes == "all" else tuple(s.strip() for s in args.shapes.split(","))
    unknown = [n for n in names if n not in SHAPE_NAMES]
    if unknown:
        raise UsageError(f"unknown shapes {unknown}; choose from {', '.join(SHAPE_NAMES)}")
    rep = Report()
    rows, ratios = [], []
    for name, small, big in shape_pairs(rc.resolution, names):
        reps = [boxing_check(superlevel_set(f, 0.5), (f, 0.5)) for f in (small, big)]
        for scale, r in zip((1, 2), reps):
            rows.append((name, scale, r["content"], r["boundary"], r["ratio"]))
            ratios.append(r["ratio"])
        change = reps[1]["ratio"] / reps[0]["ratio"] - 1
        content_x = reps[1]["content"] / reps[0]["content"]
        boundary_x = reps[1]["boundary"] / reps[0]["boundary"]
        rep[f"{name}_ratio"] = reps[0]["ratio"]
        rep[f"{name}_ratio_doubled"] = reps[1]["ratio"]
        rep[f"{name}_ratio_change"] = change
        rep[f"{name}_scale_stable"] = abs(change) < BOXING_TOL
        rep[f"{name}_content_scaling"] = abs(content_x / 2 - 1) < BOXING_CONTENT_TOL
        rep[f"{name}_boundary_scaling"] = abs(boundary_x / 2 - 1) < BOXING_BOUNDARY_TOL
    rep["max_ratio"] = max(ratios)
    _write_csv(args.csv, ("shape", "scale", "content", "boundary", "ratio"), rows)
    return rep


def cmd_adams(args, rc):
    if args.count < 1:
        raise UsageError("--count must be positive")
    grid = GridSpec.square(rc.resolution)
    mcfg = MaximalConfig.for_grid(grid)
    rep = Report()
    rows, ratios, drift = [], [], 0.0
    for k, mu in enumerate(measure_corpus(grid, rc.seed, args.count)):
        r = adams_check(mu, args.a, mcfg, rc.spectral)
        if not r["ratios_defined"]:
            raise ValidationError(f"measure {rc.seed + k} gives an undefined ratio")
        r10 = adams_check(10 * mu, args.a, mcfg, rc.spectral)
        drift = max(drift, abs(r10["ratio_upper"] / r["ratio_upper"] - 1))
        ratios.append(r["ratio_upper"])
        rows.append((rc.seed + k, r["bmo_of_riesz"], r["max_frac_maximal"], r["ratio_upper"]))
    rep["ratio_min"] = min(ratios)
    rep["ratio_max"] = max(ratios)
    rep["band"] = _spread(ratios)
    rep["scaling_drift"] = drift
    rep["band_ok"] = rep["band"] < ADAMS_BAND
    rep["scaling_invariant"] = drift <= HOMOGENEITY_TOL
    _write_csv(args.csv, ("seed", "bmo_of_riesz", "max_frac_maximal", "ratio"), rows)
    return rep


def cmd_duality(args, rc):
    if not 1 <= args.count <= len(FIELD_NAMES):
        raise UsageError(f"--count must lie in 1..{len(FIELD_NAMES)}")
    grid = GridSpec.square(args.grid)
    cfg = DualityConfig(tuple(args.l), args.j, grid)
    A = gradient_symbol(grid.d)
    rep = Report()
    rows, forward, backward = [], [], []
    for name in FIELD_NAMES[: args.count]:
        phi = VectorField.from_channels([corpus_field(name, grid)])
        r = duality_gap_check(phi, A, cfg, rc.spectral)
        if not r["ratios_defined"]:
            raise ValidationError(f"corpus field {name} has a degenerate duality instance")
        forward.append(r["dual"] / r["primal"])
        backward.append(r["primal"] / r["dual"])
        rows.append((name, r["primal"], r["dual"], r["rhs"], r["gap"]))
        rep[f"{name}_primal"] = r["primal"]
        rep[f"{name}_dual"] = r["dual"]
        rep[f"{name}_gap"] = r["gap"]
    rep["K"] = max(forward)
    rep["K_prime"] = max(backward)
    rep["K_spread"] = _spread(forward)
    rep["K_prime_spread"] = _spread(backward)
    rep["K_stable"] = rep["K_spread"] <= DUALITY_SPREAD
    rep["K_prime_stable"] = rep["K_prime_spread"] <= DUALITY_SPREAD
    _write_csv(args.csv, ("field", "primal", "dual", "rhs", "gap"), rows)
    return rep


def cmd_lorentz(args, rc):
    grid = GridSpec.square(rc.resolution)
    p = grid.d / (grid.d - 1)
    rep = Report()
    rows = []
    for name, f in field_corpus(grid) + near_indicator_disks(grid):
        ratio = lorentz_norm(f, p) / gradient_l1(f)
        rows.append((name, ratio))
        rep[f"{name}_ratio"] = ratio
    constant = max(r for _, r in rows)
    bound = LORENTZ_SLACK * isoperimetric_constant(grid.d)
    rep["lorentz_constant"] = constant
    rep["bound"] = bound
    rep["bounded"] = constant <= bound
    _write_csv(args.csv, ("field", "ratio"), rows)
    return rep


def cmd_symbol_check(args, rc):
    A = load_symbol(args.symbol)
    if args.reseeds < 1:
        raise UsageError("--reseeds must be positive")
    runs = []
    for k in range(args.reseeds):
        e = is_elliptic(A, args.samples, seed=rc.seed + k)
        c = is_cancelling(A, args.samples, seed=rc.seed + k)
        runs.append((e, c))
    e, c = runs[0]
    rep = Report()
    rep["order"] = A.m
    rep["dimE"] = A.dim_e
    rep["dimF"] = A.dim_f
    rep["min_singular_value"] = min(r[0]["min_singular_value"] for r in runs)
    rep["intersection_dimension"] = c["intersection_dimension"]
    rep["elliptic"] = e["elliptic"]
    rep["cancelling"] = c["cancelling"]
    rep["deterministic"] = all(
        (r[0]["elliptic"], r[1]["cancelling"], r[1]["intersection_dimension"])
        == (e["elliptic"], c["cancelling"], c["intersection_dimension"])
        for r in runs
    )
    return rep


# --- argument parsing -----------------------------------------------------------


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("text", "json"), default="text", help="report format")
    common.add_argument("--report", help="also write the report to this file")
    common.add_argument("--pad-factor", type=int, default=4, choices=(2, 4, 8))
    common.add_argument("--seed", type=int, default=0)

    parser = argparse.ArgumentParser(prog="majorant", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("gen", parents=[common], help="write a test field")
    p.add_argument("--kind", required=True, help=f"one of {', '.join(FIELD_KINDS + FIELD_NAMES)}")
    p.add_argument("--resolution", type=int, default=128)
    p.add_argument("--out", required=True)
    p.add_argument("--param", action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("--signed", action="store_true", help="signed random_smooth bumps")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("construct", parents=[common], help="decompose a field and verify it")
    p.add_argument("--input", required=True)
    p.add_argument("--n-levels", type=int, default=32)
    p.add_argument("--out")
    p.add_argument("--spacing", type=float, help="grid spacing for csv input")
    p.set_defaults(func=cmd_construct)

    p = sub.add_parser("boxing", parents=[common], help="content/boundary ratios of the shape corpus")
    p.add_argument("--shapes", default="all")
    p.add_argument("--resolution", type=int, default=128)
    p.add_argument("--csv")
    p.set_defaults(func=cmd_boxing)

    p = sub.add_parser("adams", parents=[common], help="BMO of I_a mu against sup M_a mu")
    p.add_argument("--count", type=int, default=20)
    p.add_argument("--a", type=float, default=1.0)
    p.add_argument("--resolution", type=int, default=64)
    p.add_argument("--csv")
    p.set_defaults(func=cmd_adams, seed=1)

    p = sub.add_parser("duality", parents=[common], help="primal and dual LP optima over the corpus")
    p.add_argument("--grid", type=int, default=16)
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--l", type=float, nargs="+", default=[1.0])
    p.add_argument("--j", type=int, default=1)
    p.add_argument("--csv")
    p.set_defaults(func=cmd_duality)

    p = sub.add_parser("lorentz", parents=[common], help="Lorentz norm against total variation")
    p.add_argument("--resolution", type=int, default=128)
    p.add_argument("--csv")
    p.set_defaults(func=cmd_lorentz)

    p = sub.add_parser("symbol-check", parents=[common], help="ellipticity and cancellation of a symbol")
    p.add_argument("--symbol", required=True)
    p.add_argument("--samples", type=int, default=512)
    p.add_argument("--reseeds", type=int, default=5)
    p.set_defaults(func=cmd_symbol_check)
    return parser


def run(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        rc = RunConfig(
            args.subcommand,
            resolution=getattr(args, "resolution", 128),
            n_levels=getattr(args, "n_levels", 32),
            seed=args.seed,
            pad_factor=args.pad_factor,
            report_format=args.format,
        )
        rep = args.func(args, rc)
        text = rep.to_json() if rc.report_format == "json" else rep.to_text()
        if args.report:
            Path(args.report).write_text(text)
    except (MajorantError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    sys.stdout.write(text)
    return EXIT_OK if rep.passed else EXIT_FAIL


def main():
    sys.exit(run())
