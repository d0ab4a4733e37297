"""Command line: ``bsplift <command> ...``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 unreadable or unwritable files.
"""
from __future__ import annotations

import argparse
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import sparse

from . import csvio, finescale, testdata, transform, variance
from .errors import BspliftError, ConfigError, NumericalError
from .grid import KnotVector

COMMANDS = (
    "design",
    "transform",
    "reconstruct",
    "presmooth",
    "denoise",
    "variance-report",
    "generate-testdata",
)
ROUND_TRIP_LIMIT = 1e-10


@dataclass
class RunConfig:
    command: str
    knots: str | None = None
    data: str | None = None
    pyramid: str | None = None
    reference: str | None = None
    order: int = 4
    levels: int = 5
    mode: str = "vm:p=1"
    boundary: str = "clamped"
    threshold: str = "universal"
    sigma: float | None = None
    neighborhood: int | None = None
    seed: int = testdata.DEFAULT_SEED
    kind: str | None = None
    n: int | None = None
    output: str | None = None
    report: str | None = None
    csv: str | None = None
    nondecimated: str | None = None
    emit_basis: str | None = None
    condition: bool = False
    dump_matrix: list = field(default_factory=list)
    dump_dir: str = "."

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if self.command not in ("generate-testdata", "presmooth"):
            transform.DesignMode.parse(self.mode)
        if self.order < 1:
            raise ConfigError("--order must be >= 1")
        if self.levels < 1:
            raise ConfigError("--levels must be >= 1")


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bsplift", description="B-spline wavelets on irregular knots")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, data=True, design=True):
        p.add_argument("--knots", required=True, help="CSV with one knot column")
        if data:
            p.add_argument("--data", required=True, help="CSV with a value column")
        p.add_argument("--order", type=int, default=4, help="spline order (degree + 1)")
        if design:
            p.add_argument("--levels", type=int, default=5, help="number of coarsening steps")
            p.add_argument("--mode", default="vm:p=1", help="vm:p=K[,nu=N] or opt:p=K,nu=N")
            p.add_argument("--boundary", default="clamped", choices=["clamped", "exact"])
        p.add_argument("--output", "-o", help="output path")
        p.add_argument("--report", help="JSON run report path")
        p.add_argument("--dump-matrix", action="append", default=[], metavar="NAME",
                       help="H_j, G_j, Ht_j, Gt_j, U_j, P or S; repeatable")
        p.add_argument("--dump-dir", default=".", help="directory for --dump-matrix files")
        p.add_argument("--seed", type=int, default=testdata.DEFAULT_SEED)

    p = sub.add_parser("design", help="design the lifting schemes and write them as JSON")
    common(p, data=False)
    p = sub.add_parser("transform", help="forward transform to a pyramid CSV")
    common(p)
    p.add_argument("--nondecimated", help="also write the non-decimated pyramid here")
    p.add_argument("--emit-basis", help="CSV of synthesised scaling functions and wavelets")
    p = sub.add_parser("reconstruct", help="inverse transform of a pyramid CSV")
    common(p, data=False)
    p.add_argument("--pyramid", required=True)
    p.add_argument("--reference", help="data CSV to compare the reconstruction with")
    p = sub.add_parser("presmooth", help="fine-scale coefficients from observations")
    common(p, design=False)
    p.add_argument("--neighborhood", type=int, help="samples per row (default order + 2)")
    p = sub.add_parser("denoise", help="soft-threshold denoising")
    common(p)
    p.add_argument("--threshold", default="universal", help="'universal' or a number")
    p.add_argument("--sigma", type=float, help="noise level (default: MAD estimate)")
    p = sub.add_parser("variance-report", help="variance propagation of the coarse projection")
    common(p, data=False)
    p.add_argument("--csv", help="CSV of singular values, descending")
    p.add_argument("--condition", action="store_true", help="also compute the condition number")
    p = sub.add_parser("generate-testdata", help="write reproducible knots or signals")
    p.add_argument("--kind", required=True, choices=testdata.KINDS)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=testdata.DEFAULT_SEED)
    p.add_argument("--sigma", type=float, default=0.1)
    p.add_argument("--output", "-o", required=True)
    return ap


def _config(ns: argparse.Namespace) -> RunConfig:
    keys = RunConfig.__dataclass_fields__
    vals = {k.replace("-", "_"): v for k, v in vars(ns).items() if k.replace("-", "_") in keys}
    return RunConfig(**vals)


# --------------------------------------------------------------------------


def _knots(cfg) -> KnotVector:
    if not cfg.knots:
        raise ConfigError("--knots is required")
    return KnotVector.from_values(csvio.read_vector(cfg.knots, prefer=("x", "knot", "value")), level=cfg.levels)


def _data(cfg, n):
    y = csvio.read_vector(cfg.data)
    if y.shape[0] != n:
        raise ConfigError(f"{cfg.data} has {y.shape[0]} values but there are {n} knots")
    return y


def _build(cfg, kv=None):
    kv = _knots(cfg) if kv is None else kv
    grid = transform.grid_for(kv, cfg.levels)
    return transform.build(grid, cfg.order, cfg.mode, boundary=cfg.boundary)


def _sparse_triplets(M):
    C = sparse.coo_matrix(M)
    order = np.lexsort((C.col, C.row))
    return {"row": C.row[order], "col": C.col[order], "value": C.data[order]}


def _dump(cfg, t=None, pre=None):
    for name in cfg.dump_matrix:
        base, _, lev = name.partition("_")
        if base == "S":
            if pre is None:
                raise ConfigError("matrix S is only available in presmooth")
            M = pre.dense()
        elif base == "P":
            if t is None:
                raise ConfigError("matrix P needs a transform")
            M = variance.projection_matrix(t)
        elif base in ("H", "G", "Ht", "Gt", "U"):
            if t is None or not lev.lstrip("-").isdigit():
                raise ConfigError(f"matrix name {name!r} must look like {base}_<level>")
            L = t.level(int(lev))
            M = {"H": L.H, "G": L.G, "Ht": L.Ht, "Gt": L.Gt, "U": L.update}[base]
        else:
            raise ConfigError(f"unknown matrix {name!r}")
        csvio.write_table(Path(cfg.dump_dir) / f"{name}.csv", _sparse_triplets(M))


def _echo(cfg) -> dict:
    d = asdict(cfg)
    return {k: v for k, v in d.items() if v not in (None, [], False)}


def _finish(cfg, results, t0, extra=None):
    timing = {"total": time.perf_counter() - t0}
    if extra:
        timing.update(extra)
    if cfg.report:
        csvio.write_json(cfg.report, csvio.report(cfg.command, _echo(cfg), results, timing))


def _level_json(lev) -> dict:
    steps = []
    for st in lev.scheme.steps:
        steps.append(
            {
                "kind": st.kind,
                "rows": [{"row": r, "cols": list(c.keys()), "values": list(c.values())} for r, c in st.rows()],
            }
        )
    U = _sparse_triplets(lev.update)
    return {
        "level": lev.j,
        "n_fine": lev.n_fine,
        "n_coarse": lev.n_coarse,
        "steps": steps,
        "final_update": {k: v.tolist() for k, v in U.items()},
        "deficits": {str(k): v for k, v in lev.info.get("deficits", {}).items()},
    }


def cmd_design(cfg):
    t0 = time.perf_counter()
    t = _build(cfg)
    payload = {
        "order": t.order,
        "mode": str(t.mode),
        "boundary": t.boundary,
        "sizes": t.grid.sizes(),
        "levels": [_level_json(lev) for lev in t.levels],
    }
    out = cfg.output or "design.json"
    csvio.write_json(out, csvio.report("design", _echo(cfg), payload, {"total": time.perf_counter() - t0}))
    _dump(cfg, t)
    _finish(cfg, {"sizes": t.grid.sizes()}, t0)
    print(f"wrote {out}")


def cmd_transform(cfg):
    t0 = time.perf_counter()
    kv = _knots(cfg)
    y = _data(cfg, kv.n)
    t = _build(cfg, kv)
    t1 = time.perf_counter()
    pyr = transform.forward(t, y)
    t2 = time.perf_counter()
    out = cfg.output or "pyramid.csv"
    csvio.write_pyramid(out, pyr)
    if cfg.nondecimated:
        nd = transform.forward_nondecimated(t, y)
        cols = {"level": [], "channel": [], "index": [], "kind": [], "value": []}
        for li, j in enumerate(range(nd.L, nd.J)):
            for c, (sc, d) in enumerate(zip(nd.scaling[li], nd.details[li])):
                for kind, vec in ((0, sc), (1, d)):
                    cols["level"] += [j] * vec.size
                    cols["channel"] += [c] * vec.size
                    cols["index"] += list(range(vec.size))
                    cols["kind"] += [kind] * vec.size
                    cols["value"] += list(vec)
        csvio.write_table(cfg.nondecimated, {k: np.array(v) for k, v in cols.items()})
    if cfg.emit_basis:
        _emit_basis(cfg.emit_basis, t, kv)
    rep = variance.analyze(t)
    _dump(cfg, t)
    results = {
        "order": t.order,
        "levels": cfg.levels,
        "sizes": t.grid.sizes(),
        "mode": str(t.mode),
        "kappaF": rep.kappa_F,
        "kappa2": rep.kappa_2,
        "rank": rep.rank,
    }
    _finish(cfg, results, t0, {"build": t1 - t0, "forward": t2 - t1})
    print(f"wrote {out} ({pyr.total_length} coefficients)")


def _emit_basis(path, t, kv):
    """Coarsest scaling function and one wavelet per level (kind 0 / 1), as fine coefficients."""
    zero = transform.forward(t, np.zeros(t.n))
    cols = {"x": [], "level": [], "kind": [], "value": []}

    def emit(level, kind, coarse, dets):
        v = transform.inverse(t, transform.CoefficientPyramid(coarse, tuple(dets), t.L, t.J))
        cols["x"].extend(kv.knots)
        cols["level"].extend([level] * t.n)
        cols["kind"].extend([kind] * t.n)
        cols["value"].extend(v)

    coarse = np.zeros_like(zero.coarse)
    coarse[coarse.size // 2] = 1.0
    emit(t.L, 0, coarse, zero.details)
    for i, d in enumerate(zero.details):
        dets = [np.zeros_like(x) for x in zero.details]
        dets[i][d.size // 2] = 1.0
        emit(t.L + i, 1, zero.coarse, dets)
    csvio.write_table(path, {k: np.array(v) for k, v in cols.items()})


def cmd_reconstruct(cfg):
    t0 = time.perf_counter()
    kv = _knots(cfg)
    t = _build(cfg, kv)
    L, coarse, details = csvio.read_pyramid(cfg.pyramid)
    if L != t.L or [j for j, _ in details] != list(range(t.L, t.J)):
        raise ConfigError("pyramid levels do not match --levels")
    pyr = transform.CoefficientPyramid(coarse, tuple(d for _, d in details), t.L, t.J)
    s = transform.inverse(t, pyr)
    out = cfg.output or "reconstruction.csv"
    csvio.write_table(out, {"x": kv.knots, "value": s})
    results = {"n": int(s.size)}
    if cfg.reference:
        ref = csvio.read_vector(cfg.reference)
        if ref.shape != s.shape:
            raise ConfigError("reference has a different length")
        err = float(np.abs(ref - s).max())
        results["max_abs_error"] = err
        print(f"max abs round-trip error {err:.3e}")
        if not err < ROUND_TRIP_LIMIT:
            _finish(cfg, results, t0)
            raise NumericalError(f"round-trip error {err:.3e} exceeds {ROUND_TRIP_LIMIT:g}", module="cli")
    _dump(cfg, t)
    _finish(cfg, results, t0)
    print(f"wrote {out}")


def cmd_presmooth(cfg):
    t0 = time.perf_counter()
    kv = _knots(cfg)
    y = _data(cfg, kv.n)
    pre = finescale.build_presmoother(kv, cfg.order, cfg.neighborhood)
    c = finescale.apply_presmoother(pre, y)
    out = cfg.output or "coefficients.csv"
    csvio.write_table(out, {"index": np.arange(c.size) - 1, "x": pre.extended.knots, "value": c})
    var = pre.variances()
    if cfg.report:
        csvio.write_table(Path(cfg.report).with_suffix(".csv"), {"index": np.arange(c.size) - 1, "variance": var})
    _dump(cfg, pre=pre)
    _finish(
        cfg,
        {
            "constraint_residual": finescale.constraint_residual(pre),
            "max_variance": float(var.max()),
            "neighborhood": pre.neighborhood,
        },
        t0,
    )
    print(f"wrote {out}")


def cmd_denoise(cfg):
    t0 = time.perf_counter()
    kv = _knots(cfg)
    y = _data(cfg, kv.n)
    t = _build(cfg, kv)
    thr = cfg.threshold
    if thr != "universal":
        try:
            thr = float(thr)
        except ValueError as exc:
            raise ConfigError(f"--threshold must be 'universal' or a number, got {thr!r}") from exc
    z = transform.denoise(t, y, thr, cfg.sigma)
    out = cfg.output or "denoised.csv"
    csvio.write_table(out, {"x": kv.knots, "value": z})
    sigma = transform.estimate_noise(t, transform.forward(t, y)) if cfg.sigma is None else cfg.sigma
    _dump(cfg, t)
    _finish(cfg, {"sigma": sigma, "threshold": str(cfg.threshold)}, t0)
    print(f"wrote {out}")


def cmd_variance_report(cfg):
    t0 = time.perf_counter()
    t = _build(cfg)
    rep = variance.analyze(t)
    results = rep.as_dict()
    if cfg.condition:
        results["condition_number"] = variance.condition_number(t)
    out = cfg.output or "variance.json"
    csvio.write_json(out, csvio.report(cfg.command, _echo(cfg), results, {"total": time.perf_counter() - t0}))
    if cfg.csv:
        csvio.write_table(cfg.csv, {"rank": np.arange(1, rep.singular_values.size + 1), "singular_value": rep.singular_values})
    _dump(cfg, t)
    _finish(cfg, results, t0)
    print(f"kappaF {rep.kappa_F:.6g} kappa2 {rep.kappa_2:.6g} rank {rep.rank}")


def cmd_generate_testdata(cfg):
    cols = testdata.generate(cfg.kind, cfg.n, cfg.seed, cfg.sigma if cfg.sigma is not None else 0.1)
    csvio.write_table(cfg.output, cols)
    print(f"wrote {cfg.output}")


HANDLERS = {
    "design": cmd_design,
    "transform": cmd_transform,
    "reconstruct": cmd_reconstruct,
    "presmooth": cmd_presmooth,
    "denoise": cmd_denoise,
    "variance-report": cmd_variance_report,
    "generate-testdata": cmd_generate_testdata,
}


def run(cfg: RunConfig) -> int:
    """Run one command; returns the exit status."""
    try:
        HANDLERS[cfg.command](cfg)
    except BspliftError as exc:
        print(f"bsplift {cfg.command}: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"bsplift {cfg.command}: error: {exc}", file=sys.stderr)
        return 4
    return 0


def main(argv=None) -> int:
    ns = _parser().parse_args(argv)
    try:
        cfg = _config(ns)
    except BspliftError as exc:
        print(f"bsplift: error: {exc}", file=sys.stderr)
        return exc.exit_code
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
