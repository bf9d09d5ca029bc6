"""Command line front end: ``python -m fbhgm <command> ...``.

Commands: ``normconst``, ``mle``, ``sample``, ``check`` and ``bench-table1``.
Exit codes: 0 ok, 1 usage or validation error, 2 evaluation failure,
3 no MLE start converged, 4 check failure.

Settings can come from a JSON file (``--config``); flags given on the command
line take precedence.  ``FB_THREADS`` caps the worker pool.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import dataclass, field, fields, replace
from importlib import resources

import numpy as np

from .errors import AcceptanceTooLow, AllStartsFailed, FBError, ValidationError
from .hgm import DEFAULT_TOL, eval_diag_state, perturbed_ensemble
from .mle import MleConfig, mle_pipeline
from .model import Dataset, DiagParams, FullParams, diagonalize, validate_on_sphere
from .ode import OdeSettings
from .oracle import rejection_sample
from .series import MAX_ORDER

log = logging.getLogger("fbhgm")

EXIT_OK, EXIT_USAGE, EXIT_EVAL, EXIT_MLE, EXIT_CHECK = 0, 1, 2, 3, 4

TABLE1_Y = (1.5, 1.2, 0.9, 0.6, 0.3)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ---------------------------------------------------------------------------
# configuration

@dataclass
class RunConfig:
    tol: float = DEFAULT_TOL
    order_cap: int = MAX_ORDER
    ode: dict = field(default_factory=dict)
    eps: float = 1e-5
    replicas: int = 200
    confidence: float = 0.95
    mle: dict = field(default_factory=dict)
    seed: int = 0
    format: str = "json"

    def ode_settings(self):
        return OdeSettings(**self.ode)

    def mle_config(self):
        return MleConfig(**{**self.mle, "ode": self.ode_settings(), "seed": self.seed,
                            "series_tol": self.tol})


_ODE_KEYS = {f.name for f in fields(OdeSettings)} - {"method"}
_MLE_KEYS = {"starts", "grad_tol", "max_iters", "max_step_norm", "nm_diameter_tol",
             "nm_max_evals", "substep", "reanchor_every", "backtracks", "threads"}


def load_config(path) -> RunConfig:
    """Read and validate a JSON config; unknown keys are rejected."""
    with open(path) as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        raise ValidationError("config must be a JSON object")
    known = {f.name for f in fields(RunConfig)}
    extra = set(raw) - known
    if extra:
        raise ValidationError(f"unknown config keys: {sorted(extra)}")
    for sub, allowed in (("ode", _ODE_KEYS), ("mle", _MLE_KEYS)):
        if not isinstance(raw.get(sub, {}), dict):
            raise ValidationError(f"config key {sub!r} must be an object")
        bad = set(raw.get(sub, {})) - allowed
        if bad:
            raise ValidationError(f"unknown {sub} keys: {sorted(bad)}")
    cfg = RunConfig(**raw)
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig):
    if not cfg.tol > 0:
        raise ValidationError("tol must be positive")
    if cfg.eps < 0:
        raise ValidationError("eps must be >= 0")
    if cfg.replicas < 2:
        raise ValidationError("replicas must be >= 2")
    if not 0 < cfg.confidence < 1:
        raise ValidationError("confidence must be in (0, 1)")
    if not 1 <= cfg.order_cap <= MAX_ORDER:
        raise ValidationError(f"order_cap must be in 1..{MAX_ORDER}")
    if cfg.format not in ("json", "csv", "text"):
        raise ValidationError(f"unknown format {cfg.format!r}")
    try:
        cfg.ode_settings()
        cfg.mle_config()
    except (TypeError, ValueError) as exc:
        raise ValidationError(str(exc)) from None


def _config(args) -> RunConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else RunConfig()
    over = {}
    for name in ("tol", "eps", "replicas", "confidence", "seed", "format"):
        v = getattr(args, name, None)
        if v is not None:
            over[name] = v
    mle = dict(cfg.mle)
    for flag, key in (("starts", "starts"), ("grad_tol", "grad_tol"), ("max_iters", "max_iters")):
        v = getattr(args, flag, None)
        if v is not None:
            mle[key] = v
    cfg = replace(cfg, mle=mle, **over)
    _validate(cfg)
    return cfg


# ---------------------------------------------------------------------------
# input / output helpers

def _floats(text, what):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ValidationError(f"{what}: expected a comma-separated list of numbers") from None


def read_matrix(path):
    """``d+1`` lines of ``d+1`` comma-separated values, symmetrised."""
    rows = []
    with open(path, newline="") as fh:
        for line in csv.reader(fh):
            if line and any(c.strip() for c in line):
                rows.append([float(c) for c in line])
    x = np.array(rows, dtype=float)
    if x.ndim != 2 or x.shape[0] != x.shape[1]:
        raise ValidationError(f"{path}: matrix must be square")
    asym = np.abs(x - x.T).max()
    if asym > 1e-12:
        log.warning("x is not symmetric (max |x - x^T| = %.3g); using (x + x^T)/2", asym)
    return 0.5 * (x + x.T)


def _params(args):
    y = np.array(_floats(args.y, "--y"))
    if os.path.isfile(args.x):
        x = read_matrix(args.x)
    else:
        xd = _floats(args.x, "--x")
        x = np.diag(xd)
    n = args.dim + 1
    if x.shape != (n, n) or y.size != n:
        raise ValidationError(f"--dim {args.dim} needs {n} values for the diagonal of x and for y")
    return FullParams(x, y, args.r)


def fmt17(v):
    return format(float(v), ".17g")


def write_points(points, fh, header=False):
    w = csv.writer(fh, lineterminator="\n")
    if header:
        w.writerow([f"t{i + 1}" for i in range(points.shape[1])])
    for row in points:
        w.writerow([fmt17(v) for v in row])


def read_points(path):
    rows = []
    with open(path, newline="") as fh:
        for k, line in enumerate(csv.reader(fh)):
            if not line or not any(c.strip() for c in line):
                continue
            try:
                rows.append([float(c) for c in line])
            except ValueError:
                if k == 0 and not rows:
                    continue  # header
                raise ValidationError(f"{path}: row {k} is not numeric") from None
    if not rows or len({len(r) for r in rows}) != 1:
        raise ValidationError(f"{path}: rows must be non-empty and of equal length")
    pts = np.array(rows)
    bad = validate_on_sphere(pts, 1e-8)
    if bad:
        raise ValidationError(f"{path}: rows not on the unit sphere (0-based row index): {bad[:10]}")
    return Dataset(pts)


def schema(name):
    """Load a shipped JSON schema (``normconst`` or ``mle``)."""
    return json.loads(resources.files("fbhgm").joinpath(f"schemas/{name}.schema.json").read_text())


def _emit(obj, fmt, out):
    if fmt == "json":
        out.write(json.dumps(obj, sort_keys=False) + "\n")
    elif fmt == "csv":
        w = csv.writer(out, lineterminator="\n")
        flat = {k: (";".join(fmt17(v) for v in val) if isinstance(val, list) else val)
                for k, val in obj.items()}
        w.writerow(flat.keys())
        w.writerow([fmt17(v) if isinstance(v, float) else v for v in flat.values()])
    else:
        for k, v in obj.items():
            out.write(f"{k}: {v}\n")


# ---------------------------------------------------------------------------
# commands

def cmd_normconst(args, out=sys.stdout):
    cfg = _config(args)
    p = _params(args)
    dp, _ = diagonalize(p)
    try:
        _, info = eval_diag_state(dp, cfg.tol, cfg.ode_settings(), order_cap=cfg.order_cap)
        est = perturbed_ensemble(dp, cfg.tol, cfg.eps, cfg.replicas, cfg.confidence, cfg.seed,
                                 cfg.ode_settings(), order_cap=cfg.order_cap)
    except (FBError, OverflowError, ValueError) as exc:
        print(f"error: evaluation failed: {exc}", file=sys.stderr)
        return EXIT_EVAL
    res = {
        "value": est.value,
        "sd": est.sd,
        "ci": [est.ci_low, est.ci_high],
        "route": info.route,
        "series_order": info.series.order,
        "r1": info.r1,
    }
    _emit(res, cfg.format, out)
    return EXIT_OK


def cmd_mle(args, out=sys.stdout):
    cfg = _config(args)
    data = read_points(args.data)
    try:
        res = mle_pipeline(data, cfg.mle_config())
    except AllStartsFailed as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MLE
    p = res.theta_hat
    obj = {
        "x": [float(v) for v in p.upper],
        "y": [float(v) for v in p.y],
        "loglik": res.loglik,
        "grad_norm": res.grad_norm,
        "iters": res.iters,
        "restarts": res.restarts,
        "status": res.status,
    }
    _emit(obj, cfg.format, out)
    return EXIT_OK


def cmd_sample(args, out=sys.stdout):
    cfg = _config(args)
    p = _params(args)
    if args.n < 1:
        raise ValidationError("--n must be >= 1")
    try:
        data = rejection_sample(p, args.n, cfg.seed)
    except AcceptanceTooLow as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_EVAL
    if args.out:
        with open(args.out, "w", newline="") as fh:
            write_points(data.points, fh, args.header)
    else:
        write_points(data.points, out, args.header)
    return EXIT_OK


def cmd_check(args, out=sys.stdout):
    from .checks import run_checks

    dims = [int(v) for v in _floats(args.dims, "--dims")]
    rows = run_checks(dims, mc_samples=args.mc_samples, seed=args.seed or 0)
    width = max(len(r[0]) for r in rows)
    for name, ok, detail in rows:
        out.write(f"{name:<{width}}  {'PASS' if ok else 'FAIL'}  {detail}\n")
    return EXIT_OK if all(ok for _, ok, _ in rows) else EXIT_CHECK


def table1_params(x11):
    return DiagParams(x11 * np.arange(1.0, 6.0), np.array(TABLE1_Y))


def cmd_bench_table1(args, out=sys.stdout):
    cfg = _config(args)
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["x11", "value", "sd"])
    for k in range(1, 21):
        x11 = 0.5 * k
        try:
            est = perturbed_ensemble(table1_params(x11), cfg.tol, cfg.eps, cfg.replicas,
                                     cfg.confidence, cfg.seed + k, cfg.ode_settings(),
                                     order_cap=cfg.order_cap)
        except (FBError, OverflowError) as exc:
            print(f"error: row x11={x11}: {exc}", file=sys.stderr)
            return EXIT_EVAL
        w.writerow([fmt17(x11), fmt17(est.value), fmt17(est.sd)])
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser():
    top = _Parser(prog="fbhgm", description="Fisher-Bingham normalizing constants and MLE")
    top.add_argument("-v", "--verbose", action="store_true")
    sub = top.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, fmt=True):
        sp.add_argument("--config", help="JSON config file (flags override it)")
        sp.add_argument("--seed", type=int)
        if fmt:
            sp.add_argument("--format", choices=("json", "csv", "text"))

    def params(sp):
        sp.add_argument("--dim", type=int, required=True)
        sp.add_argument("--x", required=True,
                        help="diagonal of x as a comma list, or a file with the full matrix")
        sp.add_argument("--y", required=True, help="comma list of d+1 values")

    sp = sub.add_parser("normconst", help="normalizing constant with error bound")
    params(sp)
    sp.add_argument("--r", type=float, default=1.0)
    sp.add_argument("--tol", type=float)
    sp.add_argument("--eps", type=float)
    sp.add_argument("--replicas", type=int)
    sp.add_argument("--confidence", type=float)
    common(sp)
    sp.set_defaults(func=cmd_normconst)

    sp = sub.add_parser("mle", help="maximum likelihood fit of a data file")
    sp.add_argument("--data", required=True)
    sp.add_argument("--starts", type=int)
    sp.add_argument("--grad-tol", type=float, dest="grad_tol")
    sp.add_argument("--max-iters", type=int, dest="max_iters")
    common(sp)
    sp.set_defaults(func=cmd_mle)

    sp = sub.add_parser("sample", help="draw points by rejection sampling")
    params(sp)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--out")
    sp.add_argument("--header", action="store_true")
    common(sp, fmt=False)
    sp.set_defaults(func=cmd_sample, r=1.0)

    sp = sub.add_parser("check", help="self-check suite")
    sp.add_argument("--dims", default="1,2,3")
    sp.add_argument("--mc-samples", type=int, default=10 ** 6, dest="mc_samples")
    sp.add_argument("--seed", type=int)
    sp.set_defaults(func=cmd_check)

    sp = sub.add_parser("bench-table1", help="d = 4 benchmark sweep over x11")
    sp.add_argument("--tol", type=float)
    sp.add_argument("--eps", type=float)
    sp.add_argument("--replicas", type=int)
    common(sp, fmt=False)
    sp.set_defaults(func=cmd_bench_table1)
    return top


def _glue_negative_lists(argv):
    # "--y -1,2" would otherwise read "-1,2" as an option
    argv = list(argv)
    out = []
    k = 0
    while k < len(argv):
        a = argv[k]
        if a in ("--x", "--y") and k + 1 < len(argv) and argv[k + 1].startswith("-"):
            try:
                _floats(argv[k + 1], a)
            except ValidationError:
                pass
            else:
                out.append(f"{a}={argv[k + 1]}")
                k += 2
                continue
        out.append(a)
        k += 1
    return out


def main(argv=None, out=None):
    out = out or sys.stdout
    argv = _glue_negative_lists(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args, out)
    except (UsageError, ValidationError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
