"""Command-line front end.

Every subcommand reads an optional JSON config, runs one task and writes a
report bundle (``manifest.json``, CSV tables and PNG figures) to the output
directory.  Exit codes: 0 all checks pass, 1 a check failed, 2 configuration
error, 3 numerical failure.

Config schema (all keys optional unless a task needs them)::

    {
      "task": "verify",
      "domain": {"kind": "ball", "n": 2, "radius": 1.0, "center": [0, 0],
                 "semi_axes": [1.0, 0.7], "shell_thickness": 0.4, "level": 1.3},
      "annulus": {"envelope": {...domain...}, "hole": {...domain...}},
      "p": 0, "q": 1, "weight_t": 0.3,
      "resolution": 24, "resolutions": [8, 9, 10],
      "seed": 0, "samples": 100, "forms": 2, "trials": 500,
      "margins": [0.04, 0.12], "K": 1.0, "E": 1.0, "C_w1": 1.0,
      "bc": "max", "identities": ["pointwise", "mkh"],
      "estimate_constant": false, "out": "report"
    }

Domain kinds are ``ball``, ``ellipsoid`` and ``dumbbell``.  Complex center
entries may be numbers or ``[re, im]`` pairs.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path
from typing import Any, Optional

import numpy as np

from . import report
from .errors import ConfigError, DbarLabError, NumericalFailure

TASKS = ("geometry", "check-convexity", "verify", "constants", "solve", "cohomology", "pipeline")
TOP_KEYS = {
    "task": str,
    "domain": dict,
    "annulus": dict,
    "p": int,
    "q": int,
    "weight_t": float,
    "resolution": int,
    "resolutions": list,
    "seed": int,
    "samples": int,
    "forms": int,
    "trials": int,
    "margins": list,
    "K": float,
    "E": float,
    "C_w1": float,
    "bc": str,
    "identities": list,
    "estimate_constant": bool,
    "out": str,
}
DOMAIN_KEYS = {"kind", "n", "radius", "center", "semi_axes", "shell_thickness", "level"}
IDENTITY_NAMES = ("pointwise", "int_by_parts", "gradient_identity", "mkh", "pseudoconcave", "pairing")

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


class RunConfig:
    """Validated configuration with the source text kept for diagnostics."""

    def __init__(self, data: dict, text: str = ""):
        self.data = data
        self.text = text
        self._validate_keys()

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        text = Path(path).read_text()
        return cls.parse(text)

    @classmethod
    def parse(cls, text: str) -> "RunConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(exc.msg, line=exc.lineno) from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object", line=1)
        return cls(data, text)

    def line_of(self, key: str) -> Optional[int]:
        needle = f'"{key}"'
        for i, line in enumerate(self.text.splitlines(), 1):
            if needle in line:
                return i
        return None

    def error(self, message: str, field: str) -> ConfigError:
        return ConfigError(message, field=field, line=self.line_of(field.split(".")[-1]))

    def _validate_keys(self) -> None:
        for key, value in self.data.items():
            if key not in TOP_KEYS:
                raise self.error("unknown key", key)
            want = TOP_KEYS[key]
            ok = isinstance(value, want) or (want is float and isinstance(value, int))
            if want is int and isinstance(value, bool):
                ok = False
            if not ok:
                raise self.error(f"expected {want.__name__}", key)
        if "domain" in self.data:
            self._check_domain(self.data["domain"], "domain")
        if "annulus" in self.data:
            ann = self.data["annulus"]
            for k in ann:
                if k not in ("envelope", "hole"):
                    raise self.error("unknown key", f"annulus.{k}")
            for part in ("envelope", "hole"):
                if part not in ann:
                    raise self.error("missing", f"annulus.{part}")
                self._check_domain(ann[part], f"annulus.{part}")

    def _check_domain(self, d: Any, where: str) -> None:
        if not isinstance(d, dict):
            raise self.error("expected an object", where)
        for k in d:
            if k not in DOMAIN_KEYS:
                raise self.error("unknown key", f"{where}.{k}")
        if d.get("kind") not in ("ball", "ellipsoid", "dumbbell"):
            raise self.error("kind must be ball, ellipsoid or dumbbell", f"{where}.kind")

    def get(self, key: str, default=None):
        return self.data.get(key, default)

    def require(self, key: str):
        if key not in self.data:
            raise self.error("required for this task", key)
        return self.data[key]


def _complex_list(values) -> list[complex]:
    out = []
    for v in values:
        out.append(complex(v[0], v[1]) if isinstance(v, (list, tuple)) else complex(v))
    return out


def build_domain(cfg: RunConfig, d: dict, where: str):
    from .convexity import dumbbell
    from .geometry import DomainSpec

    kind = d["kind"]
    shell = d.get("shell_thickness")
    center = _complex_list(d["center"]) if "center" in d else None
    try:
        if kind == "ball":
            n = int(d.get("n", 2))
            if n < 1:
                raise cfg.error("n must be positive", f"{where}.n")
            r = float(d.get("radius", 1.0))
            if r <= 0:
                raise cfg.error("radius must be positive", f"{where}.radius")
            return DomainSpec.ball(n, r, center=center, shell_thickness=shell)
        if kind == "ellipsoid":
            if "semi_axes" not in d:
                raise cfg.error("required for an ellipsoid", f"{where}.semi_axes")
            axes = [float(a) for a in d["semi_axes"]]
            if any(a <= 0 for a in axes):
                raise cfg.error("semi-axes must be positive", f"{where}.semi_axes")
            return DomainSpec.ellipsoid(axes, center=center, shell_thickness=shell)
        return dumbbell(shell_thickness=0.1 if shell is None else float(shell), level=float(d.get("level", 1.3)))
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise cfg.error(str(exc), where) from exc


def build_annulus(cfg: RunConfig):
    from .geometry import AnnulusSpec

    ann = cfg.require("annulus")
    env = build_domain(cfg, ann["envelope"], "annulus.envelope")
    hole = build_domain(cfg, ann["hole"], "annulus.hole")
    if env.n != hole.n:
        raise cfg.error("envelope and hole dimensions differ", "annulus.hole")
    try:
        return AnnulusSpec(env, hole)
    except ValueError as exc:
        raise cfg.error(str(exc), "annulus.hole") from exc


def _region(cfg: RunConfig):
    if "annulus" in cfg.data:
        return build_annulus(cfg)
    if "domain" in cfg.data:
        return build_domain(cfg, cfg.data["domain"], "domain")
    raise cfg.error("a domain or an annulus is required for this task", "domain")


def _positive(cfg: RunConfig, key: str, default):
    v = cfg.get(key, default)
    if v is None or v <= 0:
        raise cfg.error("must be positive", key)
    return v


def _degree(cfg: RunConfig, key: str, lo: int, hi: int, default=None) -> int:
    v = cfg.get(key, default)
    if v is None:
        raise cfg.error("required for this task", key)
    if not lo <= v <= hi:
        raise cfg.error(f"must lie in {lo}..{hi}", key)
    return int(v)


# ---------------------------------------------------------------------------
# tasks
# ---------------------------------------------------------------------------


class TaskResult:
    def __init__(self, passed: bool, files: list[str], summary: str):
        self.passed = passed
        self.files = files
        self.summary = summary


def task_geometry(cfg: RunConfig, out: Path, seed: int, resolution: Optional[int]) -> TaskResult:
    from .geometry import cr_frame, jet, shell_samples, to_real
    from .identities import rho_relations

    dom = build_domain(cfg, cfg.require("domain"), "domain")
    samples = int(_positive(cfg, "samples", 200))
    reps = rho_relations(dom, samples, seed)
    z = shell_samples(dom, samples, seed)
    fr = cr_frame(jet(dom, z, 2), tol=1.0)
    x = to_real(z)
    rows = []
    for i in range(len(z)):
        row = {f"x{a + 1}": f"{x[i, a]:.12e}" for a in range(x.shape[1])}
        row.update({"tau": f"{fr.tau[i]:.12e}", "eta_squared": f"{fr.eta_squared[i]:.12e}", "anchor": "CR frame scalars"})
        rows.append(row)
    files = [
        report.write_csv(out / "geometry_samples.csv", rows).name,
        report.write_csv(out / "geometry.csv", [r.row() for r in reps], _RESIDUAL_FIELDS).name,
        report.plot_samples(z, fr.tau, out / "geometry_tau.png", "tau").name,
    ]
    passed = all(r.passed for r in reps)
    return TaskResult(passed, files, f"{sum(r.passed for r in reps)}/{len(reps)} relations pass")


def task_convexity(cfg: RunConfig, out: Path, seed: int, resolution: Optional[int]) -> TaskResult:
    from .convexity import check_domain

    dom = build_domain(cfg, cfg.require("domain"), "domain")
    q = _degree(cfg, "q", 1, dom.n)
    rep = check_domain(dom, q, samples=int(_positive(cfg, "samples", 2000)), trials=int(_positive(cfg, "trials", 500)), seed=seed)
    files = [report.write_csv(out / "convexity.csv", [rep.row()]).name]
    return TaskResult(rep.passed, files, rep.verdict)


_RESIDUAL_FIELDS = None  # set below from ResidualReport


def task_verify(cfg: RunConfig, out: Path, seed: int, resolution: Optional[int]) -> TaskResult:
    from .forms import WeightField
    from .identities import TestForm, run_identity, verify_pairing, verify_pointwise

    ann = build_annulus(cfg) if "annulus" in cfg.data else None
    dom = build_domain(cfg, cfg.data["domain"], "domain") if "domain" in cfg.data else (ann.hole if ann else None)
    if dom is None:
        raise cfg.error("a domain or an annulus is required for this task", "domain")
    n = dom.n
    names = cfg.get("identities", [x for x in IDENTITY_NAMES if x != "pairing" or ann is not None])
    for x in names:
        if x not in IDENTITY_NAMES:
            raise cfg.error(f"unknown identity {x!r}", "identities")
    if "pairing" in names and ann is None:
        raise cfg.error("the pairing needs an annulus", "identities")
    p = _degree(cfg, "p", 0, n, 0)
    q = _degree(cfg, "q", 0, n, 1)
    weight = WeightField.quadratic(float(cfg.get("weight_t", 0.0)))
    R = resolution or int(cfg.get("resolution", 24 if n == 2 else 12))
    count = int(_positive(cfg, "forms", 2))
    rng = np.random.default_rng(seed)
    support = 0.5 * dom.shell_thickness
    pointwise, integral = [], []
    if "pointwise" in names:
        pointwise = verify_pointwise(dom, weight, int(_positive(cfg, "samples", 100)), seed)
    for name in names:
        if name in ("pointwise", "pairing"):
            continue
        if name == "int_by_parts":
            forms = [TestForm.random(n, 0, 0, support, rng) for _ in range(count)]
        elif name == "gradient_identity":
            forms = [TestForm.random(n, p, q, support, rng) for _ in range(count)]
        else:
            if q < 1:
                raise cfg.error("identities with dbar* need q >= 1", "q")
            side = "inside" if name == "mkh" else "outside"
            forms = [TestForm.random(n, p, q, support, rng, bc="dbar_neumann", side=side) for _ in range(count)]
        integral.extend(run_identity(name, dom, weight, forms, R))
    if "pairing" in names:
        integral.append(verify_pairing(ann, *_default_pairing(n), resolution=max(8, R // 2)))
    rows = [r.row() for r in pointwise + integral]
    files = [report.write_csv(out / "residuals.csv", rows, _RESIDUAL_FIELDS).name]
    if integral:
        files.append(report.plot_residuals([r.row() for r in integral], out / "residuals.png").name)
    if pointwise:
        files.append(report.plot_pointwise([r.row() for r in pointwise], out / "pointwise.png").name)
    passed = all(r.passed for r in pointwise + integral)
    return TaskResult(passed, files, f"{sum(r.passed for r in pointwise + integral)}/{len(rows)} reports pass")


def _default_pairing(n: int):
    from .forms import Form
    from .identities import martinelli_form

    top = (tuple(range(n)), ())
    return martinelli_form(n), Form.from_fields(n, n, 0, {top: lambda zs, zbs: 1.0 + 0.0 * zs[0]}, "dz")


def task_constants(cfg: RunConfig, out: Path, seed: int, resolution: Optional[int]) -> TaskResult:
    from .constants import compute_constants

    ann = build_annulus(cfg)
    margins = cfg.get("margins", [0.25 * ann.hole.shell_thickness, 0.75 * ann.hole.shell_thickness])
    if len(margins) != 2:
        raise cfg.error("expected [inner, outer]", "margins")
    try:
        b = compute_constants(ann, float(margins[0]), float(margins[1]), samples=int(cfg.get("samples", 4000)), seed=seed, K=cfg.get("K"), E=cfg.get("E"), C_w1=cfg.get("C_w1"))
    except DbarLabError as exc:
        if type(exc).__name__ == "MarginOrder":
            raise cfg.error(str(exc), "margins") from exc
        raise
    rows = b.rows()
    ok = all(float(r["value"]) > 0 for r in rows if r["quantity"] not in ("B", "B_raw")) and b.B >= 0
    for q, t in b.t_opt.items():
        ok &= t > (4 * b.A**2 + b.B) / (q - 1)
    files = [report.write_csv(out / "constants.csv", rows, ["quantity", "q", "value", "anchor"]).name]
    qs = sorted(b.log_C_mix)
    if qs:
        files.append(report.plot_series(qs, {"log C_mix": [b.log_C_mix[q] for q in qs]}, out / "constants.png", "q", "log C_mix", logy=False).name)
    return TaskResult(bool(ok), files, f"A={b.A:.4g} B={b.B:.4g} delta={b.delta:.4g}")


def _solve_data(op, grid, n: int, p: int, q: int):
    """Discretely closed data: an exact form, or a smooth top-degree form."""
    from .forms import Form
    from .solver import form_space, sample_form, transfer

    if q == n:
        top = (tuple(range(p)), tuple(range(n)))
        f = Form.from_fields(n, p, n, {top: lambda zs, zbs: 1.0 + zs[0] * zbs[-1] + 0.3j * zbs[0]}, "f")
        space = form_space(grid.masks["domain"], n, p, n)
        return transfer(sample_form(space, grid, f), space, op.range_space)
    K = tuple(range(q - 1))
    pot = Form.from_fields(n, p, q - 1, {(tuple(range(p)), K): lambda zs, zbs: (zbs[0] + zs[-1]) * (zs[0] * zbs[0] * (-3.0)).exp()}, "potential")
    return op.matrix @ sample_form(op.domain_space, grid, pot)


def task_solve(cfg: RunConfig, out: Path, seed: int, resolution: Optional[int]) -> TaskResult:
    from .constants import build_cutoff, constant_hormander, constant_mixed
    from .geometry import AnnulusSpec
    from .solver import assemble_dbar, estimate_best_constant, solve_min_norm

    region = _region(cfg)
    n = region.n
    p = _degree(cfg, "p", 0, n, 0)
    q = _degree(cfg, "q", 1, n)
    is_ann = isinstance(region, AnnulusSpec)
    bc = cfg.get("bc", "mixed" if is_ann else "max")
    if bc not in ("max", "mixed", "c"):
        raise cfg.error("bc must be max, mixed or c", "bc")
    if bc == "mixed" and not is_ann:
        raise cfg.error("the mixed condition needs an annulus", "bc")
    R = resolution or int(cfg.get("resolution", 12))
    op = assemble_dbar(region, n, p, q, R, bc)
    f = _solve_data(op, op.grid, n, p, q)
    log_bound = None
    if bc == "mixed" and q >= 2:
        shell = region.hole.shell_thickness
        margins = cfg.get("margins", [0.25 * shell, 0.75 * shell])
        chi = build_cutoff(region, float(margins[0]), float(margins[1]))
        from .constants import estimate_B

        _, log_bound = constant_mixed(chi.A, estimate_B(region, width=float(margins[1])).inflated, region.diameter, q, log=True)
    elif bc == "max" and not is_ann:
        log_bound = math.log(constant_hormander(region, q))
    rep = solve_min_norm(op, f)
    ok = True if log_bound is None else math.log(max(rep.ratio, 1e-300)) <= math.log(1.2) + log_bound
    row = {
        "n": n,
        "p": p,
        "q": q,
        "bc": bc,
        "resolution": R,
        "unknowns": op.matrix.shape[1],
        "ratio": f"{rep.ratio:.10e}",
        "log_bound": "" if log_bound is None else f"{log_bound:.10e}",
        "residual": f"{rep.residual:.3e}",
        "iterations": rep.iterations,
        "pass": int(ok),
        "anchor": "minimal-norm solution against the closed-range constant",
    }
    files = []
    if cfg.get("estimate_constant", False):
        est = estimate_best_constant(op)
        row["best_constant"] = f"{est.value:.10e}"
        row["kernel_dimension"] = est.kernel_dimension
    files.append(report.write_csv(out / "solve.csv", [row]).name)
    return TaskResult(bool(ok), files, f"ratio {rep.ratio:.4g}")


def task_cohomology(cfg: RunConfig, out: Path, seed: int, resolution: Optional[int]) -> TaskResult:
    from .solver import cohomology_rank

    region = _region(cfg)
    n = region.n
    p = _degree(cfg, "p", 0, n, 0)
    q = _degree(cfg, "q", 0, n)
    res = [resolution] if resolution else cfg.get("resolutions", [cfg.get("resolution", 8)])
    rows = []
    last = None
    for R in res:
        if not isinstance(R, int) or R < 4:
            raise cfg.error("resolutions must be integers >= 4", "resolutions")
        rep = cohomology_rank(region, p, q, R)
        last = rep
        rows.append({"n": n, "p": p, "q": q, "resolution": R, "rank": rep.rank, "threshold": f"{rep.threshold:.6e}", "gap_ratio": f"{rep.gap_ratio:.6e}", "anchor": "dimension of the discrete harmonic space"})
    files = [report.write_csv(out / "cohomology.csv", rows).name]
    if len(rows) > 1:
        files.append(report.plot_series([r["resolution"] for r in rows], {"rank": [r["rank"] for r in rows]}, out / "cohomology.png", "resolution", "rank", logy=False).name)
    elif last is not None:
        files.append(report.plot_spectrum(last.smallest, last.threshold, out / "cohomology.png").name)
    return TaskResult(True, files, "ranks " + ", ".join(str(r["rank"]) for r in rows))


def task_pipeline(cfg: RunConfig, out: Path, seed: int, resolution: Optional[int]) -> TaskResult:
    from .forms import Form
    from .solver import w1_pipeline

    ann = build_annulus(cfg)
    n = ann.n
    p = _degree(cfg, "p", 0, n, 0)
    q = _degree(cfg, "q", 1, n)
    R = resolution or int(cfg.get("resolution", 12))
    K = tuple(range(q - 1))
    pot = Form.from_fields(n, p, q - 1, {(tuple(range(p)), K): lambda zs, zbs: zs[0] * zbs[-1] + zbs[0] * zbs[0]}, "potential")
    margins = cfg.get("margins")
    kw = {} if margins is None else {"inner_margin": float(margins[0]), "outer_margin": float(margins[1])}
    rep = w1_pipeline(ann.hole, pot, ann.envelope, R, p, q, **kw)
    rows = [
        {"stage": s.name, "ratio": f"{s.ratio:.10e}", "bound": "" if s.bound is None else f"{s.bound:.10e}", "satisfied": "" if s.satisfied is None else int(s.satisfied), "residual": f"{s.residual:.3e}", "anchor": PIPELINE_ANCHORS[s.name]}
        for s in rep.stages
    ]
    rows.append({"stage": "w1", "ratio": f"{rep.w1_ratio:.10e}", "bound": "", "satisfied": "", "residual": f"{rep.residual:.3e}", "anchor": PIPELINE_ANCHORS["w1"]})
    files = [report.write_csv(out / "pipeline.csv", rows).name]
    ok = rep.satisfied and rep.residual <= 1e-6
    return TaskResult(bool(ok), files, f"W1 ratio {rep.w1_ratio:.4g}")


PIPELINE_ANCHORS = {
    "extension": "cutoff extension across the hole",
    "mixed": "mixed problem on the annulus",
    "canonical": "canonical solution on the envelope",
    "restriction": "restriction to the hole",
    "w1": "W1 estimate on the hole",
}


TASK_FUNCS = {
    "geometry": task_geometry,
    "check-convexity": task_convexity,
    "verify": task_verify,
    "constants": task_constants,
    "solve": task_solve,
    "cohomology": task_cohomology,
    "pipeline": task_pipeline,
}


def run_config(cfg: RunConfig, out: Path, seed: int | None = None, resolution: int | None = None) -> TaskResult:
    """Run the configured task and write the bundle; raises on config or numerical errors."""
    task = cfg.require("task")
    if task not in TASK_FUNCS:
        raise cfg.error(f"unknown task {task!r}", "task")
    seed = int(cfg.get("seed", 0)) if seed is None else seed
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    result = TASK_FUNCS[task](cfg, out, seed, resolution)
    echo = dict(cfg.data)
    echo["seed"] = seed
    if resolution is not None:
        echo["resolution"] = resolution
    report.write_manifest(out, echo, seed, result.files + ["manifest.json"], "pass" if result.passed else "fail")
    return result


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dbarlab", description="Numerical checks of L2 estimates for dbar on annuli.")
    sub = parser.add_subparsers(dest="task", required=True)
    for name in TASKS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", type=Path, help="JSON run configuration")
        sp.add_argument("--seed", type=int, help="master random seed")
        sp.add_argument("--out", type=Path, help="output directory (default: report)")
        sp.add_argument("--resolution", type=int, help="override the configured resolution")
        sp.add_argument("--quiet", action="store_true", help="suppress the summary line")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.config is not None:
            try:
                cfg = RunConfig.load(args.config)
            except OSError as exc:
                raise ConfigError(f"cannot read config: {exc}") from exc
        else:
            cfg = RunConfig(dict(DEFAULTS.get(args.task, {})))
        if "task" in cfg.data and cfg.data["task"] != args.task:
            raise cfg.error(f"config task {cfg.data['task']!r} does not match the subcommand {args.task!r}", "task")
        cfg.data["task"] = args.task
        for k, v in DEFAULTS.get(args.task, {}).items():
            if k not in cfg.data and (k not in ("domain", "annulus") or ("domain" not in cfg.data and "annulus" not in cfg.data)):
                cfg.data[k] = v
        if args.resolution is not None and args.resolution < 4:
            raise ConfigError("resolution must be at least 4", field="resolution")
        out = args.out or Path(cfg.get("out", "report"))
        result = run_config(cfg, out, args.seed, args.resolution)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalFailure, DbarLabError) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    if not args.quiet:
        print(f"{args.task}: {'PASS' if result.passed else 'FAIL'} ({result.summary}) -> {out}")
    return EXIT_PASS if result.passed else EXIT_FAIL


_BALL2 = {"kind": "ball", "n": 2, "radius": 1.0}
_ANNULUS2 = {"envelope": {"kind": "ball", "n": 2, "radius": 1.0}, "hole": {"kind": "ball", "n": 2, "radius": 0.4, "shell_thickness": 0.16}}
DEFAULTS = {
    "geometry": {"domain": _BALL2, "samples": 200},
    "check-convexity": {"domain": _BALL2, "q": 1},
    "verify": {"domain": _BALL2, "q": 1, "weight_t": 0.3, "resolution": 24, "forms": 2},
    "constants": {"annulus": _ANNULUS2},
    "solve": {"domain": _BALL2, "q": 1, "resolution": 12},
    "cohomology": {"annulus": _ANNULUS2, "q": 1, "resolutions": [8, 9, 10]},
    "pipeline": {"annulus": _ANNULUS2, "q": 1, "resolution": 12},
}


def _init_fields() -> None:
    global _RESIDUAL_FIELDS
    from .identities import ResidualReport

    _RESIDUAL_FIELDS = list(ResidualReport.CSV_FIELDS)


_init_fields()


if __name__ == "__main__":
    sys.exit(main())
