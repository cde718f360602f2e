"""Command-line experiment runner.

    concavity-lab <command> --config <path> [--h H] [--seed S] [--n-walks N] [--out DIR]

Exit status: 0 success, 1 invalid input, 2 solver or estimator failure,
3 a theorem-level check did not hold.
"""

import argparse
from dataclasses import dataclass, field
import json
import logging
import os
import sys

import numpy as np

from . import analysis, contours, nonlinearity, rearrange, serialize, stochastic
from .errors import ConcavityLabError, TheoremCheckFailure, ValidationError
from .fdsolver import build_grid, solve_semilinear
from .geometry import DomainSpec, make_domain
from .radial import exit_time_bound

log = logging.getLogger("concavity_lab")

COMMANDS = ("solve", "analyze", "verify-representation", "exit-time", "rearrange", "sweep-aspect", "check-conditions")

_REQUIRED = {
    "solve": ("domain", "f", "h"),
    "analyze": ("domain", "f", "h"),
    "verify-representation": ("domain", "f", "h", "probes"),
    "exit-time": ("domain",),
    "rearrange": ("domain", "f", "h"),
    "sweep-aspect": ("h", "aspects"),
    "check-conditions": ("domain", "f"),
}
_KEYS = {"command", "domain", "f", "h", "walk", "probes", "output_dir", "emit_svg", "aspects", "m", "levels"}


@dataclass
class ExperimentConfig:
    command: str
    domain: DomainSpec | None = None
    f: nonlinearity.Nonlinearity | None = None
    h: float | None = None
    walk: stochastic.WalkConfig = field(default_factory=stochastic.WalkConfig)
    probes: list = field(default_factory=list)
    output_dir: str = "."
    emit_svg: bool = False
    aspects: list = field(default_factory=list)
    m: int = 256
    levels: int = 5

    @classmethod
    def from_dict(cls, d, command):
        if not isinstance(d, dict):
            raise ValidationError("cli", "config", "config must be a JSON object")
        unknown = set(d) - _KEYS
        if unknown:
            raise ValidationError("cli", "config", f"unknown config keys {sorted(unknown)}")
        if command not in COMMANDS:
            raise ValidationError("cli", "config", f"unknown command {command!r}; expected one of {COMMANDS}")
        if "command" in d and d["command"] != command:
            raise ValidationError("cli", "config", f"config is for command {d['command']!r}, not {command!r}")
        for key in _REQUIRED[command]:
            if key not in d:
                raise ValidationError("cli", "config", f"command {command!r} requires field {key!r}")
        cfg = cls(command)
        if "domain" in d:
            cfg.domain = DomainSpec.from_dict(d["domain"])
        if "f" in d:
            cfg.f = nonlinearity.Nonlinearity.from_dict(d["f"])
        if "h" in d:
            cfg.h = float(d["h"])
        if "walk" in d:
            cfg.walk = stochastic.WalkConfig.from_dict(d["walk"])
        if "probes" in d:
            cfg.probes = _parse_probes(d["probes"], command)
        cfg.output_dir = str(d.get("output_dir", "."))
        cfg.emit_svg = bool(d.get("emit_svg", False))
        if "aspects" in d:
            if not isinstance(d["aspects"], list) or not d["aspects"]:
                raise ValidationError("cli", "config", "aspects must be a non-empty list")
            cfg.aspects = [float(a) for a in d["aspects"]]
        cfg.m = int(d.get("m", 256))
        cfg.levels = int(d.get("levels", 5))
        return cfg


def _parse_probes(raw, command):
    if not isinstance(raw, list) or not raw:
        raise ValidationError("cli", "config", "probes must be a non-empty list")
    out = []
    for p in raw:
        if isinstance(p, dict):
            if "x" not in p:
                raise ValidationError("cli", "config", "each probe object requires field 'x'")
            x = [float(v) for v in p["x"]]
            n = [float(v) for v in p["direction"]] if "direction" in p else None
        else:
            x, n = [float(v) for v in p], None
        if command == "verify-representation" and n is None:
            raise ValidationError("cli", "config", "verify-representation probes require field 'direction'")
        out.append((x, n))
    return out


def load_config(path, command, overrides=None):
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ValidationError("cli", "config", f"cannot read {path}: {exc.strerror}")
    except json.JSONDecodeError as exc:
        raise ValidationError("cli", "config", f"{path} is not valid JSON: {exc}")
    if not isinstance(raw, dict):
        raise ValidationError("cli", "config", "config must be a JSON object")
    overrides = overrides or {}
    if overrides.get("h") is not None:
        raw["h"] = overrides["h"]
    walk = dict(raw.get("walk", {}))
    if overrides.get("seed") is not None:
        walk["seed"] = overrides["seed"]
    if overrides.get("n_walks") is not None:
        walk["n_walks"] = overrides["n_walks"]
    if walk:
        raw["walk"] = walk
    if overrides.get("out") is not None:
        raw["output_dir"] = overrides["out"]
    try:
        return ExperimentConfig.from_dict(raw, command)
    except ConcavityLabError:
        raise
    except (TypeError, ValueError, AttributeError) as exc:
        raise ValidationError("cli", "config", f"malformed config: {exc}")


# -- commands ----------------------------------------------------------------


def _solve(cfg):
    dom = make_domain(cfg.domain)
    grid = build_grid(dom, cfg.h)
    return dom, grid, solve_semilinear(grid, cfg.f)


def cmd_solve(cfg, out):
    dom, grid, rep = _solve(cfg)
    csv_path = os.path.join(out, "solution.csv")
    serialize.write_field_csv(csv_path, rep.field)
    serialize.write_json(os.path.join(out, "solve_report.json"), rep.summary())
    if cfg.emit_svg:
        contours.render_contours(csv_path, os.path.join(out, "solution.svg"), cfg.levels)
    return []


def cmd_analyze(cfg, out):
    dom, grid, rep = _solve(cfg)
    hess = analysis.hessian_field(grid, rep.field)
    bh = analysis.boundary_hessian(dom, grid, rep.field, cfg.m)
    report = analysis.concavity_report(dom, grid, rep.field, cfg.f, hess=hess, bhess=bh)
    payload = report.to_dict()
    payload["condition"] = nonlinearity.check_condition(cfg.f, dom.stats(), 2, "T1").to_dict()
    serialize.write_json(os.path.join(out, "concavity_report.json"), payload)
    ev = hess.evaluable
    pts = grid.points[ev]
    serialize.write_table_csv(os.path.join(out, "lambda_max.csv"), ["x", "y", "lambda_max"],
                              zip(pts[:, 0], pts[:, 1], hess.lam_max[ev]))
    serialize.write_table_csv(os.path.join(out, "boundary_hessian.csv"),
                              ["arclength", "lambda_max", "lambda_min", "d2u_dnu2"], bh.rows())
    if cfg.emit_svg:
        serialize.write_field_csv(os.path.join(out, "solution.csv"), rep.field)
        contours.render_contours(os.path.join(out, "solution.csv"), os.path.join(out, "solution.svg"), cfg.levels)
        if np.max(hess.lam_max[ev]) > 0:
            contours.render_contours(os.path.join(out, "lambda_max.csv"), os.path.join(out, "lambda_max.svg"),
                                     cfg.levels)
    failures = []
    if payload["condition"]["passes"] and report.boundary_nsd and not report.interior_nsd:
        failures.append("boundary Hessian is NSD but the interior is not, although the T1 condition holds")
    return failures


def cmd_verify(cfg, out):
    dom, grid, rep = _solve(cfg)
    hess = analysis.hessian_field(grid, rep.field)
    bh = analysis.boundary_hessian(dom, grid, rep.field, max(cfg.m, 1024), degree=3, trace=-cfg.f(0.0))
    failures = []
    for i, (x, n) in enumerate(cfg.probes):
        chk = stochastic.verify_representation(dom, cfg.f, rep, hess, x, n, cfg.walk, bh)
        serialize.write_json(os.path.join(out, f"representation_{i}.json"), chk)
        if abs(chk.z_score) > 3:
            failures.append(f"probe {i}: |z| = {abs(chk.z_score):.2f} > 3")
    return failures


def cmd_exit_time(cfg, out):
    dom = make_domain(cfg.domain)
    bound = exit_time_bound(dom.stats(), 2)
    probes = cfg.probes or [(list(dom.center), None)]
    rows, failures = [], []
    for i, (x, _) in enumerate(probes):
        est = stochastic.estimate_exit_time(dom, x, cfg.walk)
        ok = est.mean <= bound + 3 * est.std_error
        rows.append({"x": x, "estimate": est, "bound": bound, "within_bound": ok})
        if not ok:
            failures.append(f"probe {i}: exit time {est.mean:.6g} exceeds bound {bound:.6g} + 3 sigma")
    serialize.write_json(os.path.join(out, "exit_time.json"), {"bound": bound, "probes": rows})
    return failures


def cmd_rearrange(cfg, out):
    dom, grid, rep = _solve(cfg)
    t2, prof, psi = rearrange.theorem2_experiment(dom, cfg.f, cfg.h, report=rep)
    tal = rearrange.talenti_compare(dom, cfg.f, cfg.h, report=rep)
    rearrange.write_profiles_csv(os.path.join(out, "profiles.csv"), prof, psi, tal.v, tal.r)
    serialize.write_json(os.path.join(out, "experiment.json"), {"theorem2": t2, "talenti": tal})
    failures = []
    if tal.min_gap < -5 * cfg.h**2:
        failures.append(f"Talenti gap {tal.min_gap:.3e} below -5h^2")
    if t2.condition.passes and t2.certified and not t2.passes:
        failures.append(f"max u = {t2.max_u:.6g} exceeds max psi = {t2.max_psi:.6g} + tol")
    return failures


def cmd_sweep(cfg, out):
    f = cfg.f or nonlinearity.constant(1.0)
    rows, fit = analysis.eccentricity_sweep(cfg.aspects, cfg.h, f)
    serialize.write_table_csv(os.path.join(out, "sweep.csv"), ["aspect", "lambda_max", "log_abs_lambda_max"], rows)
    serialize.write_json(os.path.join(out, "slope.json"), fit)
    failures = [f"lambda_max = {lam:.3e} >= 0 at aspect {a:g}" for a, lam, _ in rows if lam >= 0]
    if len(rows) >= 3 and not (fit["slope"] < 0 and fit["r_squared"] >= 0.95):
        failures.append(f"log-linear decay not observed (slope {fit['slope']:.3g}, R^2 {fit['r_squared']:.3f})")
    return failures


def cmd_check(cfg, out):
    dom = make_domain(cfg.domain)
    st = dom.stats()
    payload = {"domain": cfg.domain, "f": cfg.f, "stats": st,
               "T1": nonlinearity.check_condition(cfg.f, st, 2, "T1"),
               "T2": nonlinearity.check_condition(cfg.f, st, 2, "T2")}
    serialize.write_json(os.path.join(out, "conditions.json"), payload)
    return []


_DISPATCH = {
    "solve": cmd_solve,
    "analyze": cmd_analyze,
    "verify-representation": cmd_verify,
    "exit-time": cmd_exit_time,
    "rearrange": cmd_rearrange,
    "sweep-aspect": cmd_sweep,
    "check-conditions": cmd_check,
}


def run(cfg):
    """Run one experiment; raises TheoremCheckFailure when a check does not hold."""
    out = cfg.output_dir
    os.makedirs(out, exist_ok=True)
    failures = _DISPATCH[cfg.command](cfg, out)
    if failures:
        raise TheoremCheckFailure("cli", cfg.command, "; ".join(failures))
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="concavity-lab", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="JSON experiment config")
    p.add_argument("--h", type=float, help="override the mesh spacing")
    p.add_argument("--seed", type=int, help="override the walk seed")
    p.add_argument("--n-walks", type=int, dest="n_walks", help="override the number of walks")
    p.add_argument("--out", help="override the output directory")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, args.command, vars(args))
        return run(cfg)
    except ConcavityLabError as exc:
        print(f"concavity-lab: {exc}", file=sys.stderr)
        return exc.exit_status


if __name__ == "__main__":
    sys.exit(main())
