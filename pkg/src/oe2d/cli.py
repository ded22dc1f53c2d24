"""Command line: `oe2d run`, `oe2d verify`, `oe2d complexity`.

Exit codes: 0 success, 2 configuration or domain error, 3 certification or
verification failure, 4 resource budget exceeded.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from . import complexity as cx
from .artifacts import write_run
from .config import ExperimentConfig, run_seed_job
from .core import Dirac, FunctionClassSlice, Smooth
from .design import SolverConfig, certify, exploitative_f_design
from .engine import run_batch
from .environments import make_rng
from .errors import CertificationFailure, ConfigurationError, OE2DError, ResourceError

DEFAULT_OUT = "runs"


def output_root(arg: str | None) -> Path:
    return Path(arg or os.environ.get("OE2D_OUT") or DEFAULT_OUT)


def run_dir(cfg: ExperimentConfig, root: Path) -> Path:
    return root / f"{cfg.name}-{cfg.config_hash()}"


def execute_run(cfg: ExperimentConfig, root, workers: int = 1, emit_plot_script: bool = False) -> Path:
    """Run every seed of cfg and write the artifact directory; returns its path."""
    root = Path(root)
    raw = cfg.to_dict()
    jobs = [(run_seed_job, {"cfg_dict": raw, "seed": s}) for s in cfg.seeds]
    try:
        ledgers = run_batch(jobs, workers)
    except CertificationFailure as e:
        dump_failure(cfg, root, e)
        raise
    manifest = {
        "name": cfg.name,
        "config_hash": cfg.config_hash(),
        "config": json.loads(cfg.canonical()),
        "version": __version__,
        "algorithm": cfg.algorithm.name,
        "T": cfg.T,
        "seeds": list(cfg.seeds),
    }
    return write_run(run_dir(cfg, root), cfg.seeds, ledgers, manifest, emit_plot_script)


def dump_failure(cfg: ExperimentConfig, root: Path, e: CertificationFailure) -> Path:
    root.mkdir(parents=True, exist_ok=True)
    path = root / f"{cfg.name}-{cfg.config_hash()}-failure.json"
    info = {
        "config": json.loads(cfg.canonical()),
        "message": str(e),
        "iterations": e.iterations,
        "sec_bound": e.sec_bound,
        "last_iterate": None if e.last_iterate is None else np.asarray(e.last_iterate).tolist(),
        "violating": None if e.violating is None else np.asarray(e.violating).tolist(),
    }
    path.write_text(json.dumps(info, indent=2, sort_keys=True) + "\n")
    return path


# ----------------------------------------------------------------------------
# complexity instances
# ----------------------------------------------------------------------------

COMPLEXITY_HEADER = "instance,n_actions,n_functions,sec_lower,sec_upper,edim,doec_grid,doec_face,certificate,certified_bound,p_beta,dec_grid"


def parse_instance(spec: str):
    """Returns (G, benchmark, face or None, cheating code or None).

    Forms: cheating:K, single, random:SEED:K:N, smooth:SEED:K:N:H, or a YAML
    file with `values` (|G| x |A|) and optional `benchmark: {kind, h}`.
    """
    parts = spec.split(":")
    try:
        if parts[0] == "cheating" and len(parts) == 2:
            cc = cx.cheating_code_instance(int(parts[1]))
            return cc.G, Dirac(), [0] + list(cc.code_actions), cc
        if parts[0] == "single" and len(parts) == 1:
            return FunctionClassSlice(np.array([[0.3, 0.7]])), Dirac(), None, None
        if parts[0] == "random" and len(parts) == 4:
            seed, K, n = (int(v) for v in parts[1:])
            return FunctionClassSlice(make_rng(seed).random((n, K))), Dirac(), None, None
        if parts[0] == "smooth" and len(parts) == 5:
            seed, K, n = (int(v) for v in parts[1:4])
            return FunctionClassSlice(make_rng(seed).random((n, K))), Smooth.uniform(float(parts[4]), K), None, None
    except ValueError as e:
        raise ConfigurationError(f"bad instance spec {spec!r}: {e}") from None
    path = Path(spec)
    if path.is_file():
        raw = yaml.safe_load(path.read_text()) or {}
        if "values" not in raw:
            raise ConfigurationError(f"{spec}: instance file needs `values`")
        G = FunctionClassSlice(np.asarray(raw["values"], dtype=float))
        b = raw.get("benchmark") or {"kind": "dirac"}
        bench = Dirac() if b.get("kind", "dirac") == "dirac" else Smooth.uniform(float(b["h"]), G.n_actions)
        return G, bench, None, None
    raise ConfigurationError(f"unrecognised instance {spec!r}")


def complexity_row(spec: str, gamma: float, eps: float, resolution: int, n_max: int, cap: int | None) -> dict:
    G, bench, face, cc = parse_instance(spec)
    grid = cx.GridSpec(resolution, cap or cx.DEFAULT_GRID_CAP)
    extra = [cc.canonical_sequence()] if cc is not None else None
    row = {"instance": spec, "n_actions": G.n_actions, "n_functions": G.n_functions}
    row["sec_lower"] = cx.sec_lower_bound_search(G, bench, eps, n_max, extra_sequences=extra)
    row["sec_upper"] = cx.sec_upper_bound(G, bench, eps)
    row["edim"] = cx.eluder_dimension(G, math.sqrt(eps)) if G.n_functions > 1 else 0
    row["doec_grid"] = cx.doec_bruteforce(0, G, bench, gamma, eps, grid, face=face)
    row["doec_face"] = "full" if face is None else "greedy+code"
    S = cx.analytic_sec_bound(G, bench, eps)
    cert = exploitative_f_design(0, G, bench, SolverConfig(gamma, eps, S))
    row["certificate"] = certify(cert.p_star, 0, G, bench, gamma, eps)
    row["certified_bound"] = cert.certified_value
    row["p_beta"] = certify(cc.p_beta(cc.beta_star(gamma)), 0, G, bench, gamma, eps) if cc is not None else ""
    row["dec_grid"] = cx.dec_bruteforce(0, G, bench, gamma, grid, face=face)
    return row


def _cell(v) -> str:
    if isinstance(v, float):
        return "%.6g" % v
    return str(v)


# ----------------------------------------------------------------------------
# commands
# ----------------------------------------------------------------------------


def cmd_run(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    if args.seeds:
        cfg.seeds = parse_seeds(args.seeds)
        cfg.validate()
    path = execute_run(cfg, output_root(args.out), workers=args.workers, emit_plot_script=args.emit_plot_script)
    print(path)
    return 0


def cmd_verify(args) -> int:
    from .verify import SUITES, run_suite

    if args.suite not in SUITES:
        print(f"unknown suite {args.suite!r}; choose from {', '.join(sorted(SUITES))}", file=sys.stderr)
        return 2
    results = run_suite(args.suite)
    for r in results:
        print(r.line())
    if args.json:
        Path(args.json).write_text(json.dumps([r.to_dict() for r in results], indent=2) + "\n")
    return 0 if all(r.passed for r in results) else 3


def cmd_complexity(args) -> int:
    row = complexity_row(args.instance, args.gamma, args.eps, args.resolution, args.n_max, args.budget)
    print(COMPLEXITY_HEADER)
    print(",".join(_cell(row[k]) for k in COMPLEXITY_HEADER.split(",")))
    return 0


def parse_seeds(text: str) -> list[int]:
    """"0,1,5" or "0-9" (inclusive) or a mix."""
    seeds: list[int] = []
    try:
        for chunk in text.split(","):
            if "-" in chunk.strip()[1:]:
                lo, hi = chunk.split("-", 1)
                seeds.extend(range(int(lo), int(hi) + 1))
            elif chunk.strip():
                seeds.append(int(chunk))
    except ValueError:
        raise ConfigurationError(f"bad seed list {text!r}") from None
    if not seeds:
        raise ConfigurationError("empty seed list")
    return seeds


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="oe2d", description="Contextual bandits with benchmark-policy designs.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an experiment config and write artifacts")
    r.add_argument("config")
    r.add_argument("--seeds", help="override the config seeds, e.g. 0-9 or 1,4,7")
    r.add_argument("--out", help="output root (default $OE2D_OUT or ./runs)")
    r.add_argument("--workers", type=int, default=1)
    r.add_argument("--emit-plot-script", action="store_true")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("verify", help="run a verification suite")
    v.add_argument("suite", help="certificates | complexity | robustness | regret | oracles | reproducibility | all")
    v.add_argument("--json", help="also write the report as JSON here")
    v.set_defaults(func=cmd_verify)

    c = sub.add_parser("complexity", help="complexity table row for an instance")
    c.add_argument("instance", help="cheating:K | single | random:SEED:K:N | smooth:SEED:K:N:H | instance.yaml")
    c.add_argument("--gamma", type=float, default=100.0)
    c.add_argument("--eps", type=float, default=0.01)
    c.add_argument("--resolution", type=int, default=20)
    c.add_argument("--n-max", type=int, default=3)
    c.add_argument("--budget", type=int, help="grid-point budget for brute-force minimisation")
    c.set_defaults(func=cmd_complexity)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.func(args)
    except ResourceError as e:
        print(f"resource budget exceeded: {e}", file=sys.stderr)
        return 4
    except CertificationFailure as e:
        print(f"certification failed: {e}", file=sys.stderr)
        return 3
    except OE2DError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except (ValueError, TypeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
