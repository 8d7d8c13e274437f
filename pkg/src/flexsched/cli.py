"""``flexsched solve|sweep|verify``."""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .errors import FlexSchedError
from .generators import SyntheticConfig, generate_adversarial, generate_synthetic
from .harness import ALGORITHMS, SweepSpec, run_algorithms, sweep, sweep_csv, verify
from .io import load_instance
from .model import ShapeKind
from .relax import SolverConfig
from .rounding import RoundingMode

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_BUDGET, EXIT_NOT_CONVERGED = 0, 1, 2, 3, 4


class ConfigError(Exception):
    pass


def _seed(args) -> int:
    env = os.environ.get("FLEXSCHED_SEED")
    if env not in (None, ""):
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"FLEXSCHED_SEED must be an integer, got {env!r}")
    return args.seed


def _algos(text: str) -> list:
    names = [a.strip() for a in text.split(",") if a.strip()]
    bad = [a for a in names if a not in ALGORITHMS]
    if bad or not names:
        raise ConfigError(f"unknown algorithms {bad}; choose from {', '.join(ALGORITHMS)}")
    return names


def _instance(args, seed: int):
    kind = "adversarial" if args.adversarial else args.generate
    if args.instance and kind:
        raise ConfigError("give either --instance or --generate, not both")
    if args.instance:
        path = Path(args.instance)
        if not path.is_file():
            raise ConfigError(f"instance file not found: {path}")
        return load_instance(path)
    if kind == "synthetic":
        cfg = SyntheticConfig(J=args.J, T=args.T, shape=ShapeKind(args.shape), cost=args.cost)
        return generate_synthetic(cfg, seed)
    if kind == "adversarial":
        return generate_adversarial(args.N, args.T)
    if kind == "shortfall":
        from .stochastic import shortfall_instance

        return shortfall_instance(J=args.J, T=args.T, seed=seed)
    raise ConfigError("need --instance PATH or --generate {synthetic,adversarial,shortfall}")


def _write(out: Path, name: str, text: str) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / name).write_text(text)


def cmd_solve(args) -> int:
    seed = _seed(args)
    inst = _instance(args, seed)
    report = run_algorithms(inst, _algos(args.algos), seed=seed,
                            solver_config=SolverConfig(gap_tolerance=args.gap_tol),
                            round_mode=RoundingMode(args.round_mode),
                            oracle_budget=args.oracle_budget, audit_pricing=args.audit_pricing,
                            saa_samples=args.saa_samples)
    out = Path(args.out)
    body = report.to_dict(timing=not args.no_timing)
    _write(out, "report.json", json.dumps(body, indent=1, sort_keys=True) + "\n")
    _write(out, "loads.csv", report.loads_csv())
    for name, r in body["algorithms"].items():
        cost = r.get("cost")
        extra = f" subopt={r['suboptimality_pct']:.4g}%" if r.get("suboptimality_pct") is not None else ""
        print(f"{name:14s} {r['status']:16s} cost={'' if cost is None else format(cost, '.12g')}{extra}")
    statuses = report.statuses()
    if "budget_exceeded" in statuses:
        return EXIT_BUDGET
    if "not_converged" in statuses:
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def cmd_sweep(args) -> int:
    seed = _seed(args)
    try:
        J_values = tuple(int(x) for x in args.J_list.split(","))
    except ValueError:
        raise ConfigError(f"bad --J-list {args.J_list!r}")
    shapes = tuple(ShapeKind(s) for s in args.shapes.split(","))
    spec = SweepSpec(J_values=J_values, instances=args.instances, T=args.T, shapes=shapes,
                     algos=tuple(_algos(args.algos)), seed=seed, gap_tolerance=args.gap_tol,
                     round_mode=RoundingMode(args.round_mode), oracle_budget=args.oracle_budget,
                     timing=not args.no_timing)
    rows = sweep(spec, workers=args.workers)
    _write(Path(args.out), "sweep.csv", sweep_csv(rows))
    for r in rows:
        if r["kind"] == "summary":
            print(f"J={r['J']:<6d} {r['shape']:12s} {r['algo']:14s} "
                  f"mean={r['mean']:.4g}% std={r['std']:.4g}% n={r['n']}")
    failed = sum(1 for r in rows if r["kind"] == "instance" and r["status"] != "ok")
    if failed:
        print(f"{failed} rows failed", file=sys.stderr)
    return EXIT_OK


def cmd_verify(args) -> int:
    checks = verify(seed=_seed(args), quick=args.quick)
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.detail}")
    failed = [c.name for c in checks if not c.passed]
    if failed:
        print(f"failing properties: {', '.join(failed)}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="flexsched", description="Schedule flexible non-preemptive loads.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--seed", type=int, default=0, help="root seed (FLEXSCHED_SEED overrides)")
        sp.add_argument("--out", default="out", help="output directory")
        sp.add_argument("--gap-tol", type=float, default=1e-7, help="relative solver gap tolerance")
        sp.add_argument("--round-mode", choices=[m.value for m in RoundingMode],
                        default=RoundingMode.RANDOMIZED.value)
        sp.add_argument("--oracle-budget", type=int, default=10**7)
        sp.add_argument("--no-timing", action="store_true", help="omit wall times from outputs")

    s = sub.add_parser("solve", help="run algorithms on one instance")
    common(s)
    s.add_argument("--instance", help="instance JSON path")
    s.add_argument("--generate", choices=["synthetic", "adversarial", "shortfall"])
    s.add_argument("--adversarial", action="store_true", help="same as --generate adversarial")
    s.add_argument("--J", type=int, default=100)
    s.add_argument("--T", type=int, default=24)
    s.add_argument("--N", type=int, default=3)
    s.add_argument("--shape", choices=[k.value for k in ShapeKind], default="rectangular")
    s.add_argument("--cost", choices=["quadratic_tracking", "quadratic_pure", "linear"],
                   default="quadratic_tracking")
    s.add_argument("--algos", default="rar,greedy")
    s.add_argument("--audit-pricing", action="store_true")
    s.add_argument("--saa-samples", type=int, default=500)
    s.set_defaults(func=cmd_solve)

    w = sub.add_parser("sweep", help="solve many generated instances")
    common(w)
    w.add_argument("--J-list", "--J", dest="J_list", default="20,50,100")
    w.add_argument("--instances", type=int, default=50)
    w.add_argument("--T", type=int, default=24)
    w.add_argument("--shapes", default="rectangular,realistic")
    w.add_argument("--algos", default="rar,greedy")
    w.add_argument("--workers", type=int, default=1)
    w.set_defaults(func=cmd_sweep)

    v = sub.add_parser("verify", help="check the guarantees on seeded batteries")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--quick", action="store_true", help="smaller batteries")
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FlexSchedError, ValueError, OSError) as exc:
        print(f"flexsched: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
