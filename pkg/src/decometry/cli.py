"""Command-line front end.

    decometry coherence STATE --p 0.1 0.5 [--basis-file U.json] [--csv out.csv]
    decometry discord STATE --p 0.5 [--dims 2 2] [--starts 16] [--emit-basis b.json]
    decometry verify --suite all --samples 10 [--seed 0]

Exit codes: 0 success, 1 property failure, 2 invalid input, 3 numerical failure.
Errors go to stderr as a single ``decometry: error[<kind>]: <message>`` line.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from pathlib import Path

from decometry.channels import DephasingChannel
from decometry.coherence import qfi_dephasing
from decometry.discord import OptimizerConfig, discord
from decometry.errors import ConvergenceError, DivergenceError, ValidationError
from decometry.qstate import BipartiteState, _matrix_to_json, load_state, load_unitary
from decometry.verify import SUITES, run_suite

EXIT_OK, EXIT_PROPERTY, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 1, 2, 3


def _default_seed() -> int:
    raw = os.environ.get("DECOMETRY_SEED", "0")
    try:
        return int(raw)
    except ValueError:
        raise ValidationError(f"DECOMETRY_SEED must be an integer, got {raw!r}") from None


def _p_values(raw: list[str]) -> list[float]:
    out = []
    for chunk in raw:
        for tok in chunk.split(","):
            if tok.strip():
                try:
                    out.append(float(tok))
                except ValueError:
                    raise ValidationError(f"not a number: {tok!r}") from None
    if not out:
        raise ValidationError("at least one p value is required")
    for p in out:
        if not 0 <= p <= 1:
            raise ValidationError(f"p={p} lies outside [0, 1]")
    return out


def _fmt(x: float) -> str:
    return "inf" if math.isinf(x) else f"{x:.10f}"


class _Output:
    def __init__(self, path):
        self.path = path

    def __enter__(self):
        self.fh = open(self.path, "w", newline="") if self.path else sys.stdout
        return csv.writer(self.fh, lineterminator="\n")

    def __exit__(self, *exc):
        if self.path:
            self.fh.close()


def cmd_coherence(args) -> int:
    state = load_state(args.state)
    rho = state.state if isinstance(state, BipartiteState) else state
    basis = load_unitary(args.basis_file) if args.basis_file else None
    rows = []
    for p in _p_values(args.p):
        res = qfi_dephasing(rho, DephasingChannel(p, basis))
        rows.append([repr(p), _fmt(res.value), int(res.divergent), res.dropped_terms])
    with _Output(args.csv) as w:
        w.writerow(["p", "value", "divergent", "dropped_terms"])
        w.writerows(rows)
    return EXIT_OK


def cmd_discord(args) -> int:
    state = load_state(args.state)
    if args.dims:
        rho = state.state if isinstance(state, BipartiteState) else state
        state = BipartiteState(rho, tuple(args.dims))
    elif not isinstance(state, BipartiteState):
        raise ValidationError("state file has no 'dims'; pass --dims dA dB")
    seed = args.seed if args.seed is not None else _default_seed()
    cfg = OptimizerConfig(num_starts=args.starts, max_iters=args.max_iters, seed=seed)
    ps = _p_values(args.p)
    for p in ps:
        if p == 0:
            raise ValidationError("p=0 unsupported: discord needs p in (0, 1]")
    rows, bases, failed = [], [], False
    for p in ps:
        res = discord(state, p, cfg)
        failed |= not res.converged
        rows.append([repr(p), _fmt(res.value), int(res.converged), res.starts, res.best_start])
        bases.append({"p": p, "basis": _matrix_to_json(res.argmin_basis)})
    with _Output(args.csv) as w:
        w.writerow(["p", "value", "converged", "starts", "best_start"])
        w.writerows(rows)
    if args.emit_basis:
        Path(args.emit_basis).write_text(json.dumps(bases))
    if failed:
        raise ConvergenceError("optimizer did not converge for at least one p")
    return EXIT_OK


def cmd_verify(args) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    names = list(SUITES) if args.suite == "all" else [args.suite]
    failures = 0
    for name in names:
        t0 = time.perf_counter()
        reports = run_suite(name, args.samples, seed)
        print(f"[{name}] {time.perf_counter() - t0:.1f}s")
        for rep in reports:
            print("  " + rep.line())
            failures += not rep.passed
    if failures:
        print(f"decometry: error[property]: {failures} properties failed", file=sys.stderr)
        return EXIT_PROPERTY
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="decometry", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    c = sub.add_parser("coherence", help="coherence of a state over a list of p values")
    c.add_argument("state", help="state JSON file")
    c.add_argument("--p", nargs="+", required=True, help="dephasing strengths")
    c.add_argument("--basis-file", help="JSON unitary whose columns give the dephasing basis")
    c.add_argument("--csv", help="output CSV path (default: stdout)")
    c.set_defaults(func=cmd_coherence)

    d = sub.add_parser("discord", help="discord of a bipartite state over a list of p values")
    d.add_argument("state", help="bipartite state JSON file")
    d.add_argument("--p", nargs="+", required=True, help="dephasing strengths in (0, 1]")
    d.add_argument("--dims", nargs=2, type=int, metavar=("dA", "dB"))
    d.add_argument("--starts", type=int, default=16, help="random optimizer starts")
    d.add_argument("--max-iters", type=int, default=2000)
    d.add_argument("--seed", type=int, help="default: $DECOMETRY_SEED or 0")
    d.add_argument("--csv", help="output CSV path (default: stdout)")
    d.add_argument("--emit-basis", help="write the optimal A bases to this JSON file")
    d.set_defaults(func=cmd_discord)

    v = sub.add_parser("verify", help="run randomized property batteries")
    v.add_argument("--suite", choices=[*SUITES, "all"], default="all")
    v.add_argument("--samples", type=int, default=20)
    v.add_argument("--seed", type=int, help="default: $DECOMETRY_SEED or 0")
    v.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValidationError, OSError) as exc:
        print(f"decometry: error[validation]: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (ConvergenceError, DivergenceError) as exc:
        print(f"decometry: error[numerical]: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
