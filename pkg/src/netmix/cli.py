"""Command-line interface.

Exit codes: 0 success, 1 infeasible, 2 usage or input error, 3 budget exhausted.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from pathlib import Path

from .coderealize import dumps_code, realize_and_verify, time_expand
from .errors import (
    BudgetExhausted,
    ExpansionFailed,
    FieldTooSmall,
    Infeasible,
    NetmixError,
    NoConvergence,
    RealizationFailed,
    TooLarge,
)
from .flowopt import dumps_solution, junction_lp, loads_solution
from .mixing import dumps_design, loads_design
from .netmodel import (
    RandomInstanceParams,
    atom_partition,
    dumps_instance,
    format_atoms,
    generate_random_instance,
    l_max,
    load_instance,
    validate_instance,
)
from .oracle import brute_force_optimum, enumerate_designs
from .pipeline import RunRecord, baseline_intra_flow, baseline_two_step, run_algorithm1, run_continuous, run_oracle
from .relax import RelaxParams

EXIT_OK, EXIT_INFEASIBLE, EXIT_USAGE, EXIT_BUDGET = 0, 1, 2, 3


def _parse_L(text: str, inst) -> int:
    if text == "max":
        return l_max(inst)
    L = int(text)
    if not 1 <= L <= l_max(inst):
        raise ValueError(f"L must lie in 1..{l_max(inst)}")
    return L


def _load(path: str):
    inst = load_instance(path)
    problems = validate_instance(inst)
    if problems:
        raise ValueError("invalid instance: " + "; ".join(problems))
    return inst


def _first_feasible_L(inst, start: int) -> int | None:
    """Smallest L' >= start with a feasible design, by enumeration (None if unknown)."""
    for L in range(start, l_max(inst) + 1):
        try:
            if next(iter(enumerate_designs(inst, L, limit=1)), None) is not None:
                return L
        except TooLarge:
            return None
    return None


def _infeasible_message(inst, L: int) -> str:
    lm = l_max(inst)
    nxt = _first_feasible_L(inst, L + 1) if L < lm else None
    hint = nxt if nxt is not None else lm
    if L < lm:
        return f"infeasible at L={L}; try --L {hint} (L_max={lm})"
    return f"infeasible at L={L} (L_max={lm})"


def _discrete_is_empty(inst, L: int) -> bool | None:
    try:
        return next(iter(enumerate_designs(inst, L, limit=1)), None) is None
    except TooLarge:
        return None


def _write_outputs(args, inst, rec: RunRecord):
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = Path(args.instance).stem
    dpath = Path(args.design_out) if args.design_out else out / f"{stem}.design.json"
    fpath = Path(args.flow_out) if args.flow_out else out / f"{stem}.flows.json"
    dpath.write_text(dumps_design(inst, rec.design))
    fpath.write_text(dumps_solution(inst, rec.flows))
    return dpath, fpath


def _realize(args, inst, design, flows) -> int:
    try:
        code = realize_and_verify(inst, design, flows, args.n, args.q, args.seed, args.max_redraws, reroute=True)
    except ExpansionFailed as e:
        print(f"not realizable with these supports: {e}")
        return EXIT_INFEASIBLE
    if code.rerouted_cost is not None:
        print(f"rates crossed closed junctions; rerouted at cost {code.rerouted_cost:.6g}")
        flows = junction_lp(inst, design)
    ex = time_expand(inst, design, flows, args.n)
    for r in code.reports.values():
        print(f"terminal {r.node}: {'decodable' if r.decodable else 'NOT decodable'} (rank {r.rank}/{r.required})")
    print(f"draws used: {code.attempts}")
    worst = max((g for (_, _, g) in code.rates.values()), default=0.0)
    print(f"largest per-edge rate overhead z_bar/n - z: {worst:.6g}")
    if args.code_out:
        Path(args.code_out).write_text(dumps_code(code, ex))
    return EXIT_OK


def cmd_validate(args) -> int:
    inst = load_instance(args.instance)
    problems = validate_instance(inst)
    if problems:
        for p in problems:
            print(f"error: {p}")
        return EXIT_USAGE
    print(f"ok: {len(inst.nodes)} nodes, {inst.E} edges, {inst.P} flows, {inst.T} terminals")
    return EXIT_OK


def cmd_atoms(args) -> int:
    inst = _load(args.instance)
    print(f"atoms: {format_atoms(atom_partition(inst))}")
    print(f"L_max={l_max(inst)}")
    return EXIT_OK


def _solve(args, inst, L) -> RunRecord:
    if args.method == "discrete":
        rec = run_algorithm1(inst, L, args.attempts, args.cfl_budget, args.seed, keep_traces=bool(args.cfl_trace))
        if args.cfl_trace:
            with open(args.cfl_trace, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["attempt", "round", "unsatisfied"])
                for a, trace in enumerate(rec.extra["traces"]):
                    w.writerows([a + 1, r, u] for r, u in trace)
        return rec
    if args.method == "continuous":
        params = RelaxParams(starts=args.starts, penalty_rounds=args.penalty_rounds, seed=args.seed)
        return run_continuous(inst, L, params)
    return run_oracle(inst, L)


def cmd_solve(args) -> int:
    inst = _load(args.instance)
    L = _parse_L(args.L, inst)
    try:
        rec = _solve(args, inst, L)
    except Infeasible:
        print(_infeasible_message(inst, L))
        return EXIT_INFEASIBLE
    except NoConvergence as e:
        print(f"no convergence: {e}")
        return EXIT_BUDGET
    if not rec.feasible:
        empty = _discrete_is_empty(inst, L)
        if empty or args.method == "oracle":
            print(_infeasible_message(inst, L))
            return EXIT_INFEASIBLE
        print(f"no feasible design found within the budget at L={L}")
        return EXIT_BUDGET
    print(f"method={rec.method} L={L} cost={rec.cost:.6g} seconds={rec.seconds:.3f}")
    dpath, fpath = _write_outputs(args, inst, rec)
    print(f"wrote {dpath} and {fpath}")
    if args.realize:
        return _realize(args, inst, rec.design, rec.flows)
    return EXIT_OK


def cmd_baseline(args) -> int:
    inst = _load(args.instance)
    try:
        if args.kind == "two-step":
            rec = baseline_two_step(inst)
        else:
            rec = baseline_intra_flow(inst, _parse_L(args.L, inst))
    except Infeasible as e:
        print(f"infeasible: {e}")
        return EXIT_INFEASIBLE
    if not rec.feasible:
        print(f"infeasible: no {args.kind} design delivers every demand at L={rec.L}")
        return EXIT_INFEASIBLE
    print(f"method={rec.method} L={rec.L} cost={rec.cost:.6g}")
    return EXIT_OK


def cmd_realize(args) -> int:
    inst = _load(args.instance)
    design = loads_design(inst, Path(args.design).read_text())
    flows = loads_solution(inst, Path(args.flows).read_text())
    return _realize(args, inst, design, flows)


def cmd_generate(args) -> int:
    params = RandomInstanceParams(
        n_nodes=args.nodes,
        edge_prob=args.edge_prob,
        n_flows=args.flows,
        n_terminals=args.terminals,
        cost_kind=args.cost_kind,
    )
    text = dumps_instance(generate_random_instance(params, args.seed))
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_oracle(args) -> int:
    inst = _load(args.instance)
    L = _parse_L(args.L, inst)
    res = brute_force_optimum(inst, L)
    w = csv.writer(sys.stdout)
    w.writerow(["L", "cost", "designs"])
    for l in sorted(res.table):
        c = res.table[l]
        w.writerow([l, "inf" if math.isinf(c) else f"{c:.10g}", res.counts[l]])
    return EXIT_OK if res.feasible else EXIT_INFEASIBLE


def cmd_bench(args) -> int:
    rows = []
    for path in args.instances:
        inst = _load(path)
        for method in args.methods:
            L = _parse_L(args.L, inst)
            t0 = time.perf_counter()
            try:
                if method == "algorithm1":
                    rec = run_algorithm1(inst, L, args.attempts, None, args.seed)
                elif method == "continuous":
                    rec = run_continuous(inst, L, RelaxParams(starts=args.starts, seed=args.seed))
                elif method == "oracle":
                    rec = run_oracle(inst, L)
                elif method == "intra-flow":
                    rec = baseline_intra_flow(inst, L)
                else:
                    rec = baseline_two_step(inst)
            except (Infeasible, NoConvergence, TooLarge):
                rec = RunRecord(method, L)
            sec = time.perf_counter() - t0
            s = rec.summary()
            rows.append([Path(path).stem, method, rec.L, s["cost"], s["feasible"], s["iterations"], f"{sec:.4f}"])
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    w = csv.writer(out)
    w.writerow(["instance", "method", "L", "cost", "feasible", "iterations", "seconds"])
    w.writerows(rows)
    if args.out:
        out.close()
    return EXIT_OK


def _add_realize_flags(p):
    p.add_argument("--n", type=int, default=1, help="time-expansion factor")
    p.add_argument("--q", type=int, default=101, help="prime field size (must exceed the terminal count)")
    p.add_argument("--max-redraws", type=int, default=20)
    p.add_argument("--code-out", help="write the realized code here")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="netmix", description="Minimum-cost network mixing for general connections")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check an instance file")
    p.add_argument("--instance", required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("atoms", help="print the flow partition and L_max")
    p.add_argument("--instance", required=True)
    p.set_defaults(func=cmd_atoms)

    p = sub.add_parser("solve", help="optimize mixing and flows")
    p.add_argument("--instance", required=True)
    p.add_argument("--method", choices=["discrete", "continuous", "oracle"], default="discrete")
    p.add_argument("--L", default="max", help="mixing parameter (integer or 'max')")
    p.add_argument("--attempts", type=int, default=50, help="CFL attempts (discrete)")
    p.add_argument("--cfl-budget", type=int, default=None, help="rounds per CFL attempt")
    p.add_argument("--starts", type=int, default=8, help="multi-starts (continuous)")
    p.add_argument("--penalty-rounds", type=int, default=8, help="penalty rounds (continuous)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default=".", help="where design and flow files go")
    p.add_argument("--design-out", help="design file path (default <out-dir>/<stem>.design.json)")
    p.add_argument("--flow-out", help="flow file path (default <out-dir>/<stem>.flows.json)")
    p.add_argument("--cfl-trace", help="write per-round unsatisfied-clause counts as CSV (discrete)")
    p.add_argument("--realize", action="store_true", help="also build and verify a code")
    _add_realize_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("baseline", help="intra-flow or two-step reference cost")
    p.add_argument("--instance", required=True)
    p.add_argument("--kind", choices=["intra", "two-step"], required=True)
    p.add_argument("--L", default="max")
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("realize", help="build a linear code from design and flow files")
    p.add_argument("--instance", required=True)
    p.add_argument("--design", "--design-in", dest="design", required=True)
    p.add_argument("--flows", "--flow-in", dest="flows", required=True)
    p.add_argument("--seed", type=int, default=0)
    _add_realize_flags(p)
    p.set_defaults(func=cmd_realize)

    p = sub.add_parser("generate", help="write a random instance")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--nodes", type=int, default=7)
    p.add_argument("--edge-prob", type=float, default=0.4)
    p.add_argument("--flows", type=int, default=2)
    p.add_argument("--terminals", type=int, default=2)
    p.add_argument("--cost-kind", choices=["linear", "quadratic"], default="linear")
    p.add_argument("--out")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("oracle", help="exhaustive per-L cost table as CSV")
    p.add_argument("--instance", required=True)
    p.add_argument("--L", default="max")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("bench", help="run methods over instances, CSV out")
    p.add_argument("instances", nargs="+")
    p.add_argument(
        "--methods",
        nargs="+",
        default=["algorithm1", "oracle", "two-step"],
        choices=["algorithm1", "continuous", "oracle", "intra-flow", "two-step"],
    )
    p.add_argument("--L", default="max")
    p.add_argument("--attempts", type=int, default=50)
    p.add_argument("--starts", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_bench)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError, KeyError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except FieldTooSmall as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (BudgetExhausted, RealizationFailed) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_BUDGET
    except (TooLarge, ExpansionFailed) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except Infeasible as e:
        print(f"infeasible: {e}")
        return EXIT_INFEASIBLE
    except NetmixError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
