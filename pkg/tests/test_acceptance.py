"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run ``pytest tests/test_acceptance.py -s`` to watch the lines as they happen;
they are also repeated in the terminal summary.  ``python3 tests/test_acceptance.py``
runs the gate without pytest.
"""

from __future__ import annotations

import math
import sys
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).parent))

from suites import random_suite  # noqa: E402

from netmix.cfl import CflParams, solve_csp  # noqa: E402
from netmix.coderealize import realize_and_verify, time_expand  # noqa: E402
from netmix.errors import BudgetExhausted, Infeasible, NoConvergence, RealizationFailed  # noqa: E402
from netmix.fixtures import fig2_design, fig2_flows  # noqa: E402
from netmix.flowopt import FlowSolution, check_flow_feasible, multicast_lp, oracle_lp, solve_flow  # noqa: E402
from netmix.mixing import MixingDesign, build_clauses, check_feasible_mixing  # noqa: E402
from netmix.netmodel import atom_partition, butterfly_instance, fig2_instance, format_atoms, l_max, load_instance  # noqa: E402
from netmix.oracle import MAX_FREE_BITS, brute_force_optimum, enumerate_designs, free_bits  # noqa: E402
from netmix.pipeline import baseline_intra_flow, baseline_two_step, run_algorithm1, run_continuous  # noqa: E402
from netmix.relax import (  # noqa: E402
    PenalizedModel,
    RelaxParams,
    embed_discrete,
    mccormick_lower_bound,
    relaxed_residuals,
    round_design,
    solve_relaxed,
)

INSTANCES = Path(__file__).parent.parent / "instances"
RESULTS: list[str] = []


@contextmanager
def criterion(n: int, title: str, limit: float | None = None):
    """Times the block, prints one PASS/FAIL line, re-raises assertion failures."""
    info: dict = {}
    t0 = time.perf_counter()
    err = None
    try:
        yield info
    except AssertionError as e:
        err = e
    sec = time.perf_counter() - t0
    if err is None and limit is not None and sec > limit:
        err = AssertionError(f"took {sec:.1f}s, limit {limit:g}s")
    detail = info.get("detail", "")
    status = "PASS" if err is None else "FAIL"
    line = f"[criterion {n:2d}] {status}  {title}  ({sec:.2f}s{'; ' + detail if detail else ''})"
    if err is not None and str(err):
        line += f"  -- {str(err).splitlines()[0]}"
    RESULTS.append(line)
    print(line, flush=True)
    if err is not None:
        raise err


def rel_diff(a, b):
    return abs(a - b) / max(abs(b), 1e-12)


def max_flow_residual(inst, design, flows):
    return max(check_flow_feasible(inst, design, flows).values())


# --------------------------------------------------------------------------


def test_c01_fig2_atoms():
    with criterion(1, "fig2 atoms and L_max", limit=1.0) as info:
        inst = load_instance(INSTANCES / "fig2.json")
        atoms = format_atoms(atom_partition(inst))
        info["detail"] = f"atoms={atoms} L_max={l_max(inst)}"
        assert atoms == "{{1,2},{3}}"
        assert l_max(inst) == 2


def test_c02_infeasible_at_one_slot():
    with criterion(2, "fig2 L=1 infeasible by enumeration, CFL and relaxation", limit=10.0) as info:
        inst = fig2_instance()
        n_designs = sum(1 for _ in enumerate_designs(inst, 1))
        assert n_designs == 0
        system = build_clauses(inst, 1)
        trace = []
        try:
            solve_csp(system, CflParams(seed=0), trace)
            raise AssertionError("CFL found a design at L=1")
        except BudgetExhausted:
            pass
        try:
            solve_relaxed(inst, 1)
            raise AssertionError("the relaxation returned a point at L=1")
        except Infeasible:
            pass
        info["detail"] = f"designs=0, CFL rounds={len(trace)}, relaxation Infeasible"


def test_c03_reference_design_feasible():
    with criterion(3, "fig2 L=2 reference design and rates feasible", limit=1.0) as info:
        inst = fig2_instance()
        d, f = fig2_design(inst), fig2_flows(inst)
        assert check_feasible_mixing(inst, d) == []
        res = check_flow_feasible(inst, d, f)
        assert max(res.values()) == 0, res
        info["detail"] = f"cost={f.cost:g}, max residual 0"


def test_c04_optimality_cross_check():
    with criterion(4, "fig2 L=2: CFL search = rounded relaxation = oracle >= McCormick", limit=60.0) as info:
        inst = fig2_instance()
        oracle = brute_force_optimum(inst, 2).cost
        alg = run_algorithm1(inst, 2, attempts=50, seed=0)
        cont = run_continuous(inst, 2)
        assert check_feasible_mixing(inst, cont.design) == []
        assert max_flow_residual(inst, cont.design, cont.flows) <= 1e-6
        lb = mccormick_lower_bound(inst, 2)
        info["detail"] = f"oracle={oracle:.6g} alg1={alg.cost:.6g} continuous={cont.cost:.6g} mccormick={lb:.6g}"
        assert rel_diff(alg.cost, oracle) <= 1e-3
        assert rel_diff(cont.cost, oracle) <= 1e-3
        assert lb <= min(oracle, alg.cost, cont.cost) + 1e-9


def _pad(inst, design: MixingDesign, flows: FlowSolution):
    """Add one empty slot (sources keep sending their own flow in it)."""
    x = []
    for k, row in enumerate(design.x):
        tail = inst.edges[k].tail
        extra = 1 << inst.source_flow[tail] if tail in inst.source_flow else 0
        x.append(tuple(row) + (extra,))
    padded = MixingDesign(design.L + 1, x, design.with_beta(inst).beta)
    E, L, T, P = flows.f.shape
    f = np.concatenate([flows.f, np.zeros((E, 1, T, P))], axis=1)
    z_l = np.concatenate([flows.z_l, np.zeros((E, 1))], axis=1)
    return padded, FlowSolution(flows.z, z_l, f, flows.cost)


def test_c05_more_slots_never_hurt():
    with criterion(5, "feasible at L implies feasible at L+1 with U*(L+1) <= U*(L)", limit=300.0) as info:
        suite = random_suite()
        violations, pairs = [], 0
        for name, inst in suite:
            top = l_max(inst) + 1
            while free_bits(inst, top) > MAX_FREE_BITS:
                top -= 1
            table = brute_force_optimum(inst, top).table
            for L in range(1, top):
                pairs += 1
                a, b = table[L], table[L + 1]
                if math.isfinite(a) and not (b <= a * (1 + 1e-9)):
                    violations.append((name, L, a, b))
            # the padding argument, checked constructively at L = L_max
            best = brute_force_optimum(inst, l_max(inst))
            if best.feasible:
                d2, f2 = _pad(inst, best.design, best.flows)
                if check_feasible_mixing(inst, d2) or max_flow_residual(inst, d2, f2) > 1e-9:
                    violations.append((name, "padding"))
        info["detail"] = f"{len(suite)} instances, {pairs} (L, L+1) pairs, {len(violations)} violations"
        assert len(suite) >= 50
        assert not violations, violations[:5]


def test_c06_embedding_and_rounding():
    with criterion(6, "discrete points embed with zero residual; relaxed points round to feasible designs", limit=300.0) as info:
        suite = random_suite()
        bad, embedded, rounded = [], 0, 0
        for name, inst in suite:
            for L in range(1, l_max(inst) + 1):
                for d in enumerate_designs(inst, L):
                    try:
                        flows = oracle_lp(inst, d)
                    except Infeasible:
                        continue
                    rel = embed_discrete(inst, d, flows)
                    embedded += 1
                    if max(relaxed_residuals(inst, rel).values()) > 1e-9:
                        bad.append((name, "embed", d.x))
                    # the embedded point is itself a zero-residual relaxed point
                    if round_design(inst, rel).x != d.x:
                        bad.append((name, "round-embedded", d.x))
            try:
                rel = solve_relaxed(inst, l_max(inst), RelaxParams(starts=3))
            except (Infeasible, NoConvergence):
                continue
            if rel.residual > 1e-9:
                continue
            rounded += 1
            try:
                d = round_design(inst, rel)
            except Exception as e:  # noqa: BLE001
                bad.append((name, "round", repr(e)))
                continue
            if check_feasible_mixing(inst, d) or max_flow_residual(inst, d, rel.flows) > 1e-6:
                bad.append((name, "round", d.x))
        info["detail"] = (
            f"{len(suite)} instances, {embedded} embedded designs, {rounded} solver points rounded, {len(bad)} violations"
        )
        assert len(suite) >= 50
        assert not bad, bad[:5]


def test_c07_reference_realization():
    with criterion(7, "fig2 code: first draw over GF(101) >= 95%, GF(3) within 20 draws 100%", limit=30.0) as info:
        inst = fig2_instance()
        d, f = fig2_design(inst), fig2_flows(inst)
        first = 0
        for seed in range(100):
            code = realize_and_verify(inst, d, f, n=1, q=101, seed=seed, max_redraws=1)
            first += code.attempts == 1
        small = 0
        worst = 0
        for seed in range(100):
            try:
                code = realize_and_verify(inst, d, f, n=1, q=3, seed=seed, max_redraws=20)
                small += 1
                worst = max(worst, code.attempts)
            except RealizationFailed:
                pass
        info["detail"] = f"GF(101) first-draw {first}/100, GF(3) {small}/100 (worst {worst} draws)"
        assert first >= 95
        assert small == 100


def test_c08_time_expansion_gap():
    with criterion(8, "fractional rates: z_bar - n z <= P and z_bar/n -> z monotonically", limit=30.0) as info:
        inst = fig2_instance(rate=0.7)
        res = brute_force_optimum(inst, 2)
        assert res.feasible
        z = np.asarray(res.flows.z)
        gaps, worst = [], []
        for n in (1, 2, 4, 8):
            ex = time_expand(inst, res.design, res.flows, n)
            excess = ex.z_bar - n * z
            assert np.all(excess <= inst.P + 1e-9), (n, excess)
            gaps.append(ex.z_bar / n - z)
            worst.append(float(excess.max()))
        G = np.array(gaps)
        assert np.all(G >= -1e-9)
        assert np.all(np.diff(G, axis=0) <= 1e-9), G
        info["detail"] = "max z_bar - n z = " + ", ".join(f"{w:.2g}" for w in worst) + "; max z_bar/n - z = " + ", ".join(
            f"{g:.2g}" for g in G.max(axis=1)
        )


def test_c09_butterfly_multicast():
    with criterion(9, "butterfly L=1 equals the multicast LP", limit=10.0) as info:
        inst = butterfly_instance()
        ours = brute_force_optimum(inst, 1)
        ref = multicast_lp(inst)
        info["detail"] = f"mixing={ours.cost:.6g} multicast={ref:.6g}"
        assert rel_diff(ours.cost, ref) <= 1e-3


def test_c10_dominance():
    with criterion(10, "mixing optimum <= intra-flow optimum and <= two-step cost", limit=300.0) as info:
        suite = random_suite()
        bad, n_two, n_intra = [], 0, 0
        for name, inst in suite:
            lm = l_max(inst)
            res = brute_force_optimum(inst, lm)
            for L in range(1, lm + 1):
                intra = baseline_intra_flow(inst, L).cost
                n_intra += math.isfinite(intra)
                if not res.table[L] <= intra * (1 + 1e-9):
                    bad.append((name, "intra", L, res.table[L], intra))
            try:
                two = baseline_two_step(inst).cost
                n_two += 1
            except Infeasible:
                two = math.inf
            if not res.cost <= two * (1 + 1e-9):
                bad.append((name, "two-step", res.cost, two))
        info["detail"] = f"{len(suite)} instances ({n_intra} finite intra-flow, {n_two} finite two-step), {len(bad)} violations"
        assert not bad, bad[:5]


def test_c11_flow_solver_certificates():
    with criterion(11, "dual decomposition: gap <= 1e-3, conservation <= 1e-6, matches LP <= 1e-3") as info:
        bad, n, worst_gap, worst_rel = [], 0, 0.0, 0.0
        for name, inst in random_suite():
            if not inst.all_linear:
                continue
            res = brute_force_optimum(inst)
            if not res.feasible:
                continue
            n += 1
            sol = solve_flow(inst, res.design)
            cons = check_flow_feasible(inst, res.design, sol)["conservation"]
            rd = rel_diff(sol.cost, res.cost)
            worst_gap, worst_rel = max(worst_gap, sol.gap), max(worst_rel, rd)
            if sol.gap > 1e-3 or cons > 1e-6 or rd > 1e-3:
                bad.append((name, sol.gap, cons, rd))
        info["detail"] = f"{n} instances, worst gap {worst_gap:.2e}, worst LP disagreement {worst_rel:.2e}"
        assert n > 0
        assert not bad, bad[:5]


def test_c12_gradient_check():
    with criterion(12, "penalty gradient vs central differences <= 1e-5 at 100 points") as info:
        inst = fig2_instance()
        prob = PenalizedModel(inst, 2)
        rng = np.random.default_rng(0)
        worst = 0.0
        h = 1e-6
        for i in range(100):
            v = prob.random_point(rng)
            mu = 10.0 ** rng.integers(0, 4)
            _, g = prob.value_grad(v, mu)
            fd = np.empty_like(v)
            for j in range(len(v)):
                e = np.zeros_like(v)
                e[j] = h
                fd[j] = (prob.penalty_value(v + e, mu) - prob.penalty_value(v - e, mu)) / (2 * h)
            worst = max(worst, np.linalg.norm(g - fd) / max(np.linalg.norm(g), 1e-12))
        info["detail"] = f"worst relative error {worst:.2e}"
        assert worst <= 1e-5


if __name__ == "__main__":
    failed = 0
    for fn in [v for k, v in sorted(globals().items()) if k.startswith("test_c")]:
        try:
            fn()
        except AssertionError:
            failed += 1
    print(f"{12 - failed}/12 criteria passed")
    sys.exit(1 if failed else 0)
