"""Acceptance gate: ten end-to-end checks at their stated tolerances.

Each test prints one `criterion NN: PASS|FAIL` verdict line (echoed in
the terminal summary) and fails when its criterion is violated.  Two
shared workloads are computed once per session:

* `small_suite` — 100 seeded random instances (4-8 nodes, up to 14
  edges, capacities 1-10, 1-5 connections per edge) run through all
  four activation algorithms at retention ratios 3/10, 1/2, 7/10;
* `desk_suite` — three 60-80 node ring-and-chord networks with four
  gravity traffic matrices each, run through all four algorithms at
  retention ratio 1/2.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from fractions import Fraction

import pytest

from toca import optimize as op
from toca.errors import OracleSizeError
from toca.evaluate import (
    brute_force_optimum,
    lemma1_check,
    mcf_feasible,
    mcf_mlu,
    spr_mlu,
    two_sr_mlu,
)
from toca.lpmodel import build_oblivious, solve
from toca.optimize import AlgorithmRun, approx_ratio_bound
from toca.topology import Topology, reduce as reduce_topology
from toca.traffic import sample_routable_matrix, scale, worst_case_matrix

from .conftest import RING5_PAIRS
from .deskdata import build_dataset
from .instgen import build, random_topology, uniform_topology

SMALL_RHOS = (Fraction(3, 10), Fraction(1, 2), Fraction(7, 10))
DYADIC_RHOS = (Fraction(1, 2), Fraction(1, 4), Fraction(3, 4))
DESK_RHO = Fraction(1, 2)
ALGO_FUNCS = (
    ("rnd", op.rnd),
    ("up", op.heur_up),
    ("dwn", op.heur_down),
    ("exact", op.exact),
)

# Reference optima for the five-node fixture (ring 0-1-2-3-4-0 plus
# chords 0-2 and 2-4, unit capacity, one connection per edge), found by
# exhaustive enumeration: at rho=1/2 the unique cost is 5 and the
# expected activation keeps the outer ring; at rho=3/5 and 2/3 the cost
# is 6 and the expected activation keeps the path 0-1-2-3-4 plus both
# chords.  Edge order follows RING5_PAIRS.
FIVE_NODE_RING = (1, 1, 1, 1, 1, 0, 0)
FIVE_NODE_CHORDS = (1, 1, 1, 1, 0, 1, 1)


def verdict(request, criterion: int, ok: bool, detail: str) -> str:
    line = f"criterion {criterion:02d}: {'PASS' if ok else 'FAIL'} - {detail}"
    if not hasattr(request.config, "acceptance_lines"):
        request.config.acceptance_lines = []
    request.config.acceptance_lines.append(line)
    print(line)
    return line


@dataclass(frozen=True)
class SmallInstance:
    seed: int
    topo: Topology
    rho: Fraction
    runs: dict[str, AlgorithmRun]


@pytest.fixture(scope="module")
def small_suite() -> list[SmallInstance]:
    instances = []
    for seed in range(100):
        topo = random_topology(seed)
        rho = SMALL_RHOS[seed % 3]
        runs = {name: fn(topo, rho) for name, fn in ALGO_FUNCS}
        instances.append(SmallInstance(seed, topo, rho, runs))
    return instances


@pytest.fixture(scope="module")
def desk_suite():
    suite = []
    for name, topo, matrices in build_dataset():
        runs = {algo: fn(topo, DESK_RHO) for algo, fn in ALGO_FUNCS}
        suite.append((name, topo, matrices, runs))
    return suite


@pytest.fixture(scope="module")
def desk_evaluations(desk_suite):
    """Every (instance, algorithm, matrix) MLU under all three routers."""
    rows = []
    for name, topo, matrices, runs in desk_suite:
        for algo, run in runs.items():
            reduced = reduce_topology(topo, run.activation)
            for index, matrix in enumerate(matrices):
                demand = scale(matrix, DESK_RHO)
                rows.append(
                    (
                        name,
                        algo,
                        index,
                        mcf_mlu(reduced, demand).mlu,
                        two_sr_mlu(reduced, demand).mlu,
                        spr_mlu(reduced, demand).mlu,
                    )
                )
    return rows


def test_01_five_node_regression(request):
    topo = build("fivenode", 5, RING5_PAIRS)
    failures = []

    ring_edges = {i for i, x in enumerate(FIVE_NODE_RING) if x}
    chord_edges = {i for i, x in enumerate(FIVE_NODE_CHORDS) if x}
    if ring_edges <= chord_edges or chord_edges <= ring_edges:
        failures.append("reference activations are nested")

    elapsed = 0.0
    for rho, want_z, want_counts in (
        (Fraction(1, 2), 5, FIVE_NODE_RING),
        (Fraction(3, 5), 6, FIVE_NODE_CHORDS),
        (Fraction(2, 3), 6, FIVE_NODE_CHORDS),
    ):
        start = time.perf_counter()
        run = op.exact(topo, rho)
        elapsed += time.perf_counter() - start
        if run.objective != want_z:
            failures.append(f"rho={rho}: objective {run.objective} != {want_z}")
        if run.activation.counts != want_counts:
            failures.append(
                f"rho={rho}: activation {run.activation.counts} is not the "
                f"expected set {want_counts}"
            )
    if elapsed >= 1.0:
        failures.append(f"runtime {elapsed:.3f}s exceeds 1s")

    ok = not failures
    detail = (
        f"reference activations and objectives reproduced in {elapsed * 1e3:.0f}ms"
        if ok
        else "; ".join(failures)
    )
    verdict(request, 1, ok, detail)
    assert ok, "\n".join(failures)


def test_02_rounding_bound_and_feasibility(request, small_suite):
    violations = []
    activations_checked = 0
    for inst in small_suite:
        z_opt = inst.runs["exact"].objective
        c_min = min(e.connections for e in inst.topo.edges)
        bound = approx_ratio_bound(inst.rho, c_min)
        for algo in ("rnd", "up", "dwn"):
            z = inst.runs[algo].objective
            if Fraction(z) > bound * z_opt:
                violations.append(
                    f"seed={inst.seed} {algo}: {z} > {bound} * {z_opt}"
                )
        demand = scale(worst_case_matrix(inst.topo), inst.rho)
        for algo, run in inst.runs.items():
            activations_checked += 1
            if not mcf_feasible(inst.topo, run.activation, demand):
                violations.append(f"seed={inst.seed} {algo}: activation infeasible")

    ok = not violations
    detail = (
        f"{len(small_suite)} instances: all heuristics within "
        f"approx_ratio_bound; {activations_checked}/{activations_checked} "
        "activations carry the scaled worst-case pattern"
        if ok
        else f"{len(violations)} violations, first: {violations[0]}"
    )
    verdict(request, 2, ok, detail)
    assert ok, "\n".join(violations)


def test_03_exhaustive_agreement(request, small_suite):
    mismatches = []
    enumerable = 0
    for inst in small_suite:
        try:
            reference = brute_force_optimum(inst.topo, inst.rho)
        except OracleSizeError:
            continue
        enumerable += 1
        z_exact = inst.runs["exact"].objective
        if reference.total != z_exact:
            mismatches.append(
                f"seed={inst.seed}: exhaustive {reference.total} != exact {z_exact}"
            )

    ok = not mismatches and enumerable > 0
    detail = (
        f"exact matches the exhaustive optimum on all {enumerable}/"
        f"{len(small_suite)} enumerable instances"
        if ok
        else f"{len(mismatches)} mismatches, first: {mismatches[0]}"
    )
    verdict(request, 3, ok, detail)
    assert ok, "\n".join(mismatches)


def test_04_relaxation_structure(request, small_suite):
    violations = []
    for inst in small_suite:
        sol = inst.runs["rnd"].lp_solution
        report = lemma1_check(sol, inst.topo, inst.rho)
        if not report.holds:
            violations.append(
                f"seed={inst.seed}: {report.fractional} fractional > "
                f"{report.saturated} saturated (is_basic={sol.is_basic})"
            )

    ok = not violations
    detail = (
        f"saturation bound holds on {len(small_suite)}/{len(small_suite)} "
        "basic relaxation optima"
        if ok
        else f"{len(violations)} violations, first: {violations[0]}"
    )
    verdict(request, 4, ok, detail)
    assert ok, "\n".join(violations)


def test_05_arcwise_model_agreement(request, small_suite):
    subset = small_suite[:25]
    failures = []
    for inst in subset:
        reduced = inst.runs["rnd"].lp_solution.objective
        full = solve(build_oblivious(inst.topo, inst.rho, index_reduction=False))
        gap = abs(full.objective - reduced)
        if gap > 1e-8 * max(abs(full.objective), abs(reduced)):
            failures.append(
                f"seed={inst.seed}: full {full.objective!r} vs reduced "
                f"{reduced!r} (gap {gap:.3e})"
            )

    ok = not failures
    detail = (
        f"edge-indexed and arc-indexed relaxations agree (rel 1e-8) on "
        f"{len(subset)}/{len(subset)} instances"
        if ok
        else f"{len(failures)} disagreements, first: {failures[0]}"
    )
    verdict(request, 5, ok, detail)
    assert ok, "\n".join(failures)


def test_06_sampled_matrices_stay_routable(request, small_suite):
    subset = small_suite[:25]
    samples_per_instance = 50
    violations = []
    checked = 0
    for inst in subset:
        reduced = reduce_topology(inst.topo, inst.runs["exact"].activation)
        for draw in range(samples_per_instance):
            matrix = sample_routable_matrix(inst.topo, 1000 * inst.seed + draw)
            result = mcf_mlu(reduced, scale(matrix, inst.rho))
            checked += 1
            if result.mlu > 1 + 1e-6:
                violations.append(
                    f"seed={inst.seed} draw={draw}: mlu={result.mlu:.9f}"
                )

    ok = not violations
    detail = (
        f"{checked}/{checked} sampled routable matrices stay routable on "
        "the exact activation after scaling"
        if ok
        else f"{len(violations)} violations, first: {violations[0]}"
    )
    verdict(request, 6, ok, detail)
    assert ok, "\n".join(violations)


def test_07_uniform_closed_form(request):
    deviations = []
    count = 40
    for index in range(count):
        topo = uniform_topology(index)
        rho = DYADIC_RHOS[index % 3]
        want = rho * topo.edges[0].connections
        sol = solve(build_oblivious(topo, rho))
        off = [x for x in sol.xstar if Fraction(x) != want]
        if off:
            deviations.append(
                f"uni{index} rho={rho}: relaxation value {off[0]!r} != {want}"
            )
        closed = op.uniform_closed_form(topo, rho)
        rounded = op.rnd(topo, rho)
        if closed.activation != rounded.activation or closed.objective != rounded.objective:
            deviations.append(
                f"uni{index} rho={rho}: closed form {closed.activation.counts} "
                f"!= rnd {rounded.activation.counts}"
            )

    ok = not deviations
    detail = (
        f"{count}/{count} uniform instances: relaxation is exactly rho*c "
        "per edge and the closed form equals rnd"
        if ok
        else f"{len(deviations)} deviations, first: {deviations[0]}"
    )
    verdict(request, 7, ok, detail)
    assert ok, "\n".join(deviations)


def test_08_desk_networks(request, desk_suite, desk_evaluations):
    failures = []
    notes = []

    # (a) heuristic cost against the exact optimum: flag above 11/10,
    # fail only above the guaranteed worst case of 7/5
    worst_ratio = Fraction(0)
    soft_misses = []
    for name, topo, matrices, runs in desk_suite:
        z_opt = runs["exact"].objective
        for algo in ("rnd", "up", "dwn"):
            ratio = Fraction(runs[algo].objective, z_opt)
            worst_ratio = max(worst_ratio, ratio)
            if ratio > Fraction(11, 10):
                soft_misses.append(f"{name} {algo} ratio {float(ratio):.4f}")
            if ratio > Fraction(7, 5):
                failures.append(
                    f"{name} {algo}: ratio {float(ratio):.4f} above the 1.4 bound"
                )
    notes.append(
        f"ratios<=1.1 {'held' if not soft_misses else 'MISSED (' + ', '.join(soft_misses) + ')'}"
        f" (max {float(worst_ratio):.4f})"
    )

    # (b) every activation carries all four scaled matrices at MLU <= 1
    # under both flow-optimal and midpoint routing
    over = [
        f"{name} {algo} T{index}: mcf={mcf:.4f} 2sr={s2:.4f}"
        for name, algo, index, mcf, s2, _ in desk_evaluations
        if mcf > 1.0 or s2 > 1.0
    ]
    if over:
        failures.append(f"MLU above 1 on {len(over)} evaluations: {over[:3]}")
    else:
        notes.append(
            f"MLU<=1 on {len(desk_evaluations)}/{len(desk_evaluations)} evaluations"
        )

    # (c) report-only: rounding should beat the exact solver wherever the
    # exact solve runs past a minute
    slow = []
    for name, topo, matrices, runs in desk_suite:
        if runs["exact"].runtime_ms > 60_000:
            faster = runs["rnd"].runtime_ms < runs["exact"].runtime_ms
            slow.append(f"{name}: rnd {'faster' if faster else 'SLOWER'}")
    notes.append(
        "exact under 60s everywhere" if not slow else "exact>60s: " + ", ".join(slow)
    )

    ok = not failures
    detail = "; ".join(notes) if ok else "; ".join(failures + notes)
    verdict(request, 8, ok, detail)
    assert ok, "\n".join(failures)


def test_09_rounding_box_and_iterations(request, small_suite, desk_suite):
    violations = []
    runs_checked = 0

    def check(label: str, topo: Topology, run: AlgorithmRun) -> None:
        nonlocal runs_checked
        runs_checked += 1
        xstar = run.lp_solution.xstar
        for edge in topo.edges:
            x = run.activation.counts[edge.id]
            lo = math.floor(xstar[edge.id])
            hi = math.ceil(xstar[edge.id])
            if not lo <= x <= hi:
                violations.append(
                    f"{label}: edge {edge.u}-{edge.v} count {x} outside "
                    f"[{lo}, {hi}] around {xstar[edge.id]!r}"
                )
        if run.iterations > topo.num_edges:
            violations.append(
                f"{label}: {run.iterations} iterations > {topo.num_edges} edges"
            )

    for inst in small_suite:
        for algo in ("up", "dwn"):
            check(f"seed={inst.seed} {algo}", inst.topo, inst.runs[algo])
    for name, topo, matrices, runs in desk_suite:
        for algo in ("up", "dwn"):
            check(f"{name} {algo}", topo, runs[algo])

    ok = not violations
    detail = (
        f"unit-step activations stay inside the relaxation box with at most "
        f"|E| iterations on {runs_checked}/{runs_checked} runs"
        if ok
        else f"{len(violations)} violations, first: {violations[0]}"
    )
    verdict(request, 9, ok, detail)
    assert ok, "\n".join(violations)


def test_10_router_sandwich(request, desk_evaluations):
    violations = []
    for name, algo, index, mcf, s2, spr in desk_evaluations:
        if not (mcf <= s2 + 1e-8 and s2 <= spr + 1e-8):
            violations.append(
                f"{name} {algo} T{index}: mcf={mcf:.6f} 2sr={s2:.6f} spr={spr:.6f}"
            )

    ok = not violations
    detail = (
        f"mcf <= 2sr <= spr (tol 1e-8) on {len(desk_evaluations)}/"
        f"{len(desk_evaluations)} desk evaluations"
        if ok
        else f"{len(violations)} violations, first: {violations[0]}"
    )
    verdict(request, 10, ok, detail)
    assert ok, "\n".join(violations)
