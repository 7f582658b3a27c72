"""Command-line front end.

Four commands: `optimize` runs activation algorithms and writes a JSON
report (plus activation files next to it), `evaluate` computes MLU of
matrices on a reduced topology, `oracle` runs the exhaustive optimum,
`bench` sweeps a dataset directory into plot-ready CSV tables.

Exit codes: 0 success, 1 usage, 2 parse/model/refusal errors, 3 solver
failures (including an exact solve hitting its time limit with no
incumbent).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from . import evaluate as ev
from . import optimize as op
from .errors import (
    InternalError,
    ModelError,
    OracleSizeError,
    ParseError,
    SolverError,
    TocaError,
    UsageError,
)
from .lpmodel import Mode, SolveLimits, build_oblivious, build_traffic_aware, write_lp_text
from .optimize import ALGORITHMS, AlgorithmRun
from .topology import (
    ActivationSolution,
    Topology,
    format_activation,
    parse_activation,
    parse_demands,
    parse_topology,
)
from .traffic import TrafficMatrix, check_ratio, scale, worst_case_matrix

SCHEMA_VERSION = 1
MAX_TRAFFIC_FILES = 4
RATIO_TOL = 1e-9


@dataclass(frozen=True)
class RunConfig:
    topology: str
    traffic: tuple[str, ...] = ()
    rho: Fraction = Fraction(1, 2)
    connections: int = 5
    algos: tuple[str, ...] = ("rnd", "up", "dwn", "exact")
    router: str = "both"
    time_limit_s: float = 3600.0
    mip_gap: float = 1e-9
    seed: int = 0
    out: str | None = None
    fmt: str = "json"

    def __post_init__(self) -> None:
        check_ratio(self.rho)
        if self.connections < 1:
            raise UsageError(f"connections must be >= 1, got {self.connections}")
        if len(self.traffic) > MAX_TRAFFIC_FILES:
            raise UsageError(f"at most {MAX_TRAFFIC_FILES} traffic files are supported")
        for algo in self.algos:
            if algo not in ALGORITHMS:
                raise UsageError(f"unknown algorithm {algo!r} (choose from {', '.join(ALGORITHMS)})")
        if self.router not in ("mcf", "2sr", "both"):
            raise UsageError(f"unknown router {self.router!r}")

    def echo(self) -> dict:
        return {
            "topology": self.topology,
            "traffic": list(self.traffic),
            "rho": str(self.rho),
            "connections": self.connections,
            "algorithms": list(self.algos),
            "router": self.router,
            "time_limit_s": self.time_limit_s,
            "mip_gap": self.mip_gap,
            "seed": self.seed,
        }


@dataclass
class EvalReport:
    instance: str
    config: dict
    command: str
    runs: list[dict] = field(default_factory=list)
    mlu: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA_VERSION,
            "command": self.command,
            "instance": self.instance,
            "config": self.config,
            "runs": self.runs,
            "mlu": self.mlu,
        }

    def write(self, out: str | None) -> None:
        text = json.dumps(self.to_dict(), indent=2)
        if out is None:
            print(text)
        else:
            Path(out).write_text(text + "\n")


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror or exc}") from None


def _load_topology(config: RunConfig) -> Topology:
    return parse_topology(
        _read(config.topology), Path(config.topology).stem, config.connections
    )


def _load_matrices(config: RunConfig, topo: Topology) -> list[tuple[str, TrafficMatrix]]:
    """Named matrices: the given demand files, or the worst-case pattern."""
    if not config.traffic:
        return [("worst-case", worst_case_matrix(topo))]
    return [
        (Path(path).stem, parse_demands(_read(path), topo))
        for path in config.traffic
    ]


def _run_algorithm(
    algo: str,
    topo: Topology,
    config: RunConfig,
    traffic: TrafficMatrix | None,
    limits: SolveLimits,
) -> AlgorithmRun:
    if algo == "rnd":
        return op.rnd(topo, config.rho, traffic=traffic, limits=limits)
    if algo == "dwn":
        return op.heur_down(topo, config.rho, traffic=traffic, limits=limits)
    if algo == "up":
        return op.heur_up(topo, config.rho, traffic=traffic, limits=limits)
    if algo == "exact":
        return op.exact(topo, config.rho, traffic=traffic, limits=limits)
    if algo == "uniform":
        return op.uniform_closed_form(topo, config.rho)
    raise UsageError(f"unknown algorithm {algo!r}")


def _run_record(run: AlgorithmRun, topo: Topology, z_exact: int | None) -> dict:
    record: dict = {
        "algorithm": run.algorithm,
        "variant": run.variant.value,
        "z": run.objective,
        "z_lp": None if run.lp_objective is None else str(run.lp_objective),
        "iterations": run.iterations,
        "rollbacks": run.rollbacks,
        "runtime_ms": round(run.runtime_ms, 3),
        "timed_out": run.timed_out,
    }
    if run.bound is not None:
        record["bound"] = run.bound
    if run.gap is not None:
        record["gap"] = run.gap
    if run.activation is not None:
        record["activation"] = sorted(
            [e.u, e.v, run.activation.counts[e.id]] for e in topo.edges
        )
    if z_exact and run.objective is not None:
        ratio = run.objective / z_exact
        if ratio < 1 - RATIO_TOL:
            raise InternalError(
                f"{run.algorithm} beat the exact optimum: {run.objective} < {z_exact}"
            )
        record["ratio"] = ratio
    return record


def _mlu_records(
    topo: Topology,
    act: ActivationSolution,
    algo: str,
    matrices: list[tuple[str, TrafficMatrix]],
    config: RunConfig,
    unscaled: bool = False,
) -> list[dict]:
    from .topology import reduce as reduce_topology

    reduced = reduce_topology(topo, act)
    routers = {
        "mcf": (ev.mcf_mlu,),
        "2sr": (ev.two_sr_mlu,),
        "both": (ev.mcf_mlu, ev.two_sr_mlu),
    }[config.router]
    records = []
    for name, matrix in matrices:
        demand = matrix if unscaled else scale(matrix, config.rho)
        for router in routers:
            result = router(reduced, demand)
            records.append(
                {
                    "matrix": name,
                    "algorithm": algo,
                    "router": result.router,
                    "mlu": result.mlu,
                    "feasible": result.feasible,
                }
            )
    return records


def _activation_path(out: str, algo: str) -> Path:
    stem = Path(out)
    return stem.with_name(f"{stem.stem}.{algo}.activation")


def cmd_optimize(config: RunConfig, dump_lp: str | None = None) -> int:
    topo = _load_topology(config)
    traffic = None
    if config.traffic:
        traffic = parse_demands(_read(config.traffic[0]), topo)
    limits = SolveLimits(config.time_limit_s, config.mip_gap)
    if dump_lp:
        model = (
            build_oblivious(topo, config.rho)
            if traffic is None
            else build_traffic_aware(topo, traffic, config.rho, Mode.LP_RELAXATION)
        )
        write_lp_text(model, dump_lp)

    runs = [
        (algo, _run_algorithm(algo, topo, config, traffic, limits))
        for algo in config.algos
    ]
    z_exact = next(
        (run.objective for _, run in runs if run.algorithm == "exact"), None
    )
    report = EvalReport(topo.name, config.echo(), "optimize")
    failed = False
    for algo, run in runs:
        report.runs.append(_run_record(run, topo, z_exact))
        if run.activation is None:
            failed = True
        elif config.out is not None:
            _activation_path(config.out, algo).write_text(
                format_activation(topo, run.activation)
            )
    report.write(config.out)
    return 3 if failed else 0


def cmd_evaluate(config: RunConfig, activation_path: str, unscaled: bool = False) -> int:
    topo = _load_topology(config)
    act = parse_activation(_read(activation_path), topo)
    matrices = _load_matrices(config, topo)
    report = EvalReport(topo.name, config.echo(), "evaluate")
    report.config["activation"] = activation_path
    report.config["unscaled"] = unscaled
    report.mlu = _mlu_records(topo, act, "given", matrices, config, unscaled)
    if config.fmt == "csv":
        rows = [["matrix", "router", "mlu", "feasible"]] + [
            [r["matrix"], r["router"], r["mlu"], r["feasible"]] for r in report.mlu
        ]
        _write_csv(config.out, rows)
    else:
        report.write(config.out)
    return 0


def cmd_oracle(config: RunConfig, limit: int, check_exact: bool) -> int:
    topo = _load_topology(config)
    act = ev.brute_force_optimum(topo, config.rho, limit)
    result = {
        "schema": SCHEMA_VERSION,
        "command": "oracle",
        "instance": topo.name,
        "config": config.echo(),
        "z": act.total,
        "activation": sorted([e.u, e.v, act.counts[e.id]] for e in topo.edges),
    }
    status = 0
    if check_exact:
        run = op.exact(
            topo, config.rho, limits=SolveLimits(config.time_limit_s, config.mip_gap)
        )
        result["z_exact"] = run.objective
        result["matches"] = run.objective == act.total
        if not result["matches"]:
            status = 3
    text = json.dumps(result, indent=2)
    if config.out is None:
        print(text)
    else:
        Path(config.out).write_text(text + "\n")
    return status


def _write_csv(out: str | None, rows: list[list]) -> None:
    if out is None:
        writer = csv.writer(sys.stdout)
        writer.writerows(rows)
    else:
        with open(out, "w", newline="") as fh:
            csv.writer(fh).writerows(rows)


def _bench_one(args: tuple) -> tuple[str, dict | None, list[list], list[list], str | None]:
    """Worker for one dataset instance; returns (name, report, run rows,
    mlu rows, error)."""
    graph_path, demand_paths, config_kwargs, min_nodes = args
    config = RunConfig(**config_kwargs)
    name = Path(graph_path).stem
    try:
        topo = parse_topology(_read(graph_path), name, config.connections)
        if topo.num_nodes < min_nodes:
            return name, None, [], [], None
        matrices = [
            (Path(p).stem, parse_demands(_read(p), topo)) for p in demand_paths
        ]
        limits = SolveLimits(config.time_limit_s, config.mip_gap)
        runs = [
            (algo, _run_algorithm(algo, topo, config, None, limits))
            for algo in config.algos
        ]
        z_exact = next(
            (run.objective for _, run in runs if run.algorithm == "exact"), None
        )
        report = EvalReport(name, config.echo(), "bench")
        run_rows = []
        mlu_rows = []
        for algo, run in runs:
            record = _run_record(run, topo, z_exact)
            report.runs.append(record)
            run_rows.append(
                [
                    name,
                    topo.num_nodes,
                    topo.num_edges,
                    algo,
                    run.variant.value,
                    run.objective,
                    "" if run.lp_objective is None else float(run.lp_objective),
                    record.get("ratio", ""),
                    round(run.runtime_ms, 3),
                    run.iterations,
                    run.rollbacks,
                    run.timed_out,
                ]
            )
            if run.activation is not None and matrices:
                for rec in _mlu_records(topo, run.activation, algo, matrices, config):
                    report.mlu.append(rec)
                    mlu_rows.append(
                        [name, algo, rec["matrix"], rec["router"], rec["mlu"], rec["feasible"]]
                    )
        return name, report.to_dict(), run_rows, mlu_rows, None
    except TocaError as exc:
        return name, None, [], [], str(exc)


RUN_COLUMNS = [
    "instance", "nodes", "edges", "algorithm", "variant", "z", "z_lp",
    "ratio", "runtime_ms", "iterations", "rollbacks", "timed_out",
]
MLU_COLUMNS = ["instance", "algorithm", "matrix", "router", "mlu", "feasible"]


def cmd_bench(
    config: RunConfig, dataset: str, min_nodes: int, out_dir: str, jobs: int
) -> int:
    root = Path(dataset)
    if not root.is_dir():
        raise UsageError(f"dataset directory {dataset!r} does not exist")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    config_kwargs = {
        "topology": config.topology,
        "rho": config.rho,
        "connections": config.connections,
        "algos": config.algos,
        "router": config.router,
        "time_limit_s": config.time_limit_s,
        "mip_gap": config.mip_gap,
        "seed": config.seed,
    }
    tasks = []
    for graph in sorted(root.glob("*.graph")):
        demands = sorted(root.glob(f"{graph.stem}*.demands"))[:MAX_TRAFFIC_FILES]
        tasks.append((str(graph), [str(d) for d in demands], config_kwargs, min_nodes))

    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_bench_one, tasks))
    else:
        results = [_bench_one(t) for t in tasks]

    run_rows: list[list] = [RUN_COLUMNS]
    mlu_rows: list[list] = [MLU_COLUMNS]
    for name, report, runs, mlus, error in results:
        if error is not None:
            print(f"bench: instance {name} failed: {error}", file=sys.stderr)
            continue
        if report is None:
            continue
        (out / f"{name}.report.json").write_text(json.dumps(report, indent=2) + "\n")
        run_rows.extend(runs)
        mlu_rows.extend(mlus)
    _write_csv(str(out / "runs.csv"), run_rows)
    _write_csv(str(out / "mlu.csv"), mlu_rows)
    return 0


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # exit 1 on usage problems, not argparse's 2
        raise UsageError(message)


def _build_parser() -> _Parser:
    shared = _Parser(add_help=False)
    shared.add_argument("--rho", default="1/2", help="retention ratio, p/q or decimal")
    shared.add_argument("--connections", type=int, default=5, metavar="K")
    shared.add_argument("--time-limit", type=float, default=3600.0, metavar="S")
    shared.add_argument("--mip-gap", type=float, default=1e-9, metavar="G")
    shared.add_argument("--seed", type=int, default=0, metavar="N")
    shared.add_argument("--out", default=None, metavar="PATH")
    shared.add_argument("--format", choices=("json", "csv"), default="json")

    parser = _Parser(prog="toca", description="Connection activation toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p_opt = sub.add_parser("optimize", parents=[shared], help="run activation algorithms")
    p_opt.add_argument("--topology", required=True)
    p_opt.add_argument("--traffic", action="append", default=[], metavar="PATH")
    p_opt.add_argument("--algo", default="rnd,up,dwn,exact", metavar="LIST")
    p_opt.add_argument("--dump-lp", default=None, metavar="PATH")

    p_eval = sub.add_parser("evaluate", parents=[shared], help="MLU of matrices on an activation")
    p_eval.add_argument("--topology", required=True)
    p_eval.add_argument("--activation", required=True)
    p_eval.add_argument("--traffic", action="append", default=[], metavar="PATH")
    p_eval.add_argument("--router", choices=("mcf", "2sr", "both"), default="both")
    p_eval.add_argument("--unscaled", action="store_true",
                        help="evaluate matrices as-is instead of scaling by rho")

    p_oracle = sub.add_parser("oracle", parents=[shared], help="exhaustive optimum")
    p_oracle.add_argument("--topology", required=True)
    p_oracle.add_argument("--limit", type=int, default=ev.DEFAULT_ORACLE_LIMIT)
    p_oracle.add_argument("--check-exact", action="store_true")

    p_bench = sub.add_parser("bench", parents=[shared], help="sweep a dataset directory")
    p_bench.add_argument("--dataset", required=True)
    p_bench.add_argument("--min-nodes", type=int, default=0)
    p_bench.add_argument("--algo", default="rnd,up,dwn,exact", metavar="LIST")
    p_bench.add_argument("--router", choices=("mcf", "2sr", "both"), default="both")
    p_bench.add_argument("--jobs", type=int, default=1)
    p_bench.add_argument("--out-dir", default=".", metavar="DIR")
    return parser


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    try:
        rho = Fraction(args.rho)
    except (ValueError, ZeroDivisionError):
        raise UsageError(f"bad --rho value {args.rho!r}") from None
    return RunConfig(
        topology=getattr(args, "topology", ""),
        traffic=tuple(getattr(args, "traffic", []) or []),
        rho=rho,
        connections=args.connections,
        algos=tuple(a.strip() for a in getattr(args, "algo", "rnd").split(",") if a.strip()),
        router=getattr(args, "router", "both"),
        time_limit_s=args.time_limit,
        mip_gap=args.mip_gap,
        seed=args.seed,
        out=args.out,
        fmt=args.format,
    )


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        config = _config_from_args(args)
        if args.command == "optimize":
            code = cmd_optimize(config, args.dump_lp)
        elif args.command == "evaluate":
            code = cmd_evaluate(config, args.activation, args.unscaled)
        elif args.command == "oracle":
            code = cmd_oracle(config, args.limit, args.check_exact)
        else:
            code = cmd_bench(config, args.dataset, args.min_nodes, args.out_dir, args.jobs)
        return code
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (ParseError, ModelError, OracleSizeError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2
    except (SolverError, InternalError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
