"""Command-line front end.

Exit codes: 0 success / all certified checks pass, 1 a check or supplier
failed, 2 the invocation or config was invalid.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from ..amalgamation import SupplierFailure
from ..colorings import coloring_measure_report
from ..random_recolor import exact_coverage_probability, law_by_name
from .config import (ConfigError, ExperimentConfig, GraphSpec, parse_config,
                     validate_config)
from .files import read_coloring, read_graph, write_coloring, write_graph
from .reporting import fraction_cells, write_csv
from .runner import (realize_graph, run, tail_check_rows,
                     verify_artifacts_report)


def _add_graph_source(p: argparse.ArgumentParser) -> None:
    p.add_argument("--graph", required=True, help="graph file")


def _int_pairs(text: str):
    return tuple(tuple(int(x) for x in part.split(",")) for part in text.split(";"))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="domatic-forge")
    sub = parser.add_subparsers(dest="command", required=True)

    graph = sub.add_parser("graph", help="graph construction")
    graph_sub = graph.add_subparsers(dest="graph_command", required=True)
    make = graph_sub.add_parser("make", help="build a graph and write it")
    make.add_argument("--kind", required=True,
                      choices=["random-regular", "torus", "tail", "blocks"])
    make.add_argument("--n", type=int, help="vertex count (random-regular)")
    make.add_argument("--half-degree", type=int,
                      help="generator count; degree is twice this")
    make.add_argument("--blocks", type=int, help="component count (blocks)")
    make.add_argument("--block-size", type=int, help="vertices per component")
    make.add_argument("--dims", help="torus side lengths, comma separated")
    make.add_argument("--steps", help="torus steps, 'a,b;c,d' format")
    make.add_argument("--universe", type=int, help="alphabet size (tail)")
    make.add_argument("--length", type=int, help="full sequence length (tail)")
    make.add_argument("--seed", type=int, default=0)
    make.add_argument("--out", required=True, help="graph file to write")
    make.add_argument("--coloring-out",
                      help="where the tail kind writes its least-entry coloring")

    color = sub.add_parser("color", help="vertex coloring reports")
    color_sub = color.add_subparsers(dest="color_command", required=True)
    report = color_sub.add_parser("report", help="coverage fraction of a coloring")
    _add_graph_source(report)
    report.add_argument("--coloring", required=True)
    report.add_argument("--k", type=int, required=True)
    report.add_argument("--out", help="CSV of per-vertex spectrum sizes")

    rec = sub.add_parser("recolor", help="best-of-T recoloring search")
    _add_graph_source(rec)
    rec.add_argument("--coloring", required=True)
    rec.add_argument("--k", type=int, required=True)
    rec.add_argument("--trials", type=int, default=32)
    rec.add_argument("--seed", type=int, required=True)
    rec.add_argument("--law", default="geometric", choices=["geometric", "uniform"])
    rec.add_argument("--workers", type=int)
    rec.add_argument("--out-dir", required=True)

    oracle = sub.add_parser("oracle", help="exact reference values")
    oracle_sub = oracle.add_subparsers(dest="oracle_command", required=True)
    cov = oracle_sub.add_parser("coverage",
                                help="exact full-coverage probability")
    cov.add_argument("--k", type=int, required=True)
    cov.add_argument("--m", type=int, required=True)
    cov.add_argument("--law", "--pmf", default="geometric",
                     choices=["geometric", "uniform"])
    cov.add_argument("--out-dir", help="also write oracle.csv and a run record")

    pipe = sub.add_parser("pipeline", help="staged construction with certificates")
    _add_graph_source(pipe)
    pipe.add_argument("--stages", type=int, required=True)
    pipe.add_argument("--n0", type=int, default=1)
    pipe.add_argument("--t", type=int, default=3)
    pipe.add_argument("--k-target", type=int, required=True)
    pipe.add_argument("--trials", type=int, default=32)
    pipe.add_argument("--seed", type=int, required=True)
    pipe.add_argument("--law", default="geometric", choices=["geometric", "uniform"])
    pipe.add_argument("--repair-rounds", type=int, default=64)
    pipe.add_argument("--workers", type=int)
    pipe.add_argument("--out-dir", required=True)

    edges = sub.add_parser("edges", help="edge coloring experiments")
    edges_sub = edges.add_subparsers(dest="edges_command", required=True)
    corr = edges_sub.add_parser("corollary",
                                help="recolor a proper edge coloring")
    _add_graph_source(corr)
    corr.add_argument("--k", type=int, required=True)
    corr.add_argument("--trials", type=int, default=32)
    corr.add_argument("--seed", type=int, required=True)
    corr.add_argument("--law", default="geometric", choices=["geometric", "uniform"])
    corr.add_argument("--workers", type=int)
    corr.add_argument("--out-dir", required=True)

    tailg = sub.add_parser("tailgraph", help="suffix graph checks")
    tail_sub = tailg.add_subparsers(dest="tail_command", required=True)
    tcheck = tail_sub.add_parser("check", help="least-entry spectrum check")
    tcheck.add_argument("--universe", type=int, required=True)
    tcheck.add_argument("--length", type=int, required=True)
    tcheck.add_argument("--threshold", type=int)
    tcheck.add_argument("--out-dir", help="also write tail.csv and a run record")

    ver = sub.add_parser("verify", help="re-check a finished run directory")
    ver.add_argument("--dir", required=True)

    runp = sub.add_parser("run", help="execute a config file")
    runp.add_argument("--config", required=True)
    return parser


def _graph_make(args) -> int:
    spec = GraphSpec(kind=args.kind, n=args.n, half_degree=args.half_degree,
                     blocks=args.blocks, block_size=args.block_size,
                     dims=tuple(int(x) for x in args.dims.split(","))
                     if args.dims else None,
                     steps=_int_pairs(args.steps) if args.steps else None,
                     universe=args.universe, length=args.length)
    _require_graph_fields(spec)
    g, coloring = realize_graph(spec, args.seed)
    write_graph(args.out, g)
    print(f"wrote {args.out}: {g.vertex_count} vertices, "
          f"max degree {g.max_degree}, {g.component_count} components")
    if coloring is not None and args.coloring_out:
        write_coloring(args.coloring_out, coloring)
        print(f"wrote {args.coloring_out}: palette {coloring.palette}")
    return 0


def _require_graph_fields(spec: GraphSpec) -> None:
    needed = {"random-regular": ("n", "half_degree"),
              "blocks": ("blocks", "block_size", "half_degree"),
              "torus": ("dims", "steps"),
              "tail": ("universe", "length")}[spec.kind]
    for field in needed:
        if getattr(spec, field) is None:
            raise ConfigError(f"graph kind {spec.kind} needs --{field.replace('_', '-')}")


def _color_report(args) -> int:
    g = read_graph(args.graph)
    f = read_coloring(args.coloring)
    sizes, frac = coloring_measure_report(g, f, args.k)
    print(f"vertices {g.vertex_count} palette {f.palette}")
    lo = int(sizes.min()) if len(sizes) else 0
    hi = int(sizes.max()) if len(sizes) else 0
    print(f"spectrum sizes: min {lo} max {hi}")
    print(f"{args.k}-domatic fraction: {frac} ~ {float(frac):.6f}")
    if args.out:
        header = ["kind", "vertex", "value_num", "value_den", "value_float"]
        rows = [["spectrum", v, int(s), 1, repr(float(s))]
                for v, s in enumerate(sizes)]
        rows.append(["fraction", "all", *fraction_cells(frac)])
        write_csv(args.out, header, rows)
    return 0


def _config_from_args(operation: str, args, **extra) -> ExperimentConfig:
    config = ExperimentConfig(operation=operation, seed=args.seed,
                              out_dir=args.out_dir,
                              graph=GraphSpec(file=args.graph), **extra)
    validate_config(config)
    return config


def _finish(record) -> int:
    for line in sorted(record.summary):
        print(f"{line}: {record.summary[line]}")
    print(f"record: {record.record_path}")
    return record.exit_status


def _recolor(args) -> int:
    config = _config_from_args("recolor", args, coloring_file=args.coloring,
                               k=args.k, trials=args.trials, law=args.law,
                               workers=args.workers)
    return _finish(run(config))


def _oracle_coverage(args) -> int:
    if args.out_dir is None:
        law = law_by_name(args.law, args.k)
        q = exact_coverage_probability(args.m, law)
        print(f"{q.numerator}/{q.denominator} ~ {float(q):.12f}")
        return 0
    config = ExperimentConfig(operation="oracle", seed=0, out_dir=args.out_dir,
                              k=args.k, m=args.m, law=args.law)
    validate_config(config)
    return _finish(run(config))


def _pipeline(args) -> int:
    config = _config_from_args("pipeline", args, k=args.k_target,
                               stages=args.stages, tail_start=args.n0,
                               membership_cap=args.t, trials=args.trials,
                               law=args.law, repair_rounds=args.repair_rounds,
                               workers=args.workers)
    return _finish(run(config))


def _edges_corollary(args) -> int:
    config = _config_from_args("edge-corollary", args, k=args.k,
                               trials=args.trials, law=args.law,
                               workers=args.workers)
    return _finish(run(config))


def _tail_check(args) -> int:
    if args.out_dir is None:
        _, _, ok, summary = tail_check_rows(args.universe, args.length,
                                            args.threshold)
        for key in sorted(summary):
            print(f"{key}: {summary[key]}")
        return 0 if ok else 1
    config = ExperimentConfig(operation="tail-graph-check", seed=0,
                              out_dir=args.out_dir,
                              graph=GraphSpec(kind="tail",
                                              universe=args.universe,
                                              length=args.length),
                              threshold=args.threshold)
    validate_config(config)
    return _finish(run(config))


def _verify(args) -> int:
    ok, problems = verify_artifacts_report(args.dir)
    for p in problems:
        print(p)
    print("ok" if ok else "FAILED")
    return 0 if ok else 1


def _run_config(args) -> int:
    config = parse_config(Path(args.config).read_text())
    return _finish(run(config))


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "graph":
            return _graph_make(args)
        if args.command == "color":
            return _color_report(args)
        if args.command == "recolor":
            return _recolor(args)
        if args.command == "oracle":
            return _oracle_coverage(args)
        if args.command == "pipeline":
            return _pipeline(args)
        if args.command == "edges":
            return _edges_corollary(args)
        if args.command == "tailgraph":
            return _tail_check(args)
        if args.command == "verify":
            return _verify(args)
        if args.command == "run":
            return _run_config(args)
    except ConfigError as e:
        print(f"invalid configuration: {e}", file=sys.stderr)
        return 2
    except SupplierFailure as e:
        print(f"supplier failed: {e}", file=sys.stderr)
        return 1
    except FileNotFoundError as e:
        print(f"missing file: {e}", file=sys.stderr)
        return 2
    except ValueError as e:
        print(f"invalid input: {e}", file=sys.stderr)
        return 2
    raise AssertionError("unreachable command dispatch")


if __name__ == "__main__":
    sys.exit(main())
