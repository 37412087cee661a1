"""Config-driven runner: realizes the graph, dispatches the operation, writes
every artifact plus a machine-readable run record, and re-verifies finished
runs from their files alone."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from .. import __version__
from ..amalgamation import (SupplierFailure, borel_cantelli_check,
                            build_membership_coloring, encode_finite_sets,
                            run_pipeline, spectrum_growth_check)
from ..colorings import (VertexColoring, covered_mask, dominates,
                         least_measure_class, proper_edge_coloring,
                         spectrum_sizes, verify_proper)
from ..measured_graph import (MeasuredGraph, _as_mask, make_block_graph,
                              make_random_regular, make_tail_graph,
                              make_torus_schreier, measure_of, saturate,
                              tail_graph_vertices)
from ..random_recolor import (RecolorMap, edge_coverage_fraction,
                              exact_coverage_probability, law_by_name, recolor,
                              recolor_edges, sample_recolor_map,
                              search_recolor_maps)
from ..util import stream_label, substream
from .config import ConfigError, ExperimentConfig, GraphSpec, parse_config
from .files import (read_coloring, read_edge_coloring, read_graph,
                    read_vertex_set, write_coloring, write_edge_coloring,
                    write_graph, write_vertex_set)
from .reporting import fraction_cells, read_csv, write_csv

RECORD_NAME = "run_record.json"


@dataclass(frozen=True)
class RunRecord:
    """What one runner invocation did, echoed well enough to reproduce it."""

    operation: str
    version: str
    config_echo: str
    csv_paths: tuple[str, ...]
    wall_time_seconds: float
    exit_status: int
    summary: dict
    record_path: str


def realize_graph(spec: GraphSpec, seed: int):
    """(graph, companion coloring or None) from a graph spec.

    Only the tail kind has a companion coloring (its least-entry coloring).
    """
    if spec.file is not None:
        return read_graph(spec.file), None
    kind = spec.kind
    if kind == "random-regular":
        return make_random_regular(spec.n, spec.half_degree, seed), None
    if kind == "blocks":
        return make_block_graph(spec.blocks, spec.block_size,
                                spec.half_degree, seed), None
    if kind == "torus":
        return make_torus_schreier(spec.dims, spec.steps), None
    if kind == "tail":
        return make_tail_graph(spec.universe, spec.length)
    raise ConfigError(f"unknown graph kind {kind!r}")


def run(config: ExperimentConfig) -> RunRecord:
    """Dispatch one experiment; everything lands under config.out_dir."""
    start = time.perf_counter()
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    handler = {"oracle": _run_oracle, "recolor": _run_recolor,
               "pipeline": _run_pipeline, "edge-corollary": _run_edge_corollary,
               "tail-graph-check": _run_tail_check}[config.operation]
    csv_paths, exit_status, summary = handler(config, out)
    record = RunRecord(config.operation, __version__, config.echo(),
                       tuple(str(p) for p in csv_paths),
                       time.perf_counter() - start, exit_status, summary,
                       str(out / RECORD_NAME))
    payload = {"operation": record.operation, "version": record.version,
               "config": record.config_echo, "csv_paths": list(record.csv_paths),
               "wall_time_seconds": record.wall_time_seconds,
               "exit_status": record.exit_status, "summary": record.summary}
    (out / RECORD_NAME).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return record


def _run_oracle(config: ExperimentConfig, out: Path):
    law = law_by_name(config.law, config.k)
    q = exact_coverage_probability(config.m, law)
    path = out / "oracle.csv"
    write_csv(path, ["k", "m", "law", "exact_num", "exact_den", "exact_float"],
              [[config.k, config.m, config.law, *fraction_cells(q)]])
    return [path], 0, {"exact": f"{q.numerator}/{q.denominator}"}


def trial_rows_csv(path, rows):
    """The per-trial CSV shared by the recolor search and the pipeline."""
    write_csv(path, ["trial", "seed", "fraction_num", "fraction_den", "fraction_float"],
              [[r.trial, r.seed, *fraction_cells(r.fraction)] for r in rows])


def _run_recolor(config: ExperimentConfig, out: Path):
    g, _ = realize_graph(config.graph, config.seed)
    f = read_coloring(config.coloring_file)
    result = search_recolor_maps(g, f, config.k, config.trials, config.seed,
                                 law=law_by_name(config.law, config.k),
                                 workers=config.workers)
    path = out / "trials.csv"
    trial_rows_csv(path, result.rows)
    write_coloring(out / "best.coloring.txt", recolor(f, result.best))
    summary = {"best_trial": result.best_trial,
               "best_fraction": f"{result.best_fraction.numerator}/"
                                f"{result.best_fraction.denominator}",
               "best_images": [int(x) for x in result.best.images]}
    return [path], 0, summary


def _incident_color_counts(g: MeasuredGraph, ec) -> np.ndarray:
    indptr, eids = ec.incidence
    cols = ec.colors[eids]
    src = np.repeat(np.arange(g.vertex_count, dtype=np.int64), np.diff(indptr))
    palette = int(ec.colors.max(initial=0)) + 1
    keys = np.unique(src * np.int64(palette) + cols)
    return np.bincount((keys // palette).astype(np.int64), minlength=g.vertex_count)


def edge_coverage_oracle_mean(g: MeasuredGraph, ec, law) -> Fraction:
    """Expected covered mass after edge recoloring: each vertex contributes its
    exact coverage probability at its count of distinct incident colors."""
    counts = _incident_color_counts(g, ec)
    cache: dict[int, Fraction] = {}
    total = Fraction(0)
    for v, c in enumerate(counts):
        c = int(c)
        if c not in cache:
            cache[c] = exact_coverage_probability(c, law)
        total += g.weights[v] * cache[c]
    return total


def _run_edge_corollary(config: ExperimentConfig, out: Path):
    g, _ = realize_graph(config.graph, config.seed)
    ec = proper_edge_coloring(g)
    law = law_by_name(config.law, config.k)
    source = int(ec.colors.max(initial=0)) + 1
    rows = []
    total = Fraction(0)
    for i in range(config.trials):
        stream = substream(config.seed, "edge-trial", i)
        r = sample_recolor_map(law, source, stream)
        rec = recolor_edges(g, ec, r)
        frac = edge_coverage_fraction(g, rec, config.k)
        total += frac
        rows.append([i, stream_label(stream), "coverage",
                     *fraction_cells(frac), int(rec.proper)])
    mean = total / config.trials
    oracle = edge_coverage_oracle_mean(g, ec, law)
    header = ["trial", "seed", "kind", "value_num", "value_den", "value_float",
              "proper"]
    rows.append(["all", "-", "mean", *fraction_cells(mean), ""])
    rows.append(["all", "-", "oracle_mean", *fraction_cells(oracle), ""])
    path = out / "edges.csv"
    write_csv(path, header, rows)
    write_graph(out / "graph.txt", g)
    write_edge_coloring(out / "edges.coloring.txt", ec)
    status = 0 if ec.proper else 1
    summary = {"colors_used": source, "proper": bool(ec.proper),
               "mean": f"{mean.numerator}/{mean.denominator}",
               "oracle_mean": f"{oracle.numerator}/{oracle.denominator}"}
    return [path], status, summary


def tail_check_rows(universe: int, length: int, threshold: int | None):
    """(header, rows, ok, summary) for the suffix-graph least-entry check."""
    g, coloring = make_tail_graph(universe, length)
    verts = tail_graph_vertices(universe, length)
    sizes = spectrum_sizes(g, coloring)
    need = length - 1 if threshold is None else threshold
    full = [i for i, s in enumerate(verts) if len(s) == length]
    ok = all(int(sizes[i]) >= need for i in full)
    header = ["vertex", "sequence", "length", "least_entry", "spectrum_size"]
    rows = [[i, "-".join(str(x) for x in s), len(s), s[0], int(sizes[i])]
            for i, s in enumerate(verts)]
    summary = {"threshold": need, "ok": ok,
               "full_length_vertices": len(full),
               "min_full_length_spectrum": min(int(sizes[i]) for i in full)}
    return header, rows, ok, summary


def _run_tail_check(config: ExperimentConfig, out: Path):
    gs = config.graph
    header, rows, ok, summary = tail_check_rows(gs.universe, gs.length,
                                               config.threshold)
    path = out / "tail.csv"
    write_csv(path, header, rows)
    return [path], 0 if ok else 1, summary


def _run_pipeline(config: ExperimentConfig, out: Path):
    g, _ = realize_graph(config.graph, config.seed)
    try:
        final, report = run_pipeline(
            g, config.stages, tail_start=config.tail_start,
            membership_cap=config.membership_cap, target_palette=config.k,
            trials=config.trials, master_seed=config.seed,
            law=law_by_name(config.law, config.k),
            repair_rounds=config.repair_rounds, workers=config.workers)
    except SupplierFailure as e:
        summary = {"error": str(e), "palette": e.palette, "rounds": e.rounds,
                   "achieved": f"{e.achieved.numerator}/{e.achieved.denominator}",
                   "bad_count": e.bad_count}
        return [], 1, summary
    paths = _write_pipeline_outputs(g, final, report, out)
    summary = {
        "certified_ok": report.certified_ok,
        "growth_ok": report.growth.ok,
        "probative": report.probative,
        "certified_measure": f"{report.certified_measure.numerator}/"
                             f"{report.certified_measure.denominator}",
        "final_fraction": f"{report.final_fraction.numerator}/"
                          f"{report.final_fraction.denominator}",
        "encoded_palette": report.encoded.palette,
        "best_trial": report.search.best_trial,
        "best_images": [int(x) for x in report.search.best.images],
    }
    return paths, 0 if report.certified_ok else 1, summary


def _flag(x: bool) -> Fraction:
    return Fraction(1 if x else 0)


def _write_pipeline_outputs(g, final, report, out: Path):
    write_graph(out / "graph.txt", g)
    for art in report.stages:
        write_coloring(out / f"stage{art.index}.coloring.txt", art.coloring)
        write_vertex_set(out / f"stage{art.index}.covered.set.txt", g, art.covered)
        write_vertex_set(out / f"stage{art.index}.class.set.txt", g, art.class_members)
    write_vertex_set(out / "stable.set.txt", g, report.stable_mask)
    write_vertex_set(out / "sparse.set.txt", g, report.sparse_mask)
    write_vertex_set(out / "certified.set.txt", g, report.certified_mask)
    write_coloring(out / "encoded.coloring.txt", report.encoded)
    write_coloring(out / "final.coloring.txt", final)

    report_path = out / "report.csv"
    header = ["stage", "palette", "budget_num", "budget_den",
              "covered_num", "covered_den", "covered_float",
              "class_index", "class_num", "class_den", "class_float",
              "repair_rounds", "covered_subset_ok", "coverage_bound_ok",
              "class_ok", "class_bound_ok", "domination_ok"]
    rows = []
    for art, check in zip(report.stages, report.stage_checks):
        rows.append([art.index, art.palette,
                     art.failure_budget.numerator, art.failure_budget.denominator,
                     *fraction_cells(art.covered_measure), art.class_index,
                     *fraction_cells(art.class_measure), art.repair_rounds,
                     int(check.covered_subset_ok), int(check.coverage_bound_ok),
                     int(check.class_ok), int(check.class_bound_ok),
                     int(check.domination_ok)])
    write_csv(report_path, header, rows)

    pipeline_path = out / "pipeline.csv"
    quantities = [
        ("stable_measure", report.stable_measure),
        ("sparse_measure", report.sparse_measure),
        ("good_measure", report.good_measure),
        ("certified_measure", report.certified_measure),
        ("stable_bound", report.stable_check.bound),
        ("stable_overlap", report.stable_check.overlap_measure),
        ("sparse_bound", report.sparse_check.bound),
        ("sparse_overlap", report.sparse_check.overlap_measure),
        ("final_fraction", report.final_fraction),
        ("certified_fraction", report.certified_fraction),
        ("best_fraction", report.search.best_fraction),
        ("encoded_palette", Fraction(report.encoded.palette)),
        ("best_trial", Fraction(report.search.best_trial)),
        ("growth_ok", _flag(report.growth.ok)),
        ("stable_check_ok", _flag(report.stable_check.ok)),
        ("sparse_check_ok", _flag(report.sparse_check.ok)),
        ("probative", _flag(report.probative)),
        ("certified_ok", _flag(report.certified_ok)),
    ]
    write_csv(pipeline_path, ["quantity", "value_num", "value_den", "value_float"],
              [[name, *fraction_cells(val)] for name, val in quantities])

    sensitivity_path = out / "sensitivity.csv"
    write_csv(sensitivity_path,
              ["n0", "t", "stable_num", "stable_den", "stable_float",
               "sparse_num", "sparse_den", "sparse_float"],
              [[row.tail_start, row.membership_cap,
                *fraction_cells(row.stable_measure),
                *fraction_cells(row.sparse_measure)]
               for row in report.sensitivity])

    trials_path = out / "trials.csv"
    trial_rows_csv(trials_path, report.search.rows)

    lines = [
        f"stages {report.stage_count} tail_start {report.tail_start} "
        f"membership_cap {report.membership_cap} target {report.target_palette} "
        f"trials {report.trials} seed {report.master_seed} law {report.law_kind}",
        f"graph: {g.vertex_count} vertices, max degree {g.max_degree}, "
        f"{g.component_count} components",
    ]
    for art, check in zip(report.stages, report.stage_checks):
        lines.append(
            f"stage {art.index}: palette {art.palette} covered {art.covered_measure} "
            f"(budget 1-{art.failure_budget}) class {art.class_index} "
            f"mass {art.class_measure} rounds {art.repair_rounds} "
            f"ok {check.ok}")
    lines += [
        f"stable {report.stable_measure} sparse {report.sparse_measure} "
        f"good {report.good_measure} certified {report.certified_measure}",
        f"stable bound {report.stable_check.bound} overlap "
        f"{report.stable_check.overlap_measure} ok {report.stable_check.ok}",
        f"sparse bound {report.sparse_check.bound} overlap "
        f"{report.sparse_check.overlap_measure} ok {report.sparse_check.ok}",
        f"growth ok {report.growth.ok} ({len(report.growth.failures)} failures)",
        f"encoded palette {report.encoded.palette}",
        f"best trial {report.search.best_trial} fraction "
        f"{report.search.best_fraction} ~ {float(report.search.best_fraction):.6f}",
        f"final fraction {report.final_fraction} ~ {float(report.final_fraction):.6f}",
        f"certified fraction {report.certified_fraction}",
        f"probative {report.probative} certified_ok {report.certified_ok}",
    ]
    (out / "summary.txt").write_text("\n".join(lines) + "\n")
    return [report_path, pipeline_path, sensitivity_path, trials_path]


def verify_artifacts(run_dir) -> bool:
    """Re-check every certified bound of a finished run from its files alone."""
    ok, _ = verify_artifacts_report(run_dir)
    return ok


def verify_artifacts_report(run_dir):
    """(ok, problems) — like verify_artifacts but naming each violation."""
    out = Path(run_dir)
    payload = json.loads((out / RECORD_NAME).read_text())
    config = parse_config(payload["config"])
    problems: list[str] = []
    if config.echo() != payload["config"]:
        problems.append("config echo does not round-trip")
    for p in payload["csv_paths"]:
        try:
            read_csv(p)
        except ValueError as e:
            problems.append(str(e))
    try:
        if config.operation == "pipeline" and (out / "graph.txt").exists():
            problems += _verify_pipeline_dir(out, config, payload)
        if config.operation == "edge-corollary" and (out / "edges.coloring.txt").exists():
            problems += _verify_edge_dir(out, config)
    except ValueError as e:
        # an artifact that no longer parses is a failed verification, not a crash
        problems.append(str(e))
    return not problems, problems


def _read_set_mask(g, path):
    _, idx = read_vertex_set(path)
    return _as_mask(g, idx)


def _verify_pipeline_dir(out: Path, config: ExperimentConfig, payload: dict):
    msgs: list[str] = []
    g = read_graph(out / "graph.txt")
    colorings, cov_masks, cls_masks = [], [], []
    for n in range(config.stages):
        k = 1 << n
        budget = Fraction(1, k)
        try:
            f = read_coloring(out / f"stage{n}.coloring.txt")
        except ValueError as e:
            msgs.append(f"stage {n}: invalid coloring: {e}")
            return msgs
        cov = _read_set_mask(g, out / f"stage{n}.covered.set.txt")
        cls = _read_set_mask(g, out / f"stage{n}.class.set.txt")
        if f.palette != k:
            msgs.append(f"stage {n}: palette {f.palette} instead of {k}")
        actual = covered_mask(g, f.colors, k)
        if (cov & ~actual).any():
            msgs.append(f"stage {n}: recorded covered set has uncovered vertices")
        if measure_of(g, cov) < 1 - budget:
            msgs.append(f"stage {n}: covered mass below 1 - {budget}")
        idx, members, mu = least_measure_class(g, f, k)
        if not np.array_equal(cls, _as_mask(g, members)):
            msgs.append(f"stage {n}: recorded lightest class differs from a recount")
        if measure_of(g, cls) > budget:
            msgs.append(f"stage {n}: lightest-class mass above {budget}")
        if not dominates(g, cls, cov):
            msgs.append(f"stage {n}: class does not dominate the covered set")
        colorings.append(f)
        cov_masks.append(cov)
        cls_masks.append(cls)

    stable = np.ones(g.vertex_count, dtype=bool)
    for cov in cov_masks[config.tail_start:]:
        stable &= cov
    if not np.array_equal(stable, _read_set_mask(g, out / "stable.set.txt")):
        msgs.append("stable set differs from the recount")
    counts = np.zeros(g.vertex_count, dtype=np.int64)
    for cls in cls_masks[config.tail_start + 1:]:
        counts += cls
    sparse = counts <= config.membership_cap
    if not np.array_equal(sparse, _read_set_mask(g, out / "sparse.set.txt")):
        msgs.append("sparse set differs from the recount")
    certified = ~_as_mask(g, saturate(g, ~(stable & sparse)))
    if not np.array_equal(certified, _read_set_mask(g, out / "certified.set.txt")):
        msgs.append("certified set differs from the recount")

    check = borel_cantelli_check([measure_of(g, ~c) for c in cov_masks],
                                 config.tail_start, 1, graph=g,
                                 sets=[~c for c in cov_masks])
    if not check.ok:
        msgs.append("stable-tail overlap exceeds its bound")
    check = borel_cantelli_check([measure_of(g, c) for c in cls_masks],
                                 config.tail_start + 1, config.membership_cap + 1,
                                 graph=g, sets=cls_masks)
    if not check.ok:
        msgs.append("class-tail overlap exceeds its bound")

    fsc = build_membership_coloring(g, cls_masks, domain=sparse)
    growth = spectrum_growth_check(g, fsc, certified, config.tail_start)
    if not growth.ok:
        msgs.append(f"growth check fails at {len(growth.failures)} certified vertices")
    encoded, _ = encode_finite_sets(fsc)
    stored = read_coloring(out / "encoded.coloring.txt")
    if stored.palette != encoded.palette or not np.array_equal(stored.colors, encoded.colors):
        msgs.append("encoded coloring differs from the recount")

    final = read_coloring(out / "final.coloring.txt")
    if final.palette != config.k:
        msgs.append(f"final palette {final.palette} instead of {config.k}")
    if final.colors[~certified].any():
        msgs.append("final coloring is not constant 0 off the certified region")
    images = payload.get("summary", {}).get("best_images")
    if images is not None:
        r = RecolorMap(encoded.palette, np.array(images, dtype=np.int64),
                       config.k, ("record",))
        expect = recolor(encoded, r).colors
        if not np.array_equal(final.colors[certified], expect[certified]):
            msgs.append("final coloring differs from the recorded best map")
    return msgs


def _verify_edge_dir(out: Path, config: ExperimentConfig):
    msgs: list[str] = []
    g = read_graph(out / "graph.txt")
    ec = read_edge_coloring(out / "edges.coloring.txt")
    if not np.array_equal(ec.edges, g.edge_list()):
        msgs.append("edge coloring edges differ from the graph's edge list")
    elif ec.proper and not verify_proper(ec):
        msgs.append("edge coloring claims properness but is not proper")
    return msgs
