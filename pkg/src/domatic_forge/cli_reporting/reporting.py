"""CSV emission and the seeded Monte Carlo drivers used by the experiment
suite.  Every rational lands in CSV as numerator/denominator plus a float
convenience column, and every driver chunks its work on fixed boundaries so
output is byte-identical for any worker count."""

from __future__ import annotations

import math
from fractions import Fraction
from pathlib import Path

import numpy as np

from ..colorings import VertexColoring
from ..measured_graph import make_torus_schreier
from ..random_recolor import (RecolorLaw, domatic_fraction,
                              exact_coverage_probability, law_by_name,
                              miss_union_bound, recolor, sample_recolor_map,
                              truncated_geometric_law)
from ..util import parallel_map, stream_label, substream


def fraction_cells(x: Fraction) -> tuple[str, str, str]:
    """(numerator, denominator, float) columns for an exact rational."""
    return str(x.numerator), str(x.denominator), repr(float(x))


def write_csv(path, header, rows):
    """Write rows of pre-stringified cells; plain joins keep the bytes stable."""
    lines = [",".join(header)]
    for row in rows:
        cells = [c if isinstance(c, str) else str(c) for c in row]
        if any("," in c or "\n" in c for c in cells):
            raise ValueError("CSV cells must not contain separators")
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n")


def read_csv(path):
    """(header, rows) of a CSV written by write_csv; ragged rows are errors."""
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise ValueError(f"{path}: empty CSV")
    header = lines[0].split(",")
    rows = [line.split(",") for line in lines[1:]]
    for row in rows:
        if len(row) != len(header):
            raise ValueError(f"{path}: row width differs from header")
    return header, rows


def sample_coverage_hits(law: RecolorLaw, m: int, trials: int, master_seed: int,
                         *, chunk: int = 1000, workers: int | None = None) -> int:
    """How many of `trials` batches of m draws from the law hit every color.

    Work is split at fixed chunk boundaries keyed into the master seed, so the
    count is identical however many workers evaluate the chunks.
    """
    k = law.target_count
    cum = law.cumulative_floats()
    starts = list(range(0, trials, chunk))

    def one(start: int) -> int:
        size = min(chunk, trials - start)
        stream = substream(master_seed, "mc", k, m, start)
        u = stream.gen.random((size, m))
        imgs = np.searchsorted(cum, u, side="right")
        rows = np.repeat(np.arange(size, dtype=np.int64), m)
        counts = np.bincount(rows * k + imgs.ravel(), minlength=size * k)
        return int((counts.reshape(size, k) > 0).all(axis=1).sum())

    return sum(parallel_map(one, starts, workers))


def write_coverage_mc_csv(path, pairs, trials: int, master_seed: int, *,
                          law_kind: str = "geometric", workers: int | None = None):
    """One row per (k, m): exact coverage, empirical frequency, 4-sigma radius.

    Returns the rows as (k, m, exact, hits) tuples for callers that assert on
    them besides writing the CSV.
    """
    header = ["k", "m", "law", "trials", "hits", "empirical",
              "exact_num", "exact_den", "exact_float", "radius4"]
    out_rows, results = [], []
    for k, m in pairs:
        law = law_by_name(law_kind, k)
        q = exact_coverage_probability(m, law)
        hits = sample_coverage_hits(law, m, trials, master_seed, workers=workers)
        qf = float(q)
        radius = 4.0 * math.sqrt(qf * (1.0 - qf) / trials)
        out_rows.append([k, m, law_kind, trials, hits, repr(hits / trials),
                         *fraction_cells(q), repr(radius)])
        results.append((k, m, q, hits))
    write_csv(path, header, out_rows)
    return results


def write_coverage_trend_csv(path, spectrum_sizes, k: int, n: int, seeds,
                             master_seed: int, *, workers: int | None = None):
    """Single-trial non-domatic fractions on rings whose every vertex sees
    exactly m distinct colors, for m in `spectrum_sizes`, one trial per seed.

    The base graph for m is the circulant on n vertices with steps 1..m/2 and
    an all-distinct coloring, so each spectrum is exactly the m neighbors.
    Returns {m: (mean non-domatic fraction, union bound)} and writes one CSV
    row per (m, seed) plus one summary row per m.
    """
    law = truncated_geometric_law(k)
    seeds = list(seeds)
    graphs = {}
    for m in spectrum_sizes:
        if m % 2 or not 0 < m < n:
            raise ValueError("spectrum sizes must be even and below the ring size")
        graphs[m] = make_torus_schreier([n], [[s] for s in range(1, m // 2 + 1)])
    base = VertexColoring(np.arange(n, dtype=np.int64), n)

    def one(pair):
        m, seed = pair
        stream = substream(master_seed, "trend", m, seed)
        r = sample_recolor_map(law, n, stream)
        frac = 1 - domatic_fraction(graphs[m], recolor(base, r), k)
        return m, seed, stream_label(stream), frac

    pairs = [(m, s) for m in spectrum_sizes for s in seeds]
    rows = parallel_map(one, pairs, workers)
    header = ["m", "seed", "stream", "kind",
              "value_num", "value_den", "value_float"]
    out_rows = [[m, s, label, "nondomatic", *fraction_cells(frac)]
                for m, s, label, frac in rows]
    summary = {}
    for m in spectrum_sizes:
        mean = sum((fr for mm, _, _, fr in rows if mm == m), Fraction(0)) / len(seeds)
        bound = miss_union_bound(m, law)
        summary[m] = (mean, bound)
        out_rows.append([m, "all", "-", "mean", *fraction_cells(mean)])
        out_rows.append([m, "all", "-", "union_bound", *fraction_cells(bound)])
    write_csv(path, header, out_rows)
    return summary
