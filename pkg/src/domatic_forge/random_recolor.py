"""Random recoloring: probability laws, exact coverage oracles, and search.

The central operator composes a coloring with a random map of its palette into
a small target palette.  All probability bookkeeping that feeds certified
bounds is exact rational arithmetic; floats appear only as convenience columns.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations

import numpy as np
import scipy.sparse as sp

from .colorings import VertexColoring, covered_mask, domatic_set
from .measured_graph import MeasuredGraph, measure_of
from .util import Stream, parallel_map, stream_label, substream


def geometric_pmf(n: int) -> Fraction:
    """Mass of the integer n under the dyadic law 1/2, 1/4, 1/8, ..."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    return Fraction(1, 2 ** (n + 1))


def cylinder_measure(s) -> Fraction:
    """Product-law mass of the cylinder fixing the finite prefix s."""
    s = [int(x) for x in s]
    if any(x < 0 for x in s):
        raise ValueError("prefix entries must be nonnegative")
    return Fraction(1, 2 ** (sum(s) + len(s)))


@dataclass(frozen=True)
class RecolorLaw:
    """A probability law on a finite target palette.

    `truncated_geometric_law` builds the dyadic law conditioned on staying
    below k (strictly decreasing masses); `uniform_law` the flat alternative.
    """

    pmf: tuple[Fraction, ...]
    kind: str = "custom"

    def __post_init__(self):
        if not self.pmf:
            raise ValueError("law needs a nonempty pmf")
        if any(p <= 0 for p in self.pmf):
            raise ValueError("pmf entries must be strictly positive")
        if sum(self.pmf, Fraction(0)) != 1:
            raise ValueError("pmf must sum to exactly 1")

    @property
    def target_count(self) -> int:
        return len(self.pmf)

    def cumulative_floats(self) -> np.ndarray:
        c = np.cumsum([float(p) for p in self.pmf])
        c[-1] = 1.0
        return c


def truncated_geometric_law(k: int) -> RecolorLaw:
    """The dyadic law renormalized onto 0..k-1 (not lumped into the last cell)."""
    if k < 1:
        raise ValueError("target palette must have at least one color")
    den = 2 ** k - 1
    pmf = tuple(Fraction(2 ** (k - 1 - c), den) for c in range(k))
    assert all(a > b for a, b in zip(pmf, pmf[1:]))
    return RecolorLaw(pmf, "geometric")


def uniform_law(k: int) -> RecolorLaw:
    if k < 1:
        raise ValueError("target palette must have at least one color")
    return RecolorLaw(tuple(Fraction(1, k) for _ in range(k)), "uniform")


def law_by_name(name: str, k: int) -> RecolorLaw:
    if name == "geometric":
        return truncated_geometric_law(k)
    if name == "uniform":
        return uniform_law(k)
    raise ValueError(f"unknown law {name!r} (expected geometric or uniform)")


@dataclass(frozen=True)
class RecolorMap:
    """A sampled map source palette -> target palette with its provenance."""

    source_palette: int
    images: np.ndarray
    target_count: int
    provenance: tuple

    def __post_init__(self):
        arr = np.asarray(self.images, dtype=np.int64)
        arr.setflags(write=False)
        object.__setattr__(self, "images", arr)
        if len(arr) != self.source_palette:
            raise ValueError("one image per source color required")
        if len(arr) and (arr.min() < 0 or arr.max() >= self.target_count):
            raise ValueError("image outside target palette")


def sample_recolor_map(law: RecolorLaw, source_palette: int, stream: Stream) -> RecolorMap:
    """Draw i.i.d. images for each source color from the law's pmf."""
    if source_palette < 1:
        raise ValueError("source palette must be nonempty")
    u = stream.gen.random(source_palette)
    images = np.searchsorted(law.cumulative_floats(), u, side="right")
    return RecolorMap(source_palette, images.astype(np.int64), law.target_count,
                      stream.seed_path)


def exact_coverage_probability(m: int, law: RecolorLaw) -> Fraction:
    """P(m i.i.d. draws from the law hit every target color), by inclusion-exclusion.

    Cost is 2^k terms for a k-color law, so keep k modest.
    """
    if m < 0:
        raise ValueError("m must be nonnegative")
    k = law.target_count
    if k > 24:
        raise ValueError("coverage oracle is exponential in the palette; k too large")
    total = Fraction(0)
    for size in range(k + 1):
        for miss in combinations(range(k), size):
            p_miss = sum((law.pmf[c] for c in miss), Fraction(0))
            total += (-1) ** size * (1 - p_miss) ** m
    return total


def miss_union_bound(m: int, law: RecolorLaw) -> Fraction:
    """Union bound on the probability that some target color is missed."""
    return sum(((1 - p) ** m for p in law.pmf), Fraction(0))


def recolor(f: VertexColoring, r: RecolorMap) -> VertexColoring:
    """Compose a coloring with a recolor map (errors if f leaves r's source palette)."""
    if len(f.colors) and int(f.colors.max()) >= r.source_palette:
        raise ValueError(f"coloring uses color {int(f.colors.max())} outside "
                         f"the map's source palette {r.source_palette}")
    return VertexColoring(r.images[f.colors], r.target_count)


def domatic_fraction(g: MeasuredGraph, f: VertexColoring, k: int) -> Fraction:
    """Exact measure of the set where f is k-domatic."""
    return measure_of(g, covered_mask(g, f.colors, k))


class SpectrumTable:
    """Sparse vertex-by-color incidence of neighborhood spectra.

    Recoloring pushes spectra forward through the map, so a trial's covered set
    is a sparse product instead of a fresh pass over the adjacency.
    """

    def __init__(self, g: MeasuredGraph, f: VertexColoring):
        self.graph = g
        palette = f.palette if f.palette is not None else int(f.colors.max(initial=0)) + 1
        self.palette = palette
        n = g.vertex_count
        nc = f.colors[g.indices]
        keys = np.unique(g.edge_sources * np.int64(palette) + nc)
        rows = (keys // palette).astype(np.int64)
        cols = (keys % palette).astype(np.int64)
        data = np.ones(len(keys), dtype=np.uint8)
        self.matrix = sp.csr_matrix((data, (rows, cols)), shape=(n, palette))
        self.sizes = np.bincount(rows, minlength=n)

    def covered(self, r: RecolorMap, k: int) -> np.ndarray:
        onehot = np.zeros((self.palette, k), dtype=np.uint8)
        visible = r.images[:self.palette] < k
        onehot[np.arange(self.palette)[visible], r.images[:self.palette][visible]] = 1
        counts = self.matrix @ onehot
        return np.asarray((counts > 0).all(axis=1)).ravel()


@dataclass(frozen=True)
class TrialRow:
    trial: int
    seed: str
    fraction: Fraction


@dataclass(frozen=True)
class SearchResult:
    best: RecolorMap
    best_trial: int
    best_fraction: Fraction
    rows: tuple[TrialRow, ...]


def search_recolor_maps(g: MeasuredGraph, f: VertexColoring, k: int, trials: int,
                        master_seed: int, *, law: RecolorLaw | None = None,
                        restrict=None, workers: int | None = None) -> SearchResult:
    """Best-of-T recoloring search.

    The stream for trial i is derived from (master_seed, i), so the outcome is
    identical for any worker count; ties break toward the lower trial index.
    When `restrict` is given, trials are ranked by the exact domatic mass inside
    that vertex set (its measure, not a ratio).
    """
    if trials < 1:
        raise ValueError("need at least one trial")
    the_law = law if law is not None else truncated_geometric_law(k)
    if the_law.target_count != k:
        raise ValueError("law palette must match the target k")
    table = SpectrumTable(g, f)
    if restrict is None:
        rmask = np.ones(g.vertex_count, dtype=bool)
    else:
        from .measured_graph import _as_mask
        rmask = _as_mask(g, restrict)

    def one(i: int):
        stream = substream(master_seed, "trial", i)
        r = sample_recolor_map(the_law, table.palette, stream)
        cov = table.covered(r, k) & rmask
        return r, TrialRow(i, stream_label(stream), measure_of(g, cov))

    results = parallel_map(one, range(trials), workers)
    best_i = 0
    for i in range(1, trials):
        if results[i][1].fraction > results[best_i][1].fraction:
            best_i = i
    best_map, best_row = results[best_i]
    return SearchResult(best_map, best_i, best_row.fraction,
                        tuple(row for _, row in results))


def recolor_edges(g: MeasuredGraph, ec, r: RecolorMap):
    """Compose an edge coloring with a recolor map; properness is re-verified."""
    from .colorings import EdgeColoring, verify_proper
    if len(ec.colors) and int(ec.colors.max()) >= r.source_palette:
        raise ValueError("edge coloring leaves the map's source palette")
    out = EdgeColoring(ec.edges, r.images[ec.colors], False, ec.vertex_count)
    return EdgeColoring(ec.edges, out.colors, verify_proper(out), ec.vertex_count)


def edge_coverage_fraction(g: MeasuredGraph, ec, k: int) -> Fraction:
    """Measure of vertices whose incident edges show every color in 0..k-1."""
    indptr, eids = ec.incidence
    cols = ec.colors[eids]
    n = g.vertex_count
    keep = cols < k
    src = np.repeat(np.arange(n, dtype=np.int64), np.diff(indptr))
    keys = np.unique(src[keep] * np.int64(k) + cols[keep])
    distinct = np.bincount((keys // k).astype(np.int64), minlength=n)
    return measure_of(g, distinct == k)
