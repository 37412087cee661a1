"""Vertex and edge colorings, spectra, domatic sets, and class measures."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

import numpy as np

from .measured_graph import MeasuredGraph, measure_of


@dataclass(frozen=True)
class VertexColoring:
    """A total coloring of the vertices; palette is an optional declared bound."""

    colors: np.ndarray
    palette: int | None = None

    def __post_init__(self):
        arr = np.asarray(self.colors, dtype=np.int64)
        arr.setflags(write=False)
        object.__setattr__(self, "colors", arr)
        if len(arr) and arr.min() < 0:
            raise ValueError("colors must be nonnegative")
        if self.palette is not None:
            if self.palette < 1:
                raise ValueError("palette must be positive when declared")
            if len(arr) and arr.max() >= self.palette:
                raise ValueError(f"color {arr.max()} outside declared palette {self.palette}")

    def __len__(self):
        return len(self.colors)


@dataclass(frozen=True)
class EdgeColoring:
    """Colors on undirected edges (u < v, lexicographic); `proper` records
    whether a verification pass certified that no two incident edges share a color."""

    edges: np.ndarray
    colors: np.ndarray
    proper: bool
    vertex_count: int

    def __post_init__(self):
        e = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        c = np.asarray(self.colors, dtype=np.int64)
        if len(e) != len(c):
            raise ValueError("one color per edge required")
        e.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, "edges", e)
        object.__setattr__(self, "colors", c)

    @cached_property
    def incidence(self):
        """(indptr, edge_ids) giving the edges incident to each vertex."""
        n = self.vertex_count
        ends = np.concatenate([self.edges[:, 0], self.edges[:, 1]])
        eids = np.tile(np.arange(len(self.edges), dtype=np.int64), 2)
        order = np.argsort(ends, kind="stable")
        ends, eids = ends[order], eids[order]
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(ends, minlength=n), out=indptr[1:])
        return indptr, eids


def spectrum(g: MeasuredGraph, f: VertexColoring, v: int) -> set[int]:
    """The set of colors painted on the neighborhood of v."""
    return set(int(c) for c in f.colors[g.neighborhood(v)])


def _neighbor_color_keys(g: MeasuredGraph, colors: np.ndarray, palette: int):
    """Distinct (vertex, neighbor-color) keys for colors below `palette`."""
    nc = colors[g.indices]
    keep = nc < palette
    keys = g.edge_sources[keep] * np.int64(palette) + nc[keep]
    return np.unique(keys)


def covered_mask(g: MeasuredGraph, colors: np.ndarray, k: int) -> np.ndarray:
    """Boolean mask of vertices whose neighborhood shows every color in 0..k-1."""
    n = g.vertex_count
    if k < 1:
        raise ValueError("k must be positive")
    nc = colors[g.indices]
    keep = nc < k
    if n * k <= 1 << 26:
        # dense bincount path: fast for the small palettes the pipeline uses
        keys = g.edge_sources[keep] * np.int64(k) + nc[keep]
        counts = np.bincount(keys, minlength=n * k).reshape(n, k)
        return (counts > 0).all(axis=1)
    keys = np.unique(g.edge_sources[keep] * np.int64(k) + nc[keep])
    distinct = np.bincount((keys // k).astype(np.int64), minlength=n)
    return distinct == k


def spectrum_sizes(g: MeasuredGraph, f: VertexColoring) -> np.ndarray:
    """Number of distinct colors seen from each vertex."""
    palette = f.palette if f.palette is not None else int(f.colors.max(initial=0)) + 1
    keys = _neighbor_color_keys(g, f.colors, palette)
    return np.bincount((keys // palette).astype(np.int64), minlength=g.vertex_count)


def domatic_set(g: MeasuredGraph, f: VertexColoring, k: int) -> np.ndarray:
    """Vertices at which f is k-domatic: the spectrum contains all of 0..k-1."""
    return np.flatnonzero(covered_mask(g, f.colors, k))


def least_measure_class(g: MeasuredGraph, f: VertexColoring, k: int):
    """(class index, vertex set, exact measure) of the lightest color class.

    All classes 0..k-1 compete, including empty ones; ties go to the least
    color index.  The winner's measure is at most 1/k by pigeonhole.
    """
    if k < 1:
        raise ValueError("k must be positive")
    acc = [Fraction(0)] * k
    den = g.uniform_weight_denominator()
    if den is not None:
        counts = np.bincount(f.colors[f.colors < k], minlength=k)
        acc = [Fraction(int(c), den) for c in counts]
    else:
        for v, c in enumerate(f.colors):
            if c < k:
                acc[int(c)] += g.weights[v]
    best = min(range(k), key=lambda c: (acc[c], c))
    members = np.flatnonzero(f.colors == best)
    return best, members, acc[best]


def dominates(g: MeasuredGraph, dominating, covered) -> bool:
    """True iff every vertex of `covered` has at least one neighbor in `dominating`."""
    from .measured_graph import _as_mask
    dmask = _as_mask(g, dominating)
    cmask = _as_mask(g, covered)
    hits = dmask[g.indices]
    seen = np.bincount(g.edge_sources[hits], minlength=g.vertex_count) > 0
    return bool(np.all(seen[cmask]))


def proper_edge_coloring(g: MeasuredGraph) -> EdgeColoring:
    """Greedy proper edge coloring: scan edges lexicographically and give each
    the least color absent at both endpoints.  Uses at most 2*maxdeg - 1 colors;
    a verification pass certifies properness before the flag is set."""
    edges = g.edge_list()
    used = [0] * g.vertex_count  # per-vertex color bitmask
    colors = np.zeros(len(edges), dtype=np.int64)
    for i, (u, v) in enumerate(edges):
        taken = used[u] | used[v]
        c = ((~taken) & (taken + 1)).bit_length() - 1  # lowest absent color
        colors[i] = c
        used[u] |= 1 << c
        used[v] |= 1 << c
    ec = EdgeColoring(edges, colors, False, g.vertex_count)
    return EdgeColoring(edges, colors, verify_proper(ec), g.vertex_count)


def verify_proper(ec: EdgeColoring) -> bool:
    """Check that no vertex has two incident edges of equal color."""
    indptr, eids = ec.incidence
    cols = ec.colors[eids]
    for v in range(ec.vertex_count):
        seg = cols[indptr[v]:indptr[v + 1]]
        if len(np.unique(seg)) != len(seg):
            return False
    return True


def edge_spectrum(g: MeasuredGraph, ec: EdgeColoring, v: int) -> set[int]:
    """The set of colors on edges incident to v."""
    indptr, eids = ec.incidence
    return set(int(c) for c in ec.colors[eids[indptr[v]:indptr[v + 1]]])


def vertices_with_spectrum_at_least(g: MeasuredGraph, f: VertexColoring, t: int) -> np.ndarray:
    """Vertices that see at least t distinct colors in their neighborhood."""
    return np.flatnonzero(spectrum_sizes(g, f) >= t)


def coloring_measure_report(g: MeasuredGraph, f: VertexColoring, k: int):
    """Per-vertex spectrum sizes and the exact k-domatic fraction."""
    sizes = spectrum_sizes(g, f)
    frac = measure_of(g, covered_mask(g, f.colors, k))
    return sizes, frac
