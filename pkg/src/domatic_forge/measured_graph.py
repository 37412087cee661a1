"""Weighted vertex sets carried by weight-preserving permutations.

A graph here is a finite stand-in for a measured space acted on by a group:
vertices carry exact rational weights summing to one, and every generator is a
permutation that maps each vertex to a vertex of equal weight.  Adjacency is
derived, never stored independently: v is joined to sigma(v) and sigma^-1(v)
for every generator sigma, self-loops are dropped, and duplicates collapse.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from itertools import combinations, product

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .util import substream


def check_measure_preserving(perm, weights) -> bool:
    """True iff the permutation maps every vertex to one of equal weight."""
    perm = np.asarray(perm, dtype=np.int64)
    n = len(weights)
    if len(perm) != n:
        return False
    counts = np.bincount(perm, minlength=n)
    if len(counts) != n or not np.all(counts == 1):
        return False
    return all(weights[i] == weights[perm[i]] for i in range(n))


@dataclass(frozen=True)
class MeasuredGraph:
    """Immutable weighted graph with permutation generators and derived adjacency."""

    weights: tuple[Fraction, ...]
    generators: tuple[np.ndarray, ...]
    indptr: np.ndarray
    indices: np.ndarray

    @property
    def vertex_count(self) -> int:
        return len(self.weights)

    @cached_property
    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    @property
    def max_degree(self) -> int:
        return int(self.degrees.max()) if self.vertex_count else 0

    @cached_property
    def edge_sources(self) -> np.ndarray:
        """Source vertex of each directed adjacency slot (aligned with indices)."""
        return np.repeat(np.arange(self.vertex_count, dtype=np.int64), self.degrees)

    @cached_property
    def component_labels(self) -> np.ndarray:
        data = np.ones(len(self.indices), dtype=np.int8)
        mat = sp.csr_matrix((data, self.indices, self.indptr),
                            shape=(self.vertex_count, self.vertex_count))
        _, labels = connected_components(mat, directed=False)
        return labels

    @property
    def component_count(self) -> int:
        return int(self.component_labels.max()) + 1 if self.vertex_count else 0

    def neighborhood(self, v: int) -> np.ndarray:
        """Sorted distinct neighbors of v (v itself never appears)."""
        return self.indices[self.indptr[v]:self.indptr[v + 1]]

    def edge_list(self) -> np.ndarray:
        """Undirected edges as an (m, 2) array with u < v, in lexicographic order."""
        src = self.edge_sources
        keep = src < self.indices
        return np.column_stack([src[keep], self.indices[keep]])

    def uniform_weight_denominator(self) -> int | None:
        """n if all weights are exactly 1/n, else None (enables fast measure sums)."""
        n = self.vertex_count
        if n and all(w == Fraction(1, n) for w in self.weights):
            return n
        return None


def _adjacency_from_pairs(n: int, us: np.ndarray, vs: np.ndarray):
    """Dedup symmetric closure of directed pairs into CSR arrays (no self-loops)."""
    keep = us != vs
    us, vs = us[keep], vs[keep]
    allu = np.concatenate([us, vs])
    allv = np.concatenate([vs, us])
    keys = np.unique(allu.astype(np.int64) * n + allv.astype(np.int64))
    src = keys // n
    dst = (keys % n).astype(np.int64)
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])
    dst.setflags(write=False)
    indptr.setflags(write=False)
    return indptr, dst


def build_from_generators(weights, permutations) -> MeasuredGraph:
    """Build a graph from exact weights and weight-preserving permutations.

    Raises ValueError for a non-bijective permutation, a generator that moves
    weight between unequal vertices, or weights that do not sum to exactly 1.
    """
    ws = tuple(Fraction(w) for w in weights)
    n = len(ws)
    if n == 0:
        raise ValueError("graph needs at least one vertex")
    if any(w <= 0 for w in ws):
        raise ValueError("vertex weights must be positive")
    if sum(ws) != 1:
        raise ValueError(f"vertex weights must sum to exactly 1, got {sum(ws)}")
    gens = []
    for gi, perm in enumerate(permutations):
        arr = np.asarray(perm, dtype=np.int64)
        if len(arr) != n or len(np.unique(arr)) != n or arr.min() < 0 or arr.max() >= n:
            raise ValueError(f"generator {gi} is not a bijective permutation of the vertices")
        if not check_measure_preserving(arr, ws):
            raise ValueError(f"generator {gi} is not measure preserving: "
                             "it maps some vertex to one of different weight")
        arr.setflags(write=False)
        gens.append(arr)
    if gens:
        vs = np.concatenate([g for g in gens])
        us = np.tile(np.arange(n, dtype=np.int64), len(gens))
    else:
        us = vs = np.zeros(0, dtype=np.int64)
    indptr, dst = _adjacency_from_pairs(n, us, vs)
    return MeasuredGraph(ws, tuple(gens), indptr, dst)


def _matchings_from_edges(n: int, edges) -> list[np.ndarray]:
    """Greedy split of an edge set into matchings, each returned as an involution.

    Every finite graph decomposes into matchings, and each matching induces the
    permutation that swaps its endpoints and fixes everything else, so any
    explicit edge set can be realized inside the permutation-generator model.
    """
    slots: list[np.ndarray] = []
    busy: list[np.ndarray] = []
    for u, v in sorted((min(e), max(e)) for e in edges):
        if u == v:
            raise ValueError("self-loops are not allowed")
        placed = False
        for s in range(len(slots)):
            if not busy[s][u] and not busy[s][v]:
                slots[s][u], slots[s][v] = v, u
                busy[s][u] = busy[s][v] = True
                placed = True
                break
        if not placed:
            invol = np.arange(n, dtype=np.int64)
            invol[u], invol[v] = v, u
            flags = np.zeros(n, dtype=bool)
            flags[u] = flags[v] = True
            slots.append(invol)
            busy.append(flags)
    return slots


def build_from_edges(weights, edges) -> MeasuredGraph:
    """Build a graph from an explicit edge list (uniform-weight involutions).

    The edges are decomposed into matchings and each matching becomes an
    involution generator, so the result satisfies the same derived-adjacency
    contract as any generator-built graph.  All endpoint weights must be equal
    within each edge for the involutions to be measure preserving.
    """
    ws = tuple(Fraction(w) for w in weights)
    return build_from_generators(ws, _matchings_from_edges(len(ws), edges))


def make_random_regular(n: int, half_degree: int, seed: int) -> MeasuredGraph:
    """Uniform-weight graph on n vertices from half_degree random permutations."""
    if n < 2:
        raise ValueError("need at least 2 vertices")
    if half_degree < 1:
        raise ValueError("half_degree must be positive")
    rng = substream(seed, "graph", "random-regular").gen
    gens = [rng.permutation(n).astype(np.int64) for _ in range(half_degree)]
    w = Fraction(1, n)
    return build_from_generators([w] * n, gens)


def make_block_graph(blocks: int, n: int, half_degree: int, seed: int) -> MeasuredGraph:
    """Disjoint union of `blocks` independent random near-regular blocks.

    Each generator acts block-diagonally, so the result stays inside the
    permutation model while saturation arguments become non-trivial.
    """
    if blocks < 1:
        raise ValueError("need at least one block")
    if n < 2:
        raise ValueError("need at least 2 vertices per block")
    rng = substream(seed, "graph", "blocks").gen
    total = blocks * n
    gens = []
    for _ in range(half_degree):
        parts = [rng.permutation(n).astype(np.int64) + b * n for b in range(blocks)]
        gens.append(np.concatenate(parts))
    w = Fraction(1, total)
    return build_from_generators([w] * total, gens)


def make_torus_schreier(dims, generator_steps) -> MeasuredGraph:
    """Translation graph on a product of cyclic groups.

    Vertices are the points of Z_{d1} x ... x Z_{dr}; each step vector gives the
    translation permutation.  A step that reduces to the zero vector is rejected
    because it would contribute only self-loops.
    """
    dims = [int(d) for d in dims]
    if not dims or any(d < 1 for d in dims):
        raise ValueError("dims must be positive integers")
    n = int(np.prod(dims))
    grid = np.array(list(product(*(range(d) for d in dims))), dtype=np.int64).reshape(n, len(dims))
    gens = []
    for step in generator_steps:
        step = [int(s) for s in step]
        if len(step) != len(dims):
            raise ValueError("step vector length must match dims")
        if all(s % d == 0 for s, d in zip(step, dims)):
            raise ValueError(f"step {step} is zero modulo dims and would give only self-loops")
        shifted = (grid + np.asarray(step)) % np.asarray(dims)
        gens.append(np.ravel_multi_index(shifted.T, dims).astype(np.int64))
    w = Fraction(1, n)
    return build_from_generators([w] * n, gens)


def tail_graph_vertices(universe: int, length: int) -> list[tuple[int, ...]]:
    """Strictly increasing sequences of length 1..length, ordered by (length, lex)."""
    out: list[tuple[int, ...]] = []
    for ln in range(1, length + 1):
        out.extend(combinations(range(universe), ln))
    return out


def make_tail_graph(universe: int, length: int):
    """Suffix graph on short increasing sequences, plus its first-entry coloring.

    Vertices are strictly increasing sequences of length 1..length over
    {0..universe-1}; each sequence is joined to every proper nonempty suffix.
    Returns (graph, coloring) where the coloring paints each sequence with its
    least entry.  Requires universe > length >= 2.
    """
    if length < 2 or universe <= length:
        raise ValueError("need universe > length >= 2")
    verts = tail_graph_vertices(universe, length)
    index = {s: i for i, s in enumerate(verts)}
    edges = set()
    for s, i in index.items():
        for cut in range(1, len(s)):
            j = index[s[cut:]]
            edges.add((min(i, j), max(i, j)))
    n = len(verts)
    g = build_from_edges([Fraction(1, n)] * n, sorted(edges))
    colors = np.array([s[0] for s in verts], dtype=np.int64)
    from .colorings import VertexColoring  # local import to avoid a cycle
    return g, VertexColoring(colors, universe)


def _as_mask(g: MeasuredGraph, vertices) -> np.ndarray:
    if isinstance(vertices, np.ndarray) and vertices.dtype == bool:
        if len(vertices) != g.vertex_count:
            raise ValueError("boolean mask length must equal vertex count")
        return vertices
    mask = np.zeros(g.vertex_count, dtype=bool)
    idx = np.asarray(list(vertices) if not isinstance(vertices, np.ndarray) else vertices,
                     dtype=np.int64)
    if len(idx):
        if idx.min() < 0 or idx.max() >= g.vertex_count:
            raise ValueError("vertex index out of range")
        mask[idx] = True
    return mask


def neighborhood(g: MeasuredGraph, v: int) -> np.ndarray:
    """Sorted distinct neighbors of v."""
    return g.neighborhood(v)


def saturate(g: MeasuredGraph, vertices) -> np.ndarray:
    """Union of all connected components meeting the given vertex set."""
    mask = _as_mask(g, vertices)
    if not mask.any():
        return np.zeros(0, dtype=np.int64)
    labels = g.component_labels
    hit = np.zeros(g.component_count, dtype=bool)
    hit[np.unique(labels[mask])] = True
    return np.flatnonzero(hit[labels])


def measure_of(g: MeasuredGraph, vertices) -> Fraction:
    """Exact total weight of a vertex set."""
    mask = _as_mask(g, vertices)
    den = g.uniform_weight_denominator()
    if den is not None:
        return Fraction(int(mask.sum()), den)
    total = Fraction(0)
    for v in np.flatnonzero(mask):
        total += g.weights[int(v)]
    return total
