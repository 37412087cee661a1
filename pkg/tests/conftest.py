"""Shared fixtures: tiny graph builders and slow brute-force oracles that the
tests trust instead of the library's own fast paths."""

from __future__ import annotations

from fractions import Fraction
from itertools import combinations, product

import numpy as np
import pytest

from domatic_forge import VertexColoring, build_from_edges


def uniform_weights(n: int) -> list[Fraction]:
    return [Fraction(1, n)] * n


def complete_graph(n: int):
    return build_from_edges(uniform_weights(n),
                            [(u, v) for u, v in combinations(range(n), 2)])


def cycle_graph(n: int):
    return build_from_edges(uniform_weights(n),
                            [(i, (i + 1) % n) for i in range(n)])


def path_graph(n: int):
    return build_from_edges(uniform_weights(n),
                            [(i, i + 1) for i in range(n - 1)])


def neighbor_sets(g) -> list[set[int]]:
    return [set(int(u) for u in g.indices[g.indptr[v]:g.indptr[v + 1]])
            for v in range(g.vertex_count)]


def brute_covered(g, colors, k) -> list[bool]:
    """Coverage by literal set comparison, one python loop per vertex."""
    nbrs = neighbor_sets(g)
    need = set(range(k))
    return [need <= {int(colors[u]) for u in nbrs[v]}
            for v in range(g.vertex_count)]


def brute_coverage_probability(m: int, pmf) -> Fraction:
    """Probability that m independent pmf-draws hit every index, by
    enumerating all len(pmf)**m outcome tuples."""
    k = len(pmf)
    total = Fraction(0)
    for outcome in product(range(k), repeat=m):
        if set(outcome) == set(range(k)):
            p = Fraction(1)
            for c in outcome:
                p *= pmf[c]
            total += p
    return total


def brute_least_class(g, f, k):
    """(index, measure) of the lightest color class, ties to the least index."""
    best = None
    for c in range(k):
        mu = sum((g.weights[v] for v in range(g.vertex_count)
                  if int(f.colors[v]) == c), Fraction(0))
        if best is None or mu < best[1]:
            best = (c, mu)
    return best


def coloring_of(colors, palette) -> VertexColoring:
    return VertexColoring(np.array(colors, dtype=np.int64), palette)


@pytest.fixture(scope="session")
def k4():
    return complete_graph(4)


@pytest.fixture(scope="session")
def c5():
    return cycle_graph(5)
