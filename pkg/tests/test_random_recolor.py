"""Recoloring laws, exact coverage oracle, best-of-T search, edge recoloring."""

from fractions import Fraction
from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from domatic_forge import (RecolorLaw, RecolorMap, cylinder_measure,
                           domatic_fraction, exact_coverage_probability,
                           geometric_pmf, law_by_name, miss_union_bound,
                           proper_edge_coloring, recolor, recolor_edges,
                           sample_recolor_map, search_recolor_maps, substream,
                           truncated_geometric_law, uniform_law)
from domatic_forge.random_recolor import SpectrumTable, edge_coverage_fraction

from conftest import (brute_covered, brute_coverage_probability, coloring_of,
                      complete_graph, cycle_graph)


def test_geometric_pmf_values():
    assert geometric_pmf(0) == Fraction(1, 2)
    assert geometric_pmf(3) == Fraction(1, 16)
    assert sum(geometric_pmf(n) for n in range(20)) == 1 - Fraction(1, 2 ** 20)


def test_cylinder_measure_values():
    assert cylinder_measure(()) == 1
    assert cylinder_measure((0,)) == Fraction(1, 2)
    assert cylinder_measure((1, 2)) == Fraction(1, 32)


def test_cylinder_measures_tile_the_space():
    # over all length-2 prefixes with entries < B the masses approach 1
    b = 12
    total = sum(cylinder_measure(s) for s in product(range(b), repeat=2))
    assert total == (1 - Fraction(1, 2 ** b)) ** 2


def test_law_validation():
    with pytest.raises(ValueError):
        RecolorLaw((Fraction(1, 2), Fraction(1, 3)))
    with pytest.raises(ValueError):
        RecolorLaw((Fraction(3, 2), Fraction(-1, 2)))
    law = RecolorLaw((Fraction(1, 4), Fraction(3, 4)))
    assert law.target_count == 2 and law.kind == "custom"


def test_truncated_geometric_law_values():
    law = truncated_geometric_law(3)
    assert law.pmf == (Fraction(4, 7), Fraction(2, 7), Fraction(1, 7))
    assert law.kind == "geometric"
    assert truncated_geometric_law(1).pmf == (Fraction(1),)
    with pytest.raises(ValueError):
        truncated_geometric_law(0)


def test_uniform_law_and_lookup():
    assert uniform_law(4).pmf == (Fraction(1, 4),) * 4
    assert law_by_name("geometric", 2) == truncated_geometric_law(2)
    assert law_by_name("uniform", 3) == uniform_law(3)
    with pytest.raises(ValueError):
        law_by_name("zipf", 2)


def test_cumulative_floats_end_exactly_at_one():
    c = truncated_geometric_law(5).cumulative_floats()
    assert c[-1] == 1.0 and len(c) == 5
    assert all(c[i] < c[i + 1] for i in range(4))


def test_sample_recolor_map_shape_and_determinism():
    law = truncated_geometric_law(3)
    a = sample_recolor_map(law, 7, substream(11, "x"))
    b = sample_recolor_map(law, 7, substream(11, "x"))
    c = sample_recolor_map(law, 7, substream(12, "x"))
    assert np.array_equal(a.images, b.images)
    assert len(a.images) == 7 and a.target_count == 3
    assert a.images.min() >= 0 and a.images.max() < 3
    assert a.provenance == (11, "x")
    assert not np.array_equal(a.images, c.images)


def test_sample_frequencies_track_the_pmf():
    law = truncated_geometric_law(2)  # p0 = 2/3
    r = sample_recolor_map(law, 20_000, substream(5, "freq"))
    share = float(np.mean(r.images == 0))
    assert abs(share - 2 / 3) < 0.02


@pytest.mark.parametrize("k", [1, 2, 3])
@pytest.mark.parametrize("m", [0, 1, 2, 4, 6])
@pytest.mark.parametrize("name", ["geometric", "uniform"])
def test_exact_coverage_matches_enumeration(k, m, name):
    law = law_by_name(name, k)
    assert exact_coverage_probability(m, law) == \
        brute_coverage_probability(m, law.pmf)


def test_coverage_edge_cases():
    law = truncated_geometric_law(3)
    assert exact_coverage_probability(2, law) == 0  # m < k cannot cover
    assert exact_coverage_probability(0, truncated_geometric_law(1)) == 0
    assert exact_coverage_probability(1, truncated_geometric_law(1)) == 1
    with pytest.raises(ValueError):
        exact_coverage_probability(-1, law)
    with pytest.raises(ValueError, match="k too large"):
        exact_coverage_probability(30, uniform_law(25))


@pytest.mark.parametrize("name", ["geometric", "uniform"])
def test_coverage_monotone_in_draws(name):
    law = law_by_name(name, 3)
    vals = [exact_coverage_probability(m, law) for m in range(3, 12)]
    assert all(a < b for a, b in zip(vals, vals[1:]))


@pytest.mark.parametrize("m", [2, 5, 9])
def test_union_bound_dominates_miss_probability(m):
    for k in (2, 3, 4):
        law = truncated_geometric_law(k)
        miss = 1 - exact_coverage_probability(m, law)
        assert miss <= miss_union_bound(m, law)


def test_recolor_is_composition():
    f = coloring_of([0, 2, 1, 2], 3)
    r = RecolorMap(3, np.array([1, 0, 1]), 2, ("t",))
    out = recolor(f, r)
    assert out.colors.tolist() == [1, 1, 0, 1]
    assert out.palette == 2


def test_recolor_rejects_palette_escape():
    f = coloring_of([0, 5], 6)
    r = RecolorMap(3, np.array([0, 1, 0]), 2, ("t",))
    with pytest.raises(ValueError, match="source palette"):
        recolor(f, r)


def test_recolor_map_validation():
    with pytest.raises(ValueError):
        RecolorMap(2, np.array([0, 1, 1]), 2, ())
    with pytest.raises(ValueError):
        RecolorMap(2, np.array([0, 2]), 2, ())


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 6), st.integers(1, 3), st.integers(0, 2 ** 30))
def test_spectrum_table_matches_direct_recolor(n, k, seed):
    g = cycle_graph(n) if n > 2 else complete_graph(2)
    base = coloring_of(list(range(n)), n)
    table = SpectrumTable(g, base)
    r = sample_recolor_map(truncated_geometric_law(k), n, substream(seed, "st"))
    got = table.covered(r, k)
    expect = brute_covered(g, recolor(base, r).colors, k)
    assert got.tolist() == expect


def test_domatic_fraction_counts_measure(c5):
    f = coloring_of([0, 1, 0, 1, 0], 2)
    assert domatic_fraction(c5, f, 2) == Fraction(2, 5)


def test_search_best_of_t_on_complete_graph():
    g = complete_graph(8)
    base = coloring_of(list(range(8)), 8)
    res = search_recolor_maps(g, base, 2, trials=32, master_seed=77)
    assert res.best_fraction == 1
    assert len(res.rows) == 32
    assert res.best_fraction == max(r.fraction for r in res.rows)
    assert res.rows[res.best_trial].fraction == res.best_fraction
    # first index attaining the maximum wins
    first = min(i for i, r in enumerate(res.rows) if r.fraction == res.best_fraction)
    assert res.best_trial == first
    assert res.rows[3].seed == "77:trial:3"


def test_search_is_worker_invariant():
    g = complete_graph(6)
    base = coloring_of(list(range(6)), 6)
    a = search_recolor_maps(g, base, 2, 16, 5, workers=1)
    b = search_recolor_maps(g, base, 2, 16, 5, workers=3)
    assert a.best_trial == b.best_trial
    assert [r.fraction for r in a.rows] == [r.fraction for r in b.rows]
    assert np.array_equal(a.best.images, b.best.images)


def test_search_restrict_scores_inside_the_region(c5):
    base = coloring_of(list(range(5)), 5)
    restrict = np.array([True, True, False, False, False])
    res = search_recolor_maps(c5, base, 1, 4, 9, restrict=restrict)
    # with k=1 every vertex with a neighbor is covered, so each trial scores
    # exactly the measure of the restricted region
    assert all(r.fraction == Fraction(2, 5) for r in res.rows)


def test_search_rejects_mismatched_law():
    g = complete_graph(3)
    base = coloring_of([0, 1, 2], 3)
    with pytest.raises(ValueError, match="law palette"):
        search_recolor_maps(g, base, 2, 4, 1, law=truncated_geometric_law(3))


def test_recolor_edges_reverifies_properness(k4):
    ec = proper_edge_coloring(k4)
    source = int(ec.colors.max()) + 1
    collapse = RecolorMap(source, np.zeros(source, dtype=np.int64), 1, ())
    out = recolor_edges(k4, ec, collapse)
    assert not out.proper  # all edges now share color 0 on a triangle-rich graph
    keep = RecolorMap(source, np.arange(source), source, ())
    assert recolor_edges(k4, ec, keep).proper


def test_edge_coverage_fraction_counts_incident_colors(k4):
    ec = proper_edge_coloring(k4)
    # a proper coloring of K4 uses 3 colors and every vertex meets all of them
    assert edge_coverage_fraction(k4, ec, 3) == 1
    assert edge_coverage_fraction(k4, ec, int(ec.colors.max()) + 2) == 0
