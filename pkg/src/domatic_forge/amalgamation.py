"""Stage amalgamation: a ladder of supplied colorings with doubling palettes,
exact overlap accounting, stage-membership sets packed as bitmasks, a
component-closed certified region, and a final recoloring search on it.

All certified quantities (coverage masses, lightest-class masses, overlap
bounds) are exact rationals; nothing certified passes through a float.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .colorings import VertexColoring, covered_mask, dominates, least_measure_class
from .measured_graph import MeasuredGraph, _as_mask, measure_of, saturate
from .random_recolor import (RecolorLaw, SearchResult, recolor,
                             search_recolor_maps, truncated_geometric_law)
from .util import Stream, popcounts, segment_max, segment_or, substream

MAX_STAGES = 62  # membership sets are packed into a single signed 64-bit lane


class SupplierFailure(RuntimeError):
    """A stage supplier could not push coverage above its target."""

    def __init__(self, message: str, *, palette: int, rounds: int,
                 achieved: Fraction, bad_count: int):
        super().__init__(message)
        self.palette = palette
        self.rounds = rounds
        self.achieved = achieved
        self.bad_count = bad_count


def _color_counts(g: MeasuredGraph, colors: np.ndarray, k: int) -> np.ndarray:
    """counts[v, c] = how many neighbors of v carry color c."""
    keys = g.edge_sources * np.int64(k) + colors[g.indices]
    counts = np.bincount(keys, minlength=g.vertex_count * k)
    return counts.reshape(g.vertex_count, k)


def _repair_pass(g: MeasuredGraph, colors: np.ndarray, counts: np.ndarray,
                 k: int, bad: np.ndarray, probe_cap: int = 16) -> int:
    """One repair sweep in vertex order; returns how many donors were flipped.

    For each uncovered vertex and each missing color (ascending), candidate
    donors are neighbors whose current color appears at least twice in that
    neighborhood, so the flip cannot take a color away from the vertex being
    repaired.  Among the first `probe_cap` candidates the sweep flips one whose
    old color stays represented around every one of its own neighbors (zero
    collateral damage) when such a donor exists, else the least damaging one;
    without this the damage per flip exceeds one new uncovered vertex on large
    palettes and sweeps plateau instead of converging.
    """
    changed = 0
    for v in bad:
        neigh = g.neighborhood(v)
        for c in range(k):
            if counts[v, c]:
                continue
            donors = neigh[counts[v, colors[neigh]] >= 2]
            if len(donors) == 0:
                continue
            best_u, best_damage = -1, None
            for u in donors[:probe_cap]:
                u = int(u)
                old = int(colors[u])
                damage = int(np.count_nonzero(
                    counts[g.neighborhood(u), old] == 1))
                if best_damage is None or damage < best_damage:
                    best_u, best_damage = u, damage
                    if damage == 0:
                        break
            u = best_u
            old = int(colors[u])
            nu = g.neighborhood(u)
            counts[nu, old] -= 1
            counts[nu, c] += 1
            colors[u] = c
            changed += 1
    return changed


def supply_domatic_coloring(g: MeasuredGraph, k: int, stream: Stream, *,
                            max_failure: Fraction, max_rounds: int = 64,
                            settle: bool = True):
    """Random k-coloring plus local repair sweeps.

    Returns (coloring, covered mask, rounds used), where the mask marks the
    vertices whose neighborhood shows all k colors.  With `settle` (the
    default) sweeps continue until no vertex is uncovered or progress stalls;
    without it they stop as soon as the uncovered mass is within `max_failure`.
    Either way, SupplierFailure is raised if the uncovered mass still exceeds
    `max_failure` when sweeps run out.
    """
    if k < 1:
        raise ValueError("palette must have at least one color")
    colors = stream.gen.integers(0, k, size=g.vertex_count).astype(np.int64)
    if k > g.max_degree:
        raise SupplierFailure(
            f"no neighborhood can show {k} colors on a graph of max degree "
            f"{g.max_degree}", palette=k, rounds=0, achieved=Fraction(0),
            bad_count=g.vertex_count)
    counts = _color_counts(g, colors, k)
    rounds = 0
    stalled = False
    while True:
        cov = counts.min(axis=1) > 0
        bad = np.flatnonzero(~cov)
        bad_measure = measure_of(g, ~cov)
        target_met = bad_measure <= max_failure
        if len(bad) == 0 or (target_met and not settle):
            break
        if rounds >= max_rounds or stalled:
            if target_met:
                break
            raise SupplierFailure(
                f"uncovered mass {bad_measure} exceeds budget {max_failure} "
                f"after {rounds} repair sweeps ({len(bad)} vertices, palette {k})",
                palette=k, rounds=rounds, achieved=1 - bad_measure,
                bad_count=len(bad))
        rounds += 1
        stalled = _repair_pass(g, colors, counts, k, bad) == 0
    return VertexColoring(colors, k), cov, rounds


@dataclass(frozen=True)
class StageArtifact:
    """One ladder stage: palette 2^n, failure budget 2^-n, and its records."""

    index: int
    palette: int
    failure_budget: Fraction
    coloring: VertexColoring
    covered: np.ndarray
    covered_measure: Fraction
    class_index: int
    class_members: np.ndarray
    class_measure: Fraction
    repair_rounds: int


@dataclass(frozen=True)
class StageCheck:
    """Recomputed certificates for one stage artifact."""

    index: int
    covered_subset_ok: bool   # recorded set really is covered by the coloring
    coverage_bound_ok: bool   # covered mass >= 1 - failure budget, exactly
    class_ok: bool            # recorded lightest class matches a recount
    class_bound_ok: bool      # lightest-class mass <= failure budget, exactly
    domination_ok: bool       # every covered vertex has a neighbor in the class

    @property
    def ok(self) -> bool:
        return (self.covered_subset_ok and self.coverage_bound_ok
                and self.class_ok and self.class_bound_ok and self.domination_ok)


def verify_stage(g: MeasuredGraph, art: StageArtifact) -> StageCheck:
    """Re-derive every certified bound of a stage from its raw artifacts."""
    cov = covered_mask(g, art.coloring.colors, art.palette)
    recorded = _as_mask(g, art.covered)
    covered_subset_ok = not bool((recorded & ~cov).any())
    coverage_bound_ok = measure_of(g, recorded) >= 1 - art.failure_budget
    idx, members, mu = least_measure_class(g, art.coloring, art.palette)
    class_ok = (idx == art.class_index
                and bool(np.array_equal(_as_mask(g, members), _as_mask(g, art.class_members)))
                and mu == art.class_measure)
    class_bound_ok = art.class_measure <= art.failure_budget
    domination_ok = dominates(g, art.class_members, recorded)
    return StageCheck(art.index, covered_subset_ok, coverage_bound_ok,
                      class_ok, class_bound_ok, domination_ok)


@dataclass(frozen=True)
class BorelCantelliCheck:
    """Markov bound on the mass of points lying in >= threshold of a tail family."""

    bound: Fraction
    threshold: int
    tail_start: int
    overlap_measure: Fraction | None
    ok: bool


def borel_cantelli_check(measures, tail_start: int, threshold: int, *,
                         graph: MeasuredGraph | None = None, sets=None) -> BorelCantelliCheck:
    """bound = (sum of measures from tail_start on) / threshold.

    When the family of sets is supplied (indexed like `measures`), the mass of
    points lying in at least `threshold` of the tail sets is measured exactly
    and compared against the bound.
    """
    if threshold < 1:
        raise ValueError("threshold must be at least 1")
    measures = [Fraction(m) for m in measures]
    if not 0 <= tail_start <= len(measures):
        raise ValueError("tail start outside the measure list")
    bound = sum(measures[tail_start:], Fraction(0)) / threshold
    overlap = None
    ok = True
    if sets is not None:
        if graph is None:
            raise ValueError("measuring overlaps requires the graph")
        counts = np.zeros(graph.vertex_count, dtype=np.int64)
        for s in list(sets)[tail_start:]:
            counts += _as_mask(graph, s)
        overlap = measure_of(graph, counts >= threshold)
        ok = overlap <= bound
    return BorelCantelliCheck(bound, threshold, tail_start, overlap, ok)


@dataclass(frozen=True)
class FiniteSetColoring:
    """Per-vertex finite sets of stage indices, packed as bitmasks.

    Bit n of masks[v] records that vertex v lies in stage n's lightest class;
    vertices outside `domain` carry the empty set.
    """

    masks: np.ndarray
    stage_count: int
    domain: np.ndarray

    def __post_init__(self):
        if self.stage_count > MAX_STAGES:
            raise ValueError(f"at most {MAX_STAGES} stages fit the bitmask encoding")
        masks = np.asarray(self.masks, dtype=np.int64)
        domain = np.asarray(self.domain, dtype=bool)
        if len(masks) != len(domain):
            raise ValueError("one mask and one domain flag per vertex required")
        masks.setflags(write=False)
        domain.setflags(write=False)
        object.__setattr__(self, "masks", masks)
        object.__setattr__(self, "domain", domain)

    def members(self, v: int) -> tuple[int, ...]:
        m = int(self.masks[v])
        return tuple(n for n in range(self.stage_count) if m >> n & 1)


def build_membership_coloring(g: MeasuredGraph, class_sets, domain=None) -> FiniteSetColoring:
    """Pack per-stage class membership into bit n of each vertex's mask.

    Vertices outside `domain` (when given) are excluded: their set is empty.
    """
    class_sets = list(class_sets)
    if len(class_sets) > MAX_STAGES:
        raise ValueError(f"at most {MAX_STAGES} stages fit the bitmask encoding")
    masks = np.zeros(g.vertex_count, dtype=np.int64)
    for n, members in enumerate(class_sets):
        masks |= _as_mask(g, members).astype(np.int64) << n
    dmask = np.ones(g.vertex_count, dtype=bool) if domain is None else _as_mask(g, domain)
    masks[~dmask] = 0
    return FiniteSetColoring(masks, len(class_sets), dmask)


def encode_finite_sets(fsc: FiniteSetColoring):
    """Dense re-indexing of the occurring masks, in order of first appearance.

    Returns (coloring, mapping) where mapping records mask -> palette index for
    audit; the encoding is injective on the masks that occur.
    """
    if len(fsc.masks) == 0:
        return VertexColoring(np.zeros(0, dtype=np.int64), None), {}
    uniq, first, inverse = np.unique(fsc.masks, return_index=True, return_inverse=True)
    order = np.argsort(first, kind="stable")
    rank = np.empty(len(uniq), dtype=np.int64)
    rank[order] = np.arange(len(uniq), dtype=np.int64)
    mapping = {int(uniq[i]): int(rank[i]) for i in range(len(uniq))}
    return VertexColoring(rank[inverse], len(uniq)), mapping


@dataclass(frozen=True)
class GrowthCheck:
    """Certificate that neighborhoods keep acquiring fresh stage sets.

    For each vertex of the region: the union of its neighbors' sets must cover
    every stage index past tail_start, and the count of distinct sets shown
    must be at least (stages - tail_start - 1) / (largest set size seen) —
    a large union of small sets forces many distinct sets.
    """

    ok: bool
    tail_start: int
    required_bits: int
    region: np.ndarray
    union_ok: np.ndarray
    distinct_counts: np.ndarray
    max_set_sizes: np.ndarray
    failures: np.ndarray


def spectrum_growth_check(g: MeasuredGraph, fsc: FiniteSetColoring, region,
                          tail_start: int) -> GrowthCheck:
    """Run the neighborhood growth certificate over a region of vertices."""
    n = g.vertex_count
    rmask = _as_mask(g, region)
    stages = fsc.stage_count
    needed = max(0, stages - tail_start - 1)
    required = (1 << stages) - (1 << (tail_start + 1)) if needed else 0
    nm = fsc.masks[g.indices]
    unions = segment_or(nm.astype(np.uint64), g.indptr)
    union_ok = (unions & np.uint64(required)) == np.uint64(required)
    maxmask = int(fsc.masks.max(initial=0))
    if n * (maxmask + 1) < 1 << 62:
        keys = np.unique(g.edge_sources * np.int64(maxmask + 1) + nm)
        distinct = np.bincount((keys // (maxmask + 1)).astype(np.int64), minlength=n)
    else:
        pairs = np.unique(np.column_stack([g.edge_sources, nm]), axis=0)
        distinct = np.bincount(pairs[:, 0], minlength=n)
    sizes = popcounts(nm.astype(np.uint64))
    maxsize = segment_max(sizes, g.indptr, empty=0)
    count_ok = np.where(maxsize > 0, distinct * maxsize >= needed, needed == 0)
    failures = np.flatnonzero(rmask & ~(union_ok & count_ok))
    return GrowthCheck(len(failures) == 0, tail_start, required, rmask,
                       union_ok, distinct, maxsize, failures)


@dataclass(frozen=True)
class SensitivityRow:
    """Masses of the stable and sparse regions under nearby threshold choices."""

    tail_start: int
    membership_cap: int
    stable_measure: Fraction
    sparse_measure: Fraction


@dataclass(frozen=True)
class PipelineReport:
    """Everything a pipeline run certifies, measured exactly.

    `stable` is the set lying in every stage's covered set from tail_start on;
    `sparse` the set lying in at most membership_cap of the later lightest
    classes; `certified` the union of components fully inside both.
    """

    stage_count: int
    tail_start: int
    membership_cap: int
    target_palette: int
    trials: int
    master_seed: int
    law_kind: str
    settle: bool
    repair_cap: int
    stages: tuple[StageArtifact, ...]
    stage_checks: tuple[StageCheck, ...]
    stable_mask: np.ndarray
    sparse_mask: np.ndarray
    certified_mask: np.ndarray
    stable_measure: Fraction
    sparse_measure: Fraction
    good_measure: Fraction
    certified_measure: Fraction
    probative: bool
    stable_check: BorelCantelliCheck
    sparse_check: BorelCantelliCheck
    sensitivity: tuple[SensitivityRow, ...]
    membership: FiniteSetColoring
    encoding: dict[int, int]
    encoded: VertexColoring
    growth: GrowthCheck
    search: SearchResult
    final_fraction: Fraction
    certified_fraction: Fraction

    @property
    def certified_ok(self) -> bool:
        """True iff every recomputed certificate of the run holds."""
        return (all(c.ok for c in self.stage_checks) and self.stable_check.ok
                and self.sparse_check.ok and self.growth.ok)


def _sparse_counts(g: MeasuredGraph, stages, tail_start: int) -> np.ndarray:
    counts = np.zeros(g.vertex_count, dtype=np.int64)
    for art in stages[tail_start + 1:]:
        counts += art.class_members
    return counts


def run_pipeline(g: MeasuredGraph, stage_count: int, *, tail_start: int = 1,
                 membership_cap: int = 3, target_palette: int, trials: int = 32,
                 master_seed: int, law: RecolorLaw | None = None,
                 repair_rounds: int = 64, settle: bool = True,
                 workers: int | None = None):
    """Run the full ladder and return (final coloring, report).

    Stage n supplies a 2^n-coloring with failure budget 2^-n and its lightest
    color class.  The stable region keeps the vertices covered at every stage
    from tail_start on; the sparse region those lying in at most membership_cap
    of the lightest classes after tail_start; the certified region drops every
    component touching either failure.  Membership sets are packed, densely
    encoded, and recolored onto target_palette colors by a seeded search ranked
    on the certified region; off it the final coloring is constant 0.
    """
    if stage_count < 2:
        raise ValueError("need at least two stages")
    if stage_count > MAX_STAGES:
        raise ValueError(f"at most {MAX_STAGES} stages fit the bitmask encoding")
    if not 0 <= tail_start < stage_count:
        raise ValueError("tail_start must lie below the stage count")
    if membership_cap < 0:
        raise ValueError("membership_cap must be nonnegative")
    if target_palette < 1:
        raise ValueError("target palette must have at least one color")
    if trials < 1:
        raise ValueError("need at least one trial")

    stages: list[StageArtifact] = []
    for n in range(stage_count):
        k = 1 << n
        eps = Fraction(1, 1 << n)
        stream = substream(master_seed, "stage", n)
        try:
            f, cov, rounds = supply_domatic_coloring(
                g, k, stream, max_failure=eps, max_rounds=repair_rounds, settle=settle)
        except SupplierFailure as e:
            raise SupplierFailure(
                f"stage {n}: {e}", palette=e.palette, rounds=e.rounds,
                achieved=e.achieved, bad_count=e.bad_count) from None
        idx, members, mu = least_measure_class(g, f, k)
        cmask = f.colors == idx
        stages.append(StageArtifact(n, k, eps, f, cov, measure_of(g, cov),
                                    idx, cmask, mu, rounds))
    checks = tuple(verify_stage(g, art) for art in stages)

    stable = np.ones(g.vertex_count, dtype=bool)
    for art in stages[tail_start:]:
        stable &= art.covered
    stable_check = borel_cantelli_check(
        [1 - art.covered_measure for art in stages], tail_start, 1,
        graph=g, sets=[~art.covered for art in stages])

    sparse = _sparse_counts(g, stages, tail_start) <= membership_cap
    sparse_check = borel_cantelli_check(
        [art.class_measure for art in stages], tail_start + 1, membership_cap + 1,
        graph=g, sets=[art.class_members for art in stages])

    good = stable & sparse
    certified = ~_as_mask(g, saturate(g, ~good))

    membership = build_membership_coloring(
        g, [art.class_members for art in stages], domain=sparse)
    growth = spectrum_growth_check(g, membership, certified, tail_start)
    encoded, encoding = encode_finite_sets(membership)

    the_law = law if law is not None else truncated_geometric_law(target_palette)
    search = search_recolor_maps(g, encoded, target_palette, trials, master_seed,
                                 law=the_law, restrict=certified, workers=workers)
    final_colors = recolor(encoded, search.best).colors.copy()
    final_colors[~certified] = 0
    final = VertexColoring(final_colors, target_palette)
    final_cov = covered_mask(g, final.colors, target_palette)

    sensitivity = []
    for ts in sorted({tail_start - 1, tail_start, tail_start + 1}):
        if not 0 <= ts < stage_count:
            continue
        st = np.ones(g.vertex_count, dtype=bool)
        for art in stages[ts:]:
            st &= art.covered
        counts = _sparse_counts(g, stages, ts)
        for cap in sorted({membership_cap - 1, membership_cap, membership_cap + 1}):
            if cap < 0:
                continue
            sensitivity.append(SensitivityRow(
                ts, cap, measure_of(g, st), measure_of(g, counts <= cap)))

    certified_measure = measure_of(g, certified)
    report = PipelineReport(
        stage_count=stage_count, tail_start=tail_start,
        membership_cap=membership_cap, target_palette=target_palette,
        trials=trials, master_seed=master_seed, law_kind=the_law.kind,
        settle=settle, repair_cap=repair_rounds,
        stages=tuple(stages), stage_checks=checks,
        stable_mask=stable, sparse_mask=sparse, certified_mask=certified,
        stable_measure=measure_of(g, stable), sparse_measure=measure_of(g, sparse),
        good_measure=measure_of(g, good), certified_measure=certified_measure,
        probative=certified_measure >= Fraction(1, 2),
        stable_check=stable_check, sparse_check=sparse_check,
        sensitivity=tuple(sensitivity), membership=membership,
        encoding=encoding, encoded=encoded, growth=growth, search=search,
        final_fraction=measure_of(g, final_cov),
        certified_fraction=measure_of(g, final_cov & certified))
    return final, report
