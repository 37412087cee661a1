"""domatic-forge: measured graphs, domatic colorings, random geometric
recoloring, and a staged construction that certifies a large-measure region
admitting a coloring whose every neighborhood shows the full target palette.

The command-line interface lives in domatic_forge.cli_reporting.cli; this
module exposes the library API.
"""

__version__ = "0.1.0"

from .amalgamation import (BorelCantelliCheck, FiniteSetColoring, GrowthCheck,
                           PipelineReport, StageArtifact, StageCheck,
                           SupplierFailure, borel_cantelli_check,
                           build_membership_coloring, encode_finite_sets,
                           run_pipeline, spectrum_growth_check,
                           supply_domatic_coloring, verify_stage)
from .colorings import (EdgeColoring, VertexColoring, covered_mask, dominates,
                        domatic_set, least_measure_class, proper_edge_coloring,
                        spectrum, spectrum_sizes, verify_proper,
                        vertices_with_spectrum_at_least)
from .measured_graph import (MeasuredGraph, build_from_edges,
                             build_from_generators, make_block_graph,
                             make_random_regular, make_tail_graph,
                             make_torus_schreier, measure_of, saturate)
from .random_recolor import (RecolorLaw, RecolorMap, cylinder_measure,
                             domatic_fraction, edge_coverage_fraction,
                             exact_coverage_probability, geometric_pmf,
                             law_by_name, miss_union_bound, recolor,
                             recolor_edges, sample_recolor_map,
                             search_recolor_maps, truncated_geometric_law,
                             uniform_law)
from .util import resolve_workers, stream_label, substream

__all__ = [
    "__version__",
    "MeasuredGraph", "build_from_edges", "build_from_generators",
    "make_block_graph", "make_random_regular", "make_tail_graph",
    "make_torus_schreier", "measure_of", "saturate",
    "VertexColoring", "EdgeColoring", "covered_mask", "dominates",
    "domatic_set", "least_measure_class", "proper_edge_coloring", "spectrum",
    "spectrum_sizes", "verify_proper", "vertices_with_spectrum_at_least",
    "RecolorLaw", "RecolorMap", "cylinder_measure", "domatic_fraction",
    "edge_coverage_fraction",
    "exact_coverage_probability", "geometric_pmf", "law_by_name",
    "miss_union_bound", "recolor", "recolor_edges", "sample_recolor_map",
    "search_recolor_maps", "truncated_geometric_law", "uniform_law",
    "SupplierFailure", "StageArtifact", "StageCheck", "BorelCantelliCheck",
    "FiniteSetColoring", "GrowthCheck", "PipelineReport",
    "borel_cantelli_check", "build_membership_coloring", "encode_finite_sets",
    "run_pipeline", "spectrum_growth_check", "supply_domatic_coloring",
    "verify_stage",
    "resolve_workers", "stream_label", "substream",
]
