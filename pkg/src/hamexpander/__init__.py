"""Constructive Hamiltonicity toolkit for regular expanders."""

from .absorber import absorb, build_absorber, build_match_template, build_xaby, build_xay
from .config import PipelineConfig, load_config
from .connector import PairBatch, connect
from .cover import clean_up_forest, large_linear_forest, linear_forest, max_cut_local_search
from .generators import (cayley_abelian, circulant, coset_euler_glue, kneser, percolate, random_bipartite_regular,
                         random_regular)
from .graph import Graph, expansion_certificate, far_from_bipartite, load_graph, parse_edge_list, uniformity
from .pipeline import (HamiltonResult, exact_oracle, glue_cycle, hamilton_cycle, robust_spanning_paths,
                       verify_hamilton_cycle)
from .reservoir import connect_through, sample_reservoir
from .spectral import empirical_mixing, spectral_summary
from .walks import build_conditioned, random_walk, sample_conditioned

__version__ = "0.1.0"
