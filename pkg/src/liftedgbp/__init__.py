"""Lifted generalized belief propagation for parfactor models.

Typical use::

    from liftedgbp import load_benchmark, build_lifted_region_graph, run_lifted_gbp, RunConfig

    model = load_benchmark("friends_smokers")
    lifted = build_lifted_region_graph(model)
    result = run_lifted_gbp(lifted, RunConfig(n=100))
"""

from .benchmarks import load_benchmark
from .compare import region_alignment, run_lockstep
from .csg import build_csg, canonize, enumerate_isomorphisms
from .errors import LiftedGBPError
from .exact import exact_marginal
from .factor import FactorTable
from .ground_gbp import GroundGBP, compute_belief, run_ground_gbp, update_message
from .lifted_gbp import LiftedGBP, RunConfig, lifted_belief, lifted_message_update, query_marginal, run_lifted_gbp
from .lifted_graph import LiftedRegionGraph, build_lifted_region_graph, kappa, kappa_symbolic
from .local_graph import build_local_graph, local_par_counts
from .model import GroundAtom, ParfactorModel, ground, load_model, parse_model, shatter
from .region_graph import GroundRegionGraph, build_region_graph, validate_region_graph

__all__ = [
    "FactorTable", "GroundAtom", "GroundGBP", "GroundRegionGraph", "LiftedGBP", "LiftedGBPError",
    "LiftedRegionGraph", "ParfactorModel", "RunConfig", "build_csg", "build_lifted_region_graph",
    "build_local_graph", "build_region_graph", "canonize", "compute_belief", "enumerate_isomorphisms",
    "exact_marginal", "ground", "kappa", "kappa_symbolic", "lifted_belief", "lifted_message_update",
    "load_benchmark", "load_model", "local_par_counts", "parse_model", "query_marginal",
    "region_alignment", "run_ground_gbp", "run_lifted_gbp", "run_lockstep", "shatter",
    "update_message", "validate_region_graph",
]
