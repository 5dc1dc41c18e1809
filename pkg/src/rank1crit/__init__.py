"""Component sizes of critical rank-1 inhomogeneous random graphs.

Weights, direct graph sampling, the breadth-first exploration walk, the
limiting reflected diffusion, and the tools to compare them.
"""
from .analysis import compare_to_limit, ks_two_sample, l2_distance, rescaled_sizes
from .exploration import component_sizes, decompose, explore, walk
from .graph import RankedSizes, TiltParams, exact_component_law, sample_graph
from .harness import ExperimentConfig, oracle_suite, run_experiment
from .limit import LimitParams, extract_excursions, scaling_map, simulate_limit_path
from .seeding import derive_seed
from .weights import DistributionSpec, WeightSequence, criticalize, iid_weights, quantile_weights

__version__ = "0.1.0"
