"""Dantzig-Wolfe, Fenchel and hybrid decompositions for unsplittable flow relaxations."""

from .decomposition import (
    BoundTrace,
    DecomposableProblem,
    DecompositionConfig,
    run_dantzig_wolfe,
    run_dw_fenchel,
    run_fenchel,
    run_method,
    solve_exact,
)
from .iterative_separation import directional_separate_iterative
from .oracle import BlockData, BlockVertex, DualWeights, capacity_oracle, solve_knapsack
from .separation import Cut, Directional, NaturalUfp, NormL1, NormLinf, RhsBound, separate
from .ufp import GeneratorParams, UfpInstance, build_problem, generate_instance, path_sets, perturb_capacities

__all__ = [
    "BlockData",
    "BlockVertex",
    "BoundTrace",
    "Cut",
    "DecomposableProblem",
    "DecompositionConfig",
    "Directional",
    "DualWeights",
    "GeneratorParams",
    "NaturalUfp",
    "NormL1",
    "NormLinf",
    "RhsBound",
    "UfpInstance",
    "build_problem",
    "capacity_oracle",
    "directional_separate_iterative",
    "generate_instance",
    "path_sets",
    "perturb_capacities",
    "run_dantzig_wolfe",
    "run_dw_fenchel",
    "run_fenchel",
    "run_method",
    "separate",
    "solve_exact",
    "solve_knapsack",
]
