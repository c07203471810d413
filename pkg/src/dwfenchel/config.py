"""Default constants of the experiments, gathered in one place."""

from .decomposition import MOMENTUM_ALPHA, TOLERANCE
from .harness import BOOTSTRAP_RESAMPLES, CONFIDENCE_LEVEL, REPORT_SAMPLE_INTERVAL, SAMPLE_INTERVAL
from .oracle import DUAL_SCALE
from .ufp import K_PATHS, PERTURBATION_ROUNDS_PER_NODE


def perturbation_rounds(nodes: int) -> int:
    return PERTURBATION_ROUNDS_PER_NODE * nodes


__all__ = [
    "BOOTSTRAP_RESAMPLES",
    "CONFIDENCE_LEVEL",
    "DUAL_SCALE",
    "K_PATHS",
    "MOMENTUM_ALPHA",
    "PERTURBATION_ROUNDS_PER_NODE",
    "REPORT_SAMPLE_INTERVAL",
    "SAMPLE_INTERVAL",
    "TOLERANCE",
    "perturbation_rounds",
]
