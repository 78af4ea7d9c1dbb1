"""Lloyd-Max scalar quantizer for a unit Gaussian source."""

import logging
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.stats import norm

from .constants import LLOYD_MAX_MAX_ITER, LLOYD_MAX_TOL, MAX_LLOYD_MAX_BITS, MIN_BITS_PER_COMPONENT
from .errors import InvalidRange

logger = logging.getLogger(__name__)

GAUSSIAN_UNIT = "gaussian_unit"


@dataclass(frozen=True, eq=False)
class LloydMaxQuantizer:
    """Level table of a designed quantizer.

    ``thresholds`` holds the L-1 interior decision boundaries.
    """
    bits: int
    levels: np.ndarray
    thresholds: np.ndarray
    mse: float
    iterations: int

    @property
    def n_levels(self) -> int:
        return self.levels.size

    def quantize(self, x: np.ndarray) -> np.ndarray:
        """Index of the cell containing each real value."""
        return np.searchsorted(self.thresholds, x).astype(np.int64)

    def dequantize(self, indices: np.ndarray) -> np.ndarray:
        return self.levels[indices]

    def cell_probabilities(self) -> np.ndarray:
        edges = np.concatenate(([-np.inf], self.thresholds, [np.inf]))
        return np.diff(norm.cdf(edges))

    def entropy(self) -> float:
        """Entropy of the index for a unit Gaussian input, bits."""
        p = self.cell_probabilities()
        p = p[p > 0]
        return float(-np.sum(p * np.log2(p)))


def _centroids(edges: np.ndarray) -> np.ndarray:
    """Conditional means of N(0, 1) over consecutive cells."""
    mass = norm.cdf(edges[1:]) - norm.cdf(edges[:-1])
    return (norm.pdf(edges[:-1]) - norm.pdf(edges[1:])) / mass


def _mse(levels: np.ndarray, edges: np.ndarray) -> float:
    """E[(X - Q(X))^2] for centroid levels: 1 - sum p_k c_k^2."""
    mass = norm.cdf(edges[1:]) - norm.cdf(edges[:-1])
    return float(1.0 - np.sum(mass * levels ** 2))


@lru_cache(maxsize=None)
def lloyd_max_design(bits: int, source: str = GAUSSIAN_UNIT,
                     tol: float = LLOYD_MAX_TOL) -> LloydMaxQuantizer:
    """Design a Lloyd-Max quantizer by fixed-point iteration.

    Thresholds move to the midpoints between levels and levels to the
    conditional means of their cells until no level moves by more than
    ``tol``. The start point places levels at sqrt(3) * Phi^-1((k + 1/2) / L),
    the high-resolution optimum density for a Gaussian.

    Args:
        bits: 1 to 8
        source: Only ``"gaussian_unit"``
        tol: Stationarity tolerance on the levels

    Returns:
        LloydMaxQuantizer, levels ascending and antisymmetric
    """
    if not MIN_BITS_PER_COMPONENT <= bits <= MAX_LLOYD_MAX_BITS:
        raise InvalidRange(f"Lloyd-Max design supports 1 to {MAX_LLOYD_MAX_BITS} bits, got {bits}")
    if source != GAUSSIAN_UNIT:
        raise InvalidRange(f"unknown source model {source!r}")

    n_levels = 2 ** bits
    levels = math.sqrt(3.0) * norm.ppf((np.arange(n_levels) + 0.5) / n_levels)
    iteration = 0
    for iteration in range(1, LLOYD_MAX_MAX_ITER + 1):
        thresholds = (levels[:-1] + levels[1:]) / 2.0
        edges = np.concatenate(([-np.inf], thresholds, [np.inf]))
        updated = _centroids(edges)
        # enforce exact antisymmetry
        updated = (updated - updated[::-1]) / 2.0
        delta = float(np.max(np.abs(updated - levels)))
        levels = updated
        if delta < tol:
            break
    else:
        logger.warning(f"Lloyd-Max {bits}-bit design stopped at {LLOYD_MAX_MAX_ITER} iterations")

    thresholds = (levels[:-1] + levels[1:]) / 2.0
    edges = np.concatenate(([-np.inf], thresholds, [np.inf]))
    mse = _mse(levels, edges)
    logger.debug(f"Lloyd-Max {bits} bits: {iteration} iterations, MSE {mse:.6g}")
    return LloydMaxQuantizer(bits, levels, thresholds, mse, iteration)
