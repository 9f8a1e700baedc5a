"""
Naive mean field for Ising models: m_i = tanh(sum_j J_ij m_j + h_i).
"""
import logging
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence, Tuple

import numpy as np

from inference.options import SolverOptions

logger = logging.getLogger(__name__)


@dataclass
class MeanFieldResult:
    magnetizations: np.ndarray
    converged: bool
    iterations: int

    def state_probabilities(self) -> np.ndarray:
        """p(state 0) = p(spin +1) = (1 + m) / 2 per site."""
        return (1.0 + self.magnetizations) / 2.0


def coupling_matrix(couplings: Mapping[Tuple[int, int], float], n: int) -> np.ndarray:
    """Dense symmetric J from a pair map; both orientations must agree if given."""
    pairs = {}
    for (i, j), value in couplings.items():
        if i == j:
            raise ValueError(f"self-coupling on site {i}")
        key = (min(i, j), max(i, j))
        if key in pairs and not np.isclose(pairs[key], value):
            raise ValueError(f"asymmetric couplings for pair {key}: {pairs[key]} vs {value}")
        pairs[key] = value
    J = np.zeros((n, n))
    for (i, j), value in pairs.items():
        J[i, j] = J[j, i] = value
    return J


def mean_field_solve(
    couplings: Mapping[Tuple[int, int], float],
    fields: Sequence[float],
    opts: SolverOptions = None,
    init: Optional[Sequence[float]] = None,
) -> MeanFieldResult:
    """Damped fixed-point iteration until max |dm| < tolerance."""
    opts = opts or SolverOptions()
    h = np.asarray(fields, dtype=float)
    J = coupling_matrix(couplings, h.size)
    m = np.zeros(h.size) if init is None else np.asarray(init, dtype=float).copy()

    for iteration in range(1, opts.max_iters + 1):
        target = np.tanh(J @ m + h)
        new_m = opts.damping * m + (1.0 - opts.damping) * target
        delta = float(np.max(np.abs(new_m - m))) if m.size else 0.0
        m = new_m
        if delta < opts.tolerance:
            return MeanFieldResult(m, True, iteration)

    logger.warning(f"mean field did not converge in {opts.max_iters} iterations")
    return MeanFieldResult(m, False, opts.max_iters)
