"""
Solver options shared by every iterative algorithm
"""
from dataclasses import dataclass
from typing import Optional

import config


@dataclass(frozen=True)
class SolverOptions:
    """Iteration budget, stopping tolerance and damping.

    Args:
        max_iters: sweep budget per solve (per time step for temporal solvers)
        tolerance: stop when the max absolute belief change drops below this
        damping: log-domain weight kept from the previous message, in [0, 1)
        clamp_floor: lower bound applied to factor values and messages before logs
        degenerate_exponent: "error" or "fixed:<w>" for child regions whose counting
            number plus the sum over their parents is 0
    """

    max_iters: int = config.DEFAULT_MAX_ITERS
    tolerance: float = config.DEFAULT_TOLERANCE
    damping: float = config.DEFAULT_DAMPING
    clamp_floor: float = config.CLAMP_FLOOR
    degenerate_exponent: str = config.DEGENERATE_EXPONENT

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        if not self.tolerance > 0:
            raise ValueError(f"tolerance must be > 0, got {self.tolerance}")
        if not 0 <= self.damping < 1:
            raise ValueError(f"damping must be in [0, 1), got {self.damping}")
        if not self.clamp_floor > 0:
            raise ValueError(f"clamp_floor must be > 0, got {self.clamp_floor}")
        parse_degenerate_policy(self.degenerate_exponent)

    @property
    def fixed_exponent(self) -> Optional[float]:
        return parse_degenerate_policy(self.degenerate_exponent)


def parse_degenerate_policy(policy: str) -> Optional[float]:
    """None for "error", otherwise the fixed exponent of "fixed:<w>"."""
    if policy == "error":
        return None
    if policy.startswith("fixed:"):
        try:
            return float(policy.split(":", 1)[1])
        except ValueError:
            pass
    raise ValueError(f"degenerate exponent policy must be 'error' or 'fixed:<w>', got {policy!r}")
