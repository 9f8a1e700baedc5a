"""
Brute-force enumeration oracle: partition function, marginals, MAP, and exact
temporal evolution. True zeros are kept (no clamp floor).
"""
import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from scipy.special import logsumexp

import config
from model.errors import OracleSizeError
from model.factor_graph import FactorGraph, index_to_state
from model.tables import expand_to_axes, marginalize_to_axes
from model.temporal import TemporalModel

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ExactDistribution:
    fg: FactorGraph
    log_z: float
    probabilities: Optional[np.ndarray] = None  # one axis per variable, ascending ids


def _check_size(size: int, cap: int, what: str):
    if size > cap:
        raise OracleSizeError(f"{what} has {size} joint states, above the oracle cap of {cap}")


def _log(values: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(values)


def joint_log_table(fg: FactorGraph, cap: int = None) -> np.ndarray:
    """ln of the unnormalized joint, one axis per variable (ascending ids)."""
    cap = config.ORACLE_MAX_STATES if cap is None else cap
    _check_size(fg.joint_size(), cap, "factor graph")
    ids = sorted(fg.cardinalities)
    log_table = np.zeros(fg.joint_cards())
    for f in fg.factors:
        log_table = log_table + expand_to_axes(_log(fg.factor_table(f.id)), f.scope, ids)
    return log_table


def exact_joint(fg: FactorGraph, cap: int = None) -> ExactDistribution:
    log_table = joint_log_table(fg, cap)
    log_z = float(logsumexp(log_table))
    return ExactDistribution(fg, log_z, np.exp(log_table - log_z))


def exact_partition(fg: FactorGraph, cap: int = None) -> float:
    """ln Z by log-sum-exp over every joint state."""
    return float(logsumexp(joint_log_table(fg, cap)))


def exact_marginal(fg: FactorGraph, variable_id: int, cap: int = None) -> np.ndarray:
    dist = exact_joint(fg, cap)
    return marginalize_to_axes(dist.probabilities, sorted(fg.cardinalities), (variable_id,))


def exact_map(fg: FactorGraph, cap: int = None) -> Tuple[Tuple[int, ...], float]:
    """Most likely joint state; ties go to the smallest flat joint index."""
    log_table = joint_log_table(fg, cap)
    best = int(np.argmax(log_table))
    return index_to_state(fg.joint_cards(), best), float(np.exp(log_table.flat[best]))


# ---------- temporal evolution ----------

def transition_log_matrix(tm: TemporalModel, cap: int = None) -> np.ndarray:
    """ln of prod_a f_a(x'_a | x_a) for every (past state, future state) pair."""
    cap = config.ORACLE_MAX_TEMPORAL_STATES if cap is None else cap
    ids = sorted(tm.cardinalities)
    cards = tm.cards(ids)
    size = int(np.prod(cards, dtype=np.int64))
    _check_size(size, cap, "temporal model")

    states = np.stack(np.unravel_index(np.arange(size), cards), axis=1)
    log_t = np.zeros((size, size))
    for f in tm.factors:
        past_cards = tm.cards(f.past_scope)
        future_cards = tm.cards(f.future_scope)
        table = _log(f.values).reshape(int(np.prod(past_cards, dtype=np.int64)), -1)
        past_idx = np.ravel_multi_index(states[:, list(f.past_scope)].T, past_cards) if f.past_scope else np.zeros(size, dtype=int)
        future_idx = np.ravel_multi_index(states[:, list(f.future_scope)].T, future_cards) if f.future_scope else np.zeros(size, dtype=int)
        log_t += table[np.ix_(past_idx, future_idx)]
    return log_t


def conditional_log_partition(tm: TemporalModel, cap: int = None) -> np.ndarray:
    """ln Z(x^t) for every past joint state."""
    return logsumexp(transition_log_matrix(tm, cap), axis=1)


def exact_temporal_evolve(tm: TemporalModel, b0: np.ndarray, steps: int, cap: int = None) -> List[np.ndarray]:
    """Trajectory [b^0, ..., b^steps] of flat joint distributions.

    b^{t+1}(x') = sum_x b^t(x) prod_a f_a(x'_a | x_a) / Z(x).
    """
    log_t = transition_log_matrix(tm, cap)
    log_z = logsumexp(log_t, axis=1)
    dead = ~np.isfinite(log_z)
    if dead.any():
        logger.warning(f"{int(dead.sum())} past states have Z(x) = 0; their mass is dropped")
        log_z[dead] = 0.0
    transition = np.exp(log_t - log_z[:, None])
    transition[dead] = 0.0

    b = np.asarray(b0, dtype=float).ravel()
    trajectory = [b]
    for _ in range(steps):
        b = b @ transition
        trajectory.append(b)
    return trajectory
