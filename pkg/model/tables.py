"""
Labeled-axis helpers for broadcasting and marginalizing tables.

An axis label is any hashable (a variable id, or a ("past", id) pair for
path tables). Tables carry one numpy axis per label.
"""
from typing import Hashable, Sequence

import numpy as np
from scipy.special import logsumexp

import config


def expand_to_axes(table: np.ndarray, axes: Sequence[Hashable], target_axes: Sequence[Hashable]) -> np.ndarray:
    """View `table` with singleton axes so it broadcasts against `target_axes`."""
    missing = [a for a in axes if a not in target_axes]
    if missing:
        raise ValueError(f"axes {missing} are not part of the target axes")
    present = [a for a in target_axes if a in axes]
    moved = np.transpose(table, [list(axes).index(a) for a in present])
    shape = [moved.shape[present.index(a)] if a in axes else 1 for a in target_axes]
    return moved.reshape(shape)


def broadcast_to_axes(table, axes, target_axes, target_shape) -> np.ndarray:
    return np.broadcast_to(expand_to_axes(table, axes, target_axes), tuple(target_shape))


def _kept_order(axes, keep):
    drop = tuple(k for k, a in enumerate(axes) if a not in keep)
    rest = [a for a in axes if a in keep]
    return drop, [rest.index(a) for a in keep]


def marginalize_to_axes(table: np.ndarray, axes: Sequence[Hashable], keep: Sequence[Hashable]) -> np.ndarray:
    """Sum out every axis not in `keep`; result axes follow the order of `keep`."""
    drop, order = _kept_order(axes, keep)
    summed = table.sum(axis=drop) if drop else table
    return np.transpose(summed, order)


def log_marginalize_to_axes(log_table: np.ndarray, axes, keep) -> np.ndarray:
    drop, order = _kept_order(axes, keep)
    summed = logsumexp(log_table, axis=drop) if drop else log_table
    return np.transpose(summed, order)


def log_clamped(values, floor: float = None) -> np.ndarray:
    """ln max(values, floor); zero entries become ln(floor)."""
    floor = config.CLAMP_FLOOR if floor is None else floor
    return np.log(np.maximum(values, floor))


def normalize_log(log_table: np.ndarray) -> np.ndarray:
    """exp(log_table) scaled to sum 1."""
    return np.exp(log_table - logsumexp(log_table))


def index_grid(shape: Sequence[int]) -> np.ndarray:
    """Flat row-major index of every cell, shaped like the table."""
    return np.arange(int(np.prod(shape, dtype=np.int64))).reshape(tuple(shape))
