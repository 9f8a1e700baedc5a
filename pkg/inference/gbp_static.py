"""
Static approximate inference: sum-product BP, parent-to-child GBP and the
region (CVM) free energy. All message arithmetic is in the log domain.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from scipy.special import xlogy

from inference.options import SolverOptions
from model.factor_graph import FactorGraph
from model.region_graph import RegionGraph, belief_message_pairs, relation_sets
from model.tables import expand_to_axes, log_clamped, log_marginalize_to_axes, normalize_log

logger = logging.getLogger(__name__)


@dataclass
class BeliefSet:
    """Normalized tables keyed by variable id or region id."""

    tables: Dict[int, np.ndarray]
    axes: Dict[int, Tuple[int, ...]]

    def __getitem__(self, key: int) -> np.ndarray:
        return self.tables[key]

    def __contains__(self, key: int) -> bool:
        return key in self.tables

    def keys(self):
        return sorted(self.tables)


@dataclass
class SolveResult:
    beliefs: BeliefSet
    converged: bool
    iterations: int
    history: List[dict] = field(default_factory=list)
    factor_beliefs: Optional[BeliefSet] = None

    def history_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.history, columns=["iteration", "max_delta", "free_energy"])


def _damp(old: np.ndarray, new: np.ndarray, damping: float) -> np.ndarray:
    return damping * old + (1.0 - damping) * new


def _max_delta(old: Dict[int, np.ndarray], new: Dict[int, np.ndarray]) -> float:
    return max((float(np.max(np.abs(new[k] - old[k]))) for k in new), default=0.0)


# ---------- sum-product BP ----------

def sum_product_bp(fg: FactorGraph, opts: SolverOptions = None) -> SolveResult:
    """Loopy sum-product on the factor graph; variable beliefs ∝ prod of factor messages."""
    opts = opts or SolverOptions()
    floor = opts.clamp_floor
    log_f = {f.id: log_clamped(fg.factor_table(f.id), floor) for f in fg.factors}
    scopes = {f.id: f.scope for f in fg.factors}
    neighbours = {v: fg.factors_of(v) for v in sorted(fg.cardinalities)}
    cards = fg.cardinalities

    fac_to_var = {(a, i): np.zeros(cards[i]) for a, scope in scopes.items() for i in scope}
    var_to_fac = {(i, a): np.zeros(cards[i]) for a, scope in scopes.items() for i in scope}

    def variable_beliefs():
        return {
            i: normalize_log(sum((fac_to_var[(a, i)] for a in neighbours[i]), np.zeros(cards[i])))
            for i in neighbours
        }

    def factor_beliefs():
        out = {}
        for a, scope in scopes.items():
            log_b = log_f[a] + sum(expand_to_axes(var_to_fac[(i, a)], (i,), scope) for i in scope)
            out[a] = normalize_log(log_b)
        return out

    beliefs = variable_beliefs()
    history = []
    converged = False
    iteration = 0
    for iteration in range(1, opts.max_iters + 1):
        for a in sorted(scopes):
            scope = scopes[a]
            for i in scope:
                incoming = log_f[a] + sum(
                    (expand_to_axes(var_to_fac[(j, a)], (j,), scope) for j in scope if j != i),
                    np.zeros([1] * len(scope)),
                )
                new = log_marginalize_to_axes(incoming, scope, (i,))
                new = _damp(fac_to_var[(a, i)], new - new.max(), opts.damping)
                fac_to_var[(a, i)] = new - new.max()

        for i in sorted(neighbours):
            for a in neighbours[i]:
                msg = sum((fac_to_var[(b, i)] for b in neighbours[i] if b != a), np.zeros(cards[i]))
                var_to_fac[(i, a)] = msg - msg.max()

        new_beliefs = variable_beliefs()
        delta = _max_delta(beliefs, new_beliefs)
        beliefs = new_beliefs
        history.append({
            "iteration": iteration,
            "max_delta": delta,
            "free_energy": _bethe_free_energy(fg, log_f, factor_beliefs(), beliefs, neighbours),
        })
        if delta < opts.tolerance:
            converged = True
            break

    if not converged:
        logger.warning(f"sum_product_bp did not converge in {opts.max_iters} sweeps (delta={delta:.3e})")
    var_axes = {i: (i,) for i in beliefs}
    return SolveResult(
        BeliefSet(beliefs, var_axes),
        converged,
        iteration,
        history,
        BeliefSet(factor_beliefs(), dict(scopes)),
    )


def _bethe_free_energy(fg, log_f, factor_beliefs, var_beliefs, neighbours) -> float:
    energy = 0.0
    for a, b in factor_beliefs.items():
        energy += float(np.sum(xlogy(b, b) - b * log_f[a]))
    for i, b in var_beliefs.items():
        energy += (1 - len(neighbours[i])) * float(np.sum(xlogy(b, b)))
    return energy


# ---------- parent-to-child GBP ----------

def _region_local_log(fg: FactorGraph, rg: RegionGraph, floor: float) -> Dict[int, np.ndarray]:
    local = {}
    for region in rg.regions:
        axes = region.variables
        log_table = np.zeros(fg.scope_cards(axes))
        for a in sorted(region.factor_ids):
            f = fg.factor(a)
            log_table = log_table + expand_to_axes(log_clamped(fg.factor_table(a), floor), f.scope, axes)
        local[region.id] = log_table
    return local


def gbp_parent_to_child(fg: FactorGraph, rg: RegionGraph, opts: SolverOptions = None) -> SolveResult:
    """Parent-to-child GBP; messages m_{P->R}(x_R) follow the N(P,R) / D(P,R) rule."""
    opts = opts or SolverOptions()
    floor = opts.clamp_floor
    log_floor = np.log(floor)
    axes = {r.id: r.variables for r in rg.regions}
    local = _region_local_log(fg, rg, floor)

    messages = {edge: np.zeros(fg.scope_cards(axes[edge[1]])) for edge in rg.edges}

    plans = {}
    for parent, child in rg.edges:
        rel = relation_sets(rg, parent, child)
        p_region, c_region = rg.region(parent), rg.region(child)
        extra = np.zeros(fg.scope_cards(axes[parent]))
        for a in sorted(p_region.factor_ids - c_region.factor_ids):
            f = fg.factor(a)
            extra = extra + expand_to_axes(log_clamped(fg.factor_table(a), floor), f.scope, axes[parent])
        plans[(parent, child)] = (extra, sorted(rel.n_set), sorted(rel.d_set))
    entering = {r.id: sorted(belief_message_pairs(rg, r.id)) for r in rg.regions}

    def region_beliefs():
        out = {}
        for r in rg.regions:
            log_b = local[r.id] + sum(
                (expand_to_axes(messages[e], axes[e[1]], axes[r.id]) for e in entering[r.id]),
                np.zeros([1] * len(axes[r.id])),
            )
            out[r.id] = normalize_log(log_b)
        return out

    beliefs = region_beliefs()
    history = []
    converged = False
    iteration = 0
    for iteration in range(1, opts.max_iters + 1):
        for edge in rg.edges:
            parent, child = edge
            extra, n_set, d_set = plans[edge]
            numerator = extra + sum(
                (expand_to_axes(messages[e], axes[e[1]], axes[parent]) for e in n_set),
                np.zeros([1] * len(axes[parent])),
            )
            new = log_marginalize_to_axes(numerator, axes[parent], axes[child])
            for e in d_set:
                new = new - expand_to_axes(messages[e], axes[e[1]], axes[child])
            new = _damp(messages[edge], new - new.max(), opts.damping)
            messages[edge] = np.maximum(new - new.max(), log_floor)

        new_beliefs = region_beliefs()
        delta = _max_delta(beliefs, new_beliefs)
        beliefs = new_beliefs
        belief_set = BeliefSet(beliefs, axes)
        history.append({
            "iteration": iteration,
            "max_delta": delta,
            "free_energy": region_free_energy(fg, rg, belief_set, floor),
        })
        if delta < opts.tolerance:
            converged = True
            break

    if not converged:
        logger.warning(f"gbp_parent_to_child did not converge in {opts.max_iters} sweeps (delta={delta:.3e})")
    return SolveResult(BeliefSet(beliefs, axes), converged, iteration, history)


def region_free_energy(fg: FactorGraph, rg: RegionGraph, beliefs: BeliefSet, floor: float = None) -> float:
    """sum_R c_R sum_x q_R (H_R + ln q_R) with H_R = -sum_{a in R} ln f_a."""
    floor = SolverOptions().clamp_floor if floor is None else floor
    local = _region_local_log(fg, rg, floor)
    total = 0.0
    for region in rg.regions:
        c = rg.counting(region.id)
        if c == 0:
            continue
        q = beliefs[region.id]
        total += c * float(np.sum(xlogy(q, q) - q * local[region.id]))
    return total
