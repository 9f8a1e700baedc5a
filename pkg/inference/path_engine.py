"""
Flat-array engine for path beliefs b_a(x^t, x^{t+dt}).

Every active region's path table is laid out contiguously (regions in
ascending id order, row-major over past axes then future axes). Messages on
edges are laid out contiguously in (child, parent) order, each aligned with
the child's path table. All broadcasts and marginalizations become gathers and
bincounts over precomputed index maps.

A sweep updates the messages from a child to all of its parents together, so
that the child belief and every parent marginal meet at one common target.
With a single parent this is the usual exponent c_p c_c / (c_p + c_c).
Children are grouped into batches by first fit in ascending id order; within
a batch no child touches another child's parents, so the batch result equals
the one-by-one result. Past-state messages live on the top regions (no active
parent); below them the past constraint follows from consistency.
"""
import logging
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.special import xlogy

from inference.options import SolverOptions
from model.errors import StructuralError
from model.region_graph import RegionGraph
from model.tables import broadcast_to_axes, index_grid, log_clamped, marginalize_to_axes
from model.temporal import TemporalModel, prior_consistency_gap

logger = logging.getLogger(__name__)

Edge = Tuple[int, int]


def _path_axes(variables):
    return tuple(("past", v) for v in variables) + tuple(("future", v) for v in variables)


def _log_normalize_segments(log_values: np.ndarray, starts: np.ndarray, sizes: np.ndarray) -> np.ndarray:
    shifted = log_values - np.repeat(np.maximum.reduceat(log_values, starts), sizes)
    return shifted - np.repeat(np.log(np.add.reduceat(np.exp(shifted), starts)), sizes)


def _shift_segments(log_values: np.ndarray, starts: np.ndarray, sizes: np.ndarray) -> np.ndarray:
    """Scale every segment so its largest entry is 1 (0 in log)."""
    return log_values - np.repeat(np.maximum.reduceat(log_values, starts), sizes)


def _scatter_logsumexp(log_values: np.ndarray, index: np.ndarray, size: int) -> np.ndarray:
    """out[j] = log sum_{i: index[i] = j} exp(log_values[i]); every j must be hit.

    log_values are normalized log beliefs, so the plain sum is safe unless some
    output is far below the double range.
    """
    total = np.bincount(index, weights=np.exp(log_values), minlength=size)
    if total.min() > 1e-250:
        return np.log(total)
    peak = np.full(size, -np.inf)
    np.maximum.at(peak, index, log_values)
    total = np.bincount(index, weights=np.exp(log_values - peak[index]), minlength=size)
    return peak + np.log(total)


@dataclass(frozen=True, eq=False)
class SweepBatch:
    """Children whose messages to their parents are updated together.

    Entry arrays index the flat belief / message arrays; `msg_child` maps a
    message entry to its slot in `child_entries`, `marg_local` maps a parent
    belief entry to its slot in `msg_index`.
    """

    children: Tuple[int, ...]
    msg_index: np.ndarray
    child_entries: np.ndarray
    msg_child: np.ndarray
    marg_src: np.ndarray
    marg_local: np.ndarray
    msg_parent_counting: np.ndarray
    child_counting: np.ndarray
    denominator: np.ndarray

    @property
    def degenerate(self) -> np.ndarray:
        return self.denominator == 0


@dataclass(frozen=True, eq=False)
class PathLayout:
    """Index maps for one (region graph, cardinalities, factor scopes) structure."""

    rg: RegionGraph
    cardinalities: Dict[int, int]
    region_ids: Tuple[int, ...]
    position: Dict[int, int]
    axes: Dict[int, Tuple[int, ...]]
    counting: np.ndarray
    b_offset: np.ndarray
    p_offset: np.ndarray
    past_index: np.ndarray
    future_index: np.ndarray
    entry_counting: np.ndarray
    past_counting: np.ndarray
    top_past: np.ndarray
    edges: Tuple[Edge, ...]
    m_offset: np.ndarray
    msg_child_entry: np.ndarray
    marg_src: np.ndarray
    marg_dst: np.ndarray
    denominators: Dict[int, float]
    factor_order: Tuple[int, ...]
    factor_src: np.ndarray
    factor_dst: np.ndarray
    inactive_source: Dict[int, int]
    batches: Tuple[SweepBatch, ...]

    @property
    def size(self) -> int:
        return int(self.b_offset[-1])

    @property
    def past_size(self) -> int:
        return int(self.p_offset[-1])

    def shape(self, region_id: int) -> Tuple[int, ...]:
        cards = tuple(self.cardinalities[v] for v in self.axes[region_id])
        return cards + cards

    def parents(self, region_id: int) -> List[int]:
        return [p for p, c in self.edges if c == region_id]

    @property
    def degenerate_children(self) -> List[int]:
        """Children whose counting number cancels the sum over their parents."""
        return [r for r, d in self.denominators.items() if d == 0]


def _active_edges(rg: RegionGraph, active: List[int]) -> List[Edge]:
    """Edges between active regions with no active region in between."""
    active_set = set(active)
    ancestors = {r: rg.ancestors(r) & active_set for r in active}
    edges = []
    for r in active:
        above = ancestors[r]
        for a in above:
            if not any(a in ancestors[m] for m in above if m != a):
                edges.append((a, r))
    return edges


def _first_fit(children: List[int], parents_of: Dict[int, List[int]]) -> List[List[int]]:
    groups, claimed = [], []
    for r in children:
        touched = {r, *parents_of[r]}
        for group, used in zip(groups, claimed):
            if not used & touched:
                group.append(r)
                used |= touched
                break
        else:
            groups.append([r])
            claimed.append(set(touched))
    return groups


@lru_cache(maxsize=16)
def path_layout(rg: RegionGraph, cards: Tuple[Tuple[int, int], ...], factor_axes: Tuple) -> PathLayout:
    """Build (and cache) the index maps for one model structure.

    Args:
        rg: region graph with counting numbers
        cards: ((variable id, cardinality), ...)
        factor_axes: ((factor id, past scope, future scope), ...) sorted by id
    """
    cardinalities = dict(cards)
    active = [r.id for r in rg.regions if rg.counting(r.id) != 0]
    position = {r: k for k, r in enumerate(active)}
    axes = {r.id: r.variables for r in rg.regions}

    b_offset, p_offset = [0], [0]
    past_index, future_index = [], []
    for r in active:
        region_cards = tuple(cardinalities[v] for v in axes[r])
        labels = _path_axes(axes[r])
        shape = region_cards + region_cards
        grid = index_grid(region_cards)
        past_labels = tuple(("past", v) for v in axes[r])
        future_labels = tuple(("future", v) for v in axes[r])
        past_index.append(broadcast_to_axes(grid, past_labels, labels, shape).ravel() + p_offset[-1])
        future_index.append(broadcast_to_axes(grid, future_labels, labels, shape).ravel() + p_offset[-1])
        b_offset.append(b_offset[-1] + grid.size ** 2)
        p_offset.append(p_offset[-1] + grid.size)
    b_offset = np.asarray(b_offset, dtype=np.int64)
    p_offset = np.asarray(p_offset, dtype=np.int64)
    past_index = np.concatenate(past_index).astype(np.int64) if past_index else np.zeros(0, dtype=np.int64)
    future_index = np.concatenate(future_index).astype(np.int64) if future_index else np.zeros(0, dtype=np.int64)
    counting = np.asarray([rg.counting(r) for r in active], dtype=float)
    b_sizes = np.diff(b_offset)
    p_sizes = np.diff(p_offset)

    # edges in (child, parent) order so each child owns a contiguous message range
    edges = sorted(_active_edges(rg, active), key=lambda e: (position[e[1]], position[e[0]]))
    m_offset = [0]
    child_entry, marg_src, marg_dst, parent_maps = [], [], [], []
    for parent, child in edges:
        pp, pc = position[parent], position[child]
        child_cards = tuple(cardinalities[v] for v in axes[child])
        child_grid = index_grid(child_cards + child_cards)
        parent_shape = tuple(cardinalities[v] for v in axes[parent]) * 2
        to_child = broadcast_to_axes(child_grid, _path_axes(axes[child]), _path_axes(axes[parent]), parent_shape).ravel()
        parent_maps.append(to_child)
        child_entry.append(b_offset[pc] + np.arange(child_grid.size))
        marg_src.append(b_offset[pp] + np.arange(to_child.size))
        marg_dst.append(m_offset[-1] + to_child)
        m_offset.append(m_offset[-1] + child_grid.size)

    def _cat(parts):
        return np.concatenate(parts).astype(np.int64) if parts else np.zeros(0, dtype=np.int64)

    m_offset = np.asarray(m_offset, dtype=np.int64)

    # factor values -> belief entries
    factor_order = tuple(a for a, _, _ in factor_axes)
    f_offset, factor_labels = {}, {}
    total = 0
    for a, past, future in factor_axes:
        f_offset[a] = total
        factor_labels[a] = tuple(("past", v) for v in past) + tuple(("future", v) for v in future)
        total += int(np.prod([cardinalities[v] for v in past + future], dtype=np.int64))
    factor_src, factor_dst = [], []
    for r in active:
        labels = _path_axes(axes[r])
        shape = tuple(cardinalities[v] for v in axes[r]) * 2
        for a in sorted(rg.region(r).factor_ids):
            f_cards = [cardinalities[label[1]] for label in factor_labels[a]]
            grid = index_grid(f_cards)
            factor_src.append(broadcast_to_axes(grid, factor_labels[a], labels, shape).ravel() + f_offset[a])
            factor_dst.append(b_offset[position[r]] + np.arange(int(np.prod(shape, dtype=np.int64))))

    inactive_source = {}
    for region in rg.regions:
        if region.id in position:
            continue
        sources = [a for a in rg.ancestors(region.id) if a in position]
        inactive_source[region.id] = min(sources, key=lambda a: (len(axes[a]), a))

    edges_of = {r: [] for r in active}
    for k, (_, child) in enumerate(edges):
        edges_of[child].append(k)
    parents_of = {r: [edges[k][0] for k in edges_of[r]] for r in active}
    children = [r for r in active if edges_of[r]]
    denominators = {
        r: float(counting[position[r]] + sum(counting[position[p]] for p in parents_of[r]))
        for r in children
    }

    batches = []
    for group in _first_fit(children, parents_of):
        msg_index, child_entries, msg_child, src, local, parent_c, den = [], [], [], [], [], [], []
        n_child = n_msg = 0
        for r in group:
            pos = position[r]
            size = int(b_sizes[pos])
            child_entries.append(b_offset[pos] + np.arange(size))
            den.append(np.full(size, denominators[r]))
            for k in edges_of[r]:
                parent_pos = position[edges[k][0]]
                msg_index.append(m_offset[k] + np.arange(size))
                msg_child.append(n_child + np.arange(size))
                src.append(b_offset[parent_pos] + np.arange(parent_maps[k].size))
                local.append(n_msg + parent_maps[k])
                parent_c.append(np.full(size, counting[parent_pos]))
                n_msg += size
            n_child += size
        child_entries = _cat(child_entries)
        batches.append(SweepBatch(
            children=tuple(group),
            msg_index=_cat(msg_index),
            child_entries=child_entries,
            msg_child=_cat(msg_child),
            marg_src=_cat(src),
            marg_local=_cat(local),
            msg_parent_counting=np.concatenate(parent_c),
            child_counting=np.repeat(counting, b_sizes)[child_entries],
            denominator=np.concatenate(den),
        ))

    top = np.asarray([not edges_of[r] for r in active], dtype=bool)
    logger.debug(f"path layout: {len(active)} active regions, {len(edges)} edges, {len(batches)} batches")
    return PathLayout(
        rg=rg,
        cardinalities=cardinalities,
        region_ids=tuple(active),
        position=position,
        axes=axes,
        counting=counting,
        b_offset=b_offset,
        p_offset=p_offset,
        past_index=past_index,
        future_index=future_index,
        entry_counting=np.repeat(counting, b_sizes),
        past_counting=np.repeat(counting, p_sizes),
        top_past=np.repeat(top, p_sizes),
        edges=tuple(edges),
        m_offset=m_offset,
        msg_child_entry=_cat(child_entry),
        marg_src=_cat(marg_src),
        marg_dst=_cat(marg_dst),
        denominators=denominators,
        factor_order=factor_order,
        factor_src=_cat(factor_src),
        factor_dst=_cat(factor_dst),
        inactive_source=inactive_source,
        batches=tuple(batches),
    )


def layout_for(tm: TemporalModel) -> PathLayout:
    cards = tuple(sorted(tm.cardinalities.items()))
    factor_axes = tuple(sorted((f.id, f.past_scope, f.future_scope) for f in tm.factors))
    return path_layout(tm.region_graph, cards, factor_axes)


# ---------- stores ----------

@dataclass
class PathBeliefStore:
    """Path beliefs of the active regions (flat) plus priors b_a(x^t) of every region."""

    layout: PathLayout
    beliefs: np.ndarray
    priors: Dict[int, np.ndarray]
    prior_flat: np.ndarray = field(init=False)

    def __post_init__(self):
        self.prior_flat = np.concatenate(
            [np.asarray(self.priors[r], dtype=float).ravel() for r in self.layout.region_ids]
        ) if self.layout.region_ids else np.zeros(0)

    @classmethod
    def from_tables(cls, layout: PathLayout, tables: Dict[int, np.ndarray], priors: Dict[int, np.ndarray]):
        beliefs = np.concatenate([np.asarray(tables[r], dtype=float).ravel() for r in layout.region_ids])
        return cls(layout, beliefs, priors)

    def table(self, region_id: int) -> np.ndarray:
        """Path table with axes (past vars..., future vars...) in ascending id order."""
        layout = self.layout
        if region_id in layout.position:
            k = layout.position[region_id]
            return self.beliefs[layout.b_offset[k]:layout.b_offset[k + 1]].reshape(layout.shape(region_id))
        source = layout.inactive_source[region_id]
        return marginalize_to_axes(
            self.table(source), _path_axes(layout.axes[source]), _path_axes(layout.axes[region_id])
        )

    def copy(self) -> "PathBeliefStore":
        return PathBeliefStore(self.layout, self.beliefs.copy(), self.priors)


@dataclass
class DynMessageStore:
    """Log messages: child->parent m_{b->a} per edge and past-state m_a per region."""

    layout: PathLayout
    edge_log: np.ndarray
    past_log: np.ndarray

    @classmethod
    def ones(cls, layout: PathLayout) -> "DynMessageStore":
        return cls(layout, np.zeros(int(layout.m_offset[-1])), np.zeros(layout.past_size))

    def message(self, parent: int, child: int) -> np.ndarray:
        k = self.layout.edges.index((parent, child))
        lo, hi = self.layout.m_offset[k], self.layout.m_offset[k + 1]
        return np.exp(self.edge_log[lo:hi]).reshape(self.layout.shape(child))

    def past_message(self, region_id: int) -> np.ndarray:
        k = self.layout.position[region_id]
        lo, hi = self.layout.p_offset[k], self.layout.p_offset[k + 1]
        cards = tuple(self.layout.cardinalities[v] for v in self.layout.axes[region_id])
        return np.exp(self.past_log[lo:hi]).reshape(cards)

    def copy(self) -> "DynMessageStore":
        return DynMessageStore(self.layout, self.edge_log.copy(), self.past_log.copy())


# ---------- diagnostics ----------

@dataclass
class SweepRecord:
    sweep: int
    max_delta: float
    past_residual: float
    parent_residual: float
    ppf_value: float


@dataclass
class StepDiagnostics:
    sweeps: List[SweepRecord]
    converged: bool
    iterations: int
    ppf_increases: int = 0
    free_energy: float = float("nan")


@dataclass
class StepResult:
    next_priors: Dict[int, np.ndarray]
    path: PathBeliefStore
    messages: DynMessageStore
    diagnostics: StepDiagnostics


# ---------- solver ----------

class PathSolver:
    """Message passing over the path beliefs of one temporal model.

    With enforce_past=True this is DynBP (past-state messages keep every
    region's past marginal equal to its prior). With enforce_past=False the
    past marginals are left free, which is GBP on the space-time graph with the
    region priors as extra factors.
    """

    def __init__(self, tm: TemporalModel, opts: SolverOptions, enforce_past: bool = True):
        self.tm = tm
        self.opts = opts
        self.enforce_past = enforce_past
        self.logger = logging.getLogger(__name__)
        self.layout = layout_for(tm)
        self.local_log = self._local_log()

    @cached_property
    def degenerate_weight(self) -> Optional[float]:
        """Exponent for children with c_child + sum of parent c = 0; raises under "error"."""
        degenerate = self.layout.degenerate_children
        if not degenerate:
            return None
        weight = self.opts.fixed_exponent
        if weight is None:
            r = degenerate[0]
            raise StructuralError(
                f"degenerate exponent at region {r}: c_child + sum of parent counting numbers = 0 "
                f"(parents {self.layout.parents(r)})"
            )
        self.logger.debug(f"fixed exponent {weight:g} on degenerate regions {degenerate}")
        return weight

    def _local_log(self) -> np.ndarray:
        """sum_{a in region} ln f_a, per belief entry."""
        layout = self.layout
        floor = self.opts.clamp_floor
        if not layout.factor_order:
            return np.zeros(layout.size)
        values = np.concatenate([log_clamped(self.tm.factor(a).values, floor) for a in layout.factor_order])
        return np.bincount(layout.factor_dst, weights=values[layout.factor_src], minlength=layout.size)

    def _log(self, values: np.ndarray) -> np.ndarray:
        return log_clamped(values, self.opts.clamp_floor)

    def _normalized(self, log_b: np.ndarray) -> np.ndarray:
        layout = self.layout
        return _log_normalize_segments(log_b, layout.b_offset[:-1], np.diff(layout.b_offset))

    def initial_state(self, priors: Dict[int, np.ndarray]) -> Tuple[PathBeliefStore, DynMessageStore]:
        layout = self.layout
        gap = prior_consistency_gap(self.tm, priors)
        if gap > 1e-6:
            self.logger.warning(f"region priors are inconsistent (max gap {gap:.3e})")
        path = PathBeliefStore(layout, np.zeros(layout.size), priors)
        msgs = DynMessageStore.ones(layout)
        if layout.size:
            base = self._log(path.prior_flat)[layout.past_index] + self.local_log
            path.beliefs = np.exp(self._normalized(base))
        return path, msgs

    def log_beliefs(self, path: PathBeliefStore, msgs: DynMessageStore) -> np.ndarray:
        """Normalized ln b from the messages: base + (in - out + past) / c."""
        layout = self.layout
        term = np.zeros(layout.size)
        if layout.edges:
            term += np.bincount(layout.marg_src, weights=msgs.edge_log[layout.marg_dst], minlength=layout.size)
            term -= np.bincount(layout.msg_child_entry, weights=msgs.edge_log, minlength=layout.size)
        if self.enforce_past:
            term += msgs.past_log[layout.past_index]
        base = self._log(path.prior_flat)[layout.past_index] + self.local_log
        return self._normalized(base + term / layout.entry_counting)

    def _joint_step(
        self, batch: SweepBatch, log_child: np.ndarray, log_marg: np.ndarray, fixed: Optional[float]
    ) -> np.ndarray:
        """Undamped log-message change that brings child and parent marginals to one target.

        target = (c_child ln b_child + sum_p c_p ln M_p) / (c_child + sum_p c_p) and the
        message to parent p moves by c_p (target - ln M_p). Degenerate children fall back
        to fixed * (ln b_child - ln M_p) per edge.
        """
        n = batch.child_entries.size
        pooled = batch.child_counting * log_child + np.bincount(
            batch.msg_child, weights=batch.msg_parent_counting * log_marg, minlength=n
        )
        degenerate = batch.degenerate
        target = pooled / np.where(degenerate, 1.0, batch.denominator)
        step = batch.msg_parent_counting * (target[batch.msg_child] - log_marg)
        if degenerate.any():
            flat = degenerate[batch.msg_child]
            step[flat] = fixed * (log_child[batch.msg_child][flat] - log_marg[flat])
        return step

    def sweep(self, path: PathBeliefStore, msgs: DynMessageStore) -> float:
        """One sweep over the child batches, then the past-state messages; returns max |belief change|."""
        layout = self.layout
        if not layout.size:
            return 0.0
        keep = 1.0 - self.opts.damping
        fixed = self.degenerate_weight
        previous = path.beliefs.copy()
        log_b = self.log_beliefs(path, msgs)

        for batch in layout.batches:
            log_marg = _scatter_logsumexp(log_b[batch.marg_src], batch.marg_local, batch.msg_index.size)
            log_child = log_b[batch.child_entries]
            step = keep * self._joint_step(batch, log_child, log_marg, fixed)
            msgs.edge_log[batch.msg_index] += step
            # a parent gains m / c_parent, the child loses sum m / c_child
            log_b[batch.child_entries] -= np.bincount(
                batch.msg_child, weights=step, minlength=batch.child_entries.size
            ) / batch.child_counting
            log_b[batch.marg_src] += step[batch.marg_local] / layout.entry_counting[batch.marg_src]
            log_b = self._normalized(log_b)

        if self.enforce_past and layout.top_past.any():
            log_prior = self._log(path.prior_flat)
            log_past = _scatter_logsumexp(log_b, layout.past_index, layout.past_size)
            shift = np.where(layout.top_past, keep * layout.past_counting * (log_prior - log_past), 0.0)
            msgs.past_log += shift
            log_b = self._normalized(log_b + shift[layout.past_index] / layout.entry_counting)
            msgs.past_log = _shift_segments(msgs.past_log, layout.p_offset[:-1], np.diff(layout.p_offset))

        if layout.edges:
            msgs.edge_log = _shift_segments(msgs.edge_log, layout.m_offset[:-1], np.diff(layout.m_offset))
        path.beliefs = np.exp(log_b)
        return float(np.max(np.abs(path.beliefs - previous)))

    def residuals(self, path: PathBeliefStore) -> Tuple[float, float]:
        """(max |sum_x' b_a - b_a(x^t)|, max |parent marginal - child belief|)."""
        layout = self.layout
        b = path.beliefs
        if not b.size:
            return 0.0, 0.0
        past_marg = np.bincount(layout.past_index, weights=b, minlength=layout.past_size)
        past_gap = float(np.max(np.abs(past_marg - path.prior_flat)))
        if not layout.edges:
            return past_gap, 0.0
        parent_marg = np.bincount(layout.marg_dst, weights=b[layout.marg_src], minlength=int(layout.m_offset[-1]))
        parent_gap = float(np.max(np.abs(parent_marg - b[layout.msg_child_entry])))
        return past_gap, parent_gap

    def ppf(self, path: PathBeliefStore) -> float:
        """sum_a c_a sum b (H_a + ln b - ln b_a(x^t))."""
        b = path.beliefs
        log_prior = self._log(path.prior_flat)[self.layout.past_index]
        return float(np.sum(self.layout.entry_counting * (xlogy(b, b) - b * self.local_log - b * log_prior)))

    def free_energy(self, path: PathBeliefStore) -> float:
        """sum_a c_a sum b (H_a + ln b): region free energy of the path beliefs."""
        b = path.beliefs
        return float(np.sum(self.layout.entry_counting * (xlogy(b, b) - b * self.local_log)))

    def next_priors(self, path: PathBeliefStore) -> Dict[int, np.ndarray]:
        """b_a(x^{t+dt}) = sum over past states of the path belief, for every region."""
        layout = self.layout
        future = np.bincount(layout.future_index, weights=path.beliefs, minlength=layout.past_size)
        priors = {}
        for k, r in enumerate(layout.region_ids):
            table = future[layout.p_offset[k]:layout.p_offset[k + 1]]
            cards = tuple(layout.cardinalities[v] for v in layout.axes[r])
            priors[r] = (table / table.sum()).reshape(cards)
        for r, source in layout.inactive_source.items():
            priors[r] = marginalize_to_axes(priors[source], layout.axes[source], layout.axes[r])
        return priors

    def solve(self, priors: Dict[int, np.ndarray]) -> StepResult:
        """Iterate sweeps from all-ones messages until beliefs and residuals settle."""
        path, msgs = self.initial_state(priors)
        records = []
        converged = False
        increases = 0
        previous_ppf = self.ppf(path)
        iteration = 0
        for iteration in range(1, self.opts.max_iters + 1):
            delta = self.sweep(path, msgs)
            past_gap, parent_gap = self.residuals(path)
            value = self.ppf(path)
            if value > previous_ppf + 1e-12:
                increases += 1
                self.logger.debug(f"PPF rose by {value - previous_ppf:.3e} at sweep {iteration}")
            previous_ppf = value
            records.append(SweepRecord(iteration, delta, past_gap, parent_gap, value))
            enforced = max(past_gap if self.enforce_past else 0.0, parent_gap)
            if delta < self.opts.tolerance and enforced < self.opts.tolerance:
                converged = True
                break

        if not converged:
            self.logger.warning(
                f"path solver did not converge in {self.opts.max_iters} sweeps "
                f"(delta={records[-1].max_delta:.3e}, residuals={records[-1].past_residual:.3e}/{records[-1].parent_residual:.3e})"
            )
        diagnostics = StepDiagnostics(records, converged, iteration, increases, self.free_energy(path))
        return StepResult(self.next_priors(path), path, msgs, diagnostics)


@lru_cache(maxsize=8)
def solver_for(tm: TemporalModel, opts: SolverOptions, enforce_past: bool = True) -> PathSolver:
    return PathSolver(tm, opts, enforce_past)
