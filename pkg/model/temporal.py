"""
Temporal (path) models: factorized conditionals p(x' | x) over a fixed set of
variables, region priors, and the space-time graphs built from them.
"""
import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, Mapping, Optional, Sequence, Tuple

import numpy as np

from model.errors import ValidationReport
from model.factor_graph import FactorGraph, FactorTable, VariableDecl
from model.region_graph import (
    Region,
    RegionGraph,
    build_bethe_regions,
    compute_counting_numbers,
)
from model.tables import marginalize_to_axes

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class TemporalFactor:
    """f_a(x'_a | x_a); flat values over (past vars, future vars), last fastest."""

    id: int
    past_scope: Tuple[int, ...]
    future_scope: Tuple[int, ...]
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "past_scope", tuple(int(v) for v in self.past_scope))
        object.__setattr__(self, "future_scope", tuple(int(v) for v in self.future_scope))
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float).ravel())

    @property
    def scope(self) -> Tuple[int, ...]:
        return tuple(sorted(set(self.past_scope) | set(self.future_scope)))

    @property
    def axes(self) -> Tuple[Tuple[str, int], ...]:
        """Path-table axis labels: ("past", v) then ("future", v)."""
        return tuple(("past", v) for v in self.past_scope) + tuple(("future", v) for v in self.future_scope)


@dataclass(frozen=True, eq=False)
class TemporalModel:
    variables: Tuple[VariableDecl, ...]
    factors: Tuple[TemporalFactor, ...]
    region_graph: Optional[RegionGraph] = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(sorted(self.variables, key=lambda v: v.id)))
        object.__setattr__(self, "factors", tuple(self.factors))
        rg = self.region_graph
        if rg is None:
            rg = build_bethe_regions(self.skeleton)
        elif rg.counting_numbers is None:
            rg = compute_counting_numbers(rg)
        object.__setattr__(self, "region_graph", rg)

    @cached_property
    def cardinalities(self) -> Dict[int, int]:
        return {v.id: v.cardinality for v in self.variables}

    @cached_property
    def _factor_index(self) -> Dict[int, TemporalFactor]:
        return {f.id: f for f in self.factors}

    def factor(self, factor_id: int) -> TemporalFactor:
        return self._factor_index[factor_id]

    def cards(self, variables: Sequence[int]) -> Tuple[int, ...]:
        return tuple(self.cardinalities[v] for v in variables)

    def factor_table(self, factor_id: int) -> np.ndarray:
        f = self.factor(factor_id)
        return f.values.reshape(self.cards(f.past_scope) + self.cards(f.future_scope))

    @cached_property
    def skeleton(self) -> FactorGraph:
        """Static graph with one all-ones factor per temporal factor, over past ∪ future."""
        factors = [
            FactorTable(f.id, f.scope, np.ones(int(np.prod(self.cards(f.scope), dtype=np.int64))))
            for f in self.factors
        ]
        return FactorGraph(self.variables, tuple(factors))

    def region_shape(self, region_id: int) -> Tuple[int, ...]:
        return self.cards(self.region_graph.region(region_id).variables)


def validate_temporal_model(tm: TemporalModel) -> ValidationReport:
    report = ValidationReport()
    declared = set(tm.cardinalities)
    covered = set()
    for f in tm.factors:
        for name, scope in (("past", f.past_scope), ("future", f.future_scope)):
            if any(a >= b for a, b in zip(scope, scope[1:])):
                report.add("unsorted_scope", f"temporal factor {f.id} {name} scope {list(scope)} is not ascending")
            if set(scope) - declared:
                report.add("dangling_reference", f"temporal factor {f.id} references undeclared variables {sorted(set(scope) - declared)}")
        if not f.past_scope and not f.future_scope:
            report.add("scope", f"temporal factor {f.id} has empty scopes")
            continue
        if set(f.scope) - declared:
            continue
        expected = int(np.prod(tm.cards(f.past_scope) + tm.cards(f.future_scope), dtype=np.int64))
        if f.values.size != expected:
            report.add("length", f"temporal factor {f.id} has {f.values.size} values, expected {expected}")
        if np.any(f.values < 0) or not np.all(np.isfinite(f.values)):
            report.add("negative_value", f"temporal factor {f.id} has negative or non-finite values")
        covered |= set(f.scope)
    for v in sorted(declared - covered):
        report.add("uncovered_variable", f"variable {v} is not covered by any temporal factor")
    return report


# ---------- region priors ----------

def uniform_priors(tm: TemporalModel) -> Dict[int, np.ndarray]:
    marginals = {v: np.full(c, 1.0 / c) for v, c in tm.cardinalities.items()}
    return priors_from_marginals(tm, marginals)


def priors_from_marginals(tm: TemporalModel, marginals: Mapping[int, Sequence[float]]) -> Dict[int, np.ndarray]:
    """Independent (product) prior for every region."""
    priors = {}
    for region in tm.region_graph.regions:
        table = np.ones(())
        for v in region.variables:
            table = np.multiply.outer(table, np.asarray(marginals[v], dtype=float))
        priors[region.id] = table
    return priors


def priors_from_joint(tm: TemporalModel, joint: np.ndarray) -> Dict[int, np.ndarray]:
    """Exact region marginals of a full joint distribution (flat or shaped)."""
    ids = [v.id for v in tm.variables]
    table = np.asarray(joint, dtype=float).reshape(tm.cards(ids))
    return {
        region.id: marginalize_to_axes(table, ids, region.variables)
        for region in tm.region_graph.regions
    }


def variable_marginals(tm: TemporalModel, priors: Mapping[int, np.ndarray]) -> Dict[int, np.ndarray]:
    """Per-variable marginal taken from the smallest region holding the variable."""
    best: Dict[int, Region] = {}
    for region in tm.region_graph.regions:
        for v in region.variable_ids:
            held = best.get(v)
            if held is None or (len(region.variable_ids), region.id) < (len(held.variable_ids), held.id):
                best[v] = region
    return {
        v: marginalize_to_axes(priors[best[v].id], best[v].variables, (v,))
        for v in tm.cardinalities
    }


def prior_consistency_gap(tm: TemporalModel, priors: Mapping[int, np.ndarray]) -> float:
    """Max |parent prior marginalized onto child - child prior| over all edges."""
    rg = tm.region_graph
    gap = 0.0
    for p, c in rg.edges:
        parent, child = rg.region(p), rg.region(c)
        marg = marginalize_to_axes(priors[p], parent.variables, child.variables)
        gap = max(gap, float(np.max(np.abs(marg - priors[c]))))
    return gap


# ---------- space-time graphs ----------

def two_slice_factor_graph(tm: TemporalModel, past_marginals: Mapping[int, np.ndarray]) -> FactorGraph:
    """Static graph over (past, future) copies: variable v at t is v, at t+1 is N+v.

    Holds every temporal factor plus one unary prior factor per past variable.
    """
    n = len(tm.variables)
    variables = [VariableDecl(v.id, v.cardinality) for v in tm.variables]
    variables += [VariableDecl(n + v.id, v.cardinality) for v in tm.variables]

    factors = []
    for f in tm.factors:
        scope = f.past_scope + tuple(n + v for v in f.future_scope)
        factors.append(FactorTable(f.id, scope, f.values))
    next_id = max((f.id for f in tm.factors), default=-1) + 1
    for k, v in enumerate(sorted(tm.cardinalities)):
        factors.append(FactorTable(next_id + k, (v,), np.asarray(past_marginals[v], dtype=float)))
    return FactorGraph(tuple(variables), tuple(factors))
