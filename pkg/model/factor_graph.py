"""
Discrete variables, factor tables and factor graphs.

Every table in the project is stored flat, row-major over ascending variable
ids with the last variable varying fastest.
"""
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np

from model.errors import StateIndexError, ValidationReport


@dataclass(frozen=True)
class VariableDecl:
    id: int
    cardinality: int


@dataclass(frozen=True, eq=False)
class FactorTable:
    """Nonnegative table over an ascending scope of variable ids."""

    id: int
    scope: Tuple[int, ...]
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "scope", tuple(int(v) for v in self.scope))
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float).ravel())

    def table(self, cards: Sequence[int]) -> np.ndarray:
        """Values reshaped to one axis per scope variable."""
        return self.values.reshape(tuple(cards))


@dataclass(frozen=True, eq=False)
class FactorGraph:
    variables: Tuple[VariableDecl, ...]
    factors: Tuple[FactorTable, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "factors", tuple(self.factors))

    @cached_property
    def cardinalities(self) -> Dict[int, int]:
        return {v.id: v.cardinality for v in self.variables}

    @cached_property
    def _factor_index(self) -> Dict[int, FactorTable]:
        return {f.id: f for f in self.factors}

    @property
    def num_variables(self) -> int:
        return len(self.variables)

    def factor(self, factor_id: int) -> FactorTable:
        return self._factor_index[factor_id]

    def scope_cards(self, scope: Iterable[int]) -> Tuple[int, ...]:
        return tuple(self.cardinalities[v] for v in scope)

    def factor_table(self, factor_id: int) -> np.ndarray:
        f = self.factor(factor_id)
        return f.table(self.scope_cards(f.scope))

    def factors_of(self, variable_id: int) -> List[int]:
        """Factor ids adjacent to a variable in the bipartite graph."""
        return [f.id for f in self.factors if variable_id in f.scope]

    def joint_cards(self) -> Tuple[int, ...]:
        return tuple(v.cardinality for v in sorted(self.variables, key=lambda v: v.id))

    def joint_size(self) -> int:
        return int(np.prod(self.joint_cards(), dtype=np.int64))


def state_to_index(scope_cardinalities: Sequence[int], assignment: Sequence[int]) -> int:
    """Row-major flat index, last variable fastest."""
    if len(scope_cardinalities) != len(assignment):
        raise StateIndexError(
            f"assignment has {len(assignment)} values for {len(scope_cardinalities)} variables"
        )
    index = 0
    for card, value in zip(scope_cardinalities, assignment):
        if not 0 <= value < card:
            raise StateIndexError(f"state {value} out of range for cardinality {card}")
        index = index * card + int(value)
    return index


def index_to_state(scope_cardinalities: Sequence[int], index: int) -> Tuple[int, ...]:
    size = int(np.prod(scope_cardinalities, dtype=np.int64)) if scope_cardinalities else 1
    if not 0 <= index < size:
        raise StateIndexError(f"flat index {index} out of range for {size} states")
    state = []
    for card in reversed(scope_cardinalities):
        index, value = divmod(index, card)
        state.append(value)
    return tuple(reversed(state))


def evaluate_joint_unnormalized(fg: FactorGraph, assignment: Sequence[int]) -> float:
    """Product of all factor values at a full assignment (indexed by variable id)."""
    if len(assignment) != fg.num_variables:
        raise StateIndexError(
            f"assignment covers {len(assignment)} of {fg.num_variables} variables"
        )
    weight = 1.0
    for f in fg.factors:
        cards = fg.scope_cards(f.scope)
        weight *= f.values[state_to_index(cards, [assignment[v] for v in f.scope])]
    return float(weight)


def validate_factor_graph(fg: FactorGraph) -> ValidationReport:
    report = ValidationReport()

    ids = [v.id for v in fg.variables]
    if sorted(ids) != list(range(len(ids))):
        report.add("variable_ids", f"variable ids must be unique and dense 0..N-1, got {sorted(ids)}")
    for v in fg.variables:
        if v.cardinality < 2:
            report.add("cardinality", f"variable {v.id} has cardinality {v.cardinality} < 2")

    declared = set(ids)
    seen_factors = set()
    for f in fg.factors:
        if f.id in seen_factors:
            report.add("factor_ids", f"duplicate factor id {f.id}")
        seen_factors.add(f.id)

        if not f.scope:
            report.add("scope", f"factor {f.id} has an empty scope")
            continue
        dangling = [v for v in f.scope if v not in declared]
        if dangling:
            report.add("dangling_reference", f"factor {f.id} references undeclared variables {dangling}")
            continue
        if any(a >= b for a, b in zip(f.scope, f.scope[1:])):
            report.add("unsorted_scope", f"factor {f.id} scope {list(f.scope)} is not strictly ascending")

        expected = int(np.prod(fg.scope_cards(f.scope), dtype=np.int64))
        if f.values.size != expected:
            report.add("length", f"factor {f.id} has {f.values.size} values, expected {expected}")
        if np.any(f.values < 0) or not np.all(np.isfinite(f.values)):
            report.add("negative_value", f"factor {f.id} has negative or non-finite values")
        elif not np.any(f.values > 0):
            report.add("all_zero", f"factor {f.id} has no positive value")

    return report
