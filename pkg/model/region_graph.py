"""
Region graphs: clusters of factors and variables, counting numbers, and the
relation sets used by parent-to-child generalized belief propagation.
"""
import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, FrozenSet, Iterable, List, Mapping, NamedTuple, Optional, Tuple

import networkx as nx

from model.errors import StructuralError, UsageError, ValidationReport
from model.factor_graph import FactorGraph

logger = logging.getLogger(__name__)

Edge = Tuple[int, int]


@dataclass(frozen=True)
class Region:
    id: int
    variable_ids: FrozenSet[int]
    factor_ids: FrozenSet[int] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "variable_ids", frozenset(int(v) for v in self.variable_ids))
        object.__setattr__(self, "factor_ids", frozenset(int(a) for a in self.factor_ids))

    @property
    def variables(self) -> Tuple[int, ...]:
        """Variable ids in ascending order (the axis order of region tables)."""
        return tuple(sorted(self.variable_ids))

    def contains(self, other: "Region") -> bool:
        return (
            other.variable_ids <= self.variable_ids
            and other.factor_ids <= self.factor_ids
            and (other.variable_ids, other.factor_ids) != (self.variable_ids, self.factor_ids)
        )


@dataclass(frozen=True, eq=False)
class RegionGraph:
    """Regions plus parent->child edges; counting numbers may be filled later."""

    regions: Tuple[Region, ...]
    edges: Tuple[Edge, ...] = ()
    counting_numbers: Optional[Mapping[int, int]] = field(default=None)

    def __post_init__(self):
        regions = tuple(sorted(self.regions, key=lambda r: r.id))
        ids = [r.id for r in regions]
        if len(set(ids)) != len(ids):
            raise StructuralError(f"duplicate region ids in {ids}")
        edges = tuple(sorted({(int(p), int(c)) for p, c in self.edges}))
        known = set(ids)
        for p, c in edges:
            if p not in known or c not in known:
                raise StructuralError(f"edge ({p}, {c}) references an unknown region")
            if p == c:
                raise StructuralError(f"self-loop on region {p}")
        object.__setattr__(self, "regions", regions)
        object.__setattr__(self, "edges", edges)
        if self.counting_numbers is not None:
            object.__setattr__(self, "counting_numbers", dict(self.counting_numbers))

    @classmethod
    def from_parents(cls, regions: Iterable[Region], parents: Mapping[int, Iterable[int]], counting_numbers=None):
        edges = [(p, r) for r, ps in parents.items() for p in ps]
        return cls(tuple(regions), tuple(edges), counting_numbers)

    @cached_property
    def graph(self) -> nx.DiGraph:
        g = nx.DiGraph()
        g.add_nodes_from(r.id for r in self.regions)
        g.add_edges_from(self.edges)
        return g

    @cached_property
    def _by_id(self) -> Dict[int, Region]:
        return {r.id: r for r in self.regions}

    @property
    def ids(self) -> List[int]:
        return [r.id for r in self.regions]

    def region(self, region_id: int) -> Region:
        return self._by_id[region_id]

    def parents(self, region_id: int) -> List[int]:
        return sorted(self.graph.predecessors(region_id))

    def children(self, region_id: int) -> List[int]:
        return sorted(self.graph.successors(region_id))

    def ancestors(self, region_id: int) -> FrozenSet[int]:
        return frozenset(nx.ancestors(self.graph, region_id))

    def descendants(self, region_id: int) -> FrozenSet[int]:
        return frozenset(nx.descendants(self.graph, region_id))

    def counting(self, region_id: int) -> int:
        if self.counting_numbers is None:
            raise UsageError("region graph has no counting numbers; call compute_counting_numbers first")
        return self.counting_numbers[region_id]

    def with_counting(self, counting_numbers: Mapping[int, int]) -> "RegionGraph":
        return RegionGraph(self.regions, self.edges, counting_numbers)


class RelationSets(NamedTuple):
    n_set: FrozenSet[Edge]
    d_set: FrozenSet[Edge]
    e_of_r: FrozenSet[int]


def compute_counting_numbers(rg: RegionGraph) -> RegionGraph:
    """c_R = 1 - sum of c over every ancestor (super-region) of R."""
    try:
        order = list(nx.lexicographical_topological_sort(rg.graph))
    except nx.NetworkXUnfeasible as exc:
        raise StructuralError(f"region graph has a cycle: {nx.find_cycle(rg.graph)}") from exc

    counting: Dict[int, int] = {}
    for region_id in order:
        counting[region_id] = 1 - sum(counting[a] for a in nx.ancestors(rg.graph, region_id))
    return rg.with_counting(counting)


def build_bethe_regions(fg: FactorGraph) -> RegionGraph:
    """One large region per factor, one small region per variable."""
    regions = []
    for region_id, f in enumerate(sorted(fg.factors, key=lambda f: f.id)):
        regions.append(Region(region_id, frozenset(f.scope), frozenset([f.id])))

    offset = len(regions)
    small_of = {}
    for k, v in enumerate(sorted(fg.variables, key=lambda v: v.id)):
        small_of[v.id] = offset + k
        regions.append(Region(offset + k, frozenset([v.id])))

    edges = [(large.id, small_of[v]) for large in regions[:offset] for v in large.variables]
    return compute_counting_numbers(RegionGraph(tuple(regions), tuple(edges)))


def validate_counting(rg: RegionGraph, fg: FactorGraph) -> ValidationReport:
    report = ValidationReport()
    if rg.counting_numbers is None:
        report.add("missing_counting", "region graph has no counting numbers")
        return report

    for f in fg.factors:
        total = sum(rg.counting(r.id) for r in rg.regions if f.id in r.factor_ids)
        if total != 1:
            report.add("factor_counting", f"factor {f.id} is counted {total} times")
    for v in fg.variables:
        total = sum(rg.counting(r.id) for r in rg.regions if v.id in r.variable_ids)
        if total != 1:
            report.add("variable_counting", f"variable {v.id} is counted {total} times")
    return report


def validate_region_graph(rg: RegionGraph, fg: FactorGraph) -> ValidationReport:
    """Structure, factor closure, edge containment, acyclicity and counting."""
    report = ValidationReport()
    variables = set(fg.cardinalities)
    factor_ids = {f.id for f in fg.factors}

    for r in rg.regions:
        if not r.variable_ids:
            report.add("empty_region", f"region {r.id} has no variables")
        if r.variable_ids - variables:
            report.add("dangling_reference", f"region {r.id} uses undeclared variables {sorted(r.variable_ids - variables)}")
        if r.factor_ids - factor_ids:
            report.add("dangling_reference", f"region {r.id} uses undeclared factors {sorted(r.factor_ids - factor_ids)}")
            continue
        for a in sorted(r.factor_ids):
            outside = set(fg.factor(a).scope) - r.variable_ids
            if outside:
                report.add("factor_closure", f"region {r.id} holds factor {a} but not its variables {sorted(outside)}")

    for p, c in rg.edges:
        if not rg.region(p).contains(rg.region(c)):
            report.add("edge_containment", f"region {c} is not a proper sub-region of its parent {p}")

    if not nx.is_directed_acyclic_graph(rg.graph):
        report.add("cycle", f"region graph has a cycle: {nx.find_cycle(rg.graph)}")
        return report

    report.extend(validate_counting(rg, fg))
    return report


def _closure(rg: RegionGraph, region_id: int) -> FrozenSet[int]:
    return frozenset([region_id]) | rg.descendants(region_id)


def relation_sets(rg: RegionGraph, parent: int, child: int) -> RelationSets:
    """N(P,R), D(P,R) and E(R) for the parent-to-child message on edge (P,R)."""
    if (parent, child) not in rg.graph.edges:
        raise UsageError(f"({parent}, {child}) is not an edge of the region graph")

    e_p = _closure(rg, parent)
    e_r = _closure(rg, child)
    n_set = frozenset((i, j) for i, j in rg.edges if j in e_p - e_r and i not in e_p)
    d_set = frozenset(
        (i, j) for i, j in rg.edges if j in e_r and i in e_p - e_r and (i, j) != (parent, child)
    )
    return RelationSets(n_set, d_set, e_r)


def belief_message_pairs(rg: RegionGraph, region_id: int) -> FrozenSet[Edge]:
    """Messages entering b_R: edges (I,J) with J in E(R) and I outside E(R)."""
    e_r = _closure(rg, region_id)
    return frozenset((i, j) for i, j in rg.edges if j in e_r and i not in e_r)
