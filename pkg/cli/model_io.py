"""
Model files: JSON documents describing variables, static factors, temporal
factors and an optional region graph, plus the canonical JSON writer shared
by model files and run manifests.
"""
import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, TypeAdapter

from model.errors import UsageError
from model.factor_graph import FactorGraph, FactorTable, VariableDecl
from model.region_graph import Region, RegionGraph, compute_counting_numbers
from model.temporal import TemporalFactor, TemporalModel

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


class VariableEntry(BaseModel):
    model_config = ConfigDict(extra="forbid")

    id: int
    cardinality: int = Field(ge=1)


class FactorEntry(BaseModel):
    model_config = ConfigDict(extra="forbid")

    id: int
    scope: List[int]
    table: List[float]


class TemporalFactorEntry(BaseModel):
    model_config = ConfigDict(extra="forbid")

    id: int
    past_scope: List[int] = []
    future_scope: List[int] = []
    table: List[float]


class RegionEntry(BaseModel):
    model_config = ConfigDict(extra="forbid")

    id: int
    variables: List[int]
    factors: List[int] = []
    parents: List[int] = []


class ModelFile(BaseModel):
    model_config = ConfigDict(extra="forbid")

    variables: List[VariableEntry]
    factors: List[FactorEntry] = []
    temporal_factors: List[TemporalFactorEntry] = []
    regions: Optional[List[RegionEntry]] = None

    def _decls(self):
        return tuple(VariableDecl(v.id, v.cardinality) for v in self.variables)

    def factor_graph(self) -> FactorGraph:
        return FactorGraph(self._decls(), tuple(FactorTable(f.id, tuple(f.scope), f.table) for f in self.factors))

    def region_graph(self) -> Optional[RegionGraph]:
        """Supplied regions with counting numbers filled in, or None."""
        if self.regions is None:
            return None
        regions = [Region(r.id, frozenset(r.variables), frozenset(r.factors)) for r in self.regions]
        parents = {r.id: r.parents for r in self.regions}
        return compute_counting_numbers(RegionGraph.from_parents(regions, parents))

    def temporal_model(self, with_regions: bool = True) -> TemporalModel:
        """Without regions the model carries an empty region graph, enough for validation."""
        if not self.temporal_factors:
            raise UsageError("model file has no temporal_factors")
        factors = tuple(
            TemporalFactor(f.id, tuple(f.past_scope), tuple(f.future_scope), f.table) for f in self.temporal_factors
        )
        rg = self.region_graph() if with_regions else RegionGraph((), (), {})
        return TemporalModel(self._decls(), factors, rg)

    @classmethod
    def from_graphs(
        cls,
        fg: Optional[FactorGraph] = None,
        tm: Optional[TemporalModel] = None,
        rg: Optional[RegionGraph] = None,
    ) -> "ModelFile":
        source = fg if fg is not None else tm
        if source is None:
            raise UsageError("need a factor graph or a temporal model")
        doc = {"variables": [{"id": v.id, "cardinality": v.cardinality} for v in source.variables]}
        if fg is not None:
            doc["factors"] = [{"id": f.id, "scope": list(f.scope), "table": f.values.tolist()} for f in fg.factors]
        if tm is not None:
            doc["temporal_factors"] = [
                {
                    "id": f.id,
                    "past_scope": list(f.past_scope),
                    "future_scope": list(f.future_scope),
                    "table": f.values.tolist(),
                }
                for f in tm.factors
            ]
        if rg is not None:
            doc["regions"] = [
                {
                    "id": r.id,
                    "variables": list(r.variables),
                    "factors": sorted(r.factor_ids),
                    "parents": rg.parents(r.id),
                }
                for r in rg.regions
            ]
        return cls.model_validate(doc)


# ---------- canonical JSON ----------

def _encode(value: Any) -> str:
    if isinstance(value, bool) or value is None:
        return json.dumps(value)
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError(f"non-finite float {value} has no JSON form")
        return format(value, ".17g")
    if isinstance(value, str):
        return json.dumps(value, ensure_ascii=False)
    if isinstance(value, Mapping):
        items = sorted((str(k), v) for k, v in value.items())
        return "{" + ",".join(f"{json.dumps(k, ensure_ascii=False)}:{_encode(v)}" for k, v in items) + "}"
    if isinstance(value, (list, tuple)):
        return "[" + ",".join(_encode(v) for v in value) + "]"
    if hasattr(value, "item"):  # numpy scalar
        return _encode(value.item())
    raise TypeError(f"cannot encode {type(value).__name__} as JSON")


def canonical_json(data: Any) -> str:
    """Sorted keys, no whitespace, floats with 17 significant digits, trailing newline."""
    return _encode(data) + "\n"


def load_model(path: PathLike) -> ModelFile:
    """Parse a model file; schema problems raise pydantic.ValidationError."""
    return ModelFile.model_validate_json(Path(path).read_text(encoding="utf-8"))


def save_model(model: ModelFile, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(canonical_json(model.model_dump(exclude_none=True)), encoding="utf-8")
    logger.info(f"wrote model file {path}")
    return path


def load_marginals(path: PathLike) -> Dict[int, List[float]]:
    """JSON object mapping variable id to a distribution."""
    return TypeAdapter(Dict[int, List[float]]).validate_json(Path(path).read_text(encoding="utf-8"))
