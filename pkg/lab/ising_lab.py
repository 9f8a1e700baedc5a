"""
Kinetic Ising models on rectangular lattices: static factor graphs, the
factorized spin-flip conditional, and the bridges into mean field and the
exact oracle.

Spins are encoded as states: state 0 is spin +1, state 1 is spin -1.
"""
import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

import config
from model.factor_graph import FactorGraph, FactorTable, VariableDecl
from model.temporal import TemporalFactor, TemporalModel, priors_from_marginals

logger = logging.getLogger(__name__)

SPINS = np.array([1.0, -1.0])
TOPOLOGIES = ("torus", "open")

SeedLike = Union[int, np.random.Generator, None]


def spin_of(state) -> np.ndarray:
    return 1.0 - 2.0 * np.asarray(state, dtype=float)


def lattice_edges(rows: int, cols: int, topology: str) -> List[Tuple[int, int]]:
    """Right and down neighbour of every site, site id = r * cols + c.

    A torus side of length 2 wraps onto the same neighbour, so that pair is
    listed twice and every site keeps four bonds.
    """
    if topology not in TOPOLOGIES:
        raise ValueError(f"topology must be one of {TOPOLOGIES}, got {topology!r}")
    torus = topology == "torus"
    edges = []
    for r in range(rows):
        for c in range(cols):
            i = r * cols + c
            if c + 1 < cols or torus:
                edges.append((i, r * cols + (c + 1) % cols))
            if r + 1 < rows or torus:
                edges.append((i, ((r + 1) % rows) * cols + c))
    return edges


@dataclass(frozen=True)
class IsingParams:
    """Couplings J_ij (aligned with `edges`) and fields h_i on a rows x cols lattice."""

    rows: int
    cols: int
    topology: str
    couplings: Tuple[float, ...]
    fields: Tuple[float, ...]
    seed: Optional[int] = None

    def __post_init__(self):
        if self.rows < 2 or self.cols < 2:
            raise ValueError(f"lattice sides must be >= 2, got {self.rows}x{self.cols}")
        object.__setattr__(self, "couplings", tuple(float(j) for j in self.couplings))
        object.__setattr__(self, "fields", tuple(float(h) for h in self.fields))
        if len(self.couplings) != len(self.edges):
            raise ValueError(f"expected {len(self.edges)} couplings, got {len(self.couplings)}")
        if len(self.fields) != self.n_sites:
            raise ValueError(f"expected {self.n_sites} fields, got {len(self.fields)}")

    @property
    def n_sites(self) -> int:
        return self.rows * self.cols

    @cached_property
    def edges(self) -> List[Tuple[int, int]]:
        return lattice_edges(self.rows, self.cols, self.topology)

    def site(self, row: int, col: int) -> int:
        return row * self.cols + col

    def energy(self, spins: Sequence[float]) -> float:
        """H(s) = -sum_edges J_ij s_i s_j - sum_i h_i s_i."""
        s = np.asarray(spins, dtype=float)
        i, j = np.array(self.edges).T
        return float(-np.dot(self.couplings, s[i] * s[j]) - np.dot(self.fields, s))


@dataclass(frozen=True)
class KineticParams:
    """theta_dt is the per-step flip weight (flip rate times the time step)."""

    theta_dt: float = config.DEFAULT_THETA_DT

    def __post_init__(self):
        if not 0 < self.theta_dt < 1:
            raise ValueError(f"theta_dt must be in (0, 1), got {self.theta_dt}")


# ---------- builders ----------

def build_random_ising(
    rows: int,
    cols: int,
    topology: str = "torus",
    seed: SeedLike = None,
    variance: float = config.ISING_VARIANCE,
    field_variance: Optional[float] = None,
) -> IsingParams:
    """J_ij ~ Normal(0, variance), h_i ~ Normal(0, field_variance or variance), PCG64."""
    rng = np.random.default_rng(seed)
    field_variance = variance if field_variance is None else field_variance
    n_edges = len(lattice_edges(rows, cols, topology))
    couplings = rng.normal(0.0, np.sqrt(variance), n_edges)
    fields = rng.normal(0.0, np.sqrt(field_variance), rows * cols)
    return IsingParams(rows, cols, topology, tuple(couplings), tuple(fields), seed if isinstance(seed, int) else None)


def build_homogeneous_ising(rows: int, cols: int, coupling: float, field: float, topology: str = "torus") -> IsingParams:
    n_edges = len(lattice_edges(rows, cols, topology))
    return IsingParams(rows, cols, topology, (coupling,) * n_edges, (field,) * (rows * cols))


def build_static_ising_fg(p: IsingParams) -> FactorGraph:
    """exp{J_ij s_i s_j} per edge (ids first), then exp{h_i s_i} per site."""
    aligned = np.outer(SPINS, SPINS).ravel()
    factors = [
        FactorTable(k, tuple(sorted((i, j))), np.exp(p.couplings[k] * aligned))
        for k, (i, j) in enumerate(p.edges)
    ]
    offset = len(factors)
    factors += [FactorTable(offset + i, (i,), np.exp(h * SPINS)) for i, h in enumerate(p.fields)]
    return FactorGraph(tuple(VariableDecl(i, 2) for i in range(p.n_sites)), tuple(factors))


def _pair_change() -> np.ndarray:
    """s'_a s'_b - s_a s_b over (past a, past b, future a, future b)."""
    past = np.multiply.outer(SPINS, SPINS)
    return (past[None, None, :, :] - past[:, :, None, None]).ravel()


def _site_table(h: float, theta_dt: float) -> np.ndarray:
    change = SPINS[None, :] - SPINS[:, None]
    flip = np.where(np.eye(2, dtype=bool), 1.0 - theta_dt, theta_dt)
    return (np.exp(h * change) * flip).ravel()


def build_kinetic_conditional(p: IsingParams, k: KineticParams) -> TemporalModel:
    """Factorized trial conditional.

    Edge factors exp{J_ij (s'_i s'_j - s_i s_j)} come first, then per-site
    exp{h_i (s'_i - s_i)} theta^[flip] (1 - theta)^[stay]. Their product is
    exp{-H(x') + H(x)} theta^Nf (1 - theta)^(N - Nf).
    """
    pair = _pair_change()
    factors = []
    for e, (i, j) in enumerate(p.edges):
        scope = tuple(sorted((i, j)))
        factors.append(TemporalFactor(e, scope, scope, np.exp(p.couplings[e] * pair)))
    offset = len(factors)
    for i, h in enumerate(p.fields):
        factors.append(TemporalFactor(offset + i, (i,), (i,), _site_table(h, k.theta_dt)))
    return TemporalModel(tuple(VariableDecl(i, 2) for i in range(p.n_sites)), tuple(factors))


def kinetic_transition_weight(p: IsingParams, k: KineticParams, x_past: Sequence[int], x_future: Sequence[int]) -> float:
    """Unnormalized exp{-H(x') + H(x)} theta^Nf (1 - theta)^(N - Nf) for state vectors."""
    s, s_next = spin_of(x_past), spin_of(x_future)
    flips = int(np.sum(s != s_next))
    return float(
        np.exp(-p.energy(s_next) + p.energy(s))
        * k.theta_dt ** flips
        * (1.0 - k.theta_dt) ** (p.n_sites - flips)
    )


def initial_marginals(p: IsingParams, up: float = 0.9) -> Dict[int, np.ndarray]:
    """Independent start with p(spin +1) = up at every site."""
    return {i: np.array([up, 1.0 - up]) for i in range(p.n_sites)}


def initial_priors(tm: TemporalModel, up: float = 0.9) -> Dict[int, np.ndarray]:
    return priors_from_marginals(tm, {v: np.array([up, 1.0 - up]) for v in tm.cardinalities})


def product_joint(marginals: Dict[int, np.ndarray]) -> np.ndarray:
    """Flat product distribution over ascending variable ids."""
    joint = np.ones(())
    for v in sorted(marginals):
        joint = np.multiply.outer(joint, marginals[v])
    return joint.ravel()


def ising_mean_field_inputs(p: IsingParams) -> Tuple[Dict[Tuple[int, int], float], np.ndarray]:
    """Pair map and field vector for mean_field_solve; repeated bonds add up."""
    couplings: Dict[Tuple[int, int], float] = {}
    for (i, j), value in zip(p.edges, p.couplings):
        key = (min(i, j), max(i, j))
        couplings[key] = couplings.get(key, 0.0) + value
    return couplings, np.array(p.fields)
