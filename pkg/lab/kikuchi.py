"""
Aggregate state and path variables of a homogeneous binary lattice, and the
per-site path probability function written in those variables.

State variables: x[s] (one site), y[s_i, s_j] (a bond).
Path variables: X[s, s'] (one site over a step), Y[s_i, s_j, s'_i, s'_j].
Index 0 is spin +1, index 1 is spin -1.
"""
import logging
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np
from scipy.special import xlogy

from inference.path_engine import PathBeliefStore
from model.errors import UsageError
from model.region_graph import RegionGraph

logger = logging.getLogger(__name__)


def _index(spin: int) -> Tuple[int, int]:
    if spin not in (1, -1):
        raise ValueError(f"spin must be +1 or -1, got {spin}")
    s = 0 if spin == 1 else 1
    return s, 1 - s


@dataclass
class KikuchiVariables:
    x: np.ndarray
    y: np.ndarray
    X: np.ndarray
    Y: np.ndarray
    spread: float = 0.0  # largest deviation of a single region from the average

    def X_flip(self, spin: int) -> float:
        """X(i): a site leaves spin i."""
        s, t = _index(spin)
        return float(self.X[s, t])

    def Y1(self, spin: int) -> float:
        """Aligned bond (i, i) with one spin flipping away."""
        s, t = _index(spin)
        return float(self.Y[s, s, s, t] + self.Y[s, s, t, s]) / 2.0

    def Y2(self, spin: int) -> float:
        """Broken bond with one spin flipping into alignment at i."""
        s, t = _index(spin)
        return float(self.Y[s, t, s, s] + self.Y[t, s, s, s]) / 2.0

    def future_state(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.X.sum(axis=0), self.Y.sum(axis=(0, 1))


def _check_bethe(rg: RegionGraph, cardinalities: Dict[int, int]):
    if any(card != 2 for card in cardinalities.values()):
        raise UsageError("aggregate variables need binary (spin) variables")
    small, large = [], []
    for region in rg.regions:
        if region.factor_ids:
            if rg.parents(region.id):
                raise UsageError(f"region {region.id} holds factors but has parents; not a Bethe graph")
            large.append(region.id)
        elif len(region.variable_ids) == 1 and not rg.children(region.id):
            small.append(region.id)
        else:
            raise UsageError(f"region {region.id} is neither a factor region nor a single-variable region")
    pairs = [r for r in large if len(rg.region(r).variable_ids) == 2]
    if not small or not pairs:
        raise UsageError("aggregate variables need single-site and bond regions")
    return small, pairs


def aggregate_kikuchi_variables(path: PathBeliefStore, rg: Optional[RegionGraph] = None) -> KikuchiVariables:
    """Average small-region and bond-region beliefs into (x, y, X, Y)."""
    rg = path.layout.rg if rg is None else rg
    small, pairs = _check_bethe(rg, path.layout.cardinalities)

    site_paths = np.stack([path.table(r) for r in small])
    site_priors = np.stack([np.asarray(path.priors[r], dtype=float) for r in small])
    bond_paths = np.stack([path.table(r) for r in pairs])
    bond_priors = np.stack([np.asarray(path.priors[r], dtype=float) for r in pairs])

    means = [a.mean(axis=0) for a in (site_priors, bond_priors, site_paths, bond_paths)]
    spread = max(
        float(np.max(np.abs(a - m))) for a, m in zip((site_priors, bond_priors, site_paths, bond_paths), means)
    )
    return KikuchiVariables(*means, spread=spread)


def kikuchi_relation_residuals(v: KikuchiVariables) -> Dict[str, float]:
    """Normalization and marginal consistency of the aggregate variables."""
    return {
        "x_sum": abs(float(v.x.sum()) - 1.0),
        "y_sum": abs(float(v.y.sum()) - 1.0),
        "X_sum": abs(float(v.X.sum()) - 1.0),
        "Y_sum": abs(float(v.Y.sum()) - 1.0),
        "y_rows": float(np.max(np.abs(v.y.sum(axis=1) - v.x))),
        "y_cols": float(np.max(np.abs(v.y.sum(axis=0) - v.x))),
        "X_past": float(np.max(np.abs(v.X.sum(axis=1) - v.x))),
        "Y_past": float(np.max(np.abs(v.Y.sum(axis=(2, 3)) - v.y))),
    }


def kikuchi_coefficients(coupling: float, field: float) -> Tuple[float, float]:
    """(K, L) for the per-site path function of a +-1 spin model with k_BT = 1."""
    return 2.0 * coupling, 2.0 * field


def kikuchi_ppf(v: KikuchiVariables, K: float, L: float, z: int, theta_dt: float) -> float:
    """(1/N) ln P in aggregate variables, with l(a) = a ln a - a and 0 ln 0 = 0."""

    def ell(a):
        return float(np.sum(xlogy(a, a) - a))

    value = (z - 1) * ell(v.X) - (z / 2.0) * ell(v.Y)
    for spin in (1, -1):
        s, _ = _index(spin)
        value += xlogy(v.X_flip(spin), theta_dt) + xlogy(v.X[s, s], 1.0 - theta_dt)
        value -= z * K * (v.Y1(spin) - v.Y2(spin))
        value -= L * spin * v.X_flip(spin)
    return float(value)


def state_energy(x: np.ndarray, y: np.ndarray, coupling: float, field: float, z: int) -> float:
    """Energy per site of a homogeneous state."""
    aligned = y[0, 0] + y[1, 1] - y[0, 1] - y[1, 0]
    return float(-(coupling * z / 2.0) * aligned - field * (x[0] - x[1]))


def path_energy_change(v: KikuchiVariables, coupling: float, field: float, z: int) -> float:
    """Energy change per site over one step, from the path variables alone."""
    bonds = sum(v.Y1(spin) - v.Y2(spin) for spin in (1, -1))
    return float(2.0 * z * coupling * bonds + 2.0 * field * (v.X_flip(1) - v.X_flip(-1)))
