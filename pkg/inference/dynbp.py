"""
DynBP: path-probability inference over time.

Each step minimizes the path free energy of the region beliefs
b_a(x^t, x^{t+dt}) subject to the prior constraint sum_{x'} b_a = b_a(x^t)
and parent/child consistency, then hands the future marginals on as the next
priors.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np
import pandas as pd
from tqdm import tqdm

from inference.options import SolverOptions
from inference.path_engine import (
    DynMessageStore,
    PathBeliefStore,
    StepDiagnostics,
    StepResult,
    layout_for,
    solver_for,
)
from model.temporal import TemporalModel, variable_marginals

logger = logging.getLogger(__name__)


def make_path_store(
    tm: TemporalModel,
    priors: Mapping[int, np.ndarray],
    tables: Optional[Mapping[int, np.ndarray]] = None,
    opts: SolverOptions = None,
) -> PathBeliefStore:
    """Path store for `tm`: explicit tables, or the all-ones-message starting point."""
    if tables is not None:
        return PathBeliefStore.from_tables(layout_for(tm), tables, dict(priors))
    path, _ = solver_for(tm, opts or SolverOptions()).initial_state(dict(priors))
    return path


def ppf_evaluate(tm: TemporalModel, path: PathBeliefStore, opts: SolverOptions = None) -> float:
    """Path free energy sum_a c_a sum b (H_a + ln b - ln b_a(x^t))."""
    return solver_for(tm, opts or SolverOptions()).ppf(path)


def path_free_energy(tm: TemporalModel, path: PathBeliefStore, opts: SolverOptions = None) -> float:
    """sum_a c_a sum b (H_a + ln b); the free energy compared against extended GBP."""
    return solver_for(tm, opts or SolverOptions()).free_energy(path)


def dynbp_sweep(
    tm: TemporalModel, path: PathBeliefStore, msgs: DynMessageStore, opts: SolverOptions = None
) -> Tuple[PathBeliefStore, DynMessageStore, float]:
    """One ascending-id sweep; stores are updated in place and returned."""
    delta = solver_for(tm, opts or SolverOptions()).sweep(path, msgs)
    return path, msgs, delta


def dynbp_step(tm: TemporalModel, priors: Mapping[int, np.ndarray], opts: SolverOptions = None) -> StepResult:
    """Solve one transition from fresh all-ones messages."""
    return solver_for(tm, opts or SolverOptions(), True).solve(dict(priors))


# ---------- trajectories ----------

@dataclass
class Trajectory:
    """Region priors at t = 0..T plus the diagnostics of every transition."""

    tm: TemporalModel
    priors: List[Dict[int, np.ndarray]]
    steps: List[StepDiagnostics] = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return all(step.converged for step in self.steps)

    @property
    def horizon(self) -> int:
        return len(self.priors) - 1

    def node_marginals(self, t: int) -> Dict[int, np.ndarray]:
        return variable_marginals(self.tm, self.priors[t])

    def node_belief(self, node: int, state: int) -> np.ndarray:
        """b_node(state) for t = 0..T."""
        return np.array([self.node_marginals(t)[node][state] for t in range(len(self.priors))])

    def free_energies(self) -> List[float]:
        return [step.free_energy for step in self.steps]

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for t in range(len(self.priors)):
            for node, marginal in sorted(self.node_marginals(t).items()):
                for state, value in enumerate(marginal):
                    rows.append({"t": t, "node": node, "state": state, "belief": float(value)})
        return pd.DataFrame(rows, columns=["t", "node", "state", "belief"])

    def diagnostics_frame(self) -> pd.DataFrame:
        rows = [
            {
                "t": t,
                "sweep": record.sweep,
                "max_delta": record.max_delta,
                "past_residual": record.past_residual,
                "parent_residual": record.parent_residual,
                "ppf_value": record.ppf_value,
            }
            for t, step in enumerate(self.steps)
            for record in step.sweeps
        ]
        return pd.DataFrame(
            rows, columns=["t", "sweep", "max_delta", "past_residual", "parent_residual", "ppf_value"]
        )


def evolve(
    tm: TemporalModel,
    priors: Mapping[int, np.ndarray],
    steps: int,
    opts: SolverOptions = None,
    enforce_past: bool = True,
    progress: bool = False,
) -> Trajectory:
    """Chain `steps` solves, feeding each step's future marginals forward."""
    if steps < 0:
        raise ValueError(f"steps must be >= 0, got {steps}")
    opts = opts or SolverOptions()
    solver = solver_for(tm, opts, enforce_past)
    trajectory = Trajectory(tm, [dict(priors)])
    for t in tqdm(range(steps), desc="time steps", disable=not progress):
        result = solver.solve(trajectory.priors[-1])
        if not result.diagnostics.converged:
            logger.warning(f"step {t} -> {t + 1} did not converge")
        if result.diagnostics.ppf_increases and enforce_past:
            logger.info(f"step {t} -> {t + 1}: PPF rose on {result.diagnostics.ppf_increases} sweeps")
        trajectory.priors.append(result.next_priors)
        trajectory.steps.append(result.diagnostics)
    return trajectory


def dynbp_evolve(
    tm: TemporalModel,
    priors: Mapping[int, np.ndarray],
    steps: int,
    opts: SolverOptions = None,
    progress: bool = False,
) -> Trajectory:
    return evolve(tm, priors, steps, opts, enforce_past=True, progress=progress)
