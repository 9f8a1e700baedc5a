"""
Extended GBP on the space-time region graph, and the DynBP / GBP free energy
comparison.

The region priors b_a(x^t) enter as extra factors; nothing ties the past
marginal of a path belief back to its prior. Messages run forward only: each
step is solved on its own and only the future marginals move on.
"""
import logging
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass
from typing import Callable, List, Mapping, Union

import numpy as np
from tqdm import tqdm

import config
from inference.dynbp import Trajectory, evolve
from inference.options import SolverOptions
from model.temporal import TemporalModel

logger = logging.getLogger(__name__)

ModelSource = Union[TemporalModel, Callable[[np.random.Generator], TemporalModel]]
PriorSource = Union[Mapping[int, np.ndarray], Callable[[TemporalModel], Mapping[int, np.ndarray]]]


def extended_gbp_evolve(
    tm: TemporalModel,
    priors: Mapping[int, np.ndarray],
    steps: int,
    opts: SolverOptions = None,
    progress: bool = False,
) -> Trajectory:
    """Trajectory whose step diagnostics carry the variational free energy per step."""
    return evolve(tm, priors, steps, opts, enforce_past=False, progress=progress)


@dataclass
class FreeEnergyTrial:
    trial: int
    seed: int
    dynbp_free_energy: float
    gbp_free_energy: float
    converged: bool

    @property
    def ratio(self) -> float:
        if not self.converged or self.gbp_free_energy == 0:
            return float("nan")
        return self.dynbp_free_energy / self.gbp_free_energy


def _run_trial(trial, seed_seq, model, priors, steps, opts) -> FreeEnergyTrial:
    rng = np.random.default_rng(seed_seq)
    tm = model(rng) if callable(model) else model
    start = priors(tm) if callable(priors) else priors
    dyn = evolve(tm, start, steps, opts, enforce_past=True)
    gbp = evolve(tm, start, steps, opts, enforce_past=False)
    converged = dyn.converged and gbp.converged
    if not converged:
        logger.warning(f"trial {trial} skipped: dynbp converged={dyn.converged}, gbp converged={gbp.converged}")
    return FreeEnergyTrial(
        trial=trial,
        seed=int(seed_seq.generate_state(1)[0]),
        dynbp_free_energy=float(sum(dyn.free_energies())),
        gbp_free_energy=float(sum(gbp.free_energies())),
        converged=converged,
    )


def free_energy_ratio(
    model: ModelSource,
    priors: PriorSource,
    trials: int,
    seed: int,
    opts: SolverOptions = None,
    steps: int = 1,
    jobs: int = None,
    progress: bool = False,
) -> List[FreeEnergyTrial]:
    """Run DynBP and extended GBP on `trials` models; one record per trial, in trial order.

    `model` is either a fixed TemporalModel or a factory taking the trial's
    generator (fresh random parameters per trial). Trial seeds are spawned
    from `seed`, so the result does not depend on `jobs`.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    opts = opts or SolverOptions()
    jobs = jobs or config.MAX_WORKERS
    seeds = np.random.SeedSequence(seed).spawn(trials)

    results: List[FreeEnergyTrial] = [None] * trials
    if jobs <= 1:
        for k in tqdm(range(trials), desc="free energy trials", disable=not progress):
            results[k] = _run_trial(k, seeds[k], model, priors, steps, opts)
    else:
        with ThreadPoolExecutor(max_workers=jobs) as executor:
            futures = {
                executor.submit(_run_trial, k, seeds[k], model, priors, steps, opts): k
                for k in range(trials)
            }
            for future in tqdm(as_completed(futures), total=trials, desc="free energy trials", disable=not progress):
                results[futures[future]] = future.result()

    skipped = sum(not r.converged for r in results)
    if skipped:
        logger.warning(f"{skipped}/{trials} trials did not converge and carry no ratio")
    return results


def converged_ratios(results: List[FreeEnergyTrial]) -> List[float]:
    return [r.ratio for r in results if r.converged]
