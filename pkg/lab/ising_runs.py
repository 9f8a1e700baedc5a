"""
Kinetic Ising experiment battery: belief traces against loopy BP and the
exact chain, the relative-error histogram with its residual curves, and the
DynBP / extended GBP free energy ratio.
"""
import logging
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from tqdm import tqdm

import config
from inference.dynbp import dynbp_evolve
from inference.exact_oracle import exact_temporal_evolve
from inference.extended_gbp import free_energy_ratio
from inference.gbp_static import sum_product_bp
from inference.options import SolverOptions
from lab.ising_lab import (
    IsingParams,
    KineticParams,
    build_kinetic_conditional,
    build_random_ising,
    initial_marginals,
    initial_priors,
    product_joint,
)
from model.errors import OracleSizeError
from model.tables import marginalize_to_axes
from model.temporal import two_slice_factor_graph

logger = logging.getLogger(__name__)

# (field variance, coupling variance)
FIELD_CONFIGS: Tuple[Tuple[float, float], ...] = ((0.1, 0.5), (1.0, 0.1), (0.1, 0.1))
TRACE_THETAS = (0.1, 0.5, 0.9)
HISTOGRAM_BINS = np.linspace(0.0, 1.0, 11)


def config_label(h: float, j: float) -> str:
    return f"h={h:g},j={j:g}"


# ---------- belief traces ----------

def loopy_bp_trace(p: IsingParams, k: KineticParams, node: int, steps: int, opts: SolverOptions, up: float = 0.9) -> List[float]:
    """b_node(+1) from sum-product BP on each step's two-slice graph."""
    tm = build_kinetic_conditional(p, k)
    n = p.n_sites
    marginals = initial_marginals(p, up)
    trace = [float(marginals[node][0])]
    for t in range(steps):
        result = sum_product_bp(two_slice_factor_graph(tm, marginals), opts)
        if not result.converged:
            logger.warning(f"loopy BP comparator did not converge at step {t}")
        marginals = {v: result.beliefs[n + v] for v in range(n)}
        trace.append(float(marginals[node][0]))
    return trace


def exact_trace(p: IsingParams, k: KineticParams, node: int, steps: int, up: float = 0.9, cap: int = None) -> List[float]:
    tm = build_kinetic_conditional(p, k)
    ids = list(range(p.n_sites))
    trajectory = exact_temporal_evolve(tm, product_joint(initial_marginals(p, up)), steps, cap)
    return [float(marginalize_to_axes(b.reshape((2,) * p.n_sites), ids, (node,))[0]) for b in trajectory]


def run_belief_trace(
    p: IsingParams,
    k: KineticParams,
    node: int = 0,
    steps: int = 10,
    opts: SolverOptions = None,
    up: float = 0.9,
    cap: int = None,
) -> pd.DataFrame:
    """Per-step b_node(spin +1) from DynBP, loopy BP and, when it fits, the exact chain."""
    opts = opts or SolverOptions()
    tm = build_kinetic_conditional(p, k)
    trajectory = dynbp_evolve(tm, initial_priors(tm, up), steps, opts)
    frame = pd.DataFrame({
        "t": np.arange(steps + 1),
        "dynbp": trajectory.node_belief(node, 0),
        "loopy_bp": loopy_bp_trace(p, k, node, steps, opts, up),
    })
    try:
        frame["exact"] = exact_trace(p, k, node, steps, up, cap)
    except OracleSizeError as exc:
        logger.info(f"exact trace skipped: {exc}")
        frame["exact"] = np.nan
    frame["converged"] = [True] + [step.converged for step in trajectory.steps]
    return frame


# ---------- relative-error histogram ----------

@dataclass
class ErrorHistogram:
    """Per-step samples, their histogram, per-seed time averages and sweep residuals."""

    samples: pd.DataFrame
    histogram: pd.DataFrame
    residuals: pd.DataFrame
    seed_errors: pd.DataFrame
    seed_histogram: pd.DataFrame

    def fraction_within(self, bound: float = 0.1, label: Optional[str] = None, averaged: bool = False) -> float:
        """Share of samples with error <= bound; `averaged` counts per-seed time averages instead."""
        frame, column = (self.seed_errors, "mean_rel_err") if averaged else (self.samples, "rel_err")
        if label is not None:
            frame = frame[frame["config"] == label]
        return float((frame[column] <= bound).mean())

    def residual_fraction(self, bound: float = 1e-6) -> float:
        """Share of time steps whose last sweep left both residuals below `bound`."""
        last = self.residuals.groupby(["config", "seed", "t"], sort=False).tail(1)
        return float(((last["past_residual"] < bound) & (last["parent_residual"] < bound)).mean())


def _histogram_task(h_var, j_var, seed, rows, cols, k, steps, node, opts, up):
    label = config_label(h_var, j_var)
    p = build_random_ising(rows, cols, "torus", seed, variance=j_var, field_variance=h_var)
    tm = build_kinetic_conditional(p, k)
    trajectory = dynbp_evolve(tm, initial_priors(tm, up), steps, opts)
    dyn = trajectory.node_belief(node, 0)
    exact = np.array(exact_trace(p, k, node, steps, up))
    samples = pd.DataFrame({
        "config": label,
        "h": h_var,
        "j": j_var,
        "seed": seed,
        "t": np.arange(1, steps + 1),
        "dynbp": dyn[1:],
        "exact": exact[1:],
        "rel_err": np.abs(dyn[1:] - exact[1:]) / exact[1:],
        "converged": [step.converged for step in trajectory.steps],
    })
    residuals = trajectory.diagnostics_frame()
    residuals.insert(0, "seed", seed)
    residuals.insert(0, "config", label)
    residuals["t"] += 1
    return samples, residuals


def seed_error_frame(samples: pd.DataFrame) -> pd.DataFrame:
    """rel_err averaged over the simulation period, one row per (config, seed)."""
    grouped = samples.groupby(["config", "seed"], sort=False)
    frame = grouped.agg(mean_rel_err=("rel_err", "mean"), steps=("t", "size"), converged=("converged", "all"))
    return frame.reset_index()


def histogram_frame(samples: pd.DataFrame, column: str = "rel_err") -> pd.DataFrame:
    """Ten equal bins of `column` on [0, 1] plus an overflow bin per config."""
    rows = []
    for label, group in samples.groupby("config", sort=False):
        errors = group[column].to_numpy()
        counts, _ = np.histogram(errors[errors <= 1.0], bins=HISTOGRAM_BINS)
        for lo, hi, count in zip(HISTOGRAM_BINS[:-1], HISTOGRAM_BINS[1:], counts):
            rows.append({"config": label, "bin_lo": lo, "bin_hi": hi, "count": int(count)})
        rows.append({"config": label, "bin_lo": 1.0, "bin_hi": np.inf, "count": int(np.sum(errors > 1.0))})
    return pd.DataFrame(rows, columns=["config", "bin_lo", "bin_hi", "count"])


def run_error_histogram(
    rows: int = 3,
    cols: int = 4,
    configs: Sequence[Tuple[float, float]] = FIELD_CONFIGS,
    seeds: int = 20,
    steps: int = 10,
    opts: SolverOptions = None,
    theta_dt: float = config.DEFAULT_THETA_DT,
    seed: int = 0,
    node: int = 0,
    up: float = 0.9,
    jobs: int = None,
    progress: bool = False,
) -> ErrorHistogram:
    """|b - p| / p at `node` for t = 1..steps over random instances of every config.

    Instance seeds are spawned from `seed` once and shared by all configs.
    """
    if seeds < 1:
        raise ValueError(f"seeds must be >= 1, got {seeds}")
    opts = opts or SolverOptions()
    jobs = jobs or config.MAX_WORKERS
    k = KineticParams(theta_dt)
    instance_seeds = [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(seeds)]
    tasks = [(h, j, s) for h, j in configs for s in instance_seeds]

    results = [None] * len(tasks)
    args = (rows, cols, k, steps, node, opts, up)
    if jobs <= 1:
        for index, (h, j, s) in enumerate(tqdm(tasks, desc="histogram instances", disable=not progress)):
            results[index] = _histogram_task(h, j, s, *args)
    else:
        with ThreadPoolExecutor(max_workers=jobs) as executor:
            futures = {executor.submit(_histogram_task, h, j, s, *args): index for index, (h, j, s) in enumerate(tasks)}
            for future in tqdm(as_completed(futures), total=len(tasks), desc="histogram instances", disable=not progress):
                results[futures[future]] = future.result()

    samples = pd.concat([r[0] for r in results], ignore_index=True)
    residuals = pd.concat([r[1] for r in results], ignore_index=True)
    unconverged = int((~samples["converged"]).sum())
    if unconverged:
        logger.warning(f"{unconverged}/{len(samples)} steps did not converge")
    seed_errors = seed_error_frame(samples)
    return ErrorHistogram(
        samples, histogram_frame(samples), residuals, seed_errors, histogram_frame(seed_errors, "mean_rel_err")
    )


# ---------- free energy ratio ----------

def run_free_energy_ratio(
    rows: int = 3,
    cols: int = 3,
    trials: int = 200,
    seed: int = 0,
    theta_dt: float = config.DEFAULT_THETA_DT,
    steps: int = 1,
    opts: SolverOptions = None,
    variance: float = config.ISING_VARIANCE,
    up: float = 0.9,
    jobs: int = None,
    progress: bool = False,
) -> pd.DataFrame:
    """DynBP / extended GBP free energy per random torus instance, one row per trial."""
    k = KineticParams(theta_dt)

    def model(rng):
        return build_kinetic_conditional(build_random_ising(rows, cols, "torus", rng, variance=variance), k)

    def priors(tm):
        return initial_priors(tm, up)

    results = free_energy_ratio(model, priors, trials, seed, opts, steps, jobs, progress)
    return pd.DataFrame(
        [
            {
                "trial": r.trial,
                "seed": r.seed,
                "dynbp_free_energy": r.dynbp_free_energy,
                "gbp_free_energy": r.gbp_free_energy,
                "ratio": r.ratio,
                "converged": r.converged,
            }
            for r in results
        ],
        columns=["trial", "seed", "dynbp_free_energy", "gbp_free_energy", "ratio", "converged"],
    )
