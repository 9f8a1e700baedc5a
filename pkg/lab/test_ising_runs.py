"""
Tests for the kinetic Ising experiment runners
"""
import numpy as np
import pandas as pd
import pytest

from inference.options import SolverOptions
from lab.ising_lab import KineticParams, build_homogeneous_ising, build_random_ising
from lab.ising_runs import (
    FIELD_CONFIGS,
    config_label,
    histogram_frame,
    run_belief_trace,
    run_error_histogram,
    run_free_energy_ratio,
)

TIGHT = SolverOptions(max_iters=2000, tolerance=1e-12)


def test_field_configs():
    assert [config_label(h, j) for h, j in FIELD_CONFIGS] == ["h=0.1,j=0.5", "h=1,j=0.1", "h=0.1,j=0.1"]


# ---------- traces ----------

@pytest.mark.parametrize("theta_dt", [0.1, 0.5, 0.9])
def test_free_spins_agree_with_closed_form(theta_dt):
    p = build_homogeneous_ising(3, 3, 0.0, 0.0)
    frame = run_belief_trace(p, KineticParams(theta_dt), node=4, steps=6, opts=TIGHT)
    expected = 0.5 + 0.4 * (1 - 2 * theta_dt) ** np.arange(7)
    assert list(frame.columns) == ["t", "dynbp", "loopy_bp", "exact", "converged"]
    for column in ("dynbp", "loopy_bp", "exact"):
        assert np.allclose(frame[column], expected, atol=1e-8)
    assert frame["converged"].all()


def test_fast_alternation_at_high_flip_weight():
    p = build_homogeneous_ising(3, 3, 0.0, 0.0)
    frame = run_belief_trace(p, KineticParams(0.9), steps=5, opts=TIGHT)
    signs = np.sign(frame["dynbp"].to_numpy() - 0.5)
    assert np.all(signs[1:] == -signs[:-1])


def test_half_flip_weight_is_flat_after_one_step():
    p = build_random_ising(3, 3, "torus", seed=3)
    frame = run_belief_trace(p, KineticParams(0.5), steps=4, opts=TIGHT)
    assert np.allclose(frame["exact"][1:], frame["exact"][1], atol=1e-12)
    assert np.allclose(frame["dynbp"][1:], frame["dynbp"][1], atol=1e-6)


def test_exact_trace_is_skipped_over_the_cap():
    p = build_homogeneous_ising(3, 3, 0.1, 0.0)
    frame = run_belief_trace(p, KineticParams(0.1), steps=2, cap=16)
    assert frame["exact"].isna().all()
    assert frame["dynbp"].notna().all()


# ---------- histogram ----------

def test_free_spins_have_no_error():
    result = run_error_histogram(rows=2, cols=3, configs=[(0.0, 0.0)], seeds=2, steps=4, opts=TIGHT)
    assert len(result.samples) == 2 * 4
    assert (result.samples["rel_err"] < 1e-9).all()
    assert result.fraction_within(0.1) == 1.0
    assert result.histogram["count"].sum() == 8
    assert result.histogram["count"].iloc[0] == 8
    assert {"config", "seed", "t", "past_residual", "parent_residual"} <= set(result.residuals.columns)
    assert result.residuals["t"].min() == 1
    assert result.residual_fraction(1e-9) == 1.0
    assert len(result.seed_errors) == 2
    assert (result.seed_errors["mean_rel_err"] < 1e-9).all()
    assert result.seed_histogram["count"].iloc[0] == 2


def test_seed_errors_average_over_the_simulation_period():
    result = run_error_histogram(rows=2, cols=3, configs=[(0.1, 0.5), (1.0, 0.1)], seeds=3, steps=3, seed=1)
    seed_errors = result.seed_errors
    assert list(seed_errors.columns) == ["config", "seed", "mean_rel_err", "steps", "converged"]
    assert len(seed_errors) == 2 * 3
    assert (seed_errors["steps"] == 3).all()
    for _, row in seed_errors.iterrows():
        mine = result.samples[(result.samples["config"] == row["config"]) & (result.samples["seed"] == row["seed"])]
        assert row["mean_rel_err"] == pytest.approx(mine["rel_err"].mean())
    assert result.seed_histogram.groupby("config", sort=False)["count"].sum().tolist() == [3, 3]
    label = config_label(1.0, 0.1)
    expected = (seed_errors[seed_errors["config"] == label]["mean_rel_err"] <= 0.1).mean()
    assert result.fraction_within(0.1, label, averaged=True) == pytest.approx(expected)


def test_histogram_bins():
    samples = pd.DataFrame({"config": "c", "rel_err": [0.05, 0.15, 0.95, 1.0, 2.0]})
    frame = histogram_frame(samples)
    assert len(frame) == 11
    counts = frame["count"].tolist()
    assert counts[0] == 1 and counts[1] == 1
    assert counts[9] == 2  # the last bin is closed at 1.0
    assert counts[10] == 1
    assert frame["bin_hi"].iloc[10] == np.inf


def test_histogram_is_independent_of_jobs():
    kwargs = dict(rows=2, cols=3, configs=[(0.1, 0.1)], seeds=3, steps=3, seed=5)
    serial = run_error_histogram(**kwargs, jobs=1)
    threaded = run_error_histogram(**kwargs, jobs=3)
    pd.testing.assert_frame_equal(serial.samples, threaded.samples)
    pd.testing.assert_frame_equal(serial.histogram, threaded.histogram)


def test_histogram_needs_a_seed():
    with pytest.raises(ValueError):
        run_error_histogram(seeds=0)


# ---------- free energy ratio ----------

def test_free_energy_ratio_frame():
    frame = run_free_energy_ratio(rows=3, cols=3, trials=3, seed=2)
    assert list(frame.columns) == ["trial", "seed", "dynbp_free_energy", "gbp_free_energy", "ratio", "converged"]
    assert frame["trial"].tolist() == [0, 1, 2]
    assert frame["converged"].all()
    assert frame["ratio"].between(0.8, 1.25).all()


# ---------- full-size checks ----------

@pytest.mark.slow
def test_grid_trace_stays_close_to_the_exact_chain():
    p = build_random_ising(3, 4, "torus", seed=0)
    for theta_dt in (0.1, 0.5, 0.9):
        frame = run_belief_trace(p, KineticParams(theta_dt), steps=8, opts=TIGHT)
        assert frame["converged"].all()
        assert np.abs(frame["dynbp"] - frame["exact"]).max() < 0.05
        assert np.abs(frame["dynbp"] - frame["loopy_bp"]).max() < 0.05
        if theta_dt == 0.5:
            assert np.allclose(frame["dynbp"][1:], frame["dynbp"][1], atol=1e-6)
        if theta_dt == 0.9:
            limit = frame["exact"].iloc[-2:].mean()
            signs = np.sign(frame["dynbp"].to_numpy()[:4] - limit)
            assert np.all(signs[1:] == -signs[:-1])


@pytest.mark.slow
def test_weak_field_histogram_and_residuals():
    result = run_error_histogram(rows=3, cols=4, configs=[(0.1, 0.1)], seeds=20, steps=10, seed=0)
    assert len(result.samples) == 20 * 10
    assert result.fraction_within(0.1) >= 0.4
    assert result.residual_fraction(1e-6) >= 0.9


@pytest.mark.slow
def test_free_energy_ratio_over_many_trials():
    frame = run_free_energy_ratio(rows=3, cols=3, trials=200, seed=0)
    assert frame["converged"].mean() >= 0.9
    ratios = frame.loc[frame["converged"], "ratio"]
    assert ratios.between(0.9, 1.1).mean() >= 0.95
