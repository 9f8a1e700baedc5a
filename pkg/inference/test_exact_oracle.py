"""
Tests for the enumeration oracle
"""
import itertools

import numpy as np
import pytest

from inference.exact_oracle import (
    conditional_log_partition,
    exact_joint,
    exact_map,
    exact_marginal,
    exact_partition,
    exact_temporal_evolve,
)
from model.errors import OracleSizeError
from model.factor_graph import FactorGraph, FactorTable, VariableDecl, evaluate_joint_unnormalized
from model.temporal import TemporalFactor, TemporalModel


def chain_graph():
    pair = [2.0, 1.0, 1.0, 2.0]
    return FactorGraph(
        tuple(VariableDecl(i, 2) for i in range(3)),
        (FactorTable(0, (0, 1), pair), FactorTable(1, (1, 2), pair)),
    )


def flip_model(theta):
    return TemporalModel((VariableDecl(0, 2),), (TemporalFactor(0, (0,), (0,), [1 - theta, theta, theta, 1 - theta]),))


def test_partition_all_ones():
    fg = FactorGraph(tuple(VariableDecl(i, 2) for i in range(3)), (FactorTable(0, (0, 1, 2), np.ones(8)),))
    assert exact_partition(fg) == pytest.approx(np.log(8.0))


def test_partition_chain():
    assert np.exp(exact_partition(chain_graph())) == pytest.approx(18.0)


def test_partition_single_factor():
    fg = FactorGraph((VariableDecl(0, 3),), (FactorTable(0, (0,), [0.5, 1.5, 2.0]),))
    assert np.exp(exact_partition(fg)) == pytest.approx(4.0)


def test_partition_invariant_under_factor_order_and_merge():
    rng = np.random.default_rng(0)
    variables = tuple(VariableDecl(i, 2) for i in range(3))
    f1, f2, f3 = rng.uniform(0.1, 2, 4), rng.uniform(0.1, 2, 4), rng.uniform(0.1, 2, 4)
    base = FactorGraph(variables, (FactorTable(0, (0, 1), f1), FactorTable(1, (1, 2), f2), FactorTable(2, (0, 1), f3)))
    shuffled = FactorGraph(variables, tuple(reversed(base.factors)))
    merged = FactorGraph(variables, (FactorTable(0, (0, 1), f1 * f3), FactorTable(1, (1, 2), f2)))
    assert exact_partition(shuffled) == pytest.approx(exact_partition(base), abs=1e-12)
    assert exact_partition(merged) == pytest.approx(exact_partition(base), abs=1e-12)


def test_joint_sums_to_one():
    dist = exact_joint(chain_graph())
    assert dist.probabilities.sum() == pytest.approx(1.0, abs=1e-12)
    assert dist.probabilities[0, 0, 0] == pytest.approx(4.0 / 18.0)


def test_marginal_of_field():
    h = 0.3
    fg = FactorGraph((VariableDecl(0, 2),), (FactorTable(0, (0,), [np.exp(h), np.exp(-h)]),))
    assert exact_marginal(fg, 0)[0] == pytest.approx(np.exp(h) / (np.exp(h) + np.exp(-h)))


def test_marginal_matches_elimination():
    fg = chain_graph()
    f = np.array([[2.0, 1.0], [1.0, 2.0]])
    unnormalized = np.array([sum(f[x1, x2] * f[x2].sum() for x2 in range(2)) for x1 in range(2)])
    assert np.allclose(exact_marginal(fg, 0), unnormalized / unnormalized.sum())


def test_map_single_factor_and_ties():
    fg = FactorGraph((VariableDecl(0, 2),), (FactorTable(0, (0,), [3.0, 1.0]),))
    state, score = exact_map(fg)
    assert state == (0,)
    assert score == pytest.approx(3.0)
    ones = FactorGraph(tuple(VariableDecl(i, 2) for i in range(3)), (FactorTable(0, (0, 1, 2), np.ones(8)),))
    assert exact_map(ones)[0] == (0, 0, 0)


def test_map_matches_exhaustive_scan():
    rng = np.random.default_rng(1)
    variables = tuple(VariableDecl(i, 2) for i in range(9))
    factors, fid = [], 0
    for r in range(3):
        for c in range(3):
            i = 3 * r + c
            if c < 2:
                factors.append(FactorTable(fid, (i, i + 1), rng.uniform(0.1, 3, 4)))
                fid += 1
            if r < 2:
                factors.append(FactorTable(fid, (i, i + 3), rng.uniform(0.1, 3, 4)))
                fid += 1
    fg = FactorGraph(variables, tuple(factors))
    states = list(itertools.product(range(2), repeat=9))
    scores = [evaluate_joint_unnormalized(fg, s) for s in states]
    best = int(np.argmax(scores))
    state, score = exact_map(fg)
    assert state == states[best]
    assert score == pytest.approx(scores[best])


def test_cap_is_enforced():
    fg = FactorGraph(tuple(VariableDecl(i, 2) for i in range(5)), ())
    with pytest.raises(OracleSizeError):
        exact_partition(fg, cap=16)


# ---------- temporal ----------

def test_flip_evolution():
    trajectory = exact_temporal_evolve(flip_model(0.1), [1.0, 0.0], steps=2)
    assert np.allclose(trajectory[1], [0.9, 0.1])
    assert np.allclose(trajectory[2], [0.82, 0.18])


def test_half_flip_reaches_equilibrium_at_once():
    trajectory = exact_temporal_evolve(flip_model(0.5), [0.7, 0.3], steps=2)
    assert np.allclose(trajectory[1], [0.5, 0.5])
    assert np.allclose(trajectory[2], trajectory[1])


def test_identity_dynamics_is_constant():
    identity = [1.0, 0.0, 0.0, 1.0]
    tm = TemporalModel(
        (VariableDecl(0, 2), VariableDecl(1, 2)),
        (TemporalFactor(0, (0,), (0,), identity), TemporalFactor(1, (1,), (1,), identity)),
    )
    b0 = np.array([0.1, 0.2, 0.3, 0.4])
    for b in exact_temporal_evolve(tm, b0, steps=3):
        assert np.allclose(b, b0)


def test_evolution_conserves_probability():
    rng = np.random.default_rng(2)
    tm = TemporalModel(
        tuple(VariableDecl(i, 2) for i in range(3)),
        (
            TemporalFactor(0, (0, 1), (0, 1), rng.uniform(0.1, 1, 16)),
            TemporalFactor(1, (1, 2), (1, 2), rng.uniform(0.1, 1, 16)),
        ),
    )
    for b in exact_temporal_evolve(tm, rng.dirichlet(np.ones(8)), steps=5):
        assert b.sum() == pytest.approx(1.0, abs=1e-12)


def test_conditional_log_partition():
    tm = flip_model(0.2)
    assert np.allclose(conditional_log_partition(tm), [0.0, 0.0])
    doubled = TemporalModel((VariableDecl(0, 2),), (TemporalFactor(0, (0,), (0,), [2.0, 2.0, 1.0, 1.0]),))
    assert np.allclose(conditional_log_partition(doubled), np.log([4.0, 2.0]))


def test_temporal_cap_is_enforced():
    tm = TemporalModel(
        tuple(VariableDecl(i, 2) for i in range(3)),
        (TemporalFactor(0, (0, 1, 2), (0, 1, 2), np.ones(64)),),
    )
    with pytest.raises(OracleSizeError):
        exact_temporal_evolve(tm, np.full(8, 1 / 8), steps=1, cap=4)
