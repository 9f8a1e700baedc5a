"""
Tests for sum-product BP, parent-to-child GBP, the region free energy and
naive mean field
"""
import numpy as np
import pytest
from scipy.optimize import brentq

from inference.exact_oracle import exact_joint, exact_marginal, exact_partition
from inference.gbp_static import BeliefSet, gbp_parent_to_child, region_free_energy, sum_product_bp
from inference.mean_field import coupling_matrix, mean_field_solve
from inference.options import SolverOptions, parse_degenerate_policy
from model.factor_graph import FactorGraph, FactorTable, VariableDecl
from model.region_graph import Region, RegionGraph, build_bethe_regions, compute_counting_numbers
from model.tables import marginalize_to_axes

TIGHT = SolverOptions(max_iters=1000, tolerance=1e-12)


def random_tree(rng):
    """Six binary variables on a branching tree, each with a unary factor."""
    edges = [(0, 1), (1, 2), (1, 3), (3, 4), (3, 5)]
    factors = [FactorTable(k, e, rng.uniform(0.2, 2.0, 4)) for k, e in enumerate(edges)]
    factors += [FactorTable(len(edges) + v, (v,), rng.uniform(0.5, 1.5, 2)) for v in range(6)]
    return FactorGraph(tuple(VariableDecl(v, 2) for v in range(6)), tuple(factors))


def triangle(rng, strength=0.3):
    pairs = [(0, 1), (1, 2), (0, 2)]
    factors = [FactorTable(k, p, np.exp(rng.uniform(-strength, strength, 4))) for k, p in enumerate(pairs)]
    factors += [FactorTable(3 + v, (v,), np.exp(rng.uniform(-strength, strength, 2))) for v in range(3)]
    return FactorGraph(tuple(VariableDecl(v, 2) for v in range(3)), tuple(factors))


def grid(side, values):
    factors, fid = [], 0
    for r in range(side):
        for c in range(side):
            i = r * side + c
            if c + 1 < side:
                factors.append(FactorTable(fid, (i, i + 1), values))
                fid += 1
            if r + 1 < side:
                factors.append(FactorTable(fid, (i, i + side), values))
                fid += 1
    return FactorGraph(tuple(VariableDecl(v, 2) for v in range(side * side)), tuple(factors))


# ---------- sum-product ----------

def test_bp_single_factor():
    h = 0.4
    fg = FactorGraph((VariableDecl(0, 2),), (FactorTable(0, (0,), [np.exp(h), np.exp(-h)]),))
    result = sum_product_bp(fg, TIGHT)
    assert result.converged
    assert result.beliefs[0] == pytest.approx(np.array([np.exp(h), np.exp(-h)]) / (2 * np.cosh(h)))


def test_bp_is_exact_on_trees():
    fg = random_tree(np.random.default_rng(0))
    result = sum_product_bp(fg, TIGHT)
    assert result.converged
    for v in range(6):
        assert np.allclose(result.beliefs[v], exact_marginal(fg, v), atol=1e-8)


def test_bp_uniform_grid_converges_at_once():
    result = sum_product_bp(grid(3, np.ones(4)))
    assert result.converged
    assert result.iterations == 1
    assert all(np.allclose(result.beliefs[v], 0.5) for v in range(9))


def test_bp_history_frame():
    result = sum_product_bp(triangle(np.random.default_rng(1)))
    frame = result.history_frame()
    assert list(frame.columns) == ["iteration", "max_delta", "free_energy"]
    assert len(frame) == result.iterations


def test_damping_changes_path_not_fixed_point():
    fg = triangle(np.random.default_rng(2))
    tol = 1e-9
    slow = sum_product_bp(fg, SolverOptions(tolerance=tol, damping=0.7, max_iters=2000))
    fast = sum_product_bp(fg, SolverOptions(tolerance=tol, damping=0.2, max_iters=2000))
    assert slow.converged and fast.converged
    for v in range(3):
        assert np.allclose(slow.beliefs[v], fast.beliefs[v], atol=10 * tol)


# ---------- parent-to-child GBP ----------

def test_gbp_bethe_is_exact_on_trees():
    fg = random_tree(np.random.default_rng(3))
    rg = build_bethe_regions(fg)
    result = gbp_parent_to_child(fg, rg, TIGHT)
    assert result.converged
    for region in rg.regions:
        if len(region.variables) == 1:
            expected = exact_marginal(fg, region.variables[0])
            assert np.allclose(result.beliefs[region.id], expected, atol=1e-8)
    assert region_free_energy(fg, rg, result.beliefs) == pytest.approx(-exact_partition(fg), abs=1e-8)


def random_mixed_tree(rng):
    """Up to ten binary or ternary variables joined by a random spanning tree."""
    n = int(rng.integers(2, 11))
    cards = [int(c) for c in rng.choice([2, 3], n)]
    factors = []
    for v in range(1, n):
        u = int(rng.integers(0, v))
        factors.append(FactorTable(len(factors), (u, v), rng.uniform(0.2, 2.0, cards[u] * cards[v])))
    for v in range(n):
        factors.append(FactorTable(len(factors), (v,), rng.uniform(0.5, 1.5, cards[v])))
    return FactorGraph(tuple(VariableDecl(v, c) for v, c in enumerate(cards)), tuple(factors))


@pytest.mark.parametrize("seed", range(50))
def test_bp_and_gbp_are_exact_on_random_trees(seed):
    fg = random_mixed_tree(np.random.default_rng(100 + seed))
    log_z = exact_partition(fg)
    bp = sum_product_bp(fg, TIGHT)
    rg = build_bethe_regions(fg)
    gbp = gbp_parent_to_child(fg, rg, TIGHT)
    assert bp.converged and gbp.converged
    small = {region.variables[0]: region.id for region in rg.regions if not region.factor_ids}
    for v in fg.cardinalities:
        expected = exact_marginal(fg, v)
        assert np.allclose(bp.beliefs[v], expected, atol=1e-8)
        assert np.allclose(gbp.beliefs[small[v]], expected, atol=1e-8)
    assert region_free_energy(fg, rg, gbp.beliefs) == pytest.approx(-log_z, abs=1e-8)


def test_gbp_beliefs_are_compatible_at_fixed_point():
    fg = triangle(np.random.default_rng(4))
    rg = build_bethe_regions(fg)
    result = gbp_parent_to_child(fg, rg, TIGHT)
    assert result.converged
    for parent, child in rg.edges:
        axes_p, axes_c = rg.region(parent).variables, rg.region(child).variables
        marg = marginalize_to_axes(result.beliefs[parent], axes_p, axes_c)
        assert np.allclose(marg, result.beliefs[child], atol=1e-8)


def test_gbp_on_bethe_matches_bp():
    fg = triangle(np.random.default_rng(5))
    rg = build_bethe_regions(fg)
    gbp = gbp_parent_to_child(fg, rg, TIGHT)
    bp = sum_product_bp(fg, TIGHT)
    small = {rg.region(r).variables[0]: r for r in rg.ids if not rg.region(r).factor_ids}
    for v in range(3):
        assert np.allclose(gbp.beliefs[small[v]], bp.beliefs[v], atol=1e-8)


def test_gbp_uniform_is_a_fixed_point():
    fg = grid(3, np.ones(4))
    rg = build_bethe_regions(fg)
    result = gbp_parent_to_child(fg, rg)
    assert result.converged
    assert result.iterations == 1
    for r in rg.ids:
        table = result.beliefs[r]
        assert np.allclose(table, 1.0 / table.size)


def test_free_energy_of_single_region_is_minus_log_z():
    fg = triangle(np.random.default_rng(6))
    rg = compute_counting_numbers(RegionGraph((Region(0, {0, 1, 2}, {f.id for f in fg.factors}),)))
    beliefs = BeliefSet({0: exact_joint(fg).probabilities}, {0: (0, 1, 2)})
    assert region_free_energy(fg, rg, beliefs) == pytest.approx(-exact_partition(fg), abs=1e-12)


def test_uniform_bethe_free_energy():
    fg = grid(3, np.ones(4))
    rg = build_bethe_regions(fg)
    tables = {r.id: np.full((2,) * len(r.variables), 0.5 ** len(r.variables)) for r in rg.regions}
    beliefs = BeliefSet(tables, {r.id: r.variables for r in rg.regions})
    assert region_free_energy(fg, rg, beliefs) == pytest.approx(-9 * np.log(2))


# ---------- mean field ----------

def test_mean_field_decoupled():
    h = np.array([0.3, -0.7, 1.2])
    result = mean_field_solve({}, h, SolverOptions(damping=0.0))
    assert result.converged
    assert np.allclose(result.magnetizations, np.tanh(h), atol=1e-15)
    assert np.allclose(result.state_probabilities(), (1 + np.tanh(h)) / 2)


def test_mean_field_symmetric_fixed_point():
    result = mean_field_solve({(0, 1): 0.5, (1, 2): 0.5}, [0.0, 0.0, 0.0])
    assert result.converged
    assert np.all(result.magnetizations == 0.0)


def test_mean_field_two_spins_against_scalar_root():
    couplings, h = {(0, 1): 0.2}, (0.1, -0.3)
    result = mean_field_solve(couplings, h, SolverOptions(tolerance=1e-14, max_iters=5000))
    m0 = brentq(lambda m: m - np.tanh(0.2 * np.tanh(0.2 * m - 0.3) + 0.1), -1, 1, xtol=1e-15)
    m1 = np.tanh(0.2 * m0 - 0.3)
    assert result.magnetizations == pytest.approx([m0, m1], abs=1e-8)


def test_coupling_matrix_checks_symmetry():
    assert np.allclose(coupling_matrix({(0, 1): 0.2, (1, 0): 0.2}, 2), [[0, 0.2], [0.2, 0]])
    with pytest.raises(ValueError):
        coupling_matrix({(0, 1): 0.2, (1, 0): 0.3}, 2)
    with pytest.raises(ValueError):
        coupling_matrix({(1, 1): 0.2}, 2)


# ---------- options ----------

def test_solver_options_validation():
    with pytest.raises(ValueError):
        SolverOptions(damping=1.0)
    with pytest.raises(ValueError):
        SolverOptions(tolerance=0.0)
    with pytest.raises(ValueError):
        SolverOptions(degenerate_exponent="maybe")
    assert parse_degenerate_policy("fixed:0.5") == 0.5
    assert SolverOptions(degenerate_exponent="error").fixed_exponent is None
