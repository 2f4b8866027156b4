import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from fluidbeam import projection
from fluidbeam.projection import (DegenerateProjection, dual_residual, project_aux, project_rows,
                                  sinr_of_row)
from fluidbeam.verify import check_bisection, grid_root, random_infeasible_row

from conftest import crandn


def test_feasible_row_untouched():
    t_bar = np.array([3.0 + 1.0j, 0.1, -0.2j])
    res = project_aux(t_bar, 0, gamma=2.0, noise_power=1.0)
    assert_array_equal(res.row, t_bar)
    assert res.lam == 0.0 and not res.met_with_equality


@pytest.mark.parametrize("t", [0.1, 0.5 - 0.5j, 2.0j])
def test_single_user_closed_form(t):
    gamma, noise = 10.0, 0.5
    res = project_aux(np.array([t]), 0, gamma, noise)
    assert_allclose(res.lam, 1.0 - abs(t) / np.sqrt(gamma * noise), atol=1e-10)
    assert_allclose(abs(res.row[0]) ** 2, gamma * noise, rtol=1e-9)
    assert_allclose(np.angle(res.row[0]), np.angle(t), atol=1e-12)


def test_grid_scan_k4(rng):
    t_bar = crandn(rng, 4)
    t_bar[2] *= 0.05
    gamma, noise = 5.0, 1.0
    assert dual_residual(0.0, t_bar, 2, gamma, noise) < 0
    res = project_aux(t_bar, 2, gamma, noise)
    assert abs(res.lam - grid_root(t_bar, 2, gamma, noise)) <= 1e-6
    assert_allclose(sinr_of_row(res.row, 2, noise), gamma, rtol=1e-6)


def test_dual_residual_values(rng):
    t_bar = np.array([3.0 + 1.0j, 2.0, 0.5j])
    assert dual_residual(0.0, t_bar, 0, 0.5, 1.0) >= 0
    zero = np.array([0.0, 1.0, 2.0j])
    assert_allclose(dual_residual(0.0, zero, 0, 3.0, 0.2), -3.0 * (1.0 + 4.0 + 0.2))
    lam, g, s = 0.37, 2.5, 0.8
    t = crandn(rng, 5)
    ref = (abs(t[1]) ** 2 / (1 - lam) ** 2
           - g * sum(abs(t[q]) ** 2 for q in (0, 2, 3, 4)) / (1 + lam * g) ** 2 - g * s)
    assert_allclose(dual_residual(lam, t, 1, g, s), ref, rtol=1e-13)


@pytest.mark.parametrize("lam", [-0.1, 1.0, 1.5])
def test_dual_residual_domain(lam):
    with pytest.raises(ValueError):
        dual_residual(lam, np.ones(2), 0, 1.0, 1.0)


def test_projection_is_optimal_against_random_feasible_points(rng):
    for _ in range(20):
        t_bar, k, gamma, noise = random_infeasible_row(rng)
        res = project_aux(t_bar, k, gamma, noise)
        best = np.sum(np.abs(res.row - t_bar) ** 2)
        for _ in range(200):
            cand = res.row + 0.3 * np.linalg.norm(res.row) * crandn(rng, t_bar.size)
            if sinr_of_row(cand, k, noise) >= gamma:
                assert np.sum(np.abs(cand - t_bar) ** 2) >= best * (1 - 1e-9)


def test_rows_are_independent(rng):
    T = crandn(rng, 4, 4) * 0.3
    gam = np.array([3.0, 8.0, 1.0, 20.0])
    Tp, lam, _ = project_rows(T, gam, 0.7)
    for k in range(4):
        res = project_aux(T[k], k, gam[k], 0.7)
        assert_allclose(Tp[k], res.row, rtol=1e-12)
        assert_allclose(lam[k], res.lam, atol=1e-13)


def test_numba_and_numpy_bisection_agree(rng):
    own = np.abs(crandn(rng, 50)) ** 2 * 0.01
    cross = np.abs(crandn(rng, 50)) ** 2
    gam = rng.uniform(1, 30, 50)
    a = projection._bisect(own, cross, gam, 1.0, 1e-10)
    b = projection._bisect_numpy(own, cross, gam, 1.0, 1e-10)
    assert_allclose(a, b, atol=1e-15)


def test_degenerate_row_perturbed_or_raised():
    t_bar = np.array([0.0, 1.0 + 0.0j])
    res = project_aux(t_bar, 0, 10.0, 1.0)
    assert res.perturbed
    assert_allclose(sinr_of_row(res.row, 0, 1.0), 10.0, rtol=1e-6)
    with pytest.raises(DegenerateProjection):
        project_aux(t_bar, 0, 10.0, 1.0, on_degenerate="raise")


@given(st.floats(0.01, 100.0), st.floats(1e-3, 10.0), st.integers(0, 2**32 - 1))
@settings(max_examples=60, deadline=None)
def test_projected_row_is_feasible(gamma, noise, seed):
    rng = np.random.default_rng(seed)
    t_bar = crandn(rng, 3)
    res = project_aux(t_bar, 1, gamma, noise)
    assert sinr_of_row(res.row, 1, noise) >= gamma * (1 - 1e-9)


def test_oracle_suite_small():
    assert check_bisection(n=100, seed=77).passed
