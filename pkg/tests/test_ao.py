import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from fluidbeam import ao
from fluidbeam.ao import (SolverFrame, initial_state, mrt_initial_precoders, penalized_objective,
                          power_control, solve, violation_xi)
from fluidbeam.baselines import channel_gain_map, collapse_regions, lattice
from fluidbeam.channel import channel_matrix, channel_vector, sinr_all
from fluidbeam.config import PenaltySettings
from fluidbeam.verify import check_inner_descent, inner_descent_violation

from conftest import crandn, small_scenario, uplink_duality_power


class TestPenaltyTerms:
    def test_zero(self):
        assert penalized_objective(np.zeros((3, 2)), np.zeros((2, 2)), np.ones((3, 2)), 0.5) == 0.0

    def test_exact_targets(self, rng):
        H, W = crandn(rng, 4, 3), crandn(rng, 4, 3)
        T = H.conj().T @ W
        assert_allclose(penalized_objective(W, T, H, 1e-3), np.sum(np.abs(W) ** 2), rtol=1e-12)
        assert violation_xi(W, T, H) <= 1e-28

    def test_loop_oracle(self, rng):
        H, W, T = crandn(rng, 3, 2), crandn(rng, 3, 2), crandn(rng, 2, 2)
        pen = [abs(np.vdot(H[:, k], W[:, q]) - T[k, q]) ** 2 for k in range(2) for q in range(2)]
        ref = sum(np.vdot(W[:, k], W[:, k]).real for k in range(2)) + sum(pen) / (2 * 0.3)
        assert_allclose(penalized_objective(W, T, H, 0.3), ref, rtol=1e-13)
        assert_allclose(violation_xi(W, T, H), max(pen), rtol=1e-13)

    def test_single_perturbation(self, rng):
        H, W = crandn(rng, 3, 3), crandn(rng, 3, 3)
        T = H.conj().T @ W
        T[1, 2] += 1e-3
        assert_allclose(violation_xi(W, T, H), 1e-6, rtol=1e-6)


class TestInitialisation:
    def test_mrt_meets_targets_when_possible(self, rng):
        H = crandn(rng, 8, 2)
        gam = np.array([2.0, 3.0])
        W = mrt_initial_precoders(H, gam)
        s = sinr_all(H, W, 1.0)
        assert np.all(s >= gam * (1 - 1e-12))
        assert np.isclose(s / gam, 1.0).any()

    def test_power_control_hits_targets(self, rng):
        H = crandn(rng, 6, 3)
        gam = np.array([1.0, 2.0, 4.0])
        W = power_control(H, mrt_initial_precoders(H, gam), gam, noise=0.5)
        assert_allclose(sinr_all(H, W, 0.5), gam, rtol=1e-10)

    def test_power_control_infeasible(self):
        H = np.array([[1.0, 1.0]], dtype=complex)  # one antenna, two users on one channel
        assert power_control(H, np.ones((1, 2), dtype=complex), np.array([2.0, 2.0])) is None


class TestSolve:
    def test_single_user_single_path_matched_filter(self):
        scen = small_scenario(seed=3, N=2, K=1, L=1)
        res = solve(scen)
        h = channel_vector(res.positions[0], scen.users[0], scen.fpa_positions)
        bound = scen.sinr_targets[0] * scen.noise_power / np.linalg.norm(h) ** 2
        assert res.converged
        assert_allclose(res.total_power, bound, rtol=1e-6)
        assert_allclose(res.per_user_sinr, scen.sinr_targets, rtol=1e-6)

    def test_single_user_multipath_bound(self):
        scen = small_scenario(seed=5, N=2, K=1, L=4)
        res = solve(scen)
        pts = lattice(scen.users[0].region, 1.0 / 100.0)
        best_gain = channel_gain_map(scen.users[0], scen.fpa_positions, pts).max()
        h = channel_vector(res.positions[0], scen.users[0], scen.fpa_positions)
        # matched filter at the reached position, never below the best-gain bound
        assert_allclose(res.total_power, scen.sinr_targets[0] * scen.noise_power / np.linalg.norm(h) ** 2,
                        rtol=1e-6)
        assert res.total_power >= scen.sinr_targets[0] * scen.noise_power / best_gain * (1 - 1e-9)

    @pytest.mark.parametrize("seed", range(6))
    def test_frozen_positions_match_duality_oracle(self, seed):
        scen = small_scenario(seed=seed, N=4, K=2, L=3)
        pos = np.random.default_rng(seed).uniform(-0.5, 0.5, size=(2, 2))
        res = solve(collapse_regions(scen, pos))
        assert_array_equal(res.positions, pos)
        ref = uplink_duality_power(channel_matrix(pos, scen), scen.sinr_targets, scen.noise_power)
        assert res.converged
        assert res.total_power >= ref * (1 - 1e-9)
        assert_allclose(res.total_power, ref, rtol=1e-3)

    @pytest.mark.parametrize("seed,K", [(2, 3), (4, 4)])
    def test_frozen_gap_closes_with_inner_tolerance(self, seed, K):
        # with K = N the block updates crawl; the gap shrinks as eps_inner does
        scen = small_scenario(seed=seed, N=4, K=K, L=3)
        pos = np.random.default_rng(seed).uniform(-0.5, 0.5, size=(K, 2))
        ref = uplink_duality_power(channel_matrix(pos, scen), scen.sinr_targets, scen.noise_power)
        gaps = [solve(collapse_regions(scen, pos), PenaltySettings(eps_inner=e, max_inner=100_000))
                .total_power / ref - 1 for e in (1e-4, 1e-6, 1e-8)]
        assert all(g >= -1e-9 for g in gaps)
        assert gaps[2] <= gaps[0]
        assert gaps[2] < 1e-3

    def test_frozen_positions_match_socp(self):
        cp = pytest.importorskip("cvxpy")
        scen = small_scenario(seed=8, N=4, K=2, L=3, sinr_target_db=6.0)
        pos = np.zeros((2, 2))
        res = solve(collapse_regions(scen, pos))
        H = channel_matrix(pos, scen) / np.sqrt(scen.noise_power)
        scale = np.sqrt(np.mean(np.sum(np.abs(H) ** 2, axis=0)))
        Hn = H / scale
        W = cp.Variable((4, 2), complex=True)
        cons = [cp.norm(cp.hstack([Hn[:, k].conj() @ W, np.ones(1)]))
                <= np.sqrt(1 + 1 / g) * cp.real(Hn[:, k].conj() @ W[:, k])
                for k, g in enumerate(scen.sinr_targets)]
        prob = cp.Problem(cp.Minimize(cp.sum_squares(W)), cons)
        prob.solve(solver=cp.CLARABEL)
        assert_allclose(res.total_power, prob.value / scale ** 2, rtol=1e-3)

    def test_result_contract(self):
        scen = small_scenario(seed=11, N=6, K=3, L=4)
        res = solve(scen)
        assert res.converged and not res.stalled
        assert res.xi <= PenaltySettings().eps_outer
        assert np.all(res.per_user_sinr >= scen.sinr_targets * (1 - 1e-4))
        for u, r in zip(res.positions, scen.regions):
            assert r.contains(u)
        assert_allclose(res.total_power, np.sum(np.abs(res.W) ** 2))
        assert_allclose(res.per_user_sinr,
                        sinr_all(channel_matrix(res.positions, scen), res.W, scen.noise_power))
        assert res.inner_iterations == len(res.trace)
        assert res.outer_iterations == res.trace[-1].outer + 1

    def test_monotone_inner_loop(self):
        for seed in range(5):
            res = solve(small_scenario(seed=seed, N=6, K=3, L=4))
            assert inner_descent_violation(res.trace) <= 1e-10

    def test_deterministic(self):
        scen = small_scenario(seed=21, N=6, K=3, L=4)
        a, b = solve(scen), solve(scen)
        assert_array_equal(a.W, b.W)
        assert_array_equal(a.positions, b.positions)
        assert a.trace == b.trace

    def test_penalty_decreases_across_outer(self):
        res = solve(small_scenario(seed=2, N=6, K=3, L=4))
        rhos = [e.rho for e in res.trace]
        assert all(b <= a for a, b in zip(rhos, rhos[1:]))
        assert_allclose(rhos[-1], PenaltySettings().rho0 * 0.9 ** (res.outer_iterations - 1))

    def test_outer_cap_reports_nonconvergence(self):
        settings = PenaltySettings(max_outer=3)
        res = solve(small_scenario(seed=2, N=6, K=3, L=4), settings)
        assert res.outer_iterations == 3
        assert res.xi > settings.eps_outer and not res.converged and not res.stalled

    def test_stall_guard(self):
        # ratio 0 demands xi vanish within the window, so the guard fires right after it
        settings = PenaltySettings(stall_window=2, stall_ratio=0.0)
        res = solve(small_scenario(seed=2, N=6, K=3, L=4), settings)
        assert res.stalled and not res.converged
        assert res.outer_iterations == 3

    def test_frame_round_trip(self, rng):
        scen = small_scenario(seed=1)
        frame = SolverFrame(scen, np.zeros((2, 2)))
        W = crandn(rng, 4, 2)
        assert_allclose(frame.to_frame(frame.to_physical(W)), W)
        H = channel_matrix(np.zeros((2, 2)), scen)
        assert_allclose(frame.channels(np.zeros((2, 2))) * frame.gain_scale, H, rtol=1e-12)
        st = initial_state(frame)
        assert st.W.shape == (4, 2)


def test_descent_suite_small():
    assert check_inner_descent(n=5).passed
