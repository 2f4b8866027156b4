"""Randomised oracle checks of the solver building blocks.

Each check compares a solver component against an independent route to the
same quantity (direct channel evaluation, finite differences, grid scans,
least squares) and reports the worst deviation seen.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .beamforming import beamforming_gradient, beamforming_objective, solve_beamforming
from .channel import PathGeometry, Region, channel_vector, path_coupling
from .position import delta_k, gradient_g, hessian_g, objective_g, position_context
from .projection import project_aux, sinr_of_row


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    count: int
    worst: float
    tolerance: float
    seconds: float
    detail: str = ""

    def describe(self):
        return (f"n={self.count} worst={self.worst:.3g} tol={self.tolerance:.3g} "
                f"time={self.seconds:.2f}s {self.detail}").rstrip()

    def line(self):
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.describe()}"


def _cn(rng, *shape):
    return (rng.normal(size=shape) + 1j * rng.normal(size=shape)) / np.sqrt(2.0)


def random_geometry(rng, n_rx, n_tx, wavelength=1.0):
    half = 0.5 * np.pi
    return PathGeometry(
        rng.uniform(-half, half, n_rx), rng.uniform(-half, half, n_rx),
        rng.uniform(-half, half, n_tx), rng.uniform(-half, half, n_tx),
        _cn(rng, n_rx, n_tx), Region.square(2.0), wavelength)


def random_position_problem(rng, max_dim=6):
    """Random (geometry, fpa, W, t) with L_r, L_t, N, K <= ``max_dim``."""
    L_r, L_t, N, Q = rng.integers(1, max_dim + 1, size=4)
    geom = random_geometry(rng, L_r, L_t, wavelength=rng.choice([1.0, 0.5, 2.0]))
    fpa = rng.uniform(0.0, 3.0, size=(N, 2))
    W = _cn(rng, N, Q)
    t = _cn(rng, Q) * rng.choice([0.0, 0.3, 1.0, 3.0])
    return geom, fpa, W, t


def _context(geom, fpa, W, t):
    return position_context(path_coupling(geom, fpa), W, t, geom.rx_dirs, geom.wavelength)


def check_expansion(n=1000, seed=1, tol=1e-9):
    """Cosine expansion of g against ``sum_q |h(u)^H w_q - t_q|^2`` via the channel model."""
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(n):
        geom, fpa, W, t = random_position_problem(rng)
        ctx = _context(geom, fpa, W, t)
        u = rng.uniform(-2.0, 2.0, size=2)
        h = channel_vector(u, geom, fpa)
        direct = float(np.sum(np.abs(h.conj() @ W - t) ** 2))
        got = float(objective_g(u, ctx))
        worst = max(worst, abs(got - direct) / max(abs(direct), 1e-300))
    return CheckResult("expansion identity", worst <= tol, n, worst, tol, time.perf_counter() - t0)


def check_gradient(n=1000, seed=2, tol=1e-5, step=1e-6):
    """Analytic gradient against central finite differences of g."""
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    worst = 0.0
    eye = np.eye(2)
    for _ in range(n):
        geom, fpa, W, t = random_position_problem(rng)
        ctx = _context(geom, fpa, W, t)
        u = rng.uniform(-2.0, 2.0, size=2)
        fd = np.array([(objective_g(u + step * e, ctx) - objective_g(u - step * e, ctx)) / (2 * step)
                       for e in eye])
        g = gradient_g(u, ctx)
        # floor: finite-difference roundoff ~ eps * |terms| / step
        scale = max(np.linalg.norm(fd), np.linalg.norm(g), 1e-6 * ctx.kappa * float(ctx.const))
        worst = max(worst, float(np.linalg.norm(g - fd)) / scale)
    return CheckResult("gradient vs finite differences", worst <= tol, n, worst, tol,
                       time.perf_counter() - t0)


def check_hessian(n=200, seed=3, tol=1e-4, step=1e-5):
    """Analytic Hessian against second-order central differences of g."""
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    worst = 0.0
    eye = np.eye(2)
    for _ in range(n):
        geom, fpa, W, t = random_position_problem(rng)
        ctx = _context(geom, fpa, W, t)
        u = rng.uniform(-2.0, 2.0, size=2)
        fd = np.empty((2, 2))
        for a in range(2):
            for b in range(2):
                ea, eb = step * eye[a], step * eye[b]
                fd[a, b] = (objective_g(u + ea + eb, ctx) - objective_g(u + ea - eb, ctx)
                            - objective_g(u - ea + eb, ctx) + objective_g(u - ea - eb, ctx)) / (4 * step ** 2)
        H = hessian_g(u, ctx)
        scale = max(np.abs(fd).max(), np.abs(H).max(), 1e-3 * ctx.kappa ** 2 * float(ctx.const))
        worst = max(worst, float(np.abs(H - fd).max()) / scale)
    return CheckResult("hessian vs finite differences", worst <= tol, n, worst, tol,
                       time.perf_counter() - t0)


def check_majorization(n=1000, positions=100, seed=4):
    """Curvature bound against the sampled Hessian spectral norm (zero violations)."""
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    violations = 0
    worst = 0.0
    for _ in range(n):
        geom, fpa, W, t = random_position_problem(rng)
        ctx = _context(geom, fpa, W, t)
        delta = float(delta_k(ctx))
        U = rng.uniform(-3.0, 3.0, size=(positions, 2))
        H = hessian_g(U, ctx)
        norm2 = np.abs(np.linalg.eigvalsh(H)).max(axis=-1)
        if delta == 0.0:
            ratio = 0.0 if np.all(norm2 == 0.0) else np.inf
        else:
            ratio = float(norm2.max() / delta)
        worst = max(worst, ratio)
        violations += int(np.sum(norm2 > delta * (1 + 1e-12)))
    return CheckResult("curvature bound dominates hessian", violations == 0, n * positions,
                       worst, 1.0, time.perf_counter() - t0,
                       f"violations={violations} (worst = max ||H||_2 / delta)")


def random_infeasible_row(rng):
    K = int(rng.integers(1, 9))
    k = int(rng.integers(0, K))
    gamma = 10.0 ** rng.uniform(-0.5, 2.0)
    noise = 10.0 ** rng.uniform(-2.0, 1.0)
    t_bar = _cn(rng, K) * np.sqrt(noise) * 10.0 ** rng.uniform(-1.0, 1.0)
    cross = np.sum(np.abs(t_bar) ** 2) - abs(t_bar[k]) ** 2
    need = gamma * (cross + noise)
    if abs(t_bar[k]) ** 2 >= need:
        t_bar[k] *= np.sqrt(need) / abs(t_bar[k]) * rng.uniform(1e-3, 0.999)
    return t_bar, k, gamma, noise


def grid_root(t_bar, k, gamma, noise, top=1.0 - 1e-9, coarse=1e-3, fine=1e-6):
    """First grid point where F >= 0 (two-level scan, fine step ``fine``)."""
    own = abs(t_bar[k]) ** 2
    cross = float(np.sum(np.abs(t_bar) ** 2) - own)

    def F(lam):
        return own / (1.0 - lam) ** 2 - gamma * cross / (1.0 + lam * gamma) ** 2 - gamma * noise

    grid = np.append(np.arange(0.0, top, coarse), top)
    vals = F(grid)
    i = int(np.argmax(vals >= 0))
    if vals[i] < 0:
        return np.nan
    if i == 0:
        return 0.0
    grid = np.append(np.arange(grid[i - 1], grid[i], fine), grid[i])
    j = int(np.argmax(F(grid) >= 0))
    return float(grid[j])


def check_bisection(n=1000, seed=5, tol=1e-6):
    """Bisection multiplier against a grid scan; KKT equality at the projected row."""
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    worst_lam = worst_eq = 0.0
    for _ in range(n):
        t_bar, k, gamma, noise = random_infeasible_row(rng)
        res = project_aux(t_bar, k, gamma, noise)
        ref = grid_root(t_bar, k, gamma, noise)
        worst_lam = max(worst_lam, abs(res.lam - ref))
        if res.lam > 0:
            worst_eq = max(worst_eq, abs(sinr_of_row(res.row, k, noise) / gamma - 1.0))
    worst = max(worst_lam, worst_eq)
    return CheckResult("bisection vs grid scan", worst <= tol, n, worst, tol,
                       time.perf_counter() - t0,
                       f"lambda_err={worst_lam:.2g} equality_err={worst_eq:.2g}")


def lstsq_beamforming(H, T, rho):
    """Column-wise stacked least squares ``|| [I; H^H/sqrt(2 rho)] w - [0; t/sqrt(2 rho)] ||``."""
    N = H.shape[0]
    s = 1.0 / np.sqrt(2.0 * rho)
    A = np.vstack([np.eye(N), s * H.conj().T])
    rhs = np.vstack([np.zeros((N, T.shape[1])), s * T])
    return np.linalg.lstsq(A, rhs, rcond=None)[0]


def check_beamforming(n=500, seed=6, tol_grad=1e-9, tol_obj=1e-10):
    """Closed-form precoders: first-order residual and objective against least squares."""
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    worst_grad = worst_obj = 0.0
    for _ in range(n):
        N = int(rng.integers(1, 17))
        K = int(rng.integers(1, 9))
        rho = 10.0 ** rng.uniform(-3.0, 2.0)
        H = _cn(rng, N, K) * 10.0 ** rng.uniform(-1.0, 1.0)
        T = _cn(rng, K, K) * 10.0 ** rng.uniform(-1.0, 1.0)
        W = solve_beamforming(H, T, rho)
        grad = np.linalg.norm(beamforming_gradient(W, H, T, rho))
        worst_grad = max(worst_grad, grad / (1.0 + np.linalg.norm(W)))
        ref = beamforming_objective(lstsq_beamforming(H, T, rho), H, T, rho)
        got = beamforming_objective(W, H, T, rho)
        worst_obj = max(worst_obj, abs(got - ref) / max(abs(ref), 1e-300))
    ok = worst_grad <= tol_grad and worst_obj <= tol_obj
    return CheckResult("beamforming optimality", ok, n, max(worst_grad / tol_grad, worst_obj / tol_obj),
                       1.0, time.perf_counter() - t0,
                       f"residual={worst_grad:.2g} objective_err={worst_obj:.2g} (worst is max ratio to tol)")


def inner_descent_violation(trace):
    """Largest relative increase of the penalised objective between consecutive
    inner iterations of the same outer iteration (0 when monotone)."""
    worst = 0.0
    for a, b in zip(trace, trace[1:]):
        if a.outer == b.outer:
            worst = max(worst, (b.objective - a.objective) / max(abs(a.objective), 1e-300))
    return worst


def check_inner_descent(n=100, seed=0, tol=1e-10, min_success=0.95, config=None):
    """Seeded desk-profile solves: monotone inner loop, and the fraction that
    end with ``xi <= eps_outer`` and every SINR target met."""
    from .ao import solve
    from .channel import sample_scenario
    from .config import ScenarioConfig, with_profile
    from .harness import trial_seed

    config = config or with_profile(ScenarioConfig(), "desk")
    t0 = time.perf_counter()
    worst = 0.0
    ok = 0
    for trial in range(n):
        res = solve(sample_scenario(config, trial_seed(seed, trial)), config.solver)
        worst = max(worst, inner_descent_violation(res.trace))
        ok += res.converged
    rate = ok / n
    return CheckResult("inner-loop descent", worst <= tol and rate >= min_success, n, worst, tol,
                       time.perf_counter() - t0, f"converged={rate:.2%} (need {min_success:.0%})")


def run_all(scale=1.0):
    """Run every check with counts scaled by ``scale``."""
    def c(x):
        return max(1, int(round(x * scale)))

    return [
        check_expansion(c(1000)),
        check_gradient(c(1000)),
        check_hessian(c(200)),
        check_majorization(c(1000)),
        check_bisection(c(1000)),
        check_beamforming(c(500)),
        check_inner_descent(c(100)),
    ]
