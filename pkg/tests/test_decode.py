import math
from itertools import combinations

import cvxpy as cp
import numpy as np
import pytest

from qncsim.decode import (
    RIP_THRESHOLD,
    DecodeError,
    DecodeProblem,
    best_rip_scaling,
    c1_constant,
    error_bound,
    exhaustive_sparse_oracle,
    l1_min_decode,
    rip_constant,
)


def gaussian_problem(seed, m, n, k, noise=0.0):
    rng = np.random.default_rng(seed)
    Theta = rng.standard_normal((m, n)) / math.sqrt(m)
    s = np.zeros(n)
    s[rng.choice(n, k, replace=False)] = rng.standard_normal(k)
    w = rng.standard_normal(m)
    z = Theta @ s + noise * w / np.linalg.norm(w)
    return Theta, s, z


def cvx_l1(Theta, z, eps):
    s = cp.Variable(Theta.shape[1])
    cons = [cp.norm(z - Theta @ s, 2) <= eps] if eps > 0 else [Theta @ s == z]
    cp.Problem(cp.Minimize(cp.norm1(s)), cons).solve(solver=cp.CLARABEL)
    return s.value


def problem(Theta, z, eps):
    return DecodeProblem(z, Theta, np.eye(Theta.shape[1]), eps)


@pytest.mark.parametrize("seed", range(10))
def test_noiseless_recovery(seed):
    Theta, s, z = gaussian_problem(seed, 20, 40, 3)
    res = l1_min_decode(problem(Theta, z, 0.0))
    assert np.linalg.norm(res.s_hat - s) <= 1e-6 * np.linalg.norm(s)


@pytest.mark.parametrize("seed", range(8))
def test_noisy_matches_convex_solver(seed):
    Theta, _, z = gaussian_problem(100 + seed, 15, 30, 4, noise=0.1)
    res = l1_min_decode(problem(Theta, z, 0.1))
    ref = cvx_l1(Theta, z, 0.1)
    assert res.l1 == pytest.approx(np.abs(ref).sum(), rel=1e-5)
    assert res.residual_sq <= 0.01 * (1 + 1e-6)
    assert res.certified


def test_phi_maps_back_to_messages():
    rng = np.random.default_rng(3)
    phi, _ = np.linalg.qr(rng.standard_normal((25, 25)))
    s = np.zeros(25)
    s[[2, 9]] = [0.5, -0.3]
    Psi = rng.standard_normal((15, 25))
    x = phi @ s
    res = l1_min_decode(DecodeProblem.from_measurements(Psi @ x, Psi, phi, 0.0))
    assert np.allclose(res.x_hat, x, atol=1e-8)


def test_zero_is_feasible_when_signal_below_radius():
    Theta, _, z = gaussian_problem(1, 10, 20, 2)
    res = l1_min_decode(problem(Theta, z, 1.01 * np.linalg.norm(z)))
    assert not np.any(res.s_hat) and res.certified


def test_infeasible_radius_raises():
    rng = np.random.default_rng(4)
    Theta = rng.standard_normal((12, 5))
    z = rng.standard_normal(12)
    with pytest.raises(DecodeError) as info:
        l1_min_decode(problem(Theta, z, 0.01))
    assert info.value.residual > 0.01


def test_problem_validation():
    with pytest.raises(ValueError):
        DecodeProblem(np.zeros(3), np.zeros((4, 5)), np.eye(5), 0.0)
    with pytest.raises(ValueError):
        DecodeProblem(np.zeros(3), np.zeros((3, 5)), np.eye(4), 0.0)
    with pytest.raises(ValueError):
        DecodeProblem(np.zeros(3), np.zeros((3, 5)), np.eye(5), -1.0)


# -- exhaustive oracle --------------------------------------------------------------


def test_oracle_finds_planted_support():
    Theta, s, z = gaussian_problem(7, 8, 12, 2)
    o = exhaustive_sparse_oracle(z, Theta, 2, 0.0)
    assert o.feasible and o.support == tuple(np.flatnonzero(s))
    assert np.allclose(o.s_hat, s)


def test_oracle_prefers_empty_support_when_allowed():
    Theta, _, z = gaussian_problem(8, 8, 12, 2)
    o = exhaustive_sparse_oracle(z, Theta, 2, np.linalg.norm(z) * 1.001)
    assert o.support == () and o.feasible


def test_oracle_reports_infeasible():
    Theta, _, z = gaussian_problem(9, 8, 12, 3)
    o = exhaustive_sparse_oracle(z, Theta, 1, 0.0)
    assert not o.feasible and len(o.support) == 1


def test_oracle_limits():
    with pytest.raises(ValueError):
        exhaustive_sparse_oracle(np.zeros(3), np.zeros((3, 25)), 2, 0.0)


# -- restricted isometry ----------------------------------------------------------


def brute_rip(Theta, k):
    worst = 0.0
    for S in combinations(range(Theta.shape[1]), k):
        ev = np.linalg.eigvalsh(Theta[:, S].T @ Theta[:, S])
        worst = max(worst, 1 - ev[0], ev[-1] - 1)
    return worst


def test_rip_orthonormal_is_zero():
    Q, _ = np.linalg.qr(np.random.default_rng(0).standard_normal((10, 6)))
    for k in range(1, 7):
        assert rip_constant(Q, k).delta_k < 1e-12


def test_rip_duplicate_column_is_one():
    Q, _ = np.linalg.qr(np.random.default_rng(1).standard_normal((6, 4)))
    Theta = np.column_stack([Q, Q[:, 0]])
    est = rip_constant(Theta, 2)
    assert est.delta_k == pytest.approx(1.0, abs=1e-12)
    assert set(est.worst_support) == {0, 4}


@pytest.mark.parametrize("seed", range(3))
def test_rip_matches_brute_force(seed):
    Theta = np.random.default_rng(seed).standard_normal((6, 9)) / math.sqrt(6)
    for k in (1, 2, 3):
        assert rip_constant(Theta, k).delta_k == pytest.approx(brute_rip(Theta, k), abs=1e-12)


def test_rip_sampling_is_lower_bound():
    Theta = np.random.default_rng(5).standard_normal((12, 30)) / math.sqrt(12)
    with pytest.raises(ValueError):
        rip_constant(Theta, 4, max_supports=100)
    sampled = rip_constant(Theta, 2, max_supports=10, n_samples=50, seed=1)
    full = rip_constant(Theta, 2)
    assert not sampled.exhaustive and sampled.delta_k <= full.delta_k


def test_best_scaling_minimizes_delta():
    Theta = np.random.default_rng(6).standard_normal((10, 14)) * 3.0
    est = rip_constant(Theta, 2)
    c, d = best_rip_scaling(est)
    assert rip_constant(c * Theta, 2).delta_k == pytest.approx(d, rel=1e-10)
    for f in (0.9, 1.1):
        assert rip_constant(f * c * Theta, 2).delta_k >= d


def test_c1_constant():
    assert c1_constant(0.0) == 4.0
    assert c1_constant(0.2) == pytest.approx(4 * math.sqrt(1.2) / (1 - 0.2 * (1 + math.sqrt(2))))
    with pytest.raises(ValueError):
        c1_constant(RIP_THRESHOLD)
    assert error_bound(0.0, 0.5) == 2.0


def test_oracle_spec_examples():
    Theta = np.random.default_rng(11).standard_normal((6, 5))
    o = exhaustive_sparse_oracle(np.zeros(6), Theta, 2, 0.0)
    assert o.support == () and not np.any(o.s_hat)
    o = exhaustive_sparse_oracle(Theta[:, 3], Theta, 2, 0.0)
    assert o.support == (3,) and np.allclose(o.s_hat, np.eye(5)[3])
    z = np.random.default_rng(12).standard_normal(6)
    o = exhaustive_sparse_oracle(z, Theta, 1, 0.0)
    fits = [np.linalg.norm(z - Theta[:, j] * (Theta[:, j] @ z) / (Theta[:, j] @ Theta[:, j])) for j in range(5)]
    assert not o.feasible and o.support == (int(np.argmin(fits)),)


def test_rip_exceeds_sampled_ratios():
    rng = np.random.default_rng(13)
    Theta = rng.standard_normal((8, 12)) / math.sqrt(8)
    delta = rip_constant(Theta, 2).delta_k
    worst = 0.0
    for _ in range(10_000):
        s = np.zeros(12)
        s[rng.choice(12, 2, replace=False)] = rng.standard_normal(2)
        worst = max(worst, abs(np.sum((Theta @ s) ** 2) / np.sum(s**2) - 1))
    assert worst <= delta + 1e-12
    assert worst > 0.5 * delta


def test_l1_optimum_can_beat_sparsest_fit():
    # 10 x 12 draw whose l1 optimum is not 2-sparse: the decoder must follow l1
    rng = np.random.default_rng([7, 31])
    Theta = rng.standard_normal((10, 12)) / math.sqrt(10)
    s = np.zeros(12)
    s[rng.choice(12, 2, replace=False)] = rng.standard_normal(2)
    z = Theta @ s
    res = l1_min_decode(problem(Theta, z, 0.0))
    oracle = exhaustive_sparse_oracle(z, Theta, 2, 0.0)
    assert res.l1 == pytest.approx(np.abs(cvx_l1(Theta, z, 0.0)).sum(), rel=1e-6)
    assert res.l1 < np.abs(oracle.s_hat).sum() - 1e-3
    assert res.certified
