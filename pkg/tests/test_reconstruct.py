import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import grid_ball_lsq, rip_by_definition
from resilient_recon import (
    AttackSpec,
    BallConstraint,
    BudgetExceededError,
    DomainError,
    IndicatorVector,
    InfeasibleError,
    MeasurementModel,
    OracleModel,
    RankDeficientError,
    SupportSet,
    bound_cor1,
    bound_thm1,
    constrained_ls,
    generate_measurement,
    ls_reconstruct,
    reconstruct_with_oracle,
    rip_constant,
    sparse_recover_bruteforce,
)
from resilient_recon.reconstruct import ball_bound, solve_ball_lsq


def test_ls_exact_on_clean_rows():
    C = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [2.0, -1.0]])
    x = np.array([0.3, -1.2])
    y = C @ x
    y[3] += 100.0
    res = ls_reconstruct(y, MeasurementModel(C, 0.0), SupportSet.of([0, 1, 2], 4))
    np.testing.assert_allclose(res.x_hat, x, atol=1e-14)
    assert res.residual_norm < 1e-12
    assert res.bound == 0.0


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_ls_satisfies_normal_equations(seed):
    rng = np.random.default_rng(seed)
    C = rng.standard_normal((8, 3))
    y = rng.standard_normal(8)
    safe = SupportSet.of([0, 2, 3, 5, 7], 8)
    res = ls_reconstruct(y, MeasurementModel(C), safe)
    A, b = C[list(safe)], y[list(safe)]
    np.testing.assert_allclose(A.T @ (A @ res.x_hat - b), 0.0, atol=1e-10)
    assert res.info["sigma_min"] == pytest.approx(np.linalg.svd(A, compute_uv=False)[-1])


def test_ls_rank_deficient():
    C = np.array([[1.0, 2.0], [2.0, 4.0], [0.0, 1.0]])
    with pytest.raises(RankDeficientError):
        ls_reconstruct(np.zeros(3), MeasurementModel(C), SupportSet.of([0, 1], 3))
    with pytest.raises(RankDeficientError):
        ls_reconstruct(np.zeros(3), MeasurementModel(C), SupportSet.of([2], 3))


def test_ball_lsq_projects_to_boundary():
    x, on_boundary, lam = solve_ball_lsq(np.eye(2), np.array([3.0, 0.0]), np.zeros(2), 1.0)
    np.testing.assert_allclose(x, [1.0, 0.0], atol=1e-9)
    assert on_boundary and lam > 0


def test_ball_lsq_interior_solution_unchanged():
    x, on_boundary, lam = solve_ball_lsq(np.eye(2), np.array([0.3, 0.4]), np.zeros(2), 1.0)
    np.testing.assert_allclose(x, [0.3, 0.4], atol=1e-15)
    assert not on_boundary and lam == 0.0


def test_empty_safe_set_returns_center():
    ball = BallConstraint([0.5, -0.5], 2.0)
    C = np.ones((3, 2)) + np.eye(3, 2)
    res = constrained_ls(np.ones(3), MeasurementModel(C), SupportSet.empty(3), ball)
    assert res.x_hat.tolist() == [0.5, -0.5]


def test_rank_deficient_rows_pick_min_norm_step():
    # one row only fixes x1 + x2; the step closest to the center is along (1, 1)
    x, _, _ = solve_ball_lsq(np.array([[1.0, 1.0]]), np.array([2.0]), np.zeros(2), 10.0)
    np.testing.assert_allclose(x, [1.0, 1.0], atol=1e-12)


@settings(max_examples=80, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), radius=st.floats(1e-3, 10.0))
def test_ball_lsq_feasible_and_kkt(seed, radius):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((6, 3))
    b = rng.standard_normal(6) * 5
    c = rng.standard_normal(3)
    x, on_boundary, lam = solve_ball_lsq(A, b, c, radius)
    assert np.linalg.norm(x - c) <= radius * (1 + 1e-12)
    # stationarity: A^T (A x - b) + lam (x - c) = 0
    np.testing.assert_allclose(A.T @ (A @ x - b) + lam * (x - c), 0.0, atol=1e-6 * (1 + np.linalg.norm(A.T @ b)))
    if on_boundary:
        assert np.linalg.norm(x - c) == pytest.approx(radius, abs=1e-9)


@pytest.mark.parametrize("seed", range(5))
def test_ball_lsq_matches_grid_search(seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((5, 2))
    b = rng.standard_normal(5) * 3
    c = rng.standard_normal(2)
    x, _, _ = solve_ball_lsq(A, b, c, 0.5)
    g = grid_ball_lsq(A, b, c, 0.5)
    assert np.linalg.norm(x - g) <= 2e-3


def test_ball_constraint_validation():
    with pytest.raises(DomainError):
        BallConstraint([0.0], 0.0)
    with pytest.raises(DomainError):
        BallConstraint([0.0], np.inf)
    ball = BallConstraint([0.0, 0.0], 1.5)
    assert ball.diameter == 3.0
    assert ball.contains([1.5, 0.0]) and not ball.contains([1.6, 0.0])


def test_rip_examples():
    assert rip_constant(np.eye(4), 3) == pytest.approx(0.0, abs=1e-15)
    D = np.array([[1.0, 1.0], [0.0, 0.0]])
    assert rip_constant(D, 2) == pytest.approx(1.0, abs=1e-12)
    # a single column of norm 2 gives |4 - 1| = 3
    assert rip_constant(np.array([[2.0], [0.0]]), 1) == pytest.approx(3.0)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), rows=st.integers(2, 6), cols=st.integers(2, 7))
def test_rip_matches_definition_and_is_monotone(seed, rows, cols):
    M = np.random.default_rng(seed).standard_normal((rows, cols)) / np.sqrt(rows)
    prev = 0.0
    for S in range(1, min(cols, 4) + 1):
        d = rip_constant(M, S, chunk=7)
        assert d == pytest.approx(rip_by_definition(M, S), abs=1e-12)
        assert d >= prev - 1e-15
        prev = d


def test_rip_budget_guard():
    with pytest.raises(BudgetExceededError):
        rip_constant(np.ones((3, 60)), 6, budget=1000)
    with pytest.raises(DomainError):
        rip_constant(np.eye(3), 4)


def test_bounds():
    assert bound_thm1(0.01, 0.5) == pytest.approx(0.04)
    assert bound_cor1(1.0, 0.1, 0.5) == pytest.approx(0.4)
    assert bound_cor1(0.2, 0.1, 0.5) == pytest.approx(0.2)
    assert ball_bound(3.0, 0.1, None) == 3.0
    assert ball_bound(3.0, 0.1, 1.2) == 3.0
    with pytest.raises(DomainError):
        bound_cor1(1.0, 0.1, 1.0)
    with pytest.raises(DomainError):
        bound_thm1(0.1, 0.0)


@pytest.mark.parametrize("seed", range(5))
def test_bruteforce_recovers_sparse_attack(seed):
    rng = np.random.default_rng(seed)
    m, n = 9, 2
    model = MeasurementModel(rng.standard_normal((m, n)), 0.0)
    attacked = SupportSet.of(rng.choice(m, size=2, replace=False), m)
    x = rng.standard_normal(n)
    y, e, _ = generate_measurement(model, x, AttackSpec(attacked, (1.0, 5.0)), rng)
    x_hat, e_hat, v_hat = sparse_recover_bruteforce(y, model, 2)
    np.testing.assert_allclose(x_hat, x, atol=1e-9)
    np.testing.assert_allclose(e_hat, e, atol=1e-9)
    np.testing.assert_allclose(v_hat, 0.0, atol=1e-9)


def test_bruteforce_infeasible():
    model = MeasurementModel(np.array([[1.0], [1.0], [1.0], [1.0]]), 0.0)
    with pytest.raises(InfeasibleError):
        sparse_recover_bruteforce(np.array([0.0, 1.0, 2.0, 3.0]), model, 1)


def test_reconstruct_with_oracle_pipeline():
    rng = np.random.default_rng(3)
    m, n = 12, 2
    model = MeasurementModel(rng.standard_normal((m, n)) / np.sqrt(m), 0.01)
    x = np.array([0.4, -0.2])
    attacked = SupportSet.of([1, 7], m)
    y, _, _ = generate_measurement(model, x, AttackSpec(attacked, (2.0, 4.0)), rng)
    q_hat = IndicatorVector.from_attacked(attacked)
    oracle = OracleModel.uniform(m, 0.99)
    res = reconstruct_with_oracle(y, model, q_hat, oracle, 0.9, BallConstraint(x + 0.1, 1.0))
    # 0.99**12 < 0.9 <= P(X >= 11)
    assert res.info["l_eta"] == 11
    assert set(res.active_rows).isdisjoint(attacked)
    assert np.linalg.norm(res.x_hat - x) <= res.bound
