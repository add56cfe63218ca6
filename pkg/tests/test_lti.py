import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import stack_by_powers
from resilient_recon import DomainError, IndicatorVector, InfeasibleError, NumericError, OracleModel
from resilient_recon.lti import (
    EstimatorState,
    LtiSystem,
    bruteforce_decoder_fixed,
    bruteforce_decoder_varying,
    certify_correctable_fixed,
    certify_correctable_varying,
    feature_noise_bound,
    featurize,
    find_ambiguous_pattern,
    observability_stack,
    q_max,
    robust_resilient_step,
    stack_outputs,
    windowed_feature_bound,
)


def random_system(seed, n, m, density=1.0):
    rng = np.random.default_rng(seed)
    C = rng.standard_normal((m, n)) * (rng.uniform(size=(m, n)) < density)
    return LtiSystem(rng.standard_normal((n, n)), C)


def stack_with_singular_values(s, m):
    rng = np.random.default_rng(0)
    U, _ = np.linalg.qr(rng.standard_normal((m, len(s))))
    V, _ = np.linalg.qr(rng.standard_normal((len(s), len(s))))
    return observability_stack(LtiSystem(np.eye(len(s)), U @ np.diag(s) @ V.T), 1)


def per_step_patterns(m, T, q):
    per = [c for k in range(q + 1) for c in itertools.combinations(range(m), k)]
    for choice in itertools.product(per, repeat=T):
        yield [k * m + j for k, sub in enumerate(choice) for j in sub]


def test_stack_trivial_cases():
    sys = random_system(1, 3, 4)
    np.testing.assert_array_equal(observability_stack(sys, 1).Phi, sys.C)
    ident = LtiSystem(np.eye(3), sys.C)
    np.testing.assert_array_equal(observability_stack(ident, 3).Phi, np.vstack([sys.C] * 3))


def test_stack_rotation_matches_powers():
    th = 0.3
    A = np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
    stack = observability_stack(LtiSystem(A, np.eye(2)), 3)
    np.testing.assert_allclose(stack.Phi, stack_by_powers(A, np.eye(2), 3), atol=1e-15)
    assert stack.row_map[3] == (1, 1)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), T=st.integers(1, 5))
def test_stack_time_major_and_outputs(seed, T):
    sys = random_system(seed, 3, 4)
    stack = observability_stack(sys, T)
    np.testing.assert_allclose(stack.Phi, stack_by_powers(sys.A, sys.C, T), rtol=1e-12, atol=1e-12)
    x0 = np.random.default_rng(seed).standard_normal(3)
    np.testing.assert_allclose(stack.Phi @ x0, stack_outputs(sys.outputs(x0, T)), rtol=1e-10, atol=1e-10)


def test_decoders_clean_case():
    sys = random_system(2, 3, 4)
    x0 = np.array([1.0, -2.0, 0.5])
    Y = sys.outputs(x0, 2)
    stack = observability_stack(sys, 2)
    np.testing.assert_allclose(bruteforce_decoder_varying(stack_outputs(Y), stack, 0).x0, x0, atol=1e-9)
    np.testing.assert_allclose(bruteforce_decoder_fixed(Y, sys, 2, 0).x0, x0, atol=1e-9)


def test_varying_decoder_moving_attack():
    sys = random_system(5, 2, 4)
    T, q = 3, 1
    assert certify_correctable_varying(sys, T, q)
    assert certify_correctable_varying(sys, T, q, per_step=True)
    stack = observability_stack(sys, T)
    x0 = np.array([0.7, -1.1])
    y = stack.Phi @ x0
    y[[0 * 4 + 1, 1 * 4 + 3, 2 * 4 + 0]] += [3.0, -2.0, 5.0]
    res = bruteforce_decoder_varying(y, stack, q)
    np.testing.assert_allclose(res.x0, x0, atol=1e-9)
    assert res.corrupted.indices == (1, 7, 8)


def test_fixed_decoder_single_node_attack():
    sys = random_system(6, 3, 5)
    assert certify_correctable_fixed(sys, 2, 1)
    x0 = np.array([0.2, 0.4, -0.3])
    Y = sys.outputs(x0, 2)
    Y[3] += [4.0, -1.5]
    res = bruteforce_decoder_fixed(Y, sys, 2, 1)
    np.testing.assert_allclose(res.x0, x0, atol=1e-9)
    assert res.corrupted.one_based() == [4]


def test_fixed_and_varying_decoders_agree_on_time_invariant_attack():
    sys = random_system(7, 2, 5)
    T, q = 2, 1
    assert certify_correctable_fixed(sys, T, q) and certify_correctable_varying(sys, T, q, per_step=True)
    x0 = np.array([1.5, -0.5])
    Y = sys.outputs(x0, T)
    Y[2] += [2.0, 3.0]
    stack = observability_stack(sys, T)
    a = bruteforce_decoder_fixed(Y, sys, T, q).x0
    b = bruteforce_decoder_varying(stack_outputs(Y), stack, q).x0
    np.testing.assert_allclose(a, b, atol=1e-9)
    np.testing.assert_allclose(a, x0, atol=1e-9)


def test_decoder_infeasible():
    sys = LtiSystem(np.eye(1), np.ones((3, 1)))
    with pytest.raises(InfeasibleError):
        bruteforce_decoder_fixed(np.array([[0.0], [1.0], [2.0]]), sys, 1, 1)


def test_certify_square_identity():
    # C = I, A = I, T = 1: removing 2q nodes keeps rank only when nothing is removed
    for m in range(1, 6):
        for q in range(0, 3):
            sys = LtiSystem(np.eye(m), np.eye(m))
            assert certify_correctable_fixed(sys, 1, q) == (m - 2 * q >= m)


def test_certify_generic_rows_threshold():
    # any n rows of a gaussian C are independent, so the certificate is m - 2q >= n
    n = 2
    for m in range(3, 8):
        sys = random_system(m, n, m)
        for q in range(0, 3):
            assert certify_correctable_fixed(sys, 1, q) == (m - 2 * q >= n)


def test_certify_q0_is_observability():
    A = np.array([[1.0, 1.0], [0.0, 1.0]])
    C = np.array([[1.0, 0.0]])
    assert not certify_correctable_varying(LtiSystem(A, C), 1, 0)
    assert certify_correctable_varying(LtiSystem(A, C), 2, 0)
    assert certify_correctable_fixed(LtiSystem(A, C), 2, 0)
    assert not certify_correctable_fixed(LtiSystem(A.T, C), 3, 0)


def test_certify_fixed_matches_sampled_support_form():
    sys = random_system(11, 3, 5)
    stack = observability_stack(sys, 2)
    rng = np.random.default_rng(0)
    # sampled form: every z has more than 2q nodes with a nonzero output row
    for _ in range(2000):
        z = rng.standard_normal(3)
        w = (stack.Phi @ z).reshape(2, 5)
        assert np.count_nonzero(np.any(np.abs(w) > 1e-12, axis=0)) > 2
    assert certify_correctable_fixed(sys, 2, 1)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 3), m=st.integers(2, 5), T=st.integers(1, 3), q=st.integers(0, 1))
def test_certificate_implications(seed, n, m, T, q):
    sys = random_system(seed, n, m, density=0.6)
    per_step = certify_correctable_varying(sys, T, q, per_step=True)
    total = certify_correctable_varying(sys, T, q)
    fixed = certify_correctable_fixed(sys, T, q)
    assert not per_step or total
    assert not per_step or fixed
    if T == 1:
        assert per_step == total == fixed


def test_total_row_certificate_does_not_imply_fixed():
    # removing two whole nodes empties a 2-node system, removing two rows does not
    sys = LtiSystem(np.array([[0.5]]), np.array([[1.0], [2.0]]))
    assert certify_correctable_varying(sys, 2, 1)
    assert not certify_correctable_fixed(sys, 2, 1)


def test_certificate_agrees_with_decoder_sweep():
    # 2-state, 4-node, T=3, q=1: single-corruption patterns
    sys = random_system(21, 2, 4)
    T = 3
    assert certify_correctable_varying(sys, T, 1)
    stack = observability_stack(sys, T)
    x0 = np.array([0.3, -0.8])
    for r in range(stack.Phi.shape[0]):
        y = stack.Phi @ x0
        y[r] += 2.5
        np.testing.assert_allclose(bruteforce_decoder_varying(y, stack, 1, per_step=False).x0, x0, atol=1e-9)


def check_witness(stack, w, q, per_step=False, m=None):
    ya = stack.Phi @ w.x_a + w.e_a
    yb = stack.Phi @ w.x_b + w.e_b
    np.testing.assert_allclose(ya, yb, atol=1e-9)
    assert np.linalg.norm(w.x_a - w.x_b) > 1e-6
    for e in (w.e_a, w.e_b):
        nz = np.flatnonzero(np.abs(e) > 1e-12)
        if per_step:
            assert all(np.sum(nz // m == k) <= q for k in range(stack.T))
        else:
            assert nz.size <= q


def test_ambiguous_pattern_for_uncertified_system():
    # three nodes, three states, two steps: any two moving single-node attacks
    # leave two rows for three unknowns
    sys = random_system(3, 3, 3)
    T, q = 2, 1
    assert certify_correctable_varying(sys, T, q)
    assert not certify_correctable_varying(sys, T, q, per_step=True)
    assert find_ambiguous_pattern(sys, T, q) is None
    w = find_ambiguous_pattern(sys, T, q, per_step=True)
    stack = observability_stack(sys, T)
    check_witness(stack, w, q, per_step=True, m=3)
    # the decoder cannot tell the two explanations apart, so it is wrong on one of them
    ya = stack.Phi @ w.x_a + w.e_a
    x_hat = bruteforce_decoder_varying(ya, stack, q).x0
    assert not (np.allclose(x_hat, w.x_a, atol=1e-8) and np.allclose(x_hat, w.x_b, atol=1e-8))


def test_ambiguous_pattern_total_and_fixed():
    sys = LtiSystem(np.eye(2), np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]))
    assert not certify_correctable_varying(sys, 1, 1)
    check_witness(observability_stack(sys, 1), find_ambiguous_pattern(sys, 1, 1), 1)
    w = find_ambiguous_pattern(sys, 2, 1, fixed=True)
    stack = observability_stack(sys, 2)
    ya, yb = stack.Phi @ w.x_a + w.e_a, stack.Phi @ w.x_b + w.e_b
    np.testing.assert_allclose(ya, yb, atol=1e-9)
    for e in (w.e_a, w.e_b):
        nodes = {stack.row_map[r][0] for r in np.flatnonzero(np.abs(e) > 1e-12)}
        assert len(nodes) <= 1


def test_featurize_eckart_young_example():
    stack = stack_with_singular_values([5.0, 1.0, 0.1], 4)
    feat = featurize(stack, 2)
    np.testing.assert_allclose(feat.all_singular_values, [5.0, 1.0, 0.1], atol=1e-12)
    resid = stack.Phi - feat.U1 @ feat.Sigma1 @ feat.V1.T
    assert np.linalg.norm(resid, 2) == pytest.approx(0.1, abs=1e-12)
    assert feat.sigma_ng == pytest.approx(1.0) and feat.sigma_next == pytest.approx(0.1)


def test_featurize_full_rank_is_exact():
    stack = observability_stack(random_system(4, 3, 4), 2)
    feat = featurize(stack, 3)
    np.testing.assert_allclose(feat.U1 @ feat.Sigma1 @ feat.V1.T, stack.Phi, atol=1e-12)
    assert feat.sigma_next == 0.0
    x0 = np.array([0.1, 2.0, -1.0])
    g = feat.features(stack.Phi @ x0)
    np.testing.assert_allclose(g, feat.Sigma1 @ feat.V1.T @ x0, atol=1e-9)
    np.testing.assert_allclose(feat.to_state(g), x0, atol=1e-9)


def test_featurize_rejects_bad_inputs():
    stack = stack_with_singular_values([5.0, 1.0, 0.1], 4)
    with pytest.raises(DomainError):
        featurize(stack, 0)
    with pytest.raises(DomainError):
        featurize(stack, 4)
    with pytest.raises(NumericError):
        featurize(stack_with_singular_values([5.0, 1.0, 1e-12], 4), 3)


def test_feature_noise_bound_examples():
    feat = featurize(stack_with_singular_values([5.0, 1.0, 0.1], 4), 2)
    assert feature_noise_bound(feat, x0_norm_bound=2.0) == pytest.approx(0.2)
    assert feature_noise_bound(feat, delta=1.0) == pytest.approx(0.1)
    assert feature_noise_bound(feat, 2.0, 0.5) == pytest.approx(0.05)
    full = featurize(stack_with_singular_values([5.0, 1.0, 0.1], 4), 3)
    assert feature_noise_bound(full, 2.0) == 0.0


def test_windowed_feature_bound_formula():
    feat = featurize(stack_with_singular_values([5.0, 2.0, 0.1], 4), 2)
    assert windowed_feature_bound(feat, 1.0, 0.5) == pytest.approx(0.5 * 0.2)
    assert windowed_feature_bound(feat, 1.0, 0.99) == pytest.approx(0.5)
    assert windowed_feature_bound(feat, 1.0, None) == pytest.approx(0.5)


def test_q_max():
    assert q_max(10, 4) == 6
    assert q_max(3, 5) == -1
    assert [q_max(8, g) for g in range(1, 10)] == [7, 6, 5, 4, 3, 2, 1, 0, -1]


def test_step_exact_with_perfect_oracle():
    sys = random_system(8, 3, 4)
    stack = observability_stack(sys, 2)
    feat = featurize(stack, 3)
    x0 = np.array([0.5, -0.25, 1.0])
    y = stack.Phi @ x0
    oracle = OracleModel.uniform(4, 1.0)
    state = EstimatorState(1e6, 0.9, np.zeros(3))
    g, x_hat, diag = robust_resilient_step(state, y, feat, oracle, IndicatorVector(np.ones(8, dtype=int)), np.random.default_rng(0))
    np.testing.assert_allclose(x_hat, x0, atol=1e-9)
    assert diag["l_eta"] == 8 and not diag["on_boundary"]
    np.testing.assert_array_equal(state.g_prev, g)


def test_step_is_deterministic():
    sys = random_system(9, 3, 4)
    feat = featurize(observability_stack(sys, 2), 2)
    y = np.random.default_rng(1).standard_normal(8)
    q_hat = IndicatorVector([1, 1, 0, 1, 1, 1, 1, 0])
    oracle = OracleModel.uniform(4, 0.9)
    outs = []
    for _ in range(2):
        state = EstimatorState(0.5, 0.8, np.array([0.1, 0.2]))
        outs.append(robust_resilient_step(state, y, feat, oracle, q_hat, np.random.default_rng(3), "ranked-conservative"))
    np.testing.assert_array_equal(outs[0][0], outs[1][0])


def test_step_degenerate_and_initialization():
    sys = random_system(10, 2, 3)
    feat = featurize(observability_stack(sys, 1), 2)
    oracle = OracleModel.uniform(3, 0.9)
    state = EstimatorState(1.0, 0.9, np.array([0.3, -0.3]))
    g, _, diag = robust_resilient_step(state, np.ones(3), feat, oracle, IndicatorVector([0, 0, 0]), None, "ranked-conservative")
    assert diag["degenerate"]
    np.testing.assert_array_equal(g, [0.3, -0.3])
    state = EstimatorState(1.0, 0.5)
    _, _, diag = robust_resilient_step(state, np.ones(3), feat, OracleModel.uniform(3, 1.0), IndicatorVector([1, 1, 1]), None, "ranked-conservative")
    assert diag["initialized"]


def test_step_validates_lengths():
    feat = featurize(observability_stack(random_system(10, 2, 3), 2), 2)
    state = EstimatorState(1.0, 0.9)
    with pytest.raises(DomainError):
        robust_resilient_step(state, np.ones(5), feat, OracleModel.uniform(3, 0.9), IndicatorVector([1] * 5))
    with pytest.raises(DomainError):
        robust_resilient_step(state, np.ones(6), feat, OracleModel.uniform(4, 0.9), IndicatorVector([1] * 6))
    with pytest.raises(DomainError):
        EstimatorState(0.0, 0.9)
