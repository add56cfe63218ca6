import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import enumerate_pmf, l_eta_by_definition
from resilient_recon import (
    DomainError,
    IndicatorVector,
    OracleModel,
    ReliabilityProfile,
    SupportSet,
    compute_l_eta,
    pmf_convolution_form,
    poisson_binomial_pmf,
    robust_support_random,
    robust_support_ranked,
    sample_oracle,
)
from resilient_recon.support import tail_probabilities, trusted_nodes

probs = st.lists(st.floats(0.0, 1.0), min_size=1, max_size=10)


def test_pmf_small_example():
    np.testing.assert_allclose(poisson_binomial_pmf([0.9, 0.8, 0.7]), [0.006, 0.092, 0.398, 0.504], atol=1e-15)


def test_pmf_degenerate_probabilities():
    assert poisson_binomial_pmf([1.0, 1.0, 0.0]).tolist() == [0.0, 0.0, 1.0, 0.0]


@settings(max_examples=100, deadline=None)
@given(p=probs)
def test_pmf_matches_enumeration(p):
    r = poisson_binomial_pmf(p)
    np.testing.assert_allclose(r, enumerate_pmf(p), atol=1e-12)
    assert r.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(r >= 0)


@settings(max_examples=100, deadline=None)
@given(p=st.lists(st.floats(1e-3, 1.0), min_size=1, max_size=10))
def test_convolution_form_agrees(p):
    np.testing.assert_allclose(pmf_convolution_form(p), poisson_binomial_pmf(p), atol=1e-10)


def test_convolution_form_names_zero_probability():
    with pytest.raises(DomainError, match=r"p\[1\]"):
        pmf_convolution_form([0.5, 0.0, 0.3])


def test_tail_probabilities():
    np.testing.assert_allclose(tail_probabilities([0.25, 0.5, 0.25]), [1.0, 0.75, 0.25])


def test_l_eta_examples():
    r = poisson_binomial_pmf([0.9, 0.8, 0.7])
    assert compute_l_eta(r, 0.5) == 3
    assert compute_l_eta(r, 0.6) == 2
    assert compute_l_eta(r, 0.5, "paper") == 2
    # two fair coins: P(X >= 1) is exactly 0.75
    assert compute_l_eta([0.25, 0.5, 0.25], 0.75) == 1
    assert compute_l_eta([0.25, 0.5, 0.25], 0.9, "paper") == -1


def test_l_eta_rejects_bad_eta():
    with pytest.raises(DomainError):
        compute_l_eta([0.5, 0.5], 0.0)


@settings(max_examples=80, deadline=None)
@given(p=probs, eta=st.floats(0.01, 1.0))
def test_l_eta_definition(p, eta):
    assert compute_l_eta(poisson_binomial_pmf(p), eta) == l_eta_by_definition(p, eta)


@settings(max_examples=80, deadline=None)
@given(p=probs, e1=st.floats(0.01, 1.0), e2=st.floats(0.01, 1.0))
def test_l_eta_nonincreasing_in_eta(p, e1, e2):
    lo, hi = sorted((e1, e2))
    r = poisson_binomial_pmf(p)
    assert compute_l_eta(r, hi) <= compute_l_eta(r, lo)
    assert compute_l_eta(r, hi, "paper") <= compute_l_eta(r, lo, "paper")


@settings(max_examples=80, deadline=None)
@given(p=probs, eta=st.floats(0.01, 1.0))
def test_closed_form_indexing_never_exceeds_exact_tail(p, eta):
    r = poisson_binomial_pmf(p)
    assert compute_l_eta(r, eta, "paper") <= compute_l_eta(r, eta)


def test_reliability_profile():
    prof = ReliabilityProfile.from_oracle(OracleModel([0.9, 0.8, 0.7]), 0.5)
    assert prof.l_eta == 3
    assert prof.r.size == 4


def test_oracle_validation():
    with pytest.raises(DomainError, match=r"p\[2\]"):
        OracleModel([0.5, 0.5, 1.5])
    with pytest.raises(DomainError):
        OracleModel([0.5, 0.5], [1.0])
    assert OracleModel.uniform(2, 0.9).tiled(3).m == 6


def test_sample_oracle_agreement_rate():
    rng = np.random.default_rng(1)
    q = IndicatorVector.from_attacked(SupportSet.of([0, 5], 10))
    oracle = OracleModel.uniform(10, 0.8)
    agree = np.mean([np.mean(sample_oracle(q, oracle, rng).q == q.q) for _ in range(2000)])
    assert 0.77 <= agree <= 0.83


def test_sample_oracle_extremes():
    rng = np.random.default_rng(0)
    q = IndicatorVector([1, 0, 1])
    assert sample_oracle(q, OracleModel.uniform(3, 1.0), rng).q.tolist() == [1, 0, 1]
    assert sample_oracle(q, OracleModel.uniform(3, 0.0), rng).q.tolist() == [0, 1, 0]


def test_ranked_support_example():
    # p*s = (0.9, 0.1, 0.8, 0.5): the two most trusted channels are 1 and 3 (1-based)
    oracle = OracleModel([0.9, 0.1, 0.8, 0.5])
    q_hat = IndicatorVector([0, 1, 1, 1])
    assert trusted_nodes(oracle, 2).one_based() == [1, 3]
    assert robust_support_ranked(q_hat, oracle, 2, "literal").one_based() == [2, 3, 4]
    assert robust_support_ranked(q_hat, oracle, 2, "conservative").one_based() == [3]


def test_ranked_support_uses_confidence():
    oracle = OracleModel([0.9, 0.9, 0.9], [0.2, 1.0, 0.5])
    assert trusted_nodes(oracle, 1).indices == (1,)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), m=st.integers(1, 12), data=st.data())
def test_ranked_modes_relationship(seed, m, data):
    rng = np.random.default_rng(seed)
    oracle = OracleModel(rng.uniform(size=m), rng.uniform(size=m))
    q_hat = IndicatorVector(rng.integers(0, 2, size=m))
    l = data.draw(st.integers(0, m))
    cons = set(robust_support_ranked(q_hat, oracle, l, "conservative"))
    lit = set(robust_support_ranked(q_hat, oracle, l, "literal"))
    assert cons <= lit
    assert cons <= set(q_hat.safe())
    assert len(cons) <= l


def test_random_support_replays_rng():
    q_hat = IndicatorVector([1, 0, 1, 1, 0, 1, 1, 1])
    safe = robust_support_random(q_hat, 5, np.random.default_rng(42))
    kept = np.random.default_rng(42).choice(8, size=5, replace=False)
    assert safe.indices == tuple(sorted(int(i) for i in kept if q_hat.q[i] == 1))
    assert safe == robust_support_random(q_hat, 5, np.random.default_rng(42))


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), m=st.integers(1, 12), data=st.data())
def test_random_support_subset_of_oracle_safe(seed, m, data):
    rng = np.random.default_rng(seed)
    q_hat = IndicatorVector(rng.integers(0, 2, size=m))
    l = data.draw(st.integers(0, m))
    safe = robust_support_random(q_hat, l, rng)
    assert set(safe) <= set(q_hat.safe())
    assert len(safe) <= l


def test_l_eta_out_of_range_rejected():
    with pytest.raises(DomainError):
        robust_support_random(IndicatorVector([1, 1]), 3, np.random.default_rng(0))
