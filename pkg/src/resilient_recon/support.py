"""Imperfect localization oracle, Poisson-binomial reliability and robust supports.

The oracle is modelled per channel: it reports the true safe/attacked status
of channel ``i`` with probability ``p[i]``. The number of correctly localized
channels is then Poisson-binomial, and ``l_eta`` is the largest count that is
reached with probability at least ``eta``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import DomainError
from .model import IndicatorVector, SupportSet, argsort_desc

# slack on the tail comparison so exact ties (e.g. eta == 0.75 for two fair
# coins) are not lost to summation rounding
TAIL_TOL = 1e-12

LetaIndexing = Literal["exact-tail", "paper"]


def _prob_vector(p, name="p") -> np.ndarray:
    p = np.atleast_1d(np.asarray(p, dtype=float))
    if p.ndim != 1:
        raise DomainError(f"{name} must be a vector")
    bad = np.flatnonzero(~((p >= 0) & (p <= 1)))
    if bad.size:
        raise DomainError(f"{name}[{bad[0]}]={p[bad[0]]} is outside [0, 1]")
    return p


@dataclass(frozen=True)
class OracleModel:
    """Per-channel true-positive rates ``p`` and confidences ``s``."""

    p: np.ndarray
    s: np.ndarray | None = None

    def __post_init__(self):
        p = _prob_vector(self.p, "p")
        s = np.ones_like(p) if self.s is None else _prob_vector(self.s, "s")
        if s.shape != p.shape:
            raise DomainError(f"p and s lengths differ ({p.size} vs {s.size})")
        p.setflags(write=False)
        s.setflags(write=False)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "s", s)

    @classmethod
    def uniform(cls, m: int, p: float, s: float = 1.0) -> "OracleModel":
        return cls(np.full(m, p), np.full(m, s))

    def tiled(self, times: int) -> "OracleModel":
        """Replicate the per-channel statistics over ``times`` stacked copies."""
        return OracleModel(np.tile(self.p, times), np.tile(self.s, times))

    @property
    def m(self) -> int:
        return self.p.size


@dataclass(frozen=True)
class ReliabilityProfile:
    r: np.ndarray
    l_eta: int
    eta: float

    @classmethod
    def from_oracle(cls, oracle: OracleModel, eta: float, indexing: LetaIndexing = "exact-tail"):
        r = poisson_binomial_pmf(oracle.p)
        return cls(r, compute_l_eta(r, eta, indexing), float(eta))


def sample_oracle(q_true: IndicatorVector, oracle: OracleModel, rng: np.random.Generator) -> IndicatorVector:
    """Oracle output: each entry agrees with the truth with probability ``p[i]``."""
    if len(q_true) != oracle.m:
        raise DomainError(f"indicator length {len(q_true)} != oracle length {oracle.m}")
    agree = rng.uniform(size=oracle.m) < oracle.p
    q = q_true.q.astype(int)
    return IndicatorVector(np.where(agree, q, 1 - q))


def poisson_binomial_pmf(p) -> np.ndarray:
    """``r[k] = Pr(sum of Bernoulli(p_i) == k)`` for k = 0..m, by the DP recurrence."""
    p = _prob_vector(p)
    r = np.zeros(p.size + 1)
    r[0] = 1.0
    for i, pi in enumerate(p):
        # right-hand side is evaluated before assignment, so no temporary copy is needed
        r[1 : i + 2] = r[1 : i + 2] * (1.0 - pi) + r[: i + 1] * pi
        r[0] *= 1.0 - pi
    return r


def pmf_convolution_form(p) -> np.ndarray:
    """Same PMF via alpha * [-s_1, 1] * ... * [-s_m, 1] with s_i = -(1 - p_i) / p_i.

    Undefined when some ``p_i == 0``.
    """
    p = _prob_vector(p)
    zeros = np.flatnonzero(p == 0)
    if zeros.size:
        raise DomainError(f"convolution form undefined: p[{zeros[0]}] == 0")
    s = -(1.0 - p) / p
    alpha = np.prod(p)
    r = np.array([1.0])
    for si in s:
        # kernel is ordered by increasing count: [coefficient of 0, of 1]
        r = np.convolve(r, [-si, 1.0])
    return alpha * r


def _check_pmf(r) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    if r.ndim != 1 or r.size < 1 or np.any(r < -1e-15) or abs(r.sum() - 1.0) > 1e-9:
        raise DomainError("r is not a probability vector")
    return r


def tail_probabilities(r) -> np.ndarray:
    """``t[k] = Pr(X >= k)`` for k = 0..m, summed from the top for accuracy."""
    r = _check_pmf(r)
    return np.cumsum(r[::-1])[::-1]


def compute_l_eta(r, eta: float, indexing: LetaIndexing = "exact-tail") -> int:
    """Largest ``k`` with ``Pr(X >= k) >= eta``.

    ``indexing="paper"`` instead evaluates the closed form with the upper
    summation limit ``k + 1``, i.e. the largest ``k`` with
    ``Pr(X <= k) <= 1 - eta``; that can be empty, in which case -1 is returned.
    """
    if not 0 < eta <= 1:
        raise DomainError(f"eta must lie in (0, 1], got {eta}")
    r = _check_pmf(r)
    if indexing == "exact-tail":
        ok = np.flatnonzero(tail_probabilities(r) >= eta - TAIL_TOL)
        return int(ok[-1])  # k = 0 always qualifies
    if indexing == "paper":
        cdf = np.cumsum(r)
        ok = np.flatnonzero(cdf <= 1.0 - eta + TAIL_TOL)
        return int(ok[-1]) if ok.size else -1
    raise DomainError(f"unknown l_eta indexing {indexing!r}")


def _check_l_eta(l_eta: int, m: int):
    if not 0 <= l_eta <= m:
        raise DomainError(f"l_eta={l_eta} outside [0, {m}]")


def robust_support_random(q_hat: IndicatorVector, l_eta: int, rng: np.random.Generator) -> SupportSet:
    """Keep the oracle output at ``l_eta`` uniformly chosen channels, zero the rest.

    Returns the retained safe set: kept channels the oracle marked safe.
    """
    m = len(q_hat)
    _check_l_eta(l_eta, m)
    kept = rng.choice(m, size=l_eta, replace=False)
    return SupportSet.of((i for i in kept if q_hat.q[i] == 1), m)


def trusted_nodes(oracle: OracleModel, l_eta: int) -> SupportSet:
    """The ``l_eta`` channels with highest ``p * s`` (ties by index)."""
    _check_l_eta(l_eta, oracle.m)
    return SupportSet.of(argsort_desc(oracle.p * oracle.s)[:l_eta], oracle.m)


def robust_support_ranked(
    q_hat: IndicatorVector,
    oracle: OracleModel,
    l_eta: int,
    mode: Literal["literal", "conservative"] = "conservative",
) -> SupportSet:
    """Confidence-ranked robust support.

    ``literal`` evaluates ``(flagged & trusted)^c``, which keeps untrusted
    flagged channels. ``conservative`` keeps only trusted channels the
    oracle marked safe.
    """
    m = len(q_hat)
    if oracle.m != m:
        raise DomainError(f"oracle length {oracle.m} != indicator length {m}")
    trusted = trusted_nodes(oracle, l_eta)
    if mode == "literal":
        return q_hat.flagged().intersection(trusted).complement()
    if mode == "conservative":
        return trusted.intersection(q_hat.safe())
    raise DomainError(f"unknown ranked mode {mode!r}")
