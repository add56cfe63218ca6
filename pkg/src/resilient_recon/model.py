"""Attacked measurement model y = C x + e + v and index-set utilities.

Indices are 0-based inside the package. Anything written for humans
(CLI output, CSV, JSON) goes through ``SupportSet.one_based``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Literal, Sequence

import numpy as np

from .errors import DomainError

DEFAULT_SUPPORT_TOL = 1e-9


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class MeasurementModel:
    """Output matrix ``C`` (m x n) and noise bound ``noise_bound`` (epsilon)."""

    C: np.ndarray
    noise_bound: float = 0.0

    def __post_init__(self):
        C = _frozen(self.C)
        if C.ndim != 2:
            raise DomainError(f"C must be a matrix, got shape {C.shape}")
        m, n = C.shape
        if m <= n:
            raise DomainError(f"redundancy requires m > n, got m={m}, n={n}")
        if self.noise_bound < 0 or not np.isfinite(self.noise_bound):
            raise DomainError(f"noise bound must be finite and >= 0, got {self.noise_bound}")
        zero_cols = np.flatnonzero(~np.any(C != 0, axis=0))
        if zero_cols.size:
            raise DomainError(f"C has all-zero column(s) {zero_cols.tolist()} (unobservable state)")
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "noise_bound", float(self.noise_bound))

    @property
    def m(self) -> int:
        return self.C.shape[0]

    @property
    def n(self) -> int:
        return self.C.shape[1]


@dataclass(frozen=True)
class SupportSet:
    indices: tuple[int, ...]
    universe_size: int

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise DomainError(f"support indices must be strictly increasing: {idx}")
        if idx and (idx[0] < 0 or idx[-1] >= self.universe_size):
            raise DomainError(f"support indices {idx} out of range for universe {self.universe_size}")
        object.__setattr__(self, "indices", idx)

    @classmethod
    def of(cls, indices: Iterable[int], universe_size: int) -> "SupportSet":
        """Build from any iterable of 0-based indices (sorted, deduplicated)."""
        return cls(tuple(sorted({int(i) for i in indices})), universe_size)

    @classmethod
    def from_one_based(cls, indices: Iterable[int], universe_size: int) -> "SupportSet":
        return cls.of((int(i) - 1 for i in indices), universe_size)

    @classmethod
    def full(cls, m: int) -> "SupportSet":
        return cls(tuple(range(m)), m)

    @classmethod
    def empty(cls, m: int) -> "SupportSet":
        return cls((), m)

    def complement(self) -> "SupportSet":
        s = set(self.indices)
        return SupportSet(tuple(i for i in range(self.universe_size) if i not in s), self.universe_size)

    def intersection(self, other: "SupportSet") -> "SupportSet":
        return SupportSet.of(set(self.indices) & set(other.indices), self.universe_size)

    def one_based(self) -> list[int]:
        return [i + 1 for i in self.indices]

    def as_array(self) -> np.ndarray:
        return np.asarray(self.indices, dtype=int)

    def __len__(self):
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def __contains__(self, i):
        return i in self.indices


@dataclass(frozen=True)
class IndicatorVector:
    """Binary vector marking safe channels with 1 and attacked channels with 0."""

    q: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.q)
        if q.ndim != 1 or not np.all((q == 0) | (q == 1)):
            raise DomainError("indicator entries must be 0 or 1")
        q = q.astype(np.int8)
        q.setflags(write=False)
        object.__setattr__(self, "q", q)

    @classmethod
    def from_attacked(cls, attacked: SupportSet) -> "IndicatorVector":
        q = np.ones(attacked.universe_size, dtype=np.int8)
        q[attacked.as_array()] = 0
        return cls(q)

    def safe(self) -> SupportSet:
        """Channels marked 1."""
        return SupportSet(tuple(np.flatnonzero(self.q == 1).tolist()), len(self.q))

    def flagged(self) -> SupportSet:
        """Channels marked 0 (believed attacked)."""
        return SupportSet(tuple(np.flatnonzero(self.q == 0).tolist()), len(self.q))

    def __len__(self):
        return len(self.q)


@dataclass(frozen=True)
class AttackSpec:
    support: SupportSet
    magnitude_range: tuple[float, float] = (1.0, 10.0)
    sign_mode: Literal["random", "positive"] = "random"

    def __post_init__(self):
        lo, hi = (float(v) for v in self.magnitude_range)
        if not 0 < lo <= hi:
            raise DomainError(f"magnitude range must satisfy 0 < lo <= hi, got {(lo, hi)}")
        if len(self.support) >= self.support.universe_size:
            raise DomainError("attack must leave at least one channel clean")
        if self.sign_mode not in ("random", "positive"):
            raise DomainError(f"unknown sign mode {self.sign_mode!r}")
        object.__setattr__(self, "magnitude_range", (lo, hi))


def row_select(M, S: SupportSet | Sequence[int]) -> np.ndarray:
    """Rows of ``M`` (or entries of a vector) listed in ``S``, in order."""
    M = np.asarray(M)
    idx = S.as_array() if isinstance(S, SupportSet) else np.asarray(S, dtype=int)
    if idx.size and (idx.min() < 0 or idx.max() >= M.shape[0]):
        raise DomainError(f"row indices out of range for {M.shape[0]} rows")
    if idx.size == 0:
        return M[:0]
    return M[idx]


def support_of(v, tol: float = DEFAULT_SUPPORT_TOL) -> SupportSet:
    if tol < 0:
        raise DomainError("tolerance must be nonnegative")
    v = np.asarray(v, dtype=float)
    return SupportSet(tuple(np.flatnonzero(np.abs(v) > tol).tolist()), v.size)


def argsort_desc(v) -> np.ndarray:
    """Indices sorting ``v`` descending; ties keep ascending index order."""
    v = np.asarray(v, dtype=float)
    return np.argsort(-v, kind="stable")


def generate_measurement(model: MeasurementModel, x_true, attack: AttackSpec, rng: np.random.Generator):
    """Draw ``(y, e, v)`` with ``supp(e)`` equal to the attack support and ``e @ v == 0``.

    Noise is uniform in direction with radius ``u * eps`` (u ~ U[0, 1]), then
    zeroed on the attacked channels without rescaling.
    """
    x_true = np.asarray(x_true, dtype=float)
    m, n = model.C.shape
    if x_true.shape != (n,):
        raise DomainError(f"x_true must have shape ({n},), got {x_true.shape}")
    if attack.support.universe_size != m:
        raise DomainError(f"attack universe {attack.support.universe_size} != m={m}")
    eps = model.noise_bound
    lo, hi = attack.magnitude_range
    if len(attack.support) and lo <= eps:
        raise DomainError(f"attack magnitudes must exceed the noise bound ({lo} <= {eps})")

    idx = attack.support.as_array()
    e = np.zeros(m)
    mags = rng.uniform(lo, hi, size=idx.size)
    if attack.sign_mode == "random":
        mags *= rng.choice([-1.0, 1.0], size=idx.size)
    e[idx] = mags

    v = np.zeros(m)
    if eps > 0:
        d = rng.standard_normal(m)
        v = d / np.linalg.norm(d) * (rng.uniform() * eps)
        v[idx] = 0.0
    y = model.C @ x_true + e + v
    return y, e, v


def min_singular_value(M) -> float:
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        raise DomainError("matrix is empty")
    s = np.linalg.svd(M, compute_uv=False)
    # a wide matrix has n - rows zero singular values not returned by svd
    if M.shape[0] < M.shape[1]:
        return 0.0
    return float(s[-1])
