"""Least-squares reconstruction on oracle-selected rows, with and without a ball prior."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BudgetExceededError, ConvergenceError, DomainError, InfeasibleError, RankDeficientError
from .model import IndicatorVector, MeasurementModel, SupportSet, row_select
from .support import (
    LetaIndexing,
    OracleModel,
    compute_l_eta,
    poisson_binomial_pmf,
    robust_support_random,
    robust_support_ranked,
)

RANK_RTOL = 1e-10
RADIUS_TOL = 1e-10
MAX_BISECTIONS = 200
RIP_BUDGET = 2_000_000
BRUTEFORCE_BUDGET = 1_000_000


@dataclass(frozen=True)
class BallConstraint:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        c = np.array(self.center, dtype=float)
        c.setflags(write=False)
        if not (self.radius > 0 and np.isfinite(self.radius)):
            raise DomainError(f"ball radius must be positive and finite, got {self.radius}")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def diameter(self) -> float:
        return 2.0 * self.radius

    def contains(self, x, tol: float = 0.0) -> bool:
        return bool(np.linalg.norm(np.asarray(x) - self.center) <= self.radius + tol)


@dataclass
class ReconResult:
    x_hat: np.ndarray
    residual_norm: float
    active_rows: SupportSet
    bound: float | None = None
    on_boundary: bool = False
    info: dict = field(default_factory=dict)


def _svd(A):
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    return U, s, Vt


def ls_reconstruct(y, model: MeasurementModel, safe: SupportSet) -> ReconResult:
    """Plain least squares on the rows in ``safe``; bound is ``2 eps / sigma_min``."""
    A = row_select(model.C, safe)
    b = row_select(np.asarray(y, dtype=float), safe)
    n = model.n
    if A.shape[0] < n:
        raise RankDeficientError(0.0, f"only {A.shape[0]} rows selected for {n} unknowns")
    U, s, Vt = _svd(A)
    if s[-1] <= RANK_RTOL * s[0]:
        raise RankDeficientError(s[-1])
    x = Vt.T @ ((U.T @ b) / s)
    return ReconResult(
        x_hat=x,
        residual_norm=float(np.linalg.norm(b - A @ x)),
        active_rows=safe,
        bound=bound_thm1(model.noise_bound, s[-1]),
        info={"sigma_min": float(s[-1])},
    )


def solve_ball_lsq(A, b, center, radius):
    """Minimize ``||b - A x||`` subject to ``||x - center|| <= radius``.

    Returns ``(x, on_boundary, lam)``. The multiplier ``lam`` of the active
    constraint is found by bisection on the monotone radius equation
    ``||x(lam) - center|| = radius``.
    """
    A = np.asarray(A, dtype=float)
    center = np.asarray(center, dtype=float)
    if A.shape[0] == 0 or not np.any(A):
        return center.copy(), False, 0.0

    r = np.asarray(b, dtype=float) - A @ center
    U, s, Vt = _svd(A)
    keep = s > RANK_RTOL * s[0]
    s, beta, V = s[keep], (U.T @ r)[keep], Vt[keep].T

    z0 = V @ (beta / s)  # minimum-norm step: nearest LS solution to the center
    if np.linalg.norm(z0) <= radius:
        return center + z0, False, 0.0

    sb = s * beta

    def step(lam):
        return V @ (sb / (s**2 + lam))

    def phi(lam):
        return np.linalg.norm(sb / (s**2 + lam)) - radius

    lo, hi = 0.0, max(1.0, s[0] ** 2)
    n_iter = 0
    while phi(hi) > 0:
        lo, hi = hi, 2.0 * hi
        n_iter += 1
        if n_iter > MAX_BISECTIONS:
            raise ConvergenceError("could not bracket the multiplier", lam_hi=hi, radius=radius)
    for _ in range(MAX_BISECTIONS):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        f = phi(mid)
        if f > 0:
            lo = mid
        else:
            hi = mid
        if -f <= RADIUS_TOL * max(1.0, radius) and f <= 0:
            break
    else:
        raise ConvergenceError(
            "radius equation did not converge", lam_lo=lo, lam_hi=hi, residual=phi(hi), radius=radius
        )
    # hi always satisfies ||z|| <= radius
    return center + step(hi), True, hi


def constrained_ls(y, model: MeasurementModel, safe: SupportSet, ball: BallConstraint) -> ReconResult:
    return constrained_ls_matrix(y, model.C, safe, ball)


def constrained_ls_matrix(y, C, safe: SupportSet, ball: BallConstraint) -> ReconResult:
    """``constrained_ls`` for a bare matrix (no redundancy checks on ``C``)."""
    C = np.asarray(C, dtype=float)
    if ball.center.shape != (C.shape[1],):
        raise DomainError(f"ball center has shape {ball.center.shape}, expected ({C.shape[1]},)")
    A = row_select(C, safe)
    b = row_select(np.asarray(y, dtype=float), safe)
    x, on_boundary, lam = solve_ball_lsq(A, b, ball.center, ball.radius)
    res = float(np.linalg.norm(b - A @ x)) if len(safe) else 0.0
    return ReconResult(x, res, safe, None, on_boundary, {"lambda": lam})


def _n_subsets(n_cols: int, S: int) -> int:
    return sum(math.comb(n_cols, k) for k in range(1, S + 1))


def rip_constant(M, S: int, budget: int = RIP_BUDGET, chunk: int = 65536) -> float:
    """Exact ``S``-restricted isometry constant of ``M`` by enumerating column subsets."""
    M = np.asarray(M, dtype=float)
    n_cols = M.shape[1]
    if not 1 <= S <= n_cols:
        raise DomainError(f"S={S} must lie in [1, {n_cols}]")
    if math.comb(n_cols, S) > budget:
        raise BudgetExceededError(f"C({n_cols}, {S}) = {math.comb(n_cols, S)} subsets exceeds budget {budget}")
    G = M.T @ M
    delta = 0.0
    for k in range(1, S + 1):
        combos = itertools.combinations(range(n_cols), k)
        while True:
            block = np.array(list(itertools.islice(combos, chunk)), dtype=int)
            if block.size == 0:
                break
            sub = G[block[:, :, None], block[:, None, :]]
            lam = np.linalg.eigvalsh(sub)
            delta = max(delta, float(np.max(lam[:, -1] - 1.0)), float(np.max(1.0 - lam[:, 0])))
    return delta


def bound_thm1(eps: float, sigma: float) -> float:
    if sigma <= 0:
        raise DomainError(f"sigma must be positive, got {sigma}")
    return 2.0 * eps / sigma


def bound_cor1(delta: float, eps: float, delta_n: float) -> float:
    """``2 min(delta / 2, eps / (1 - delta_n))`` for a prior set of diameter ``delta``."""
    if not 0 <= delta_n < 1:
        raise DomainError(f"delta_n must lie in [0, 1), got {delta_n}")
    if delta <= 0:
        raise DomainError(f"diameter must be positive, got {delta}")
    return 2.0 * min(delta / 2.0, eps / (1.0 - delta_n))


def ball_bound(delta: float, eps: float, delta_n: float | None) -> float:
    """Ball-constrained error bound that degrades to the diameter when ``delta_n`` is unusable."""
    if delta_n is None or delta_n >= 1:
        return float(delta)
    return bound_cor1(delta, eps, delta_n)


def sparse_recover_bruteforce(y, model: MeasurementModel, q_max: int, budget: int = BRUTEFORCE_BUDGET):
    """Sparsest attack support whose complement admits a fit with residual <= eps.

    Returns ``(x_hat, e_hat, v_hat)``. Within one sparsity level the smallest
    residual wins, then the lexicographically smallest support.
    """
    y = np.asarray(y, dtype=float)
    C, eps = model.C, model.noise_bound
    m = model.m
    if not 0 <= q_max < m:
        raise DomainError(f"q_max={q_max} must lie in [0, {m - 1}]")
    total = sum(math.comb(m, k) for k in range(q_max + 1))
    if total > budget:
        raise BudgetExceededError(f"{total} candidate supports exceed budget {budget}")
    tol = eps + 1e-9 * max(1.0, float(np.linalg.norm(y)))
    for k in range(q_max + 1):
        best = None
        for T in itertools.combinations(range(m), k):
            keep = np.setdiff1d(np.arange(m), T)
            x, *_ = np.linalg.lstsq(C[keep], y[keep], rcond=None)
            res = float(np.linalg.norm(y[keep] - C[keep] @ x))
            if res <= tol and (best is None or res < best[0]):
                best = (res, T, x)
        if best is not None:
            _, T, x = best
            e_hat = np.zeros(m)
            idx = list(T)
            e_hat[idx] = y[idx] - C[idx] @ x
            v_hat = y - C @ x - e_hat
            return x, e_hat, v_hat
    raise InfeasibleError(f"no support of size <= {q_max} explains y within eps={eps}")


def robust_safe_set(q_hat: IndicatorVector, oracle: OracleModel, l_eta: int, support_mode: str, rng=None) -> SupportSet:
    if support_mode == "random":
        if rng is None:
            raise DomainError("random support mode needs an rng")
        return robust_support_random(q_hat, l_eta, rng)
    if support_mode in ("ranked-literal", "ranked-conservative"):
        return robust_support_ranked(q_hat, oracle, l_eta, support_mode.split("-")[1])
    raise DomainError(f"unknown support mode {support_mode!r}")


def reconstruct_with_oracle(
    y,
    model: MeasurementModel,
    q_hat: IndicatorVector,
    oracle: OracleModel,
    eta: float,
    ball: BallConstraint,
    support_mode: str = "ranked-conservative",
    indexing: LetaIndexing = "exact-tail",
    rng: np.random.Generator | None = None,
    delta_n: float | None = None,
) -> ReconResult:
    """l_eta -> robust support -> ball-constrained LS, with the ball bound attached.

    ``delta_n`` (the n-RIP constant of ``C.T``) is computed exactly when not
    supplied and the enumeration fits the budget.
    """
    l_eta = compute_l_eta(poisson_binomial_pmf(oracle.p), eta, indexing)
    if l_eta < 0:
        l_eta = 0
    safe = robust_safe_set(q_hat, oracle, l_eta, support_mode, rng)
    if delta_n is None:
        try:
            delta_n = rip_constant(model.C.T, model.n)
        except BudgetExceededError:
            delta_n = None
    res = constrained_ls(y, model, safe, ball)
    res.bound = ball_bound(ball.diameter, model.noise_bound, delta_n)
    res.info.update(l_eta=l_eta, delta_n=delta_n)
    return res
