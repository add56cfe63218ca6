"""Attack-resilient decoding for x_{k+1} = A x_k, y_k = C x_k + e_k.

Rows of the stacked observability matrix are ordered time-major:
row ``k * m + j`` is node ``j`` at time ``k``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import BudgetExceededError, DomainError, InfeasibleError, NumericError
from .model import IndicatorVector, SupportSet, row_select
from .reconstruct import BRUTEFORCE_BUDGET, BallConstraint, constrained_ls_matrix, robust_safe_set
from .support import LetaIndexing, OracleModel, compute_l_eta, poisson_binomial_pmf

SIGMA_GUARD = 1e-10
CONSISTENCY_RTOL = 1e-9


@dataclass(frozen=True)
class LtiSystem:
    A: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        C = np.array(self.C, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise DomainError(f"A must be square, got {A.shape}")
        if C.ndim != 2 or C.shape[1] != A.shape[0]:
            raise DomainError(f"C must have {A.shape[0]} columns, got {C.shape}")
        A.setflags(write=False)
        C.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "C", C)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.C.shape[0]

    def outputs(self, x0, T: int) -> np.ndarray:
        """Clean outputs as an m x T matrix, column k = C A^k x0."""
        x = np.asarray(x0, dtype=float)
        Y = np.empty((self.m, T))
        for k in range(T):
            Y[:, k] = self.C @ x
            x = self.A @ x
        return Y


@dataclass(frozen=True)
class ObservabilityStack:
    Phi: np.ndarray
    T: int
    row_map: tuple[tuple[int, int], ...]

    @property
    def m(self) -> int:
        return self.Phi.shape[0] // self.T

    @property
    def n(self) -> int:
        return self.Phi.shape[1]

    def node_rows(self, nodes) -> np.ndarray:
        """Rows belonging to ``nodes`` across all time steps."""
        nodes = set(nodes)
        return np.array([r for r, (j, _) in enumerate(self.row_map) if j in nodes], dtype=int)


def observability_stack(sys: LtiSystem, T: int) -> ObservabilityStack:
    if T < 1:
        raise DomainError(f"window length must be >= 1, got {T}")
    blocks = [sys.C]
    for _ in range(T - 1):
        blocks.append(blocks[-1] @ sys.A)
    Phi = np.vstack(blocks)
    Phi.setflags(write=False)
    row_map = tuple((j, k) for k in range(T) for j in range(sys.m))
    return ObservabilityStack(Phi, T, row_map)


def stack_outputs(Y) -> np.ndarray:
    """m x T output matrix -> time-major mT vector."""
    return np.asarray(Y, dtype=float).T.reshape(-1)


def _full_column_rank(M) -> bool:
    if M.shape[0] < M.shape[1]:
        return False
    s = np.linalg.svd(M, compute_uv=False)
    return bool(s[0] > 0 and s[-1] > SIGMA_GUARD * s[0])


@dataclass(frozen=True)
class DecodeResult:
    x0: np.ndarray
    corrupted: SupportSet  # rows (varying decoder) or nodes (fixed decoder)


def _consistent_fit(Phi_R, y_R, scale):
    if not _full_column_rank(Phi_R):
        return None
    x, *_ = np.linalg.lstsq(Phi_R, y_R, rcond=None)
    if np.linalg.norm(y_R - Phi_R @ x) <= CONSISTENCY_RTOL * scale:
        return x
    return None


def _small_subsets(items, q):
    return [c for k in range(q + 1) for c in itertools.combinations(items, k)]


def _varying_candidates(m: int, T: int, q: int, per_step: bool):
    if per_step:
        per = _small_subsets(range(m), min(q, m))
        count = len(per) ** T
        if count > BRUTEFORCE_BUDGET:
            raise BudgetExceededError(f"{count} corruption patterns exceed budget")
        cands = [
            tuple(k * m + j for k, sub in enumerate(choice) for j in sub) for choice in itertools.product(per, repeat=T)
        ]
    else:
        count = sum(math.comb(m * T, k) for k in range(min(q, m * T) + 1))
        if count > BRUTEFORCE_BUDGET:
            raise BudgetExceededError(f"{count} corruption patterns exceed budget")
        cands = _small_subsets(range(m * T), min(q, m * T))
    return sorted((tuple(sorted(c)) for c in cands), key=lambda c: (len(c), c))


def bruteforce_decoder_varying(y_stack, stack: ObservabilityStack, q: int, per_step: bool = True) -> DecodeResult:
    """Sparsest corrupted-row set whose complement is exactly consistent.

    With ``per_step`` each time step may lose at most ``q`` rows, otherwise
    at most ``q`` rows in total.
    """
    y = np.asarray(y_stack, dtype=float)
    Phi = stack.Phi
    if y.shape != (Phi.shape[0],):
        raise DomainError(f"y_stack must have length {Phi.shape[0]}")
    scale = max(1.0, float(np.linalg.norm(y)))
    all_rows = np.arange(Phi.shape[0])
    for cand in _varying_candidates(stack.m, stack.T, q, per_step):
        keep = np.setdiff1d(all_rows, cand)
        x = _consistent_fit(Phi[keep], y[keep], scale)
        if x is not None:
            return DecodeResult(x, SupportSet(cand, Phi.shape[0]))
    raise InfeasibleError("no corruption pattern within budget q explains the outputs")


def bruteforce_decoder_fixed(Y, sys: LtiSystem, T: int, q: int) -> DecodeResult:
    """Smallest node set ``K`` (|K| <= q) whose removal leaves consistent outputs."""
    Y = np.asarray(Y, dtype=float)
    if Y.shape != (sys.m, T):
        raise DomainError(f"Y must be {sys.m} x {T}, got {Y.shape}")
    stack = observability_stack(sys, T)
    y = stack_outputs(Y)
    count = sum(math.comb(sys.m, k) for k in range(min(q, sys.m) + 1))
    if count > BRUTEFORCE_BUDGET:
        raise BudgetExceededError(f"{count} node sets exceed budget")
    scale = max(1.0, float(np.linalg.norm(y)))
    for K in _small_subsets(range(sys.m), min(q, sys.m)):
        keep = stack.node_rows(set(range(sys.m)) - set(K))
        if keep.size == 0:
            continue
        x = _consistent_fit(stack.Phi[keep], y[keep], scale)
        if x is not None:
            return DecodeResult(x, SupportSet(K, sys.m))
    raise InfeasibleError("no node set within budget q explains the outputs")


def _deletion_sets(universe: int, size: int, budget: int = BRUTEFORCE_BUDGET):
    if math.comb(universe, size) > budget:
        raise BudgetExceededError(f"C({universe}, {size}) deletion sets exceed budget")
    return itertools.combinations(range(universe), size)


def _first_rank_deficient_node_set(stack: ObservabilityStack, q: int):
    m = stack.m
    for S in _deletion_sets(m, min(2 * q, m)):
        keep = stack.node_rows(set(range(m)) - set(S))
        if keep.size == 0 or not _full_column_rank(stack.Phi[keep]):
            return S
    return None


def _first_rank_deficient_row_set(stack: ObservabilityStack, q: int):
    rows = stack.Phi.shape[0]
    for D in _deletion_sets(rows, min(2 * q, rows)):
        keep = np.setdiff1d(np.arange(rows), D)
        if keep.size == 0 or not _full_column_rank(stack.Phi[keep]):
            return D
    return None


def _first_rank_deficient_step_sets(stack: ObservabilityStack, q: int):
    """Deletes up to 2q nodes independently at every time step; returns per-step node tuples."""
    m, T = stack.m, stack.T
    size = min(2 * q, m)
    if math.comb(m, size) ** T > BRUTEFORCE_BUDGET:
        raise BudgetExceededError(f"C({m}, {size})^{T} per-step deletion patterns exceed budget")
    rows = stack.Phi.shape[0]
    for choice in itertools.product(itertools.combinations(range(m), size), repeat=T):
        D = [k * m + j for k, sub in enumerate(choice) for j in sub]
        keep = np.setdiff1d(np.arange(rows), D)
        if keep.size == 0 or not _full_column_rank(stack.Phi[keep]):
            return choice
    return None


def certify_correctable_fixed(sys: LtiSystem, T: int, q: int) -> bool:
    """Every removal of 2q nodes leaves the stacked rows with full column rank."""
    return _first_rank_deficient_node_set(observability_stack(sys, T), q) is None


def certify_correctable_varying(sys: LtiSystem, T: int, q: int, per_step: bool = False) -> bool:
    """Every removal of 2q stacked rows leaves full column rank.

    That covers attacks touching at most q rows of the window in total. With
    ``per_step`` the removal is 2q rows at every time step, which is what
    attacks of up to q nodes per step (possibly changing) require.
    """
    stack = observability_stack(sys, T)
    if per_step:
        return _first_rank_deficient_step_sets(stack, q) is None
    return _first_rank_deficient_row_set(stack, q) is None


@dataclass(frozen=True)
class AmbiguousPattern:
    """Two admissible (x0, attack) pairs producing identical stacked outputs."""

    x_a: np.ndarray
    e_a: np.ndarray
    x_b: np.ndarray
    e_b: np.ndarray


def find_ambiguous_pattern(
    sys: LtiSystem, T: int, q: int, x0=None, fixed: bool = False, per_step: bool = False
) -> AmbiguousPattern | None:
    """Witness that ``q`` errors are not correctable, or None if certified.

    Splits a rank-destroying deletion set into two halves of at most ``q``
    rows (nodes when ``fixed``, nodes per time step when ``per_step``) and
    moves a null vector between them.
    """
    stack = observability_stack(sys, T)
    Phi = stack.Phi
    m = stack.m
    if per_step:
        choice = _first_rank_deficient_step_sets(stack, q)
        if choice is None:
            return None
        rows_a = np.array([k * m + j for k, sub in enumerate(choice) for j in sub[: len(sub) // 2]], dtype=int)
        rows_b = np.array([k * m + j for k, sub in enumerate(choice) for j in sub[len(sub) // 2 :]], dtype=int)
        keep = np.setdiff1d(np.arange(Phi.shape[0]), np.concatenate([rows_a, rows_b]))
    elif fixed:
        S = _first_rank_deficient_node_set(stack, q)
        if S is None:
            return None
        half_a, half_b = S[: len(S) // 2], S[len(S) // 2 :]
        rows_a, rows_b = stack.node_rows(half_a), stack.node_rows(half_b)
        keep = stack.node_rows(set(range(stack.m)) - set(S))
    else:
        D = _first_rank_deficient_row_set(stack, q)
        if D is None:
            return None
        rows_a, rows_b = np.array(D[: len(D) // 2], dtype=int), np.array(D[len(D) // 2 :], dtype=int)
        keep = np.setdiff1d(np.arange(Phi.shape[0]), D)
    if keep.size:
        _, _, Vt = np.linalg.svd(Phi[keep])
        z = Vt[-1]
    else:
        z = np.eye(stack.n)[0]
    x0 = np.zeros(stack.n) if x0 is None else np.asarray(x0, dtype=float)
    w = Phi @ z
    w[keep] = 0.0  # numerically zero already
    e_a = np.zeros_like(w)
    e_b = np.zeros_like(w)
    e_a[rows_a] = w[rows_a]
    e_b[rows_b] = -w[rows_b]
    return AmbiguousPattern(x0, e_a, x0 + z, e_b)


@dataclass(frozen=True)
class Featurization:
    U1: np.ndarray
    Sigma1: np.ndarray
    V1: np.ndarray
    n_g: int
    all_singular_values: np.ndarray

    @property
    def sigma_ng(self) -> float:
        return float(self.all_singular_values[self.n_g - 1])

    @property
    def sigma_next(self) -> float:
        """sigma-bar_{n_g + 1}, zero when nothing is truncated."""
        s = self.all_singular_values
        return float(s[self.n_g]) if self.n_g < s.size else 0.0

    def features(self, y_stack) -> np.ndarray:
        return self.U1.T @ np.asarray(y_stack, dtype=float)

    def to_state(self, g) -> np.ndarray:
        """x0 = V1 Sigma1^{-1} g."""
        return self.V1 @ (np.asarray(g, dtype=float) / np.diag(self.Sigma1))


def featurize(stack: ObservabilityStack, n_g: int, check: bool = True) -> Featurization:
    n = stack.n
    if not 1 <= n_g <= n:
        raise DomainError(f"n_g={n_g} must lie in [1, {n}]")
    U, s, Vt = np.linalg.svd(stack.Phi, full_matrices=False)
    sv = np.zeros(n)
    sv[: s.size] = s
    if sv[n_g - 1] < SIGMA_GUARD * sv[0]:
        raise NumericError(f"sigma_{n_g}={sv[n_g - 1]:.3e} too small to invert (sigma_1={sv[0]:.3e})")
    feat = Featurization(U[:, :n_g], np.diag(s[:n_g]), Vt[:n_g].T, n_g, sv)
    if check:
        _check_featurization(feat, stack.Phi)
    return feat


def _check_featurization(feat: Featurization, Phi):
    n_g = feat.n_g
    if np.max(np.abs(feat.U1.T @ feat.U1 - np.eye(n_g))) > 1e-10:
        raise NumericError("U1 columns are not orthonormal")
    resid = Phi - feat.U1 @ feat.Sigma1 @ feat.V1.T
    r = np.linalg.norm(resid, 2) if resid.size else 0.0
    if abs(r - feat.sigma_next) > 1e-8 * max(1.0, feat.all_singular_values[0]):
        raise NumericError(f"truncation residual {r} != sigma_(n_g+1) {feat.sigma_next}")


def feature_noise_bound(feat: Featurization, x0_norm_bound: float | None = None, delta: float | None = None) -> float:
    """Bound on the truncation noise ``||U2 Sigma2 V2^T x0||``.

    Uses ``sigma_(n_g+1) * ||x0||`` and/or ``sigma_(n_g+1) / sigma_(n_g) * delta``;
    the smaller one when both inputs are given.
    """
    if feat.n_g == feat.all_singular_values.size:
        return 0.0
    if x0_norm_bound is None and delta is None:
        raise DomainError("need x0_norm_bound or delta")
    cands = []
    if x0_norm_bound is not None:
        cands.append(feat.sigma_next * x0_norm_bound)
    if delta is not None:
        cands.append(feat.sigma_next / feat.sigma_ng * delta)
    return min(cands)


def windowed_feature_bound(feat: Featurization, delta: float, delta_ng: float | None) -> float:
    """``delta / sigma_ng * min(1, sigma_(ng+1) / (1 - delta_ng))``.

    A missing or >= 1 RIP constant leaves only the first term.
    """
    factor = 1.0
    if delta_ng is not None and delta_ng < 1:
        factor = min(1.0, feat.sigma_next / (1.0 - delta_ng))
    return delta / feat.sigma_ng * factor


def q_max(l_eta: int, n_g: int) -> int:
    return l_eta - n_g if l_eta >= n_g else -1


@dataclass
class EstimatorState:
    delta: float
    eta: float
    g_prev: np.ndarray | None = None

    def __post_init__(self):
        if not self.delta > 0:
            raise DomainError(f"delta must be positive, got {self.delta}")
        if not 0 < self.eta <= 1:
            raise DomainError(f"eta must lie in (0, 1], got {self.eta}")


def robust_resilient_step(
    state: EstimatorState,
    y_window,
    feat: Featurization,
    oracle: OracleModel,
    q_hat_window: IndicatorVector,
    rng: np.random.Generator | None = None,
    support_mode: str = "random",
    indexing: LetaIndexing = "exact-tail",
):
    """One window of the feature-space estimator; returns ``(g_k, x0_hat, diagnostics)``.

    ``oracle`` may be per node (length m, replicated over the window) or per
    window row (length mT). Mutates ``state.g_prev``.
    """
    y = np.asarray(y_window, dtype=float)
    rows = feat.U1.shape[0]
    if y.shape != (rows,) or len(q_hat_window) != rows:
        raise DomainError(f"window vectors must have length {rows}")
    if oracle.m != rows:
        if rows % oracle.m:
            raise DomainError(f"oracle length {oracle.m} does not divide window length {rows}")
        oracle = oracle.tiled(rows // oracle.m)

    l_eta = max(compute_l_eta(poisson_binomial_pmf(oracle.p), state.eta, indexing), 0)
    safe = robust_safe_set(q_hat_window, oracle, l_eta, support_mode, rng)
    diag = {"l_eta": l_eta, "safe": safe, "initialized": False, "degenerate": False}

    if state.g_prev is None:
        # first window: start from the unconstrained fit on the safe rows
        diag["initialized"] = True
        A = row_select(feat.U1, safe)
        g0 = np.zeros(feat.n_g)
        if len(safe):
            g0, *_ = np.linalg.lstsq(A, row_select(y, safe), rcond=None)
        state.g_prev = g0

    if len(safe) == 0:
        diag["degenerate"] = True
    res = constrained_ls_matrix(y, feat.U1, safe, BallConstraint(state.g_prev, state.delta))
    g_k = res.x_hat
    diag["on_boundary"] = res.on_boundary
    state.g_prev = g_k
    return g_k, feat.to_state(g_k), diag
