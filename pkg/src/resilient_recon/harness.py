"""Seeded Monte Carlo runs that check the reconstruction error bounds.

Trial ``t`` draws everything from ``np.random.default_rng(base_seed + t)``;
fixed scenario ingredients (system matrices, fitted surrogate) come from a
separate stream so they do not collide with any trial.
"""

from __future__ import annotations

import csv
import dataclasses
import functools
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import binomtest

from .datadriven import Dataset, fit_regressor, reconstruct_datadriven, residual_pca
from .errors import BudgetExceededError, ConfigError, InfeasibleError, ReconError
from .fileio import fmt_exact, load_matrix, parse_vector
from .lti import (
    EstimatorState,
    LtiSystem,
    featurize,
    observability_stack,
    q_max,
    robust_resilient_step,
    windowed_feature_bound,
)
from .model import (
    AttackSpec,
    IndicatorVector,
    MeasurementModel,
    SupportSet,
    generate_measurement,
    min_singular_value,
    row_select,
)
from .reconstruct import (
    BallConstraint,
    ball_bound,
    constrained_ls,
    ls_reconstruct,
    rip_constant,
    robust_safe_set,
)
from .support import OracleModel, compute_l_eta, poisson_binomial_pmf, sample_oracle

SETUP_STREAM = 0x5EED
CSV_COLUMNS = (
    "trial_index",
    "seed",
    "recon_error",
    "bound",
    "bound_satisfied",
    "l_eta",
    "safe_set_size",
    "localized_correct_count",
    "condition_ok",
    "wall_time_ms",
)
BOUND_SLACK = 1e-9

MODES = ("static", "lti", "datadriven")
SUPPORT_MODES = ("random", "ranked-literal", "ranked-conservative", "true-support")
INDEXINGS = ("exact-tail", "paper")
CENTER_POLICIES = ("perturbed", "truth", "origin")


@dataclass(frozen=True)
class Scenario:
    mode: str = "static"
    m: int = 30
    n: int = 4
    n_g: int | None = None
    T: int = 1
    q: int = 3
    attack_lo: float = 1.0
    attack_hi: float = 10.0
    attack_sign: str = "random"
    p: tuple[float, ...] = (0.95,)
    s: tuple[float, ...] = (1.0,)
    eta: float = 0.9
    ball_center: str = "perturbed"
    ball_radius: float = 1.0
    ball_offset: float = 0.5
    eps: float = 0.01
    trials: int = 100
    base_seed: int = 0
    support_mode: str = "random"
    l_eta_indexing: str = "exact-tail"
    gate: bool = False
    C_path: str | None = None
    A_path: str | None = None
    x_scale: float = 1.0
    prior_offset: float = 0.5
    x0_radius: float | None = None
    n_sigma: int = 3
    n_train: int = 500
    dd_noise: float = 0.01
    safety_factor: float | None = None

    def __post_init__(self):
        errs = []
        if self.mode not in MODES:
            errs.append(f"mode must be one of {MODES}")
        for name in ("m", "n", "T", "trials", "n_sigma", "n_train"):
            if getattr(self, name) < 1:
                errs.append(f"{name} must be positive")
        if self.n_g is not None and not 1 <= self.n_g <= self.n:
            errs.append("n_g must lie in [1, n]")
        if self.q < 0 or self.q >= self.m:
            errs.append("q must lie in [0, m)")
        if not 0 < self.eta <= 1:
            errs.append("eta must lie in (0, 1]")
        if self.support_mode not in SUPPORT_MODES:
            errs.append(f"support_mode must be one of {SUPPORT_MODES}")
        if self.l_eta_indexing not in INDEXINGS:
            errs.append(f"l_eta_indexing must be one of {INDEXINGS}")
        if self.ball_center not in CENTER_POLICIES:
            errs.append(f"ball.center must be one of {CENTER_POLICIES}")
        if not self.ball_radius > 0:
            errs.append("ball.radius must be positive (inf for unconstrained)")
        if not 0 <= self.ball_offset <= 1:
            errs.append("ball.offset must lie in [0, 1]")
        if self.eps < 0:
            errs.append("noise.eps must be nonnegative")
        if self.attack_sign not in ("random", "positive"):
            errs.append("attack.sign must be random or positive")
        for name, vec in (("oracle.p", self.p), ("oracle.s", self.s)):
            if len(vec) not in (1, self.m) or not all(0 <= v <= 1 for v in vec):
                errs.append(f"{name} must be one value or {self.m} values in [0, 1]")
        if errs:
            raise ConfigError("; ".join(errs))

    @property
    def features(self) -> int:
        return self.n if self.n_g is None else self.n_g

    def oracle(self) -> OracleModel:
        p = np.broadcast_to(np.asarray(self.p, dtype=float), (self.m,))
        s = np.broadcast_to(np.asarray(self.s, dtype=float), (self.m,))
        return OracleModel(p.copy(), s.copy())


# config key -> (field, parser)
def _int(v):
    return int(v)


def _float(v):
    return float(v)


def _floats(v):
    return tuple(parse_vector(v).tolist())


def _bool(v):
    lv = v.lower()
    if lv in ("true", "yes", "1", "on"):
        return True
    if lv in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _opt_float(v):
    return None if v.lower() in ("auto", "none") else float(v)


def _opt_int(v):
    return None if v.lower() in ("auto", "none") else int(v)


CONFIG_KEYS = {
    "mode": ("mode", str),
    "dims.m": ("m", _int),
    "dims.n": ("n", _int),
    "dims.n_g": ("n_g", _opt_int),
    "dims.T": ("T", _int),
    "attack.q": ("q", _int),
    "attack.lo": ("attack_lo", _float),
    "attack.hi": ("attack_hi", _float),
    "attack.sign": ("attack_sign", str),
    "oracle.p": ("p", _floats),
    "oracle.s": ("s", _floats),
    "eta": ("eta", _float),
    "ball.center": ("ball_center", str),
    "ball.radius": ("ball_radius", _float),
    "ball.offset": ("ball_offset", _float),
    "noise.eps": ("eps", _float),
    "trials": ("trials", _int),
    "base_seed": ("base_seed", _int),
    "support_mode": ("support_mode", str),
    "l_eta_indexing": ("l_eta_indexing", str),
    "gate": ("gate", _bool),
    "system.C": ("C_path", str),
    "system.A": ("A_path", str),
    "system.x_scale": ("x_scale", _float),
    "lti.prior_offset": ("prior_offset", _float),
    "lti.x0_radius": ("x0_radius", _opt_float),
    "datadriven.n_sigma": ("n_sigma", _int),
    "datadriven.n_train": ("n_train", _int),
    "datadriven.noise": ("dd_noise", _float),
    "datadriven.safety_factor": ("safety_factor", _opt_float),
}


def parse_config(text: str, source: str = "<config>", base_dir: Path | None = None) -> Scenario:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, val = (t.strip() for t in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        name, conv = CONFIG_KEYS[key]
        try:
            values[name] = conv(val)
        except (ValueError, ConfigError) as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key}: {exc}") from None
        if name in ("C_path", "A_path") and base_dir is not None:
            values[name] = str((base_dir / values[name]).resolve())
    try:
        return Scenario(**values)
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from None


def load_config(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, str(path), path.parent)


def scenario_to_config(sc: Scenario) -> str:
    out = []
    for key, (name, _) in CONFIG_KEYS.items():
        v = getattr(sc, name)
        if v is None:
            if name in ("C_path", "A_path"):
                continue
            v = "auto"
        elif isinstance(v, tuple):
            v = ",".join(fmt_exact(x) for x in v)
        elif isinstance(v, bool):
            v = str(v).lower()
        out.append(f"{key} = {v}")
    return "\n".join(out) + "\n"


@dataclass
class TrialResult:
    trial_index: int
    seed: int
    recon_error: float
    bound: float
    bound_satisfied: bool
    l_eta: int
    safe_set_size: int
    localized_correct_count: int
    condition_ok: bool
    wall_time_ms: float = 0.0
    safe_clean: bool = False
    sigma_bound: float | None = None
    error: str | None = None


# ---------------------------------------------------------------- setup


@dataclass
class _Setup:
    oracle: OracleModel
    l_eta: int
    info: dict = field(default_factory=dict)
    model: MeasurementModel | None = None
    delta_n: float | None = None
    sys: LtiSystem | None = None
    stack: object = None
    feat: object = None
    regressor: object = None
    pca: object = None
    truth: dict = field(default_factory=dict)


def _exact_rip(M, S):
    try:
        return rip_constant(M, S)
    except BudgetExceededError:
        return None


@functools.lru_cache(maxsize=8)
def build_setup(sc: Scenario) -> _Setup:
    rng = np.random.default_rng([sc.base_seed, SETUP_STREAM])
    oracle = sc.oracle()
    if sc.mode == "static":
        C = load_matrix(sc.C_path) if sc.C_path else rng.standard_normal((sc.m, sc.n)) / np.sqrt(sc.m)
        if C.shape != (sc.m, sc.n):
            raise ConfigError(f"system.C is {C.shape}, expected ({sc.m}, {sc.n})")
        model = MeasurementModel(C, sc.eps)
        l_eta = compute_l_eta(poisson_binomial_pmf(oracle.p), sc.eta, sc.l_eta_indexing)
        delta_n = _exact_rip(C.T, sc.n)
        return _Setup(oracle, l_eta, {"delta_n": delta_n}, model=model, delta_n=delta_n)

    if sc.mode == "lti":
        A = load_matrix(sc.A_path) if sc.A_path else _random_dynamics(rng, sc.n)
        C = load_matrix(sc.C_path) if sc.C_path else rng.standard_normal((sc.m, sc.n))
        sys = LtiSystem(A, C)
        if sys.m != sc.m:
            raise ConfigError(f"system.C has {sys.m} rows, expected {sc.m}")
        stack = observability_stack(sys, sc.T)
        feat = featurize(stack, sc.features)
        window_oracle = oracle.tiled(sc.T)
        l_eta = compute_l_eta(poisson_binomial_pmf(window_oracle.p), sc.eta, sc.l_eta_indexing)
        delta_ng = _exact_rip(feat.U1.T, feat.n_g)
        info = {
            "delta_ng": delta_ng,
            "singular_values": feat.all_singular_values.tolist(),
        }
        return _Setup(window_oracle, l_eta, info, sys=sys, stack=stack, feat=feat, delta_n=delta_ng)

    # datadriven
    m, n = sc.m, sc.n
    basis, _ = np.linalg.qr(rng.standard_normal((m, n)))
    W = rng.standard_normal((sc.n_sigma, m))
    b = rng.standard_normal(m)
    z_scale = np.linspace(2.0, 1.0, n)

    def clean(sig, z, noise):
        return b + sig @ W + z @ basis.T + noise

    sig = rng.standard_normal((sc.n_train, sc.n_sigma))
    z = rng.standard_normal((sc.n_train, n)) * z_scale
    Y = clean(sig, z, sc.dd_noise * rng.standard_normal((sc.n_train, m)))
    data = Dataset(sig, Y)
    reg = fit_regressor(data)
    pca = residual_pca(data, reg, n, sc.safety_factor)
    l_eta = compute_l_eta(poisson_binomial_pmf(oracle.p), sc.eta, sc.l_eta_indexing)
    delta_n = _exact_rip(pca.Phi.T, n)
    info = {"delta_n": delta_n, "noise_bound": pca.noise_bound}
    truth = {"basis": basis, "W": W, "b": b, "z_scale": z_scale}
    return _Setup(oracle, l_eta, info, delta_n=delta_n, regressor=reg, pca=pca, truth=truth)


def _random_dynamics(rng, n):
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    return 0.95 * Q


def _uniform_in_ball(rng, dim, radius):
    if radius == 0:
        return np.zeros(dim)
    d = rng.standard_normal(dim)
    return d / np.linalg.norm(d) * radius * rng.uniform() ** (1.0 / dim)


def _ball_center(sc: Scenario, rng, truth):
    if sc.ball_center == "truth":
        return truth.copy()
    if sc.ball_center == "origin":
        return np.zeros_like(truth)
    return truth + _uniform_in_ball(rng, truth.size, sc.ball_offset * sc.ball_radius)


def _oracle_output(sc, setup, q_true, rng):
    if sc.support_mode == "true-support":
        return q_true
    return sample_oracle(q_true, setup.oracle, rng)


def _safe_set(sc, setup, q_true, q_hat, rng):
    if sc.support_mode == "true-support":
        return q_true.safe()
    return robust_safe_set(q_hat, setup.oracle, max(setup.l_eta, 0), sc.support_mode, rng)


# ---------------------------------------------------------------- trials


def _static_trial(sc: Scenario, setup: _Setup, rng) -> dict:
    model = setup.model
    x_true = sc.x_scale * rng.standard_normal(sc.n)
    attacked = SupportSet.of(rng.choice(sc.m, size=sc.q, replace=False), sc.m)
    y, _, _ = generate_measurement(
        model, x_true, AttackSpec(attacked, (sc.attack_lo, sc.attack_hi), sc.attack_sign), rng
    )
    q_true = IndicatorVector.from_attacked(attacked)
    q_hat = _oracle_output(sc, setup, q_true, rng)
    safe = _safe_set(sc, setup, q_true, q_hat, rng)
    out = _support_stats(q_true, q_hat, safe, attacked)
    if math.isinf(sc.ball_radius):
        res = ls_reconstruct(y, model, safe)
        bound = res.bound
    else:
        ball = BallConstraint(_ball_center(sc, rng, x_true), sc.ball_radius)
        res = constrained_ls(y, model, safe, ball)
        bound = ball_bound(ball.diameter, model.noise_bound, setup.delta_n)
        # intermediate bound with the actual sigma_min of the selected rows
        sig = min_singular_value(row_select(model.C, safe)) if len(safe) >= sc.n else 0.0
        out["sigma_bound"] = 2.0 * min(sc.ball_radius, model.noise_bound / sig) if sig > 0 else ball.diameter
    out.update(recon_error=float(np.linalg.norm(res.x_hat - x_true)), bound=bound)
    return out


def _lti_trial(sc: Scenario, setup: _Setup, rng) -> dict:
    feat, stack = setup.feat, setup.stack
    rows, m = stack.Phi.shape[0], sc.m
    if math.isinf(sc.ball_radius):
        raise ConfigError("lti mode needs a finite ball.radius (the step constraint delta)")
    delta = sc.ball_radius
    x0_radius = sc.x0_radius if sc.x0_radius is not None else delta / feat.sigma_ng
    x0 = _uniform_in_ball(rng, sc.n, x0_radius)

    attacked_rows = [k * m + j for k in range(sc.T) for j in sorted(rng.choice(m, size=sc.q, replace=False))]
    attacked = SupportSet.of(attacked_rows, rows)
    window_model = MeasurementModel(stack.Phi, sc.eps) if rows > sc.n else None
    if window_model is not None:
        y, _, _ = generate_measurement(
            window_model, x0, AttackSpec(attacked, (sc.attack_lo, sc.attack_hi), sc.attack_sign), rng
        )
    else:
        raise ConfigError("observability window must have more rows than states")

    q_true = IndicatorVector.from_attacked(attacked)
    q_hat = _oracle_output(sc, setup, q_true, rng)
    g_true = feat.Sigma1 @ feat.V1.T @ x0
    state = EstimatorState(delta, sc.eta, g_true + _uniform_in_ball(rng, feat.n_g, sc.prior_offset * delta))
    if sc.support_mode == "true-support":
        oracle = OracleModel(np.ones(rows), np.ones(rows))
        _, x0_hat, diag = robust_resilient_step(state, y, feat, oracle, q_hat, rng, "random")
    else:
        _, x0_hat, diag = robust_resilient_step(
            state, y, feat, setup.oracle, q_hat, rng, sc.support_mode, sc.l_eta_indexing
        )
    out = _support_stats(q_true, q_hat, diag["safe"], attacked)
    out.update(
        recon_error=float(np.linalg.norm(x0_hat - x0)),
        bound=windowed_feature_bound(feat, delta, setup.delta_n),
    )
    return out


def _datadriven_trial(sc: Scenario, setup: _Setup, rng) -> dict:
    t, reg, pca = setup.truth, setup.regressor, setup.pca
    sig = rng.standard_normal(sc.n_sigma)
    z = rng.standard_normal(sc.n) * t["z_scale"]
    y_clean = t["b"] + sig @ t["W"] + t["basis"] @ z + sc.dd_noise * rng.standard_normal(sc.m)
    attacked = SupportSet.of(rng.choice(sc.m, size=sc.q, replace=False), sc.m)
    e = np.zeros(sc.m)
    mags = rng.uniform(sc.attack_lo, sc.attack_hi, size=sc.q)
    if sc.attack_sign == "random":
        mags *= rng.choice([-1.0, 1.0], size=sc.q)
    e[attacked.as_array()] = mags
    y = y_clean + e

    q_true = IndicatorVector.from_attacked(attacked)
    q_hat = _oracle_output(sc, setup, q_true, rng)
    safe = _safe_set(sc, setup, q_true, q_hat, rng)
    x_ref = pca.Phi.T @ (y_clean - reg.predict(sig))
    if math.isinf(sc.ball_radius):
        raise ConfigError("datadriven mode needs a finite ball.radius")
    ball = BallConstraint(_ball_center(sc, rng, x_ref), sc.ball_radius)
    x_hat, _ = reconstruct_datadriven(y, sig, reg, pca, safe, ball)
    out = _support_stats(q_true, q_hat, safe, attacked)
    out.update(
        recon_error=float(np.linalg.norm(x_hat - x_ref)),
        bound=ball_bound(ball.diameter, pca.noise_bound, setup.delta_n),
    )
    return out


def _support_stats(q_true, q_hat, safe, attacked):
    return {
        "safe_set_size": len(safe),
        "localized_correct_count": int(np.sum(q_true.q == q_hat.q)),
        "safe_clean": not (set(safe.indices) & set(attacked.indices)),
    }


_TRIALS = {"static": _static_trial, "lti": _lti_trial, "datadriven": _datadriven_trial}


def run_trial(sc: Scenario, t: int, timing: bool = False) -> TrialResult:
    seed = sc.base_seed + t
    setup = build_setup(sc)
    cond_ok = setup.l_eta - sc.q >= (sc.features if sc.mode == "lti" else sc.n)
    if sc.support_mode == "true-support":
        cond_ok = sc.m - sc.q >= sc.n
    start = time.perf_counter()
    try:
        out = _TRIALS[sc.mode](sc, setup, np.random.default_rng(seed))
    except (ReconError, np.linalg.LinAlgError) as exc:
        return TrialResult(t, seed, math.nan, math.nan, False, setup.l_eta, 0, 0, cond_ok, error=str(exc))
    wall = (time.perf_counter() - start) * 1e3 if timing else 0.0
    return TrialResult(
        trial_index=t,
        seed=seed,
        recon_error=out["recon_error"],
        bound=out["bound"],
        bound_satisfied=bool(out["recon_error"] <= out["bound"] + BOUND_SLACK),
        l_eta=setup.l_eta,
        safe_set_size=out["safe_set_size"],
        localized_correct_count=out["localized_correct_count"],
        condition_ok=cond_ok,
        wall_time_ms=wall,
        safe_clean=out["safe_clean"],
        sigma_bound=out.get("sigma_bound"),
    )


def feature_sweep(sc: Scenario) -> list[dict]:
    """Per ``n_g`` in 1..n on the scenario's fixed system: singular values,
    RIP constant of ``U1^T``, the bound factor ``1 / (1 - delta_ng)`` and ``q_max``."""
    if sc.mode != "lti":
        raise ConfigError("feature_sweep needs an lti scenario")
    setup = build_setup(sc)
    rows = []
    for n_g in range(1, sc.n + 1):
        feat = featurize(setup.stack, n_g)
        d = _exact_rip(feat.U1.T, n_g)
        rows.append(
            {
                "n_g": n_g,
                "sigma_ng": feat.sigma_ng,
                "sigma_next": feat.sigma_next,
                "delta_ng": d,
                "factor": None if d is None else (math.inf if d >= 1 else 1.0 / (1.0 - d)),
                "q_max": q_max(setup.l_eta, n_g),
            }
        )
    return rows


def _run_chunk(args):
    sc, indices, timing = args
    return [run_trial(sc, t, timing) for t in indices]


def check_gate(sc: Scenario) -> None:
    """Raise InfeasibleError if the reconstructability hypothesis fails."""
    setup = build_setup(sc)
    need = sc.features if sc.mode == "lti" else sc.n
    if setup.l_eta - sc.q < need:
        raise InfeasibleError(
            f"reconstructability condition violated: l_eta - q = {setup.l_eta} - {sc.q} < {need}"
        )


def run_scenario(sc: Scenario, workers: int = 1, timing: bool = False):
    """Run all trials; returns ``(results, summary)``. Output does not depend on ``workers``."""
    if sc.gate:
        check_gate(sc)
    indices = list(range(sc.trials))
    if workers <= 1:
        results = _run_chunk((sc, indices, timing))
    else:
        chunks = [indices[i::workers] for i in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = [r for part in pool.map(_run_chunk, [(sc, c, timing) for c in chunks]) for r in part]
        results.sort(key=lambda r: r.trial_index)
    return results, summarize(sc, results)


def summarize(sc: Scenario, results: list[TrialResult]) -> dict:
    N = len(results)
    sat = sum(r.bound_satisfied for r in results)
    errs = np.array([r.recon_error for r in results if r.error is None])
    margin = 3.0 * math.sqrt(sc.eta * (1.0 - sc.eta) / N)
    ci = binomtest(sat, N).proportion_ci(confidence_level=0.95, method="wilson")
    setup = build_setup(sc)
    extra = {}
    sig = [r for r in results if r.sigma_bound is not None]
    if sig:
        extra["sigma_bound_rate"] = sum(r.recon_error <= r.sigma_bound + BOUND_SLACK for r in sig) / N
    return {
        "mode": sc.mode,
        "trials": N,
        "errors": sum(r.error is not None for r in results),
        "satisfaction_rate": sat / N,
        "eta": sc.eta,
        "eta_threshold": sc.eta - margin,
        "meets_eta": sat / N >= sc.eta - margin,
        "wilson95": [ci.low, ci.high],
        "mean_error": float(errs.mean()) if errs.size else math.nan,
        "max_error": float(errs.max()) if errs.size else math.nan,
        "l_eta": setup.l_eta,
        "condition_ok_rate": sum(r.condition_ok for r in results) / N,
        "clean_safe_rate": sum(r.safe_clean for r in results) / N,
        "mean_safe_set_size": float(np.mean([r.safe_set_size for r in results])),
        **extra,
        **setup.info,
    }


# ---------------------------------------------------------------- output


def _cell(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return fmt_exact(v)
    return str(v)


def results_to_csv(results: list[TrialResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in results:
        w.writerow([_cell(getattr(r, c)) for c in CSV_COLUMNS])
    return buf.getvalue()


def to_jsonable(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if isinstance(v, dict):
        return {k: to_jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [to_jsonable(x) for x in v]
    if isinstance(v, np.generic):
        return v.item()
    return v


def results_to_json(sc: Scenario, results: list[TrialResult], summary: dict) -> str:
    doc = {
        "scenario": to_jsonable(dataclasses.asdict(sc)),
        "summary": to_jsonable(summary),
        "trials": [to_jsonable(dataclasses.asdict(r)) for r in results],
    }
    return json.dumps(doc, indent=1, sort_keys=True)


def parse_csv(text: str) -> list[dict]:
    """Read a results CSV back, checking the column schema."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != CSV_COLUMNS:
        raise ConfigError(f"unexpected CSV header {rows[0] if rows else None}")
    conv = {
        "trial_index": int,
        "seed": int,
        "recon_error": float,
        "bound": float,
        "bound_satisfied": lambda s: {"true": True, "false": False}[s],
        "l_eta": int,
        "safe_set_size": int,
        "localized_correct_count": int,
        "condition_ok": lambda s: {"true": True, "false": False}[s],
        "wall_time_ms": float,
    }
    out = []
    for row in rows[1:]:
        if len(row) != len(CSV_COLUMNS):
            raise ConfigError(f"row has {len(row)} cells, expected {len(CSV_COLUMNS)}")
        out.append({c: conv[c](v) for c, v in zip(CSV_COLUMNS, row)})
    return out
