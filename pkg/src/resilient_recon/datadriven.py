"""Data-driven surrogate: affine regression on exogenous variables plus a PCA
basis for the residual, used as the measurement model for reconstruction."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DomainError, NumericError
from .model import SupportSet, row_select
from .reconstruct import BallConstraint, constrained_ls_matrix


@dataclass(frozen=True)
class Dataset:
    sigma: np.ndarray
    y: np.ndarray
    sigma_names: tuple[str, ...] = ()
    y_names: tuple[str, ...] = ()

    def __post_init__(self):
        sigma = np.atleast_2d(np.asarray(self.sigma, dtype=float))
        y = np.atleast_2d(np.asarray(self.y, dtype=float))
        if sigma.shape[0] != y.shape[0]:
            raise DomainError(f"sigma has {sigma.shape[0]} rows, y has {y.shape[0]}")
        if sigma.shape[0] <= sigma.shape[1] + 1:
            raise DomainError(f"need more than n_sigma + 1 = {sigma.shape[1] + 1} samples, got {sigma.shape[0]}")
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "y", y)
        if not self.sigma_names:
            object.__setattr__(self, "sigma_names", tuple(f"sigma{i + 1}" for i in range(sigma.shape[1])))
        if not self.y_names:
            object.__setattr__(self, "y_names", tuple(f"y{i + 1}" for i in range(y.shape[1])))

    @property
    def m(self) -> int:
        return self.y.shape[1]

    @classmethod
    def from_csv(cls, path, n_sigma: int, delimiter: str = ",") -> "Dataset":
        with open(path) as fh:
            header = fh.readline().strip()
        names = [h.strip() for h in header.split(delimiter)]
        data = np.loadtxt(path, delimiter=delimiter, skiprows=1, ndmin=2)
        if data.shape[1] != len(names):
            raise DomainError(f"header has {len(names)} columns, data has {data.shape[1]}")
        if not 1 <= n_sigma < data.shape[1]:
            raise DomainError(f"n_sigma={n_sigma} incompatible with {data.shape[1]} columns")
        return cls(data[:, :n_sigma], data[:, n_sigma:], tuple(names[:n_sigma]), tuple(names[n_sigma:]))


@dataclass(frozen=True)
class RegressorModel:
    """Affine map ``f(sigma) = theta[0] + sigma @ theta[1:]``."""

    theta: np.ndarray
    kind: str = "affine"

    def predict(self, sigma) -> np.ndarray:
        sigma = np.asarray(sigma, dtype=float)
        return self.theta[0] + sigma @ self.theta[1:]

    @property
    def m(self) -> int:
        return self.theta.shape[1]


def fit_regressor(data: Dataset) -> RegressorModel:
    """Per-channel affine least squares (minimizes the mean squared residual)."""
    X = np.hstack([np.ones((data.sigma.shape[0], 1)), data.sigma])
    _, R, piv = scipy.linalg.qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    rank = int(np.sum(diag > 1e-10 * diag[0]))
    if rank < X.shape[1]:
        names = ("intercept",) + data.sigma_names
        bad = [names[i] for i in piv[rank:]]
        raise NumericError(f"regressor matrix is rank deficient; collinear column(s): {', '.join(bad)}")
    theta, *_ = np.linalg.lstsq(X, data.y, rcond=None)
    return RegressorModel(theta)


def empirical_loss(data: Dataset, model: RegressorModel) -> float:
    r = data.y - model.predict(data.sigma)
    return float(np.mean(np.sum(r**2, axis=1)))


@dataclass(frozen=True)
class ResidualPca:
    Phi: np.ndarray
    singular_values: np.ndarray
    n: int
    noise_bound: float


def residual_pca(data: Dataset, model: RegressorModel, n: int, safety_factor: float | None = None) -> ResidualPca:
    """Top-``n`` principal directions of the residual covariance.

    ``noise_bound = sqrt(s_(n+1)) * safety_factor`` with the factor defaulting
    to ``sqrt(m - n)``.
    """
    m = data.m
    if not 1 <= n < m:
        raise DomainError(f"n={n} must lie in [1, {m - 1}]")
    R = data.y - model.predict(data.sigma)
    E = R.T @ R / R.shape[0]
    w, V = np.linalg.eigh(E)
    order = np.argsort(w)[::-1]
    w, V = np.clip(w[order], 0.0, None), V[:, order]
    factor = np.sqrt(m - n) if safety_factor is None else float(safety_factor)
    return ResidualPca(V[:, :n].copy(), w, n, float(np.sqrt(w[n]) * factor))


def reconstruct_datadriven(y, sigma, model: RegressorModel, pca: ResidualPca, safe: SupportSet, ball: BallConstraint):
    """Returns ``(x_hat, y_hat)``: feature estimate from the safe channels and
    the measurement vector with flagged channels replaced by the model."""
    y = np.asarray(y, dtype=float)
    f = model.predict(sigma)
    res = constrained_ls_matrix(y - f, pca.Phi, safe, ball)
    x_hat = res.x_hat
    y_hat = y.copy()
    flagged = safe.complement()
    if len(flagged):
        idx = flagged.as_array()
        y_hat[idx] = f[idx] + row_select(pca.Phi, flagged) @ x_hat
    return x_hat, y_hat


def export_model(model: RegressorModel, pca: ResidualPca, data: Dataset | None = None) -> str:
    doc = {
        "kind": model.kind,
        "theta": model.theta.tolist(),
        "Phi": pca.Phi.tolist(),
        "singular_values": pca.singular_values.tolist(),
        "n": pca.n,
        "noise_bound": pca.noise_bound,
    }
    if data is not None:
        doc["sigma_names"] = list(data.sigma_names)
        doc["y_names"] = list(data.y_names)
    return json.dumps(doc, indent=2)


def import_model(text: str) -> tuple[RegressorModel, ResidualPca]:
    doc = json.loads(text)
    model = RegressorModel(np.asarray(doc["theta"], dtype=float), doc.get("kind", "affine"))
    pca = ResidualPca(
        np.asarray(doc["Phi"], dtype=float),
        np.asarray(doc["singular_values"], dtype=float),
        int(doc["n"]),
        float(doc["noise_bound"]),
    )
    return model, pca
