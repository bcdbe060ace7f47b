"""Polynomial response surfaces over centered stress.

Each judge signal is modeled as a fixed 17-term polynomial in the four centered
stress coordinates: intercept, 4 linear terms, 4 squares, 6 pairwise products,
and the two asymmetric cubic modulation terms x1*x2^2 and x3*x4^2.  A response
surface is the 4 x 17 coefficient matrix mapping the feature vector to the four
signals at once, estimated by ridge-regularized least squares with the
intercept excluded from the penalty.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from .stress_domain import (
    SIGNAL_DIM_NAMES,
    CenteredStress,
    DatasetError,
    SampleRecord,
    centered_matrix,
    signals_matrix,
)

N_FEATURES = 17
#: Order of the pairwise-product terms, by centered-coordinate index.
BILINEAR_PAIRS = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))
#: Fixed basis order; serialized models depend on it, so it is part of the file format.
BASIS_NAMES = (
    "1",
    "x1",
    "x2",
    "x3",
    "x4",
    "x1^2",
    "x2^2",
    "x3^2",
    "x4^2",
    "x1*x2",
    "x1*x3",
    "x1*x4",
    "x2*x3",
    "x2*x4",
    "x3*x4",
    "x1*x2^2",
    "x3*x4^2",
)
DEFAULT_RIDGE = 1e-3

PointLike = Union[CenteredStress, Sequence[float], np.ndarray]


class FitError(ValueError):
    """Raised when a ridge fit is impossible on the given data."""


def _as_point(x: PointLike) -> np.ndarray:
    if isinstance(x, CenteredStress):
        return x.as_array()
    arr = np.asarray(x, dtype=float)
    if arr.shape != (4,):
        raise ValueError(f"expected a 4-vector, got shape {arr.shape}")
    return arr


def build_features(x: PointLike) -> np.ndarray:
    """Evaluate the 17 basis monomials at one centered point, in fixed order."""
    return feature_matrix(_as_point(x)[None, :])[0]


def feature_matrix(X: np.ndarray) -> np.ndarray:
    """Vectorized :func:`build_features` for an (n, 4) array of centered points."""
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    F = np.empty((n, N_FEATURES))
    F[:, 0] = 1.0
    F[:, 1:5] = X
    F[:, 5:9] = X * X
    for k, (i, j) in enumerate(BILINEAR_PAIRS):
        F[:, 9 + k] = X[:, i] * X[:, j]
    F[:, 15] = X[:, 0] * X[:, 1] ** 2
    F[:, 16] = X[:, 2] * X[:, 3] ** 2
    return F


def feature_jacobian(x: PointLike) -> np.ndarray:
    """Derivatives of every basis monomial, as a (17, 4) matrix.

    Row f, column i holds d(feature_f)/d(x_i): zeros for the intercept,
    the identity pattern for linear terms, 2*x_i for squares, the partner
    coordinate for pairwise products, and (x2^2, 2*x1*x2) / (x4^2, 2*x3*x4)
    for the two cubic terms.
    """
    x = _as_point(x)
    J = np.zeros((N_FEATURES, 4))
    for i in range(4):
        J[1 + i, i] = 1.0
        J[5 + i, i] = 2.0 * x[i]
    for k, (i, j) in enumerate(BILINEAR_PAIRS):
        J[9 + k, i] = x[j]
        J[9 + k, j] = x[i]
    J[15, 0] = x[1] ** 2
    J[15, 1] = 2.0 * x[0] * x[1]
    J[16, 2] = x[3] ** 2
    J[16, 3] = 2.0 * x[2] * x[3]
    return J


@dataclass(frozen=True)
class ResponseSurface:
    """A fitted multi-output response surface.

    ``coefficients`` is a 4 x 17 matrix; row k holds the basis coefficients of
    judge dimension k, in the fixed signal order coherence, novel_inference,
    contradiction_resolution, structural_preservation.
    """

    architecture_id: str
    coefficients: np.ndarray
    ridge_strength: float

    def __post_init__(self) -> None:
        coef = np.asarray(self.coefficients, dtype=float)
        if coef.shape != (len(SIGNAL_DIM_NAMES), N_FEATURES):
            raise FitError(f"coefficients must be 4x{N_FEATURES}, got {coef.shape}")
        if not np.all(np.isfinite(coef)):
            raise FitError("coefficients must be finite")
        object.__setattr__(self, "coefficients", coef)

    def to_dict(self) -> dict:
        return {
            "architecture_id": self.architecture_id,
            "rho": self.ridge_strength,
            "basis_order": list(BASIS_NAMES),
            "coefficients": [[float(c) for c in row] for row in self.coefficients],
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "ResponseSurface":
        if tuple(payload.get("basis_order", ())) != BASIS_NAMES:
            raise FitError("model file basis_order does not match this implementation")
        return cls(
            payload["architecture_id"],
            np.asarray(payload["coefficients"], dtype=float),
            float(payload["rho"]),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "ResponseSurface":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def ridge_solve(F: np.ndarray, Y: np.ndarray, rho: float) -> np.ndarray:
    """Closed-form ridge solve shared by surface and deformation fitting.

    Minimizes ||F b - y||^2 + rho * ||b without intercept||^2 per output column
    via the normal equations with penalty matrix diag(0, 1, ..., 1).  Returns
    the (outputs, 17) coefficient matrix.
    """
    if rho < 0:
        raise FitError(f"ridge strength must be non-negative, got {rho}")
    n = F.shape[0]
    if n < N_FEATURES and rho == 0.0:
        raise FitError(f"under-determined fit: {n} rows < {N_FEATURES} features and rho = 0")
    D = np.eye(N_FEATURES)
    D[0, 0] = 0.0
    A = F.T @ F + rho * D
    try:
        beta = np.linalg.solve(A, F.T @ Y)
    except np.linalg.LinAlgError as exc:
        raise FitError(f"penalized normal matrix is singular: {exc}") from exc
    if not np.all(np.isfinite(beta)):
        raise FitError("ridge solve produced non-finite coefficients")
    return beta.T


def fit_ridge(
    records: Sequence[SampleRecord],
    rho: float = DEFAULT_RIDGE,
    architecture_id: str | None = None,
) -> ResponseSurface:
    """Fit the multi-output response surface to evaluated records.

    Every record must carry judge signals; unevaluated rows are an error, never
    silently skipped.  ``architecture_id`` defaults to the single id present in
    the records.
    """
    if architecture_id is None:
        ids = {r.architecture_id for r in records}
        if len(ids) != 1:
            raise FitError(f"records span architectures {sorted(ids)}; pass architecture_id")
        architecture_id = ids.pop()
    try:
        S = signals_matrix(records)
    except DatasetError as exc:
        raise FitError(str(exc)) from exc
    F = feature_matrix(centered_matrix(records))
    coef = ridge_solve(F, S, rho)
    return ResponseSurface(architecture_id, coef, rho)


def predict(surface: ResponseSurface, x: PointLike) -> np.ndarray:
    """Raw model output at one centered point: a 4-vector, NOT clamped to [0, 1].

    Clamping happens only at reporting boundaries; the inverse solver needs the
    smooth unclamped residual.
    """
    return surface.coefficients @ build_features(x)


def predict_matrix(surface: ResponseSurface, X: np.ndarray) -> np.ndarray:
    """Vectorized :func:`predict` for an (n, 4) array of centered points."""
    return feature_matrix(X) @ surface.coefficients.T


@dataclass(frozen=True)
class SignalFit:
    """Goodness-of-fit for one judge dimension.

    ``r_squared`` is ``None`` when the targets have zero variance (undefined),
    never NaN.
    """

    r_squared: float | None
    rmse: float
    mae: float

    def to_dict(self) -> dict:
        return {"r_squared": self.r_squared, "rmse": self.rmse, "mae": self.mae}


@dataclass(frozen=True)
class FitDiagnostics:
    """Per-signal fit quality of a response surface on a dataset."""

    per_signal: dict[str, SignalFit]

    def to_dict(self) -> dict:
        return {name: fit.to_dict() for name, fit in self.per_signal.items()}


def diagnostics(surface: ResponseSurface, records: Sequence[SampleRecord]) -> FitDiagnostics:
    """R^2, RMSE and MAE per judge dimension on evaluated records."""
    S = signals_matrix(records)
    if S.shape[0] == 0:
        raise DatasetError("diagnostics need at least one evaluated record")
    residuals = predict_matrix(surface, centered_matrix(records)) - S
    n = S.shape[0]
    out: dict[str, SignalFit] = {}
    for k, name in enumerate(SIGNAL_DIM_NAMES):
        sse = float(np.sum(residuals[:, k] ** 2))
        sst = float(np.sum((S[:, k] - S[:, k].mean()) ** 2))
        r2 = None if sst == 0.0 else 1.0 - sse / sst
        out[name] = SignalFit(
            r_squared=r2,
            rmse=float(np.sqrt(sse / n)),
            mae=float(np.mean(np.abs(residuals[:, k]))),
        )
    return FitDiagnostics(out)
