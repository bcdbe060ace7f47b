"""Bounded inverse recovery of observed effective stress.

Given a fitted response surface and one observed signal vector, the observed
effective stress is the box-constrained minimizer of

    (s - S(x))' W (s - S(x)) + prior_weight * R(x)

over the centered box [-1/2, 1/2]^4, where R is either the anchored penalty
||x - anchor||^2 (anchor = the sample's designed stress) or a Mahalanobis
distance to a reference distribution.  The solve uses a quasi-Newton bounded
minimizer (L-BFGS-B) with the analytic gradient, started at the anchor.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence, Union

import numpy as np
from scipy.optimize import minimize

from .response_model import ResponseSurface, build_features, feature_jacobian
from .stress_domain import (
    STRESS_DIM_NAMES,
    CenteredStress,
    DatasetError,
    JudgeSignals,
    SampleRecord,
    StressVector,
    _record_to_dict,
)

DEFAULT_PRIOR_WEIGHT = 0.05
DEFAULT_MAX_ITERATIONS = 100
DEFAULT_CONVERGENCE_TOL = 1e-8
_EXTRA_START_SEED = 1729  # fixed grid so multi-start runs stay deterministic

VectorLike = Union[CenteredStress, JudgeSignals, Sequence[float], np.ndarray]


class SolverError(RuntimeError):
    """The bounded minimizer failed (non-finite objective or aggregated per-sample errors)."""


def _as_vec(v: VectorLike) -> np.ndarray:
    if isinstance(v, (CenteredStress, JudgeSignals)):
        return v.as_array()
    arr = np.asarray(v, dtype=float)
    if arr.shape != (4,):
        raise ValueError(f"expected a 4-vector, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class AnchoredPrior:
    """Quadratic pull toward each sample's own designed stress."""

    def penalty(self, x: np.ndarray, anchor: np.ndarray) -> float:
        d = x - anchor
        return float(d @ d)

    def gradient(self, x: np.ndarray, anchor: np.ndarray) -> np.ndarray:
        return 2.0 * (x - anchor)

    def to_dict(self) -> dict:
        return {"kind": "anchored"}


@dataclass(frozen=True)
class DistributionalPrior:
    """Mahalanobis pull toward a reference stress distribution."""

    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self) -> None:
        mean = np.asarray(self.mean, dtype=float)
        cov = np.asarray(self.covariance, dtype=float)
        if mean.shape != (4,) or cov.shape != (4, 4):
            raise ValueError("distributional prior needs a 4-vector mean and 4x4 covariance")
        if not np.allclose(cov, cov.T, atol=1e-12):
            raise ValueError("covariance must be symmetric")
        try:
            np.linalg.cholesky(cov)
        except np.linalg.LinAlgError as exc:
            raise ValueError("covariance must be positive definite") from exc
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)
        object.__setattr__(self, "_precision", np.linalg.inv(cov))

    def penalty(self, x: np.ndarray, anchor: np.ndarray) -> float:
        d = x - self.mean
        return float(d @ self._precision @ d)  # type: ignore[attr-defined]

    def gradient(self, x: np.ndarray, anchor: np.ndarray) -> np.ndarray:
        return 2.0 * (self._precision @ (x - self.mean))  # type: ignore[attr-defined]

    def to_dict(self) -> dict:
        return {
            "kind": "distributional",
            "mean": [float(v) for v in self.mean],
            "covariance": [[float(v) for v in row] for row in self.covariance],
        }


def distributional_prior_from_designed(
    X_centered: np.ndarray, diagonal_ridge: float = 1e-6
) -> DistributionalPrior:
    """Empirical mean/covariance of centered designed stress, ridge-stabilized."""
    X = np.asarray(X_centered, dtype=float)
    mean = X.mean(axis=0)
    centered = X - mean
    cov = (centered.T @ centered) / X.shape[0] + diagonal_ridge * np.eye(4)
    return DistributionalPrior(mean, cov)


@dataclass(frozen=True)
class InverseConfig:
    """Settings of the inverse solve.

    ``weight_matrix`` weights the signal mismatch (symmetric PSD, identity by
    default); ``prior_weight`` trades mismatch against the prior; ``extra_starts``
    adds deterministic random restarts on top of the anchor start (off by default).
    """

    weight_matrix: np.ndarray = field(default_factory=lambda: np.eye(4))
    prior_weight: float = DEFAULT_PRIOR_WEIGHT
    prior: AnchoredPrior | DistributionalPrior = field(default_factory=AnchoredPrior)
    max_iterations: int = DEFAULT_MAX_ITERATIONS
    convergence_tol: float = DEFAULT_CONVERGENCE_TOL
    extra_starts: int = 0

    def __post_init__(self) -> None:
        W = np.asarray(self.weight_matrix, dtype=float)
        if W.shape != (4, 4):
            raise ValueError(f"weight matrix must be 4x4, got {W.shape}")
        if not np.allclose(W, W.T, atol=1e-12):
            raise ValueError("weight matrix must be symmetric")
        if np.linalg.eigvalsh(W).min() < -1e-10:
            raise ValueError("weight matrix must be positive semi-definite")
        if self.prior_weight < 0:
            raise ValueError("prior_weight must be non-negative")
        if self.max_iterations <= 0:
            raise ValueError("max_iterations must be positive")
        if self.convergence_tol <= 0:
            raise ValueError("convergence_tol must be positive")
        if self.extra_starts < 0:
            raise ValueError("extra_starts must be non-negative")
        object.__setattr__(self, "weight_matrix", W)


@dataclass(frozen=True)
class ReconstructionResult:
    """One sample's reconstructed stress plus solver diagnostics."""

    x_obs: CenteredStress
    psi_obs: StressVector
    objective_value: float
    iterations: int
    converged: bool

    def __post_init__(self) -> None:
        if self.psi_obs != self.x_obs.uncenter():
            raise ValueError("psi_obs must equal the uncentered x_obs exactly")


def inverse_objective(
    x: VectorLike,
    signals: VectorLike,
    surface: ResponseSurface,
    cfg: InverseConfig,
    anchor: VectorLike,
) -> float:
    """Weighted signal mismatch plus prior penalty at one candidate point."""
    xv, s, a = _as_vec(x), _as_vec(signals), _as_vec(anchor)
    r = s - surface.coefficients @ build_features(xv)
    mismatch = float(r @ cfg.weight_matrix @ r)
    return mismatch + cfg.prior_weight * cfg.prior.penalty(xv, a)


def inverse_gradient(
    x: VectorLike,
    signals: VectorLike,
    surface: ResponseSurface,
    cfg: InverseConfig,
    anchor: VectorLike,
) -> np.ndarray:
    """Analytic gradient of :func:`inverse_objective` with respect to x.

    Chain rule through the basis: the surface Jacobian at x is C @ J_f(x)
    (4 x 4), giving -2 (C J)' W r for the mismatch term.
    """
    xv, s, a = _as_vec(x), _as_vec(signals), _as_vec(anchor)
    r = s - surface.coefficients @ build_features(xv)
    J = surface.coefficients @ feature_jacobian(xv)
    grad = -2.0 * J.T @ (cfg.weight_matrix @ r)
    return grad + cfg.prior_weight * cfg.prior.gradient(xv, a)


def _start_points(anchor: np.ndarray, extra_starts: int) -> np.ndarray:
    starts = [anchor]
    if extra_starts > 0:
        rng = np.random.default_rng(_EXTRA_START_SEED)
        starts.extend(rng.uniform(-0.5, 0.5, size=(extra_starts, 4)))
    return np.asarray(starts)


def reconstruct_sample(
    signals: VectorLike,
    surface: ResponseSurface,
    cfg: InverseConfig,
    anchor: VectorLike,
) -> ReconstructionResult:
    """Solve one bounded inverse problem; deterministic given its inputs."""
    s = _as_vec(signals)
    a = _as_vec(anchor)
    if np.any(np.abs(a) > 0.5):
        raise ValueError(f"anchor must lie inside the centered box, got {a}")

    def objective(x: np.ndarray) -> float:
        return inverse_objective(x, s, surface, cfg, a)

    def gradient(x: np.ndarray) -> np.ndarray:
        return inverse_gradient(x, s, surface, cfg, a)

    best = None
    for start in _start_points(a, cfg.extra_starts):
        res = minimize(
            objective,
            start,
            jac=gradient,
            method="L-BFGS-B",
            bounds=[(-0.5, 0.5)] * 4,
            options={
                "maxiter": cfg.max_iterations,
                "ftol": 1e-14,
                "gtol": cfg.convergence_tol,
            },
        )
        if not np.isfinite(res.fun):
            raise SolverError("objective became non-finite during the inverse solve")
        if best is None or res.fun < best.fun:
            best = res
    assert best is not None
    x_obs = CenteredStress.from_array(np.clip(best.x, -0.5, 0.5))
    return ReconstructionResult(
        x_obs=x_obs,
        psi_obs=x_obs.uncenter(),
        objective_value=inverse_objective(x_obs, s, surface, cfg, a),
        iterations=int(best.nit),
        converged=bool(best.success),
    )


def reconstruct_dataset(
    records: Sequence[SampleRecord],
    surface: ResponseSurface,
    cfg: InverseConfig,
) -> list[ReconstructionResult]:
    """Reconstruct every record, anchored at its own designed stress.

    Per-sample solves are independent and order-preserving; solver failures are
    aggregated into one error naming the failing samples.
    """
    results: list[ReconstructionResult] = []
    failures: list[str] = []
    for record in records:
        if record.signals is None:
            raise DatasetError(
                f"record {record.prompt_id}/{record.variant_id} has unevaluated signals"
            )
        anchor = record.designed_stress.center()
        try:
            results.append(reconstruct_sample(record.signals, surface, cfg, anchor))
        except SolverError as exc:
            failures.append(f"{record.prompt_id}/{record.variant_id}: {exc}")
    if failures:
        raise SolverError("; ".join(failures))
    return results


def observed_matrix(results: Sequence[ReconstructionResult]) -> np.ndarray:
    """Centered observed stress of each result, stacked to an (n, 4) array."""
    if not results:
        return np.empty((0, 4))
    return np.stack([r.x_obs.as_array() for r in results])


def write_reconstructions(
    records: Sequence[SampleRecord],
    results: Sequence[ReconstructionResult],
    path: str | Path,
) -> None:
    """Write reconstructions as JSONL: the dataset row plus solver fields."""
    if len(records) != len(results):
        raise ValueError("records and results must align one-to-one")
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        for record, result in zip(records, results):
            payload = _record_to_dict(record)
            payload["psi_obs"] = dict(
                zip(STRESS_DIM_NAMES, (float(v) for v in result.psi_obs.as_array()))
            )
            payload["objective"] = result.objective_value
            payload["iterations"] = result.iterations
            payload["converged"] = result.converged
            handle.write(json.dumps(payload, separators=(",", ":")))
            handle.write("\n")


def read_reconstructions(path: str | Path) -> list[dict]:
    """Parse a reconstruction JSONL file back into plain dictionaries."""
    rows = []
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            if line.strip():
                rows.append(json.loads(line))
    return rows
