"""Dispersion statistics, the designed-vs-observed Jensen gap, and regime labels.

For a convex potential phi, the dispersion of a sample cloud is
E[phi(X)] - phi(E[X]) — non-negative by Jensen's inequality, and equal to the
total population variance for the default squared-norm potential.  The gap of
an architecture is the dispersion of its reconstructed (observed) stress minus
the dispersion of the designed stress, with a paired-resample bootstrap
confidence interval.  Positive gaps beyond tolerance indicate expansive
deformation of stress structure, negative ones compression.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from .response_model import BASIS_NAMES, DEFAULT_RIDGE, FitError, feature_matrix, ridge_solve
from .stress_domain import CenteredStress, DatasetError, SampleRecord

DEFAULT_TOLERANCE = 0.01
DEFAULT_RESAMPLES = 500
DEFAULT_BOOTSTRAP_SEED = 7
DEFAULT_QUANTILES = (0.025, 0.975)

ANTIFRAGILITY_COMPATIBLE = "antifragility_compatible"
RESILIENT = "resilient"
FRAGILE = "fragile"
CLASSIFICATION_LABELS = (ANTIFRAGILITY_COMPATIBLE, RESILIENT, FRAGILE)

SamplesLike = Union[Sequence[CenteredStress], Sequence[Sequence[float]], np.ndarray]


def _as_samples(samples: SamplesLike) -> np.ndarray:
    if isinstance(samples, np.ndarray):
        X = np.asarray(samples, dtype=float)
    else:
        rows = [s.as_array() if isinstance(s, CenteredStress) else np.asarray(s, float)
                for s in samples]
        X = np.stack(rows) if rows else np.empty((0, 4))
    if X.ndim != 2 or X.shape[1] != 4:
        raise ValueError(f"expected an (n, 4) sample array, got shape {X.shape}")
    return X


@dataclass(frozen=True)
class ConvexPotential:
    """A convex stress-magnitude function: squared norm, optionally axis-weighted."""

    kind: str = "squared_norm"
    weights: tuple[float, float, float, float] | None = None

    def __post_init__(self) -> None:
        if self.kind == "squared_norm":
            if self.weights is not None:
                raise ValueError("squared_norm takes no weights")
        elif self.kind == "weighted_quadratic":
            if self.weights is None or len(self.weights) != 4:
                raise ValueError("weighted_quadratic needs 4 weights")
            w = tuple(float(v) for v in self.weights)
            if any(v < 0 or not math.isfinite(v) for v in w):
                raise ValueError("weights must be non-negative (convexity)")
            object.__setattr__(self, "weights", w)
        else:
            raise ValueError(f"unknown potential kind {self.kind!r}")

    @classmethod
    def squared_norm(cls) -> "ConvexPotential":
        return cls("squared_norm")

    @classmethod
    def weighted_quadratic(cls, weights: Sequence[float]) -> "ConvexPotential":
        return cls("weighted_quadratic", tuple(float(w) for w in weights))

    def evaluate(self, X: np.ndarray) -> np.ndarray:
        """Potential of each row of an (n, 4) array."""
        X = np.asarray(X, dtype=float)
        sq = X * X
        if self.kind == "squared_norm":
            return sq.sum(axis=1)
        return sq @ np.asarray(self.weights, dtype=float)


def dispersion(samples: SamplesLike, phi: ConvexPotential | None = None) -> float:
    """Jensen dispersion of a sample cloud: mean potential minus potential of the mean.

    Computed as the mean potential of the mean-centered samples — algebraically
    identical for the supported quadratic potentials and non-negative in floating
    point by construction.
    """
    phi = phi or ConvexPotential.squared_norm()
    X = _as_samples(samples)
    if X.shape[0] == 0:
        raise ValueError("dispersion needs a non-empty sample list")
    return float(np.mean(phi.evaluate(X - X.mean(axis=0))))


def jensen_gap(
    designed: SamplesLike, observed: SamplesLike, phi: ConvexPotential | None = None
) -> float:
    """Observed dispersion minus designed dispersion over paired sample rows."""
    Xd, Xo = _as_samples(designed), _as_samples(observed)
    if Xd.shape[0] == 0 or Xo.shape[0] == 0:
        raise ValueError("jensen_gap needs non-empty sample lists")
    if Xd.shape[0] != Xo.shape[0]:
        raise ValueError(
            f"designed and observed must pair row-for-row: {Xd.shape[0]} vs {Xo.shape[0]}"
        )
    return dispersion(Xo, phi) - dispersion(Xd, phi)


def classify(gap: float, tolerance: float = DEFAULT_TOLERANCE) -> str:
    """Three-way regime label for a gap value at the given tolerance band."""
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")
    if gap > tolerance:
        return ANTIFRAGILITY_COMPATIBLE
    if gap < -tolerance:
        return FRAGILE
    return RESILIENT


def bootstrap_gap_ci(
    designed: SamplesLike,
    observed: SamplesLike,
    phi: ConvexPotential | None = None,
    resamples: int = DEFAULT_RESAMPLES,
    seed: int = DEFAULT_BOOTSTRAP_SEED,
    quantiles: tuple[float, float] = DEFAULT_QUANTILES,
) -> tuple[float, float]:
    """Paired-bootstrap confidence interval for the gap.

    Rows are resampled with replacement keeping (designed, observed) pairs
    together.  Each resample uses its own child generator seeded (seed, index),
    so parallel and sequential evaluation produce identical intervals.
    Quantiles are nearest-rank on the sorted resample gaps.
    """
    Xd, Xo = _as_samples(designed), _as_samples(observed)
    if Xd.shape[0] == 0 or Xd.shape[0] != Xo.shape[0]:
        raise ValueError("bootstrap needs non-empty, paired sample lists")
    if resamples < 1:
        raise ValueError("resamples must be >= 1")
    q_lo, q_hi = quantiles
    if not (0.0 < q_lo <= q_hi < 1.0):
        raise ValueError(f"quantiles must satisfy 0 < lo <= hi < 1, got {quantiles}")
    n = Xd.shape[0]
    gaps = np.empty(resamples)
    for b in range(resamples):
        rng = np.random.default_rng((seed, b))
        idx = rng.integers(0, n, size=n)
        gaps[b] = jensen_gap(Xd[idx], Xo[idx], phi)
    gaps.sort()
    lo = gaps[max(0, math.ceil(q_lo * resamples) - 1)]
    hi = gaps[max(0, math.ceil(q_hi * resamples) - 1)]
    return float(lo), float(hi)


@dataclass(frozen=True)
class DeformationMap:
    """Polynomial map from designed to reconstructed stress (diagnostics only).

    Shares the 17-term basis and coefficient layout with the response surface:
    row i predicts observed coordinate i from the designed-stress features.
    """

    architecture_id: str
    coefficients: np.ndarray

    def __post_init__(self) -> None:
        coef = np.asarray(self.coefficients, dtype=float)
        if coef.shape != (4, len(BASIS_NAMES)):
            raise FitError(f"coefficients must be 4x{len(BASIS_NAMES)}, got {coef.shape}")
        if not np.all(np.isfinite(coef)):
            raise FitError("coefficients must be finite")
        object.__setattr__(self, "coefficients", coef)

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Predicted observed stress for each row of centered designed stress."""
        return feature_matrix(_as_samples(X)) @ self.coefficients.T

    def to_dict(self) -> dict:
        return {
            "architecture_id": self.architecture_id,
            "basis_order": list(BASIS_NAMES),
            "coefficients": [[float(c) for c in row] for row in self.coefficients],
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "DeformationMap":
        if tuple(payload.get("basis_order", ())) != BASIS_NAMES:
            raise FitError("deformation file basis_order does not match this implementation")
        return cls(payload["architecture_id"], np.asarray(payload["coefficients"], dtype=float))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "DeformationMap":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def fit_deformation(
    pairs: Sequence[tuple[CenteredStress | Sequence[float], CenteredStress | Sequence[float]]],
    rho: float = DEFAULT_RIDGE,
    architecture_id: str = "",
) -> DeformationMap:
    """Ridge-fit the designed-to-observed map on (designed, observed) pairs."""
    if len(pairs) < len(BASIS_NAMES):
        raise FitError(f"deformation fit needs at least {len(BASIS_NAMES)} pairs, got {len(pairs)}")
    designed = _as_samples([p[0] for p in pairs])
    observed = _as_samples([p[1] for p in pairs])
    coef = ridge_solve(feature_matrix(designed), observed, rho)
    return DeformationMap(architecture_id, coef)


def std_expansion(designed: SamplesLike, observed: SamplesLike) -> np.ndarray:
    """Per-dimension change in stress spread: std(observed) - std(designed).

    Population convention (divide by N), matching the dispersion statistics.
    """
    Xd, Xo = _as_samples(designed), _as_samples(observed)
    if Xd.shape[0] == 0 or Xd.shape[0] != Xo.shape[0]:
        raise ValueError("std_expansion needs non-empty, paired sample lists")
    return Xo.std(axis=0, ddof=0) - Xd.std(axis=0, ddof=0)


@dataclass(frozen=True)
class QualityDrop:
    """Clean-vs-perturbed difference in mean judge quality.

    Quality of a record is the mean of its four signals; ``drop`` is
    perturbed minus clean, and ``relative_drop`` is -drop/clean_mean (a
    positive fraction when quality degrades under stress).
    """

    clean_mean: float
    perturbed_mean: float
    drop: float
    relative_drop: float | None

    def to_dict(self) -> dict:
        return {
            "clean_mean": self.clean_mean,
            "perturbed_mean": self.perturbed_mean,
            "drop": self.drop,
            "relative_drop": self.relative_drop,
        }


def quality_drop(records: Sequence[SampleRecord]) -> QualityDrop:
    """Grouped mean quality of evaluated records, split by the clean flag."""
    clean, perturbed = [], []
    for record in records:
        if record.signals is None:
            raise DatasetError(
                f"record {record.prompt_id}/{record.variant_id} has unevaluated signals"
            )
        quality = float(record.signals.as_array().mean())
        (clean if record.is_clean else perturbed).append(quality)
    if not clean or not perturbed:
        raise DatasetError("quality drop needs at least one clean and one perturbed record")
    clean_mean = float(np.mean(clean))
    perturbed_mean = float(np.mean(perturbed))
    drop = perturbed_mean - clean_mean
    relative = None if clean_mean == 0.0 else -drop / clean_mean
    return QualityDrop(clean_mean, perturbed_mean, drop, relative)


@dataclass(frozen=True)
class JensenReport:
    """Gap summary for one architecture: dispersions, CI, and regime label."""

    architecture_id: str
    expected_dispersion: float
    observed_dispersion: float
    gap: float
    ci_low: float
    ci_high: float
    classification: str
    n_samples: int
    bootstrap_resamples: int
    bootstrap_seed: int

    def __post_init__(self) -> None:
        if self.expected_dispersion < 0 or self.observed_dispersion < 0:
            raise ValueError("dispersions are non-negative by Jensen's inequality")
        if self.ci_low > self.ci_high:
            raise ValueError("ci_low must not exceed ci_high")
        if self.classification not in CLASSIFICATION_LABELS:
            raise ValueError(f"unknown classification {self.classification!r}")

    def to_dict(self) -> dict:
        return {
            "architecture_id": self.architecture_id,
            "expected_dispersion": self.expected_dispersion,
            "observed_dispersion": self.observed_dispersion,
            "gap": self.gap,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "classification": self.classification,
            "n_samples": self.n_samples,
            "bootstrap_resamples": self.bootstrap_resamples,
            "bootstrap_seed": self.bootstrap_seed,
        }


def build_jensen_report(
    architecture_id: str,
    designed: SamplesLike,
    observed: SamplesLike,
    phi: ConvexPotential | None = None,
    tolerance: float = DEFAULT_TOLERANCE,
    resamples: int = DEFAULT_RESAMPLES,
    bootstrap_seed: int = DEFAULT_BOOTSTRAP_SEED,
) -> JensenReport:
    """Compute dispersions, gap, bootstrap CI and label in one shot."""
    Xd, Xo = _as_samples(designed), _as_samples(observed)
    expected = dispersion(Xd, phi)
    observed_disp = dispersion(Xo, phi)
    gap = observed_disp - expected
    ci_low, ci_high = bootstrap_gap_ci(
        Xd, Xo, phi, resamples=resamples, seed=bootstrap_seed
    )
    return JensenReport(
        architecture_id=architecture_id,
        expected_dispersion=expected,
        observed_dispersion=observed_disp,
        gap=gap,
        ci_low=ci_low,
        ci_high=ci_high,
        classification=classify(gap, tolerance),
        n_samples=Xd.shape[0],
        bootstrap_resamples=resamples,
        bootstrap_seed=bootstrap_seed,
    )
