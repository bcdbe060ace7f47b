"""Stress-space primitives, designed-stress sampling, and dataset I/O.

The evaluation domain is a four-dimensional stress cube: every prompt variant
carries an intensity in [0, 1] for each of ``conflict``, ``load``, ``ambiguity``
and ``drift``.  All modeling happens in centered coordinates, obtained by
shifting each intensity by -1/2 into the box [-1/2, 1/2]^4.

Coordinates are snapped to the 2**-53 grid when a :class:`StressVector` or
:class:`CenteredStress` is constructed.  On that grid the +-1/2 shift is exact
in both directions (the raw float64 line is denser below 0.25 than its image
under the shift, so an exact round-trip is impossible without the snap).  The
snap moves a coordinate by at most 2**-54 ~ 5.6e-17, far below every tolerance
used anywhere in the pipeline.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

N_STRESS_DIMS = 4
STRESS_DIM_NAMES = ("conflict", "load", "ambiguity", "drift")
SIGNAL_DIM_NAMES = (
    "coherence",
    "novel_inference",
    "contradiction_resolution",
    "structural_preservation",
)

#: Default per-dimension means of the designed-stress sampler.
DEFAULT_STRESS_MEANS = (0.40, 0.58, 0.32, 0.46)
#: Default per-dimension standard deviations of the designed-stress sampler.
DEFAULT_STRESS_STDS = (0.18, 0.20, 0.16, 0.18)
#: Default seed for dataset generation.
DEFAULT_DATASET_SEED = 20260428

_GRID = 9007199254740992.0  # 2**53


class DatasetError(ValueError):
    """Base class for dataset construction and ingestion failures."""


class ParseError(DatasetError):
    """A dataset line is not valid JSON."""


class RecordValidationError(DatasetError):
    """A record violates the schema or a range constraint."""


class DuplicateKeyError(DatasetError):
    """Two records share the same (prompt, variant, architecture) key."""


def _snap(value: float) -> float:
    # Exact: value * 2**53 and the final division change only the exponent,
    # and round() is correctly rounded, so this lands on the nearest grid point.
    return round(value * _GRID) / _GRID


def _check_unit(value: object, field: str, kind: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise RecordValidationError(f"{kind} field '{field}' must be a number, got {value!r}")
    v = float(value)
    if not 0.0 <= v <= 1.0:
        raise RecordValidationError(f"{kind} field '{field}' out of range [0, 1]: {v!r}")
    return v


@dataclass(frozen=True, slots=True)
class StressVector:
    """A point in raw stress space, every coordinate in [0, 1]."""

    conflict: float
    load: float
    ambiguity: float
    drift: float

    def __post_init__(self) -> None:
        for name in STRESS_DIM_NAMES:
            v = _check_unit(getattr(self, name), name, "stress")
            object.__setattr__(self, name, _snap(v))

    def as_array(self) -> np.ndarray:
        return np.array([self.conflict, self.load, self.ambiguity, self.drift])

    @classmethod
    def from_array(cls, values: Sequence[float]) -> "StressVector":
        return cls(*(float(v) for v in values))

    def center(self) -> "CenteredStress":
        return center(self)

    def is_zero(self) -> bool:
        return self.conflict == self.load == self.ambiguity == self.drift == 0.0


@dataclass(frozen=True, slots=True)
class CenteredStress:
    """A point in centered stress space, every coordinate in [-1/2, 1/2]."""

    x1: float
    x2: float
    x3: float
    x4: float

    def __post_init__(self) -> None:
        for name in ("x1", "x2", "x3", "x4"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise RecordValidationError(f"centered field '{name}' must be a number")
            v = float(value)
            if not -0.5 <= v <= 0.5:
                raise RecordValidationError(
                    f"centered field '{name}' out of range [-1/2, 1/2]: {v!r}"
                )
            object.__setattr__(self, name, _snap(v))

    def as_array(self) -> np.ndarray:
        return np.array([self.x1, self.x2, self.x3, self.x4])

    @classmethod
    def from_array(cls, values: Sequence[float]) -> "CenteredStress":
        return cls(*(float(v) for v in values))

    def uncenter(self) -> StressVector:
        return uncenter(self)


@dataclass(frozen=True, slots=True)
class JudgeSignals:
    """One evaluator's four scores for a single response, each in [0, 1]."""

    coherence: float
    novel_inference: float
    contradiction_resolution: float
    structural_preservation: float

    def __post_init__(self) -> None:
        for name in SIGNAL_DIM_NAMES:
            object.__setattr__(self, name, _check_unit(getattr(self, name), name, "signal"))

    def as_array(self) -> np.ndarray:
        return np.array(
            [
                self.coherence,
                self.novel_inference,
                self.contradiction_resolution,
                self.structural_preservation,
            ]
        )

    @classmethod
    def from_array(cls, values: Sequence[float]) -> "JudgeSignals":
        return cls(*(float(v) for v in values))


@dataclass(frozen=True, slots=True)
class SampleRecord:
    """One evaluation row: ids, designed stress, judge signals, clean flag.

    ``signals`` is ``None`` for generated-but-not-yet-evaluated rows; fitting
    rejects such rows explicitly rather than treating them as zeros.
    """

    prompt_id: str
    variant_id: str
    architecture_id: str
    designed_stress: StressVector
    signals: JudgeSignals | None
    is_clean: bool

    def __post_init__(self) -> None:
        if self.is_clean and not self.designed_stress.is_zero():
            raise RecordValidationError(
                f"clean record {self.prompt_id}/{self.variant_id} must have zero designed stress"
            )

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.prompt_id, self.variant_id, self.architecture_id)

    @property
    def evaluated(self) -> bool:
        return self.signals is not None


@dataclass(frozen=True, slots=True)
class StressDistributionSpec:
    """Per-dimension Gaussian parameters of the designed-stress sampler.

    Draws are clipped into [0, 1] (hard truncation: out-of-range values are
    pinned to the boundary, not resampled).
    """

    means: tuple[float, float, float, float]
    stds: tuple[float, float, float, float]

    def __post_init__(self) -> None:
        means = tuple(float(m) for m in self.means)
        stds = tuple(float(s) for s in self.stds)
        if len(means) != N_STRESS_DIMS or len(stds) != N_STRESS_DIMS:
            raise DatasetError("distribution spec needs exactly 4 (mean, std) pairs")
        if not all(np.isfinite(means)):
            raise DatasetError(f"non-finite mean in {means!r}")
        for s in stds:
            if not (np.isfinite(s) and s > 0.0):
                raise DatasetError(f"standard deviations must be strictly positive, got {s!r}")
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "stds", stds)

    @classmethod
    def default(cls) -> "StressDistributionSpec":
        return cls(DEFAULT_STRESS_MEANS, DEFAULT_STRESS_STDS)

    @classmethod
    def from_dict(cls, payload: dict) -> "StressDistributionSpec":
        dims = payload.get("dims")
        if not isinstance(dims, list) or len(dims) != N_STRESS_DIMS:
            raise DatasetError("spec file must contain a 'dims' list with 4 entries")
        names = tuple(d.get("name") for d in dims)
        if names != STRESS_DIM_NAMES:
            raise DatasetError(
                f"spec dims must be named {STRESS_DIM_NAMES} in order, got {names}"
            )
        try:
            means = tuple(float(d["mean"]) for d in dims)
            stds = tuple(float(d["std"]) for d in dims)
        except (KeyError, TypeError, ValueError) as exc:
            raise DatasetError(f"malformed spec dims: {exc}") from exc
        return cls(means, stds)  # type: ignore[arg-type]

    def to_dict(self) -> dict:
        return {
            "dims": [
                {"name": name, "mean": mean, "std": std}
                for name, mean, std in zip(STRESS_DIM_NAMES, self.means, self.stds)
            ]
        }

    @classmethod
    def from_json_file(cls, path: str | Path) -> "StressDistributionSpec":
        text = Path(path).read_text(encoding="utf-8")
        try:
            payload = json.loads(text)
        except json.JSONDecodeError as exc:
            raise DatasetError(f"spec file {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(payload)


def center(psi: StressVector) -> CenteredStress:
    """Shift raw stress into the centered box: each coordinate minus 1/2."""
    a = psi.as_array() - 0.5
    return CenteredStress(float(a[0]), float(a[1]), float(a[2]), float(a[3]))


def uncenter(x: CenteredStress) -> StressVector:
    """Exact inverse of :func:`center`: each coordinate plus 1/2."""
    a = x.as_array() + 0.5
    return StressVector(float(a[0]), float(a[1]), float(a[2]), float(a[3]))


def sample_designed_stress(
    spec: StressDistributionSpec, seed: int, count: int
) -> list[StressVector]:
    """Draw ``count`` designed stress vectors from the clipped-Gaussian law.

    Deterministic in (spec, seed, count): one 4-dimensional draw per row, in
    row order, from a fresh PCG64 generator.
    """
    if count < 0:
        raise DatasetError(f"count must be non-negative, got {count}")
    rng = np.random.default_rng(seed)
    draws = rng.normal(spec.means, spec.stds, size=(count, N_STRESS_DIMS))
    draws = np.clip(draws, 0.0, 1.0)
    return [StressVector.from_array(row) for row in draws]


def build_designed_dataset(
    spec: StressDistributionSpec,
    n_clean: int,
    variants_per_clean: int,
    seed: int,
    architecture_id: str,
) -> list[SampleRecord]:
    """Build the designed dataset: clean rows at zero stress plus sampled variants.

    Emits ``n_clean`` clean records first (variant ``V00``, unevaluated signals),
    then ``n_clean * variants_per_clean`` perturbed records in prompt-major order
    (``P000/V01 .. P000/V10, P001/V01 ..``).  Ids are deterministic.
    """
    if n_clean < 0 or variants_per_clean < 0:
        raise DatasetError("record counts must be non-negative")
    zero = StressVector(0.0, 0.0, 0.0, 0.0)
    records = [
        SampleRecord(f"P{i:03d}", "V00", architecture_id, zero, None, True)
        for i in range(n_clean)
    ]
    sampled = sample_designed_stress(spec, seed, n_clean * variants_per_clean)
    for i in range(n_clean):
        for j in range(variants_per_clean):
            records.append(
                SampleRecord(
                    f"P{i:03d}",
                    f"V{j + 1:02d}",
                    architecture_id,
                    sampled[i * variants_per_clean + j],
                    None,
                    False,
                )
            )
    return records


def _record_to_dict(record: SampleRecord) -> dict:
    stress = dict(zip(STRESS_DIM_NAMES, (float(v) for v in record.designed_stress.as_array())))
    signals = (
        None
        if record.signals is None
        else dict(zip(SIGNAL_DIM_NAMES, (float(v) for v in record.signals.as_array())))
    )
    return {
        "prompt_id": record.prompt_id,
        "variant_id": record.variant_id,
        "architecture_id": record.architecture_id,
        "stress": stress,
        "signals": signals,
        "is_clean": record.is_clean,
    }


def _record_from_dict(payload: dict, line_no: int) -> SampleRecord:
    def fail(message: str) -> RecordValidationError:
        return RecordValidationError(f"line {line_no}: {message}")

    if not isinstance(payload, dict):
        raise fail("record must be a JSON object")
    for field in ("prompt_id", "variant_id", "architecture_id"):
        if not isinstance(payload.get(field), str) or not payload[field]:
            raise fail(f"field '{field}' must be a non-empty string")
    stress = payload.get("stress")
    if not isinstance(stress, dict) or set(stress) != set(STRESS_DIM_NAMES):
        raise fail(f"field 'stress' must be an object with keys {STRESS_DIM_NAMES}")
    signals = payload.get("signals")
    if signals is not None and (
        not isinstance(signals, dict) or set(signals) != set(SIGNAL_DIM_NAMES)
    ):
        raise fail(f"field 'signals' must be null or an object with keys {SIGNAL_DIM_NAMES}")
    if not isinstance(payload.get("is_clean"), bool):
        raise fail("field 'is_clean' must be a boolean")
    try:
        stress_vec = StressVector(*(stress[name] for name in STRESS_DIM_NAMES))
        signal_vec = (
            None
            if signals is None
            else JudgeSignals(*(signals[name] for name in SIGNAL_DIM_NAMES))
        )
        return SampleRecord(
            payload["prompt_id"],
            payload["variant_id"],
            payload["architecture_id"],
            stress_vec,
            signal_vec,
            payload["is_clean"],
        )
    except RecordValidationError as exc:
        raise fail(str(exc)) from exc


def write_records(records: Iterable[SampleRecord], path: str | Path) -> None:
    """Write records as JSONL (UTF-8, LF line endings, one record per line)."""
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        for record in records:
            handle.write(json.dumps(_record_to_dict(record), separators=(",", ":")))
            handle.write("\n")


def ingest_records(path: str | Path) -> list[SampleRecord]:
    """Read and validate a JSONL dataset.

    Raises :class:`ParseError` for malformed JSON, :class:`RecordValidationError`
    for schema or range violations (both name the offending line), and
    :class:`DuplicateKeyError` when a (prompt, variant, architecture) key repeats.
    """
    records: list[SampleRecord] = []
    seen: dict[tuple[str, str, str], int] = {}
    with open(path, "r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                payload = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"line {line_no}: invalid JSON ({exc.msg})") from exc
            record = _record_from_dict(payload, line_no)
            if record.key in seen:
                raise DuplicateKeyError(
                    f"line {line_no}: duplicate key {record.key} "
                    f"(first seen on line {seen[record.key]})"
                )
            seen[record.key] = line_no
            records.append(record)
    return records


def designed_matrix(records: Sequence[SampleRecord]) -> np.ndarray:
    """Raw designed stress of each record, stacked to an (n, 4) array."""
    if not records:
        return np.empty((0, N_STRESS_DIMS))
    return np.stack([r.designed_stress.as_array() for r in records])


def centered_matrix(records: Sequence[SampleRecord]) -> np.ndarray:
    """Centered designed stress of each record, stacked to an (n, 4) array."""
    if not records:
        return np.empty((0, N_STRESS_DIMS))
    return np.stack([r.designed_stress.center().as_array() for r in records])


def signals_matrix(records: Sequence[SampleRecord]) -> np.ndarray:
    """Judge signals stacked to an (n, 4) array; rejects unevaluated rows."""
    rows = []
    for record in records:
        if record.signals is None:
            raise DatasetError(
                f"record {record.prompt_id}/{record.variant_id} has unevaluated signals"
            )
        rows.append(record.signals.as_array())
    if not rows:
        return np.empty((0, len(SIGNAL_DIM_NAMES)))
    return np.stack(rows)
