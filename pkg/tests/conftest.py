"""Shared fixtures and helpers for the test suite."""

import numpy as np
import pytest

from stressgap.response_model import N_FEATURES, ResponseSurface
from stressgap.stress_domain import JudgeSignals, SampleRecord, StressVector
from stressgap.synthetic_harness import default_true_surface


@pytest.fixture
def linear_surface() -> ResponseSurface:
    """Well-conditioned linear-dominant surface used across the suite."""
    return default_true_surface("test-arch")


def random_surface(rng: np.random.Generator, scale: float = 0.5) -> ResponseSurface:
    """A dense random 4x17 surface (no range guarantees on its predictions)."""
    coef = rng.uniform(-scale, scale, size=(4, N_FEATURES))
    return ResponseSurface("random", coef, 0.0)


def bounded_random_surface(rng: np.random.Generator) -> ResponseSurface:
    """A dense random surface whose predictions stay inside [0, 1] on the box.

    Intercept near 1/2 plus non-intercept terms whose absolute row sum is below
    0.45; every basis monomial is bounded by 1 on the centered box, so the
    prediction lives in roughly [0.05, 0.95].
    """
    coef = rng.uniform(-0.025, 0.025, size=(4, N_FEATURES))
    coef[:, 0] = rng.uniform(0.45, 0.55, size=4)
    return ResponseSurface("bounded", coef, 0.0)


def records_from_arrays(psi, signals, architecture_id="A0") -> list[SampleRecord]:
    """Wrap raw (n, 4) stress and signal arrays into perturbed sample records."""
    return [
        SampleRecord(
            f"P{i:03d}",
            "V01",
            architecture_id,
            StressVector.from_array(p),
            None if signals is None else JudgeSignals.from_array(signals[i]),
            False,
        )
        for i, p in enumerate(psi)
    ]
