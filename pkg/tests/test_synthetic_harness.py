"""Ground-truth generators and end-to-end validation against known answers."""

import numpy as np
import pytest

from stressgap.deformation_jensen import (
    FRAGILE,
    RESILIENT,
    build_jensen_report,
    std_expansion,
)
from stressgap.inverse_reconstruction import (
    InverseConfig,
    observed_matrix,
    reconstruct_dataset,
)
from stressgap.response_model import fit_ridge, predict_matrix
from stressgap.stress_domain import StressDistributionSpec, centered_matrix
from stressgap.synthetic_harness import (
    AffineDeformation,
    AxisScaleDeformation,
    IdentityDeformation,
    PolynomialDeformation,
    SyntheticArchitecture,
    clip_box,
    default_true_surface,
    deformation_from_dict,
    effective_stress,
    oracle_gap,
    run_oracle_validation,
    simulate_dataset,
    simulate_signals,
)


class TestDeformations:
    """The declared ground-truth stress maps."""

    def test_identity_passthrough(self):
        rng = np.random.default_rng(110)
        X = rng.uniform(-0.5, 0.5, size=(20, 4))
        out = IdentityDeformation().apply(X)
        np.testing.assert_array_equal(out, X)
        assert out is not X  # caller-safe copy

    def test_axis_scale_values(self):
        X = np.array([[0.1, -0.2, 0.3, -0.4]])
        out = AxisScaleDeformation((2.0, 0.5, 1.0, -1.0)).apply(X)
        np.testing.assert_allclose(out, [[0.2, -0.1, 0.3, 0.4]], rtol=1e-15)

    def test_axis_scale_validation(self):
        with pytest.raises(ValueError):
            AxisScaleDeformation((1.0, 1.0, 1.0))
        with pytest.raises(ValueError):
            AxisScaleDeformation((1.0, 1.0, 1.0, float("nan")))

    def test_affine_values(self):
        rng = np.random.default_rng(111)
        M = rng.normal(size=(4, 4))
        b = rng.normal(size=4)
        X = rng.uniform(-0.5, 0.5, size=(15, 4))
        out = AffineDeformation(M, b).apply(X)
        np.testing.assert_allclose(out, X @ M.T + b, rtol=1e-14)

    def test_affine_validation(self):
        with pytest.raises(ValueError):
            AffineDeformation(np.zeros((3, 4)), np.zeros(4))
        with pytest.raises(ValueError):
            AffineDeformation(np.full((4, 4), np.inf), np.zeros(4))

    def test_polynomial_with_linear_identity_plus_offset(self):
        coef = np.zeros((4, 17))
        offsets = np.array([0.01, -0.02, 0.03, 0.0])
        coef[:, 0] = offsets
        for i in range(4):
            coef[i, 1 + i] = 1.0
        rng = np.random.default_rng(112)
        X = rng.uniform(-0.4, 0.4, size=(25, 4))
        np.testing.assert_allclose(
            PolynomialDeformation(coef).apply(X), X + offsets, rtol=0, atol=1e-15
        )

    def test_serialization_roundtrip_all_kinds(self):
        rng = np.random.default_rng(113)
        examples = [
            IdentityDeformation(),
            AxisScaleDeformation((1.3, 0.7, 1.0, 2.0)),
            AffineDeformation(rng.normal(size=(4, 4)), rng.normal(size=4)),
            PolynomialDeformation(rng.normal(size=(4, 17))),
        ]
        X = rng.uniform(-0.3, 0.3, size=(10, 4))
        for deformation in examples:
            loaded = deformation_from_dict(deformation.to_dict())
            assert loaded.to_dict() == deformation.to_dict()
            np.testing.assert_allclose(loaded.apply(X), deformation.apply(X), rtol=1e-14)

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError, match="kind"):
            deformation_from_dict({"kind": "shear"})

    def test_clip_box(self):
        X = np.array([[0.7, -0.9, 0.2, 0.5]])
        np.testing.assert_array_equal(clip_box(X), [[0.5, -0.5, 0.2, 0.5]])


class TestDefaultSurface:
    """The built-in linear-dominant ground truth."""

    def test_structure(self):
        surface = default_true_surface("X1")
        assert surface.architecture_id == "X1"
        np.testing.assert_allclose(surface.coefficients[:, 0], [0.68, 0.66, 0.70, 0.72])
        assert np.all(surface.coefficients[:, 5:] == 0.0)
        linear = surface.coefficients[:, 1:5]
        assert np.linalg.matrix_rank(linear) == 4  # invertible signal map

    def test_predictions_sane_on_sampled_cloud(self):
        rng = np.random.default_rng(114)
        X = rng.uniform(-0.5, 0.5, size=(2000, 4))
        P = predict_matrix(default_true_surface(), X)
        assert P.min() > 0.3 and P.max() < 1.05


class TestEffectiveStress:
    """Deform-then-clip semantics."""

    def test_identity_no_clip(self):
        rng = np.random.default_rng(115)
        X = rng.uniform(-0.5, 0.5, size=(30, 4))
        arch = SyntheticArchitecture(id="A0")
        np.testing.assert_array_equal(effective_stress(arch, X), X)

    def test_expansion_clipped_into_box(self):
        arch = SyntheticArchitecture(
            id="A0", true_deformation=AxisScaleDeformation((2.0, 1.0, 1.0, 1.0))
        )
        X = np.array([[0.4, 0.1, 0.1, 0.1]])
        out = effective_stress(arch, X)
        np.testing.assert_allclose(out, [[0.5, 0.1, 0.1, 0.1]], rtol=1e-15)

    def test_signals_generated_at_clipped_point(self):
        arch = SyntheticArchitecture(
            id="A0", true_deformation=AxisScaleDeformation((2.0, 1.0, 1.0, 1.0))
        )
        X = np.array([[0.4, 0.1, 0.1, 0.1]])
        S = simulate_signals(X, arch, seed=1)
        at_clipped = predict_matrix(arch.true_surface, np.array([[0.5, 0.1, 0.1, 0.1]]))
        at_raw = predict_matrix(arch.true_surface, np.array([[0.8, 0.1, 0.1, 0.1]]))
        np.testing.assert_allclose(S, np.clip(at_clipped, 0, 1), rtol=1e-14)
        assert not np.allclose(S, np.clip(at_raw, 0, 1))


class TestSimulateSignals:
    """Seeded signal generation."""

    def test_zero_noise_equals_surface(self):
        rng = np.random.default_rng(116)
        X = rng.uniform(-0.3, 0.3, size=(50, 4))
        arch = SyntheticArchitecture(id="A0", clamp_signals=False)
        S = simulate_signals(X, arch, seed=5)
        np.testing.assert_array_equal(S, predict_matrix(arch.true_surface, X))

    def test_reproducible_per_seed(self):
        rng = np.random.default_rng(117)
        X = rng.uniform(-0.3, 0.3, size=(40, 4))
        arch = SyntheticArchitecture(id="A0", noise_std=0.05)
        np.testing.assert_array_equal(
            simulate_signals(X, arch, seed=9), simulate_signals(X, arch, seed=9)
        )
        assert not np.array_equal(
            simulate_signals(X, arch, seed=9), simulate_signals(X, arch, seed=10)
        )

    def test_noise_level_matches_declaration(self):
        rng = np.random.default_rng(118)
        X = rng.uniform(-0.2, 0.2, size=(2500, 4))
        arch = SyntheticArchitecture(id="A0", noise_std=0.05, clamp_signals=False)
        S = simulate_signals(X, arch, seed=11)
        noise = S - predict_matrix(arch.true_surface, X)
        assert float(noise.std()) == pytest.approx(0.05, rel=0.10)

    def test_clamping_bounds_signals(self):
        rng = np.random.default_rng(119)
        X = rng.uniform(-0.5, 0.5, size=(200, 4))
        arch = SyntheticArchitecture(id="A0", noise_std=5.0, clamp_signals=True)
        S = simulate_signals(X, arch, seed=12)
        assert S.min() >= 0.0 and S.max() <= 1.0


class TestSimulateDataset:
    """Schema-complete synthetic datasets."""

    def test_every_record_evaluated(self):
        records = simulate_dataset(
            StressDistributionSpec.default(), SyntheticArchitecture(id="A0"), 5, 4
        )
        assert len(records) == 25
        assert all(r.evaluated for r in records)
        assert all(r.evaluated for r in records if r.is_clean)

    def test_designed_layout_matches_plain_build(self):
        from stressgap.stress_domain import build_designed_dataset

        spec = StressDistributionSpec.default()
        arch = SyntheticArchitecture(id="A2")
        simulated = simulate_dataset(spec, arch, 4, 3, seed=77)
        plain = build_designed_dataset(spec, 4, 3, 77, "A2")
        assert [r.key for r in simulated] == [r.key for r in plain]
        for sim, ref in zip(simulated, plain):
            assert sim.designed_stress == ref.designed_stress
            assert sim.is_clean == ref.is_clean

    def test_reproducible(self):
        spec = StressDistributionSpec.default()
        arch = SyntheticArchitecture(id="A0", noise_std=0.02)
        a = simulate_dataset(spec, arch, 3, 3, seed=5)
        b = simulate_dataset(spec, arch, 3, 3, seed=5)
        assert a == b


class TestOracleGap:
    """Directly computed ground-truth gaps."""

    def test_identity_is_exactly_zero(self):
        rng = np.random.default_rng(120)
        X = rng.uniform(-0.5, 0.5, size=(100, 4))
        assert oracle_gap(X, SyntheticArchitecture(id="A0")) == 0.0

    def test_single_axis_expansion_without_clipping(self):
        rng = np.random.default_rng(121)
        X = rng.uniform(-0.15, 0.15, size=(400, 4))
        arch = SyntheticArchitecture(
            id="A0", true_deformation=AxisScaleDeformation((3.0, 1.0, 1.0, 1.0))
        )
        expected = 8.0 * float(X[:, 0].var(ddof=0))
        np.testing.assert_allclose(oracle_gap(X, arch), expected, rtol=1e-12)

    def test_signs_on_sampled_cloud(self):
        from stressgap.stress_domain import sample_designed_stress

        draws = sample_designed_stress(StressDistributionSpec.default(), 3, 400)
        X = np.stack([d.center().as_array() for d in draws])
        grow = SyntheticArchitecture(
            id="A0", true_deformation=AxisScaleDeformation((1.3,) * 4)
        )
        shrink = SyntheticArchitecture(
            id="A0", true_deformation=AxisScaleDeformation((0.7,) * 4)
        )
        assert oracle_gap(X, grow) > 0.0
        assert oracle_gap(X, shrink) < 0.0

    def test_clipping_reduces_expansion_gap(self):
        rng = np.random.default_rng(122)
        X = rng.uniform(-0.45, 0.45, size=(500, 4))
        arch = SyntheticArchitecture(
            id="A0", true_deformation=AxisScaleDeformation((1.5,) * 4)
        )
        unclipped = (1.5**2 - 1.0) * float(X.var(axis=0, ddof=0).sum())
        assert 0.0 < oracle_gap(X, arch) < unclipped


class TestArchitectureConfig:
    """Declared ground-truth serialization and validation."""

    def test_defaults(self):
        arch = SyntheticArchitecture(id="A0")
        assert isinstance(arch.true_deformation, IdentityDeformation)
        assert arch.true_surface.architecture_id == "A0"
        assert arch.noise_std == 0.0
        assert arch.clamp_signals is True

    def test_validation(self):
        with pytest.raises(ValueError):
            SyntheticArchitecture(id="")
        with pytest.raises(ValueError):
            SyntheticArchitecture(id="A0", noise_std=-0.1)

    def test_json_roundtrip(self, tmp_path):
        arch = SyntheticArchitecture(
            id="A5",
            true_deformation=AxisScaleDeformation((1.3, 0.7, 1.0, 1.1)),
            noise_std=0.05,
            clamp_signals=False,
        )
        path = tmp_path / "arch.json"
        path.write_text(__import__("json").dumps(arch.to_dict()), encoding="utf-8")
        loaded = SyntheticArchitecture.from_json_file(path)
        assert loaded.to_dict() == arch.to_dict()


class TestPlainPipelineOnSyntheticData:
    """Fit at designed stress, reconstruct, classify — the analysis path."""

    def _run(self, factors, noise, resamples=200):
        spec = StressDistributionSpec.default()
        arch = SyntheticArchitecture(
            id="A0",
            true_deformation=AxisScaleDeformation(factors),
            noise_std=noise,
        )
        records = simulate_dataset(spec, arch, 50, 10)
        surface = fit_ridge(records)
        results = reconstruct_dataset(records, surface, InverseConfig())
        designed = centered_matrix(records)
        observed = observed_matrix(results)
        report = build_jensen_report(
            "A0", designed, observed, resamples=resamples
        )
        return designed, observed, report

    def test_expansion_detected_from_raw_records(self):
        _, _, report = self._run((1.3,) * 4, 0.05)
        assert report.gap > 0.0
        assert report.ci_low > 0.0

    def test_contraction_invisible_to_composed_fit(self):
        # Training pairs only expose surface-after-deformation, and the basis
        # absorbs diagonal scalings, so this path cannot produce a negative
        # gap; reconstruction noise keeps it at or above zero.  The harness's
        # effective-stress fit exists precisely to cover the contractive side.
        _, _, report = self._run((0.7,) * 4, 0.05)
        assert report.classification != FRAGILE
        assert report.ci_high > 0.0

    def test_gap_positive_despite_flat_marginals(self):
        # The composed fit tracks designed stress closely, so per-dimension
        # spread changes hover near zero here even though the total dispersion
        # gap is positive; the per-dimension growth claim lives on the
        # effective-stress validation path below.
        designed, observed, report = self._run((1.3,) * 4, 0.02)
        assert report.gap > 0.0
        assert np.all(np.abs(std_expansion(designed, observed)) < 0.05)


class TestOracleValidation:
    """The effective-stress validation harness."""

    def test_expansion_full_run(self):
        run = run_oracle_validation(
            SyntheticArchitecture(
                id="A0",
                true_deformation=AxisScaleDeformation((1.3,) * 4),
                noise_std=0.05,
            ),
            resamples=200,
        )
        assert run.oracle > 0.0
        assert run.report.gap > 0.0
        assert run.report.ci_low > 0.0
        assert run.n_converged == run.report.n_samples == 550
        assert run.dispersion_bias == pytest.approx(run.report.gap - run.oracle, abs=1e-15)
        assert abs(run.dispersion_bias) < 0.02
        assert np.all(run.spread_change > 0.0)  # every marginal widens

    def test_contraction_full_run(self):
        run = run_oracle_validation(
            SyntheticArchitecture(
                id="A0",
                true_deformation=AxisScaleDeformation((0.7,) * 4),
                noise_std=0.05,
            ),
            resamples=200,
        )
        assert run.oracle < 0.0
        assert run.report.gap < 0.0
        assert run.report.ci_high < 0.0
        # Reconstruction noise (0.05) can offset the narrowing on the least
        # dispersed dimension, so only the aggregate narrowing is guaranteed.
        assert float(np.sum(run.spread_change)) < 0.0

    def test_identity_classified_resilient(self):
        run = run_oracle_validation(
            SyntheticArchitecture(id="A0", noise_std=0.02), resamples=200
        )
        assert run.oracle == 0.0
        assert run.report.classification == RESILIENT
        assert abs(run.dispersion_bias) < 0.01
