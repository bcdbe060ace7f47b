"""stressgap: stress-response modeling and Jensen-gap analysis for stressed evaluations.

The pipeline has five stages, one module each:

- :mod:`stressgap.stress_domain` — the 4-D stress space, designed-stress sampling,
  and the JSONL dataset schema.
- :mod:`stressgap.response_model` — 17-term polynomial response surfaces fitted by
  ridge regression, one output per judge signal.
- :mod:`stressgap.inverse_reconstruction` — bounded inverse recovery of the observed
  effective stress behind each signal vector.
- :mod:`stressgap.deformation_jensen` — dispersion statistics, the designed-vs-observed
  Jensen gap with bootstrap confidence intervals, and regime classification.
- :mod:`stressgap.synthetic_harness` — ground-truth generators that make every stage
  verifiable without any external evaluation service.

:mod:`stressgap.cli_report` wires the stages into the ``stressgap`` command line tool.
"""

__version__ = "0.1.0"

from .stress_domain import (
    CenteredStress,
    JudgeSignals,
    SampleRecord,
    StressDistributionSpec,
    StressVector,
    build_designed_dataset,
    center,
    ingest_records,
    sample_designed_stress,
    uncenter,
    write_records,
)
from .response_model import (
    BASIS_NAMES,
    FitDiagnostics,
    ResponseSurface,
    build_features,
    diagnostics,
    feature_jacobian,
    fit_ridge,
    predict,
)
from .inverse_reconstruction import (
    AnchoredPrior,
    DistributionalPrior,
    InverseConfig,
    ReconstructionResult,
    inverse_gradient,
    inverse_objective,
    reconstruct_dataset,
    reconstruct_sample,
)
from .deformation_jensen import (
    ConvexPotential,
    DeformationMap,
    JensenReport,
    bootstrap_gap_ci,
    classify,
    dispersion,
    fit_deformation,
    jensen_gap,
    quality_drop,
    std_expansion,
)
from .synthetic_harness import (
    AffineDeformation,
    AxisScaleDeformation,
    IdentityDeformation,
    PolynomialDeformation,
    SyntheticArchitecture,
    default_true_surface,
    oracle_gap,
    simulate_dataset,
    simulate_signals,
)

__all__ = [
    "__version__",
    "AffineDeformation",
    "AnchoredPrior",
    "AxisScaleDeformation",
    "BASIS_NAMES",
    "CenteredStress",
    "ConvexPotential",
    "DeformationMap",
    "DistributionalPrior",
    "FitDiagnostics",
    "IdentityDeformation",
    "InverseConfig",
    "JensenReport",
    "JudgeSignals",
    "PolynomialDeformation",
    "ReconstructionResult",
    "ResponseSurface",
    "SampleRecord",
    "StressDistributionSpec",
    "StressVector",
    "SyntheticArchitecture",
    "bootstrap_gap_ci",
    "build_designed_dataset",
    "build_features",
    "center",
    "classify",
    "diagnostics",
    "dispersion",
    "feature_jacobian",
    "fit_deformation",
    "fit_ridge",
    "ingest_records",
    "inverse_gradient",
    "inverse_objective",
    "jensen_gap",
    "oracle_gap",
    "predict",
    "quality_drop",
    "reconstruct_dataset",
    "reconstruct_sample",
    "sample_designed_stress",
    "simulate_dataset",
    "simulate_signals",
    "std_expansion",
    "uncenter",
    "write_records",
]
