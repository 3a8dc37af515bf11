"""Random-matrix laboratory for orthogonal-conjugation invariance.

The package samples symmetric random-matrix ensembles, estimates
characteristic functions empirically, tests distributional invariance
under orthogonal conjugation, and runs a three-step pipeline that decides
whether an ensemble with independent entries is an affine transform of a
Gaussian orthogonal ensemble.
"""

from goelab.symmetric import (
    OrthogonalMatrix,
    Rot2State,
    SymMatrix,
    conjugate,
    embed2,
    probe_diag,
    probe_offdiag,
    rotate2_closed_form,
    rotate2_derivatives,
    rotation_embed,
    trace_pairing,
)
from goelab.ensembles import (
    EnsembleSpec,
    SampleBatch,
    SeedSpec,
    load_samples_csv,
    sample_affine_goe,
    sample_gaussian_full,
    sample_goe,
    sample_haar_orthogonal,
    sample_symmetrized_haar,
    sample_uniform_sym,
    save_samples_csv,
)
from goelab.cf import (
    ECFEstimate,
    TGrid,
    UnreliableRegionError,
    cf_distance,
    ecf_scalar,
    ecf_trace,
    log_cf_derivative_ratio,
    normal_cf,
    product_form_cf,
    uniform_cf,
)
from goelab.invariance import (
    InvarianceReport,
    default_orthogonal_family,
    default_probes,
    ks_two_sample,
    test_conjugation_invariance,
    test_entry_symmetry,
)
from goelab.characterize import (
    CharacterizationReport,
    CharacterizeConfig,
    Verdict,
    characterize,
)

__version__ = "0.1.0"

__all__ = [
    "SymMatrix",
    "OrthogonalMatrix",
    "Rot2State",
    "trace_pairing",
    "probe_offdiag",
    "probe_diag",
    "embed2",
    "rotation_embed",
    "conjugate",
    "rotate2_closed_form",
    "rotate2_derivatives",
    "SeedSpec",
    "EnsembleSpec",
    "SampleBatch",
    "sample_gaussian_full",
    "sample_goe",
    "sample_affine_goe",
    "sample_haar_orthogonal",
    "sample_uniform_sym",
    "sample_symmetrized_haar",
    "save_samples_csv",
    "load_samples_csv",
    "TGrid",
    "ECFEstimate",
    "UnreliableRegionError",
    "normal_cf",
    "uniform_cf",
    "ecf_scalar",
    "ecf_trace",
    "product_form_cf",
    "cf_distance",
    "log_cf_derivative_ratio",
    "InvarianceReport",
    "default_orthogonal_family",
    "default_probes",
    "ks_two_sample",
    "test_conjugation_invariance",
    "test_entry_symmetry",
    "CharacterizationReport",
    "CharacterizeConfig",
    "Verdict",
    "characterize",
    "__version__",
]
