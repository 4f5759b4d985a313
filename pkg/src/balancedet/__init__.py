"""Determinant bounds for diagonally balanced symmetric matrices."""

__version__ = "0.1.0"

from .bounds import (
    BoundReport,
    ProofTrace,
    SpectralStats,
    bound_report,
    envelope_f,
    envelope_g,
    gjsw_lower,
    gjsw_upper,
    lemma1_lower,
    proof_chain,
    spectral_stats,
    theorem_bound,
)
from .matcore import (
    BalanceReport,
    SymMatrix,
    classify,
    delta,
    det_ratio,
    determinant,
    unit_diagonal_scale,
)
from .optlow import OptConfig, OptResult, det_gradient, minimize_det, oracle_grid, polytope_project
from .sampling import (
    FeasibleMatrix,
    SampleConfig,
    extremal,
    sample_balanced_general,
    sample_feasible,
    sample_psd,
    sample_signed,
    sinkhorn_symmetric,
)
from .verify import (
    VerifyReport,
    equality_case_probe,
    verify_conjecture,
    verify_lemma,
    verify_signed,
    verify_theorem,
)
