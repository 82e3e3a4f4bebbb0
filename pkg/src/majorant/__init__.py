"""Riesz-potential majorants of sampled fields, with numerical checks of the
supporting inequalities (boxing, coarea, Adams, Lorentz, LP duality)."""

from .capacity import (
    Ball,
    BallCover,
    boundary_measure,
    boxing_check,
    coarea_tv,
    hausdorff_content,
    hausdorff_content_exact,
    superlevel_set,
)
from .construct import (
    DecompositionResult,
    HatSpec,
    decay_check,
    decompose,
    hat_function,
    make_atom,
    set_majorant,
    verify_decomposition,
)
from .errors import (
    ConfigError,
    DomainError,
    FieldFormatError,
    MajorantError,
    SizeError,
    ValidationError,
)
from .fields import (
    BinaryMask,
    DiscreteMeasure,
    GridSpec,
    Report,
    ScalarField,
    VectorField,
    grid_integral,
    load_field,
    make_test_field,
    save_field,
)
from .lp import CertificationError, LinearProgram, LPSolution, solve_lp
from .maximal import (
    MaximalConfig,
    adams_check,
    bmo_norm,
    fractional_maximal,
    h1_norm,
    lorentz_norm,
)
from .spectral import SpectralConfig, gradient, half_laplacian, riesz_constant, riesz_potential
from .symbols import (
    DualityConfig,
    OperatorSymbol,
    apply_symbol,
    dual_value,
    duality_gap_check,
    embedding_ratio,
    is_cancelling,
    is_elliptic,
    load_symbol,
    primal_value,
)

__version__ = "0.1.0"
