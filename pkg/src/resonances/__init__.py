"""Resonances of 2x2 self-adjoint operator matrices.

Numerical library for computing resonances as eigenvalues of effective
non-self-adjoint operators obtained by solving a nonlinear fixed-point
equation on analytically continued contours, together with verified
factorization, moment, residue, and basis identities.
"""

from .contour import (
    Contour,
    ContourScan,
    Flat,
    Rectangle,
    Semicircle,
    SolvabilityCertificate,
    build_contour,
    double_order,
    mirrored,
    scan_contours,
    separation_distance,
    solvability_certificate,
    variation,
)
from .errors import (
    ClusteringError,
    ContractionViolationError,
    DomainError,
    GeometryError,
    GuardBandError,
    IdentityFailureError,
    InadmissibleCertificateError,
    InconsistencyError,
    NonconvergenceError,
    PairingError,
    ResolventSingularityError,
    ResonanceError,
    StructuralModelError,
    UnsupportedModelError,
)
from .friedrichs import (
    BoundStates,
    FriedrichsParams,
    bound_states,
    friedrichs_model,
    no_spectrum_outside,
    params_from_model,
    resonance_root,
    self_energy_closed,
    symmetric_angle_root,
    transfer_closed,
)
from .model import (
    CouplingFunction,
    DecaySpec,
    DiscretePoint,
    Interval,
    SpectralModel,
    ValidationReport,
    coupling_density,
    model_dumps,
    model_from_json_dict,
    model_loads,
    model_to_json_dict,
    spectral_norm,
    validate_model,
)
from .solver import (
    Solution,
    adjoint_equation_residual,
    adjoint_self_energy_of_operator,
    contour_independence,
    refine_fixed_point,
    self_energy_of_operator,
    solve_fixed_point,
    solve_mirror_pair,
)
from .spectral import (
    Circle,
    Factorization,
    GramResult,
    MomentResult,
    OverlapOperator,
    ProjectionReport,
    ResidueResult,
    SpectralDecomposition,
    contour_moment,
    eigen_decompose,
    enclosure_circles,
    factorize,
    left_factor_inverse_bound,
    overlap_operator,
    residue_at,
    riesz_gram,
    self_energy_derivative,
    spectral_decomposition_of,
    transfer_residue,
    verify_projection_equations,
)
from .transfer import (
    TransferEvaluation,
    adjoint_symmetry_residual,
    locate,
    self_energy,
    transfer,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
