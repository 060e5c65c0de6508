"""pinchflow: curvature algebra, pointwise inequality verification and model
flows for quadratically pinched mean curvature flow in high codimension.

Hot kernels run through a compiled extension when available; a NumPy fallback
is selected automatically at import (see pinchflow.backend).
"""

from .backend import available_backends, get_backend, set_backend
from .curvature import (
    CurvatureData,
    Dims,
    PinchingParams,
    PinchingReport,
    PrincipalDecomposition,
    constants,
    decompose,
    eigenvalues,
    lambda_for,
    normal_curvature,
    pinching_report,
)
from .exactflows import ExactSpec, evolve_exact, exact_state, flow_diagnostics
from .gridflow import GridImmersion, build_torus, classify_type, evolve_grid, geometry
from .ineqlab import SampleSpec, VerificationReport, sample_codazzi, sample_pinched, verify_property
from .reaction import (
    GradientTensor,
    ReactionValues,
    SimonsTensors,
    T_tensor,
    gradient_pair,
    pinch_bound_rhs,
    poincare_identity,
    reaction_zeroth,
    simons_E,
)

__version__ = "0.1.0"
