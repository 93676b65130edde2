"""Changes of variables from point tuples to the spheres through them, with
Monte Carlo and finite-difference checks of every Jacobian density."""
from .errors import DegenerateInputError, InvalidInputError, UnsupportedTheoremError
from .geometry import (
    AffineFlat,
    AffineParam,
    AnchoredParam,
    CircumscribedParam,
    LinearParam,
    PivotedCircleParam,
    SphereOnSphereParam,
    SymmetricSphereParam,
    decompose_anchored,
    decompose_circumscribed,
    decompose_on_sphere,
    decompose_pivoted_circle,
    orthocomplement,
    project_onto,
    reconstruct,
    reconstruct_anchored,
    reconstruct_circumscribed,
    reconstruct_on_sphere,
    reconstruct_pivoted_circle,
    simplex_volume,
)
from .measures import (
    ProposalSpec,
    RandomStream,
    grassmannian_measure,
    sample_frame,
    sample_param,
    sample_unit_sphere,
    sphere_surface_area,
)
from .densities import (
    density,
    density_affine_bp,
    density_anchored,
    density_circumscribed,
    density_linear_bp,
    density_on_sphere,
    density_on_sphere_symmetric,
    density_pivoted,
    density_top,
    symmetric_prefactor,
)
from .theorems import TheoremConfig, TheoremId
from .verification import (
    ComparisonVerdict,
    EstimatorReport,
    Integrand,
    IntegrandKind,
    SuiteCase,
    compare,
    default_suite,
    estimate_lhs,
    estimate_rhs,
    fd_jacobian_density,
    run_suite,
)

__version__ = "0.1.0"
