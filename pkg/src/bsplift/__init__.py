"""B-spline wavelets on irregular knots through lifting."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    BspliftError,
    ConfigError,
    DataFormatError,
    InfeasibleSparsityError,
    NumericalError,
    RankDeficientError,
    SingularMatrixError,
    UnsupportedStructureError,
)
from .grid import KnotVector, MultilevelGrid, build_multilevel, grid_from_knots  # noqa: E402
from .bspline import BSplineBasis, moments, power_coefficients  # noqa: E402
from .bandmat import BandMatrix, solve_kkt, svd_values  # noqa: E402
from .lifting import (  # noqa: E402
    LiftingScheme,
    LiftingStep,
    design_bspline_scheme,
    factor_refinement_matrix,
)
from .transform import (  # noqa: E402
    CoefficientPyramid,
    DesignMode,
    NondecimatedPyramid,
    WaveletTransform,
    build,
    denoise,
    design_deslauriers_dubuc,
    forward,
    forward_nondecimated,
    inverse,
)
from .finescale import Presmoother, apply_presmoother, build_presmoother  # noqa: E402
from .variance import ProjectionReport, analyze, condition_number, projection_matrix  # noqa: E402
