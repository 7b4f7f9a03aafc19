"""Lattice simulation of the 1-D stochastic heat equation driven by
space-time white noise, and non-parametric estimation of the squared
diffusion function from windowed second moments of the discrete operator.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: F401
    InsufficientDomain,
    NonNegativityViolation,
    PointSkipped,
    QuadratureError,
    SimulationDiverged,
    ValidationError,
    WindowUnavailable,
)
from .sigma_models import (  # noqa: F401
    SigmaModel,
    builtin_model,
    custom_model,
    eval_sigma,
    eval_sigma_sq,
    model_from_id,
)
from .lattice_sim import (  # noqa: F401
    ArrayField,
    GridConfig,
    NoiseSpec,
    RollingField,
    SimulationSummary,
    apply_drift,
    em_step,
    simulate_stream,
    solve_deterministic,
)
from .predictor import (  # noqa: F401
    PAPER_EXACT,
    LhCoefficients,
    Sample,
    WindowSpec,
    apply_lh,
    extract_dataset,
    sigma_tilde,
)
from .regression import (  # noqa: F401
    CurveReport,
    RegressionFit,
    curve_report,
    fit,
    l1_error,
    predict,
    prediction_interval,
    shift_demo,
)
from .analysis import (  # noqa: F401
    HeatKernelParams,
    NormalizerQuery,
    RateExponents,
    heat_kernel,
    loglog_slope,
    m_hat_sq,
    m_hat_sq_realspace,
    m_sq_riesz,
    m_sq_riesz_realspace,
    rate_exponents,
    riesz_constant,
)
