"""Large-time implied-volatility smiles from characteristic functions.

Evaluate convex variance-quantity smiles through the tilt/saddle condition,
verify them against an exact Fourier pricing oracle, expand them in
near-the-money moments, and calibrate an arbitrage-free two-sided-gamma
parametrization to option chains.
"""

from .charfn import (
    BGParams,
    BSParams,
    CGMYParams,
    HestonParams,
    MertonParams,
    ModelSpec,
    VGParams,
    cumulant,
    cumulant_d1,
    cumulant_d2,
    moment_interval,
    phi,
    psi,
)
from .errors import (
    ApproximationWarning,
    ConvergenceError,
    DegenerateRegressionError,
    DomainError,
    InsufficientDataError,
    NoSolutionError,
    OptimizerFailureError,
    SingularityError,
    SmileError,
    TruncationError,
    UnsupportedModelError,
)
from .saddle import (
    SaddlePoint,
    TangencyPoints,
    branch_match_x0,
    saddle_point,
    tangency_points,
    uhat_closed,
    uhat_limits,
    uhat_numeric,
)
from .smile import (
    SmileSlice,
    TotalVarianceSlice,
    first_order_smile,
    heston_consistency_check,
    heston_smile_closed,
    omega,
    omega_numeric,
    small_time_total_variance,
    smile_slice,
    total_variance,
    variance_from_omega,
    vg_smile_approx,
)
from .moments import (
    MomentExpansion,
    atm_esscher_shift,
    esscher_central_moments,
    lee_wings,
    w_expansion_coeffs,
)
from .pricer import (
    QuadratureConfig,
    convergence_study,
    default_quadrature,
    fft_implied_vols,
    fft_smile,
    implied_vol_bs,
    lewis_call_price,
    lewis_put_price,
)
from .calib import (
    BGISlice,
    CalibrationReport,
    OptionChainSlice,
    OptionQuote,
    bgi_objective,
    calendar_check,
    calibrate_surface,
    implied_density,
    impute_forward,
    load_chain_csv,
)

__version__ = "0.1.0"
