"""Exponential-tilt (saddle) solving.

For a time-scaled log-strike ``x`` the saddle ``uhat(x)`` is the real tilt
shift such that the mean of the terminal log-return under the
``exp((uhat + 1/2) * X_T)``-reweighted measure equals ``x`` per unit time;
equivalently the unique root of ``cumulant'(uhat + 1/2) = x``.  It is
strictly increasing in ``x`` and bounded by the model's finite-moment
interval.  Closed forms exist for all models except the lognormal-jump
diffusion, which is solved numerically.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import lambertw

from .charfn import (
    BGParams,
    BSParams,
    CGMYParams,
    HestonParams,
    MertonParams,
    ModelSpec,
    VGParams,
    _bg_c,
    _cgmy_c,
    _heston_c,
    _vg_c,
    cumulant_d1,
    cumulant_d2,
    moment_interval,
)
from .errors import ApproximationWarning, ConvergenceError, DomainError, UnsupportedModelError

__all__ = [
    "SaddlePoint",
    "TangencyPoints",
    "uhat_closed",
    "uhat_numeric",
    "uhat_limits",
    "tangency_points",
    "branch_match_x0",
]

_MAX_ITER = 200


@dataclass(frozen=True)
class SaddlePoint:
    """Saddle bundle at one time-scaled log-strike.

    ``omega = u_hat * x + psi_at_saddle`` carries variance units and is the
    convex envelope quantity the smile is built from.
    """

    x: float
    u_hat: float
    psi_at_saddle: float
    omega: float


@dataclass(frozen=True)
class TangencyPoints:
    """Strikes where the variance quantity touches ``|x|/2``.

    ``uhat(x_minus) = -1/2`` and ``uhat(x_plus) = +1/2``.
    """

    x_minus: float
    x_plus: float

    def __post_init__(self):
        if not (self.x_minus < 0.0 < self.x_plus):
            raise ValueError(
                f"tangency points must straddle zero, got ({self.x_minus}, {self.x_plus})"
            )

    def contains(self, x) -> np.ndarray | bool:
        return (np.asarray(x) > self.x_minus) & (np.asarray(x) < self.x_plus)


# ---------------------------------------------------------------------------
# closed forms
# ---------------------------------------------------------------------------

def uhat_closed(model: ModelSpec, x):
    """Closed-form saddle ``uhat(x)``; vectorized over ``x``.

    Exact for the lognormal, stochastic-variance, gamma-time-changed and
    two-sided-gamma models; a small-``Y`` approximation for the
    tempered-stable model (a warning is emitted above ``Y = 0.5``).  The
    lognormal-jump model has no closed form; use :func:`uhat_numeric`.
    """
    xa = np.asarray(x, dtype=float)
    if isinstance(model, BSParams):
        out = xa / model.v
    elif isinstance(model, HestonParams):
        xi, A2, B, _, D, m, _, _ = _heston_c(model)
        s = np.sqrt(1.0 + xi**2 * (xa - m) ** 2 / A2)
        out = (B / A2) * (-xi * D * (xa - m) / s - 1.0)
    elif isinstance(model, VGParams):
        alpha, _, xi, x0, c2 = _vg_c(model)
        sig = model.nu * (xa - x0)
        # (sqrt(1 + c2*sig^2) - 1)/sig rationalized: no 0/0 at the matching strike
        out = -xi / (2.0 * alpha) + c2 * sig / (np.sqrt(1.0 + c2 * sig * sig) + 1.0)
    elif isinstance(model, BGParams):
        out = _bg_uhat(model, xa)
    elif isinstance(model, CGMYParams):
        if model.approx_degraded:
            warnings.warn(
                f"closed-form saddle for Y={model.Y} uses a small-Y expansion; "
                "accuracy degrades above Y=0.5",
                ApproximationWarning,
                stacklevel=2,
            )
        out = _cgmy_uhat(model, xa)
    elif isinstance(model, MertonParams):
        raise UnsupportedModelError(
            "no closed-form saddle for the lognormal-jump model; use uhat_numeric"
        )
    else:
        raise TypeError(f"unknown model type {type(model).__name__}")
    return float(out) if np.ndim(x) == 0 else out


def _bg_uhat(p: BGParams, x):
    """Two-sided-gamma saddle, written so the matching strike is regular.

    The textbook quadratic root has a 0/0 at ``x = -K``; rationalizing the
    square root removes it exactly:
    ``(sqrt(R) - (a+ + a-))/s = (lp+lm)*((lp+lm)*s - 2*(a+ - a-))/(sqrt(R) + a+ + a-)``.
    """
    ap, am = p.alpha_p, p.alpha_m
    lpb, lmb, K = _bg_c(p)
    s = K + x
    lsum = lpb + lmb
    R = 4.0 * ap * am + (lsum * s - (ap - am)) ** 2
    return -(lmb - lpb) / 2.0 + 0.5 * lsum * (lsum * s - 2.0 * (ap - am)) / (
        np.sqrt(R) + ap + am
    )


def _cgmy_uhat(p: CGMYParams, x):
    """Small-Y tempered-stable saddle; branch matching at x = 0."""
    Gb, Mb, gneg, _, _, xi = _cgmy_c(p)
    Y = p.Y
    q = xi ** (Y - 2.0)
    sig = x / (p.C * Y * (Y - 1.0) * gneg * Gb ** (Y - 2.0))
    gi, mi = 1.0 / Gb, 1.0 / Mb
    W = 0.25 * ((gi + mi) * sig - (1.0 - q)) ** 2 + q
    # numerator rationalized so that it vanishes linearly (not by cancellation)
    bracket = 0.25 * (gi + mi) * ((gi + mi) * sig - 2.0 * (1.0 - q)) / (
        np.sqrt(W) + 0.5 * (1.0 + q)
    )
    num_over_sig = 0.5 * (gi - mi) + bracket
    den = (q * gi - mi) + sig * gi * mi
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(sig == 0.0, 0.0, sig * num_over_sig / den)
    return out


def uhat_limits(model: ModelSpec) -> tuple[float, float]:
    """Asymptotic saddle bounds ``(uhat(-inf), uhat(+inf))``.

    Finite bounds signal finite spot-moment explosion orders; the lognormal
    and lognormal-jump models are unbounded.
    """
    if isinstance(model, (BSParams, MertonParams)):
        return (-math.inf, math.inf)
    if isinstance(model, HestonParams):
        _, A2, B, _, D, _, _, _ = _heston_c(model)
        A = math.sqrt(A2)
        return (-B / A2 * (1.0 - A * D), -B / A2 * (1.0 + A * D))
    if isinstance(model, VGParams):
        alpha, _, xi, _, c2 = _vg_c(model)
        c = math.sqrt(c2)
        return (-xi / (2.0 * alpha) - c, -xi / (2.0 * alpha) + c)
    if isinstance(model, BGParams):
        lpb, lmb, _ = _bg_c(model)
        return (-lmb, lpb)
    if isinstance(model, CGMYParams):
        Gb, Mb, *_ = _cgmy_c(model)
        return (-Gb, Mb)
    raise TypeError(f"unknown model type {type(model).__name__}")


def tangency_points(model: ModelSpec) -> TangencyPoints:
    """Strikes where the saddle reaches -1/2 and +1/2.

    Because ``uhat(x)`` inverts ``cumulant'``, the tangency strikes are
    simply ``cumulant'(0)`` and ``cumulant'(1)`` -- exact, no root search.
    """
    return TangencyPoints(
        x_minus=cumulant_d1(model, 0.0), x_plus=cumulant_d1(model, 1.0)
    )


def branch_match_x0(model: ModelSpec) -> float:
    """Strike where the two quadratic-root branches of ``uhat`` coincide."""
    if isinstance(model, HestonParams):
        return _heston_c(model)[5]
    if isinstance(model, VGParams):
        return _vg_c(model)[3]
    if isinstance(model, BGParams):
        return -_bg_c(model)[2]
    if isinstance(model, CGMYParams):
        return 0.0  # the small-Y form absorbs the matching constant
    raise UnsupportedModelError(
        f"no branch-matching strike for {type(model).__name__}"
    )


# ---------------------------------------------------------------------------
# numeric path
# ---------------------------------------------------------------------------

def _merton_guess(p: MertonParams, x: float) -> float:
    """Starting tilt for the lognormal-jump solve.

    Locally linear near the money; product-log asymptote in the wings
    (crossover at the jump-rate scale ``|x| = lam``).
    """
    s2b = p.sigma**2 / p.lam
    if abs(x) <= p.lam or p.delta == 0.0:
        return (x / p.lam + s2b / 2.0 + p.theta - p.alpha) / (s2b + p.delta**2)
    arg = math.exp((p.alpha / p.delta) ** 2) * (x / (p.lam * p.delta)) ** 2
    w = float(np.real(lambertw(arg)))
    return (math.copysign(p.delta * math.sqrt(w), x) - p.alpha) / p.delta**2


def uhat_numeric(model: ModelSpec, x: float, tol: float = 1e-12) -> float:
    """Saddle from root-finding on ``cumulant'(ubar) = x``.

    Works for every model (the only path for the lognormal-jump model) and
    agrees with :func:`uhat_closed` where both exist.  `tol` bounds the
    residual ``|cumulant'(ubar) - x|``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    lo_m, hi_m = moment_interval(model)

    def f(u):
        return cumulant_d1(model, u) - x

    # bracket by expanding from the [0, 1] pivot interval toward the
    # moment boundaries (f(0) = x_minus - x, f(1) = x_plus - x)
    lo, hi = 0.0, 1.0
    flo, fhi = f(lo), f(hi)
    it = 0
    while fhi < 0.0:
        lo, flo = hi, fhi
        hi = hi * 2.0 + 1.0 if math.isinf(hi_m) else hi + 0.5 * (hi_m - hi)
        fhi = f(hi)
        it += 1
        if it > _MAX_ITER:
            raise ConvergenceError(f"failed to bracket the saddle above, x={x}")
    it = 0
    while flo > 0.0:
        hi, fhi = lo, flo
        lo = lo * 2.0 - 1.0 if math.isinf(lo_m) else lo - 0.5 * (lo - lo_m)
        flo = f(lo)
        it += 1
        if it > _MAX_ITER:
            raise ConvergenceError(f"failed to bracket the saddle below, x={x}")
    if not (flo <= 0.0 <= fhi):
        raise DomainError(f"bracketing failed for x={x}")

    # safeguarded Newton: monotone f with positive derivative cumulant''
    u = _merton_guess(model, x) if isinstance(model, MertonParams) else 0.5 * (lo + hi)
    if not (lo < u < hi):
        u = 0.5 * (lo + hi)
    for _ in range(_MAX_ITER):
        fu = f(u)
        if abs(fu) <= tol:
            return u - 0.5
        if fu > 0.0:
            hi = u
        else:
            lo = u
        step = fu / cumulant_d2(model, u)
        u_new = u - step
        if not (lo < u_new < hi):
            u_new = 0.5 * (lo + hi)
        if u_new == u:
            # step underflow: accept if the bracket is exhausted
            if hi - lo <= abs(u) * 1e-16 + 1e-300:
                return u - 0.5
            u_new = 0.5 * (lo + hi)
        u = u_new
    raise ConvergenceError(
        f"saddle iteration exceeded {_MAX_ITER} steps at x={x} "
        f"(residual {f(u):.3e}, tol {tol:.1e})"
    )


def saddle_point(model: ModelSpec, x: float, tol: float = 1e-12) -> SaddlePoint:
    """Full saddle bundle (tilt, exponent value, variance quantity) at ``x``.

    Always exact: models without an exact closed saddle (tempered-stable,
    lognormal-jump) go through the numeric root.
    """
    from .charfn import cumulant  # local to avoid import noise at module top

    if isinstance(model, (CGMYParams, MertonParams)):
        uh = uhat_numeric(model, x, tol)
    else:
        uh = float(uhat_closed(model, x))
    psi_val = -cumulant(model, uh + 0.5)
    return SaddlePoint(x=x, u_hat=uh, psi_at_saddle=psi_val, omega=uh * x + psi_val)
