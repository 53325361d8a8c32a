"""Large-time variance smiles and their finite-maturity parametrization.

The central object is the variance quantity ``omega(x) = uhat(x)*x +
psi_at_saddle(x)``: convex, tangent to ``|x|/2`` at two strikes, and the
implied variance ``v(x)`` solves the quadratic
``v/8 + x^2/(2 v) = omega(x)``.  Total implied variance at a finite
maturity follows from the same quadratic with ``omega(k/T)*T`` on the
right-hand side.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

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
    cumulant,
    cumulant_d2,
)
from .errors import DomainError, SingularityError, UnsupportedModelError
from .saddle import (
    TangencyPoints,
    branch_match_x0,
    tangency_points,
    uhat_closed,
    uhat_limits,
    uhat_numeric,
)

__all__ = [
    "SmileSlice",
    "TotalVarianceSlice",
    "omega",
    "omega_numeric",
    "variance_from_omega",
    "smile_slice",
    "total_variance",
    "total_variance_slice",
    "heston_smile_closed",
    "heston_omega_bar_closed",
    "heston_consistency_check",
    "vg_smile_approx",
    "vg_k_constant",
    "first_order_smile",
    "small_time_total_variance",
    "svi",
    "vgi",
]

# ---------------------------------------------------------------------------
# omega
# ---------------------------------------------------------------------------

def omega(model: ModelSpec, x):
    """Variance quantity ``uhat(x)*x - cumulant(uhat(x)+1/2)``; vectorized.

    Uses each model's closed-form saddle; the lognormal-jump model falls
    back to the numeric saddle point by point.  For the tempered-stable
    model this is the small-Y closed approximation, which keeps its
    documented bias; smile construction (:func:`smile_slice`,
    :func:`total_variance`) uses the exact numeric path for that model
    instead, because the approximation can dip below ``|x|/2`` near the
    tangency strikes.
    """
    xa = np.asarray(x, dtype=float)
    if isinstance(model, BSParams):
        out = model.v / 8.0 + xa * xa / (2.0 * model.v)
    elif isinstance(model, HestonParams):
        xi, A2, B, _, D, m, a, _ = _heston_c(model)
        s = np.sqrt(1.0 + xi**2 * (xa - m) ** 2 / A2)
        out = -(model.lam / xi) * (1.0 - a / 2.0) - (B / A2) * (xa - m) - (B * D / xi) * s
    elif isinstance(model, VGParams):
        out = _vg_omega(model, xa)
    elif isinstance(model, BGParams):
        out = _bg_omega(model, xa)
    elif isinstance(model, CGMYParams):
        out = _cgmy_omega(model, xa)
    elif isinstance(model, MertonParams):
        out = np.asarray([omega_numeric(model, float(t)) for t in np.atleast_1d(xa)])
        out = out.reshape(xa.shape)
    else:
        raise TypeError(f"unknown model type {type(model).__name__}")
    return float(out) if np.ndim(x) == 0 else out


def _vg_omega(p: VGParams, x):
    alpha, _, xi, x0, c2 = _vg_c(p)
    nu = p.nu
    s = x - x0
    root = np.sqrt(1.0 + c2 * nu**2 * s * s)
    # log argument rewritten with (sqrt(1+y)-1) = y/(sqrt(1+y)+1): regular at s=0
    log_arg = 2.0 * alpha * c2 / (root + 1.0)
    return (
        -x0 / 2.0
        - xi / (2.0 * alpha) * s
        + (root - 1.0) / nu
        + np.log(log_arg) / nu
    )


def _bg_omega(p: BGParams, x):
    ap, am = p.alpha_p, p.alpha_m
    lpb, lmb, K = _bg_c(p)
    uh = uhat_closed(p, x)
    s = K + x
    const = (
        K / 2.0
        - ap * math.log(p.lambda_p / lpb)
        - am * math.log(p.lambda_m / lmb)
        - (ap + am) / 2.0
    )
    return (
        const
        - (lmb - lpb) / 2.0 * s
        + np.sqrt(ap * am + ((lpb + lmb) / 2.0 * s - (ap - am) / 2.0) ** 2)
        + ap * np.log(1.0 - uh / lpb)
        + am * np.log(1.0 + uh / lmb)
    )


def _cgmy_omega(p: CGMYParams, x):
    Gb, Mb, gneg, _, Kbar, xi = _cgmy_c(p)
    Y = p.Y
    q = xi ** (Y - 2.0)
    pref = p.C * Y * (Y - 1.0) * gneg * Gb**Y
    sig = np.asarray(x, dtype=float) / (p.C * Y * (Y - 1.0) * gneg * Gb ** (Y - 2.0))
    gi, mi = 1.0 / Gb, 1.0 / Mb
    uh = uhat_closed(p, x)
    svi_part = (
        -(1.0 + q) / 2.0
        + (gi - mi) * sig / 2.0
        + np.sqrt(0.25 * ((gi + mi) * sig - (1.0 - q)) ** 2 + q)
    )
    return pref * (
        -Kbar
        + xi * svi_part
        + np.log(1.0 + uh / Gb)
        + xi**Y * np.log(1.0 - uh / Mb)
    )


def omega_numeric(model: ModelSpec, x: float, tol: float = 1e-12) -> float:
    """Variance quantity through the numeric saddle (exact for every model).

    Validation path for the tempered-stable approximation; identical to
    :func:`omega` for the models whose closed saddle is exact.
    """
    uh = uhat_numeric(model, x, tol)
    return uh * x - cumulant(model, uh + 0.5)


def _omega_exact_vec(model: ModelSpec, x) -> np.ndarray:
    """Exact variance quantity on a grid.

    Closed forms everywhere except the tempered-stable and lognormal-jump
    models, whose exact values come from the numeric saddle.  The
    tempered-stable closed form is only a small-Y approximation and can dip
    below ``|x|/2`` near the tangency strikes, which would break the smile
    construction; the exact path never does.
    """
    xa = np.atleast_1d(np.asarray(x, dtype=float))
    if isinstance(model, (CGMYParams, MertonParams)):
        return np.array([omega_numeric(model, float(t)) for t in xa])
    return np.asarray(omega(model, xa), dtype=float)


# ---------------------------------------------------------------------------
# quadratic solve
# ---------------------------------------------------------------------------

def variance_from_omega(omega_val, x, inside_tangency) -> float | np.ndarray:
    """Implied variance from ``v/8 + x^2/(2v) = omega_val``.

    ``inside_tangency`` picks the root: the larger one between the tangency
    strikes, the smaller one outside, which is the unique combination
    matching a convex positive smile.  Raises :class:`DomainError` when
    ``omega_val`` sits below ``|x|/2`` beyond round-off, which signals a
    non-convex input rather than an edge case.
    """
    om = np.asarray(omega_val, dtype=float)
    xa = np.asarray(x, dtype=float)
    if np.any(om < np.abs(xa) / 2.0 - 1e-12):
        raise DomainError("omega below |x|/2: not a valid variance quantity")
    # anything negative that survived the domain check above is tangency
    # round-off; clamping prevents NaN from the square root
    disc = np.maximum(om * om - xa * xa / 4.0, 0.0)
    sign = np.where(np.asarray(inside_tangency, dtype=bool), 1.0, -1.0)
    out = 4.0 * (om + sign * np.sqrt(disc))
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class SmileSlice:
    """Large-time smile evaluated on a strike grid.

    ``omega_bar`` is the signed root ``+-sqrt(omega^2 - x^2/4)``, negative
    between the tangency strikes, so that ``v = 4*(omega - omega_bar)``
    everywhere.
    """

    x_grid: np.ndarray
    omega: np.ndarray
    omega_bar: np.ndarray
    v: np.ndarray
    x_pm: TangencyPoints
    x0: float


def smile_slice(model: ModelSpec, x_grid) -> SmileSlice:
    """Evaluate ``omega``, the signed root and the variance smile on a grid.

    Tangency strikes are computed once per slice, so the branch indicator
    is consistent across the grid.  Grid evaluation is vectorized (order
    independent, deterministic).
    """
    x = np.sort(np.asarray(x_grid, dtype=float))
    xpm = tangency_points(model)
    om = _omega_exact_vec(model, x)
    inside = xpm.contains(x)
    v = variance_from_omega(om, x, inside)
    om_bar = om - v / 4.0
    try:
        x0 = branch_match_x0(model)
    except UnsupportedModelError:
        # no branch split: use the tilt-zero strike (0 for symmetric models)
        from .charfn import cumulant_d1

        x0 = cumulant_d1(model, 0.5)
    return SmileSlice(x_grid=x, omega=om, omega_bar=om_bar, v=v, x_pm=xpm, x0=x0)


# ---------------------------------------------------------------------------
# closed smiles
# ---------------------------------------------------------------------------

def heston_smile_closed(params: HestonParams, x):
    """Fully explicit large-time variance smile of the stochastic-variance model."""
    xi, A2, B, _, D, m, a, K = _heston_c(params)
    s = np.sqrt(1.0 + xi**2 * (np.asarray(x, dtype=float) - m) ** 2 / A2)
    out = 4.0 * (K - 1.0) * (
        (params.lam / xi) * (1.0 - a / 2.0)
        + (B / A2) * (np.asarray(x, dtype=float) - m)
        - (B * D / (xi * K)) * s
    )
    return float(out) if np.ndim(x) == 0 else out


def heston_omega_bar_closed(params: HestonParams, x):
    """Signed root in the same hyperbola family as ``omega`` (exact)."""
    xi, A2, B, _, D, m, a, K = _heston_c(params)
    xa = np.asarray(x, dtype=float)
    s = np.sqrt(1.0 + xi**2 * (xa - m) ** 2 / A2)
    out = (
        -K * (params.lam / xi) * (1.0 - a / 2.0)
        - K * (B / A2) * (xa - m)
        - (B * D / (xi * K)) * s
    )
    return float(out) if np.ndim(x) == 0 else out


def heston_consistency_check(params: HestonParams) -> dict[str, float]:
    """Both sides of the two overdetermined constant identities.

    The three closed-smile constants solve five equations; the remaining
    two must hold automatically and double-check the closed form.
    """
    xi, A2, B, _, D, m, a, K = _heston_c(params)
    lam = params.lam
    K0 = (lam / xi) * (1.0 - a / 2.0) * K
    K1 = (B / A2) * K
    K2 = (B * D / xi) / K
    return {
        "eq1_lhs": K0**2 + K2**2,
        "eq1_rhs": (lam / xi) ** 2 * (1.0 - a / 2.0) ** 2 + (B * D / xi) ** 2 - m**2 / 4.0,
        "eq2_lhs": K1**2 + K2**2 * xi**2 / A2,
        "eq2_rhs": (B / A2) ** 2 + xi**2 * (B * D / xi) ** 2 / A2 - 0.25,
    }


def vg_k_constant(params: VGParams) -> float:
    """Scale constant of the approximate signed root for the gamma-time model."""
    alpha, _, xi, x0, c2 = _vg_c(params)
    L = math.log(alpha * c2)  # alpha*c2 == alpha*eta^2/nu^2
    r = x0 * params.nu / L
    return (1.0 - 0.5 * (1.0 - alpha / xi) * r) / math.sqrt(1.0 - r)


def vg_smile_approx(params: VGParams, x):
    """Approximate closed variance smile for the gamma-time-changed model.

    Accurate near the branch-matching strike by construction (leading-order
    matching); deviates in the wings.  Wing accuracy is pinned by a
    regression test against the exact quadratic-solve path.
    """
    alpha, _, xi, x0, c2 = _vg_c(params)
    nu = params.nu
    K = vg_k_constant(params)
    xa = np.asarray(x, dtype=float)
    s = xa - x0
    root = np.sqrt(1.0 + c2 * nu**2 * s * s)
    log_term = np.log(2.0 * alpha * c2 / (root + 1.0))
    om_bar = (
        -x0 / (2.0 * K) * (1.0 - alpha / xi)
        - xi / (2.0 * alpha) * K * s
        + (root - 1.0) / (K * nu)
        + log_term / (K * nu)
    )
    out = 4.0 * (_vg_omega(params, xa) - om_bar)
    return float(out) if np.ndim(x) == 0 else out


# ---------------------------------------------------------------------------
# finite maturity
# ---------------------------------------------------------------------------

def total_variance(model: ModelSpec, k, T: float):
    """Total implied variance ``w(k, T)`` solving ``w/8 + k^2/(2w) = omega(k/T)*T``.

    At fixed ``x = k/T`` this is linear in ``T`` and reduces to
    ``v(x) * T``, so large-time smiles and finite-maturity slices share one
    parametrization.
    """
    if T <= 0:
        raise DomainError(f"T must be positive, got {T}")
    ka = np.asarray(k, dtype=float)
    om_T = _omega_exact_vec(model, ka / T).reshape(ka.shape) * T
    xpm = tangency_points(model)
    inside = (ka > xpm.x_minus * T) & (ka < xpm.x_plus * T)
    out = variance_from_omega(om_T, ka, inside)
    return float(out) if np.ndim(k) == 0 else out


@dataclass(frozen=True)
class TotalVarianceSlice:
    """One maturity's total-variance curve on a log-strike grid."""

    T: float
    k_grid: np.ndarray
    w: np.ndarray


def total_variance_slice(model: ModelSpec, k_grid, T: float) -> TotalVarianceSlice:
    k = np.sort(np.asarray(k_grid, dtype=float))
    return TotalVarianceSlice(T=T, k_grid=k, w=np.asarray(total_variance(model, k, T)))


def first_order_smile(model: ModelSpec, x: float, T: float, tol: float = 1e-12) -> float:
    """Variance smile with the leading ``1/T`` correction.

    ``v_T(x) = v(x) + (1/T) * 8 v^2/(4x^2 - v^2) *
    log[ (1/4 - (x/v)^2)/(1/4 - uhat^2) * sqrt(v / kappa''(ubar)) ]``.

    The prefactor has a genuine pole at the tangency strikes (where
    ``v = 2|x|``); a guard band raises :class:`SingularityError` there
    instead of returning an exploded value.
    """
    if T <= 0:
        raise DomainError(f"T must be positive, got {T}")
    xpm = tangency_points(model)
    for xb in (xpm.x_minus, xpm.x_plus):
        if abs(x - xb) < 1e-4 * (1.0 + abs(xb)):
            raise SingularityError(
                f"x={x} lies in the guard band around the tangency strike {xb:.6g}"
            )
    if isinstance(model, (CGMYParams, MertonParams)):
        uh = uhat_numeric(model, x, tol)
        om = uh * x - cumulant(model, uh + 0.5)
    else:
        uh = float(uhat_closed(model, x))
        om = float(omega(model, x))
    v = variance_from_omega(om, x, bool(xpm.contains(x)))
    psi_dd = cumulant_d2(model, uh + 0.5)  # = d^2 psi/du^2 at the saddle
    ratio = (0.25 - (x / v) ** 2) / (0.25 - uh**2)
    correction = (8.0 * v * v / (4.0 * x * x - v * v)) * math.log(
        ratio * math.sqrt(v / psi_dd)
    )
    return v + correction / T


def small_time_total_variance(model: ModelSpec, k: float) -> float:
    """Short-maturity limit of total variance: a tilted V-shape.

    ``w_0(k) = k / (2 * uhat(+-inf))`` with the sign following ``k``; valid
    for the pure-jump models whose variance quantity has linear wings.
    Returns 0 at ``k = 0`` (the limit) by convention.
    """
    if isinstance(model, (BSParams, HestonParams, MertonParams)):
        raise UnsupportedModelError(
            "short-maturity limit requires linear omega wings "
            f"(not available for {type(model).__name__})"
        )
    if k == 0.0:
        return 0.0
    lim_minus, lim_plus = uhat_limits(model)
    slope = lim_plus if k > 0 else lim_minus
    return k / (2.0 * slope)


# ---------------------------------------------------------------------------
# reference parametrization formulas (documentation/plotting only)
# ---------------------------------------------------------------------------

def svi(x, a: float, b: float, rho: float, m: float, sigma: float):
    """Classic five-parameter hyperbola variance parametrization."""
    s = np.asarray(x, dtype=float) - m
    return a + b * (rho * s + np.sqrt(s * s + sigma**2))


def vgi(x, a: float, b: float, rho: float, eta: float, x0: float):
    """Hyperbola-plus-log variance parametrization with five parameters."""
    s = np.asarray(x, dtype=float) - x0
    root = np.sqrt(1.0 + eta**2 * s * s)
    return a + b * (rho * s + (root - 1.0) + np.log((root - 1.0) / (s * s)))
