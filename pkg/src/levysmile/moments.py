"""At-the-money tilt, tilted central moments, smile expansion and wing skews.

The total-variance curve near the money expands in log-strike with
coefficients built from two ingredients: the at-the-money tilt ``ubar0``
(the exponential tilt that centers the terminal log-return) and the
central moments of the log-return under that tilted measure, i.e. the
cumulant derivatives at ``ubar0``.

Reading the expansion backwards is possible but not implemented: fitting a
quartic to quoted total variance near the money and matching coefficients
implies the tilted moments (order 0 gives the exponent level, order 1 the
tilt, order 2 the tilted variance, and so on).  Those are moments under
the tilted measure, not the pricing measure; they approximate pricing
moments only when the log-return density is close to Gaussian, so treat
them as order-of-magnitude reads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.optimize import brentq

from .charfn import (
    ModelSpec,
    cumulant,
    cumulant_d1,
    cumulant_d2,
    cumulant_d3,
    cumulant_d4,
)
from .errors import ConvergenceError, DomainError
from .saddle import uhat_limits

__all__ = [
    "MomentExpansion",
    "atm_esscher_shift",
    "esscher_central_moments",
    "w_expansion_coeffs",
    "lee_wings",
    "wing_skew_from_tilt",
]


@dataclass(frozen=True)
class MomentExpansion:
    """Coefficients of the near-the-money total-variance expansion.

    ``w_coeffs[n]`` multiplies ``k**n`` in ``w(k)`` at unit maturity;
    ``psi0`` is the at-the-money exponent value (so ``w(0) = 8*psi0``),
    ``m2``..``m4`` the tilted central moments per unit time.
    """

    psi0: float
    ubar0: float
    m2: float
    m3: float
    m4: float
    w_coeffs: tuple[float, float, float, float, float]


def atm_esscher_shift(model: ModelSpec) -> float:
    """Tilt ``ubar0`` that zeroes the tilted mean of the log-return.

    Lies strictly inside (0, 1): the cumulant vanishes at both endpoints
    and is convex, so its minimizer is interior.
    """
    try:
        return brentq(
            lambda u: cumulant_d1(model, u), 0.0, 1.0, xtol=1e-15, rtol=8.9e-16
        )
    except (ValueError, RuntimeError) as exc:  # pragma: no cover - defensive
        raise ConvergenceError(f"at-the-money tilt search failed: {exc}") from exc


def esscher_central_moments(model: ModelSpec, ubar: float, n_max: int = 4) -> list[float]:
    """Central moments of the log-return per unit time under the tilt ``ubar``.

    Orders 2 and 3 are the cumulant derivatives themselves; order 4 adds
    the cumulant-to-central conversion ``m4 = kappa'''' + 3*kappa''^2``
    (unit-maturity normalization).
    """
    if n_max not in (2, 3, 4):
        raise DomainError(f"n_max must be 2, 3 or 4, got {n_max}")
    m2 = cumulant_d2(model, ubar)
    out = [m2]
    if n_max >= 3:
        out.append(cumulant_d3(model, ubar))
    if n_max == 4:
        out.append(cumulant_d4(model, ubar) + 3.0 * m2 * m2)
    return out


def w_expansion_coeffs(model: ModelSpec) -> MomentExpansion:
    """Near-the-money expansion of total variance at unit maturity.

    Coefficients through fourth order:

    * order 0: ``8*psi0``
    * order 1: ``-8*(1/2 - ubar0)`` (skew = distance of the tilt from the
      lognormal value 1/2)
    * order 2: ``4*(1/m2 - 1/(8*psi0))``
    * order 3: ``-(4/3)*(m3/m2^3 - (6*ubar0 - 3)/(16*psi0^2))``
    * order 4: ``(1/3)*((3*m2^3 + 3*m3^2 - m2*m4)/m2^5 + 3/(4*psi0^2*m2)
      - 3*(16*ubar0^2 - 16*ubar0 + 5)/(32*psi0^3))``

    The flat lognormal smile makes every coefficient beyond order zero
    vanish identically.
    """
    ubar0 = atm_esscher_shift(model)
    psi0 = -cumulant(model, ubar0)
    m2, m3, m4 = esscher_central_moments(model, ubar0, 4)
    c0 = 8.0 * psi0
    c1 = -8.0 * (0.5 - ubar0)
    c2 = 4.0 * (1.0 / m2 - 1.0 / (8.0 * psi0))
    c3 = -(4.0 / 3.0) * (m3 / m2**3 - (6.0 * ubar0 - 3.0) / (16.0 * psi0**2))
    c4 = (1.0 / 3.0) * (
        (3.0 * m2**3 + 3.0 * m3 * m3 - m2 * m4) / m2**5
        + 3.0 / (4.0 * psi0**2 * m2)
        - 3.0 * (16.0 * ubar0**2 - 16.0 * ubar0 + 5.0) / (32.0 * psi0**3)
    )
    return MomentExpansion(
        psi0=psi0, ubar0=ubar0, m2=m2, m3=m3, m4=m4, w_coeffs=(c0, c1, c2, c3, c4)
    )


def wing_skew_from_tilt(tilt_limit: float) -> float:
    """Asymptotic variance slope from a finite saddle bound.

    Solves ``beta/8 + 1/(2*beta) = |tilt_limit|`` for the root in [0, 2];
    an unbounded tilt gives a flattening wing (``beta = 0``).
    """
    c = abs(tilt_limit)
    if math.isinf(c):
        return 0.0
    if c < 0.5:
        raise DomainError(f"saddle bound {tilt_limit} below 1/2 is impossible")
    # rationalized root of beta^2 - 8*c*beta + 4 = 0 in [0, 2]: the raw
    # form 4c - 2*sqrt(4c^2-1) cancels catastrophically for large c
    return 2.0 / (2.0 * c + math.sqrt(4.0 * c * c - 1.0))


def lee_wings(model: ModelSpec) -> tuple[float, float, float, float]:
    """Wing skews and moment-explosion orders ``(beta_minus, beta_plus, p_tilde, q_tilde)``.

    ``p_tilde = uhat(+inf) - 1/2`` bounds the supremum power of finite
    positive spot moments, ``q_tilde = -uhat(-inf) - 1/2`` the negative
    side; the quadratic link converts them to variance wing slopes in
    [0, 2].
    """
    lim_minus, lim_plus = uhat_limits(model)
    beta_minus = wing_skew_from_tilt(lim_minus)
    beta_plus = wing_skew_from_tilt(lim_plus)
    p_tilde = lim_plus - 0.5 if math.isfinite(lim_plus) else math.inf
    q_tilde = -lim_minus - 0.5 if math.isfinite(lim_minus) else math.inf
    return beta_minus, beta_plus, p_tilde, q_tilde


# ---------------------------------------------------------------------------
# finite-difference helpers (oracles for the analytic derivatives; also used
# by tests to cross-check the closed forms)
# ---------------------------------------------------------------------------

def cumulant_d3_fd(model: ModelSpec, ubar: float, h: float | None = None) -> float:
    """Five-point centered stencil for the third cumulant derivative."""
    h = _fd_step(model, ubar) if h is None else h
    f = lambda t: cumulant(model, t)  # noqa: E731
    return (f(ubar + 2 * h) - 2 * f(ubar + h) + 2 * f(ubar - h) - f(ubar - 2 * h)) / (
        2.0 * h**3
    )


def cumulant_d4_fd(model: ModelSpec, ubar: float, h: float | None = None) -> float:
    """Seven-point centered stencil for the fourth cumulant derivative."""
    h = _fd_step(model, ubar) if h is None else h
    f = lambda t: cumulant(model, t)  # noqa: E731
    return (
        -f(ubar - 3 * h)
        + 12.0 * f(ubar - 2 * h)
        - 39.0 * f(ubar - h)
        + 56.0 * f(ubar)
        - 39.0 * f(ubar + h)
        + 12.0 * f(ubar + 2 * h)
        - f(ubar + 3 * h)
    ) / (6.0 * h**4)


def _fd_step(model: ModelSpec, ubar: float) -> float:
    from .charfn import moment_interval

    lo, hi = moment_interval(model)
    width = hi - lo
    if math.isinf(width):
        return 1e-3 * (1.0 + abs(ubar))
    return 1e-3 * width
