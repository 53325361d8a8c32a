"""Model parameter sets, characteristic exponents and cumulants.

Every model describes the terminal log-return ``X_T = log(S_T/S_0)`` of a
martingale spot under zero rates.  Three closely related objects are exposed:

* ``phi(model, u, T)``   -- the characteristic function ``E[exp(i*u*X_T)]``
  at finite ``T`` (exact for every model, including the mean-reverting
  stochastic-volatility model);
* ``psi(model, u)``      -- the per-unit-time exponent of the half-shifted
  characteristic function, ``phi_T(u - i/2) ~ exp(-psi(u)*T)`` for large
  ``T`` (exact at all ``T`` for the pure-jump/Levy models);
* ``cumulant(model, ubar)`` -- the per-unit-time cumulant generating
  function ``log E[exp(ubar*X_T)] / T`` on the real tilt axis, together
  with analytic derivatives up to fourth order.

``psi`` and ``cumulant`` are two views of the same function,
``psi(u) = -cumulant(1/2 + i*u)``, and the martingale property pins
``cumulant(0) = cumulant(1) = 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Union

import numpy as np

from .errors import DomainError

__all__ = [
    "BSParams",
    "HestonParams",
    "VGParams",
    "BGParams",
    "CGMYParams",
    "MertonParams",
    "ModelSpec",
    "psi",
    "phi",
    "cumulant",
    "cumulant_d1",
    "cumulant_d2",
    "cumulant_d3",
    "cumulant_d4",
    "moment_interval",
    "gamma_negative",
]


# ---------------------------------------------------------------------------
# parameter sets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BSParams:
    """Lognormal diffusion with annualized variance ``v = sigma**2``."""

    v: float

    def __post_init__(self):
        if not self.v > 0:
            raise ValueError(f"variance must be positive, got {self.v}")


@dataclass(frozen=True)
class HestonParams:
    """Mean-reverting stochastic-variance diffusion.

    ``v_bar`` is the long-run variance level, ``lam`` the mean-reversion
    rate, ``eta`` the volatility of variance and ``rho`` the spot/variance
    correlation, restricted to the negative regime where the closed-form
    large-time smile below is valid.

    ``v0`` is the variance at inception, used only by the finite-maturity
    characteristic function (the large-time smile does not depend on it).
    When omitted it defaults to ``v_bar / 2``: starting exactly at the
    long-run level makes the leading 1/T term of the at-the-money
    implied-vol convergence nearly cancel for typical parameters, which
    hides the relaxation the finite-T pricer is meant to exhibit.
    """

    v_bar: float
    lam: float
    eta: float
    rho: float
    v0: float | None = None

    def __post_init__(self):
        if min(self.v_bar, self.lam, self.eta) <= 0:
            raise ValueError("v_bar, lam and eta must be positive")
        # rho = -1 makes eta^2*(1-rho^2) vanish and every closed smile
        # constant divides by it; perfect correlation is excluded
        if not (-1.0 < self.rho < 0.0):
            raise ValueError(f"rho must lie in (-1, 0), got {self.rho}")
        if 2.0 * self.lam * self.v_bar < self.eta**2:
            raise ValueError(
                "Feller condition violated: need 2*lam*v_bar >= eta^2"
            )
        if self.v0 is not None and self.v0 <= 0:
            raise ValueError("v0 must be positive when given")

    @property
    def initial_variance(self) -> float:
        return self.v0 if self.v0 is not None else 0.5 * self.v_bar


@dataclass(frozen=True)
class VGParams:
    """Gamma-time-changed Brownian motion (pure jump).

    ``sigma`` is the subordinated volatility, ``theta`` the drift of the
    subordinated motion (negative for equity-like left skew), ``nu`` the
    variance rate of the gamma clock.
    """

    sigma: float
    theta: float
    nu: float

    def __post_init__(self):
        if self.sigma <= 0 or self.nu <= 0:
            raise ValueError("sigma and nu must be positive")
        if (self.theta + 0.5 * self.sigma**2) * self.nu >= 1.0:
            raise ValueError(
                "need (theta + sigma^2/2)*nu < 1 for the martingale "
                "compensator to exist"
            )


@dataclass(frozen=True)
class BGParams:
    """Two-sided gamma jump process.

    ``alpha_p``/``alpha_m`` are the up/down jump-arrival intensities and
    ``lambda_p``/``lambda_m`` the inverse scales of the up/down jump sizes.
    ``lambda_p > 1`` keeps ``E[S_T]`` finite.
    """

    alpha_p: float
    alpha_m: float
    lambda_p: float
    lambda_m: float

    def __post_init__(self):
        if min(self.alpha_p, self.alpha_m, self.lambda_p, self.lambda_m) <= 0:
            raise ValueError("all four parameters must be strictly positive")
        if self.lambda_p <= 1.0:
            raise ValueError(
                f"lambda_p must exceed 1 (martingale moment), got {self.lambda_p}"
            )


@dataclass(frozen=True)
class CGMYParams:
    """Tempered-stable jump process with activity exponent ``Y`` in (0, 1).

    Closed-form smile quantities for this model rely on a small-``Y``
    expansion; quality degrades above ``Y ~ 0.5`` (see ``approx_degraded``).
    """

    C: float
    G: float
    M: float
    Y: float

    def __post_init__(self):
        if self.C <= 0 or self.G <= 0:
            raise ValueError("C and G must be positive")
        if self.M <= 1.0:
            raise ValueError(f"M must exceed 1 (martingale moment), got {self.M}")
        if not (0.0 < self.Y < 1.0):
            raise ValueError(f"Y must lie in (0, 1), got {self.Y}")

    @property
    def approx_degraded(self) -> bool:
        return self.Y > 0.5


@dataclass(frozen=True)
class MertonParams:
    """Diffusion with lognormal jumps.

    ``sigma`` is the diffusive volatility, ``lam`` the jump intensity,
    ``alpha``/``delta`` the mean and standard deviation of log jump sizes.
    The martingale compensator ``theta = exp(alpha + delta^2/2) - 1`` is
    computed once at construction.
    """

    sigma: float
    lam: float
    alpha: float
    delta: float
    theta: float = field(init=False, compare=False)

    def __post_init__(self):
        if self.sigma <= 0 or self.lam <= 0:
            raise ValueError("sigma and lam must be positive")
        if self.delta < 0:
            raise ValueError("delta must be nonnegative")
        object.__setattr__(
            self, "theta", math.exp(self.alpha + 0.5 * self.delta**2) - 1.0
        )


ModelSpec = Union[BSParams, HestonParams, VGParams, BGParams, CGMYParams, MertonParams]


# ---------------------------------------------------------------------------
# derived constants (cached on the frozen, hashable parameter sets)
# ---------------------------------------------------------------------------

def gamma_negative(y: float) -> float:
    """Gamma(-y) for y in (0, 1) via the reflection formula.

    Library gamma implementations differ in how they treat negative
    arguments; the reflection through positive-argument log-gamma is
    deterministic and pole-free on (0, 1).
    """
    if not (0.0 < y < 1.0):
        raise ValueError(f"reflection form only valid on (0,1), got {y}")
    return -math.pi / (math.sin(math.pi * y) * math.exp(math.lgamma(1.0 + y)))


@lru_cache(maxsize=256)
def _heston_c(p: HestonParams):
    eta, lam, rho = p.eta, p.lam, p.rho
    xi = eta**2 / (lam * p.v_bar)
    A2 = eta**2 * (1.0 - rho**2)
    B = rho * eta * (lam - rho * eta / 2.0)
    C2 = (lam - rho * eta / 2.0) ** 2 + eta**2 / 4.0
    D = math.sqrt(1.0 / A2 + C2 / B**2)
    m = -rho * eta / xi
    a = rho * eta / lam
    K = math.sqrt(1.0 + (a * A2 / (4.0 * B)) / (1.0 - a / 2.0))
    return xi, A2, B, C2, D, m, a, K


@lru_cache(maxsize=256)
def _vg_c(p: VGParams):
    alpha = p.sigma**2 * p.nu / 2.0
    beta = 1.0 - p.theta * p.nu / 2.0 - p.sigma**2 * p.nu / 8.0
    xi = (p.theta + p.sigma**2 / 2.0) * p.nu
    x0 = math.log(1.0 - xi) / p.nu
    c2 = (xi / (2.0 * alpha)) ** 2 + beta / alpha  # squared asymptotic tilt span
    return alpha, beta, xi, x0, c2


@lru_cache(maxsize=256)
def _bg_c(p: BGParams):
    lpb = p.lambda_p - 0.5
    lmb = p.lambda_m + 0.5
    K = p.alpha_p * math.log(p.lambda_p / (p.lambda_p - 1.0)) + p.alpha_m * math.log(
        p.lambda_m / (p.lambda_m + 1.0)
    )
    return lpb, lmb, K


@lru_cache(maxsize=256)
def _cgmy_c(p: CGMYParams):
    Gb = p.G + 0.5
    Mb = p.M - 0.5
    gneg = gamma_negative(p.Y)
    K = ((p.M - 1.0) ** p.Y - p.M**p.Y + (p.G + 1.0) ** p.Y - p.G**p.Y) / p.Y
    Kbar = (Mb**p.Y + Gb**p.Y - p.M**p.Y - p.G**p.Y - K * p.Y / 2.0) / (
        p.Y * (p.Y - 1.0) * Gb**p.Y
    )
    xi = Mb / Gb
    return Gb, Mb, gneg, K, Kbar, xi


# ---------------------------------------------------------------------------
# complex cumulant generating function, per unit time
# ---------------------------------------------------------------------------

def _cgf(model: ModelSpec, z):
    """``log E[exp(z*X_T)] / T`` for complex tilt ``z`` (vectorized).

    For the mean-reverting variance model this is the large-time limit;
    for the others it is exact at every ``T``.
    """
    if isinstance(model, BSParams):
        return 0.5 * model.v * (z * z - z)
    if isinstance(model, HestonParams):
        lam, eta, rho = model.lam, model.eta, model.rho
        f = (lam - rho * eta * z) ** 2 - eta**2 * (z * z - z)
        return (lam * model.v_bar / eta**2) * (lam - rho * eta * z - np.sqrt(f))
    if isinstance(model, VGParams):
        nu, th, s2 = model.nu, model.theta, model.sigma**2
        xi = (th + s2 / 2.0) * nu
        return (z * np.log(1.0 - xi) - np.log(1.0 - th * nu * z - 0.5 * s2 * nu * z * z)) / nu
    if isinstance(model, BGParams):
        ap, am, lp, lm = model.alpha_p, model.alpha_m, model.lambda_p, model.lambda_m
        # compensator evaluated through the same log as the z-terms so the
        # martingale cumulant(1) = 0 cancels exactly in floating point
        one = np.asarray(z).dtype.type(1.0)
        K = ap * np.log(lp / (lp - one)) + am * np.log(lm / (lm + one))
        return ap * np.log(lp / (lp - z)) + am * np.log(lm / (lm + z)) - z * K
    if isinstance(model, CGMYParams):
        C, G, M, Y = model.C, model.G, model.M, model.Y
        _, _, gneg, _, _, _ = _cgmy_c(model)
        one = np.asarray(z).dtype.type(1.0)
        zero = np.asarray(z).dtype.type(0.0)
        mY = (M - zero) ** Y
        gY = (G + zero) ** Y
        kY = (M - one) ** Y - mY + (G + one) ** Y - gY
        return C * gneg * ((M - z) ** Y - mY + (G + z) ** Y - gY - z * kY)
    if isinstance(model, MertonParams):
        s2, lam, al, de = model.sigma**2, model.lam, model.alpha, model.delta
        return 0.5 * s2 * (z * z - z) + lam * (
            np.exp(al * z + 0.5 * de**2 * z * z) - 1.0 - z * model.theta
        )
    raise TypeError(f"unknown model type {type(model).__name__}")


def moment_interval(model: ModelSpec) -> tuple[float, float]:
    """Open interval of real tilts ``ubar`` with ``E[exp(ubar*X_T)]`` finite.

    Always contains ``[0, 1]`` under the parameter invariants.  For the
    mean-reverting variance model the interval refers to the large-time
    moment boundaries.
    """
    if isinstance(model, (BSParams, MertonParams)):
        return (-math.inf, math.inf)
    if isinstance(model, HestonParams):
        # roots of (lam - rho*eta*u)^2 - eta^2*(u^2 - u), concave in u
        lam, eta, rho = model.lam, model.eta, model.rho
        a = (rho**2 - 1.0) * eta**2
        b = eta * (eta - 2.0 * lam * rho)
        c = lam**2
        disc = math.sqrt(b * b - 4.0 * a * c)
        r1 = (-b + disc) / (2.0 * a)
        r2 = (-b - disc) / (2.0 * a)
        return (min(r1, r2), max(r1, r2))
    if isinstance(model, VGParams):
        # roots of 1 - theta*nu*u - sigma^2*nu*u^2/2
        s2n = model.sigma**2 * model.nu
        tn = model.theta * model.nu
        disc = math.sqrt(tn * tn + 2.0 * s2n)
        return ((-tn - disc) / s2n, (-tn + disc) / s2n)
    if isinstance(model, BGParams):
        return (-model.lambda_m, model.lambda_p)
    if isinstance(model, CGMYParams):
        return (-model.G, model.M)
    raise TypeError(f"unknown model type {type(model).__name__}")


def _require_tilt(model: ModelSpec, re_tilt) -> None:
    lo, hi = moment_interval(model)
    bad = (np.asarray(re_tilt) <= lo) | (np.asarray(re_tilt) >= hi)
    if np.any(bad):
        raise DomainError(
            f"tilt real part {re_tilt} outside the finite-moment interval "
            f"({lo:.6g}, {hi:.6g}) of {type(model).__name__}"
        )


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------

def psi(model: ModelSpec, u) -> complex:
    """Exponent of the half-shifted characteristic function.

    Defined by ``phi_T(u - i/2) ~ exp(-psi(u)*T)``; evaluating the complex
    cumulant at tilt ``1/2 + i*u``.  Raises :class:`DomainError` when the
    tilt leaves the finite-moment strip (a request for a nonexistent
    moment).
    """
    z = 0.5 + 1j * np.asarray(u)
    _require_tilt(model, np.real(z))
    out = -_cgf(model, z)
    return complex(out) if np.ndim(u) == 0 else out


def phi(model: ModelSpec, u, T: float):
    """Characteristic function ``E[exp(i*u*X_T)]`` at maturity ``T``.

    Exact for every model.  ``u`` may be complex (e.g. ``u - i/2`` for
    pricing contours) as long as the implied tilt stays in the
    finite-moment strip.
    """
    if T <= 0:
        raise DomainError(f"T must be positive, got {T}")
    z = 1j * np.asarray(u)
    re = np.real(z)
    if np.any(np.asarray(re) != 0.0):
        _require_tilt_phi(model, re)
    if isinstance(model, HestonParams):
        out = _heston_phi(model, np.asarray(u, dtype=complex), T)
    else:
        out = np.exp(T * _cgf(model, z))
    return complex(out) if np.ndim(u) == 0 else out


def _require_tilt_phi(model, re_tilt) -> None:
    # phi's tilt may sit anywhere in the closed interval's interior plus 0
    lo, hi = moment_interval(model)
    bad = (np.asarray(re_tilt) < lo) | (np.asarray(re_tilt) > hi)
    if np.any(bad):
        raise DomainError(
            f"Im(u) places the tilt outside ({lo:.6g}, {hi:.6g}) "
            f"for {type(model).__name__}"
        )


def _heston_phi(p: HestonParams, u, T: float):
    """Exact finite-T characteristic function of the variance diffusion.

    Uses the branch convention with ``g = r_minus / r_plus``, which keeps
    the complex log on its principal sheet for all maturities and makes
    ``phi_T(-i) = 1`` hold identically.
    """
    lam, eta, rho = p.lam, p.eta, p.rho
    alpha = -0.5 * u * u - 0.5j * u
    beta = lam - rho * eta * 1j * u
    gamma = 0.5 * eta**2
    d = np.sqrt(beta * beta - 4.0 * alpha * gamma)
    r_minus = (beta - d) / (2.0 * gamma)
    r_plus = (beta + d) / (2.0 * gamma)
    g = r_minus / r_plus
    edt = np.exp(-d * T)
    C = lam * (r_minus * T - (2.0 / eta**2) * np.log((1.0 - g * edt) / (1.0 - g)))
    D = r_minus * (1.0 - edt) / (1.0 - g * edt)
    return np.exp(C * p.v_bar + D * p.initial_variance)


def cumulant(model: ModelSpec, ubar) -> float:
    """Per-unit-time log of the exponential moment at real tilt ``ubar``.

    Vanishes at 0 (normalization) and at 1 (martingale) and is strictly
    convex in between.
    """
    _require_tilt(model, ubar)
    out = np.real(_cgf(model, np.asarray(ubar, dtype=float) + 0j))
    return float(out) if np.ndim(ubar) == 0 else out


def _heston_f(p: HestonParams, u):
    lam, eta, rho = p.lam, p.eta, p.rho
    f = (lam - rho * eta * u) ** 2 - eta**2 * (u * u - u)
    fp = -2.0 * rho * eta * (lam - rho * eta * u) - eta**2 * (2.0 * u - 1.0)
    fpp = 2.0 * eta**2 * (rho**2 - 1.0)
    return f, fp, fpp


def cumulant_d1(model: ModelSpec, ubar):
    """First derivative of :func:`cumulant` (tilted mean of ``X_T`` per unit time)."""
    _require_tilt(model, ubar)
    u = np.asarray(ubar, dtype=float)
    if isinstance(model, BSParams):
        out = model.v * (u - 0.5)
    elif isinstance(model, HestonParams):
        f, fp, _ = _heston_f(model, u)
        out = (model.lam * model.v_bar / model.eta**2) * (
            -model.rho * model.eta - fp / (2.0 * np.sqrt(f))
        )
    elif isinstance(model, VGParams):
        nu, th, s2 = model.nu, model.theta, model.sigma**2
        xi = (th + s2 / 2.0) * nu
        Q = 1.0 - th * nu * u - 0.5 * s2 * nu * u * u
        out = math.log(1.0 - xi) / nu + (th + s2 * u) / Q
    elif isinstance(model, BGParams):
        _, _, K = _bg_c(model)
        out = model.alpha_p / (model.lambda_p - u) - model.alpha_m / (model.lambda_m + u) - K
    elif isinstance(model, CGMYParams):
        _, _, gneg, K, _, _ = _cgmy_c(model)
        Y = model.Y
        out = model.C * Y * gneg * (
            (model.G + u) ** (Y - 1.0) - (model.M - u) ** (Y - 1.0) - K
        )
    elif isinstance(model, MertonParams):
        g = model.alpha + model.delta**2 * u
        E = np.exp(model.alpha * u + 0.5 * model.delta**2 * u * u)
        out = model.sigma**2 * (u - 0.5) + model.lam * (E * g - model.theta)
    else:
        raise TypeError(f"unknown model type {type(model).__name__}")
    return float(out) if np.ndim(ubar) == 0 else out


def cumulant_d2(model: ModelSpec, ubar):
    """Second derivative of :func:`cumulant` (tilted variance; always positive)."""
    _require_tilt(model, ubar)
    u = np.asarray(ubar, dtype=float)
    if isinstance(model, BSParams):
        out = model.v * np.ones_like(u)
    elif isinstance(model, HestonParams):
        f, fp, fpp = _heston_f(model, u)
        d = np.sqrt(f)
        out = (model.lam * model.v_bar / model.eta**2) * (
            -fpp / (2.0 * d) + fp * fp / (4.0 * d**3)
        )
    elif isinstance(model, VGParams):
        nu, th, s2 = model.nu, model.theta, model.sigma**2
        Q = 1.0 - th * nu * u - 0.5 * s2 * nu * u * u
        G = th + s2 * u
        out = s2 / Q + nu * G * G / (Q * Q)
    elif isinstance(model, BGParams):
        out = model.alpha_p / (model.lambda_p - u) ** 2 + model.alpha_m / (model.lambda_m + u) ** 2
    elif isinstance(model, CGMYParams):
        _, _, gneg, _, _, _ = _cgmy_c(model)
        Y = model.Y
        out = model.C * Y * (Y - 1.0) * gneg * (
            (model.M - u) ** (Y - 2.0) + (model.G + u) ** (Y - 2.0)
        )
    elif isinstance(model, MertonParams):
        g = model.alpha + model.delta**2 * u
        E = np.exp(model.alpha * u + 0.5 * model.delta**2 * u * u)
        out = model.sigma**2 + model.lam * E * (g * g + model.delta**2)
    else:
        raise TypeError(f"unknown model type {type(model).__name__}")
    return float(out) if np.ndim(ubar) == 0 else out


def cumulant_d3(model: ModelSpec, ubar):
    """Third derivative of :func:`cumulant` (tilted third central moment)."""
    _require_tilt(model, ubar)
    u = np.asarray(ubar, dtype=float)
    if isinstance(model, BSParams):
        out = np.zeros_like(u)
    elif isinstance(model, HestonParams):
        f, fp, fpp = _heston_f(model, u)
        d = np.sqrt(f)
        d3 = -0.75 * fp * fpp / d**3 + 0.375 * fp**3 / d**5
        out = -(model.lam * model.v_bar / model.eta**2) * d3
    elif isinstance(model, VGParams):
        nu, th, s2 = model.nu, model.theta, model.sigma**2
        Q = 1.0 - th * nu * u - 0.5 * s2 * nu * u * u
        G = th + s2 * u
        out = 3.0 * nu * s2 * G / Q**2 + 2.0 * nu**2 * G**3 / Q**3
    elif isinstance(model, BGParams):
        out = 2.0 * model.alpha_p / (model.lambda_p - u) ** 3 - 2.0 * model.alpha_m / (
            model.lambda_m + u
        ) ** 3
    elif isinstance(model, CGMYParams):
        _, _, gneg, _, _, _ = _cgmy_c(model)
        Y = model.Y
        out = model.C * Y * (Y - 1.0) * (Y - 2.0) * gneg * (
            (model.G + u) ** (Y - 3.0) - (model.M - u) ** (Y - 3.0)
        )
    elif isinstance(model, MertonParams):
        g = model.alpha + model.delta**2 * u
        E = np.exp(model.alpha * u + 0.5 * model.delta**2 * u * u)
        out = model.lam * E * (g**3 + 3.0 * g * model.delta**2)
    else:
        raise TypeError(f"unknown model type {type(model).__name__}")
    return float(out) if np.ndim(ubar) == 0 else out


def cumulant_d4(model: ModelSpec, ubar):
    """Fourth derivative of :func:`cumulant` (tilted fourth cumulant)."""
    _require_tilt(model, ubar)
    u = np.asarray(ubar, dtype=float)
    if isinstance(model, BSParams):
        out = np.zeros_like(u)
    elif isinstance(model, HestonParams):
        f, fp, fpp = _heston_f(model, u)
        d = np.sqrt(f)
        d4 = -0.75 * fpp**2 / d**3 + 2.25 * fp**2 * fpp / d**5 - 0.9375 * fp**4 / d**7
        out = -(model.lam * model.v_bar / model.eta**2) * d4
    elif isinstance(model, VGParams):
        nu, th, s2 = model.nu, model.theta, model.sigma**2
        Q = 1.0 - th * nu * u - 0.5 * s2 * nu * u * u
        G = th + s2 * u
        out = 3.0 * nu * s2**2 / Q**2 + 12.0 * nu**2 * s2 * G**2 / Q**3 + 6.0 * nu**3 * G**4 / Q**4
    elif isinstance(model, BGParams):
        out = 6.0 * model.alpha_p / (model.lambda_p - u) ** 4 + 6.0 * model.alpha_m / (
            model.lambda_m + u
        ) ** 4
    elif isinstance(model, CGMYParams):
        _, _, gneg, _, _, _ = _cgmy_c(model)
        Y = model.Y
        out = model.C * Y * (Y - 1.0) * (Y - 2.0) * (Y - 3.0) * gneg * (
            (model.M - u) ** (Y - 4.0) + (model.G + u) ** (Y - 4.0)
        )
    elif isinstance(model, MertonParams):
        g = model.alpha + model.delta**2 * u
        de2 = model.delta**2
        E = np.exp(model.alpha * u + 0.5 * de2 * u * u)
        out = model.lam * E * (g**4 + 6.0 * g**2 * de2 + 3.0 * de2**2)
    else:
        raise TypeError(f"unknown model type {type(model).__name__}")
    return float(out) if np.ndim(ubar) == 0 else out
