"""Exact finite-maturity option pricing and implied-volatility inversion.

Prices are normalized by spot (zero rates, zero dividends, forward = spot),
so a call is ``C(k, T) = E[(exp(X_T) - exp(k))^+]`` with ``k`` the
log-strike.  The pricing identity integrates the characteristic function
along the half-shifted contour::

    C(k, T) = 1 - exp(k/2)/pi * Integral_0^inf Re[exp(-i*u*k) * phi_T(u - i/2)]
                                               / (u^2 + 1/4) du

evaluated either by adaptive quadrature (single strikes, oscillatory
weights) or by an FFT sweep over a log-strike grid (smile batches).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.stats import norm

from .charfn import ModelSpec, phi
from .errors import ConvergenceError, DomainError, NoSolutionError, TruncationError
from .moments import atm_esscher_shift
from .charfn import cumulant
from .smile import smile_slice

__all__ = [
    "QuadratureConfig",
    "default_quadrature",
    "bs_call_price",
    "lewis_call_price",
    "lewis_put_price",
    "implied_vol_bs",
    "fft_smile",
    "fft_implied_vols",
    "convergence_study",
    "ConvergenceRow",
    "write_convergence_csv",
    "MIN_STUDY_T",
]

_DECAY_TOL = 1e-10
MIN_STUDY_T = 0.05  # below this, OTM prices drown in numerical noise
_VOL_FLOOR = 1e-6


@dataclass(frozen=True)
class QuadratureConfig:
    """Truncation and resolution of the pricing integral.

    ``u_max`` truncates the contour integral; ``n_points`` (a power of two,
    at least 256) sizes the FFT sweep; ``fft_eta`` overrides the FFT
    frequency spacing (defaults to ``u_max / n_points``).
    """

    u_max: float
    n_points: int = 2**14
    fft_eta: float | None = None

    def __post_init__(self):
        if self.u_max <= 0:
            raise ValueError("u_max must be positive")
        if self.n_points < 256 or self.n_points & (self.n_points - 1):
            raise ValueError("n_points must be a power of two >= 256")
        if self.fft_eta is not None and self.fft_eta <= 0:
            raise ValueError("fft_eta must be positive")

    @property
    def eta(self) -> float:
        return self.fft_eta if self.fft_eta is not None else self.u_max / self.n_points


def default_quadrature(model: ModelSpec, T: float, n_points: int = 2**14) -> QuadratureConfig:
    """Truncation scaled to the model's at-the-money variance: ``200/sqrt(v_ref*T)``."""
    v_ref = 8.0 * (-cumulant(model, atm_esscher_shift(model)))
    return QuadratureConfig(u_max=200.0 / math.sqrt(v_ref * T), n_points=n_points)


def _check_decay(model: ModelSpec, T: float, u_max: float) -> None:
    tail = abs(phi(model, u_max - 0.5j, T)) / (u_max * u_max)
    if not tail < _DECAY_TOL:
        raise TruncationError(
            f"integrand tail {tail:.2e} at u_max={u_max:.4g} exceeds {_DECAY_TOL:.0e}; "
            "increase u_max (short maturities need wider truncation)"
        )


# ---------------------------------------------------------------------------
# reference (lognormal) prices
# ---------------------------------------------------------------------------

def bs_call_price(k: float, w: float) -> float:
    """Normalized lognormal call with total variance ``w`` at log-strike ``k``."""
    if w <= 0.0:
        return max(0.0, 1.0 - math.exp(k))
    sq = math.sqrt(w)
    d1 = -k / sq + sq / 2.0
    return float(norm.cdf(d1) - math.exp(k) * norm.cdf(d1 - sq))


def _bs_vega_w(k: float, w: float) -> float:
    # derivative of the call price in total variance
    sq = math.sqrt(w)
    d1 = -k / sq + sq / 2.0
    return float(norm.pdf(d1) / (2.0 * sq))


# ---------------------------------------------------------------------------
# direct quadrature
# ---------------------------------------------------------------------------

def lewis_call_price(
    model: ModelSpec, k: float, T: float, cfg: QuadratureConfig | None = None
) -> float:
    """Single-strike call price by adaptive quadrature on the half-shifted contour.

    Oscillation in ``exp(-i*u*k)`` is delegated to weighted quadrature
    rules, so moderately far wings and short maturities stay accurate.
    Raises :class:`TruncationError` when the integrand has not decayed at
    ``u_max``.
    """
    if T <= 0:
        raise DomainError(f"T must be positive, got {T}")
    cfg = cfg or default_quadrature(model, T)
    _check_decay(model, T, cfg.u_max)

    def re_part(u):
        return np.real(phi(model, u - 0.5j, T)) / (u * u + 0.25)

    def im_part(u):
        return np.imag(phi(model, u - 0.5j, T)) / (u * u + 0.25)

    if k == 0.0:
        integral, _ = quad(re_part, 0.0, cfg.u_max, limit=1000, epsabs=1e-13, epsrel=1e-11)
    else:
        i_cos, _ = quad(
            re_part, 0.0, cfg.u_max, weight="cos", wvar=k, limit=1000,
            epsabs=1e-13, epsrel=1e-11,
        )
        i_sin, _ = quad(
            im_part, 0.0, cfg.u_max, weight="sin", wvar=k, limit=1000,
            epsabs=1e-13, epsrel=1e-11,
        )
        integral = i_cos + i_sin
    return 1.0 - math.exp(k / 2.0) / math.pi * integral


def lewis_put_price(
    model: ModelSpec, k: float, T: float, cfg: QuadratureConfig | None = None
) -> float:
    """Put price from the call via parity ``C - P = 1 - exp(k)``."""
    return lewis_call_price(model, k, T, cfg) - (1.0 - math.exp(k))


# ---------------------------------------------------------------------------
# implied volatility
# ---------------------------------------------------------------------------

def implied_vol_bs(price: float, k: float, T: float) -> float:
    """Lognormal volatility reproducing ``price`` at log-strike ``k``.

    Bracketed Newton on total variance with a bisection safeguard;
    round-trips to 1e-12 in price.  Prices outside the open arbitrage
    interval ``(max(0, 1 - e^k), 1)`` raise :class:`NoSolutionError`;
    results are floored at vol 1e-6 (prices inside but indistinguishable
    from intrinsic at double precision resolve to the floor).
    """
    if T <= 0:
        raise DomainError(f"T must be positive, got {T}")
    intrinsic = max(0.0, 1.0 - math.exp(k))
    if not (intrinsic < price < 1.0):
        raise NoSolutionError(
            f"price {price} outside arbitrage bounds ({intrinsic:.6g}, 1) at k={k}"
        )
    if price - intrinsic <= 1e-14:
        # inside the bounds but below double-precision resolution of the
        # extrinsic value: any tiny-variance answer would round-trip
        raise NoSolutionError(
            f"price {price} indistinguishable from intrinsic {intrinsic:.6g} at k={k}"
        )

    def f(w):
        return bs_call_price(k, w) - price

    lo, hi = 1e-16, 0.25
    f_hi = f(hi)
    it = 0
    while f_hi < 0.0:
        lo = hi
        hi *= 4.0
        f_hi = f(hi)
        it += 1
        if it > 60:  # pragma: no cover - price < 1 guarantees termination
            raise ConvergenceError("implied variance bracket expansion failed")

    if k == 0.0:
        # exact at-the-money inversion: C = 2*Phi(sqrt(w)/2) - 1
        w = (2.0 * norm.ppf((price + 1.0) / 2.0)) ** 2
        return max(math.sqrt(w / T), _VOL_FLOOR)

    w = 0.5 * (lo + hi)
    for _ in range(200):
        fw = f(w)
        if abs(fw) < 1e-14:
            break
        if fw > 0.0:
            hi = w
        else:
            lo = w
        vega = _bs_vega_w(k, w)
        w_new = w - fw / vega if vega > 1e-300 else 0.5 * (lo + hi)
        if not (lo < w_new < hi):
            w_new = 0.5 * (lo + hi)
        if w_new == w:
            break
        w = w_new
    else:  # pragma: no cover - safeguarded iteration converges
        raise ConvergenceError(f"implied vol did not converge at k={k}")
    return max(math.sqrt(w / T), _VOL_FLOOR)


# ---------------------------------------------------------------------------
# FFT sweep
# ---------------------------------------------------------------------------

def fft_smile(
    model: ModelSpec, T: float, cfg: QuadratureConfig | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Call prices on the FFT log-strike grid ``k_m = (m - N/2) * 2*pi/(N*eta)``.

    Simpson-weighted frequency grid; the log-strike spacing is tied to the
    frequency spacing by the DFT relation, with ``k = 0`` exactly on the
    grid.  Returns ``(k_grid, call_prices)``.
    """
    if T <= 0:
        raise DomainError(f"T must be positive, got {T}")
    cfg = cfg or default_quadrature(model, T)
    n = cfg.n_points
    eta = cfg.eta
    _check_decay(model, T, (n - 1) * eta)
    u = eta * np.arange(n)
    f = phi(model, u - 0.5j, T) / (u * u + 0.25)
    # composite Simpson weights (1,4,2,4,...)/3; the decayed tail forgives
    # the open right end
    w = (3.0 + (-1.0) ** np.arange(1, n + 1)) / 3.0
    w[0] = 1.0 / 3.0
    dk = 2.0 * math.pi / (n * eta)
    b = 0.5 * n * dk
    seq = f * w * np.exp(1j * u * b)
    integral = np.real(np.fft.fft(seq)) * eta
    k = -b + dk * np.arange(n)
    prices = 1.0 - np.exp(k / 2.0) / math.pi * integral
    return k, prices


def fft_implied_vols(
    model: ModelSpec,
    T: float,
    k_targets,
    cfg: QuadratureConfig | None = None,
) -> np.ndarray:
    """Implied vols at arbitrary log-strikes from one FFT sweep.

    Volatilities are computed at the two bracketing grid strikes and
    interpolated linearly; the grid is dense enough (spacing
    ``2*pi/u_max``) that interpolation error is far below quoting noise.
    """
    cfg = cfg or default_quadrature(model, T)
    k_grid, prices = fft_smile(model, T, cfg)
    targets = np.atleast_1d(np.asarray(k_targets, dtype=float))
    if targets.min() < k_grid[1] or targets.max() > k_grid[-2]:
        raise DomainError("requested log-strike outside the FFT grid")
    out = np.empty_like(targets)
    for i, k in enumerate(targets):
        j = int(np.searchsorted(k_grid, k))
        j0, j1 = j - 1, j
        if k_grid[j0] == k:
            out[i] = implied_vol_bs(float(prices[j0]), float(k_grid[j0]), T)
            continue
        v0 = implied_vol_bs(float(prices[j0]), float(k_grid[j0]), T)
        v1 = implied_vol_bs(float(prices[j1]), float(k_grid[j1]), T)
        lam = (k - k_grid[j0]) / (k_grid[j1] - k_grid[j0])
        out[i] = (1.0 - lam) * v0 + lam * v1
    return out


# ---------------------------------------------------------------------------
# convergence studies
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConvergenceRow:
    model: str
    T: float
    x: float
    vol_fft: float
    vol_limit: float
    abs_err: float


def model_label(model: ModelSpec) -> str:
    return type(model).__name__.removesuffix("Params").lower()


def convergence_study(
    model: ModelSpec,
    T_list,
    x_grid,
    cfg: QuadratureConfig | None = None,
) -> list[ConvergenceRow]:
    """Finite-maturity implied vols against the large-time smile.

    For each maturity the smile is swept by FFT at log-strikes ``k = x*T``
    and compared with the closed/semiclosed limit ``sqrt(v(x))``.
    Maturities below 0.05 are refused: out-of-the-money prices there are
    smaller than achievable numerical noise.
    """
    T_arr = sorted(float(t) for t in np.atleast_1d(T_list))
    x_arr = np.sort(np.atleast_1d(np.asarray(x_grid, dtype=float)))
    if len(T_arr) == 0 or x_arr.size == 0:
        raise DomainError("empty maturity list or strike grid")
    if min(T_arr) < MIN_STUDY_T:
        raise DomainError(f"maturities below {MIN_STUDY_T} are not resolvable")
    limit_vols = np.sqrt(smile_slice(model, x_arr).v)
    label = model_label(model)
    rows = []
    for T in T_arr:
        vols = fft_implied_vols(model, T, x_arr * T, cfg)
        for i, x in enumerate(x_arr):
            rows.append(
                ConvergenceRow(
                    model=label,
                    T=T,
                    x=float(x),
                    vol_fft=float(vols[i]),
                    vol_limit=float(limit_vols[i]),
                    abs_err=float(abs(vols[i] - limit_vols[i])),
                )
            )
    return rows


def write_convergence_csv(rows: list[ConvergenceRow], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("model,T,x,vol_fft,vol_limit,abs_err\n")
        for r in rows:
            fh.write(
                f"{r.model},{r.T:.17g},{r.x:.17g},{r.vol_fft:.17g},"
                f"{r.vol_limit:.17g},{r.abs_err:.17g}\n"
            )
