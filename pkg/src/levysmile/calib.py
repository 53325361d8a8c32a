"""Option-chain ingestion, bilateral-gamma-inspired calibration, arbitrage checks.

The parametrization being fitted ("BGI") is the total-variance curve of the
two-sided gamma model evaluated at finite maturity,
``w(k, T): w/8 + k^2/(2w) = omega_BG(k/T) * T``, with the four jump
parameters free per expiry.  Slices calibrate sequentially from the
shortest expiry; each later slice is restricted to
``T*alpha_pm`` nondecreasing and ``lambda_pm`` nonincreasing, which keeps
the fitted surface free of calendar arbitrage by construction (verified
numerically, not assumed).

A continuous surface between the fitted expiries is deliberately out of
scope.  The recipe, should you need one: interpolate ``T*alpha_pm(T)``
monotonically nondecreasing and ``lambda_pm(T)`` monotonically
nonincreasing (e.g. monotone cubics on those transformed quantities) and
evaluate ``w(k, T)`` from the interpolated parameters; the term-structure
constraints then hold at every intermediate maturity.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np
import pandas as pd
from scipy.optimize import minimize

from .charfn import BGParams
from .errors import (
    DegenerateRegressionError,
    DomainError,
    InsufficientDataError,
    NoSolutionError,
)
from .pricer import implied_vol_bs
from .smile import total_variance

__all__ = [
    "OptionQuote",
    "OptionChainSlice",
    "BGISlice",
    "CalibrationReport",
    "ImputedForward",
    "impute_forward",
    "bgi_total_variance",
    "bgi_vols",
    "bgi_objective",
    "calibrate_slice",
    "calibrate_surface",
    "implied_density",
    "butterfly_min_density",
    "calendar_check",
    "load_chain_csv",
    "report_to_dict",
    "write_report_json",
    "PARAM_UPPER_BOUND",
]

PARAM_UPPER_BOUND = 1000.0
_PENALTY = 1e10
_DENSITY_STEP = 1e-4  # centered-difference step for w' and w''
MIN_QUOTES_PER_SLICE = 5


# ---------------------------------------------------------------------------
# chain data types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OptionQuote:
    strike: float
    bid_vol: float
    ask_vol: float

    def __post_init__(self):
        if self.strike <= 0:
            raise ValueError(f"strike must be positive, got {self.strike}")
        if not (0 < self.bid_vol <= self.ask_vol):
            raise ValueError(
                f"need 0 < bid_vol <= ask_vol, got ({self.bid_vol}, {self.ask_vol})"
            )

    @property
    def mid_vol(self) -> float:
        return 0.5 * (self.bid_vol + self.ask_vol)


@dataclass(frozen=True)
class OptionChainSlice:
    """One expiry's quotes in volatility form, sorted by strike."""

    expiry_T: float
    forward: float
    discount: float
    quotes: tuple[OptionQuote, ...]

    def __post_init__(self):
        if self.expiry_T <= 0 or self.forward <= 0:
            raise ValueError("expiry_T and forward must be positive")
        if not (0.0 < self.discount <= 1.0):
            raise ValueError(f"discount must lie in (0, 1], got {self.discount}")
        strikes = [q.strike for q in self.quotes]
        if any(b >= a for b, a in zip(strikes, strikes[1:])):
            raise ValueError("strikes must be strictly increasing")
        object.__setattr__(self, "quotes", tuple(self.quotes))

    @property
    def log_strikes(self) -> np.ndarray:
        return np.log(np.array([q.strike for q in self.quotes]) / self.forward)

    @property
    def bid(self) -> np.ndarray:
        return np.array([q.bid_vol for q in self.quotes])

    @property
    def ask(self) -> np.ndarray:
        return np.array([q.ask_vol for q in self.quotes])


@dataclass(frozen=True)
class BGISlice:
    T: float
    params: BGParams
    residual: float
    converged: bool
    bound_active: bool


@dataclass(frozen=True)
class CalibrationReport:
    slices: tuple[BGISlice, ...]
    butterfly_ok: tuple[bool, ...]
    calendar_ok: tuple[bool, ...]
    min_density: float
    min_w_gap: float

    @property
    def all_butterfly_ok(self) -> bool:
        return all(self.butterfly_ok)

    @property
    def all_calendar_ok(self) -> bool:
        return all(self.calendar_ok) if self.calendar_ok else True


# ---------------------------------------------------------------------------
# forward imputation
# ---------------------------------------------------------------------------

class ImputedForward(NamedTuple):
    forward: float
    discount: float
    rms: float


def impute_forward(
    calls: Sequence[tuple[float, float, float]],
    puts: Sequence[tuple[float, float, float]],
) -> ImputedForward:
    """Forward and discount factor from parity across matched strikes.

    Regresses ``C_mid - P_mid = DF*F - DF*K`` over strikes quoted on both
    sides; needs at least three distinct strikes.  Returns the root-mean-
    square parity residual alongside the estimates.
    """
    put_by_strike = {k: (b, a) for k, b, a in puts}
    rows = [
        (k, 0.5 * (cb + ca) - 0.5 * sum(put_by_strike[k]))
        for k, cb, ca in calls
        if k in put_by_strike
    ]
    if len(rows) < 3:
        raise InsufficientDataError(
            f"need >= 3 strikes with both call and put quotes, got {len(rows)}"
        )
    K = np.array([r[0] for r in rows])
    y = np.array([r[1] for r in rows])
    if np.ptp(K) < 1e-12 * max(1.0, float(np.max(np.abs(K)))):
        raise DegenerateRegressionError("strikes are collinear (all equal)")
    A = np.column_stack([np.ones_like(K), K])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    intercept, slope = float(coef[0]), float(coef[1])
    df = -slope
    if not (0.0 < df <= 1.1):
        raise DegenerateRegressionError(
            f"implied discount factor {df:.6g} outside (0, 1.1]"
        )
    forward = intercept / df
    if forward <= 0:
        raise DegenerateRegressionError(f"implied forward {forward:.6g} not positive")
    rms = float(np.sqrt(np.mean((A @ coef - y) ** 2)))
    return ImputedForward(forward=forward, discount=df, rms=rms)


# ---------------------------------------------------------------------------
# BGI evaluation and objective
# ---------------------------------------------------------------------------

def bgi_total_variance(params: BGParams, k, T: float):
    return total_variance(params, k, T)


def bgi_vols(params: BGParams, k, T: float) -> np.ndarray:
    return np.sqrt(np.asarray(bgi_total_variance(params, k, T)) / T)


def vega_weight(k, w) -> np.ndarray:
    """Lognormal vega (spot and maturity factors omitted): ``exp(-d1^2/2)``."""
    sq = np.sqrt(np.asarray(w, dtype=float))
    d1 = -np.asarray(k, dtype=float) / sq + sq / 2.0
    return np.exp(-0.5 * d1 * d1)


def bgi_objective(params: BGParams, chain_slice: OptionChainSlice) -> float:
    """Vega-weighted squared distance of model vols to both quote sides.

    ``sum w0 * ((sig - bid)^2 + (ask - sig)^2)``; equals the irreducible
    ``sum w0 * spread^2/2`` exactly when the model hits every mid.  Numeric
    failures inside the smile evaluation map to a large penalty so bounded
    searches can proceed.
    """
    k = chain_slice.log_strikes
    bid, ask = chain_slice.bid, chain_slice.ask
    mid = 0.5 * (bid + ask)
    w0 = vega_weight(k, mid**2 * chain_slice.expiry_T)
    try:
        sig = bgi_vols(params, k, chain_slice.expiry_T)
    except (DomainError, FloatingPointError):
        return _PENALTY
    if not np.all(np.isfinite(sig)):
        return _PENALTY
    return float(np.sum(w0 * ((sig - bid) ** 2 + (ask - sig) ** 2)))


_DEFAULT_BOUNDS = (
    (1e-6, PARAM_UPPER_BOUND),
    (1e-6, PARAM_UPPER_BOUND),
    (1.0 + 1e-6, PARAM_UPPER_BOUND),
    (1e-6, PARAM_UPPER_BOUND),
)


def _objective_vec(theta: np.ndarray, chain_slice: OptionChainSlice) -> float:
    try:
        params = BGParams(*theta)
    except ValueError:
        return _PENALTY
    return bgi_objective(params, chain_slice)


def calibrate_slice(
    chain_slice: OptionChainSlice,
    guess: BGParams,
    bounds: Sequence[tuple[float, float]] = _DEFAULT_BOUNDS,
    rng: np.random.Generator | None = None,
    n_starts: int = 3,
) -> BGISlice:
    """Fit one expiry with a bounded simplex search and jittered restarts.

    The best of ``n_starts`` local searches is kept; a parameter is flagged
    bound-active when it lands within 1e-6 (relative) of either bound.
    """
    if len(chain_slice.quotes) < MIN_QUOTES_PER_SLICE:
        raise InsufficientDataError(
            f"slice T={chain_slice.expiry_T} has {len(chain_slice.quotes)} quotes; "
            f"need >= {MIN_QUOTES_PER_SLICE}"
        )
    rng = rng or np.random.default_rng(0)
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])
    g0 = np.clip(
        [guess.alpha_p, guess.alpha_m, guess.lambda_p, guess.lambda_m], lo, hi
    )
    starts = [g0]
    for _ in range(n_starts - 1):
        jitter = np.exp(rng.normal(0.0, 0.10, size=4))
        starts.append(np.clip(g0 * jitter, lo, hi))
    best = None
    any_success = False
    for s in starts:
        res = minimize(
            _objective_vec,
            s,
            args=(chain_slice,),
            method="Nelder-Mead",
            bounds=list(zip(lo, hi)),
            options={"xatol": 1e-9, "fatol": 1e-14, "maxiter": 4000, "maxfev": 8000},
        )
        any_success = any_success or bool(res.success)
        if best is None or res.fun < best.fun:
            best = res
    x = np.clip(best.x, lo, hi)
    active = bool(
        np.any(
            (x - lo <= 1e-6 * np.maximum(1.0, np.abs(lo)))
            | (hi - x <= 1e-6 * np.maximum(1.0, np.abs(hi)))
        )
    )
    return BGISlice(
        T=chain_slice.expiry_T,
        params=BGParams(*x),
        residual=float(best.fun),
        converged=bool(any_success and math.isfinite(best.fun) and best.fun < _PENALTY),
        bound_active=active,
    )


def calibrate_surface(
    chain: Sequence[OptionChainSlice],
    guess: BGParams,
    bounds: Sequence[tuple[float, float]] | None = None,
    seed: int = 0,
    k_density: tuple[float, float, float] = (-1.0, 1.0, 1e-3),
    k_calendar: tuple[float, float, float] = (-1.5, 1.5, 1e-3),
) -> CalibrationReport:
    """Sequential per-expiry calibration under term-structure constraints.

    Expiries are fitted shortest first.  After slice ``i`` the next slice's
    search domain shrinks to ``alpha >= T_i*alpha_i/T_{i+1}`` and
    ``lambda <= lambda_i``, so ``T*alpha`` is nondecreasing and ``lambda``
    nonincreasing across the fitted surface.  A slice that fails to
    converge is recorded as such and the constraints keep referencing the
    last converged slice.  Butterfly and calendar checks run on the result.
    """
    ordered = sorted(chain, key=lambda s: s.expiry_T)
    if any(a.expiry_T == b.expiry_T for a, b in zip(ordered, ordered[1:])):
        raise DomainError("duplicate expiries in chain")
    rng = np.random.default_rng(seed)
    slices: list[BGISlice] = []
    prev: BGISlice | None = None
    base = bounds or _DEFAULT_BOUNDS
    for cs in ordered:
        if prev is None:
            slice_bounds = base
        else:
            p, T_prev, T_new = prev.params, prev.T, cs.expiry_T
            slice_bounds = (
                (max(base[0][0], T_prev * p.alpha_p / T_new), base[0][1]),
                (max(base[1][0], T_prev * p.alpha_m / T_new), base[1][1]),
                (base[2][0], min(base[2][1], p.lambda_p)),
                (base[3][0], min(base[3][1], p.lambda_m)),
            )
        fitted = calibrate_slice(cs, guess, slice_bounds, rng)
        slices.append(fitted)
        if fitted.converged:
            prev = fitted
            guess = fitted.params

    butterfly_ok = []
    min_density = math.inf
    lo, hi, step = k_density
    k_dens = np.arange(lo, hi + step / 2, step)
    for s in slices:
        dens = implied_density(lambda k, s=s: bgi_total_variance(s.params, k, s.T), k_dens)
        dmin = float(np.min(dens))
        butterfly_ok.append(dmin >= 0.0)
        min_density = min(min_density, dmin)

    ok_pairs, min_gap = calendar_check(
        [(s.T, s.params) for s in slices], k_grid=np.arange(*_grid3(k_calendar))
    )
    return CalibrationReport(
        slices=tuple(slices),
        butterfly_ok=tuple(butterfly_ok),
        calendar_ok=tuple(ok_pairs),
        min_density=min_density,
        min_w_gap=min_gap,
    )


def _grid3(spec3: tuple[float, float, float]):
    lo, hi, step = spec3
    return lo, hi + step / 2, step


# ---------------------------------------------------------------------------
# arbitrage checks
# ---------------------------------------------------------------------------

def implied_density(w_fn: Callable, k) -> np.ndarray:
    """Terminal log-return density implied by a total-variance curve.

    ``p(k) = g(k) * exp(-(k + w/2)^2 / (2w)) / sqrt(2*pi*w)`` with the
    standard curvature factor ``g``.  Negative values are returned as-is --
    they are the butterfly-arbitrage signal, not an error.  Derivatives are
    centered differences with step 1e-4.
    """
    ka = np.asarray(k, dtype=float)
    h = _DENSITY_STEP
    w = np.asarray(w_fn(ka), dtype=float)
    w_up = np.asarray(w_fn(ka + h), dtype=float)
    w_dn = np.asarray(w_fn(ka - h), dtype=float)
    wp = (w_up - w_dn) / (2.0 * h)
    wpp = (w_up - 2.0 * w + w_dn) / (h * h)
    g = (1.0 - ka * wp / (2.0 * w)) ** 2 - 0.25 * wp * wp * (1.0 / w + 0.25) + 0.5 * wpp
    dens = g * np.exp(-((ka + w / 2.0) ** 2) / (2.0 * w)) / np.sqrt(2.0 * math.pi * w)
    return dens if np.ndim(k) else float(dens)


def butterfly_min_density(w_fn: Callable, k_grid) -> float:
    return float(np.min(implied_density(w_fn, np.asarray(k_grid, dtype=float))))


def wing_calendar_diagnostic(surface, x: float) -> list[float]:
    """Slope of ``x * log omega(x, T)`` in maturity across adjacent slices.

    A wing-growth bookkeeping quantity: when calendar arbitrage is absent
    its value in the far wings should not fall below one.  It is a
    necessary-style diagnostic only -- a constant-parameter surface (which
    is calendar-clean) scores zero -- so nothing here enforces it.
    """
    if isinstance(surface, CalibrationReport):
        pairs = [(s.T, s.params) for s in surface.slices]
    else:
        pairs = list(surface)
    from .smile import omega as _omega

    out = []
    for (t1, p1), (t2, p2) in zip(pairs, pairs[1:]):
        w1 = math.log(float(_omega(p1, x)))
        w2 = math.log(float(_omega(p2, x)))
        out.append(x * (w2 - w1) / (t2 - t1))
    return out


def calendar_check(surface, k_grid=None) -> tuple[list[bool], float]:
    """Monotonicity of total variance in maturity at fixed log-strike.

    ``surface`` is a :class:`CalibrationReport` or a sequence of
    ``(T, BGParams)`` pairs.  Returns per-adjacent-pair flags and the
    minimum gap ``min_k (w_{i+1}(k) - w_i(k))`` over all pairs
    (``+inf`` when fewer than two slices).  A pair passes when the gap is
    no more negative than -1e-10.
    """
    if isinstance(surface, CalibrationReport):
        pairs = [(s.T, s.params) for s in surface.slices]
    else:
        pairs = list(surface)
    if k_grid is None:
        k_grid = np.arange(-1.5, 1.5 + 5e-4, 1e-3)
    k = np.asarray(k_grid, dtype=float)
    flags: list[bool] = []
    min_gap = math.inf
    for (t1, p1), (t2, p2) in zip(pairs, pairs[1:]):
        gap = np.asarray(bgi_total_variance(p2, k, t2)) - np.asarray(
            bgi_total_variance(p1, k, t1)
        )
        g = float(np.min(gap))
        flags.append(g >= -1e-10)
        min_gap = min(min_gap, g)
    return flags, min_gap


# ---------------------------------------------------------------------------
# chain CSV input / report JSON output
# ---------------------------------------------------------------------------

_VOL_COLS = {"Expiry", "Forward", "Strike", "BidVol", "AskVol"}
_PX_COLS = {"Expiry", "Type", "Strike", "BidPx", "AskPx"}


def load_chain_csv(path) -> list[OptionChainSlice]:
    """Read a chain in volatility or price form and return slices by expiry.

    Volatility form carries the forward per row; price form triggers
    parity-based forward/discount imputation per expiry, and bid/ask vols
    are implied from the prices (puts converted through parity).  Quotes
    whose price sits at or below intrinsic are dropped with a warning.
    """
    df = pd.read_csv(path)
    cols = set(df.columns)
    if _VOL_COLS.issubset(cols):
        return _slices_from_vol_frame(df)
    if _PX_COLS.issubset(cols):
        return _slices_from_price_frame(df)
    raise InsufficientDataError(
        f"unrecognized chain header {sorted(cols)}; expected "
        f"{sorted(_VOL_COLS)} or {sorted(_PX_COLS)}"
    )


def _slices_from_vol_frame(df: pd.DataFrame) -> list[OptionChainSlice]:
    slices = []
    for T, grp in df.groupby("Expiry", sort=True):
        fwd = grp["Forward"].iloc[0]
        if not np.allclose(grp["Forward"], fwd):
            raise DomainError(f"inconsistent forwards within expiry {T}")
        grp = grp.sort_values("Strike")
        quotes = tuple(
            OptionQuote(float(r.Strike), float(r.BidVol), float(r.AskVol))
            for r in grp.itertuples()
        )
        slices.append(
            OptionChainSlice(
                expiry_T=float(T), forward=float(fwd), discount=1.0, quotes=quotes
            )
        )
    return slices


def _slices_from_price_frame(df: pd.DataFrame) -> list[OptionChainSlice]:
    slices = []
    for T, grp in df.groupby("Expiry", sort=True):
        calls = [
            (float(r.Strike), float(r.BidPx), float(r.AskPx))
            for r in grp[grp["Type"] == "C"].itertuples()
        ]
        puts = [
            (float(r.Strike), float(r.BidPx), float(r.AskPx))
            for r in grp[grp["Type"] == "P"].itertuples()
        ]
        fwd, disc, _ = impute_forward(calls, puts)
        quotes = []
        for strike, bid_px, ask_px, is_call in sorted(
            [(s, b, a, True) for s, b, a in calls] + [(s, b, a, False) for s, b, a in puts]
        ):
            # quote the out-of-the-money side only, like listed-market vols
            if is_call != (strike >= fwd):
                continue
            k = math.log(strike / fwd)
            try:
                bv = _vol_from_price(bid_px, k, float(T), fwd, disc, is_call)
                av = _vol_from_price(ask_px, k, float(T), fwd, disc, is_call)
            except NoSolutionError:
                warnings.warn(
                    f"dropping strike {strike} at T={T}: price outside "
                    "arbitrage bounds (stale quote?)",
                    stacklevel=2,
                )
                continue
            quotes.append(OptionQuote(strike, bv, av))
        slices.append(
            OptionChainSlice(
                expiry_T=float(T), forward=fwd, discount=disc, quotes=tuple(quotes)
            )
        )
    return slices


def _vol_from_price(px, k, T, fwd, disc, is_call) -> float:
    c_norm = px / (disc * fwd)
    if not is_call:
        c_norm += 1.0 - math.exp(k)  # parity, normalized by forward
    return implied_vol_bs(c_norm, k, T)


def report_to_dict(report: CalibrationReport) -> dict:
    def _num(x):
        return x if math.isfinite(x) else None

    return {
        "slices": [
            {
                "T": s.T,
                "alpha_p": s.params.alpha_p,
                "alpha_m": s.params.alpha_m,
                "lambda_p": s.params.lambda_p,
                "lambda_m": s.params.lambda_m,
                "residual": s.residual,
                "converged": s.converged,
                "bound_active": s.bound_active,
            }
            for s in report.slices
        ],
        "butterfly_ok": report.all_butterfly_ok,
        "calendar_ok": report.all_calendar_ok,
        "min_density": _num(report.min_density),
        "min_w_gap": _num(report.min_w_gap),
    }


def write_report_json(report: CalibrationReport, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report_to_dict(report), fh, indent=2)
        fh.write("\n")
