import numpy as np
import pytest

from levysmile import (
    BGParams,
    BSParams,
    CGMYParams,
    HestonParams,
    MertonParams,
    OptionChainSlice,
    OptionQuote,
    VGParams,
)


def synthetic_chain_slice(
    truth,
    T: float,
    n_quotes: int = 25,
    half_spread: float = 0.005,
    z_span: float = 3.0,
    vol_scale: float = 0.17,
    forward: float = 100.0,
    from_fft: bool = True,
) -> OptionChainSlice:
    """One expiry of quotes priced from the exact Fourier oracle (or from
    the large-time parametrization itself when ``from_fft`` is False)."""
    from levysmile import pricer, smile

    z = np.linspace(-z_span, z_span, n_quotes)
    k = z * vol_scale * np.sqrt(T)
    if from_fft:
        vols = pricer.fft_implied_vols(truth, T, k)
    else:
        vols = np.sqrt(np.asarray(smile.total_variance(truth, k, T)) / T)
    quotes = tuple(
        OptionQuote(float(np.exp(kk) * forward), float(v - half_spread), float(v + half_spread))
        for kk, v in zip(k, vols)
    )
    return OptionChainSlice(expiry_T=T, forward=forward, discount=1.0, quotes=quotes)


@pytest.fixture
def bs_typical():
    return BSParams(v=0.04)


@pytest.fixture
def heston_typical():
    return HestonParams(v_bar=0.04, lam=1.0, eta=0.1, rho=-0.7)


@pytest.fixture
def vg_typical():
    return VGParams(sigma=0.12, theta=-0.14, nu=0.17)


@pytest.fixture
def bg_typical():
    return BGParams(10.0, 0.6, 35.0, 5.0)


@pytest.fixture
def cgmy_typical():
    return CGMYParams(20.0, 80.0, 120.0, 0.25)


@pytest.fixture
def merton_typical():
    return MertonParams(sigma=0.1, lam=0.1, alpha=-0.4, delta=0.4)


@pytest.fixture
def all_models(bs_typical, heston_typical, vg_typical, bg_typical, cgmy_typical, merton_typical):
    return [bs_typical, heston_typical, vg_typical, bg_typical, cgmy_typical, merton_typical]


def draw_model(name: str, rng: np.random.Generator):
    """One random parameter set respecting the construction invariants."""
    if name == "bs":
        return BSParams(v=float(rng.uniform(0.002, 0.5)))
    if name == "heston":
        v_bar = float(rng.uniform(0.01, 0.2))
        lam = float(rng.uniform(0.3, 3.0))
        eta = float(rng.uniform(0.1, 0.95)) * np.sqrt(2.0 * lam * v_bar)
        rho = float(rng.uniform(-0.9, -0.05))
        return HestonParams(v_bar=v_bar, lam=lam, eta=float(eta), rho=rho)
    if name == "vg":
        sigma = float(rng.uniform(0.05, 0.4))
        theta = float(rng.uniform(-0.5, 0.2))
        nu = float(rng.uniform(0.05, 1.0))
        cap = theta + 0.5 * sigma**2
        if cap > 0 and cap * nu >= 0.9:
            nu = 0.9 / cap
        return VGParams(sigma=sigma, theta=theta, nu=float(nu))
    if name == "bg":
        return BGParams(
            float(rng.uniform(0.1, 20.0)),
            float(rng.uniform(0.1, 20.0)),
            float(rng.uniform(1.5, 60.0)),
            float(rng.uniform(0.7, 30.0)),
        )
    if name == "cgmy":
        return CGMYParams(
            float(rng.uniform(0.5, 30.0)),
            float(rng.uniform(2.0, 100.0)),
            float(rng.uniform(2.5, 150.0)),
            float(rng.uniform(0.05, 0.45)),
        )
    if name == "merton":
        return MertonParams(
            sigma=float(rng.uniform(0.05, 0.4)),
            lam=float(rng.uniform(0.05, 2.0)),
            alpha=float(rng.uniform(-0.5, 0.3)),
            delta=float(rng.uniform(0.0, 0.5)),
        )
    raise ValueError(name)
