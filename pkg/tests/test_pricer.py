"""Fourier pricing oracle, implied-vol inversion, convergence studies."""

import math

import numpy as np
import pytest
from scipy.stats import norm

from levysmile import (
    BSParams,
    DomainError,
    NoSolutionError,
    QuadratureConfig,
    TruncationError,
)
from levysmile.pricer import (
    bs_call_price,
    convergence_study,
    default_quadrature,
    fft_implied_vols,
    fft_smile,
    implied_vol_bs,
    lewis_call_price,
    lewis_put_price,
    write_convergence_csv,
)
from levysmile.smile import smile_slice


def bs_closed(k, sigma, T):
    w = sigma**2 * T
    sq = math.sqrt(w)
    d1 = -k / sq + sq / 2
    return norm.cdf(d1) - math.exp(k) * norm.cdf(d1 - sq)


class TestLewisVsClosedForm:
    @pytest.mark.parametrize("sigma", [0.1, 0.2, 0.5])
    @pytest.mark.parametrize("T", [0.25, 1.0, 4.0])
    def test_lognormal_oracle_agreement(self, sigma, T):
        model = BSParams(v=sigma**2)
        for k in (-1.0, -0.3, 0.0, 0.4, 1.0):
            got = lewis_call_price(model, k, T)
            assert abs(got - bs_closed(k, sigma, T)) < 1e-10

    def test_atm_reference_value(self):
        # sigma=0.2, T=1: 2*Phi(0.1) - 1
        got = lewis_call_price(BSParams(v=0.04), 0.0, 1.0)
        assert got == pytest.approx(0.0797, abs=5e-5)
        assert got == pytest.approx(2 * norm.cdf(0.1) - 1, abs=1e-12)

    def test_deep_otm_vanishes(self, bg_typical):
        # quadrature noise may leave a ~1e-15 negative residue at a
        # true price of essentially zero
        assert -1e-12 < lewis_call_price(bg_typical, 4.0, 1.0) < 1e-5

    def test_price_bounds(self, all_models):
        for m in all_models:
            for k in (-0.5, 0.0, 0.5):
                c = lewis_call_price(m, k, 2.0)
                assert max(0.0, 1.0 - math.exp(k)) < c < 1.0


class TestParity:
    def test_call_put_identity(self, all_models):
        for m in all_models:
            for T in (0.5, 4.0):
                for k in (-0.6, 0.0, 0.45):
                    c = lewis_call_price(m, k, T)
                    p = lewis_put_price(m, k, T)
                    assert abs((c - p) - (1.0 - math.exp(k))) < 1e-10
                    assert p >= -1e-12


class TestImpliedVol:
    def test_round_trip(self):
        price = bs_closed(0.1, 0.2, 2.0)
        assert implied_vol_bs(price, 0.1, 2.0) == pytest.approx(0.2, abs=1e-10)

    def test_round_trip_price_residual(self):
        for k in (-0.8, -0.1, 0.0, 0.3, 1.2):
            for sigma in (0.08, 0.35, 1.2):
                price = bs_closed(k, sigma, 0.7)
                if price - max(0.0, 1.0 - math.exp(k)) < 1e-13:
                    continue  # extrinsic value below double resolution
                vol = implied_vol_bs(price, k, 0.7)
                assert abs(bs_call_price(k, vol**2 * 0.7) - price) < 1e-12

    def test_rejects_prices_outside_bounds(self):
        with pytest.raises(NoSolutionError):
            implied_vol_bs(1.01, 0.0, 1.0)
        with pytest.raises(NoSolutionError):
            implied_vol_bs(0.0, 0.3, 1.0)
        with pytest.raises(NoSolutionError):
            implied_vol_bs(1.0 - math.exp(-0.3) - 1e-12, -0.3, 1.0)

    def test_near_intrinsic_rejected(self):
        # a price one ulp above intrinsic has no resolvable volatility
        intrinsic = 1.0 - math.exp(-0.3)
        with pytest.raises(NoSolutionError):
            implied_vol_bs(intrinsic + 1e-15, -0.3, 1.0)


class TestFft:
    def test_grid_contains_atm_exactly(self, bg_typical):
        k, prices = fft_smile(bg_typical, 2.0)
        n = k.size
        assert k[n // 2] == 0.0

    def test_matches_direct_quadrature(self, bg_typical, heston_typical):
        for m in (bg_typical, heston_typical):
            for T in (1.0, 16.0):
                ks = np.array([-0.4, 0.0, 0.3])
                v_fft = fft_implied_vols(m, T, ks)
                v_dir = np.array(
                    [implied_vol_bs(lewis_call_price(m, float(k), T), float(k), T) for k in ks]
                )
                assert np.max(np.abs(v_fft - v_dir)) < 1e-6

    def test_grid_halving_stability(self, bg_typical):
        T = 2.0
        base = default_quadrature(bg_typical, T)
        fine = QuadratureConfig(u_max=base.u_max, n_points=base.n_points * 2)
        k1, p1 = fft_smile(bg_typical, T, base)
        k2, p2 = fft_smile(bg_typical, T, fine)
        # doubling n at fixed u_max keeps dk, widens the span: the coarse
        # grid is an exact index-shifted subset of the fine one
        off = (k2.size - k1.size) // 2
        assert np.max(np.abs(k1 - k2[off : off + k1.size])) < 1e-12
        common = np.abs(k1) < 1.0
        assert np.max(np.abs(p1[common] - p2[off : off + k1.size][common])) < 1e-9

    def test_truncation_error_raised_for_tiny_maturity(self, bg_typical):
        with pytest.raises(TruncationError):
            lewis_call_price(bg_typical, 0.0, 0.01)

    def test_requested_strike_outside_grid(self, bg_typical):
        with pytest.raises(DomainError):
            fft_implied_vols(bg_typical, 1.0, [1e9])


class TestConvergenceStudy:
    def test_heston_atm_errors_decay_like_one_over_t(self, heston_typical):
        rows = convergence_study(heston_typical, [4, 8, 16, 32, 64], [0.0])
        errs = [r.abs_err for r in rows]
        slope = np.polyfit(np.log([4, 8, 16, 32, 64]), np.log(errs), 1)[0]
        assert -1.3 < slope < -0.7
        assert errs[-1] < 1e-2

    def test_vg_atm_errors_monotone(self, vg_typical):
        rows = convergence_study(vg_typical, [4, 8, 16, 32, 64], [0.0])
        errs = [r.abs_err for r in rows]
        assert all(a > b for a, b in zip(errs, errs[1:]))

    def test_heston_wing_strike_converges(self, heston_typical):
        # absolute prices die like exp(-(omega - x/2)*T); T=8 at x=0.3 is
        # still well inside the resolvable window
        rows = convergence_study(heston_typical, [4, 8], [0.3])
        assert rows[1].abs_err < rows[0].abs_err
        assert rows[1].vol_fft == pytest.approx(rows[1].vol_limit, abs=5e-3)

    def test_merton_wing_variance_tends_linear(self, merton_typical):
        # the wing variance is close to linear at the largest maturity
        # where those strikes still carry resolvable prices
        rows = convergence_study(
            merton_typical, [4.0], [0.5, 0.625, 0.75, 0.875, 1.0]
        )
        v = np.array([r.vol_fft**2 for r in rows])
        x = np.array([r.x for r in rows])
        fit = np.polyfit(x, v, 1)
        resid = v - np.polyval(fit, x)
        assert np.max(np.abs(resid)) < 0.02 * np.ptp(v)

    def test_refuses_tiny_maturity(self, vg_typical):
        with pytest.raises(DomainError):
            convergence_study(vg_typical, [0.01], [0.0])

    def test_refuses_empty_inputs(self, vg_typical):
        with pytest.raises(DomainError):
            convergence_study(vg_typical, [], [0.0])

    def test_csv_output(self, tmp_path, bs_typical):
        rows = convergence_study(bs_typical, [1.0], [0.0, 0.1])
        path = tmp_path / "conv.csv"
        write_convergence_csv(rows, path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "model,T,x,vol_fft,vol_limit,abs_err"
        assert len(lines) == 3
        assert lines[1].startswith("bs,1,")


class TestLimitConsistency:
    def test_fft_vol_approaches_saddle_smile(self, bg_typical):
        # x fixed, maturity large: the finite-T vol approaches sqrt(v(x))
        x = 0.05
        lim = math.sqrt(smile_slice(bg_typical, np.array([x])).v[0])
        errs = []
        for T in (8.0, 64.0):
            vol = fft_implied_vols(bg_typical, T, [x * T])[0]
            errs.append(abs(vol - lim))
        assert errs[1] < 0.2 * errs[0]
        assert errs[1] < 2e-3
