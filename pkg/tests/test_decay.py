"""Regime classification, fits and case envelopes."""
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hartreelab.decay import (CASES, RegimeLabel, TimeSeries, case_for, check_case_bound, classify_regime,
                              fit_log_growth, fit_power_law, regime_table, rescale_small_data,
                              write_regime_csv)
from hartreelab.errors import DomainError
from hartreelab.hartree import HartreeState, ObservableRecord, propagate
from hartreelab.lattice import Field, Grid, free_gaussian_linf, gaussian, weighted_norm_surrogate
from hartreelab.potential import PotentialSpec


def synthetic_record(t, s_sup):
    key = np.concatenate([[0.0], np.cumsum(0.5 * (s_sup[1:] + s_sup[:-1]) * np.diff(t))])
    z = np.zeros_like(t)
    return ObservableRecord(t, z, z, s_sup, key, z, z, z + 1)


class TestClassify:
    # (lambda, gamma, mu) -> expected label with lambda_c = 0.1
    TABLE = [
        ((1.0, 0.5, 0.0), RegimeLabel("exponential")),
        ((1.0, 1.0, 0.0), RegimeLabel("stretched_exp", 1 / 3)),
        ((1.0, 1.25, 0.0), RegimeLabel("stretched_exp", 1 - 2 * 1.25 / 3)),
        ((1.0, 0.8, 2.0), RegimeLabel("polynomial")),
        ((0.01, 0.5, 0.0), RegimeLabel("stretched_exp", 0.5)),
        ((0.01, 1.0, 0.0), RegimeLabel("polynomial")),
        ((0.01, 1.25, 0.0), RegimeLabel("bounded")),
        ((-0.01, 1.2, 0.5), RegimeLabel("bounded")),
        ((-1.0, 0.5, 0.0), RegimeLabel("exponential")),
        ((-1.0, 1.0, 0.0), RegimeLabel("exponential")),
        ((-1.0, 1.2, 0.0), RegimeLabel("exp_power", 1.5)),
        ((-1.0, 1.2, 1.0), RegimeLabel("exponential")),
    ]

    @pytest.mark.parametrize("args,expected", TABLE)
    def test_cells(self, args, expected):
        got = classify_regime(*args, lambda_c=0.1)
        assert got.family == expected.family
        if expected.parameter is not None:
            assert got.parameter == pytest.approx(expected.parameter, rel=1e-12)

    def test_named_examples(self):
        assert str(classify_regime(0.01, 1.0, 0.0, 0.1)) == "polynomial(K)"
        assert classify_regime(1.0, 1.25, 0.0, 0.1).parameter == pytest.approx(1 / 6)
        assert str(classify_regime(0.01, 1.25, 0.0, 0.1)) == "bounded"

    def test_alpha_moves_exp_power(self):
        assert classify_regime(-1.0, 1.2, 0.0, 0.1, alpha=0.9).parameter == pytest.approx(1.2 / 0.9)
        with pytest.raises(DomainError):
            classify_regime(-1.0, 1.2, 0.0, 0.1, alpha=0.5)

    @pytest.mark.parametrize("gamma", [0.0, 1.5, 3.0])
    def test_gamma_out_of_range(self, gamma):
        with pytest.raises(DomainError):
            classify_regime(0.01, gamma, 0.0, 0.1)

    def test_cases(self):
        assert case_for(0.01, 0.5, 0, 0.1) == "2"
        assert case_for(0.01, 1.0, 0, 0.1) == "3.1"
        assert case_for(-1, 1.3, 0, 0.1) == "3.3"
        assert case_for(1, 1.0, 1, 0.1) == "6"

    @settings(max_examples=200, deadline=None)
    @given(st.floats(-5, 5), st.sampled_from([(0.05, 0.95), (1.0, 1.0), (1.05, 1.45)]),
           st.floats(0, 3), st.floats(0.01, 2), st.floats(0, 1))
    def test_total_and_constant_within_cell(self, lam, gamma_range, mu, lambda_c, u):
        lo, hi = gamma_range
        g1, g2 = lo, lo + u * (hi - lo)
        a = classify_regime(lam, g1, mu, lambda_c)
        b = classify_regime(lam, g2, mu, lambda_c)
        assert a.family == b.family
        assert case_for(lam, g1, mu, lambda_c) == case_for(lam, g2, mu, lambda_c)

    def test_regime_csv(self, tmp_path):
        rows = regime_table(1.0)
        assert len(rows) == 4 and all(len(r) == 5 for r in rows)
        text = write_regime_csv(tmp_path / "t.csv", rows).read_text()
        assert "exp_power(1.5) [case 3.3]" in text


class TestFits:
    def test_exact_power_law(self):
        t = np.linspace(0, 20, 201)
        fit = fit_power_law(TimeSeries(t, (1 + t) ** -1.5))
        assert fit.exponent == pytest.approx(1.5, abs=1e-6)
        assert fit.r_squared >= 1 - 1e-10

    def test_constant_series(self):
        t = np.linspace(0, 20, 50)
        fit = fit_power_law((t, np.full_like(t, 0.3)))
        assert abs(fit.exponent) <= 1e-10 and fit.r_squared == 1.0

    def test_free_gaussian_linf(self):
        t = np.linspace(0, 20, 401)
        fit = fit_power_law((t, free_gaussian_linf(1.5, t, 3)), (2, 20))
        assert fit.exponent == pytest.approx(1.5, abs=0.05)

    def test_nonpositive_rejected(self):
        t = np.linspace(0, 1, 10)
        with pytest.raises(DomainError):
            fit_power_law((t, t))

    @settings(max_examples=50, deadline=None)
    @given(st.floats(1e-6, 1e6), st.floats(0.1, 3))
    def test_scaling_invariance(self, scale, p):
        t = np.linspace(0, 10, 40)
        y = (1 + t) ** -p * (1 + 0.1 * np.sin(t))
        a, b = fit_power_law((t, y)), fit_power_law((t, scale * y))
        assert b.exponent == pytest.approx(a.exponent, rel=1e-9, abs=1e-12)
        assert b.amplitude == pytest.approx(scale * a.amplitude, rel=1e-9)

    def test_log_growth_exact(self):
        t = np.linspace(0, 20, 100)
        fit = fit_log_growth((t, 0.37 * np.log1p(t) + 2.0))
        assert fit.exponent == pytest.approx(0.37, abs=1e-8)
        assert fit.amplitude == pytest.approx(2.0, abs=1e-8)

    def test_log_growth_constant(self):
        t = np.linspace(0, 5, 20)
        assert fit_log_growth((t, np.ones_like(t))).exponent == pytest.approx(0.0, abs=1e-12)

    def test_log_growth_rejects_decrease(self):
        t = np.linspace(0, 5, 20)
        with pytest.raises(DomainError):
            fit_log_growth((t, -t))


class TestCaseBounds:
    def test_zero_coupling_trivial(self):
        t = np.linspace(0, 20, 101)
        for case, spec in (("2", PotentialSpec(0.0, 0, 0.5)), ("4", PotentialSpec(0.0, 1, 1.0))):
            rep = check_case_bound(case, synthetic_record(t, np.zeros_like(t)), spec)
            assert rep.constant == 0 and rep.holds

    def test_inconsistent_case(self):
        t = np.linspace(0, 20, 101)
        rec = synthetic_record(t, (1 + t) ** -0.5)
        with pytest.raises(DomainError):
            check_case_bound("4", rec, PotentialSpec(0.01, 0.0, 1.0))
        with pytest.raises(DomainError):
            check_case_bound("3.3", rec, PotentialSpec(-1.0, 0.0, 1.2))
        with pytest.raises(DomainError):
            check_case_bound("2", rec, PotentialSpec(0.5, 0.0, 0.5), lambda_c=0.1)
        with pytest.raises(DomainError):
            check_case_bound("7", rec, PotentialSpec(0.5, 0.0, 0.5))

    def test_envelope_matches_exact_decay(self):
        t = np.linspace(0, 20, 401)
        spec = PotentialSpec(0.01, 0.0, 0.5)
        rep = check_case_bound("2", synthetic_record(t, 0.2 * (1 + t) ** -0.5), spec, window=(2, 20))
        assert rep.constant == pytest.approx(0.2, rel=1e-12)
        assert rep.normalized_range == pytest.approx((1.0, 1.0))
        assert rep.holds and rep.fit.exponent == pytest.approx(0.5, abs=1e-9)

    def test_bounded_integral_case_detects_growth(self):
        t = np.linspace(0, 40, 401)
        spec = PotentialSpec(0.01, 1.0, 1.0)
        good = check_case_bound("4", synthetic_record(t, 0.1 * (1 + t) ** -1.5), spec)
        bad = check_case_bound("4", synthetic_record(t, np.full_like(t, 0.1)), spec)
        assert good.holds and not bad.holds

    def test_coulomb_ceiling(self):
        t = np.linspace(0, 20, 201)
        lam = 0.05
        spec = PotentialSpec(lam, 0.0, 1.0)
        ceiling = 2 * math.sqrt(math.pi) * lam
        under = check_case_bound("3.1", synthetic_record(t, 0.5 * ceiling / (1 + t)), spec)
        over = check_case_bound("3.1", synthetic_record(t, 2 * ceiling / (1 + t)), spec)
        assert under.ceiling == pytest.approx(ceiling)
        assert under.holds and not over.holds

    def test_all_cases_have_rules(self):
        t = np.linspace(0, 10, 51)
        specs = {"1": PotentialSpec(2, 0, 0.5), "2": PotentialSpec(0.01, 0, 0.5), "3.1": PotentialSpec(0.01, 0, 1),
                 "3.2": PotentialSpec(0.01, 0, 1.2), "3.3": PotentialSpec(-2, 0, 1.2), "3.4": PotentialSpec(-2, 1, 1),
                 "4": PotentialSpec(0.01, 1, 1), "5": PotentialSpec(2, 0, 1), "6": PotentialSpec(2, 1, 1)}
        assert set(specs) == set(CASES)
        for case, spec in specs.items():
            rep = check_case_bound(case, synthetic_record(t, 0.01 * (1 + t) ** -2.0), spec, alpha=0.9)
            assert rep.case_id == case and rep.constant > 0


class TestRescale:
    def test_identity_when_M_equals_weighted_norm(self):
        g = Grid(1, 128, 40.0)
        phi = gaussian(g, 1.0)
        eps = weighted_norm_surrogate(phi, 5)["total"]
        psi, lam = rescale_small_data(phi, 0.3, eps)
        assert np.allclose(psi.values, phi.values, rtol=1e-14) and lam == pytest.approx(0.3, rel=1e-14)

    def test_doubling_M_quarters_lambda(self):
        g = Grid(1, 64, 20.0)
        phi = gaussian(g, 1.0)
        _, a = rescale_small_data(phi, 1.0, 2.0)
        _, b = rescale_small_data(phi, 1.0, 4.0)
        assert b == pytest.approx(a / 4, rel=1e-14)

    def test_rejects_nonpositive_M(self):
        g = Grid(1, 64, 20.0)
        with pytest.raises(DomainError):
            rescale_small_data(gaussian(g, 1.0), 1.0, 0.0)

    def test_dynamics_round_trip(self):
        g = Grid(1, 256, 60.0)
        phi = gaussian(g, 1.0)
        spec = PotentialSpec(0.8, 0.5, 1.0)
        psi, lam = rescale_small_data(phi, spec.lam, 3.0)
        c = psi.norm()
        direct = propagate(HartreeState(phi), spec, 0.01, 100).phi
        scaled = propagate(HartreeState(psi), spec.with_lambda(lam), 0.01, 100).phi
        assert (scaled * (1 / c) - direct).norm() <= 1e-10
