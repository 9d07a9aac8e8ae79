"""Catalog models: exponent round trips, density consistency, flags.

The stable family is exact end to end (psi(u) = u^alpha with the matching
density constant), so it anchors the radial quadrature in every dimension.
The geometric stable family gets a genuine dual-route check: the closed
special-function density for alpha = 1, d = 1 against the subordinator
integral, and the quadrature exponent against log(1 + u^alpha).
"""

import math

import numpy as np
import pytest
from scipy.special import erfc

from levyhk.models import (check_condition_B, classify_ondiag,
                           default_catalog, get_model, getoor_mean_exit,
                           make_geometric_stable,
                           make_iterated_geometric_stable, make_logp_model,
                           make_stable, mittag_leffler_neg, psi_from_nu,
                           softlog, stable_density_constant)

CATALOG_1D = ["cauchy", "stable-half", "geostable", "igs",
              "log-p1", "log-p0", "log-pm05", "log-pm1"]


class TestSpecialFunctions:
    @pytest.mark.parametrize("x", [0.1, 0.5, 1.0, 3.0, 10.0])
    def test_mittag_leffler_half(self, x):
        want = math.exp(x * x) * erfc(x)
        assert mittag_leffler_neg(0.5, x) == pytest.approx(want, rel=1e-10)

    def test_mittag_leffler_endpoints(self):
        assert mittag_leffler_neg(0.3, 0.0) == 1.0
        with pytest.raises(ValueError):
            mittag_leffler_neg(1.2, 1.0)

    def test_cauchy_density_constant(self):
        # nu(r) = r^-2 / pi for the d = 1 Cauchy generator
        assert stable_density_constant(1, 1.0) == pytest.approx(1.0 / math.pi,
                                                                rel=1e-12)

    def test_getoor_constant(self):
        # d = 1, alpha = 1/2, unit ball from the center: 2/sqrt(pi)
        want = 2.0 / math.sqrt(math.pi)
        assert getoor_mean_exit(1, 0.5, 1.0) == pytest.approx(want, rel=1e-12)
        assert getoor_mean_exit(1, 0.5, 1.0, 1.0) == 0.0


class TestClosedFormExponents:
    def test_geometric_stable_at_one(self):
        gs = get_model("geostable")
        assert float(gs.psi(1.0)) == pytest.approx(math.log(2.0), rel=1e-12)

    def test_geometric_stable_log_asymptote(self):
        gs = get_model("geostable")
        u = 1e6
        assert float(gs.psi(u)) / math.log(u) == pytest.approx(1.0, abs=0.1)

    def test_iterated_at_one(self):
        igs = get_model("igs")
        want = math.log(1.0 + math.log(2.0))
        assert float(igs.psi(1.0)) == pytest.approx(want, rel=1e-12)

    def test_stable_power_scaling(self):
        st = get_model("stable-half")
        for u in (0.2, 3.0, 50.0):
            assert float(st.psi(2 * u)) / float(st.psi(u)) == pytest.approx(
                2.0 ** 0.5, rel=1e-12)

    @pytest.mark.parametrize("name", CATALOG_1D)
    def test_psi_nondecreasing(self, name):
        m = get_model(name)
        u = np.geomspace(1e-6, 1e6, 120)
        vals = np.asarray(m.psi(u), dtype=float)
        assert np.all(np.diff(vals) >= -1e-12 * vals[1:])

    def test_bad_parameters(self):
        with pytest.raises(ValueError):
            make_stable(1, 2.5)
        with pytest.raises(ValueError):
            make_geometric_stable(1, 0.0)
        with pytest.raises(ValueError):
            make_iterated_geometric_stable(1, 1.0, iterations=1)
        with pytest.raises(ValueError):
            make_logp_model(1, -1.5)
        with pytest.raises(ValueError):
            make_logp_model(1, 0.0, beta=1.5)


class TestQuadratureExponent:
    def test_stable_half_constant_ratio(self):
        st = get_model("stable-half")
        ratios = [psi_from_nu(st, u) / u ** 0.5
                  for u in np.geomspace(0.1, 100.0, 9)]
        assert max(ratios) / min(ratios) - 1.0 < 1e-4
        assert ratios[0] == pytest.approx(1.0, abs=1e-4)

    def test_geometric_stable_against_closed_form(self):
        gs = get_model("geostable")
        for u in np.geomspace(0.1, 1e3, 9):
            got = psi_from_nu(gs, u)
            assert got == pytest.approx(math.log1p(u), rel=1e-3)

    def test_small_argument_limit(self):
        gs = get_model("geostable")
        tiny = psi_from_nu(gs, 1e-6)
        assert 0.0 < tiny < 1e-4 * psi_from_nu(gs, 1.0)

    @pytest.mark.parametrize("d,alpha", [(2, 0.8), (3, 0.5), (1, 1.5)])
    def test_stable_multidimensional(self, d, alpha):
        st = make_stable(d, alpha)
        for u in (0.5, 5.0):
            assert psi_from_nu(st, u) == pytest.approx(u ** alpha, rel=1e-9)

    def test_iterated_round_trip(self):
        igs = get_model("igs")
        for u in (0.5, 5.0, 100.0):
            want = math.log1p(math.log1p(u))
            assert psi_from_nu(igs, u) == pytest.approx(want, rel=1e-5)

    def test_usage_error(self):
        with pytest.raises(ValueError):
            psi_from_nu(get_model("cauchy"), 0.0)


class TestDensities:
    def test_geometric_stable_dual_route(self):
        from levyhk.models import _nu_subordinate
        gs = get_model("geostable")
        alt = _nu_subordinate(1, 1.0, tabulated=False)
        for r in (0.01, 0.3, 2.0, 40.0):
            assert float(gs.nu(r)) == pytest.approx(float(alt(r)), rel=1e-5)

    @pytest.mark.parametrize("name", CATALOG_1D)
    def test_nonincreasing(self, name):
        m = get_model(name)
        r = np.geomspace(1e-6, 1e4, 160)
        nu = np.asarray(m.nu(r), dtype=float)
        assert np.all(nu > 0.0)
        assert np.all(np.diff(nu) <= 1e-10 * nu[:-1])

    @pytest.mark.parametrize("name", CATALOG_1D)
    def test_weight_sandwich(self, name):
        # kappa1 r^-d ell(1/r) <= nu(r) <= kappa2 r^-d ell(1/r)
        m = get_model(name)
        k1, k2 = m.kappa_bounds()
        assert 0.0 < k1 <= k2 < math.inf
        assert k2 / k1 < 25.0

    def test_logp_exact_by_construction(self):
        m = get_model("log-p1")
        k1, k2 = m.kappa_bounds()
        assert k1 == pytest.approx(1.0, rel=1e-12)
        assert k2 == pytest.approx(1.0, rel=1e-12)


class TestScaleRelations:
    @pytest.mark.parametrize("name", ["cauchy", "geostable", "log-p1"])
    def test_exponent_vs_h(self, name):
        # psi(1/r) and h(r) bounded against each other on the working range
        m = get_model(name)
        c0, c1 = m.exponent_scale_constants()
        assert 0.0 < c0 <= c1 < math.inf
        assert c1 / c0 < 50.0

    def test_exponent_increment_bounded_by_weight(self):
        # psi(lam x) - psi(x) stays below a multiple of ell(x)
        for name in ("geostable", "log-p1"):
            m = get_model(name)
            xs = np.geomspace(1.0, 1e4, 17)
            for lam in (2.0, 5.0):
                ratio = (np.asarray(m.psi(lam * xs)) - np.asarray(m.psi(xs))) \
                    / np.asarray(m.weight(xs))
                assert np.all(ratio < 25.0)
                assert np.all(ratio > -1e-9)

    def test_hat_phi_shape_for_pm1(self):
        # for the 1/log weight the large-time integral grows like the
        # iterated log
        m = get_model("log-pm1")
        kit = m.kit
        us = np.geomspace(10.0, 1e6, 9)
        ratio = np.array([kit.hat_phi(u) for u in us]) / softlog(softlog(us))
        assert ratio.max() / ratio.min() < 5.0


class TestFlags:
    def test_family_flags(self):
        gs = get_model("geostable")
        assert gs.flags.S1 and gs.flags.L2 and not gs.flags.S2
        igs = get_model("igs")
        assert igs.flags.S1 and igs.flags.L1
        p1 = get_model("log-p1")
        assert p1.flags.S2 and not p1.flags.S1
        pm5 = get_model("log-pm05")
        assert pm5.flags.S1 and pm5.flags.L1 and not pm5.flags.L2
        cauchy = get_model("cauchy")
        assert not cauchy.flags.in_scope_for_A
        assert get_model("stable-half").flags.in_scope_for_A

    @pytest.mark.parametrize("name", CATALOG_1D)
    def test_ondiag_classification_matches_flags(self, name):
        m = get_model(name)
        assert classify_ondiag(m) == m.flags.ondiag

    def test_weight_growth_matches_s_flags(self):
        # growth of the weight between two large scales separates the
        # unbounded (S2) catalog members from the bounded (S1) ones
        for name in CATALOG_1D:
            m = get_model(name)
            growth = float(m.weight(1e9)) / float(m.weight(1e3))
            assert (growth > 1.5) == m.flags.S2
            assert (growth <= 1.5) == m.flags.S1


class TestConditionB:
    @pytest.mark.parametrize("name", ["stable-half", "geostable", "log-p1"])
    def test_catalog_passes(self, name):
        assert check_condition_B(get_model(name)).passed

    def test_exact_power_law(self):
        res = check_condition_B(get_model("stable-half"))
        assert res.worst_violation < 1.0 + 1e-6

    def test_kinked_density_fails(self):
        class Fake:
            def nu(self, r):
                r = np.asarray(r, dtype=float)
                # -nu'/r jumps upward across r = 1
                return np.where(r < 1.0, r ** -1.2, r ** -2.4)

        assert not check_condition_B(Fake()).passed


class TestSamplerDescriptors:
    @pytest.mark.parametrize("name", ["cauchy", "stable-half", "geostable",
                                      "igs"])
    def test_laplace_composition_matches_psi(self, name):
        m = get_model(name)
        u = np.geomspace(1e-3, 1e3, 25)
        got = m.sampler.psi(u)
        want = np.asarray(m.psi(u), dtype=float)
        assert np.allclose(got, want, rtol=1e-8)

    def test_logp_has_no_sampler(self):
        assert get_model("log-p1").sampler is None


class TestCatalogResolution:
    def test_names_resolve_and_cache(self):
        for name in default_catalog():
            assert get_model(name) is get_model(name)

    def test_spec_strings(self):
        m = get_model("stable:alpha=0.7,d=2")
        assert m.d == 2 and m.params["alpha"] == 0.7
        m2 = get_model("logp:p=0.5,beta=0.4")
        assert m2.params == {"p": 0.5, "beta": 0.4}

    def test_unknown_rejected(self):
        with pytest.raises(ValueError):
            get_model("nope")
        with pytest.raises(ValueError):
            get_model("stable:alpha=0.5,bogus=1")
