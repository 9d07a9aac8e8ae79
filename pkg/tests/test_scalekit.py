"""Scale-function calculus against closed-form oracles.

The sqrt weight ell(s) = s^(1/2) has elementary antiderivatives:
K(r) = (2/3) r^(-1/2), L(r) = 2 r^(-1/2), h = (8/3) r^(-1/2), phi(u) = 2 sqrt(u).
The log yardstick ell = log(e+s) exercises the running sup and its inverse
(log(e+r) = 2 at r = e^2 - e).
"""

import math
import threading

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from levyhk import (ScaleKit, WeightFunction, check_almost_monotone,
                    check_scaling)

SQRT_W = WeightFunction(fn=lambda s: np.sqrt(np.asarray(s, dtype=float)),
                        beta=0.5, alpha1=0.5, alpha2=0.5, name="sqrt")
LOG_W = WeightFunction(fn=lambda s: np.log(np.e + np.asarray(s, dtype=float)),
                       beta=0.5, alpha1=0.0, alpha2=0.5, name="log")


@pytest.fixture(scope="module")
def sqrt_kit():
    return ScaleKit(SQRT_W)


@pytest.fixture(scope="module")
def log_kit():
    # log(e+s) tends to 1 at 0, so it is not an admissible weight for the
    # integral calculus; it is only used for sup/inverse machinery here.
    return ScaleKit(LOG_W, validate=False)


class TestClosedForms:
    def test_k(self, sqrt_kit):
        assert sqrt_kit.K(0.25) == pytest.approx(4.0 / 3.0, rel=1e-9)

    def test_k_sup_bound(self, sqrt_kit):
        # K(r) <= sup_{s<=r} ell(1/s) / 2 because int_0^r s ds = r^2/2
        for r in (0.1, 1.0, 7.0):
            sup = max(float(SQRT_W(1.0 / s)) for s in np.linspace(1e-6, r, 200))
            assert sqrt_kit.K(r) <= sup / 2.0 * (1 + 1e-9)

    def test_l(self, sqrt_kit):
        assert sqrt_kit.L(0.25) == pytest.approx(4.0, rel=1e-9)

    def test_h(self, sqrt_kit):
        assert sqrt_kit.h(0.25) == pytest.approx(16.0 / 3.0, rel=1e-9)

    def test_phi(self, sqrt_kit):
        assert sqrt_kit.phi(0.0) == 0.0
        assert sqrt_kit.phi(4.0) == pytest.approx(4.0, rel=1e-9)

    def test_v_proxy(self, sqrt_kit):
        assert sqrt_kit.v_proxy(0.25) == pytest.approx((16.0 / 3.0) ** -0.5,
                                                       rel=1e-9)

    def test_domain_errors(self, sqrt_kit):
        for bad in (0.0, -1.0, math.inf):
            with pytest.raises(ValueError):
                sqrt_kit.K(bad)
        with pytest.raises(ValueError):
            sqrt_kit.L(0.0)
        with pytest.raises(ValueError):
            sqrt_kit.phi(-0.1)
        with pytest.raises(ValueError):
            sqrt_kit.v_proxy(0.0)


class TestIdentities:
    def test_h_equals_k_plus_l(self, sqrt_kit):
        rs = np.geomspace(1e-3, 1e3, 1000)
        for r in rs:
            assert sqrt_kit.h(r) == pytest.approx(
                sqrt_kit.K(r) + sqrt_kit.L(r), rel=1e-12)

    def test_phi_is_tail_at_inverse(self, sqrt_kit):
        for u in (0.1, 1.0, 10.0):
            assert sqrt_kit.phi(u) == pytest.approx(sqrt_kit.L(1.0 / u),
                                                    rel=1e-12)

    def test_h_strictly_decreasing_l_strictly_decreasing(self, sqrt_kit):
        rs = np.geomspace(1e-2, 1e2, 41)
        hs = [sqrt_kit.h(r) for r in rs]
        ls = [sqrt_kit.L(r) for r in rs]
        assert all(a > b for a, b in zip(hs, hs[1:]))
        assert all(a > b for a, b in zip(ls, ls[1:]))

    def test_h_at_least_l(self, sqrt_kit):
        for r in np.geomspace(1e-3, 1e3, 25):
            assert sqrt_kit.h(r) >= sqrt_kit.L(r)

    def test_derivative_identity(self):
        # central differences of h against -2K(r)/r; needs the tight
        # quadrature so the finite-difference noise stays below 1e-5
        kit = ScaleKit(SQRT_W, epsabs=1e-14, epsrel=1e-12)
        for r in (0.05, 0.3, 1.0, 4.0):
            eps = 1e-4 * r
            fd = (kit.h(r + eps) - kit.h(r - eps)) / (2.0 * eps)
            exact = -2.0 * kit.K(r) / r
            assert fd == pytest.approx(exact, rel=1e-5)

    def test_v_proxy_increasing_and_near_subadditive(self, sqrt_kit):
        rs = np.geomspace(1e-2, 10.0, 30)
        vs = [sqrt_kit.v_proxy(r) for r in rs]
        assert all(b > a for a, b in zip(vs, vs[1:]))
        xs = np.geomspace(0.05, 2.0, 8)
        worst = max(sqrt_kit.v_proxy(x + y)
                    / (sqrt_kit.v_proxy(x) + sqrt_kit.v_proxy(y))
                    for x in xs for y in xs)
        assert worst < 1.5  # subadditive up to a grid-fitted constant


class TestRunningSup:
    def test_nondecreasing_weight(self, sqrt_kit):
        for r in (1.0, 3.0, 42.0):
            assert sqrt_kit.ell_star(r) == pytest.approx(float(SQRT_W(r)),
                                                         rel=1e-9)

    def test_decreasing_weight_pins_left_endpoint(self):
        w = WeightFunction(fn=lambda s: 1.0 / np.log(np.e + np.asarray(s)),
                           beta=0.5, alpha1=-0.5, alpha2=0.0)
        kit = ScaleKit(w, validate=False)
        v1 = 1.0 / math.log(math.e + 1.0)
        for r in (1.0, 10.0, 1e4):
            assert kit.ell_star(r) == pytest.approx(v1, rel=1e-9)

    def test_log_weight_value(self, log_kit):
        assert log_kit.ell_star(10.0) == pytest.approx(
            math.log(math.e + 10.0), rel=1e-9)

    def test_domain_error(self, log_kit):
        with pytest.raises(ValueError):
            log_kit.ell_star(0.5)

    def test_monotone(self, log_kit):
        rs = np.geomspace(1.0, 1e6, 60)
        vals = [log_kit.ell_star(r) for r in rs]
        assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))


class TestGeneralizedInverse:
    def test_log_oracle(self, log_kit):
        assert log_kit.ell_inverse(2.0) == pytest.approx(
            math.e ** 2 - math.e, rel=1e-6)

    def test_below_left_value(self, log_kit):
        assert log_kit.ell_inverse(1.0) == 1.0  # ell*(1) = log(e+1) > 1

    def test_sentinel_for_bounded_weight(self):
        w = WeightFunction(fn=lambda s: np.asarray(s) / (1.0 + np.asarray(s)),
                           beta=1.0, alpha1=0.0, alpha2=0.0)
        kit = ScaleKit(w, validate=False)
        assert math.isinf(kit.ell_inverse(2.0))
        # and theta folds the sentinel into a zero cutoff
        assert kit.theta(1.0, 0.25, 0.5) == 0.25

    def test_domain_error(self, log_kit):
        with pytest.raises(ValueError):
            log_kit.ell_inverse(0.0)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(min_value=1.5, max_value=25.0))
    def test_bracket(self, t):
        kit = ScaleKit(LOG_W, validate=False)
        r = kit.ell_inverse(t)
        assert r >= 1.0
        eps = max(r * 1e-9, 1e-9)
        assert kit.ell_star(max(1.0, r - eps)) <= t * (1 + 1e-9)
        assert kit.ell_star(r + eps) >= t * (1 - 1e-9)


class TestTheta:
    def test_r_dominates_beyond_one(self, log_kit):
        for r in (1.0, 2.5, 7.0):
            assert log_kit.theta(1.0, r, 0.5) == r

    def test_log_oracle(self, log_kit):
        want = 1.0 / (math.e ** 2 - math.e)
        assert log_kit.theta(1.0, 0.0, 0.5) == pytest.approx(want, rel=1e-6)

    def test_monotonicity_grid(self, log_kit):
        a_grid = np.linspace(0.5, 3.0, 5)
        r_grid = np.linspace(0.0, 0.6, 5)
        t_grid = np.linspace(0.3, 3.0, 5)
        th = lambda a, r, t: log_kit.theta(a, r, t)
        for a in a_grid:
            for t in t_grid:
                vals = [th(a, r, t) for r in r_grid]
                assert all(b >= a0 - 1e-12 for a0, b in zip(vals, vals[1:]))
        for a in a_grid:
            for r in r_grid:
                vals = [th(a, r, t) for t in t_grid]
                assert all(b >= a0 - 1e-12 for a0, b in zip(vals, vals[1:]))
        for r in r_grid:
            for t in t_grid:
                vals = [th(a, r, t) for a in a_grid]
                assert all(b <= a0 + 1e-12 for a0, b in zip(vals, vals[1:]))

    def test_errors(self, log_kit):
        with pytest.raises(ValueError):
            log_kit.theta(0.0, 1.0, 1.0)
        with pytest.raises(ValueError):
            log_kit.theta(1.0, -0.5, 1.0)


class TestLargeTimeVariants:
    def test_hat_phi_zero_at_one(self, sqrt_kit):
        assert sqrt_kit.hat_phi(1.0) == 0.0
        with pytest.raises(ValueError):
            sqrt_kit.hat_phi(0.5)

    def test_decreasing_weight_reduces_to_phi_difference(self):
        # this weight is nonincreasing on [1, inf), so hat_ell = 1/ell and
        # hat_phi(u) = phi(u) - phi(1)
        w = WeightFunction(
            fn=lambda s: np.asarray(s, dtype=float) ** 0.4
            / (1.0 + np.asarray(s, dtype=float)) ** 0.8,
            beta=0.4, alpha1=-0.4, alpha2=0.0)
        kit = ScaleKit(w)
        for u in (2.0, 10.0, 100.0):
            want = kit.phi(u) - kit.phi(1.0)
            assert kit.hat_phi(u) == pytest.approx(want, rel=1e-6)


class TestScalingChecker:
    def test_exact_power_law_passes_with_unit_constant(self):
        res = check_scaling(lambda s: s ** 0.5, "wls-inf", 0.5, 1.0)
        assert res.passed
        assert res.constant == pytest.approx(1.0, abs=1e-9)

    def test_slowly_varying_dominated_by_power(self):
        res = check_scaling(lambda s: math.log(math.e + s), "wus-inf", 0.5, 1.0)
        assert res.passed

    def test_exponent_mismatch_fails(self):
        res = check_scaling(lambda s: s ** 1.5, "wus-inf", 0.9, 1.0)
        assert not res.passed
        assert res.worst_violation > 10.0

    def test_zero_side_kinds(self):
        assert check_scaling(lambda s: s ** 0.3, "wls-0", 0.3, 1.0).passed
        assert check_scaling(lambda s: s ** 0.3, "wus-0", 0.3, 1.0).passed
        # a flat power cannot admit a steeper lower bound toward 0
        assert not check_scaling(lambda s: s ** 0.1, "wls-0", 0.5, 1.0).passed

    def test_usage_errors(self):
        with pytest.raises(ValueError):
            check_scaling(lambda s: s, "bogus", 1.0)
        with pytest.raises(ValueError):
            check_scaling(lambda s: s, "wls-inf", 1.0, grid=np.array([2.0]))

    def test_phi_two_sided_scaling(self, sqrt_kit):
        # accumulated mass of the sqrt weight scales like u^(1/2) above 1
        f = sqrt_kit.phi
        assert check_scaling(f, "wls-inf", 0.5, 1.0, decades=4).passed
        assert check_scaling(f, "wus-inf", 0.5, 1.0, decades=4).passed


class TestAlmostMonotone:
    def test_monotone_passes_with_unit_ratio(self):
        res = check_almost_monotone(lambda s: s ** 0.7, "increasing")
        assert res.passed
        assert res.constant == pytest.approx(1.0, abs=1e-12)

    def test_bounded_oscillation_passes(self):
        f = lambda s: math.log(math.e + s) * (2.0 + math.sin(math.log(s)))
        assert check_almost_monotone(f, "increasing").passed

    def test_growing_oscillation_fails(self):
        def f(s):
            k = math.log10(s) if s > 1 else 0.0
            return s * 10.0 ** (4.0 * k * math.sin(3.0 * math.log(s)))
        assert not check_almost_monotone(f, "increasing").passed

    def test_usage_errors(self):
        with pytest.raises(ValueError):
            check_almost_monotone(lambda s: s, "sideways")
        with pytest.raises(ValueError):
            check_almost_monotone(lambda s: s, "increasing",
                                  grid=np.array([2.0]))


class TestWeightValidation:
    def test_bad_indices(self):
        with pytest.raises(ValueError):
            WeightFunction(fn=lambda s: s, beta=0.5, alpha1=0.5, alpha2=1.0)
        with pytest.raises(ValueError):
            WeightFunction(fn=lambda s: s, beta=-0.1, alpha1=0.0, alpha2=0.0)

    def test_divergent_small_scale_mass_rejected(self):
        w = WeightFunction(fn=lambda s: np.ones_like(np.asarray(s, float)),
                           beta=0.5, alpha1=0.0, alpha2=0.0)
        with pytest.raises(ValueError):
            ScaleKit(w)


class TestExportAndSharing:
    def test_csv_columns(self, sqrt_kit, tmp_path):
        path = tmp_path / "grid.csv"
        sqrt_kit.write_calibration_csv(path, r_lo=0.1, r_hi=10.0, points=5)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "r,K,L,h,phi,v_proxy"
        assert len(lines) == 6

    def test_concurrent_readers(self, sqrt_kit):
        rs = np.geomspace(0.01, 100.0, 64)
        results = [None] * 8

        def worker(i):
            results[i] = [sqrt_kit.h(r) for r in rs]

        threads = [threading.Thread(target=worker, args=(i,))
                   for i in range(8)]
        for th in threads:
            th.start()
        for th in threads:
            th.join()
        for res in results[1:]:
            assert res == results[0]
