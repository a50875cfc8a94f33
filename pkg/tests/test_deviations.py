import io
import math
from fractions import Fraction

import numpy as np
import pytest

from erwalk.core import EULER_GAMMA, ErwParams, ValidationError
from erwalk import deviations as D
from erwalk import moments as M


def exact_even_deviation(params, n, order):
    mv = M.moments_at(params, n, order)
    m = order // 2
    scale = (Fraction(n) / (1 - 2 * params.alpha)) ** m
    from erwalk.core import double_factorial

    return mv[order] / (scale * double_factorial(order - 1)) - 1


class TestSolver:
    def test_constant_solution(self):
        x = D.solve_first_order_recursion(7.0, np.zeros(20), np.ones(20))
        assert np.all(x == 7.0)

    def test_telescoping_sum(self):
        x = D.solve_first_order_recursion(0.0, np.ones(20), np.ones(20), j0=3)
        # x_n = n - j0 - 1 for n = 4 .. 24
        assert np.allclose(x, np.arange(21), rtol=0, atol=0)

    def test_zero_multiplier_refused(self):
        g = np.ones(5)
        g[2] = 0.0
        with pytest.raises(ValidationError):
            D.solve_first_order_recursion(1.0, np.ones(5), g)

    def test_matches_direct_iteration_of_odd_system(self):
        # raw third moment at alpha=1/4, beta=1: x_{n+1} = f_n + g_n x_n with
        # f_n = (3 + a/n) E[S_n] and g_n = 1 + 3a/n
        a = 0.25
        n_max = 1000
        from erwalk.core import drift_scale

        first = np.array([drift_scale(a, n) for n in range(1, n_max)])
        j = np.arange(1, n_max, dtype=float)
        f = (3.0 + a / j) * first
        g = 1.0 + 3.0 * a / j
        solved = D.solve_first_order_recursion(1.0, f, g)
        x = 1.0
        direct = [x]
        for i in range(n_max - 1):
            x = f[i] + g[i] * x
            direct.append(x)
        assert np.allclose(solved, np.array(direct), rtol=1e-12)


class TestSecondMomentDeviation:
    def test_memoryless_zero(self):
        assert D.second_moment_deviation(ErwParams(Fraction(0)), 5) == 0.0

    def test_counterbalanced_zero_from_two(self):
        assert D.second_moment_deviation(ErwParams(Fraction(-1, 2)), 2) == 0.0

    def test_first_step_value(self):
        assert D.second_moment_deviation(ErwParams(Fraction(-1, 2)), 1) == 1.0

    def test_reinforced_value(self):
        got = D.second_moment_deviation(ErwParams(Fraction(1, 4)), 2)
        assert got == pytest.approx(-0.375, rel=1e-14)

    def test_rejects_critical(self):
        with pytest.raises(ValidationError):
            D.second_moment_deviation(ErwParams(Fraction(1, 2)), 5)

    @pytest.mark.parametrize("alpha", [Fraction(-2, 3), Fraction(-1, 8), Fraction(2, 5)])
    def test_exact_and_float_agree(self, alpha):
        p = ErwParams(alpha)
        for n in (1, 2, 3, 10, 200, 4000):
            exact = float(D.second_moment_deviation_exact(p, n))
            assert D.second_moment_deviation(p, n) == pytest.approx(exact, rel=1e-10)

    def test_matches_moment_engine(self):
        p = ErwParams(Fraction(1, 3))
        for n in (1, 2, 7, 40):
            assert D.second_moment_deviation_exact(p, n) == exact_even_deviation(p, n, 2)


class TestSubcriticalEngine:
    def test_recursion_matches_second_moment_formula(self):
        p = ErwParams(Fraction(1, 4))
        series = D.deviations_subcritical(p, 2, 10**4)
        for n in series.grid[::4]:
            expected = D.second_moment_deviation(p, int(n))
            assert series.value_at(int(n)) == pytest.approx(expected, rel=1e-10)

    @pytest.mark.parametrize(
        "alpha", [Fraction(-3, 4), Fraction(-1, 4), Fraction(1, 4), Fraction(2, 5)]
    )
    def test_consistency_with_exact_moments(self, alpha):
        p = ErwParams(alpha)
        grid = [1, 2, 3, 5, 17, 100, 999]
        fam = D.deviations_even_family(p, 6, 1000, grid=grid)
        for order in (2, 4, 6):
            for n in grid:
                exact = float(exact_even_deviation(p, n, order))
                got = fam[order].value_at(n)
                assert got == pytest.approx(exact, rel=1e-9, abs=1e-12)

    def test_degenerate_branches_are_exact_zeros(self):
        s0 = D.deviations_subcritical(ErwParams(Fraction(0)), 2, 1000)
        assert np.all(s0.values == 0.0)
        sh = D.deviations_subcritical(ErwParams(Fraction(-1, 2)), 2, 1000)
        assert np.all(sh.values[sh.grid >= 2] == 0.0)

    def test_rejects_critical_and_superdiffusive(self):
        with pytest.raises(ValidationError):
            D.deviations_subcritical(ErwParams(Fraction(1, 2)), 4, 100)
        with pytest.raises(ValidationError):
            D.deviations_even_family(ErwParams(Fraction(3, 4)), 4, 100)

    def test_drift_term_vanishes_for_second_order(self):
        p = ErwParams(Fraction(1, 3))
        assert D.even_drift_term(p, 2, 5) == 0.0
        assert np.all(np.asarray(D.even_drift_term(p, 2, np.arange(1, 50))) == 0.0)

    def test_drift_solution_limit_small_horizon(self):
        # n * (drift part of the order-4 deviation) settles near its constant
        p = ErwParams(Fraction(-1, 4))
        series = D.deviations_subcritical(p, 4, 10**5)
        drift = series.diagnostics.drift_solution[-1]
        assert drift * 10**5 == pytest.approx(-0.375, rel=0.01)

    def test_multiplier_positive_past_offset(self):
        p = ErwParams(Fraction(-3, 4))
        series = D.deviations_subcritical(p, 4, 1000)
        g = series.diagnostics.multiplier
        ok = ~np.isnan(g)
        assert np.all(g[ok] > 0)


class TestCriticalEngine:
    def test_requires_exact_half(self):
        with pytest.raises(ValidationError):
            D.deviations_critical(ErwParams(Fraction(49, 100)), 2, 100)

    def test_scaled_moment_small_values(self):
        s = D.deviations_critical(ErwParams(Fraction(1, 2)), 2, 100, grid=[2, 3, 10])
        # scaled second moments are the harmonic numbers
        assert s.diagnostics.scaled_moments[1] == pytest.approx(11 / 6, rel=1e-14)

    def test_consistency_with_exact_moments(self):
        p = ErwParams(Fraction(1, 2))
        grid = [2, 3, 10, 100, 998]
        fam = D.deviations_even_family(p, 4, 1000, grid=grid)
        from erwalk.core import double_factorial

        for order in (2, 4):
            for n in grid:
                mv = M.moments_at(p, n, order)
                exact = float(mv[order]) / (
                    (n * math.log(n)) ** (order // 2) * double_factorial(order - 1)
                ) - 1
                assert fam[order].value_at(n) == pytest.approx(exact, rel=1e-9)

    def test_second_order_is_harmonic_gap(self):
        p = ErwParams(Fraction(1, 2))
        s = D.deviations_critical(p, 2, 2000, grid=[1000])
        h = float(sum(Fraction(1, j) for j in range(1, 1001)))
        expected = (h - math.log(1000)) / math.log(1000)
        # log-gamma binomials in the normalizer leave ~1e-12 noise
        assert s.value_at(1000) == pytest.approx(expected, rel=1e-9)

    def test_decomposition_identity(self, critical_family_1e6):
        for order in (2, 4):
            s = critical_family_1e6[order]
            d = s.diagnostics
            resid = np.abs(
                d.constant_part + d.normalization_part + d.coupling_part - s.values
            )
            assert np.max(resid) <= 1e-10

    def test_gap_from_limit_shrinks_like_inverse_log(self, critical_family_1e6):
        # the order-4 deviation times log n approaches 2*gamma with a
        # first-order correction c/log n; check the gap scales that way and
        # the extrapolated limit lands on 2*gamma
        s = critical_family_1e6[4]
        sel = s.grid >= 10**4
        ln = np.log(s.grid[sel].astype(float))
        y = s.values[sel] * ln
        gaps = 2 * EULER_GAMMA - y
        assert np.all(np.diff(gaps) < 0)  # monotone approach
        slope, intercept = np.polyfit(1.0 / ln, y, 1)
        assert intercept == pytest.approx(2 * EULER_GAMMA, rel=0.02)

    def test_startup_and_normalization_parts_stay_small(self, critical_family_1e6):
        s = critical_family_1e6[4]
        d = s.diagnostics
        sel = s.grid >= 10**3
        l2 = np.log(s.grid[sel].astype(float)) ** 2
        assert np.max(np.abs(l2 * d.constant_part[sel])) <= 8.0
        assert np.max(np.abs(l2 * d.normalization_part[sel])) <= 8.0


class TestOddDeviations:
    def test_zero_bias_gives_zeros(self):
        s = D.deviations_odd(ErwParams(Fraction(1, 4), Fraction(0)), 3, 500)
        assert np.all(s.values == 0.0)

    def test_matches_exact_moments(self):
        p = ErwParams(Fraction(1, 4), Fraction(1))
        s = D.deviations_odd(p, 3, 1000, grid=[1, 2, 10, 100, 1000])
        for n in s.grid:
            n = int(n)
            exact = float(M.exact_moment(p, n, 3)) / (n / 0.5) ** 1.5
            assert s.value_at(n) == pytest.approx(exact, rel=1e-12)

    def test_critical_normalization(self):
        p = ErwParams(Fraction(1, 2), Fraction(1))
        s = D.deviations_odd(p, 1, 1000, grid=[10, 100, 1000])
        for n in s.grid:
            n = int(n)
            exact = float(M.exact_moment(p, n, 1)) / math.sqrt(n * math.log(n))
            assert s.value_at(n) == pytest.approx(exact, rel=1e-12)
        assert s.normalization is D.Normalization.CRITICAL

    def test_rejects_superdiffusive(self):
        with pytest.raises(ValidationError):
            D.deviations_odd(ErwParams(Fraction(2, 3), Fraction(1)), 3, 100)


class TestSeriesContainer:
    def test_grid_must_increase(self):
        p = ErwParams(Fraction(1, 4))
        with pytest.raises(ValidationError):
            D.DeviationSeries(
                params=p, order=2, grid=np.array([5, 3]),
                values=np.zeros(2), normalization=D.Normalization.SUBCRITICAL,
            )

    def test_normalization_matches_memory_strength(self):
        with pytest.raises(ValidationError):
            D.DeviationSeries(
                params=ErwParams(Fraction(1, 4)), order=2,
                grid=np.array([2, 3]), values=np.zeros(2),
                normalization=D.Normalization.CRITICAL,
            )

    def test_csv_round_trip(self):
        p = ErwParams(Fraction(1, 4))
        s = D.deviations_subcritical(p, 2, 100, grid=[2, 10, 100])
        buf = io.StringIO()
        s.to_csv(buf)
        lines = buf.getvalue().strip().splitlines()
        assert lines[0] == "n,order,value,normalization"
        assert len(lines) == 4
        n, order, value, norm = lines[1].split(",")
        assert (int(n), int(order), norm) == (2, 2, "subcritical")
        assert float(value) == s.value_at(2)

    def test_default_grid_contains_decades(self):
        g = D.default_grid(10**6)
        for point in (10, 100, 10**3, 10**4, 10**5, 10**6):
            assert point in g
        assert np.all(np.diff(g) > 0)
