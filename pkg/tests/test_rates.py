import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from erwalk.core import ErwParams, ValidationError
from erwalk import deviations as D
from erwalk import rates as R


def synthetic_series(values, grid, alpha=Fraction(1, 4)):
    norm = (
        D.Normalization.CRITICAL
        if alpha == Fraction(1, 2)
        else D.Normalization.SUBCRITICAL
    )
    return D.DeviationSeries(
        params=ErwParams(alpha),
        order=4,
        grid=np.asarray(grid),
        values=np.asarray(values, dtype=float),
        normalization=norm,
    )


GRID = D.default_grid(10**6)


class TestPowerFit:
    def test_exact_power_law(self):
        s = synthetic_series(3.0 * GRID.astype(float) ** -0.7, GRID)
        fit = R.fit_power_exponent(s, (100, 10**6))
        assert fit.exponent == pytest.approx(0.7, abs=1e-12)
        assert fit.coefficient == pytest.approx(3.0, rel=1e-12)
        assert fit.residual_rms < 1e-12

    def test_negative_coefficients_keep_sign(self):
        s = synthetic_series(-2.0 * GRID.astype(float) ** -1.2, GRID)
        fit = R.fit_power_exponent(s)
        assert fit.coefficient == pytest.approx(-2.0, rel=1e-12)

    @given(
        exponent=st.floats(min_value=0.05, max_value=2.5),
        coefficient=st.floats(min_value=0.1, max_value=50),
        sign=st.sampled_from([-1.0, 1.0]),
    )
    def test_recovers_random_laws(self, exponent, coefficient, sign):
        s = synthetic_series(sign * coefficient * GRID.astype(float) ** -exponent, GRID)
        fit = R.fit_power_exponent(s, (10**3, 10**6))
        assert fit.exponent == pytest.approx(exponent, rel=1e-9, abs=1e-9)
        assert fit.coefficient == pytest.approx(sign * coefficient, rel=1e-9)

    def test_sign_change_refused(self):
        vals = GRID.astype(float) ** -1.0
        vals[len(vals) // 2 :] *= -1
        with pytest.raises(R.DegenerateSeriesError):
            R.fit_power_exponent(synthetic_series(vals, GRID), (100, 10**6))

    def test_zero_refused(self):
        s = D.deviations_subcritical(ErwParams(Fraction(0)), 2, 10**4)
        with pytest.raises(R.DegenerateSeriesError):
            R.fit_power_exponent(s, (100, 10**4))

    def test_thin_window_refused(self):
        s = synthetic_series(GRID.astype(float) ** -1.0, GRID)
        with pytest.raises(ValidationError):
            R.fit_power_exponent(s, (10**6 - 5, 10**6))

    def test_bad_window_refused(self):
        s = synthetic_series(GRID.astype(float) ** -1.0, GRID)
        with pytest.raises(ValidationError):
            R.fit_power_exponent(s, (10**6, 10**4))


class TestLogFit:
    def test_exact_log_law(self):
        grid = D.default_grid(10**6, n_min=10)
        vals = 5.0 / np.log(grid.astype(float))
        s = synthetic_series(vals, grid, alpha=Fraction(1, 2))
        fit = R.fit_log_exponent(s, (10, 10**6))
        assert fit.exponent == pytest.approx(1.0, abs=1e-12)
        assert fit.coefficient == pytest.approx(5.0, rel=1e-12)

    def test_requires_critical_series(self):
        s = synthetic_series(GRID.astype(float) ** -1.0, GRID)
        with pytest.raises(ValidationError):
            R.fit_log_exponent(s, (100, 10**6))

    def test_critical_second_order_rate(self, critical_family_1e6):
        fit = R.fit_log_exponent(critical_family_1e6[2], (10**3, 10**6))
        assert abs(fit.exponent - 1.0) <= 0.1
        from erwalk.core import EULER_GAMMA

        assert abs(fit.coefficient - EULER_GAMMA) / EULER_GAMMA <= 0.1

    def test_critical_odd_rate(self):
        p = ErwParams(Fraction(1, 2), Fraction(1))
        s = D.deviations_odd(p, 3, 10**6)
        fit = R.fit_log_exponent(s, (10**3, 10**6))
        assert abs(fit.exponent - 0.5) <= 0.1


class TestScan:
    def test_single_zero_cell(self):
        cells = R.crossover_scan([Fraction(0)], [2], 10**4)
        assert len(cells) == 1
        assert cells[0].flag == "identically-zero"
        assert cells[0].gamma_hat is None

    def test_rejects_critical_grid_point(self):
        with pytest.raises(ValidationError):
            R.crossover_scan([Fraction(1, 2)], [2], 10**4)

    def test_rejects_large_orders(self):
        with pytest.raises(ValidationError):
            R.crossover_scan([Fraction(0)], [14], 10**4)

    def test_small_scan_recovers_exponents(self):
        cells = R.crossover_scan(
            [Fraction(-1, 4)], [2, 3, 4], 10**5, window=(10**3, 10**5)
        )
        by_order = {c.order: c for c in cells}
        assert by_order[2].gamma_hat == pytest.approx(1.5, abs=0.05)
        assert by_order[3].gamma_hat == pytest.approx(0.75, abs=0.05)
        assert by_order[4].gamma_hat == pytest.approx(1.0, abs=0.06)

    def test_csv_rendering(self):
        import io

        cells = R.crossover_scan([Fraction(0)], [2, 4], 10**4)
        buf = io.StringIO()
        R.scan_to_csv(cells, buf)
        lines = buf.getvalue().strip().splitlines()
        assert lines[0].startswith("alpha,order,gamma_hat")
        assert lines[1].split(",")[-1] == "identically-zero"
        assert len(lines) == 3

    def test_transient_bias_shrinks_with_later_windows(self):
        # the two slowest-settling cells: fits on the late half of the grid
        # sit closer to the predicted exponent than fits on the early half
        for alpha, order, predicted in ((Fraction(1, 10), 6, 0.8),
                                        (Fraction(2, 5), 5, 0.1)):
            p = ErwParams(alpha, Fraction(1))
            if order % 2:
                s = D.deviations_odd(p, order, 10**6)
            else:
                s = D.deviations_subcritical(p, order, 10**6)
            early = R.fit_power_exponent(s, (10**3, 10**4))
            late = R.fit_power_exponent(s, (10**5, 10**6))
            assert abs(late.exponent - predicted) < abs(early.exponent - predicted)
