"""Exact moments, convergence-rate laws, and Monte Carlo verification for
the elephant random walk."""

from .core import (
    ErwParams,
    Regime,
    ResourceLimitError,
    ValidationError,
    regime_of,
)
from .moments import (
    MomentVector,
    brute_force_moment,
    exact_moment,
    first_moment,
    second_moment_closed_form,
    step_moments,
)
from .deviations import (
    DeviationSeries,
    deviations_critical,
    deviations_odd,
    deviations_subcritical,
    second_moment_deviation,
    solve_first_order_recursion,
)
from .asymptotics import (
    RatePrediction,
    berry_esseen_shape,
    predict_rate,
    variance_asymptote,
)
from .rates import FitResult, crossover_scan, fit_log_exponent, fit_power_exponent
from .simulation import (
    Dynamics,
    FirstReturnSample,
    RunningStats,
    SimConfig,
    first_return_times,
    kolmogorov_distance,
    simulate,
)

__version__ = "0.1.0"
