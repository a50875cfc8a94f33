"""High-throughput Monte Carlo simulation of the walk.

Two interchangeable dynamics:

* conditional law (default): each step goes up with probability
  (1 + a * S_n/n)/2, O(1) state per replica;
* memory replay (fidelity oracle): draw a uniform past time, copy that
  step with probability p, flip it otherwise; stores the full step history
  of a replica and is capped to modest horizons.

Reproducibility contract: every replica owns its RNG stream.  The stream
for replica r is SplitMix64 started from

    state_0 = mix64(master_seed XOR mix64((r + 1) * GOLDEN)),

where mix64 is the SplitMix64 finalizer and GOLDEN = 0x9E3779B97F4A7C15;
successive draws advance the state by GOLDEN and finalize.  Replica outputs
therefore depend only on (master_seed, r), never on scheduling, so results
are bit-identical for any thread count.

Accumulation is exact: the terminal (and checkpoint) positions are small
integers, so RunningStats keeps an integer histogram and derives integer
power sums from it.  Merging accumulators adds histograms, which makes the
merge exactly associative and commutative, tolerance zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Optional, Sequence, Tuple

import numba
import numpy as np
from scipy.special import ndtr

# workqueue is always available; skipping the TBB probe avoids a warning
numba.config.THREADING_LAYER = "workqueue"
from numba import njit, prange

from .asymptotics import clt_scale
from .core import ErwParams, ResourceLimitError, ValidationError

__all__ = [
    "Dynamics",
    "SimConfig",
    "RunningStats",
    "SimResult",
    "FirstReturnSample",
    "simulate",
    "simulate_terminal",
    "simulate_replay",
    "first_return_times",
    "kolmogorov_distance",
    "set_threads",
]

MAX_MOMENT_ORDER = 12

#: Replay stores one byte per step per replica; refuse longer horizons.
REPLAY_HORIZON_CAP = 200_000

_U64 = np.uint64
_GOLDEN = _U64(0x9E3779B97F4A7C15)
_MIX_B = _U64(0xBF58476D1CE4E5B9)
_MIX_C = _U64(0x94D049BB133111EB)
_INV53 = 1.0 / 9007199254740992.0  # 2^-53


def set_threads(count: int) -> None:
    """Cap the simulation worker count (output does not depend on it).

    Clamped to the threads numba actually has available.
    """
    import numba

    numba.set_num_threads(min(max(1, int(count)), numba.config.NUMBA_NUM_THREADS))


@njit(inline="always")
def _mix64(z):
    z = (z ^ (z >> _U64(30))) * _MIX_B
    z = (z ^ (z >> _U64(27))) * _MIX_C
    return z ^ (z >> _U64(31))


@njit(inline="always")
def _replica_seed(master, r):
    return _mix64(master ^ _mix64(_U64(r + 1) * _GOLDEN))


@njit(inline="always")
def _next_uniform(state):
    state = state + _GOLDEN
    z = _mix64(state)
    return state, (z >> _U64(11)) * _INV53


@njit(cache=True)
def _stream_probe(master, r, count):
    """First ``count`` uniforms of one replica stream (for verification)."""
    out = np.empty(count, dtype=np.float64)
    state = _replica_seed(master, r)
    for i in range(count):
        state, u = _next_uniform(state)
        out[i] = u
    return out


@njit(parallel=True, cache=True)
def _run_conditional(replicas, horizon, alpha, q, master, times, out):
    # "u < (1 + a s/n)/2" is evaluated as "(2u - 1) n < a s": same event,
    # no per-step division
    ntimes = times.shape[0]
    for r in prange(replicas):
        state = _replica_seed(master, r)
        state, u = _next_uniform(state)
        s = 1 if u < q else -1
        ti = 0
        if times[ti] == 1:
            out[ti, r] = s
            ti += 1
        next_rec = times[ti] if ti < ntimes else 0
        tf = 1.0
        for t in range(2, horizon + 1):
            state, u = _next_uniform(state)
            if (2.0 * u - 1.0) * tf < alpha * s:
                s += 1
            else:
                s -= 1
            tf += 1.0
            if t == next_rec:
                out[ti, r] = s
                ti += 1
                next_rec = times[ti] if ti < ntimes else 0


@njit(parallel=True, cache=True)
def _run_replay(replicas, horizon, p, q, master, times, out):
    for r in prange(replicas):
        x = np.empty(horizon, dtype=np.int8)
        state = _replica_seed(master, r)
        state, u = _next_uniform(state)
        x[0] = 1 if u < q else -1
        s = int(x[0])
        ti = 0
        if times[ti] == 1:
            out[ti, r] = s
            ti += 1
        for t in range(2, horizon + 1):
            state, u = _next_uniform(state)
            recalled = x[int(u * (t - 1))]
            state, u = _next_uniform(state)
            step = recalled if u < p else -recalled
            x[t - 1] = step
            s += step
            if ti < times.shape[0] and t == times[ti]:
                out[ti, r] = s
                ti += 1


@njit(parallel=True, cache=True)
def _run_first_return(replicas, horizon, alpha, q, master, out_time):
    for r in prange(replicas):
        state = _replica_seed(master, r)
        state, u = _next_uniform(state)
        s = 1 if u < q else -1
        hit = 0
        tf = 1.0
        for t in range(2, horizon + 1):
            state, u = _next_uniform(state)
            if (2.0 * u - 1.0) * tf < alpha * s:
                s += 1
            else:
                s -= 1
            tf += 1.0
            if s == 0:
                hit = t
                break
        out_time[r] = hit


class Dynamics(Enum):
    CONDITIONAL = "conditional"
    REPLAY = "replay"


@dataclass(frozen=True)
class SimConfig:
    """One simulation job; the seed is mandatory and fully determines it."""

    params: ErwParams
    horizon: int
    replicas: int
    seed: int
    dynamics: Dynamics = Dynamics.CONDITIONAL
    checkpoints: Tuple[int, ...] = ()
    keep_terminal_samples: bool = False
    replay_horizon_cap: int = REPLAY_HORIZON_CAP

    def __post_init__(self):
        if self.replicas < 1:
            raise ValidationError(f"replicas must be >= 1, got {self.replicas}")
        if self.horizon < 1:
            raise ValidationError(f"horizon must be >= 1, got {self.horizon}")
        cps = tuple(sorted(set(int(c) for c in self.checkpoints)))
        object.__setattr__(self, "checkpoints", cps)
        if cps and not (1 <= cps[0] and cps[-1] <= self.horizon):
            raise ValidationError(
                f"checkpoints must lie within [1, {self.horizon}], got {cps}"
            )
        if not isinstance(self.seed, int):
            raise ValidationError("seed must be an integer")

    @property
    def record_times(self) -> Tuple[int, ...]:
        times = set(self.checkpoints)
        times.add(self.horizon)
        return tuple(sorted(times))


class RunningStats:
    """Exact accumulator of walk positions observed at one fixed time.

    Holds an integer histogram over the support {-n, -n+2, ..., n}; counts,
    power sums, normalized moments, the empirical CDF and its Kolmogorov
    distance to the standard normal all derive from it.  Merging adds
    histograms: exactly associative and commutative.
    """

    def __init__(self, params: ErwParams, n: int, counts: Optional[np.ndarray] = None):
        self.params = params
        self.n = int(n)
        if counts is None:
            counts = np.zeros(self.n + 1, dtype=np.int64)
        if counts.shape != (self.n + 1,):
            raise ValidationError("histogram must have n + 1 slots")
        self.counts = counts
        self._power_sums: Dict[int, int] = {}

    @classmethod
    def from_values(cls, params: ErwParams, n: int, values: np.ndarray) -> "RunningStats":
        values = np.asarray(values)
        if values.size and (
            int(np.max(np.abs(values))) > n
            or np.any((values.astype(np.int64) + n) % 2 != 0)
        ):
            raise ValidationError("positions must satisfy |S| <= n and S = n (mod 2)")
        idx = (values.astype(np.int64) + n) >> 1
        counts = np.bincount(idx, minlength=n + 1).astype(np.int64)
        return cls(params, n, counts)

    @property
    def count(self) -> int:
        return int(self.counts.sum())

    def support(self) -> tuple[np.ndarray, np.ndarray]:
        """(values, counts) over the occupied part of the histogram."""
        nz = np.nonzero(self.counts)[0]
        return (2 * nz - self.n).astype(np.int64), self.counts[nz]

    def power_sum(self, k: int) -> int:
        """Exact integer sum of S^k over all accumulated replicas."""
        if not 1 <= k <= MAX_MOMENT_ORDER:
            raise ValidationError(f"order must lie in [1, {MAX_MOMENT_ORDER}]")
        if k not in self._power_sums:
            vals, cnts = self.support()
            self._power_sums[k] = sum(
                int(c) * int(v) ** k for v, c in zip(vals, cnts)
            )
        return self._power_sums[k]

    def merge(self, other: "RunningStats") -> "RunningStats":
        if other.n != self.n or other.params != self.params:
            raise ValidationError("can only merge accumulators of the same job")
        return RunningStats(self.params, self.n, self.counts + other.counts)

    def normalized_moment(self, k: int, scale: Optional[float] = None) -> float:
        """Empirical E[(S_n/scale)^k]; scale defaults to the CLT normalization."""
        if scale is None:
            scale = clt_scale(self.params, self.n)
        return float(self.power_sum(k)) / self.count / scale**k

    def moment_standard_error(self, k: int, scale: Optional[float] = None) -> float:
        """Standard error of the order-k normalized empirical moment."""
        if 2 * k > MAX_MOMENT_ORDER:
            raise ValidationError(f"need order {2*k} power sums, capped at {MAX_MOMENT_ORDER}")
        m_k = self.normalized_moment(k, scale)
        m_2k = self.normalized_moment(2 * k, scale)
        var = max(m_2k - m_k**2, 0.0)
        return math.sqrt(var / self.count)

    def kolmogorov_distance(self, scale: Optional[float] = None) -> float:
        """Exact sup distance between the empirical CDF of S_n/scale and the
        standard normal CDF (both one-sided limits at every jump)."""
        if self.count == 0:
            raise ValidationError("empty accumulator")
        if scale is None:
            scale = clt_scale(self.params, self.n)
        vals, cnts = self.support()
        return _ks_from_weighted(vals / scale, cnts)


def _ks_from_weighted(points: np.ndarray, counts: np.ndarray) -> float:
    total = counts.sum()
    cum = np.cumsum(counts) / total
    phi = ndtr(points)
    upper = np.max(np.abs(cum - phi))
    lower = np.max(np.abs(np.concatenate(([0.0], cum[:-1])) - phi))
    return float(max(upper, lower))


def kolmogorov_distance(samples: Sequence[float]) -> float:
    """Sup distance between the empirical CDF of the samples and the
    standard normal CDF, exact over the jump points."""
    samples = np.asarray(samples, dtype=np.float64)
    if samples.size == 0:
        raise ValidationError("need at least one sample")
    xs, cnts = np.unique(samples, return_counts=True)
    return _ks_from_weighted(xs, cnts)


@dataclass(frozen=True)
class SimResult:
    """Accumulators per recorded time; terminal raw values if requested."""

    config: SimConfig
    stats: Dict[int, RunningStats]
    terminal_values: Optional[np.ndarray] = None

    @property
    def terminal(self) -> RunningStats:
        return self.stats[self.config.horizon]


def _record_times_array(config: SimConfig) -> np.ndarray:
    return np.asarray(config.record_times, dtype=np.int64)


def simulate(config: SimConfig) -> SimResult:
    """Run the configured dynamics."""
    if config.dynamics is Dynamics.REPLAY:
        return simulate_replay(config)
    return simulate_terminal(config)


def _package(config: SimConfig, times: np.ndarray, out: np.ndarray) -> SimResult:
    stats = {
        int(t): RunningStats.from_values(config.params, int(t), out[i])
        for i, t in enumerate(times)
    }
    terminal = out[-1].copy() if config.keep_terminal_samples else None
    return SimResult(config=config, stats=stats, terminal_values=terminal)


def simulate_terminal(config: SimConfig) -> SimResult:
    """Conditional-law dynamics: O(1) memory per replica, any horizon.

    The step probability is recomputed each step from the exact integer
    position, so rounding never accumulates in the dynamics.
    """
    if config.dynamics is not Dynamics.CONDITIONAL:
        raise ValidationError("config.dynamics must be CONDITIONAL here")
    times = _record_times_array(config)
    out = np.empty((times.size, config.replicas), dtype=np.int32)
    _run_conditional(
        config.replicas,
        config.horizon,
        float(config.params.alpha),
        float(config.params.q),
        _U64(config.seed & 0xFFFFFFFFFFFFFFFF),
        times,
        out,
    )
    return _package(config, times, out)


def simulate_replay(config: SimConfig) -> SimResult:
    """Literal uniform-memory dynamics; distributionally identical to the
    conditional law and kept as a fidelity oracle."""
    if config.dynamics is not Dynamics.REPLAY:
        raise ValidationError("config.dynamics must be REPLAY here")
    if config.horizon > config.replay_horizon_cap:
        raise ResourceLimitError(
            f"replay stores the full step history; horizon {config.horizon} "
            f"exceeds the cap {config.replay_horizon_cap}"
        )
    times = _record_times_array(config)
    out = np.empty((times.size, config.replicas), dtype=np.int32)
    _run_replay(
        config.replicas,
        config.horizon,
        float(config.params.p),
        float(config.params.q),
        _U64(config.seed & 0xFFFFFFFFFFFFFFFF),
        times,
        out,
    )
    return _package(config, times, out)


@dataclass(frozen=True)
class FirstReturnSample:
    """Per-replica first return to the origin, censored at the horizon."""

    horizon: int
    return_time: np.ndarray  # int64; valid where ``found``
    found: np.ndarray        # bool; False means censored at the horizon

    def censored_times(self, horizon: Optional[int] = None) -> np.ndarray:
        """min(return time, horizon); derivable for any smaller horizon."""
        h = self.horizon if horizon is None else int(horizon)
        if not 1 <= h <= self.horizon:
            raise ValidationError(f"horizon must lie in [1, {self.horizon}]")
        return np.where(self.found & (self.return_time <= h), self.return_time, h)

    def censored_mean(self, horizon: Optional[int] = None) -> float:
        return float(np.mean(self.censored_times(horizon)))


def first_return_times(config: SimConfig) -> FirstReturnSample:
    """Sample R = inf{n > 0 : S_n = 0} per replica under the conditional law."""
    raw = np.empty(config.replicas, dtype=np.int64)
    _run_first_return(
        config.replicas,
        config.horizon,
        float(config.params.alpha),
        float(config.params.q),
        _U64(config.seed & 0xFFFFFFFFFFFFFFFF),
        raw,
    )
    found = raw > 0
    times = np.where(found, raw, config.horizon)
    return FirstReturnSample(horizon=config.horizon, return_time=times, found=found)
