"""Command-line entry point.

Subcommands: exact, deviations, rates, simulate, bounds, first-return.
Every run writes its output file plus a sibling ``<output>.manifest.json``
holding the fully resolved parameters; re-running the argv recorded in a
manifest reproduces the output byte for byte (simulation included, through
the mandatory seed).

Exit codes: 0 success, 2 invalid parameters, 3 resource cap hit.

Memory and bias parameters take exact rationals: canonical syntax is
"p/q" (e.g. --alpha 1/4); a decimal literal is accepted and parsed as the
exact decimal fraction, with a warning when that fraction is not dyadic,
since the knife-edge branches hinge on exact values.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
from fractions import Fraction
from typing import Optional

import numpy as np

from . import __version__
from .core import ErwParams, ResourceLimitError, ValidationError
from . import asymptotics, deviations, moments, rates, simulation

PROG = "erwalk"


def parse_rational(text: str) -> Fraction:
    """Exact rational from 'p/q', integer, or decimal-string syntax."""
    try:
        value = Fraction(text.strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise ValidationError(f"cannot parse {text!r} as a rational") from exc
    return value


def _rational_flag_warning(name: str, text: str, value: Fraction) -> Optional[str]:
    if "/" in text or value.denominator & (value.denominator - 1) == 0:
        return None
    return (
        f"decimal {name}={text} parsed as the exact rational {value}; "
        f"write it as {value.numerator}/{value.denominator} to silence this"
    )


def parse_count(text: str) -> int:
    """Positive integer with 10^k and scientific shorthand."""
    t = text.strip().lower().replace("_", "")
    try:
        if "^" in t:
            base, exp = t.split("^")
            val = int(base) ** int(exp)
        else:
            val = int(t) if ("e" not in t and "." not in t) else int(float(t))
    except ValueError as exc:
        raise ValidationError(f"cannot parse {text!r} as an integer") from exc
    if val < 1:
        raise ValidationError(f"expected a positive count, got {text!r}")
    return val


def _parse_int_list(text: str) -> list[int]:
    return [parse_count(tok) for tok in text.split(",") if tok.strip()]


def _resolve_threads(args) -> Optional[int]:
    if getattr(args, "threads", None) is not None:
        return args.threads
    env = os.environ.get("ERW_THREADS")
    return int(env) if env else None


class _Run:
    """Collects rows, warnings, and metadata for one invocation."""

    def __init__(self, args, subcommand: str, argv: list[str]):
        self.args = args
        self.subcommand = subcommand
        self.argv = argv
        self.warnings: list[str] = []
        self.extra: dict = {}

    def warn(self, message: str) -> None:
        self.warnings.append(message)
        print(f"{PROG}: warning: {message}", file=sys.stderr)

    def parse_params(self) -> ErwParams:
        alpha = parse_rational(self.args.alpha)
        beta = parse_rational(getattr(self.args, "beta", "0"))
        for name, text, val in (
            ("alpha", self.args.alpha, alpha),
            ("beta", getattr(self.args, "beta", "0"), beta),
        ):
            note = _rational_flag_warning(name, str(text), val)
            if note:
                self.warn(note)
        return ErwParams(alpha, beta)

    def emit(self, header: list[str], rows: list[list]) -> int:
        fmt = getattr(self.args, "format", "csv")
        if fmt == "json":
            payload = [dict(zip(header, row)) for row in rows]
            text = json.dumps(payload, indent=1, sort_keys=True) + "\n"
        else:
            buf = io.StringIO()
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
            text = buf.getvalue()
        data = text.encode()
        out_path = self.args.output
        if out_path == "-":
            sys.stdout.write(text)
            return 0
        with open(out_path, "wb") as fh:
            fh.write(data)
        outputs = [
            {"path": out_path, "sha256": hashlib.sha256(data).hexdigest()}
        ]
        for path, digest in self.extra.pop("_extra_outputs", []):
            outputs.append({"path": path, "sha256": digest})
        manifest = {
            "tool": PROG,
            "version": __version__,
            "subcommand": self.subcommand,
            "argv_without_output": self.argv,
            "outputs": outputs,
            "warnings": self.warnings,
        }
        manifest.update(self.extra)
        with open(out_path + ".manifest.json", "w") as fh:
            json.dump(manifest, fh, indent=1, sort_keys=True)
            fh.write("\n")
        return 0


def _f17(x: float) -> str:
    return format(float(x), ".17g")


# ---------------------------------------------------------------------------
# subcommand handlers
# ---------------------------------------------------------------------------

def _cmd_exact(run: _Run) -> int:
    args = run.args
    params = run.parse_params()
    n = parse_count(args.n)
    orders = _parse_int_list(args.orders)
    if not orders:
        raise ValidationError("--orders must list at least one order")
    K = max(orders)
    K += K % 2
    mv = moments.moments_at(params, n, K, max_bits=args.max_bits)
    rows = [[k, f"{mv[k].numerator}/{mv[k].denominator}", _f17(float(mv[k]))]
            for k in orders]
    return run.emit(["order", "value", "value_float"], rows)


def _series_for_order(params, order, n_max, per_decade):
    grid = deviations.default_grid(n_max, per_decade=per_decade)
    if order % 2 == 1:
        return deviations.deviations_odd(params, order, n_max, grid)
    if params.alpha == Fraction(1, 2):
        return deviations.deviations_critical(params, order, n_max, grid)
    return deviations.deviations_subcritical(params, order, n_max, grid)


def _cmd_deviations(run: _Run) -> int:
    args = run.args
    params = run.parse_params()
    n_max = parse_count(args.n_max)
    orders = _parse_int_list(args.orders)
    rows = []
    for order in orders:
        series = _series_for_order(params, order, n_max, args.per_decade)
        for n, v in zip(series.grid, series.values):
            rows.append([int(n), order, _f17(v), series.normalization.value])
    return run.emit(["n", "order", "value", "normalization"], rows)


def _cmd_rates(run: _Run) -> int:
    args = run.args
    n_max = parse_count(args.n_max)
    alphas = [parse_rational(tok) for tok in args.alpha_grid.split(",") if tok.strip()] \
        if args.alpha_grid else list(rates.DEFAULT_ALPHA_GRID)
    orders = _parse_int_list(args.orders) if args.orders else list(rates.DEFAULT_ORDERS)
    beta = parse_rational(args.beta)
    if n_max < 10**5:
        run.warn(
            f"n_max={n_max} is a short horizon; fitted exponents carry "
            f"visible transient bias"
        )
    window = None
    if args.window:
        lo, hi = (parse_count(tok) for tok in args.window.split(","))
        window = (lo, hi)
    cells = rates.crossover_scan(alphas, orders, n_max, beta=beta, window=window)
    run.extra["cells"] = len(cells)
    buf = io.StringIO()
    rates.scan_to_csv(cells, buf)
    reader = csv.reader(io.StringIO(buf.getvalue()))
    header = next(reader)
    return run.emit(header, [row for row in reader])


def _stats_rows(result: simulation.SimResult) -> list[list]:
    rows = []
    for t in sorted(result.stats):
        st = result.stats[t]
        scale = asymptotics.clt_scale(st.params, t)
        row = [t, st.count]
        row += [_f17(st.normalized_moment(k, scale)) for k in range(1, 13)]
        row += [_f17(st.kolmogorov_distance(scale))]
        rows.append(row)
    return rows


_STATS_HEADER = ["n", "count"] + [f"m{k}" for k in range(1, 13)] + ["ks_distance"]


def _cmd_simulate(run: _Run) -> int:
    args = run.args
    params = run.parse_params()
    threads = _resolve_threads(args)
    if threads:
        simulation.set_threads(threads)
    run.extra["threads"] = threads
    config = simulation.SimConfig(
        params=params,
        horizon=parse_count(args.n),
        replicas=parse_count(args.replicas),
        seed=args.seed,
        dynamics=simulation.Dynamics(args.dynamics),
        checkpoints=tuple(_parse_int_list(args.checkpoints)) if args.checkpoints else (),
        keep_terminal_samples=bool(args.dump_samples),
    )
    result = simulation.simulate(config)
    if args.dump_samples:
        raw = result.terminal_values.astype("<f8").tobytes()
        with open(args.dump_samples, "wb") as fh:
            fh.write(raw)
        run.extra["_extra_outputs"] = [
            (args.dump_samples, hashlib.sha256(raw).hexdigest())
        ]
    return run.emit(_STATS_HEADER, _stats_rows(result))


def _cmd_bounds(run: _Run) -> int:
    args = run.args
    params = run.parse_params()
    n_max = parse_count(args.n_max)
    grid = deviations.default_grid(n_max, per_decade=args.per_decade, n_min=3)
    supports_sums = (
        0 < params.alpha <= Fraction(1, 2) or -1 < params.alpha < 0
    )
    rows = []
    for n in grid:
        n = int(n)
        row = [n, _f17(asymptotics.berry_esseen_shape(params, n))]
        if supports_sums:
            s2, sig2 = asymptotics.martingale_variance_sums(params, n)
            row += [_f17(s2), _f17(sig2), _f17(math.sqrt(s2 / sig2) - 1.0)]
        else:
            row += ["", "", ""]
        rows.append(row)
    if not supports_sums:
        run.warn("variance sums need alpha in (-1,0) or (0,1/2]; columns left blank")
    return run.emit(
        ["n", "bound_shape", "variance_sum", "variance_norm", "ratio_minus_one"],
        rows,
    )


def _cmd_first_return(run: _Run) -> int:
    args = run.args
    params = run.parse_params()
    threads = _resolve_threads(args)
    if threads:
        simulation.set_threads(threads)
    horizon = parse_count(args.horizon)
    config = simulation.SimConfig(
        params=params,
        horizon=horizon,
        replicas=parse_count(args.replicas),
        seed=args.seed,
    )
    sample = simulation.first_return_times(config)
    report = (
        sorted(set(_parse_int_list(args.report_horizons)))
        if args.report_horizons
        else [horizon]
    )
    bad = [h for h in report if h > horizon]
    if bad:
        raise ValidationError(f"report horizons {bad} exceed the run horizon {horizon}")
    run.extra["censored_means"] = {
        str(h): _f17(sample.censored_mean(h)) for h in report
    }
    rows = [
        [int(i), int(t), int(not f)]
        for i, (t, f) in enumerate(zip(sample.return_time, sample.found))
    ]
    return run.emit(["replica", "return_time", "censored"], rows)


class _RationalArgumentParser(argparse.ArgumentParser):
    """ArgumentParser that accepts negative rationals like -1/4 as values."""

    _NEGATIVE_VALUE = __import__("re").compile(
        r"^-\d+(/\d+)?(\.\d+)?([eE][-+]?\d+)?$"
    )

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self._negative_number_matcher = self._NEGATIVE_VALUE


def build_parser() -> argparse.ArgumentParser:
    parser = _RationalArgumentParser(
        prog=PROG,
        description="Exact moments, rate laws, and Monte Carlo checks for the "
        "elephant random walk.",
    )
    parser.add_argument("--version", action="version", version=f"{PROG} {__version__}")
    sub = parser.add_subparsers(
        dest="subcommand", required=True, parser_class=_RationalArgumentParser
    )

    def common(p, beta=True):
        p.add_argument("--alpha", required=True,
                       help="memory parameter in (-1,1), exact rational like 1/4")
        if beta:
            p.add_argument("--beta", default="0",
                           help="first-step bias in [-1,1], exact rational (default %(default)s)")
        p.add_argument("--output", "-o", default="-",
                       help="output file path, or - for stdout (default %(default)s)")
        p.add_argument("--format", choices=("csv", "json"), default="csv",
                       help="output format (default %(default)s)")

    p = sub.add_parser("exact", help="exact rational moments at one time")
    common(p)
    p.add_argument("--n", required=True, help="time (number of steps)")
    p.add_argument("--orders", default="1,2",
                   help="comma list of moment orders (default %(default)s)")
    p.add_argument("--max-bits", type=int, default=moments.DEFAULT_MAX_BITS,
                   help="cap on internal integer size in bits (default %(default)s)")
    p.set_defaults(func=_cmd_exact)

    p = sub.add_parser("deviations", help="normalized moment deviation series")
    common(p)
    p.add_argument("--n-max", required=True, help="largest time on the grid")
    p.add_argument("--orders", default="2", help="comma list of orders (default %(default)s)")
    p.add_argument("--per-decade", type=int, default=40,
                   help="grid points per decade of n (default %(default)s)")
    p.set_defaults(func=_cmd_deviations)

    p = sub.add_parser("rates", help="fit decay exponents over a parameter grid")
    p.add_argument("--alpha-grid", default="",
                   help="comma list of memory parameters (default: built-in grid)")
    p.add_argument("--orders", default="", help="comma list of orders (default 1..6)")
    p.add_argument("--beta", default="1",
                   help="first-step bias used for odd orders (default %(default)s)")
    p.add_argument("--n-max", default="10^6", help="horizon (default %(default)s)")
    p.add_argument("--window", default="",
                   help="fit window as lo,hi (default n_max/100,n_max)")
    p.add_argument("--output", "-o", default="-")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=_cmd_rates)

    p = sub.add_parser("simulate", help="Monte Carlo moment and CDF statistics")
    common(p)
    p.add_argument("--n", required=True, help="horizon (steps per replica)")
    p.add_argument("--replicas", required=True, help="number of replicas")
    p.add_argument("--seed", type=int, required=True,
                   help="master seed (required; runs are reproducible)")
    p.add_argument("--dynamics", choices=("conditional", "replay"),
                   default="conditional",
                   help="step rule: O(1) conditional law or literal memory "
                   "replay (default %(default)s)")
    p.add_argument("--checkpoints", default="",
                   help="comma list of intermediate times to record")
    p.add_argument("--dump-samples", default="",
                   help="optional path for raw terminal positions "
                   "(little-endian float64)")
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads (env ERW_THREADS; output independent)")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("bounds", help="normal-approximation bound shapes and "
                       "variance sums")
    common(p, beta=False)
    p.add_argument("--n-max", default="10^4", help="largest time (default %(default)s)")
    p.add_argument("--per-decade", type=int, default=10,
                   help="grid points per decade (default %(default)s)")
    p.set_defaults(func=_cmd_bounds)

    p = sub.add_parser("first-return", help="first-return-time sample, censored "
                       "at the horizon")
    common(p)
    p.add_argument("--horizon", required=True, help="censoring time (steps)")
    p.add_argument("--replicas", required=True, help="number of replicas")
    p.add_argument("--seed", type=int, required=True, help="master seed (required)")
    p.add_argument("--report-horizons", default="",
                   help="comma list of horizons for censored means in the manifest")
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads (env ERW_THREADS; output independent)")
    p.set_defaults(func=_cmd_first_return)

    return parser


def build_argv(manifest: dict, output: str) -> list[str]:
    """Reconstruct a command line from a manifest, with a new output path."""
    return list(manifest["argv_without_output"]) + ["--output", output]


def main(argv: Optional[list[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    stripped = _strip_output(argv)
    run = _Run(args, args.subcommand, stripped)
    try:
        return args.func(run)
    except ValidationError as exc:
        print(f"{PROG}: error: {exc}", file=sys.stderr)
        return 2
    except ResourceLimitError as exc:
        print(f"{PROG}: resource cap: {exc}", file=sys.stderr)
        return 3


def _strip_output(argv: list[str]) -> list[str]:
    out = []
    skip = False
    for tok in argv:
        if skip:
            skip = False
            continue
        if tok in ("--output", "-o"):
            skip = True
            continue
        if tok.startswith("--output="):
            continue
        out.append(tok)
    return out


if __name__ == "__main__":
    sys.exit(main())
