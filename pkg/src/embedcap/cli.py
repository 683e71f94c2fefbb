"""Command-line front end; every subcommand writes CSV for external plotting.

Models are written ``family[:key=value[,key=value]][@rate]``, for example
``exponential``, ``erlang:xi=2``, ``weibull:b=0.6@2.5`` or
``shifted_exponential:a=0.8``. The default seed for Monte Carlo methods is
read from ``EMBEDCAP_SEED`` and falls back to 0.
"""

from __future__ import annotations

import argparse
import io
import math
import os
import sys

import numpy as np

from . import capacity as cap
from .ordering import convex_order_check, predict_capacity_order
from .renewal_models import Family, InterarrivalModel, SHAPE_NAME, SeriesDivergenceError
from .traces import (
    TraceError,
    WeibullFitError,
    capacity_error_table,
    fit_weibull_shape,
    format_error_table,
    parse_trace,
    scramble_pair,
    select_tranches,
)

SEED_ENV = "EMBEDCAP_SEED"
DEFAULT_SEED = 0

_FAMILY_ALIASES = {
    "exp": Family.EXPONENTIAL,
    "shifted-exponential": Family.SHIFTED_EXPONENTIAL,
    "shiftedexp": Family.SHIFTED_EXPONENTIAL,
}


class CliError(Exception):
    """A user-facing failure; printed to standard error."""


def parse_model_spec(text: str) -> InterarrivalModel:
    """Turn ``family[:k=v[,k=v]][@rate]`` into an :class:`InterarrivalModel`.

    Raises
    ------
    ValueError
        Unknown family, unknown or repeated key, or a value that does not
        parse. The message names the offending part.
    """
    spec = text.strip()
    body, at, rate_text = spec.partition("@")
    name, _, params = body.partition(":")
    name = name.strip().lower()
    try:
        family = _FAMILY_ALIASES.get(name) or Family(name)
    except ValueError:
        known = ", ".join(f.value for f in Family)
        raise ValueError(f"unknown family {name!r} in model {text!r} (known: {known})") from None
    values = {}
    if params:
        for item in params.split(","):
            key, eq, val = item.partition("=")
            key = key.strip()
            if not eq:
                raise ValueError(f"parameter {item!r} in model {text!r} is not key=value")
            if key in values:
                raise ValueError(f"parameter {key!r} given twice in model {text!r}")
            try:
                values[key] = float(val)
            except ValueError:
                raise ValueError(f"parameter {key!r} has non-numeric value {val!r}") from None
    rate = 1.0
    if "rate" in values:
        rate = values.pop("rate")
    if at:
        if not rate_text.strip():
            raise ValueError(f"missing rate after '@' in model {text!r}")
        try:
            rate = float(rate_text)
        except ValueError:
            raise ValueError(f"rate {rate_text!r} in model {text!r} is not a number") from None
    shape_key = SHAPE_NAME[family]
    unknown = set(values) - {shape_key}
    if unknown:
        allowed = shape_key or "no shape parameter"
        raise ValueError(f"unknown parameter {sorted(unknown)[0]!r} for {family.value} (accepts {allowed})")
    return InterarrivalModel(family, values.get(shape_key), rate)


def _default_seed():
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw == "":
        return DEFAULT_SEED
    try:
        return int(raw)
    except ValueError:
        raise CliError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


def _model_arg(text):
    try:
        return parse_model_spec(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _method_list(text):
    try:
        return [cap.Method.parse(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _float_list(text):
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _num(x: float) -> str:
    return repr(float(x))


def _capacity_row(est: cap.CapacityEstimate, pad_stderr=False) -> str:
    fields = [_num(est.delta), str(est.method), _num(est.value)]
    if est.stderr is not None and not math.isnan(est.stderr):
        fields.append(_num(est.stderr))
    elif pad_stderr:
        fields.append("")
    return ",".join(fields)


def _normalized_delay(args, model):
    has_delta = args.delta is not None
    has_phys = args.max_delay is not None
    if has_delta == has_phys:
        raise CliError("give exactly one of --delta or --max-delay (with --rate or a model rate)")
    if has_delta:
        return args.delta
    rate = args.rate if args.rate is not None else model.rate
    return rate * args.max_delay


def cmd_capacity(args, out):
    model = args.model
    delta = _normalized_delay(args, model)
    seed = args.seed if args.seed is not None else _default_seed()
    for method in args.method:
        est = cap.estimate_capacity(model, delta, method, seed)
        out.write(_capacity_row(est) + "\n")


def cmd_sweep(args, out):
    if not 0 < args.delta_min < args.delta_max:
        raise CliError("need 0 < --delta-min < --delta-max")
    if args.points < 2:
        raise CliError("--points must be at least 2")
    if args.log:
        grid = np.geomspace(args.delta_min, args.delta_max, args.points)
    else:
        grid = np.linspace(args.delta_min, args.delta_max, args.points)
    seed = args.seed if args.seed is not None else _default_seed()
    out.write("delta,method,capacity,stderr\n")
    for d in grid:
        for method in args.methods:
            est = cap.estimate_capacity(args.model, float(d), method, seed)
            out.write(_capacity_row(est, pad_stderr=True) + "\n")


def cmd_order(args, out):
    verdict = convex_order_check(args.model1, args.model2, criterion=args.criterion)
    prediction = predict_capacity_order(args.model1, args.model2)
    out.write(f"{verdict.relation.value},{prediction}\n")


def cmd_matrix(args, out):
    model, delta, n = args.model, args.delta, args.order
    if n < 1:
        raise CliError("--order must be at least 1")
    out.write("h,k,entry\n")
    if args.fourier:
        for h in range(-n, n + 1):
            for k in range(-n, n + 1):
                out.write(f"{h},{k},{_num(cap.fourier_entry(model, delta, h, k))}\n")
        return
    a = cap.build_system_matrix(model, delta, n)
    for h in range(-n, n + 1):
        for k in range(-n, n + 1):
            out.write(f"{h},{k},{_num(a[h, k])}\n")


def cmd_trace(args, out):
    source = parse_trace(args.source, args.column)
    relay = parse_trace(args.relay, args.column)
    pair = select_tranches(source, relay, args.n, args.window)
    if args.scramble:
        seed = args.seed if args.seed is not None else _default_seed()
        pair = scramble_pair(pair, np.random.default_rng(seed))
    fit = fit_weibull_shape(pair)
    note = " (at search bound)" if fit.at_bound else ""
    print(f"fitted weibull shape b={fit.shape:.6g}{note}", file=sys.stderr)
    rows = capacity_error_table(pair, args.deltas, args.observation_limit, shape=fit.shape)
    out.write(format_error_table(rows))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="embedcap", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--output", "-o", help="write CSV here instead of standard output")

    def seeded(p):
        p.add_argument("--seed", type=int, default=None,
                       help=f"Monte Carlo seed (default: ${SEED_ENV} or {DEFAULT_SEED})")

    p = sub.add_parser("capacity", help="capacity at one delay")
    p.add_argument("--model", "-m", type=_model_arg, required=True)
    p.add_argument("--delta", "-d", type=float, help="normalized delay rate*Delta")
    p.add_argument("--max-delay", type=float, help="physical delay bound Delta")
    p.add_argument("--rate", type=float, help="rate for --max-delay (default: the model's rate)")
    p.add_argument("--method", type=_method_list, default=[cap.Method.parse("zero")],
                   help="zero | linear:N | mc-chain:steps | mc-bgm:points, comma-separated")
    seeded(p)
    common(p)
    p.set_defaults(func=cmd_capacity)

    p = sub.add_parser("sweep", help="capacity over a grid of delays")
    p.add_argument("--model", "-m", type=_model_arg, required=True)
    p.add_argument("--delta-min", type=float, required=True)
    p.add_argument("--delta-max", type=float, required=True)
    p.add_argument("--points", type=int, default=20)
    p.add_argument("--methods", type=_method_list, default=[cap.Method.parse("zero")])
    p.add_argument("--log", action="store_true", help="log-spaced grid")
    seeded(p)
    common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("order", help="variability order and predicted capacity order")
    p.add_argument("model1", type=_model_arg)
    p.add_argument("model2", type=_model_arg)
    p.add_argument("--criterion", choices=("survival", "lorenz"), default="survival")
    common(p)
    p.set_defaults(func=cmd_order)

    p = sub.add_parser("matrix", help="entries of the order-N system")
    p.add_argument("--model", "-m", type=_model_arg, required=True)
    p.add_argument("--delta", "-d", type=float, required=True)
    p.add_argument("--order", "-n", type=int, default=1)
    p.add_argument("--fourier", action="store_true", help="frequency-domain entries")
    common(p)
    p.set_defaults(func=cmd_matrix)

    p = sub.add_parser("trace", help="empirical vs theoretical capacity on packet traces")
    p.add_argument("source")
    p.add_argument("relay")
    p.add_argument("--n", type=int, default=10_000, help="packets per tranche")
    p.add_argument("--window", type=int, default=None, help="rate window (default: --n)")
    p.add_argument("--column", type=int, default=1, help="timestamp column, counting from 1")
    p.add_argument("--deltas", type=_float_list, default=[0.25, 0.5, 1.0, 2.0, 4.0])
    p.add_argument("--scramble", action="store_true", help="permute interarrivals first")
    p.add_argument("--observation-limit", type=float, default=9000.0)
    seeded(p)
    common(p)
    p.set_defaults(func=cmd_trace)
    return parser


_EXPECTED = (
    CliError,
    ValueError,
    ArithmeticError,
    NotImplementedError,
    OSError,
    TraceError,
    WeibullFitError,
    np.linalg.LinAlgError,
    SeriesDivergenceError,
)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    buf = io.StringIO()
    try:
        args.func(args, buf)
        text = buf.getvalue()
        if args.output:
            with open(args.output, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
    except _EXPECTED as exc:
        print(f"embedcap {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
